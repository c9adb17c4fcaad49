use ctxshap_core::prompt::{parse_response, FormatProblem, PromptError};
use ctxshap_testkit as kit;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn names() -> Vec<String> {
    ["AST", "GGT", "ALP", "BIL", "Age"].iter().map(|s| s.to_string()).collect()
}

fn format_problem(raw: &str) -> (String, FormatProblem) {
    match parse_response(raw) {
        Err(PromptError::Format { section, problem }) => (section, problem),
        other => panic!("expected a format error, got {other:?}\n{raw}"),
    }
}

#[test]
fn generated_responses_parse() {
    let mut rng = StdRng::seed_from_u64(2024);
    for i in 0..1000 {
        let r = kit::random_response(&mut rng, &names());
        let parsed = parse_response(&r.raw).unwrap_or_else(|e| panic!("case {i}: {e}\n{}", r.raw));
        assert_eq!(parsed.summary, r.summary, "case {i}");
        assert_eq!(parsed.caveats, r.caveats, "case {i}");
        let notes: Vec<(String, String)> =
            parsed.per_feature.into_iter().map(|n| (n.name, n.text)).collect();
        assert_eq!(notes, r.per_feature, "case {i}");
    }
}

#[test]
fn mutation_classes_fail() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..200 {
        let r = kit::random_response(&mut rng, &names());
        let tag = ["SUMMARY", "PER_FEATURE", "CAVEATS"][rng.gen_range(0..3)];
        for (mutation, problem) in [
            (kit::Mutation::Missing, FormatProblem::Missing),
            (kit::Mutation::Duplicate, FormatProblem::Duplicated),
            (kit::Mutation::Empty, FormatProblem::Empty),
        ] {
            let broken = kit::mutate(&r, mutation, tag);
            assert_eq!(format_problem(&broken), (tag.to_string(), problem), "{mutation:?}\n{broken}");
        }
    }
}
