//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::net::TcpListener;
use std::path::Path;
use std::time::{Duration, Instant};

use ctxshap_core::format::fixed;
use ctxshap_core::model::{ModelDocument, NodeDocument, Objective, TreeDocument};
use ctxshap_core::plot::{build_waterfall, render_svg, PlotSpec, Theme};
use ctxshap_core::prompt::{
    parse_response, FormatProblem, GUARD_INSTANCE_CLAUSE, GUARD_PREDICTION_CLAUSE,
    GUARD_PROFESSIONAL_CLAUSE, GUARD_SYMBOL_CLAUSE,
};
use ctxshap_core::shap::shapley_weights;
use ctxshap_core::{
    assemble, exp_value, shapley, shapley_batch, Attribution, CoalitionMask, Instance, PlotKind,
    PromptError, Reader, ShapConfig, TreeEnsemble,
};
use ctxshap_testkit::{self as kit, scenarios, EnsembleParams, Mutation};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn random_params(rng: &mut StdRng, max_features: usize, path_unique: bool) -> EnsembleParams {
    EnsembleParams {
        features: rng.gen_range(1..=max_features),
        trees: rng.gen_range(1..=5),
        max_depth: rng.gen_range(1..=4),
        path_unique,
        feature_use_prob: 0.7,
    }
}

/// Shapley axioms over random ensembles.
fn criterion_1() -> Outcome {
    const CASES: u64 = 256;
    let started = Instant::now();
    let mut worst_gap = 0.0f64;
    let mut dummy_violations = 0;
    let mut dummies = 0;
    for seed in 0..CASES {
        let mut rng = StdRng::seed_from_u64(0xA11CE + seed);
        let params = random_params(&mut rng, 12, false);
        let doc = kit::random_document(&mut rng, params);
        let model = TreeEnsemble::from_document(&doc).expect("generated model parses");
        let x = kit::random_instance(&mut rng, params.features);
        let attr = shapley(&model, &x, &ShapConfig::default()).expect("within cap");
        let prediction = model.predict_raw(&x).expect("width");
        let base = exp_value(&model, &x, CoalitionMask::empty(params.features)).expect("covered");
        worst_gap = worst_gap.max((attr.phi().iter().sum::<f64>() - (prediction - base)).abs());
        for f in kit::unused_features(&doc) {
            dummies += 1;
            if attr.phi()[f] != 0.0 {
                dummy_violations += 1;
            }
        }
    }
    let mass_error = (1..=24)
        .map(|n| (kit::weight_mass(&shapley_weights(n)) - 1.0).abs())
        .fold(0.0, f64::max);
    let elapsed = started.elapsed();
    let pass = worst_gap <= 1e-9 && dummy_violations == 0 && mass_error <= 1e-12 && elapsed < Duration::from_secs(60);
    Outcome::new(
        pass,
        format!(
            "{CASES} ensembles: max efficiency gap {worst_gap:.2e} (<= 1e-9), {dummy_violations}/{dummies} dummy features non-zero, \
             weight mass error {mass_error:.2e} for n = 1..24 (<= 1e-12), {:.2} s (< 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn rational(value: f64, num: i64, den: i64) -> bool {
    let exact = num as f64 / den as f64;
    (value - exact).abs() <= 4.0 * f64::EPSILON * exact.abs().max(1.0)
}

fn tree(nodes: Vec<NodeDocument>) -> TreeDocument {
    TreeDocument { root: 0, nodes }
}

fn hand_model(features: &[&str], nodes: Vec<NodeDocument>) -> TreeEnsemble {
    TreeEnsemble::from_document(&ModelDocument {
        features: features.iter().map(|s| s.to_string()).collect(),
        base_score: 0.0,
        objective: Objective::Raw,
        trees: vec![tree(nodes)],
    })
    .expect("hand fixture parses")
}

/// Depth-1: x0 <= 10 splits 100 rows into 60 (leaf 2) and 40 (leaf 8); x = (3, 0).
/// Depth-2: a <= 5 (10 rows) -> [b <= 2 (6 rows) -> 1 (2 rows) | 4 (4 rows)] | 10 (4 rows); x = (3, 7).
fn hand_fixtures() -> Result<(), String> {
    let stump = hand_model(
        &["x0", "x1"],
        vec![
            NodeDocument::split(0, 0, 10.0, 1, 2, 100),
            NodeDocument::leaf(1, 2.0).with_cover(60),
            NodeDocument::leaf(2, 8.0).with_cover(40),
        ],
    );
    let x = Instance::new(vec![3.0, 0.0]).unwrap();
    let v = |m: &TreeEnsemble, x: &Instance, s: &[usize]| exp_value(m, x, CoalitionMask::from_indices(s, 2)).unwrap();
    let a = shapley(&stump, &x, &ShapConfig::default()).unwrap();
    let checks = [
        ("depth-1 v({})", v(&stump, &x, &[]), 22, 5),
        ("depth-1 v({x0})", v(&stump, &x, &[0]), 2, 1),
        ("depth-1 phi_x0", a.phi()[0], -12, 5),
        ("depth-1 phi_x1", a.phi()[1], 0, 1),
    ];

    let deep = hand_model(
        &["a", "b"],
        vec![
            NodeDocument::split(0, 0, 5.0, 1, 2, 10),
            NodeDocument::split(1, 1, 2.0, 3, 4, 6),
            NodeDocument::leaf(2, 10.0).with_cover(4),
            NodeDocument::leaf(3, 1.0).with_cover(2),
            NodeDocument::leaf(4, 4.0).with_cover(4),
        ],
    );
    let y = Instance::new(vec![3.0, 7.0]).unwrap();
    let b = shapley(&deep, &y, &ShapConfig::default()).unwrap();
    let more = [
        ("depth-2 v({})", v(&deep, &y, &[]), 29, 5),
        ("depth-2 v({a})", v(&deep, &y, &[0]), 3, 1),
        ("depth-2 v({b})", v(&deep, &y, &[1]), 32, 5),
        ("depth-2 v({a,b})", v(&deep, &y, &[0, 1]), 4, 1),
        ("depth-2 phi_a", b.phi()[0], -13, 5),
        ("depth-2 phi_b", b.phi()[1], 4, 5),
    ];
    for (name, value, num, den) in checks.into_iter().chain(more) {
        if !rational(value, num, den) {
            return Err(format!("{name} = {value}, expected {num}/{den}"));
        }
    }
    Ok(())
}

/// Empty-coalition expectation against brute-force background means.
fn criterion_2() -> Outcome {
    const CASES: u64 = 128;
    let mut worst = 0.0f64;
    for seed in 0..CASES {
        let mut rng = StdRng::seed_from_u64(0xB0B + seed);
        let params = random_params(&mut rng, 10, true);
        let doc = kit::random_document(&mut rng, params);
        let rows = rng.gen_range(1..=200);
        let background = kit::random_dataset(&mut rng, params.features, rows);
        let model = TreeEnsemble::from_document(&doc)
            .and_then(|m| m.fit_coverage(&background))
            .expect("fit");
        let x = kit::random_instance(&mut rng, params.features);
        let ours = exp_value(&model, &x, CoalitionMask::empty(params.features)).expect("covered");
        let raw: Vec<Vec<f64>> = background.rows().iter().map(|r| r.values().to_vec()).collect();
        worst = worst.max((ours - kit::brute_marginal_mean(&doc, &raw)).abs());
    }
    let fixtures = hand_fixtures();
    Outcome::new(
        worst <= 1e-9 && fixtures.is_ok(),
        format!(
            "{CASES} path-unique cases: max |E_empty - background mean| {worst:.2e} (<= 1e-9); hand fixtures: {}",
            fixtures.err().unwrap_or_else(|| "depth-1 and depth-2 match exact rationals".into())
        ),
    )
}

/// Base 0.131 and the nine listed contributions.
fn criterion_3() -> Outcome {
    const BASE: f64 = 0.131;
    const STEPS: [f64; 9] = [0.30, 0.20, 0.10, 0.05, 0.02, 0.01, -0.01, -0.02, -0.03];
    let labels: Vec<String> = ["AST", "GGT", "BIL", "CHOL", "CHE", "ALB", "ALP", "CREA", "ALT"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let walk_end = BASE + STEPS.iter().sum::<f64>();
    let attr = Attribution::new(STEPS.to_vec(), BASE, walk_end, Instance::new(vec![1.0; 9]).unwrap())
        .expect("efficient by construction");

    let mut identity_ok = true;
    let mut rendered = String::new();
    for max_steps in 0..=9 {
        let spec = build_waterfall(&attr, &labels, &[1.0; 9], max_steps).unwrap();
        identity_ok &= (spec.endpoint() - attr.prediction()).abs() <= 1e-12;
        let svg = render_svg(&PlotSpec::Waterfall(spec), &Theme::default());
        identity_ok &= svg.contains(r#"<tspan class="value">0.131</tspan>"#);
        rendered = svg
            .split(r#"<text class="endpoint prediction""#)
            .nth(1)
            .and_then(|s| s.split(r#"<tspan class="value">"#).nth(1))
            .and_then(|s| s.split('<').next())
            .unwrap_or("")
            .to_string();
    }
    let endpoint_ok = (walk_end - 0.761).abs() <= 1e-9;
    let display_ok = rendered == "0.76";
    let mut detail = format!(
        "endpoint {} (target 0.761), displayed {rendered:?} (target \"0.76\"), endpoint identity at all 10 truncation levels: {}",
        fixed(walk_end, 3),
        if identity_ok { "holds" } else { "BROKEN" }
    );
    if !endpoint_ok {
        detail.push_str(&format!(
            "; the nine contributions sum to {}, so base + sum = {} and the target is unreachable from these inputs",
            fixed(STEPS.iter().sum::<f64>(), 2),
            fixed(walk_end, 3)
        ));
    }
    Outcome::new(endpoint_ok && display_ok && identity_ok, detail)
}

/// Prompt goldens, guard containment and the budget property.
fn criterion_4() -> Outcome {
    let mut problems = Vec::new();
    for (name, bundle) in scenarios::golden_scenarios() {
        let path = scenarios::golden_dir().join(name);
        match std::fs::read_to_string(&path) {
            Ok(expected) if expected == bundle.to_markdown() => {}
            Ok(_) => problems.push(format!("{name} differs from golden")),
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }

    let languages = ["English", "Japanese", "Indonesian"];
    let clauses = [GUARD_PREDICTION_CLAUSE, GUARD_PROFESSIONAL_CLAUSE, GUARD_SYMBOL_CLAUSE, GUARD_INSTANCE_CLAUSE];
    let mut tallies = Vec::new();
    for budget in [256usize, 1024, 8192] {
        let (mut ok, mut refused) = (0, 0);
        for reader in [Reader::General, Reader::Expert] {
            for language in languages {
                let ctx = scenarios::liver_context(reader, language);
                for count in [1usize, 2, 5, 13, 40] {
                    for kind in [PlotKind::Bar, PlotKind::Waterfall] {
                        let attrs = match kind {
                            PlotKind::Bar => scenarios::attributions(count),
                            PlotKind::Waterfall => vec![scenarios::attribution(count)],
                        };
                        match assemble(kind, &attrs, &[], &scenarios::features(), &ctx, budget) {
                            Ok(bundle) => {
                                ok += 1;
                                if bundle.estimated_tokens() > budget || bundle.sample_count < 1 {
                                    problems.push(format!("budget {budget}: {} tokens", bundle.estimated_tokens()));
                                }
                                if !clauses.iter().all(|c| bundle.system_text.contains(c)) {
                                    problems.push("guard clause missing".into());
                                }
                            }
                            Err(PromptError::BudgetTooSmall { needed, .. }) if needed > budget => refused += 1,
                            Err(e) => problems.push(format!("budget {budget}: {e}")),
                        }
                    }
                }
            }
        }
        tallies.push(format!("{budget}: {ok} within budget, {refused} refused as too small"));
    }
    let pass = problems.is_empty();
    let mut detail = format!("3 goldens, guard clauses, budgets [{}]", tallies.join("; "));
    if !pass {
        detail.push_str(&format!("; problems: {}", problems.join(", ")));
    }
    Outcome::new(pass, detail)
}

/// Round-trip parsing of generated replies and the three mutation classes.
fn criterion_5() -> Outcome {
    let names: Vec<String> = scenarios::NAMES.iter().map(|s| s.to_string()).collect();
    let mut rng = StdRng::seed_from_u64(0x5EED);
    let mut parsed_ok = 0;
    let mut mutants = 0;
    let mut caught = 0;
    for _ in 0..1000 {
        let r = kit::random_response(&mut rng, &names);
        if let Ok(p) = parse_response(&r.raw) {
            let notes: Vec<(String, String)> = p.per_feature.into_iter().map(|n| (n.name, n.text)).collect();
            if p.summary == r.summary && p.caveats == r.caveats && notes == r.per_feature {
                parsed_ok += 1;
            }
        }
        for tag in ["SUMMARY", "PER_FEATURE", "CAVEATS"] {
            for (mutation, problem) in [
                (Mutation::Missing, FormatProblem::Missing),
                (Mutation::Duplicate, FormatProblem::Duplicated),
                (Mutation::Empty, FormatProblem::Empty),
            ] {
                mutants += 1;
                if let Err(PromptError::Format { section, problem: p }) = parse_response(&kit::mutate(&r, mutation, tag)) {
                    if section == tag && p == problem {
                        caught += 1;
                    }
                }
            }
        }
    }
    Outcome::new(
        parsed_ok == 1000 && caught == mutants,
        format!("{parsed_ok}/1000 generated replies parse to their source; {caught}/{mutants} mutants (missing, duplicate, empty) raise the expected format error"),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(Result::ok)
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

/// Two replay runs of the CLI against committed fixtures.
fn criterion_6() -> Outcome {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    listener.set_nonblocking(true).expect("nonblocking");
    let trap = format!("http://{}/v1", listener.local_addr().unwrap());
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut slowest = Duration::ZERO;
    let mut failures = Vec::new();
    for dir in &dirs {
        let started = Instant::now();
        let out = common::run(&[
            common::strs(&["explain", "--kind", "waterfall", "--index", "0", "--base-url", &trap]),
            common::liver_args(dir.path()),
            common::replay_args(),
        ]);
        slowest = slowest.max(started.elapsed());
        if common::code(&out) != 0 {
            failures.push(format!("exit {}: {}", common::code(&out), common::stderr(&out).trim()));
        }
    }
    let connections = std::iter::from_fn(|| listener.accept().ok()).count();
    let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let complete = names == ["attributions.json", "explanation.json", "plot.svg", "prompt.md", "report.json"];
    let report: serde_json::Value = a
        .iter()
        .find(|(n, _)| n == "report.json")
        .and_then(|(_, bytes)| serde_json::from_slice(bytes).ok())
        .unwrap_or_default();
    let sections = ["summary", "per_feature", "caveats"]
        .iter()
        .all(|k| report["explanation"].get(k).is_some());
    let pass = failures.is_empty() && a == b && complete && sections && connections == 0 && slowest < Duration::from_secs(5);
    Outcome::new(
        pass,
        format!(
            "artifacts {names:?}, byte-identical across runs: {}, explanation sections present: {sections}, \
             connections to endpoint: {connections}, slowest run {:.2} s (< 5 s){}",
            a == b,
            slowest.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

/// Batch output is bitwise identical on one thread and on many.
fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7);
    let params = EnsembleParams {
        features: 12,
        trees: 5,
        max_depth: 4,
        path_unique: false,
        feature_use_prob: 0.9,
    };
    let model = TreeEnsemble::from_document(&kit::random_document(&mut rng, params)).unwrap();
    let xs = kit::random_dataset(&mut rng, 12, 64);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| shapley_batch(&model, &xs, &ShapConfig::default()).unwrap())
    };
    let bits = |attrs: &[Attribution]| -> Vec<u64> {
        attrs
            .iter()
            .flat_map(|a| a.phi().iter().chain([&a.base_value(), &a.prediction()]).map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let many = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let single = bits(&run(1));
    let parallel = bits(&run(many));
    let pass = single == parallel && single.len() == 64 * 14;
    Outcome::new(pass, format!("64 instances x 12 features, 1 thread vs {many} threads: {}", if single == parallel { "bitwise identical" } else { "DIFFERENT" }))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("Shapley axioms", criterion_1),
        ("expectation oracle", criterion_2),
        ("waterfall arithmetic", criterion_3),
        ("prompt contract", criterion_4),
        ("response round trip", criterion_5),
        ("end-to-end replay", criterion_6),
        ("determinism", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
