use ctxshap_core::TreeEnsemble;

use crate::args::Global;
use crate::error::{CliError, EXIT_FAILED_CHECK};
use crate::inputs;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Warn,
    Fail,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        }
    }
}

struct Check {
    name: &'static str,
    status: Status,
    detail: String,
}

fn checks(model: Result<TreeEnsemble, CliError>) -> Vec<Check> {
    let model = match model {
        Ok(m) => m,
        Err(e) => {
            return vec![Check {
                name: "parse",
                status: Status::Fail,
                detail: e.message,
            }]
        }
    };
    let nodes: usize = model.trees().iter().map(|t| t.nodes().len()).sum();
    let mut out = vec![Check {
        name: "structure",
        status: Status::Pass,
        detail: format!(
            "{} trees, {nodes} nodes, {} features",
            model.trees().len(),
            model.features().count()
        ),
    }];

    let issues = model.cover_issues();
    out.push(if issues.is_empty() {
        Check {
            name: "cover-sums",
            status: Status::Pass,
            detail: "every split's cover equals the sum of its children".into(),
        }
    } else {
        Check {
            name: "cover-sums",
            status: Status::Fail,
            detail: issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        }
    });

    let unused = model.unused_features();
    out.push(if unused.is_empty() {
        Check {
            name: "dummy-features",
            status: Status::Pass,
            detail: "every feature is used by some split".into(),
        }
    } else {
        let names: Vec<&str> = unused.iter().map(|&i| model.features().name(i)).collect();
        Check {
            name: "dummy-features",
            status: Status::Warn,
            detail: format!("never split on (SHAP value always 0): {}", names.join(", ")),
        }
    });
    out
}

pub fn run(global: &Global) -> Result<(), CliError> {
    inputs::require(&global.model, "--model")?;
    let results = checks(inputs::load_model(global));
    let width = results.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    println!("{:width$}  STATUS  DETAIL", "CHECK");
    for c in &results {
        println!("{:width$}  {:6}  {}", c.name, c.status.label(), c.detail);
    }
    let failed = results.iter().filter(|c| c.status == Status::Fail).count();
    if failed > 0 {
        return Err(CliError::new(EXIT_FAILED_CHECK, format!("{failed} check(s) failed")));
    }
    Ok(())
}
