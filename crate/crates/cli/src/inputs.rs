use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ctxshap_core::{Dataset, ExplanationContext, FeatureSet, Instance, TreeEnsemble};

use crate::args::{Global, Selection};
use crate::error::{CliError, EXIT_COMPAT};

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::input(format!("{flag} is required for this command")))
}

pub fn load_model(global: &Global) -> Result<TreeEnsemble, CliError> {
    let path = require(&global.model, "--model")?;
    let text = String::from_utf8(read(path)?)
        .map_err(|_| CliError::input(format!("{}: not UTF-8", path.display())))?;
    TreeEnsemble::parse(&text).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_context(global: &Global, features: &FeatureSet) -> Result<ExplanationContext, CliError> {
    let Some(path) = &global.context else {
        return Ok(ExplanationContext::default());
    };
    let ctx: ExplanationContext = serde_json::from_slice(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ctx.validate(features)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(ctx)
}

/// Reads a CSV with a header row; columns are matched to features by name
/// and columns the model does not use are ignored.
pub fn load_csv(path: &Path, features: &FeatureSet) -> Result<Dataset, CliError> {
    let bytes = read(path)?;
    let at = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| at(e.to_string()))?.clone();
    let mut columns = Vec::with_capacity(features.count());
    for name in features.names() {
        let col = header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::new(
                EXIT_COMPAT,
                format!("{}: no column for model feature {name:?}", path.display()),
            )
        })?;
        columns.push(col);
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| at(e.to_string()))?;
        let values = columns
            .iter()
            .zip(features.names())
            .map(|(&col, name)| {
                let cell = record.get(col).unwrap_or("");
                if cell.is_empty() {
                    return Err(at(format!("line {line}: missing value for {name}")));
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| at(format!("line {line}: {name} = {cell:?} is not a finite number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Instance::new(values)?);
    }
    if rows.is_empty() {
        return Err(at("no data rows".into()));
    }
    Ok(Dataset::new(features.clone(), rows)?)
}

/// Fits covers on the background when one is given.
pub fn prepare_model(global: &Global) -> Result<TreeEnsemble, CliError> {
    let model = load_model(global)?;
    match &global.background {
        Some(path) => {
            let background = load_csv(path, model.features())?;
            Ok(model.fit_coverage(&background)?)
        }
        None => Ok(model),
    }
}

fn parse_inline(json: &str, features: &FeatureSet) -> Result<Instance, CliError> {
    let bad = |msg: String| CliError::input(format!("--instance-json: {msg}"));
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
    let number = |v: &serde_json::Value, what: &str| {
        v.as_f64().ok_or_else(|| bad(format!("{what} is not a number")))
    };
    let values = match value {
        serde_json::Value::Array(items) => {
            if items.len() != features.count() {
                return Err(CliError::new(
                    EXIT_COMPAT,
                    format!(
                        "--instance-json: model has {} features, array has {}",
                        features.count(),
                        items.len()
                    ),
                ));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, v)| number(v, &format!("element {i}")))
                .collect::<Result<Vec<_>, _>>()?
        }
        serde_json::Value::Object(map) => {
            let map: BTreeMap<_, _> = map.into_iter().collect();
            features
                .names()
                .iter()
                .map(|name| {
                    let v = map.get(name).ok_or_else(|| {
                        CliError::new(EXIT_COMPAT, format!("--instance-json: missing feature {name:?}"))
                    })?;
                    number(v, name)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(bad("expected an array or an object".into())),
    };
    Ok(Instance::new(values)?)
}

/// Instances chosen by the selection flags.
pub fn select(selection: &Selection, features: &FeatureSet) -> Result<Dataset, CliError> {
    if let Some(json) = &selection.instance_json {
        return Ok(Dataset::new(features.clone(), vec![parse_inline(json, features)?])?);
    }
    let path = require(&selection.instances, "--instances (or --instance-json)")?;
    let all = load_csv(path, features)?;
    match selection.index {
        None => Ok(all),
        Some(i) => {
            let row = all.rows().get(i).cloned().ok_or_else(|| {
                CliError::input(format!("--index {i} is out of range ({} rows)", all.len()))
            })?;
            Ok(Dataset::new(features.clone(), vec![row])?)
        }
    }
}
