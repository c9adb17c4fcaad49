use ctxshap_core::shap::export_batch_json;

use crate::args::{Global, Selection};
use crate::error::CliError;
use crate::inputs;
use crate::report::OutDir;

pub fn run(global: &Global, selection: &Selection) -> Result<(), CliError> {
    let model = inputs::prepare_model(global)?;
    let xs = inputs::select(selection, model.features())?;
    let attrs = super::attributions(&model, &xs, global.cap)?;
    let mut out = OutDir::create(&global.out)?;
    let mut json = export_batch_json(&attrs, model.features());
    if !json.ends_with('\n') {
        json.push('\n');
    }
    out.write("attributions", "attributions.json", json.as_bytes())?;
    Ok(())
}
