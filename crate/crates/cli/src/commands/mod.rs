mod explain;
mod shap;
mod validate;

pub use explain::run as explain;
pub use shap::run as shap;
pub use validate::run as validate;

use ctxshap_core::shap::MAX_CAP;
use ctxshap_core::{shapley_batch, Attribution, Dataset, ShapConfig, ShapError, TreeEnsemble};

use crate::error::CliError;

/// Rejects over-wide models before any work is done, then runs the batch.
fn attributions(model: &TreeEnsemble, xs: &Dataset, cap: usize) -> Result<Vec<Attribution>, CliError> {
    let n = model.features().count();
    let cap = cap.min(MAX_CAP);
    if n > cap {
        return Err(ShapError::TooManyFeatures {
            features: n,
            cap,
            cost: 1u128 << n.min(127),
        }
        .into());
    }
    let attrs = shapley_batch(model, xs, &ShapConfig { cap })?;
    let worst = attrs.iter().map(Attribution::efficiency_residual).fold(0.0, f64::max);
    eprintln!(
        "efficiency check: {} instance(s), max |sum(phi) - (f(x) - E[f(X)])| = {worst:.3e}",
        attrs.len()
    );
    Ok(attrs)
}
