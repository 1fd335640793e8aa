use pairdistill_core::ranker::Ranker;
use pairdistill_core::representation::{Representation, ViewSpec};
use pairdistill_core::{Error, Result};

/// Mean reward over renders at `views`.
///
/// Annotation failures make the metric missing (`Ok(None)`) rather than
/// aborting the run; every other error propagates.
pub fn avg_reward_metric(rep: &Representation, views: &[ViewSpec], ranker: &mut dyn Ranker) -> Result<Option<f64>> {
    if views.is_empty() {
        return Err(Error::Parameter("metric needs at least one view".into()));
    }
    let mut total = 0.0;
    for v in views {
        match ranker.score(&rep.render(v)?) {
            Ok(r) => total += r,
            Err(Error::Annotation(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(total / views.len() as f64))
}
