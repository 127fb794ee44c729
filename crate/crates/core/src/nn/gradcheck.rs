//! Central finite-difference check of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

/// Relative errors are measured against `max(|analytic|, |numeric|, REL_FLOOR)`
/// so that entries whose true gradient is zero do not divide by noise.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic and numeric values of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks up to `per_param` randomly chosen entries of every parameter.
/// `loss_and_grad` must be deterministic (dropout off) and return one
/// gradient per parameter in store order.
pub fn grad_check<F>(
    params: &ParamStore,
    eps: f64,
    per_param: usize,
    seed: u64,
    mut loss_and_grad: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(f64, Vec<Tensor>)>,
{
    let (_, analytic) = loss_and_grad(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for id in params.ids() {
        let n = params.get(id).len();
        let picks = sample(&mut rng, n, per_param.min(n)).into_vec();
        for idx in picks {
            let numeric = central_difference(&mut probe, id, idx, eps, &mut loss_and_grad)?;
            let a = analytic[id.index()].data()[idx];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((params.name(id).to_string(), idx, a, numeric));
            }
        }
    }
    Ok(report)
}

fn central_difference<F>(
    probe: &mut ParamStore,
    id: ParamId,
    idx: usize,
    eps: f64,
    loss_and_grad: &mut F,
) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<(f64, Vec<Tensor>)>,
{
    let orig = probe.get(id).data()[idx];
    probe.get_mut(id).data_mut()[idx] = orig + eps;
    let (plus, _) = loss_and_grad(probe)?;
    probe.get_mut(id).data_mut()[idx] = orig - eps;
    let (minus, _) = loss_and_grad(probe)?;
    probe.get_mut(id).data_mut()[idx] = orig;
    Ok((plus - minus) / (2.0 * eps))
}
