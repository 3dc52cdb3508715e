//! Central finite-difference gradient checks against the tape.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Gradients, ParamSet, Tape, Var};

/// Result of comparing analytic and numeric gradients.
#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// (parameter name, flat index, analytic, numeric) of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 compare on an absolute scale instead of amplifying
/// finite-difference round-off.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the tape gradient of the scalar built by `loss` with central
/// differences of step `h`. At most `per_param` coordinates of each
/// trainable tensor are probed, chosen by `seed`.
pub fn check_gradients<F>(params: &mut ParamSet<f64>, loss: F, h: f64, per_param: usize, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<Var>,
{
    let mut grads = Gradients::for_params(params);
    {
        let mut tape = Tape::new(params);
        let root = loss(&mut tape)?;
        tape.backward(root, &mut grads)?;
    }
    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let mut tape = Tape::new(p);
        let root = loss(&mut tape)?;
        Ok(tape.scalar(root))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        if !params.get(id).requires_grad() {
            continue;
        }
        let len = params.get(id).len();
        let coords: Vec<usize> =
            if len <= per_param { (0..len).collect() } else { sample(&mut rng, len, per_param).into_vec() };
        for k in coords {
            let orig = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = orig + h;
            let up = eval(params)?;
            params.get_mut(id).data_mut()[k] = orig - h;
            let down = eval(params)?;
            params.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let err = rel_error(analytic, numeric);
            report.checked += 1;
            if err >= report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((params.name(id).to_string(), k, analytic, numeric));
            }
        }
    }
    Ok(report)
}
