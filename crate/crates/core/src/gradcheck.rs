//! Central finite-difference checks of model gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::PolyGraph;
use crate::models::{Model, ModelError};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Floor on the denominator of the relative error, so that near-zero
/// gradients are compared absolutely.
const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("gradient check failed: worst tensor `{name}` rel. error {rel_err:.3e}")]
    Failed { name: String, rel_err: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Entries whose probe interval straddles a kink of the loss.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub eps: f64,
    pub loss: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err() < tol
    }

    /// `Ok` when every entry is within `tol`, otherwise the worst tensor.
    pub fn check(&self, tol: f64) -> Result<(), GradCheckError> {
        match self.worst() {
            Some(w) if w.max_rel_err >= tol => Err(GradCheckError::Failed {
                name: w.name.clone(),
                rel_err: w.max_rel_err,
            }),
            _ => Ok(()),
        }
    }
}

/// Offsets every bias by a small random amount. Freshly initialized
/// biases are zero, which puts zero-padded and zero-feature rows exactly on
/// the relu kink where finite differences are meaningless.
pub fn generic_point(model: &Model, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    let names: Vec<String> = out.params().names().filter(|n| n.ends_with(".bias")).map(str::to_string).collect();
    for name in names {
        for v in out.params_mut().get_mut(&name).expect("own parameter").data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    out
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares backprop gradients of the mean cross-entropy on `graphs`
/// against central differences for every parameter entry.
pub fn gradcheck(model: &Model, graphs: &[&PolyGraph], eps: f64) -> Result<GradCheckReport, ModelError> {
    gradcheck_with(model, graphs, eps, |_| {})
}

/// Like [`gradcheck`], with a hook applied to the analytic gradients before
/// comparison.
pub fn gradcheck_with(
    model: &Model,
    graphs: &[&PolyGraph],
    eps: f64,
    tamper: impl Fn(&mut [Tensor]),
) -> Result<GradCheckReport, ModelError> {
    let (loss, mut grads) = model.loss_and_grads(graphs)?;
    tamper(&mut grads);
    let names: Vec<String> = model.params().names().map(str::to_string).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(names.len());

    let jobs: Vec<usize> = (0..names.len()).collect();
    let chunk = jobs.len().div_ceil(threads.max(1));
    let results: Vec<Result<ParamCheck, ModelError>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk.max(1))
            .map(|part| {
                let (names, grads) = (&names, &grads);
                s.spawn(move || {
                    part.iter()
                        .map(|&k| check_tensor(model, graphs, eps, &names[k], &grads[k]))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("gradcheck worker")).collect()
    });
    let params = results.into_iter().collect::<Result<_, _>>()?;
    Ok(GradCheckReport { eps, loss, params })
}

fn check_tensor(
    model: &Model,
    graphs: &[&PolyGraph],
    eps: f64,
    name: &str,
    grad: &Tensor,
) -> Result<ParamCheck, ModelError> {
    let mut probe = model.clone();
    let mut out = ParamCheck {
        name: name.to_string(),
        entries: grad.len(),
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        skipped: 0,
    };
    for i in 0..grad.len() {
        let orig = model.params().get(name).expect("own parameter").data()[i];
        let mut at = |v: f64| -> Result<f64, ModelError> {
            probe.params_mut().get_mut(name).expect("own parameter").data_mut()[i] = v;
            probe.loss(graphs)
        };
        let plus = at(orig + eps)?;
        let minus = at(orig - eps)?;
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grad.data()[i];
        let mut err = relative_error(analytic, numeric);
        if err >= DEFAULT_TOLERANCE {
            // A relu, abs or max switching branch inside the probe interval
            // spoils the central difference; a much narrower probe that
            // agrees with backprop identifies that case.
            let fine = eps * 1e-2;
            let narrow = (at(orig + fine)? - at(orig - fine)?) / (2.0 * fine);
            if relative_error(analytic, narrow) < DEFAULT_TOLERANCE {
                out.skipped += 1;
                err = 0.0;
            }
        }
        at(orig)?;
        if err > out.max_rel_err || i == 0 {
            out.max_rel_err = err;
            out.worst_index = i;
            out.analytic = analytic;
            out.numeric = numeric;
        }
    }
    Ok(out)
}
