//! Expected improvement and the proposal search that picks the next query
//! point from a fitted surrogate.
//!
//! Everything here minimizes: improvement at a candidate is measured against
//! the lowest observed result so far. In-flight evaluations are handled with
//! the constant-liar device: each pending point is imputed with the incumbent
//! best value and the surrogate is refit with those fake observations before
//! scoring, which steers concurrent proposals away from one another.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::surrogate::{GpModel, SurrogateError};

/// Settings for the proposal search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Exploration margin in native result units. `None` picks
    /// max(0.01 * |incumbent|, 1e-4) at proposal time.
    pub xi: Option<f64>,
    /// Uniform candidates scored per proposal.
    pub n_candidates: usize,
    /// Unit-cube distance under which a candidate is considered a duplicate
    /// of a pending point and suppressed.
    pub pending_radius: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            xi: None,
            n_candidates: 2000,
            pending_radius: 0.02,
        }
    }
}

impl AcquisitionConfig {
    pub fn effective_xi(&self, f_best: f64) -> f64 {
        self.xi.unwrap_or_else(|| (0.01 * f_best.abs()).max(1e-4))
    }
}

/// The selected next query point, in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: Vec<f64>,
    pub ei_value: f64,
}

/// Expected improvement for minimization.
///
/// With improvement i = f_best - mu - xi and z = i / sigma:
///
///   EI = i * Phi(z) + sigma * phi(z)
///
/// where Phi and phi are the standard normal CDF and PDF. At sigma = 0 this
/// degenerates to max(i, 0). Always nonnegative.
pub fn expected_improvement(mean: f64, variance: f64, f_best: f64, xi: f64) -> f64 {
    let improvement = f_best - mean - xi;
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return improvement.max(0.0);
    }
    let z = improvement / sigma;
    (improvement * standard_normal_cdf(z) + sigma * standard_normal_pdf(z)).max(0.0)
}

pub(crate) fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Pick the next query point: score `n_candidates` seeded-uniform unit-cube
/// points under EI and return the argmax, breaking ties toward the lowest
/// candidate ordinal.
///
/// Candidates closer than `pending_radius` to any pending point are skipped
/// unless every candidate is that close. With pending points present the
/// model is refit with liar observations first; the incumbent used for EI is
/// always the minimum over real observations.
pub fn propose<R: Rng>(
    model: &GpModel,
    pending: &[Vec<f64>],
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<Proposal, SurrogateError> {
    let d = model.dim();
    let f_best = model.best_observed();
    let xi = cfg.effective_xi(f_best);

    let liar_model;
    let scoring_model = if pending.is_empty() {
        model
    } else {
        let mut x = model.training_inputs().to_vec();
        let mut y = model.targets();
        for p in pending {
            x.push(p.clone());
            y.push(f_best);
        }
        liar_model = GpModel::fit(x, y, *model.kernel())?;
        &liar_model
    };

    let n = cfg.n_candidates.max(1);
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    let mut best_any: Option<(usize, Vec<f64>, f64)> = None;
    for ordinal in 0..n {
        let candidate: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
        let posterior = scoring_model.predict(&candidate);
        let ei = expected_improvement(posterior.mean, posterior.variance, f_best, xi);
        let near_pending = pending
            .iter()
            .any(|p| sq_dist(p, &candidate) < cfg.pending_radius * cfg.pending_radius);

        if best_any.as_ref().map(|(_, _, b)| ei > *b).unwrap_or(true) {
            best_any = Some((ordinal, candidate.clone(), ei));
        }
        if !near_pending && best.as_ref().map(|(_, _, b)| ei > *b).unwrap_or(true) {
            best = Some((ordinal, candidate, ei));
        }
    }

    let (_, point, ei_value) = best.or(best_any).expect("at least one candidate");
    Ok(Proposal { point, ei_value })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
