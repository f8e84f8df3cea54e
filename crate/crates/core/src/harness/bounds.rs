//! Closed-form regret bounds and the centroid-loss estimate for Gaussian
//! mixtures. All logarithms are natural.

use rand::Rng as _;
use serde::Serialize;

use crate::choice;
use crate::error::{Error, Result};
use crate::model::{OptionContext, PreferenceVector};
use crate::seed;

pub const DEFAULT_EPSILON: f64 = 0.1;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `2 N sqrt(T ln K) + T N l`.
pub fn bound_ewc(n: usize, t: usize, k: usize, l_centroids: f64) -> Result<f64> {
    if n == 0 || t == 0 || k == 0 {
        return Err(Error::invalid("N, T and K must be positive"));
    }
    if !(l_centroids >= 0.0) || !l_centroids.is_finite() {
        return Err(Error::invalid(format!("l_centroids must be nonnegative, got {l_centroids}")));
    }
    let (n, t) = (n as f64, t as f64);
    let hedge = if k == 1 { 0.0 } else { 2.0 * n * (t * (k as f64).ln()).sqrt() };
    Ok(hedge + t * n * l_centroids)
}

/// `C N sqrt(T d ln^3(A T ln T / delta))`. The log argument is clamped below
/// at `e`, so the cube factor is at least 1 (at `T = 1` the raw argument is 0).
pub fn bound_linucb(n: usize, t: usize, a: usize, d: usize, c: f64, delta: f64) -> Result<f64> {
    if n == 0 || t == 0 || a == 0 || d == 0 {
        return Err(Error::invalid("N, T, A and d must be positive"));
    }
    positive("C", c)?;
    positive("delta", delta)?;
    let tf = t as f64;
    let arg = (a as f64 * tf * tf.ln() / delta).max(std::f64::consts::E);
    Ok(c * n as f64 * (tf * d as f64 * arg.ln().powi(3)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub t: usize,
    pub ewc: f64,
    pub linucb: f64,
    pub ewc_wins: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub rows: Vec<BoundRow>,
    /// `((C - 2) / l)^2`.
    pub threshold: f64,
    /// First grid T at which EWC does not have the smaller bound.
    pub crossover: Option<usize>,
    /// Whether EWC wins at every grid point strictly below the threshold.
    pub threshold_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareParams {
    pub n: usize,
    pub k: usize,
    pub a: usize,
    pub d: usize,
    pub l_centroids: f64,
    pub c: f64,
    pub delta: f64,
}

pub fn ewc_advantage_threshold(c: f64, l_centroids: f64) -> f64 {
    ((c - 2.0) / l_centroids).powi(2)
}

pub fn bound_compare(p: &CompareParams, t_grid: &[usize]) -> Result<BoundComparison> {
    if !(p.c > 2.0) {
        return Err(Error::invalid(format!("C must exceed 2, got {}", p.c)));
    }
    positive("l_centroids", p.l_centroids)?;
    let mut grid = t_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let rows = grid
        .iter()
        .map(|&t| {
            let ewc = bound_ewc(p.n, t, p.k, p.l_centroids)?;
            let linucb = bound_linucb(p.n, t, p.a, p.d, p.c, p.delta)?;
            Ok(BoundRow {
                t,
                ewc,
                linucb,
                ewc_wins: ewc < linucb,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = ewc_advantage_threshold(p.c, p.l_centroids);
    let crossover = rows.iter().find(|r| !r.ewc_wins).map(|r| r.t);
    let threshold_holds = rows.iter().filter(|r| (r.t as f64) < threshold).all(|r| r.ewc_wins);
    Ok(BoundComparison {
        rows,
        threshold,
        crossover,
        threshold_holds,
    })
}

/// `L eps sigma^2 / (4N) + L (eps + 2) / 4 * sum_k pi_k trace(Sigma_k)`.
/// `mixture` holds `(pi_k, trace Sigma_k)` pairs.
pub fn gmm_l_centroids(lipschitz: f64, epsilon: f64, sigma2: f64, n: usize, mixture: &[(f64, f64)]) -> Result<f64> {
    if n == 0 || mixture.is_empty() {
        return Err(Error::invalid("N and the mixture must be non-empty"));
    }
    let total: f64 = mixture.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-9 || mixture.iter().any(|(p, _)| !(*p >= 0.0)) {
        return Err(Error::invalid(format!("mixture weights must be nonnegative and sum to 1, got {total}")));
    }
    if mixture.iter().any(|(_, tr)| !(*tr >= 0.0)) {
        return Err(Error::invalid("covariance traces must be nonnegative"));
    }
    let spread: f64 = mixture.iter().map(|(p, tr)| p * tr).sum();
    Ok(lipschitz * epsilon * sigma2 / (4.0 * n as f64) + 0.25 * lipschitz * (epsilon + 2.0) * spread)
}

/// Largest ratio of mean prediction disagreement (half the squared one-hot
/// distance) to squared parameter distance, over random pairs of `thetas`.
pub fn estimate_lipschitz(
    thetas: &[PreferenceVector],
    probes: &[Vec<OptionContext>],
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    if thetas.len() < 2 || probes.is_empty() {
        return Err(Error::invalid("need at least two preference vectors and one probe"));
    }
    let mut rng = seed::rng(seed, "lipschitz", 0);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let i = rng.random_range(0..thetas.len());
        let j = rng.random_range(0..thetas.len());
        let dist = thetas[i].squared_distance(&thetas[j]);
        if i == j || dist == 0.0 {
            continue;
        }
        let mut disagree = 0.0;
        for o in probes {
            let a = choice::predict(&thetas[i], o, None)?;
            let b = choice::predict(&thetas[j], o, None)?;
            disagree += choice::zero_one_loss(a, b);
        }
        best = best.max(disagree / probes.len() as f64 / dist);
    }
    Ok(best)
}
