//! Monte Carlo probe of parameter recovery for two-option rounds.
//!
//! Each trial draws a unit-norm `theta*` and a stream of Gaussian option
//! differences. The first option has features `x`, the second is all zero,
//! so the model's probability of picking the first is `sigmoid(x . theta)`.
//! The fitted direction is compared with `theta*` for nested prefixes of the
//! stream.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::choice;
use crate::error::{Error, Result};
use crate::noncompliance::{fit_observations, ChoiceObservation, FitConfig};
use crate::seed;

pub const DEFAULT_BETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub t: usize,
    pub mean_error: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn probe_fit_config() -> FitConfig {
    FitConfig {
        learning_rate: 1.0,
        l2_penalty: 1e-4,
        max_epochs: 400,
        param_tolerance: 1e-7,
        use_recommendation: false,
    }
}

fn unit_error(theta_hat: &[f64], truth: &[f64]) -> f64 {
    let norm = theta_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 1.0;
    }
    theta_hat
        .iter()
        .zip(truth)
        .map(|(h, t)| (h / norm - t).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Per-trial errors for every grid size.
fn trial(d: usize, grid: &[usize], beta: f64, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut rng = seed::rng(seed, "probe-trial", index);
    let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let truth: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    let max_t = *grid.last().expect("non-empty grid");
    let data: Vec<ChoiceObservation> = (0..max_t)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p_first = choice::sigmoid(beta * choice::dot(&x, &truth));
            let chosen = if rng.random::<f64>() < p_first { 0 } else { 1 };
            ChoiceObservation {
                options: vec![x, vec![0.0; d]],
                chosen,
            }
        })
        .collect();
    let cfg = probe_fit_config();
    grid.iter()
        .map(|&t| {
            let fit = fit_observations(&data[..t], vec![0.0; d], &cfg)?;
            Ok(unit_error(&fit.theta.weights, &truth))
        })
        .collect()
}

pub fn sample_complexity_probe(
    d: usize,
    t_grid: &[usize],
    trials: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    if d == 0 || trials == 0 || t_grid.is_empty() || t_grid.contains(&0) {
        return Err(Error::invalid("d, trials and every T must be positive"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let errors = (0..trials as u64)
        .into_par_iter()
        .map(|i| trial(d, &grid, beta, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &t)| {
            let e: Vec<f64> = errors.iter().map(|row| row[g]).collect();
            let n = e.len() as f64;
            let mean = e.iter().sum::<f64>() / n;
            let var = if e.len() > 1 {
                e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ProbeRow {
                t,
                mean_error: mean,
                stderr: (var / n).sqrt(),
                trials,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_sign_recovery() {
        // for d = 1 the unit-sphere error is 0 when the sign is right and 2 otherwise
        let rows = sample_complexity_probe(1, &[5, 200], 40, DEFAULT_BETA, 1).unwrap();
        assert!(rows[1].mean_error <= rows[0].mean_error);
        assert!(rows[1].mean_error < 0.11, "{rows:?}");
    }

    #[test]
    fn more_trials_stay_within_two_standard_errors() {
        let a = sample_complexity_probe(3, &[50], 20, DEFAULT_BETA, 7).unwrap()[0];
        let b = sample_complexity_probe(3, &[50], 40, DEFAULT_BETA, 7).unwrap()[0];
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.mean_error - b.mean_error).abs() <= 2.0 * se.max(1e-3), "{a:?} {b:?}");
    }

    #[test]
    fn zero_estimate_has_unit_error() {
        assert_eq!(unit_error(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert!(unit_error(&[2.0, 0.0], &[1.0, 0.0]).abs() < 1e-15);
    }
}
