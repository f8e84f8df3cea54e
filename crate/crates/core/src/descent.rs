//! Full-batch gradient descent shared by the choice-model and warm-start fits.
//!
//! Each epoch tries a step of `learning_rate` along the negative gradient and
//! halves it until the objective does not increase. The objective trace is
//! therefore non-increasing for any learning rate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DescentConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub param_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub params: Vec<f64>,
    pub objective: f64,
    /// Objective before the first epoch and after every accepted epoch.
    pub trace: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 60;

pub fn minimize<F>(init: Vec<f64>, cfg: DescentConfig, mut eval: F) -> Result<DescentOutcome>
where
    F: FnMut(&[f64], bool) -> (f64, Vec<f64>),
{
    let mut params = init;
    let (mut obj, mut grad) = eval(&params, true);
    check_finite(obj, &grad)?;
    let mut trace = vec![obj];
    let mut step = cfg.learning_rate;
    let mut converged = false;
    let mut epochs = 0;

    while epochs < cfg.max_epochs {
        epochs += 1;
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - trial_step * g)
                .collect();
            let (cand_obj, _) = eval(&candidate, false);
            if cand_obj.is_finite() && cand_obj <= obj {
                accepted = Some((candidate, cand_obj));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((candidate, cand_obj)) = accepted else {
            // no descent step exists at machine precision: stationary
            converged = true;
            break;
        };
        let max_change = params
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        params = candidate;
        obj = cand_obj;
        trace.push(obj);
        // let the step recover after a backtrack, never beyond the configured rate
        step = (trial_step * 2.0).min(cfg.learning_rate);
        if max_change < cfg.param_tolerance {
            converged = true;
            break;
        }
        let (o, g) = eval(&params, true);
        check_finite(o, &g)?;
        obj = o;
        grad = g;
    }

    Ok(DescentOutcome {
        params,
        objective: obj,
        trace,
        epochs,
        converged,
    })
}

fn check_finite(obj: f64, grad: &[f64]) -> Result<()> {
    if !obj.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective or gradient".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_with_oversized_step() {
        // f = 10 (x - 3)^2 has curvature 20; a step of 0.5 overshoots without backtracking
        let cfg = DescentConfig {
            learning_rate: 0.5,
            max_epochs: 1000,
            param_tolerance: 1e-10,
        };
        let out = minimize(vec![0.0], cfg, |p, _| {
            (10.0 * (p[0] - 3.0).powi(2), vec![20.0 * (p[0] - 3.0)])
        })
        .unwrap();
        assert!((out.params[0] - 3.0).abs() < 1e-6);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let cfg = DescentConfig {
            learning_rate: 0.1,
            max_epochs: 10,
            param_tolerance: 1e-8,
        };
        let err = minimize(vec![0.0], cfg, |_, _| (f64::NAN, vec![0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
