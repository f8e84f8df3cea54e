//! Hybrid LinUCB.
//!
//! The expected reward of option `x` shown to a user with context `u` is
//! `z' beta + x' theta_a`, where `z = u (x) x` (Kronecker product) is shared
//! across arms and arm `a` is the option's position in the list. Only the
//! issued arm is updated, with reward `1{issued == chosen}`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::choice;
use crate::error::{Error, Result};
use crate::learner::{Feedback, Learner};
use crate::model::{OptionContext, UserContext, UserId};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_RIDGE: f64 = 1.0;

pub(crate) fn kron(u: &[f64], x: &[f64]) -> Vec<f64> {
    u.iter().flat_map(|a| x.iter().map(move |b| a * b)).collect()
}

pub(crate) fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NonFinite("ridge accumulator lost positive definiteness".into()))
}

#[derive(Debug, Clone)]
struct ArmModel {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    b_shared: DMatrix<f64>,
    b: DVector<f64>,
    updates: usize,
}

impl ArmModel {
    fn new(d: usize, k: usize, ridge: f64) -> Self {
        Self {
            a: DMatrix::identity(d, d) * ridge,
            a_inv: DMatrix::identity(d, d) / ridge,
            b_shared: DMatrix::zeros(d, k),
            b: DVector::zeros(d),
            updates: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinUcbState {
    pub alpha: f64,
    pub ridge: f64,
    d: usize,
    k: usize,
    a0: DMatrix<f64>,
    a0_inv: DMatrix<f64>,
    b0: DVector<f64>,
    arms: BTreeMap<usize, ArmModel>,
    updates: usize,
}

impl LinUcbState {
    /// `d` is the option dimension, `big_d` the user-context dimension.
    pub fn new(d: usize, big_d: usize, alpha: f64, ridge: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(ridge > 0.0) {
            return Err(Error::Config("LinUCB needs alpha >= 0 and ridge > 0".into()));
        }
        let k = d * big_d;
        Ok(Self {
            alpha,
            ridge,
            d,
            k,
            a0: DMatrix::identity(k, k) * ridge,
            a0_inv: DMatrix::identity(k, k) / ridge,
            b0: DVector::zeros(k),
            arms: BTreeMap::new(),
            updates: 0,
        })
    }

    /// Number of arm updates so far; one per learned round.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn arm_updates(&self, arm: usize) -> usize {
        self.arms.get(&arm).map_or(0, |m| m.updates)
    }

    fn check(&self, u: &UserContext, options: &[OptionContext]) -> Result<()> {
        if u.dim() * self.d != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k / self.d.max(1),
                found: u.dim(),
            });
        }
        if let Some(o) = options.iter().find(|o| o.dim() != self.d) {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: o.dim(),
            });
        }
        Ok(())
    }

    /// `(mean, width)` of the UCB score for option `arm`.
    pub fn score(&self, u: &UserContext, options: &[OptionContext], arm: usize) -> Result<(f64, f64)> {
        self.check(u, options)?;
        let x = DVector::from_column_slice(&options[arm].features);
        let z = DVector::from_vec(kron(&u.features, &options[arm].features));
        let beta = &self.a0_inv * &self.b0;
        let fresh;
        let m = match self.arms.get(&arm) {
            Some(m) => m,
            None => {
                fresh = ArmModel::new(self.d, self.k, self.ridge);
                &fresh
            }
        };
        let theta = &m.a_inv * (&m.b - &m.b_shared * &beta);
        let a_inv_x = &m.a_inv * &x;
        let bt_a_inv_x = m.b_shared.transpose() * &a_inv_x;
        let s = z.dot(&(&self.a0_inv * &z)) - 2.0 * z.dot(&(&self.a0_inv * &bt_a_inv_x))
            + x.dot(&a_inv_x)
            + bt_a_inv_x.dot(&(&self.a0_inv * &bt_a_inv_x));
        Ok((z.dot(&beta) + x.dot(&theta), s.max(0.0).sqrt()))
    }

    pub fn select(&self, u: &UserContext, options: &[OptionContext]) -> Result<usize> {
        let scores = (0..options.len())
            .map(|a| self.score(u, options, a).map(|(m, w)| m + self.alpha * w))
            .collect::<Result<Vec<_>>>()?;
        Ok(choice::argmax(&scores))
    }

    pub fn update(&mut self, u: &UserContext, options: &[OptionContext], arm: usize, reward: f64) -> Result<()> {
        self.check(u, options)?;
        let x = DVector::from_column_slice(&options[arm].features);
        let z = DVector::from_vec(kron(&u.features, &options[arm].features));
        let (d, k, ridge) = (self.d, self.k, self.ridge);
        let m = self.arms.entry(arm).or_insert_with(|| ArmModel::new(d, k, ridge));

        let bt_ainv = m.b_shared.transpose() * &m.a_inv;
        self.a0 += &bt_ainv * &m.b_shared;
        self.b0 += &bt_ainv * &m.b;

        m.a += &x * x.transpose();
        m.b_shared += &x * z.transpose();
        m.b += &x * reward;
        m.a_inv = inverse(&m.a)?;
        m.updates += 1;

        let bt_ainv = m.b_shared.transpose() * &m.a_inv;
        self.a0 += &z * z.transpose() - &bt_ainv * &m.b_shared;
        self.b0 += &z * reward - &bt_ainv * &m.b;
        self.a0_inv = inverse(&self.a0)?;
        self.updates += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinUcb {
    state: LinUcbState,
}

impl LinUcb {
    pub fn new(d: usize, big_d: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            state: LinUcbState::new(d, big_d, alpha, DEFAULT_RIDGE)?,
        })
    }

    pub fn state(&self) -> &LinUcbState {
        &self.state
    }
}

impl Learner for LinUcb {
    fn name(&self) -> &str {
        "linucb"
    }

    fn act(&mut self, _user: UserId, context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        self.state.select(context, options)
    }

    fn learn(&mut self, context: &UserContext, feedback: Feedback<'_>) -> Result<()> {
        let reward = if feedback.accepted() { 1.0 } else { 0.0 };
        self.state.update(context, &feedback.round.options, feedback.issued, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InteractionRound;
    use crate::seed;
    use rand::Rng as _;

    fn ctx(v: &[f64]) -> UserContext {
        UserContext { features: v.to_vec() }
    }

    #[test]
    fn fresh_zero_contexts_tie_to_first() {
        let s = LinUcbState::new(2, 3, DEFAULT_ALPHA, 1.0).unwrap();
        let opts = vec![OptionContext::new(vec![0.0, 0.0]); 4];
        assert_eq!(s.select(&ctx(&[0.0, 0.0, 0.0]), &opts).unwrap(), 0);
    }

    #[test]
    fn learns_rewarded_pattern() {
        // options are shuffled each round; pattern P = [1, 0] is always accepted
        let mut learner = LinUcb::new(2, 1, DEFAULT_ALPHA).unwrap();
        let u = ctx(&[1.0]);
        let mut rng = seed::rng(0, "t", 0);
        let pattern = [1.0, 0.0];
        for t in 0..200 {
            let mut opts = vec![
                OptionContext::new(pattern.to_vec()),
                OptionContext::new(vec![0.0, 1.0]),
                OptionContext::new(vec![0.5, 0.5]),
            ];
            let shift = rng.random_range(0..3);
            opts.rotate_left(shift);
            let p = opts.iter().position(|o| o.features == pattern).unwrap();
            let rec = learner.act(1, &u, &opts).unwrap();
            let round = InteractionRound {
                user_id: 1,
                round_index: t + 1,
                options: opts,
                recommended: rec,
                chosen: p,
            };
            learner.learn(&u, Feedback { round: &round, issued: rec }).unwrap();
        }
        let mut opts = vec![
            OptionContext::new(vec![0.0, 1.0]),
            OptionContext::new(vec![0.5, 0.5]),
            OptionContext::new(pattern.to_vec()),
        ];
        assert_eq!(learner.act(1, &u, &opts).unwrap(), 2);
        opts.rotate_left(1);
        assert_eq!(learner.act(1, &u, &opts).unwrap(), 1);
        assert_eq!(learner.state().updates(), 200);
    }

    #[test]
    fn width_non_increasing_in_updates() {
        let mut s = LinUcbState::new(3, 2, DEFAULT_ALPHA, 1.0).unwrap();
        let mut rng = seed::rng(1, "t", 0);
        let u = ctx(&[0.0, 0.0]);
        let probe = vec![OptionContext::new(vec![0.3, -0.2, 0.9])];
        let mut last = s.score(&u, &probe, 0).unwrap().1;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            s.update(&u, &[OptionContext::new(x)], 0, rng.random_range(0.0..1.0)).unwrap();
            let w = s.score(&u, &probe, 0).unwrap().1;
            assert!(w <= last + 1e-12, "{w} > {last}");
            last = w;
        }
        assert_eq!(s.arm_updates(0), 100);
    }

    #[test]
    fn only_issued_arm_is_updated() {
        let mut learner = LinUcb::new(1, 1, DEFAULT_ALPHA).unwrap();
        let u = ctx(&[1.0]);
        let opts = vec![OptionContext::new(vec![1.0]), OptionContext::new(vec![2.0]), OptionContext::new(vec![3.0])];
        for t in 0..30 {
            let round = InteractionRound {
                user_id: 1,
                round_index: t + 1,
                options: opts.clone(),
                recommended: 1,
                chosen: 2,
            };
            learner.learn(&u, Feedback { round: &round, issued: 1 }).unwrap();
        }
        let s = learner.state();
        assert_eq!((s.updates(), s.arm_updates(0), s.arm_updates(1), s.arm_updates(2)), (30, 0, 30, 0));
    }

    #[test]
    fn kron_layout() {
        assert_eq!(kron(&[1.0, 2.0], &[3.0, 4.0, 5.0]), vec![3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }
}
