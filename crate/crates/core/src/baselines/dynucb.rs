//! DYNUCB: per-user ridge estimates grouped into clusters that are refreshed
//! online. Recommendations use the cluster's pooled estimate with a UCB
//! bonus. The reward model is linear in `phi = [x, u (x) x]` with reward
//! `1{issued == chosen}`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::linucb::{inverse, kron};
use crate::choice;
use crate::error::{Error, Result};
use crate::learner::{Feedback, Learner};
use crate::model::{OptionContext, UserContext, UserId};
use crate::seed;

#[derive(Debug, Clone)]
struct UserModel {
    m: DMatrix<f64>,
    b: DVector<f64>,
    theta: DVector<f64>,
    cluster: usize,
}

#[derive(Debug, Clone)]
struct ClusterModel {
    /// Sum over members of `M_i - I`.
    m_excess: DMatrix<f64>,
    b: DVector<f64>,
    m_inv: DMatrix<f64>,
    theta: DVector<f64>,
    members: usize,
}

#[derive(Debug, Clone)]
pub struct DynucbState {
    pub alpha: f64,
    pub reassign: bool,
    d: usize,
    dim: usize,
    seed: u64,
    users: BTreeMap<UserId, UserModel>,
    clusters: Vec<ClusterModel>,
    learned: usize,
    reassignments: Vec<usize>,
}

impl DynucbState {
    pub fn new(d: usize, big_d: usize, k: usize, alpha: f64, seed: u64) -> Result<Self> {
        if k == 0 || !(alpha >= 0.0) {
            return Err(Error::Config("DYNUCB needs K >= 1 and alpha >= 0".into()));
        }
        let dim = d + d * big_d;
        let cluster = ClusterModel {
            m_excess: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            m_inv: DMatrix::identity(dim, dim),
            theta: DVector::zeros(dim),
            members: 0,
        };
        Ok(Self {
            alpha,
            reassign: true,
            d,
            dim,
            seed,
            users: BTreeMap::new(),
            clusters: vec![cluster; k],
            learned: 0,
            reassignments: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn assignment(&self, user: UserId) -> Option<usize> {
        self.users.get(&user).map(|u| u.cluster)
    }

    /// Indices (0-based, in learned-round order) of the feedback rounds that
    /// moved a user to another cluster.
    pub fn reassignments(&self) -> &[usize] {
        &self.reassignments
    }

    pub(crate) fn features(&self, u: &UserContext, x: &OptionContext) -> Result<DVector<f64>> {
        if x.dim() != self.d || self.d + self.d * u.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim() + x.dim() * u.dim(),
            });
        }
        let mut v = x.features.clone();
        v.extend(kron(&u.features, &x.features));
        Ok(DVector::from_vec(v))
    }

    fn ensure_user(&mut self, user: UserId) {
        if self.users.contains_key(&user) {
            return;
        }
        let cluster = seed::rng(self.seed, "dynucb-assign", user).random_range(0..self.clusters.len());
        self.clusters[cluster].members += 1;
        self.users.insert(
            user,
            UserModel {
                m: DMatrix::identity(self.dim, self.dim),
                b: DVector::zeros(self.dim),
                theta: DVector::zeros(self.dim),
                cluster,
            },
        );
    }

    fn refresh(&mut self, k: usize) -> Result<()> {
        let c = &mut self.clusters[k];
        c.m_inv = inverse(&(DMatrix::identity(self.dim, self.dim) + &c.m_excess))?;
        c.theta = &c.m_inv * &c.b;
        Ok(())
    }

    fn move_user(&mut self, user: UserId, to: usize) -> Result<()> {
        let eye = DMatrix::<f64>::identity(self.dim, self.dim);
        let u = self.users.get_mut(&user).expect("known user");
        let from = u.cluster;
        if from == to {
            return Ok(());
        }
        let excess = &u.m - &eye;
        self.clusters[from].m_excess -= &excess;
        self.clusters[from].b -= &u.b;
        self.clusters[from].members -= 1;
        self.clusters[to].m_excess += &excess;
        self.clusters[to].b += &u.b;
        self.clusters[to].members += 1;
        u.cluster = to;
        self.refresh(from)?;
        self.refresh(to)
    }

    pub fn select(&mut self, user: UserId, u: &UserContext, options: &[OptionContext]) -> Result<usize> {
        self.ensure_user(user);
        let c = &self.clusters[self.users[&user].cluster];
        let scores = options
            .iter()
            .map(|x| {
                let phi = self.features(u, x)?;
                let width = phi.dot(&(&c.m_inv * &phi)).max(0.0).sqrt();
                Ok(phi.dot(&c.theta) + self.alpha * width)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(choice::argmax(&scores))
    }

    pub fn update(&mut self, user: UserId, u: &UserContext, x: &OptionContext, reward: f64) -> Result<()> {
        self.ensure_user(user);
        let phi = self.features(u, x)?;
        let outer = &phi * phi.transpose();
        let model = self.users.get_mut(&user).expect("ensured");
        model.m += &outer;
        model.b += &phi * reward;
        model.theta = inverse(&model.m)? * &model.b;
        let k = model.cluster;
        self.clusters[k].m_excess += &outer;
        self.clusters[k].b += &phi * reward;
        self.refresh(k)?;

        if self.reassign {
            let theta = &self.users[&user].theta;
            let dists: Vec<f64> = self.clusters.iter().map(|c| (&c.theta - theta).norm_squared()).collect();
            let best = choice::argmin(&dists);
            if best != k {
                self.move_user(user, best)?;
                self.reassignments.push(self.learned);
                if self.clusters[k].members == 0 {
                    self.reseed(k)?;
                }
            }
        }
        self.learned += 1;
        Ok(())
    }

    /// Give an emptied cluster the worst-fitting user of a cluster that has
    /// more than one member.
    fn reseed(&mut self, empty: usize) -> Result<()> {
        let worst = self
            .users
            .iter()
            .filter(|(_, m)| self.clusters[m.cluster].members > 1)
            .map(|(id, m)| (*id, (&self.clusters[m.cluster].theta - &m.theta).norm_squared()))
            .fold(None::<(UserId, f64)>, |best, (id, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((id, d)),
            });
        match worst {
            Some((id, _)) => self.move_user(id, empty),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dynucb {
    state: DynucbState,
}

impl Dynucb {
    pub fn new(d: usize, big_d: usize, k: usize, alpha: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            state: DynucbState::new(d, big_d, k, alpha, seed)?,
        })
    }

    pub fn without_reassignment(mut self) -> Self {
        self.state.reassign = false;
        self
    }

    pub fn state(&self) -> &DynucbState {
        &self.state
    }
}

impl Learner for Dynucb {
    fn name(&self) -> &str {
        "dynucb"
    }

    fn act(&mut self, user: UserId, context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        self.state.select(user, context, options)
    }

    fn learn(&mut self, context: &UserContext, feedback: Feedback<'_>) -> Result<()> {
        let reward = if feedback.accepted() { 1.0 } else { 0.0 };
        let x = &feedback.round.options[feedback.issued];
        self.state.update(feedback.round.user_id, context, x, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InteractionRound;

    fn step(l: &mut Dynucb, user: UserId, u: &UserContext, opts: Vec<OptionContext>, chosen: usize, t: usize) -> usize {
        let rec = l.act(user, u, &opts).unwrap();
        let round = InteractionRound {
            user_id: user,
            round_index: t + 1,
            options: opts,
            recommended: rec,
            chosen,
        };
        l.learn(u, Feedback { round: &round, issued: rec }).unwrap();
        rec
    }

    /// Ridge UCB over phi with a single population model.
    struct SharedRidge {
        m: DMatrix<f64>,
        b: DVector<f64>,
    }

    #[test]
    fn single_cluster_matches_shared_ridge() {
        let mut l = Dynucb::new(2, 2, 1, 0.05, 3).unwrap().without_reassignment();
        let mut oracle = SharedRidge {
            m: DMatrix::identity(6, 6),
            b: DVector::zeros(6),
        };
        let mut rng = seed::rng(7, "t", 0);
        for t in 0..300 {
            let user = rng.random_range(1..6u64);
            let u = UserContext {
                features: vec![1.0, user as f64 / 5.0],
            };
            let opts: Vec<OptionContext> = (0..3)
                .map(|_| OptionContext::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
                .collect();
            let phis: Vec<DVector<f64>> = opts.iter().map(|x| l.state().features(&u, x).unwrap()).collect();
            let inv = oracle.m.clone().try_inverse().unwrap();
            let theta = &inv * &oracle.b;
            let scores: Vec<f64> = phis
                .iter()
                .map(|p| p.dot(&theta) + 0.05 * p.dot(&(&inv * p)).sqrt())
                .collect();
            let expected = choice::argmax(&scores);
            let chosen = if opts[0].features[0] > 0.0 { 0 } else { 1 };
            let rec = step(&mut l, user, &u, opts, chosen, t);
            assert_eq!(rec, expected, "round {t}");
            let r = if rec == chosen { 1.0 } else { 0.0 };
            oracle.m += &phis[rec] * phis[rec].transpose();
            oracle.b += &phis[rec] * r;
        }
    }

    #[test]
    fn separable_groups_stabilize() {
        // group A accepts the first coordinate-heavy option, group B the second
        let mut l = Dynucb::new(2, 1, 2, 0.05, 11).unwrap();
        let u = UserContext { features: vec![1.0] };
        let mut rng = seed::rng(8, "t", 0);
        let users: Vec<UserId> = (1..=20).collect();
        let rounds = 60;
        for t in 0..rounds {
            for &user in &users {
                let mut opts = vec![OptionContext::new(vec![1.0, 0.0]), OptionContext::new(vec![0.0, 1.0])];
                if rng.random_bool(0.5) {
                    opts.swap(0, 1);
                }
                let wanted = if user <= 10 { [1.0, 0.0] } else { [0.0, 1.0] };
                let chosen = opts.iter().position(|o| o.features == wanted).unwrap();
                step(&mut l, user, &u, opts, chosen, t);
            }
        }
        let total = rounds * users.len();
        let cutoff = total - total / 5;
        assert!(l.state().reassignments().iter().all(|&r| r < cutoff), "{:?}", l.state().reassignments());
        let a = l.state().assignment(1).unwrap();
        assert!((1..=10).all(|u| l.state().assignment(u) == Some(a)));
        assert!((11..=20).all(|u| l.state().assignment(u) != Some(a)));
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let mut l = Dynucb::new(1, 1, 3, 0.05, 5).unwrap();
            let u = UserContext { features: vec![1.0] };
            (0..100)
                .map(|t| {
                    let opts = vec![OptionContext::new(vec![(t % 7) as f64]), OptionContext::new(vec![1.0])];
                    step(&mut l, t as u64 % 9, &u, opts, t % 2, t)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn every_user_in_one_cluster() {
        let mut l = Dynucb::new(1, 1, 3, 0.05, 5).unwrap();
        let u = UserContext { features: vec![1.0] };
        for t in 0..200 {
            let opts = vec![OptionContext::new(vec![(t % 5) as f64 - 2.0]), OptionContext::new(vec![1.0])];
            step(&mut l, t as u64 % 13, &u, opts, (t / 3) % 2, t);
        }
        let members: usize = l.state().clusters.iter().map(|c| c.members).sum();
        assert_eq!(members, 13);
    }
}
