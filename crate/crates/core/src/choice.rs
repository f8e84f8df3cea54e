//! Multinomial-logit choice primitives and the losses shared by all learners.

use crate::error::{Error, Result};
use crate::model::{ChoiceDistribution, OptionContext, PreferenceVector};

/// Floor applied to a probability before taking its logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Utility of every option: `[x_a, 1{a == recommended}] . theta`.
///
/// With `recommended = None` the indicator is zero for every option, so the
/// anchoring coordinate of `theta` is never read.
pub fn utilities(
    theta: &PreferenceVector,
    options: &[OptionContext],
    recommended: Option<usize>,
) -> Result<Vec<f64>> {
    let d = theta.option_dim();
    if let Some(r) = recommended {
        if r >= options.len() {
            return Err(Error::invalid(format!(
                "recommended index {r} out of bounds for {} options",
                options.len()
            )));
        }
    }
    let w = theta.feature_weights();
    options
        .iter()
        .enumerate()
        .map(|(a, opt)| {
            if opt.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: opt.dim(),
                });
            }
            let mut u = dot(&opt.features, w);
            if recommended == Some(a) {
                u += theta.anchoring();
            }
            Ok(u)
        })
        .collect()
}

/// Max-shifted softmax.
pub fn softmax(u: &[f64]) -> Result<ChoiceDistribution> {
    if u.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = u.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(ChoiceDistribution {
        probs: exps.into_iter().map(|e| e / z).collect(),
    })
}

/// KL divergence between a one-hot target and `p`, i.e. `-ln p[chosen]`.
pub fn kl_onehot(p: &ChoiceDistribution, chosen: usize) -> f64 {
    -p.probs[chosen].max(PROB_FLOOR).ln()
}

pub fn zero_one_loss(predicted: usize, chosen: usize) -> f64 {
    if predicted == chosen {
        0.0
    } else {
        1.0
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Option predicted by `theta`: the argmax of its utilities.
pub fn predict(
    theta: &PreferenceVector,
    options: &[OptionContext],
    recommended: Option<usize>,
) -> Result<usize> {
    Ok(argmax(&utilities(theta, options, recommended)?))
}

pub fn onehot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn opts(rows: &[&[f64]]) -> Vec<OptionContext> {
        rows.iter().map(|r| OptionContext::new(r.to_vec())).collect()
    }

    fn theta(w: &[f64]) -> PreferenceVector {
        PreferenceVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn utilities_examples() {
        let o = opts(&[&[2.0, 3.0], &[5.0, 7.0]]);
        assert_eq!(utilities(&theta(&[1.0, 0.0, 0.0]), &o, None).unwrap(), vec![2.0, 5.0]);
        assert_eq!(utilities(&theta(&[0.0, 0.0, 1.0]), &o, Some(0)).unwrap(), vec![1.0, 0.0]);

        let travel = opts(&[&[100.0, 100.0], &[104.29, 91.99]]);
        let u = utilities(&theta(&[-0.1, -0.1, 0.0]), &travel, None).unwrap();
        assert_abs_diff_eq!(u[0], -20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], -19.628, epsilon = 1e-12);
    }

    #[test]
    fn utilities_rejects_mismatch() {
        let o = opts(&[&[1.0], &[2.0]]);
        assert!(matches!(
            utilities(&theta(&[1.0, 0.0, 0.0]), &o, None),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(utilities(&theta(&[1.0, 0.0]), &o, Some(2)).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap().probs, vec![0.5, 0.5]);
        let p = softmax(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p.probs[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(p.probs[1], 0.268_941_421_369_995_1, epsilon = 1e-12);
        for c in [-1e3, 0.0, 7.5, 1e3] {
            for q in softmax(&[c, c, c]).unwrap().probs {
                assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = |v: &[f64]| ChoiceDistribution { probs: v.to_vec() };
        assert_eq!(kl_onehot(&p(&[1.0, 0.0]), 0), 0.0);
        assert_abs_diff_eq!(kl_onehot(&p(&[0.5, 0.5]), 0), 0.693_147_180_559_945_3, epsilon = 1e-12);
        assert_abs_diff_eq!(kl_onehot(&p(&[0.25, 0.75]), 1), 0.287_682_072_451_780_9, epsilon = 1e-12);
        // clamped rather than infinite
        assert_abs_diff_eq!(kl_onehot(&p(&[1.0, 0.0]), 1), -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn zero_one_matches_half_squared_onehot_distance() {
        for a_len in 1..=8 {
            for p in 0..a_len {
                for y in 0..a_len {
                    let dist: f64 = onehot(p, a_len)
                        .iter()
                        .zip(onehot(y, a_len))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    assert_eq!(zero_one_loss(p, y), 0.5 * dist);
                }
            }
        }
        assert_eq!(zero_one_loss(2, 2), 0.0);
        assert_eq!(zero_one_loss(0, 1), 1.0);
    }

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmin(&[2.0, 0.0, 0.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            u in prop::collection::vec(-50.0f64..50.0, 1..10),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&u).unwrap();
            let s: f64 = p.probs.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.probs.iter().all(|&q| q >= 0.0));
            let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.probs.iter().zip(&q.probs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn kl_nonnegative(u in prop::collection::vec(-20.0f64..20.0, 2..8), pick in 0usize..8) {
            let p = softmax(&u).unwrap();
            let a = pick % u.len();
            let kl = kl_onehot(&p, a);
            prop_assert!(kl >= 0.0);
            prop_assert_eq!(kl == 0.0, p.probs[a] == 1.0);
        }

        #[test]
        fn anchoring_ignored_without_recommendation(
            w in prop::collection::vec(-1.0f64..1.0, 2),
            rec_a in -100.0f64..100.0,
            rec_b in -100.0f64..100.0,
            x in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            let o = vec![
                OptionContext::new(x[0..2].to_vec()),
                OptionContext::new(x[2..4].to_vec()),
                OptionContext::new(x[4..6].to_vec()),
            ];
            let ta = theta(&[w[0], w[1], rec_a]);
            let tb = theta(&[w[0], w[1], rec_b]);
            prop_assert_eq!(utilities(&ta, &o, None).unwrap(), utilities(&tb, &o, None).unwrap());
        }
    }
}
