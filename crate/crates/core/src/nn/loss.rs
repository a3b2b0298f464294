use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of softmax(logits) against a class index.
/// Returns the loss and its gradient `softmax - onehot`.
pub fn softmax_ce(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::OutOfRange {
            what: "target class",
            value: target as f64,
            limit: logits.len() as f64,
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::State("non-finite logits".into()));
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    let loss = (lse - logits[target]).max(0.0);
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::numeric_grad;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_ln_m() {
        for m in [2usize, 4, 11] {
            let (l, g) = softmax_ce(&vec![0.3; m], 0).unwrap();
            assert!((l - (m as f64).ln()).abs() < 1e-12);
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decreases_as_true_logit_grows() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let (l, _) = softmax_ce(&[k as f64, 0.0, 0.0], 0).unwrap();
            assert!(l <= prev);
            prev = l;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = rng.random_range(2..12);
            let z: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let t = rng.random_range(0..m);
            let (_, g) = softmax_ce(&z, t).unwrap();
            let num = numeric_grad(|v| softmax_ce(v, t).unwrap().0, &z, 1e-4);
            for (a, b) in g.iter().zip(&num) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn bad_target_rejected() {
        assert!(softmax_ce(&[0.0, 1.0], 2).is_err());
        assert!(softmax_ce(&[f64::NAN, 1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn loss_is_non_negative(z in proptest::collection::vec(-1e3f64..1e3, 1..12), t in 0usize..12) {
            let t = t % z.len();
            let (l, g) = softmax_ce(&z, t).unwrap();
            prop_assert!(l >= 0.0 && l.is_finite());
            prop_assert!(g.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}
