use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Probabilities are clamped here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Passes `grad` where the pre-activation was positive.
pub fn relu_backward(pre: &Tensor, grad: &Tensor) -> Tensor {
    let mut out = grad.clone();
    for (g, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax logits"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `-ln p[label]`, with `p` clamped at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::shape("cross-entropy label", format!("< {}", probs.len()), label));
    }
    if !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFinite("cross-entropy probabilities"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`.
pub fn softmax_cross_entropy_grad(probs: &[f64], label: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == label { p - 1.0 } else { p })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_symmetric_pair() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_of_coin_flip() {
        for label in 0..2 {
            let ce = cross_entropy(&[0.5, 0.5], label).unwrap();
            assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(softmax(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert!(cross_entropy(&[0.7, 0.7], 0).is_err());
    }

    #[test]
    fn stable_for_large_logits() {
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p[0] > 0.999_999 && p[1] >= 0.0);
        assert!(cross_entropy(&p, 1).unwrap().is_finite());
    }

    #[test]
    fn relu_and_backward() {
        let pre = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&pre).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&pre, &Tensor::vector(vec![5.0, 5.0, 5.0]));
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }

    fn finite_vec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 2..8)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(x in finite_vec(), c in -50.0f64..50.0) {
            let p = softmax(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn combined_gradient_matches_finite_difference(x in finite_vec(), pick in 0usize..8) {
            let label = pick % x.len();
            let p = softmax(&x).unwrap();
            let g = softmax_cross_entropy_grad(&p, label);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut up = x.clone();
                up[i] += h;
                let mut dn = x.clone();
                dn[i] -= h;
                let fd = (cross_entropy(&softmax(&up).unwrap(), label).unwrap()
                    - cross_entropy(&softmax(&dn).unwrap(), label).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-7, "i={} fd={} g={}", i, fd, g[i]);
            }
            // p - one_hot identity
            for i in 0..x.len() {
                let onehot = if i == label { 1.0 } else { 0.0 };
                prop_assert!((g[i] - (p[i] - onehot)).abs() < 1e-10);
            }
        }
    }
}
