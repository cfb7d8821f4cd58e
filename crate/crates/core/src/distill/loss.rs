use crate::error::{Error, Result};
use crate::res1dcnn::FeatureMap;

/// Mean over the L components of `(zs - zt)^2`.
pub fn distill_loss(zs: &FeatureMap, zt: &FeatureMap) -> Result<f64> {
    check(zs, zt)?;
    Ok(zs.0.iter().zip(&zt.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / zs.len() as f64)
}

/// Gradient of [`distill_loss`] with respect to `zs`: `2 (zs - zt) / L`.
pub fn distill_loss_grad(zs: &FeatureMap, zt: &FeatureMap) -> Result<Vec<f64>> {
    check(zs, zt)?;
    let n = zs.len() as f64;
    Ok(zs.0.iter().zip(&zt.0).map(|(a, b)| 2.0 * (a - b) / n).collect())
}

fn check(zs: &FeatureMap, zt: &FeatureMap) -> Result<()> {
    if zs.len() != zt.len() {
        return Err(Error::shape("distillation feature maps", zt.len(), zs.len()));
    }
    if zs.is_empty() {
        return Err(Error::Empty("feature map"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_cases() {
        let z = FeatureMap(vec![0.3, -1.2, 4.0]);
        assert_eq!(distill_loss(&z, &z).unwrap(), 0.0);
        let shifted = FeatureMap(z.0.iter().map(|v| v + 1.0).collect());
        assert!((distill_loss(&shifted, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(distill_loss(&z, &FeatureMap(vec![0.0; 2])).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..100)) {
            let zs = FeatureMap(pairs.iter().map(|p| p.0).collect());
            let zt = FeatureMap(pairs.iter().map(|p| p.1).collect());
            let mut sum = 0.0;
            for (a, b) in &pairs {
                sum += (a - b).powi(2);
            }
            prop_assert!((distill_loss(&zs, &zt).unwrap() - sum / pairs.len() as f64).abs() < 1e-12);
        }

        #[test]
        fn gradient_matches_finite_difference(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)) {
            let zs = FeatureMap(pairs.iter().map(|p| p.0).collect());
            let zt = FeatureMap(pairs.iter().map(|p| p.1).collect());
            let g = distill_loss_grad(&zs, &zt).unwrap();
            let h = 1e-6;
            for i in 0..zs.len() {
                let mut up = zs.clone();
                up.0[i] += h;
                let mut dn = zs.clone();
                dn.0[i] -= h;
                let fd = (distill_loss(&up, &zt).unwrap() - distill_loss(&dn, &zt).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-7);
            }
        }
    }
}
