//! Channel weighting: spatially weighted channel sums, element-value items,
//! the idf-like channel weights built from them, and the sparsity baseline.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ChannelVector, FeatureTensor, SpatialMap};

/// Small positive constant keeping the channel-weight logarithm finite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpsilonConstant(f64);

impl EpsilonConstant {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!("epsilon must be positive, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for EpsilonConstant {
    fn default() -> Self {
        Self(1e-6)
    }
}

/// `Ω_k = Σ_i Σ_j X(k, i, j)·S(i, j)`, accumulated in f64.
pub fn weighted_channel_sums<T: Scalar>(t: &FeatureTensor<T>, s: &SpatialMap<T>) -> Result<ChannelVector<T>> {
    if (s.height(), s.width()) != (t.height(), t.width()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} weight map for {}x{} tensor",
            s.height(),
            s.width(),
            t.height(),
            t.width()
        )));
    }
    let weights = s.values();
    Ok(t
        .channel_planes()
        .map(|plane| {
            let sum: f64 = plane.iter().zip(weights).map(|(&x, &w)| x.acc() * w.acc()).sum();
            T::from_acc(sum)
        })
        .collect::<Vec<_>>()
        .into())
}

/// Plain per-channel sums (all-ones weight map).
pub fn channel_sums<T: Scalar>(t: &FeatureTensor<T>) -> ChannelVector<T> {
    t.channel_planes()
        .map(|plane| T::from_acc(plane.iter().map(|x| x.acc()).sum()))
        .collect::<Vec<_>>()
        .into()
}

/// `b_k = (Ω_k / (W·H))²`.
pub fn element_value_items<T: Scalar>(omega: &ChannelVector<T>, h: usize, w: usize) -> ChannelVector<T> {
    let cells = (h * w) as f64;
    omega
        .values()
        .iter()
        .map(|&o| {
            let mean = o.acc() / cells;
            T::from_acc(mean * mean)
        })
        .collect::<Vec<_>>()
        .into()
}

/// `B_k = ln((K·ε + Σ_c b_c) / (ε + b_k))`.
///
/// Channels whose items are large relative to the rest get small weights.
pub fn echannel_weights<T: Scalar>(b: &ChannelVector<T>, eps: EpsilonConstant) -> ChannelVector<T> {
    idf_weights(b, eps)
}

/// Fraction of nonzero cells per channel. Zero-test is exact equality.
pub fn sparsity_items<T: Scalar>(t: &FeatureTensor<T>) -> ChannelVector<T> {
    let cells = t.cells() as f64;
    t.channel_planes()
        .map(|plane| {
            let nonzero = plane.iter().filter(|&&x| x != T::zero()).count();
            T::from_acc(nonzero as f64 / cells)
        })
        .collect::<Vec<_>>()
        .into()
}

/// Sparsity baseline: the same log-ratio form applied to sparsity items.
pub fn schannel_weights<T: Scalar>(q: &ChannelVector<T>, eps: EpsilonConstant) -> ChannelVector<T> {
    idf_weights(q, eps)
}

fn idf_weights<T: Scalar>(items: &ChannelVector<T>, eps: EpsilonConstant) -> ChannelVector<T> {
    let k = items.len() as f64;
    let eps = eps.value();
    let total: f64 = items.values().iter().map(|v| v.acc()).sum();
    let numerator = k * eps + total;
    items
        .values()
        .iter()
        .map(|&v| T::from_acc((numerator / (eps + v.acc())).ln()))
        .collect::<Vec<_>>()
        .into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cv(v: &[f64]) -> ChannelVector<f64> {
        v.to_vec().into()
    }

    #[test]
    fn ones_map_gives_plain_sums() {
        let t = FeatureTensor::new("t", 2, 2, 2, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 0.5, 0.5]).unwrap();
        let ones = SpatialMap::filled(2, 2, 1.0);
        assert_eq!(weighted_channel_sums(&t, &ones).unwrap(), cv(&[10.0, 0.0]));
        assert_eq!(channel_sums(&t), cv(&[10.0, 0.0]));
    }

    #[test]
    fn zero_tensor_gives_zero_sums() {
        let t = FeatureTensor::<f64>::zeros("z", 3, 2, 2).unwrap();
        let s = SpatialMap::filled(2, 2, 0.7);
        assert_eq!(weighted_channel_sums(&t, &s).unwrap(), cv(&[0.0; 3]));
    }

    #[test]
    fn weighted_sums_match_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, h, w) = (3, 4, 5);
        let t = FeatureTensor::new("r", k, h, w, (0..k * h * w).map(|_| rng.random_range(0.0..4.0)).collect()).unwrap();
        let s = SpatialMap::new(h, w, (0..h * w).map(|_| rng.random()).collect()).unwrap();
        let omega = weighted_channel_sums(&t, &s).unwrap();
        for kk in 1..=k {
            let mut oracle = 0.0f64;
            for i in 1..=h {
                for j in 1..=w {
                    oracle += t.at(kk, i, j) * s.at(i, j);
                }
            }
            let got = omega.values()[kk - 1];
            assert!((got - oracle).abs() <= 1e-9 * oracle.abs());
        }
    }

    #[test]
    fn map_shape_mismatch() {
        let t = FeatureTensor::<f64>::zeros("z", 1, 2, 3).unwrap();
        let s = SpatialMap::filled(3, 2, 1.0);
        assert!(matches!(weighted_channel_sums(&t, &s), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn element_value_examples() {
        assert_eq!(element_value_items(&cv(&[0.0, 0.0]), 3, 3), cv(&[0.0, 0.0]));
        assert_eq!(element_value_items(&cv(&[12.0]), 3, 4), cv(&[1.0]));
        assert_eq!(element_value_items(&cv(&[2.0, -6.0]), 2, 1), cv(&[1.0, 9.0]));
    }

    #[test]
    fn echannel_examples() {
        let eps = EpsilonConstant::default();
        let b = echannel_weights(&cv(&[1.0, 3.0]), eps);
        assert!((b.values()[0] - (4.000002f64 / 1.000001).ln()).abs() < 1e-15);
        assert!((b.values()[0] - 1.386294).abs() < 1e-6);
        assert!((b.values()[1] - 0.287682).abs() < 1e-6);

        for v in [0.0, 0.3, 7.0] {
            let w = echannel_weights(&cv(&[v; 5]), eps);
            assert!(w.values().iter().all(|&x| (x - 5f64.ln()).abs() < 1e-12));
        }
    }

    #[test]
    fn sparsity_examples() {
        let t = FeatureTensor::new("s", 3, 2, 2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 5.0, 0.0])
            .unwrap();
        assert_eq!(sparsity_items(&t), cv(&[0.0, 1.0, 0.25]));
    }

    #[test]
    fn schannel_examples() {
        let eps = EpsilonConstant::default();
        let w = schannel_weights(&cv(&[0.0, 1.0]), eps);
        assert!((w.values()[0] - 13.8155).abs() < 1e-4);
        assert!((w.values()[1] - 1.0e-6).abs() < 1e-9);
        let w = schannel_weights(&cv(&[0.4; 3]), eps);
        assert!(w.values().iter().all(|&x| (x - 3f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn epsilon_validation() {
        assert!(EpsilonConstant::new(0.0).is_err());
        assert!(EpsilonConstant::new(-1.0).is_err());
        assert!(EpsilonConstant::new(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn weights_anti_monotone(items in proptest::collection::vec(0.0f64..100.0, 2..32)) {
            let eps = EpsilonConstant::default();
            for weights in [echannel_weights(&cv(&items), eps), schannel_weights(&cv(&items), eps)] {
                let w = weights.values();
                for a in 0..items.len() {
                    for c in 0..items.len() {
                        if items[a] < items[c] {
                            prop_assert!(w[a] > w[c]);
                        }
                    }
                }
            }
        }

        #[test]
        fn weight_decreases_when_own_item_grows(
            items in proptest::collection::vec(0.0f64..10.0, 2..16), idx in any::<prop::sample::Index>(), bump in 0.01f64..5.0
        ) {
            let eps = EpsilonConstant::default();
            let k = idx.index(items.len());
            let before = echannel_weights(&cv(&items), eps).values()[k];
            let mut grown = items.clone();
            grown[k] += bump;
            prop_assert!(echannel_weights(&cv(&grown), eps).values()[k] < before);
        }

        #[test]
        fn items_invariant_under_sign_flip(omega in proptest::collection::vec(-50.0f64..50.0, 1..16)) {
            let neg: Vec<f64> = omega.iter().map(|x| -x).collect();
            prop_assert_eq!(element_value_items(&cv(&omega), 3, 4), element_value_items(&cv(&neg), 3, 4));
        }

        #[test]
        fn weighted_sums_bilinear(seed in any::<u64>(), a in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gen = |rng: &mut ChaCha8Rng| FeatureTensor::new("x", 2, 3, 3, (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (x, y) = (gen(&mut rng), gen(&mut rng));
            let s = SpatialMap::new(3, 3, (0..9).map(|_| rng.random()).collect()).unwrap();
            let s2 = SpatialMap::new(3, 3, (0..9).map(|_| rng.random()).collect()).unwrap();
            let lhs = weighted_channel_sums(&x.linear_combination(a, &y, 1.0).unwrap(), &s).unwrap();
            let ox = weighted_channel_sums(&x, &s).unwrap();
            let oy = weighted_channel_sums(&y, &s).unwrap();
            for k in 0..2 {
                prop_assert!((lhs.values()[k] - (a * ox.values()[k] + oy.values()[k])).abs() < 1e-12);
            }
            let ssum = SpatialMap::new(3, 3, s.values().iter().zip(s2.values()).map(|(p, q)| p + a * q).collect()).unwrap();
            let lhs = weighted_channel_sums(&x, &ssum).unwrap();
            let o2 = weighted_channel_sums(&x, &s2).unwrap();
            for k in 0..2 {
                prop_assert!((lhs.values()[k] - (ox.values()[k] + a * o2.values()[k])).abs() < 1e-12);
            }
        }
    }
}
