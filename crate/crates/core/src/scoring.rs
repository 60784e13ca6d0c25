//! Set relevance scoring: an inner aggregation `σ` over one query vector's
//! similarities to a target set, then a weighted mean over query vectors.
//!
//! Every shipped `σ` is sandwiched as `β·max(x) ≤ σ(x) ≤ α·max(x)` on
//! `[0,1]^m`. For the averaged forms `σ(x) = (1/m) Σ φ(x_i)` the lower
//! constant shrinks with the set size: `β = β_φ / m`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Element-wise transform applied before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phi {
    Identity,
    /// `e^x - 1`
    ExpMinusOne,
    /// `1/(1 + e^-x) - 1/2`
    DebiasedSigmoid,
}

impl Phi {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Phi::Identity => x,
            Phi::ExpMinusOne => x.exp_m1(),
            Phi::DebiasedSigmoid => 1.0 / (1.0 + (-x).exp()) - 0.5,
        }
    }

    /// Smallest `c` with `φ(x) ≤ c·x` on `[0, 1]`.
    pub fn alpha(self) -> f64 {
        match self {
            Phi::Identity => 1.0,
            Phi::ExpMinusOne => std::f64::consts::E - 1.0,
            // slope of the sigmoid at the origin
            Phi::DebiasedSigmoid => 0.25,
        }
    }

    /// Largest `c` with `φ(x) ≥ c·x` on `[0, 1]`.
    pub fn beta(self) -> f64 {
        match self {
            Phi::Identity => 1.0,
            Phi::ExpMinusOne => 1.0,
            Phi::DebiasedSigmoid => debiased_sigmoid_beta(),
        }
    }
}

/// Infimum of `φ(x)/x` over `(0, 1]` for the debiased sigmoid, found by a
/// dense scan and cached.
fn debiased_sigmoid_beta() -> f64 {
    static BETA: OnceLock<f64> = OnceLock::new();
    *BETA.get_or_init(|| {
        const STEPS: usize = 100_000;
        (1..=STEPS)
            .map(|i| {
                let x = i as f64 / STEPS as f64;
                Phi::DebiasedSigmoid.apply(x) / x
            })
            .fold(f64::INFINITY, f64::min)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InnerAggregation {
    #[default]
    Max,
    AvgPhi(Phi),
}

impl InnerAggregation {
    pub fn alpha(self) -> f64 {
        match self {
            InnerAggregation::Max => 1.0,
            InnerAggregation::AvgPhi(phi) => phi.alpha(),
        }
    }

    /// Lower maximality constant for a set of `m` similarities.
    pub fn beta(self, m: usize) -> f64 {
        match self {
            InnerAggregation::Max => 1.0,
            InnerAggregation::AvgPhi(phi) => phi.beta() / m.max(1) as f64,
        }
    }

    pub fn apply(self, sims: &[f64]) -> Result<f64> {
        match self {
            InnerAggregation::Max => sigma_max(sims),
            InnerAggregation::AvgPhi(phi) => sigma_avg_phi(sims, phi),
        }
    }

    /// Value of `σ`'s per-element contribution at similarity `s`. For `Max`
    /// this is `s` itself; for averages it is `φ(s)` (divide the sum by `m`).
    #[inline]
    pub(crate) fn transform(self, s: f64) -> f64 {
        match self {
            InnerAggregation::Max => s,
            InnerAggregation::AvgPhi(phi) => phi.apply(s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InnerAggregation::Max => "max",
            InnerAggregation::AvgPhi(Phi::Identity) => "avg",
            InnerAggregation::AvgPhi(Phi::ExpMinusOne) => "avg-exp",
            InnerAggregation::AvgPhi(Phi::DebiasedSigmoid) => "avg-sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "max" => InnerAggregation::Max,
            "avg" => InnerAggregation::AvgPhi(Phi::Identity),
            "avg-exp" => InnerAggregation::AvgPhi(Phi::ExpMinusOne),
            "avg-sigmoid" => InnerAggregation::AvgPhi(Phi::DebiasedSigmoid),
            _ => return None,
        })
    }
}

pub fn sigma_max(sims: &[f64]) -> Result<f64> {
    sims.iter().copied().reduce(f64::max).ok_or(Error::EmptyInput)
}

pub fn sigma_avg_phi(sims: &[f64], phi: Phi) -> Result<f64> {
    if sims.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for &s in sims {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ValueOutOfRange { value: s });
        }
        sum += phi.apply(s);
    }
    Ok(sum / sims.len() as f64)
}

/// Per-query-vector weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterWeights(Vec<f64>);

impl OuterWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::ValueOutOfRange { value: w });
        }
        Ok(Self(weights))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `(1/m_q) Σ_j w_j · scores_j`.
pub fn outer_aggregate(per_query_scores: &[f64], weights: &OuterWeights) -> Result<f64> {
    if per_query_scores.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            got: per_query_scores.len(),
        });
    }
    if per_query_scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = per_query_scores
        .iter()
        .zip(weights.as_slice())
        .map(|(s, w)| s * w)
        .sum();
    Ok(sum / per_query_scores.len() as f64)
}

/// A full relevance function: inner aggregation plus optional outer weights
/// (all ones when absent).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scorer {
    pub inner: InnerAggregation,
    pub weights: Option<OuterWeights>,
}

impl Scorer {
    pub fn new(inner: InnerAggregation) -> Self {
        Self { inner, weights: None }
    }

    pub fn with_weights(mut self, weights: OuterWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Resolves the weights for a query of `m_q` vectors.
    pub fn weights_for(&self, m_q: usize) -> Result<OuterWeights> {
        match &self.weights {
            None => Ok(OuterWeights::uniform(m_q)),
            Some(w) if w.len() == m_q => Ok(w.clone()),
            Some(w) => Err(Error::LengthMismatch {
                expected: m_q,
                got: w.len(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [InnerAggregation; 4] = [
        InnerAggregation::Max,
        InnerAggregation::AvgPhi(Phi::Identity),
        InnerAggregation::AvgPhi(Phi::ExpMinusOne),
        InnerAggregation::AvgPhi(Phi::DebiasedSigmoid),
    ];

    #[test]
    fn max_examples() {
        assert_eq!(sigma_max(&[0.2, 0.9, 0.5]).unwrap(), 0.9);
        assert_eq!(sigma_max(&[0.3, 0.3]).unwrap(), 0.3);
        assert!(matches!(sigma_max(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn avg_phi_examples() {
        assert!((sigma_avg_phi(&[0.5, 0.1], Phi::Identity).unwrap() - 0.3).abs() < 1e-15);
        let e = sigma_avg_phi(&[1.0, 1.0], Phi::ExpMinusOne).unwrap();
        assert!((e - 1.718_281_828_459_045).abs() < 1e-12);
        // sandwich at m = 2: (β_φ/2)·1 ≤ σ ≤ α_φ·1
        assert!((0.5..=std::f64::consts::E - 1.0 + 1e-12).contains(&e));
        assert_eq!(sigma_avg_phi(&[0.0, 0.0, 0.0], Phi::DebiasedSigmoid).unwrap(), 0.0);
        assert!(matches!(sigma_avg_phi(&[], Phi::Identity), Err(Error::EmptyInput)));
        assert!(matches!(
            sigma_avg_phi(&[0.5, 1.5], Phi::Identity),
            Err(Error::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn sigmoid_constants() {
        let beta = Phi::DebiasedSigmoid.beta();
        // φ(x)/x decreases on (0,1], so the infimum sits at x = 1
        let at_one = 1.0 / (1.0 + (-1.0f64).exp()) - 0.5;
        assert!((beta - at_one).abs() < 1e-12);
        assert!((beta - 0.23).abs() < 0.005);
        assert_eq!(Phi::DebiasedSigmoid.alpha(), 0.25);
    }

    #[test]
    fn outer_examples() {
        let ones = OuterWeights::uniform(2);
        assert!((outer_aggregate(&[0.4, 0.8], &ones).unwrap() - 0.6).abs() < 1e-15);
        let mask = OuterWeights::new(vec![0.0, 1.0]).unwrap();
        assert!((outer_aggregate(&[0.4, 0.8], &mask).unwrap() - 0.4).abs() < 1e-15);
        let half = OuterWeights::new(vec![0.5; 3]).unwrap();
        assert!((outer_aggregate(&[1.0, 1.0, 1.0], &half).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            outer_aggregate(&[1.0], &ones),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(OuterWeights::new(vec![1.5]).is_err());
    }

    #[test]
    fn scorer_weights() {
        let s = Scorer::default();
        assert_eq!(s.weights_for(3).unwrap().as_slice(), &[1.0, 1.0, 1.0]);
        let s = s.with_weights(OuterWeights::new(vec![0.5, 1.0]).unwrap());
        assert!(s.weights_for(3).is_err());
        assert_eq!(s.weights_for(2).unwrap().as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn names_roundtrip() {
        for agg in ALL {
            assert_eq!(InnerAggregation::from_name(agg.name()), Some(agg));
        }
        assert_eq!(InnerAggregation::from_name("sum"), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn maximality_sandwich(x in prop::collection::vec(0.0f64..=1.0, 1..=64)) {
            let max = sigma_max(&x).unwrap();
            for agg in ALL {
                let v = agg.apply(&x).unwrap();
                let lo = agg.beta(x.len()) * max;
                let hi = agg.alpha() * max;
                prop_assert!(lo <= v + 1e-12 && v <= hi + 1e-12, "{:?}: {} !in [{}, {}]", agg, v, lo, hi);
            }
        }

        #[test]
        fn monotone_in_each_coordinate(
            x in prop::collection::vec(0.0f64..=1.0, 1..=32),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..=1.0,
        ) {
            let i = idx.index(x.len());
            let mut y = x.clone();
            y[i] = (y[i] + bump).min(1.0);
            for agg in ALL {
                prop_assert!(agg.apply(&y).unwrap() >= agg.apply(&x).unwrap() - 1e-15);
            }
        }

        #[test]
        fn max_equals_identity_average_at_m1(s in 0.0f64..=1.0) {
            prop_assert_eq!(sigma_max(&[s]).unwrap(), sigma_avg_phi(&[s], Phi::Identity).unwrap());
        }

        #[test]
        fn weight_scaling_preserves_order(
            a in prop::collection::vec(0.0f64..=1.0, 4),
            b in prop::collection::vec(0.0f64..=1.0, 4),
            w in prop::collection::vec(0.01f64..=1.0, 4),
            c in 0.01f64..=1.0,
        ) {
            let w1 = OuterWeights::new(w.clone()).unwrap();
            let w2 = OuterWeights::new(w.iter().map(|x| x * c).collect()).unwrap();
            let d1 = outer_aggregate(&a, &w1).unwrap() - outer_aggregate(&b, &w1).unwrap();
            let d2 = outer_aggregate(&a, &w2).unwrap() - outer_aggregate(&b, &w2).unwrap();
            prop_assert!(d1.abs() < 1e-12 || d1.signum() == d2.signum());
        }
    }
}
