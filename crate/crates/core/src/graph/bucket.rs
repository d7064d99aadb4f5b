use serde::{Deserialize, Serialize};

use super::{Graph, GraphProperty};
use crate::error::{Error, Result};

/// How bin boundaries are placed over the auxiliary property values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningStrategy {
    /// Equal-width bins over `[min, max]` of the auxiliary values
    /// (`[0, 1]` for density).
    EqualWidth,
    /// Equal-frequency bins at the empirical quantiles of the auxiliary values.
    /// Coinciding quantiles are merged, so a scheme may end up with fewer than `k` bins.
    #[default]
    Quantile,
}

/// Bin boundaries for one property. `edges` has `num_bins() + 1` strictly
/// ascending entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketScheme {
    pub property: GraphProperty,
    pub requested_bins: usize,
    pub edges: Vec<f64>,
}

impl BucketScheme {
    /// Builds a scheme from the property values of the auxiliary graphs.
    pub fn build(
        aux: &[Graph],
        property: GraphProperty,
        k: usize,
        strategy: BinningStrategy,
    ) -> Result<Self> {
        let values: Vec<f64> = aux.iter().map(|g| property.compute(g)).collect();
        Self::from_values(&values, property, k, strategy)
    }

    pub fn from_values(
        values: &[f64],
        property: GraphProperty,
        k: usize,
        strategy: BinningStrategy,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("bucket count must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Empty("auxiliary property values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);

        let raw: Vec<f64> = match strategy {
            BinningStrategy::EqualWidth => {
                let (lo, hi) = if property == GraphProperty::Density {
                    (0.0, 1.0)
                } else {
                    (lo, hi)
                };
                (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
            }
            BinningStrategy::Quantile => (0..=k).map(|i| quantile(&sorted, i as f64 / k as f64)).collect(),
        };
        let mut edges: Vec<f64> = Vec::with_capacity(raw.len());
        for e in raw {
            if edges.last().is_none_or(|&last| e > last) {
                edges.push(e);
            }
        }
        if edges.len() < 2 {
            if k == 1 {
                edges = vec![lo, hi];
            } else {
                return Err(Error::InvalidArgument(format!(
                    "all auxiliary values of {property} equal {lo}; bins are undefined"
                )));
            }
        }
        Ok(BucketScheme {
            property,
            requested_bins: k,
            edges,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin index of `value`. Out-of-range values clamp to the end bins and a
    /// value on an interior boundary belongs to the higher bin.
    pub fn bucketize(&self, value: f64) -> usize {
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= value)
    }

    pub fn label(&self, g: &Graph) -> usize {
        self.bucketize(self.property.compute(g))
    }
}

/// Linear-interpolation quantile of pre-sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn density_fixed_domain_with_five_bins() {
        let s = BucketScheme::from_values(&[0.1, 0.2], GraphProperty::Density, 5, BinningStrategy::EqualWidth).unwrap();
        assert_eq!(s.num_bins(), 5);
        assert_eq!(s.bucketize(0.3), 1);
        assert_eq!(s.bucketize(1.0), 4);
        assert_eq!(s.bucketize(1.5), 4);
        assert_eq!(s.bucketize(0.75), 3);
    }

    #[test]
    fn density_two_bins_upper_half() {
        let s = BucketScheme::from_values(&[0.3], GraphProperty::Density, 2, BinningStrategy::EqualWidth).unwrap();
        assert_eq!(s.bucketize(0.75), 1);
    }

    #[test]
    fn values_below_range_clamp_to_first_bin() {
        let s = BucketScheme::from_values(&[10.0, 20.0, 30.0], GraphProperty::NumNodes, 4, BinningStrategy::EqualWidth)
            .unwrap();
        assert_eq!(s.bucketize(-5.0), 0);
        assert_eq!(s.bucketize(9.0), 0);
        assert_eq!(s.bucketize(1e9), 3);
    }

    #[test]
    fn boundary_midpoint_goes_to_higher_bin() {
        let aux: Vec<f64> = (10..=100).map(f64::from).collect();
        for strategy in [BinningStrategy::EqualWidth, BinningStrategy::Quantile] {
            let s = BucketScheme::from_values(&aux, GraphProperty::NumNodes, 2, strategy).unwrap();
            assert_eq!(s.edges[1], 55.0);
            assert_eq!(s.bucketize(55.0), 1);
            assert_eq!(s.bucketize(54.9), 0);
        }
    }

    #[test]
    fn identical_values_are_rejected_unless_single_bin() {
        let aux = [7.0; 5];
        for strategy in [BinningStrategy::EqualWidth, BinningStrategy::Quantile] {
            assert!(BucketScheme::from_values(&aux, GraphProperty::NumNodes, 2, strategy).is_err());
            let single = BucketScheme::from_values(&aux, GraphProperty::NumNodes, 1, strategy).unwrap();
            assert_eq!(single.bucketize(3.0), 0);
        }
    }

    #[test]
    fn quantile_bins_balance_skewed_values() {
        // heavy right tail: equal-width puts almost everything in bin 0
        let mut aux: Vec<f64> = (0..99).map(|i| 30.0 + i as f64).collect();
        aux.push(5000.0);
        let ew = BucketScheme::from_values(&aux, GraphProperty::NumNodes, 2, BinningStrategy::EqualWidth).unwrap();
        let q = BucketScheme::from_values(&aux, GraphProperty::NumNodes, 2, BinningStrategy::Quantile).unwrap();
        let upper = |s: &BucketScheme| aux.iter().filter(|&&v| s.bucketize(v) == 1).count();
        assert_eq!(upper(&ew), 1);
        assert_eq!(upper(&q), 50);
    }

    #[test]
    fn duplicate_quantiles_merge() {
        let aux = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let s = BucketScheme::from_values(&aux, GraphProperty::Diameter, 4, BinningStrategy::Quantile).unwrap();
        assert!(s.num_bins() < 4);
        assert!(s.edges.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn bucketize_is_monotone_and_hits_both_ends(
            mut aux in proptest::collection::vec(0.0f64..1000.0, 2..60),
            k in 1usize..9,
            quantile in any::<bool>(),
            probes in proptest::collection::vec(-100.0f64..1100.0, 1..40),
        ) {
            aux.push(-1.0);
            aux.push(1001.0);
            let strategy = if quantile { BinningStrategy::Quantile } else { BinningStrategy::EqualWidth };
            let s = BucketScheme::from_values(&aux, GraphProperty::NumEdges, k, strategy).unwrap();
            prop_assert!(s.edges.windows(2).all(|w| w[0] < w[1]));
            let mut probes = probes;
            probes.sort_by(f64::total_cmp);
            let bins: Vec<usize> = probes.iter().map(|&v| s.bucketize(v)).collect();
            prop_assert!(bins.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(bins.iter().all(|&b| b < s.num_bins()));
            prop_assert_eq!(s.bucketize(-1.0), 0);
            prop_assert_eq!(s.bucketize(1001.0), s.num_bins() - 1);
        }
    }
}
