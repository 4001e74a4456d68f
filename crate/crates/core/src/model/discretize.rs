use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{CutPoint, CutSide};

/// Ordered bin boundaries for one primitive. A value's bin is the number of
/// boundaries it has passed, so `k` boundaries give `k + 1` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub cuts: Vec<CutPoint>,
}

impl Binning {
    pub fn new(cuts: Vec<CutPoint>) -> Self {
        Binning { cuts }
    }

    /// Boundaries from bare thresholds with the `count of thresholds ≤ x` rule.
    pub fn from_thresholds(thresholds: &[f64]) -> Self {
        Binning {
            cuts: thresholds
                .iter()
                .map(|&value| CutPoint {
                    value,
                    side: CutSide::Below,
                })
                .collect(),
        }
    }

    /// Boundaries placed between distinct observed values so that each of
    /// `bins` bins holds roughly the same number of samples. Constant data
    /// yields a single bin.
    pub fn quantile(values: &[f64], bins: usize) -> Self {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let breaks: Vec<usize> = (1..n).filter(|&j| sorted[j - 1] < sorted[j]).collect();
        let mut cuts: Vec<CutPoint> = Vec::new();
        if breaks.is_empty() {
            return Binning { cuts };
        }
        for q in 1..bins.max(1) {
            let target = q * n / bins;
            let j = *breaks
                .iter()
                .min_by_key(|&&j| (j as isize - target as isize).unsigned_abs())
                .expect("nonempty");
            let value = sorted[j - 1] + (sorted[j] - sorted[j - 1]) / 2.0;
            if cuts.last().map_or(true, |c| c.value < value) {
                cuts.push(CutPoint {
                    value,
                    side: CutSide::Below,
                });
            }
        }
        Binning { cuts }
    }

    pub fn cardinality(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, x: f64) -> usize {
        self.cuts.iter().filter(|c| c.passed_by(x)).count()
    }

    /// Closed interval hull `(lo, hi)` of bin `b`, infinite at the ends.
    pub fn bounds(&self, b: usize) -> (f64, f64) {
        let lo = if b == 0 {
            f64::NEG_INFINITY
        } else {
            self.cuts[b - 1].value
        };
        let hi = self.cuts.get(b).map_or(f64::INFINITY, |c| c.value);
        (lo, hi)
    }

    /// A value that falls in bin `b`, used when no data landed there.
    pub fn synthetic_value(&self, b: usize) -> f64 {
        let (lo, hi) = self.bounds(b);
        let candidate = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => 0.0,
            (false, true) => hi - hi.abs().max(1.0),
            (true, false) => lo + lo.abs().max(1.0),
            (true, true) if lo == hi => lo,
            (true, true) => lo + (hi - lo) / 2.0,
        };
        debug_assert_eq!(self.bin(candidate), b);
        candidate
    }
}

/// Maps raw primitive values to bins. Primitives without a binning are left out.
pub fn discretize(
    binnings: &BTreeMap<String, Binning>,
    raw: &BTreeMap<String, f64>,
) -> BTreeMap<String, usize> {
    raw.iter()
        .filter_map(|(name, &x)| binnings.get(name).map(|b| (name.clone(), b.bin(x))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rule() {
        let b = Binning::from_thresholds(&[30000.0, 100000.0]);
        assert_eq!(b.cardinality(), 3);
        assert_eq!(b.bin(50000.0), 1);
        assert_eq!(b.bin(30000.0), 1);
        assert_eq!(b.bin(29999.0), 0);
        assert_eq!(b.bin(100000.0), 2);
    }

    #[test]
    fn sided_boundaries() {
        let b = Binning::new(vec![
            CutPoint {
                value: 30000.0,
                side: CutSide::Above,
            },
            CutPoint {
                value: 100000.0,
                side: CutSide::Below,
            },
        ]);
        assert_eq!(b.bin(30000.0), 0);
        assert_eq!(b.bin(30000.5), 1);
        assert_eq!(b.bin(100000.0), 2);
    }

    #[test]
    fn median_split_of_skewed_binary_data() {
        let values: Vec<f64> = (0..10).map(|i| if i < 7 { 0.0 } else { 1.0 }).collect();
        let b = Binning::quantile(&values, 2);
        assert_eq!(b.cuts.len(), 1);
        assert_eq!(b.bin(0.0), 0);
        assert_eq!(b.bin(1.0), 1);
    }

    #[test]
    fn median_split_of_continuous_data() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        let b = Binning::quantile(&values, 2);
        let low = values.iter().filter(|&&v| b.bin(v) == 0).count();
        assert_eq!(low, 50);
        assert_eq!(Binning::quantile(&[3.0; 5], 2).cardinality(), 1);
    }

    #[test]
    fn synthetic_values_land_in_their_bin() {
        let b = Binning::new(vec![
            CutPoint {
                value: 2.0,
                side: CutSide::Below,
            },
            CutPoint {
                value: 2.0,
                side: CutSide::Above,
            },
            CutPoint {
                value: 5.0,
                side: CutSide::Below,
            },
        ]);
        for k in 0..b.cardinality() {
            assert_eq!(b.bin(b.synthetic_value(k)), k);
        }
    }

    #[test]
    fn discretize_by_name() {
        let bins = BTreeMap::from([(
            "area".to_string(),
            Binning::from_thresholds(&[30000.0, 100000.0]),
        )]);
        let raw = BTreeMap::from([("area".to_string(), 50000.0), ("other".to_string(), 1.0)]);
        assert_eq!(
            discretize(&bins, &raw),
            BTreeMap::from([("area".to_string(), 1)])
        );
    }
}
