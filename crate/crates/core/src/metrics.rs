//! Counting and localization quality metrics.

use alloc::vec::Vec;

use crate::math::{mean, std_dev};
use crate::radiometry::MAX_PERSONS;

const CLASSES: usize = MAX_PERSONS + 1;

/// Person-count confusion matrix; rows are true counts, columns predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub counts: [[u64; CLASSES]; CLASSES],
}

impl Confusion {
    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth.min(MAX_PERSONS)][predicted.min(MAX_PERSONS)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..CLASSES).map(|c| self.counts[c][c]).sum::<u64>() as f64 / total as f64
    }

    pub fn precision(&self, class: usize) -> f64 {
        let predicted: u64 = (0..CLASSES).map(|r| self.counts[r][class]).sum();
        ratio(self.counts[class][class], predicted)
    }

    pub fn recall(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.row_total(class))
    }

    pub fn f1(&self, class: usize) -> f64 {
        f1_score(self.precision(class), self.recall(class))
    }

    /// Mean F1 over the classes that occur in the ground truth.
    pub fn macro_f1(&self) -> f64 {
        let present: Vec<f64> = (0..CLASSES).filter(|&c| self.row_total(c) > 0).map(|c| self.f1(c)).collect();
        mean(&present)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall (0 when both are 0).
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub max: f64,
}

pub fn summarize(samples: &[f64]) -> Summary {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    Summary {
        count: samples.len(),
        mean: mean(samples),
        std: std_dev(samples),
        median,
        max: sorted.last().copied().unwrap_or(0.0),
    }
}

/// Empirical CDF `P(error <= x)` evaluated on `grid`.
pub fn cdf(samples: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    grid.iter()
        .map(|x| {
            if sorted.is_empty() {
                return 0.0;
            }
            sorted.partition_point(|v| v <= x) as f64 / sorted.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let mut c = Confusion::default();
        for k in 0..4 {
            for _ in 0..5 {
                c.add(k, k);
            }
        }
        assert_eq!(c.accuracy(), 1.0);
        assert!((0..4).all(|k| c.f1(k) == 1.0));
        assert_eq!(c.row_total(2), 5);
    }

    #[test]
    fn f1_formula() {
        assert!((f1_score(0.8, 0.5) - 8.0 / 13.0).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn cdf_reaches_one_at_the_largest_sample() {
        let s = [0.3, 1.2, 0.7, 0.7];
        let f = cdf(&s, &[0.0, 0.7, 1.2]);
        assert_eq!(f, [0.0, 0.75, 1.0]);
        let m = summarize(&s);
        assert_eq!(m.max, 1.2);
        assert_eq!(m.median, 0.7);
    }
}
