//! Cross-validation folds: fixed-length contiguous test windows placed at
//! evenly spaced offsets across the day span, each paired with the
//! complementary days as its training set. More windows than fit disjointly
//! simply overlap each other; train and test never overlap within a pair.

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub n_pairs: usize,
    pub test_len: usize,
}

impl Default for FoldConfig {
    /// Eleven pairs of 142 training and 15 test days on a 157-day span.
    fn default() -> Self {
        Self {
            n_pairs: 11,
            test_len: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPair {
    pub train_days: Vec<usize>,
    pub test_days: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub span_days: usize,
    pub pairs: Vec<FoldPair>,
    /// Reserved for hyperparameter work; the remaining pairs are for testing.
    pub tuning_pair_index: usize,
}

impl FoldPlan {
    pub fn test_pairs(&self) -> impl Iterator<Item = (usize, &FoldPair)> {
        self.pairs
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.tuning_pair_index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serialization cannot fail")
    }
}

pub fn make_folds(span_days: usize, cfg: &FoldConfig) -> Result<FoldPlan, PipelineError> {
    if cfg.n_pairs == 0 || cfg.test_len == 0 {
        return Err(PipelineError::SpanTooShort {
            span_days,
            needed: 1,
        });
    }
    if span_days < cfg.test_len + 1 {
        return Err(PipelineError::SpanTooShort {
            span_days,
            needed: cfg.test_len + 1,
        });
    }
    let max_offset = span_days - cfg.test_len;
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    for i in 0..cfg.n_pairs {
        let offset = if cfg.n_pairs == 1 {
            0
        } else {
            ((i as f64) * (max_offset as f64) / ((cfg.n_pairs - 1) as f64)).round() as usize
        };
        let test_days: Vec<usize> = (offset..offset + cfg.test_len).collect();
        let train_days: Vec<usize> = (0..span_days)
            .filter(|d| *d < offset || *d >= offset + cfg.test_len)
            .collect();
        pairs.push(FoldPair {
            train_days,
            test_days,
        });
    }
    Ok(FoldPlan {
        span_days,
        pairs,
        tuning_pair_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn default_protocol_gives_eleven_pairs_of_142_and_15() {
        let plan = make_folds(157, &FoldConfig::default()).unwrap();
        assert_eq!(plan.pairs.len(), 11);
        assert_eq!(plan.test_pairs().count(), 10);
        for pair in &plan.pairs {
            assert_eq!(pair.test_days.len(), 15);
            assert_eq!(pair.train_days.len(), 142);
            let train: HashSet<_> = pair.train_days.iter().collect();
            assert!(pair.test_days.iter().all(|d| !train.contains(d)));
        }
        // First and last windows pin the span ends.
        assert_eq!(plan.pairs[0].test_days[0], 0);
        assert_eq!(*plan.pairs[10].test_days.last().unwrap(), 156);
    }

    #[test]
    fn two_pair_small_case_is_disjoint_halves() {
        let plan = make_folds(
            30,
            &FoldConfig {
                n_pairs: 2,
                test_len: 15,
            },
        )
        .unwrap();
        assert_eq!(plan.pairs[0].test_days, (0..15).collect::<Vec<_>>());
        assert_eq!(plan.pairs[1].test_days, (15..30).collect::<Vec<_>>());
        assert_eq!(plan.pairs[0].train_days, (15..30).collect::<Vec<_>>());
        assert_eq!(plan.pairs[1].train_days, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn windows_cover_every_day_when_they_must_overlap() {
        let cfg = FoldConfig::default();
        let plan = make_folds(157, &cfg).unwrap();
        let mut covered = [false; 157];
        for pair in &plan.pairs {
            for &d in &pair.test_days {
                covered[d] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "11 x 15 >= 157 must cover all");
    }

    #[test]
    fn short_spans_are_rejected() {
        assert!(matches!(
            make_folds(15, &FoldConfig { n_pairs: 2, test_len: 15 }),
            Err(PipelineError::SpanTooShort { .. })
        ));
        assert!(make_folds(16, &FoldConfig { n_pairs: 2, test_len: 15 }).is_ok());
    }
}
