use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::SocialDimension;

use super::{welch_t_test, StatsError, WelchResult};

/// How classifier scores are normalized for argument length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthDiscount {
    /// `raw / ln(1 + words)`
    #[default]
    Log1pWords,
    /// `raw / words`
    PerWord,
    /// No discount.
    None,
}

impl LengthDiscount {
    pub const ALL: [LengthDiscount; 3] =
        [LengthDiscount::Log1pWords, LengthDiscount::PerWord, LengthDiscount::None];

    pub fn as_str(self) -> &'static str {
        match self {
            LengthDiscount::Log1pWords => "log1p_words",
            LengthDiscount::PerWord => "per_word",
            LengthDiscount::None => "none",
        }
    }

    pub fn apply(self, raw: f64, word_count: u64) -> Result<f64, StatsError> {
        if word_count == 0 {
            return Err(StatsError::InvalidInput("word_count must be at least 1".into()));
        }
        let w = word_count as f64;
        Ok(match self {
            LengthDiscount::Log1pWords => raw / w.ln_1p(),
            LengthDiscount::PerWord => raw / w,
            LengthDiscount::None => raw,
        })
    }
}

impl fmt::Display for LengthDiscount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LengthDiscount {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LengthDiscount::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| StatsError::InvalidInput(format!("unknown length discount `{s}`")))
    }
}

/// One classifier score. `dimension` is the dimension the score measures;
/// `source` is the strategy of the agent that wrote the argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub argument_id: String,
    pub dimension: SocialDimension,
    pub source: SocialDimension,
    pub score: f64,
    pub word_count: u64,
    pub discounted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionScoreSet {
    pub discount: LengthDiscount,
    pub records: Vec<ScoreRecord>,
}

impl DimensionScoreSet {
    pub fn new(discount: LengthDiscount) -> Self {
        DimensionScoreSet {
            discount,
            records: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        argument_id: String,
        dimension: SocialDimension,
        source: SocialDimension,
        score: f64,
        word_count: u64,
    ) -> Result<(), StatsError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(StatsError::InvalidInput(format!(
                "score {score} for `{argument_id}` is outside [0, 1]"
            )));
        }
        let discounted = self.discount.apply(score, word_count)?;
        self.records.push(ScoreRecord {
            argument_id,
            dimension,
            source,
            score,
            word_count,
            discounted,
        });
        Ok(())
    }

    fn discounted_where(&self, dimension: SocialDimension, source: SocialDimension) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.dimension == dimension && r.source == source)
            .map(|r| r.discounted)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTest {
    pub dimension: SocialDimension,
    pub n_dimension: usize,
    pub n_baseline: usize,
    pub mean_dimension: Option<f64>,
    pub mean_baseline: Option<f64>,
    pub result: Result<WelchResult, StatsError>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// For each non-baseline source dimension `d`: do arguments written with
/// strategy `d` score higher on `d` than baseline arguments do?
pub fn validate_dimension_expression(set: &DimensionScoreSet) -> Vec<DimensionTest> {
    let sources: BTreeSet<SocialDimension> = set
        .records
        .iter()
        .map(|r| r.source)
        .filter(|s| !s.is_baseline())
        .collect();
    sources
        .into_iter()
        .map(|d| {
            let own = set.discounted_where(d, d);
            let base = set.discounted_where(d, SocialDimension::Baseline);
            DimensionTest {
                dimension: d,
                n_dimension: own.len(),
                n_baseline: base.len(),
                mean_dimension: mean(&own),
                mean_baseline: mean(&base),
                result: welch_t_test(&own, &base),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SocialDimension::*;

    #[test]
    fn default_discount_examples() {
        let d = LengthDiscount::default();
        assert!((d.apply(0.5, 1).unwrap() - 0.5 / 2f64.ln()).abs() < 1e-15);
        assert!((d.apply(0.5, 1).unwrap() - 0.7213).abs() < 1e-4);
        assert_eq!(d.apply(0.0, 500).unwrap(), 0.0);
        assert!(d.apply(0.5, 0).is_err());
        assert_eq!("per_word".parse::<LengthDiscount>().unwrap(), LengthDiscount::PerWord);
    }

    #[test]
    fn out_of_range_scores_rejected() {
        let mut s = DimensionScoreSet::new(LengthDiscount::default());
        assert!(s.push("a".into(), Trust, Trust, 1.2, 10).is_err());
        assert!(s.push("a".into(), Trust, Trust, 0.2, 0).is_err());
    }

    #[test]
    fn expression_test_compares_against_baseline_on_same_dimension() {
        let mut s = DimensionScoreSet::new(LengthDiscount::None);
        for (i, v) in [0.8, 0.9, 0.85, 0.95].into_iter().enumerate() {
            s.push(format!("t{i}"), Trust, Trust, v, 10).unwrap();
        }
        for (i, v) in [0.2, 0.3, 0.25, 0.1].into_iter().enumerate() {
            s.push(format!("b{i}"), Trust, Baseline, v, 10).unwrap();
            // scored on another dimension, must be ignored
            s.push(format!("b{i}"), Fun, Baseline, 0.99, 10).unwrap();
        }
        let tests = validate_dimension_expression(&s);
        assert_eq!(tests.len(), 1);
        let t = &tests[0];
        assert_eq!((t.dimension, t.n_dimension, t.n_baseline), (Trust, 4, 4));
        let r = t.result.as_ref().unwrap();
        assert!(r.t > 0.0 && r.p_two_sided < 0.01);
    }

    proptest! {
        #[test]
        fn longer_arguments_score_lower(raw in 0.001f64..=1.0, w in 1u64..10_000) {
            for d in [LengthDiscount::Log1pWords, LengthDiscount::PerWord] {
                prop_assert!(d.apply(raw, w + 1).unwrap() < d.apply(raw, w).unwrap());
            }
        }
    }
}
