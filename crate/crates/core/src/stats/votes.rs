//! Per-pair vote counts, agreement filtering and the threshold sweep.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dialogue::SocialDimension;

use super::{
    check_mle_exists, fit_bradley_terry, fleiss_kappa, rank_dimensions, BradleyTerryFit,
    Degeneracy, KappaResult, PairwiseTally, Ranking, StatsError,
};

/// Absorbs rounding when comparing an agreement fraction with a threshold.
const THRESHOLD_EPS: f64 = 1e-12;

/// Judgments on one argument pair, reduced to a count per side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVotes {
    pub pair_id: String,
    pub first: SocialDimension,
    pub second: SocialDimension,
    pub first_votes: u64,
    pub second_votes: u64,
}

impl PairVotes {
    pub fn total(&self) -> u64 {
        self.first_votes + self.second_votes
    }

    pub fn agreement(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.first_votes.max(self.second_votes) as f64 / total as f64)
    }

    pub fn meets(&self, threshold: f64) -> bool {
        self.agreement()
            .is_some_and(|a| a + THRESHOLD_EPS >= threshold)
    }
}

/// 0.50, 0.55, ..., 0.90.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..9).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

pub fn retained_pairs(votes: &[PairVotes], threshold: f64) -> Vec<&PairVotes> {
    votes.iter().filter(|v| v.meets(threshold)).collect()
}

/// Every dimension mentioned by any pair, in canonical order.
pub fn entities_of(votes: &[PairVotes]) -> Vec<SocialDimension> {
    let set: BTreeSet<_> = votes.iter().flat_map(|v| [v.first, v.second]).collect();
    set.into_iter().collect()
}

/// Tally over the pairs meeting `threshold`; every vote on a kept pair is
/// one win for the chosen side.
pub fn tally_from_votes(
    entities: Vec<SocialDimension>,
    votes: &[PairVotes],
    threshold: f64,
) -> Result<PairwiseTally, StatsError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(StatsError::InvalidInput(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut tally = PairwiseTally::new(entities)?;
    for v in retained_pairs(votes, threshold) {
        if v.first == v.second {
            return Err(StatsError::InvalidInput(format!(
                "pair `{}` compares `{}` with itself",
                v.pair_id, v.first
            )));
        }
        tally.add(v.first, v.second, v.first_votes)?;
        tally.add(v.second, v.first, v.second_votes)?;
    }
    Ok(tally)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub retained_pairs: usize,
    pub outcome: Result<(BradleyTerryFit, Ranking), Degeneracy>,
}

/// Refits and re-ranks at each threshold. The entity set is fixed to every
/// dimension seen in `votes`, so a dimension filtered out entirely shows up
/// as a degenerate point.
pub fn sensitivity_sweep(
    votes: &[PairVotes],
    thresholds: &[f64],
    tolerance: f64,
    max_iter: usize,
) -> Result<Vec<SweepPoint>, StatsError> {
    let entities = entities_of(votes);
    thresholds
        .iter()
        .map(|&threshold| {
            let tally = tally_from_votes(entities.clone(), votes, threshold)?;
            let outcome = match check_mle_exists(&tally) {
                Err(d) => Err(d),
                Ok(()) => {
                    let fit = fit_bradley_terry(&tally, tolerance, max_iter)?;
                    let ranking = rank_dimensions(&fit);
                    Ok((fit, ranking))
                }
            };
            Ok(SweepPoint {
                threshold,
                retained_pairs: retained_pairs(votes, threshold).len(),
                outcome,
            })
        })
        .collect()
}

/// Fleiss kappa with the two sides of each pair as categories. Fleiss needs
/// one rater count for every item, so only pairs with the most common
/// count are used; the number of dropped pairs is returned alongside.
pub fn kappa_from_votes(votes: &[PairVotes]) -> Result<(KappaResult, usize), StatsError> {
    let mut freq = std::collections::BTreeMap::new();
    for v in votes.iter().filter(|v| v.total() >= 2) {
        *freq.entry(v.total()).or_insert(0usize) += 1;
    }
    // most frequent count, larger count on ties
    let n = freq
        .iter()
        .max_by_key(|(n, c)| (**c, **n))
        .map(|(n, _)| *n)
        .ok_or_else(|| StatsError::InsufficientData("no pair has two or more judgments".into()))?;
    let rows: Vec<Vec<u64>> = votes
        .iter()
        .filter(|v| v.total() == n)
        .map(|v| vec![v.first_votes, v.second_votes])
        .collect();
    let dropped = votes.len() - rows.len();
    Ok((fleiss_kappa(&rows)?, dropped))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::stats::{DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
    use proptest::prelude::*;
    use SocialDimension::*;

    pub(crate) fn pv(id: &str, a: SocialDimension, b: SocialDimension, x: u64, y: u64) -> PairVotes {
        PairVotes {
            pair_id: id.into(),
            first: a,
            second: b,
            first_votes: x,
            second_votes: y,
        }
    }

    /// Knowledge, Trust and Fun beat each other in a cycle at 90% agreement;
    /// Conflict only appears in pairs at 85% agreement.
    pub(crate) fn sweep_fixture() -> Vec<PairVotes> {
        vec![
            pv("p1", Knowledge, Trust, 18, 2),
            pv("p2", Trust, Fun, 18, 2),
            pv("p3", Fun, Knowledge, 18, 2),
            pv("p4", Conflict, Knowledge, 17, 3),
            pv("p5", Trust, Conflict, 17, 3),
        ]
    }

    #[test]
    fn grid_has_nine_points() {
        let g = default_threshold_grid();
        assert_eq!(g.len(), 9);
        for (k, t) in g.iter().enumerate() {
            assert!((t - (0.5 + 0.05 * k as f64)).abs() < 1e-12);
        }
        assert_eq!(g[0], 0.5);
        assert_eq!(g[8], 0.9);
    }

    #[test]
    fn hand_tally() {
        let votes = vec![
            pv("a", Knowledge, Trust, 10, 0),
            pv("b", Trust, Knowledge, 1, 9),
            pv("c", Knowledge, Trust, 7, 3),
        ];
        let t = tally_from_votes(vec![Knowledge, Trust], &votes, 0.8).unwrap();
        assert_eq!(t.wins(0, 1), 19);
        assert_eq!(t.wins(1, 0), 1);
        let all = tally_from_votes(vec![Knowledge, Trust], &votes, 0.0).unwrap();
        assert_eq!(all.total_comparisons(), 30);
    }

    #[test]
    fn sweep_marks_degenerate_threshold() {
        let points = sensitivity_sweep(
            &sweep_fixture(),
            &default_threshold_grid(),
            DEFAULT_TOLERANCE,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_eq!(points.len(), 9);
        for p in &points[..8] {
            assert!(p.outcome.is_ok(), "threshold {}", p.threshold);
            assert_eq!(p.retained_pairs, 5);
        }
        assert_eq!(points[8].outcome, Err(Degeneracy::Unrepresented(Conflict)));
    }

    #[test]
    fn zero_threshold_equals_unfiltered_fit() {
        let votes = sweep_fixture();
        let p = &sensitivity_sweep(&votes, &[0.0], DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap()[0];
        let mut tally = PairwiseTally::new(entities_of(&votes)).unwrap();
        for v in &votes {
            tally.add(v.first, v.second, v.first_votes).unwrap();
            tally.add(v.second, v.first, v.second_votes).unwrap();
        }
        let direct = rank_dimensions(&fit_bradley_terry(&tally, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap());
        assert_eq!(p.outcome.as_ref().unwrap().1, direct);
    }

    #[test]
    fn kappa_keeps_modal_count() {
        let votes = vec![
            pv("a", Knowledge, Trust, 3, 0),
            pv("b", Knowledge, Trust, 0, 3),
            pv("c", Knowledge, Trust, 2, 1),
            pv("d", Knowledge, Trust, 1, 1),
        ];
        let (k, dropped) = kappa_from_votes(&votes).unwrap();
        assert_eq!(dropped, 1);
        assert!((k.kappa - 0.55).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn retained_set_matches_brute_force(
            counts in prop::collection::vec((0u64..12, 0u64..12), 1..30),
            t in 0.0f64..=1.0,
        ) {
            let votes: Vec<PairVotes> = counts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| pv(&format!("p{i}"), Knowledge, Trust, x, y))
                .collect();
            let kept: BTreeSet<&str> = retained_pairs(&votes, t).iter().map(|v| v.pair_id.as_str()).collect();
            let brute: BTreeSet<&str> = votes
                .iter()
                .filter(|v| {
                    let n = v.first_votes + v.second_votes;
                    n > 0 && (v.first_votes.max(v.second_votes) as f64 / n as f64) >= t - 1e-12
                })
                .map(|v| v.pair_id.as_str())
                .collect();
            prop_assert_eq!(kept, brute);
        }
    }
}
