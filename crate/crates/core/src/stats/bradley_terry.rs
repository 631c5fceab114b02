//! Bradley-Terry strengths by minorization-maximization.
//!
//! Under the model, entity `i` beats `j` with probability `p_i / (p_i + p_j)`.
//! The MM update
//!
//! ```text
//! p_i <- W_i / sum_{j != i} n_ij / (p_i + p_j)
//! ```
//!
//! (`W_i` total wins of `i`, `n_ij` comparisons between `i` and `j`) never
//! decreases the log-likelihood and converges to the MLE whenever it exists.
//! Strengths are rescaled to geometric mean 1 after each step.

use std::fmt;

use crate::dialogue::SocialDimension;

use super::StatsError;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Relative gap under which two strengths count as tied.
const TIE_TOLERANCE: f64 = 1e-6;

/// Win counts between entities: `wins[i][j]` judgments preferred `i` over `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseTally {
    entities: Vec<SocialDimension>,
    wins: Vec<Vec<u64>>,
}

impl PairwiseTally {
    pub fn new(entities: Vec<SocialDimension>) -> Result<Self, StatsError> {
        for (i, e) in entities.iter().enumerate() {
            if entities[..i].contains(e) {
                return Err(StatsError::DuplicateEntity(*e));
            }
        }
        let n = entities.len();
        Ok(PairwiseTally {
            entities,
            wins: vec![vec![0; n]; n],
        })
    }

    pub fn from_matrix(
        entities: Vec<SocialDimension>,
        wins: Vec<Vec<u64>>,
    ) -> Result<Self, StatsError> {
        let mut tally = PairwiseTally::new(entities)?;
        let n = tally.len();
        if wins.len() != n || wins.iter().any(|row| row.len() != n) {
            return Err(StatsError::InvalidInput(format!("win matrix must be {n}x{n}")));
        }
        if (0..n).any(|i| wins[i][i] != 0) {
            return Err(StatsError::InvalidInput("win matrix diagonal must be zero".into()));
        }
        tally.wins = wins;
        Ok(tally)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[SocialDimension] {
        &self.entities
    }

    pub fn index_of(&self, entity: SocialDimension) -> Option<usize> {
        self.entities.iter().position(|e| *e == entity)
    }

    pub fn add(
        &mut self,
        winner: SocialDimension,
        loser: SocialDimension,
        count: u64,
    ) -> Result<(), StatsError> {
        let w = self.index_of(winner).ok_or(StatsError::UnknownEntity(winner))?;
        let l = self.index_of(loser).ok_or(StatsError::UnknownEntity(loser))?;
        if w == l {
            return Err(StatsError::InvalidInput(format!("`{winner}` cannot beat itself")));
        }
        self.wins[w][l] += count;
        Ok(())
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j]
    }

    pub fn matrix(&self) -> &[Vec<u64>] {
        &self.wins
    }

    pub fn total_wins(&self, i: usize) -> u64 {
        self.wins[i].iter().sum()
    }

    pub fn total_losses(&self, i: usize) -> u64 {
        self.wins.iter().map(|row| row[i]).sum()
    }

    pub fn total_comparisons(&self) -> u64 {
        self.wins.iter().flatten().sum()
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        PairwiseTally {
            entities: self.entities.clone(),
            wins: self
                .wins
                .iter()
                .map(|row| row.iter().map(|w| w * factor).collect())
                .collect(),
        }
    }
}

/// Why a tally has no finite maximum-likelihood estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    TooFewEntities,
    /// The entity took part in no comparison at all.
    Unrepresented(SocialDimension),
    /// The entity never lost; its strength diverges to infinity.
    Undefeated(SocialDimension),
    /// The entity never won; its strength collapses to zero.
    Winless(SocialDimension),
    /// Some group of entities never beats the rest.
    NotStronglyConnected,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degeneracy::TooFewEntities => write!(f, "fewer than two entities"),
            Degeneracy::Unrepresented(e) => write!(f, "`{e}` has no comparisons"),
            Degeneracy::Undefeated(e) => write!(f, "`{e}` never lost"),
            Degeneracy::Winless(e) => write!(f, "`{e}` never won"),
            Degeneracy::NotStronglyConnected => {
                write!(f, "comparison graph is not strongly connected")
            }
        }
    }
}

fn reachable_from_first(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for (v, s) in seen.iter_mut().enumerate() {
            if !*s && edge(u, v) {
                *s = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Checks that the MLE exists: for every split of the entities into two
/// groups, each group has beaten the other at least once. Equivalently, the
/// directed "i beat j" graph is strongly connected.
pub fn check_mle_exists(tally: &PairwiseTally) -> Result<(), Degeneracy> {
    let n = tally.len();
    if n < 2 {
        return Err(Degeneracy::TooFewEntities);
    }
    for (i, &e) in tally.entities.iter().enumerate() {
        let (won, lost) = (tally.total_wins(i), tally.total_losses(i));
        if won == 0 && lost == 0 {
            return Err(Degeneracy::Unrepresented(e));
        }
    }
    for (i, &e) in tally.entities.iter().enumerate() {
        if tally.total_losses(i) == 0 {
            return Err(Degeneracy::Undefeated(e));
        }
        if tally.total_wins(i) == 0 {
            return Err(Degeneracy::Winless(e));
        }
    }
    let forward = reachable_from_first(n, |u, v| tally.wins[u][v] > 0);
    let backward = reachable_from_first(n, |u, v| tally.wins[v][u] > 0);
    if forward && backward {
        Ok(())
    } else {
        Err(Degeneracy::NotStronglyConnected)
    }
}

fn normalize_geometric(strengths: &mut [f64]) {
    let mean_log = strengths.iter().map(|p| p.ln()).sum::<f64>() / strengths.len() as f64;
    let scale = mean_log.exp();
    for p in strengths.iter_mut() {
        *p /= scale;
    }
}

/// `sum_{i != j} wins[i][j] * ln(p_i / (p_i + p_j))`.
pub fn log_likelihood(tally: &PairwiseTally, strengths: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..tally.len() {
        for j in 0..tally.len() {
            let w = tally.wins[i][j];
            if w > 0 {
                ll += w as f64 * (strengths[i] / (strengths[i] + strengths[j])).ln();
            }
        }
    }
    ll
}

/// Successive MM iterates, starting from all-ones. Each item is the
/// normalized strength vector after one more update.
pub struct MmIterator<'a> {
    tally: &'a PairwiseTally,
    strengths: Vec<f64>,
    wins: Vec<f64>,
}

impl<'a> MmIterator<'a> {
    pub fn new(tally: &'a PairwiseTally) -> Self {
        MmIterator {
            tally,
            strengths: vec![1.0; tally.len()],
            wins: (0..tally.len()).map(|i| tally.total_wins(i) as f64).collect(),
        }
    }
}

impl Iterator for MmIterator<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let n = self.tally.len();
        let p = &self.strengths;
        let mut updated: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let games = (self.tally.wins[i][j] + self.tally.wins[j][i]) as f64;
                        games / (p[i] + p[j])
                    })
                    .sum();
                self.wins[i] / denom
            })
            .collect();
        normalize_geometric(&mut updated);
        self.strengths = updated.clone();
        Some(updated)
    }
}

/// Fitted strengths, normalized to geometric mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BradleyTerryFit {
    entities: Vec<SocialDimension>,
    strengths: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
}

impl BradleyTerryFit {
    /// Wraps externally supplied positive strengths, rescaling them to
    /// geometric mean 1.
    pub fn from_strengths(
        entities: Vec<SocialDimension>,
        mut strengths: Vec<f64>,
    ) -> Result<Self, StatsError> {
        if entities.len() != strengths.len() || entities.is_empty() {
            return Err(StatsError::InvalidInput(
                "one positive strength per entity required".into(),
            ));
        }
        if strengths.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(StatsError::InvalidInput("strengths must be positive".into()));
        }
        PairwiseTally::new(entities.clone())?;
        normalize_geometric(&mut strengths);
        Ok(BradleyTerryFit {
            entities,
            strengths,
            iterations: 0,
            converged: true,
            log_likelihood: f64::NAN,
        })
    }

    pub fn entities(&self) -> &[SocialDimension] {
        &self.entities
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn strength(&self, entity: SocialDimension) -> Option<f64> {
        self.entities
            .iter()
            .position(|e| *e == entity)
            .map(|i| self.strengths[i])
    }

    /// P(i beats j) = p_i / (p_i + p_j).
    pub fn pairwise_prob(
        &self,
        i: SocialDimension,
        j: SocialDimension,
    ) -> Result<f64, StatsError> {
        let pi = self.strength(i).ok_or(StatsError::UnknownEntity(i))?;
        let pj = self.strength(j).ok_or(StatsError::UnknownEntity(j))?;
        if i == j {
            return Err(StatsError::InvalidInput("pairwise_prob needs two distinct entities".into()));
        }
        Ok(pi / (pi + pj))
    }

    /// `matrix[r][c]` = P(row beats column); the diagonal is 0.5.
    pub fn probability_matrix(&self) -> Vec<Vec<f64>> {
        let p = &self.strengths;
        (0..p.len())
            .map(|r| (0..p.len()).map(|c| p[r] / (p[r] + p[c])).collect())
            .collect()
    }
}

/// Maximum-likelihood Bradley-Terry fit.
///
/// Stops when successive normalized strength vectors differ by less than
/// `tolerance` in max-norm, or after `max_iter` updates (`converged = false`).
pub fn fit_bradley_terry(
    tally: &PairwiseTally,
    tolerance: f64,
    max_iter: usize,
) -> Result<BradleyTerryFit, StatsError> {
    check_mle_exists(tally).map_err(StatsError::DegenerateTally)?;
    let mut previous = vec![1.0; tally.len()];
    let mut iterations = 0;
    let mut converged = false;
    for next in MmIterator::new(tally).take(max_iter) {
        iterations += 1;
        let delta = next
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        previous = next;
        if delta < tolerance {
            converged = true;
            break;
        }
    }
    let log_likelihood = log_likelihood(tally, &previous);
    Ok(BradleyTerryFit {
        entities: tally.entities.clone(),
        strengths: previous,
        iterations,
        converged,
        log_likelihood,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntity {
    pub dimension: SocialDimension,
    pub strength: f64,
    /// True when this entity's strength ties a neighbour's.
    pub tied: bool,
}

/// Entities from strongest to weakest.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub entries: Vec<RankedEntity>,
    pub fully_tied: bool,
}

impl Ranking {
    pub fn order(&self) -> Vec<SocialDimension> {
        self.entries.iter().map(|e| e.dimension).collect()
    }

    pub fn has_ties(&self) -> bool {
        self.entries.iter().any(|e| e.tied)
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Sorts by descending strength; ties (relative gap ≤ 1e-6) fall back to
/// the dimension id in lexicographic order and are flagged.
pub fn rank_dimensions(fit: &BradleyTerryFit) -> Ranking {
    let mut entries: Vec<RankedEntity> = fit
        .entities
        .iter()
        .zip(&fit.strengths)
        .map(|(&dimension, &strength)| RankedEntity {
            dimension,
            strength,
            tied: false,
        })
        .collect();
    entries.sort_by(|a, b| {
        if ties(a.strength, b.strength) {
            a.dimension.as_str().cmp(b.dimension.as_str())
        } else {
            b.strength.total_cmp(&a.strength)
        }
    });
    for i in 1..entries.len() {
        if ties(entries[i - 1].strength, entries[i].strength) {
            entries[i - 1].tied = true;
            entries[i].tied = true;
        }
    }
    let fully_tied = entries.len() > 1 && entries.iter().all(|e| e.tied)
        && entries.windows(2).all(|w| ties(w[0].strength, w[1].strength));
    Ranking {
        entries,
        fully_tied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SocialDimension::*;

    fn three() -> PairwiseTally {
        // A=Knowledge, B=Trust, C=Fun: A>B 8/2, B>C 8/2, A>C 9/1
        PairwiseTally::from_matrix(
            vec![Knowledge, Trust, Fun],
            vec![vec![0, 8, 9], vec![2, 0, 8], vec![1, 2, 0]],
        )
        .unwrap()
    }

    /// Brute-force maximizer of the log-likelihood over log-strengths
    /// (x, y, -x-y): exhaustive grid, refined around the best cell.
    fn grid_search(tally: &PairwiseTally) -> Vec<f64> {
        let ll = |x: f64, y: f64| log_likelihood(tally, &[x.exp(), y.exp(), (-x - y).exp()]);
        let (mut cx, mut cy, mut half) = (0.0, 0.0, 4.0);
        for _ in 0..8 {
            let steps = 80;
            let h = 2.0 * half / steps as f64;
            let mut best = (f64::NEG_INFINITY, cx, cy);
            for a in 0..=steps {
                for b in 0..=steps {
                    let x = cx - half + a as f64 * h;
                    let y = cy - half + b as f64 * h;
                    let v = ll(x, y);
                    if v > best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            half = 4.0 * h;
        }
        vec![cx.exp(), cy.exp(), (-cx - cy).exp()]
    }

    #[test]
    fn symmetric_pair_is_even() {
        let t = PairwiseTally::from_matrix(vec![Knowledge, Trust], vec![vec![0, 5], vec![5, 0]])
            .unwrap();
        let fit = fit_bradley_terry(&t, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(fit.converged);
        assert!((fit.strengths()[0] - 1.0).abs() < 1e-12);
        assert!((fit.strengths()[1] - 1.0).abs() < 1e-12);
        assert!((fit.pairwise_prob(Knowledge, Trust).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_entity_fixture_matches_grid_search() {
        let t = three();
        let fit = fit_bradley_terry(&t, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(fit.converged);
        let oracle = grid_search(&t);
        for (got, want) in fit.strengths().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        assert_eq!(rank_dimensions(&fit).order(), vec![Knowledge, Trust, Fun]);
    }

    #[test]
    fn undefeated_entity_is_degenerate() {
        let t = PairwiseTally::from_matrix(vec![Knowledge, Trust], vec![vec![0, 10], vec![0, 0]])
            .unwrap();
        assert_eq!(
            fit_bradley_terry(&t, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER),
            Err(StatsError::DegenerateTally(Degeneracy::Undefeated(Knowledge)))
        );
    }

    #[test]
    fn disconnected_and_unrepresented_tallies() {
        let mut t = PairwiseTally::new(vec![Knowledge, Trust, Fun, Status]).unwrap();
        t.add(Knowledge, Trust, 3).unwrap();
        t.add(Trust, Knowledge, 3).unwrap();
        t.add(Fun, Status, 3).unwrap();
        t.add(Status, Fun, 3).unwrap();
        assert_eq!(check_mle_exists(&t), Err(Degeneracy::NotStronglyConnected));
        // one-way bridge is still not enough
        t.add(Knowledge, Fun, 1).unwrap();
        assert_eq!(check_mle_exists(&t), Err(Degeneracy::NotStronglyConnected));
        t.add(Fun, Trust, 1).unwrap();
        assert_eq!(check_mle_exists(&t), Ok(()));

        let mut t = PairwiseTally::new(vec![Knowledge, Trust, Fun]).unwrap();
        t.add(Knowledge, Trust, 3).unwrap();
        t.add(Trust, Knowledge, 3).unwrap();
        assert_eq!(check_mle_exists(&t), Err(Degeneracy::Unrepresented(Fun)));
    }

    #[test]
    fn pairwise_probability_formula() {
        let fit = BradleyTerryFit::from_strengths(vec![Knowledge, Trust], vec![2.0, 1.0]).unwrap();
        assert!((fit.pairwise_prob(Knowledge, Trust).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            fit.pairwise_prob(Knowledge, Fun),
            Err(StatsError::UnknownEntity(Fun))
        );
    }

    #[test]
    fn ranking_examples() {
        let fit =
            BradleyTerryFit::from_strengths(vec![Knowledge, Trust, Fun], vec![3.0, 1.0, 2.0]).unwrap();
        let r = rank_dimensions(&fit);
        assert_eq!(r.order(), vec![Knowledge, Fun, Trust]);
        assert!(!r.has_ties() && !r.fully_tied);

        let fit =
            BradleyTerryFit::from_strengths(vec![Trust, Fun, Knowledge], vec![1.0, 1.0, 1.0]).unwrap();
        let r = rank_dimensions(&fit);
        assert!(r.fully_tied);
        assert_eq!(r.order(), vec![Fun, Knowledge, Trust]);
    }

    #[test]
    fn duplicate_entities_rejected() {
        assert_eq!(
            PairwiseTally::new(vec![Fun, Fun]),
            Err(StatsError::DuplicateEntity(Fun))
        );
    }

    fn tally_strategy() -> impl Strategy<Value = PairwiseTally> {
        (3usize..6)
            .prop_flat_map(|n| prop::collection::vec(1u64..20, n * n).prop_map(move |v| (n, v)))
            .prop_map(|(n, v)| {
                let entities = SocialDimension::ALL[..n].to_vec();
                let wins = (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 0 } else { v[i * n + j] }).collect())
                    .collect();
                PairwiseTally::from_matrix(entities, wins).unwrap()
            })
    }

    proptest! {
        #[test]
        fn probabilities_are_complementary(s in prop::collection::vec(0.01f64..100.0, 2..6)) {
            let entities = SocialDimension::ALL[..s.len()].to_vec();
            let fit = BradleyTerryFit::from_strengths(entities.clone(), s).unwrap();
            for &i in &entities {
                for &j in &entities {
                    if i != j {
                        let sum = fit.pairwise_prob(i, j).unwrap() + fit.pairwise_prob(j, i).unwrap();
                        prop_assert!((sum - 1.0).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn strengths_are_positive_and_normalized(t in tally_strategy()) {
            let fit = fit_bradley_terry(&t, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
            prop_assert!(fit.converged);
            prop_assert!(fit.strengths().iter().all(|p| *p > 0.0));
            let mean_log: f64 = fit.strengths().iter().map(|p| p.ln()).sum::<f64>();
            prop_assert!(mean_log.abs() < 1e-9);
        }

        #[test]
        fn log_likelihood_never_decreases(t in tally_strategy()) {
            let mut last = log_likelihood(&t, &vec![1.0; t.len()]);
            for p in MmIterator::new(&t).take(50) {
                let ll = log_likelihood(&t, &p);
                prop_assert!(ll >= last - 1e-9, "{} < {}", ll, last);
                last = ll;
            }
        }

        #[test]
        fn scaling_counts_leaves_strengths_unchanged(t in tally_strategy(), k in 2u64..6) {
            let a = fit_bradley_terry(&t, 1e-10, DEFAULT_MAX_ITER).unwrap();
            let b = fit_bradley_terry(&t.scaled(k), 1e-10, DEFAULT_MAX_ITER).unwrap();
            for (x, y) in a.strengths().iter().zip(b.strengths()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn relabeling_permutes_strengths(t in tally_strategy(), rot in 1usize..5) {
            let n = t.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let entities: Vec<_> = perm.iter().map(|&i| t.entities()[i]).collect();
            let wins = perm
                .iter()
                .map(|&i| perm.iter().map(|&j| t.wins(i, j)).collect())
                .collect();
            let permuted = PairwiseTally::from_matrix(entities, wins).unwrap();
            let a = fit_bradley_terry(&t, 1e-10, DEFAULT_MAX_ITER).unwrap();
            let b = fit_bradley_terry(&permuted, 1e-10, DEFAULT_MAX_ITER).unwrap();
            for &e in t.entities() {
                prop_assert!((a.strength(e).unwrap() - b.strength(e).unwrap()).abs() < 1e-6);
            }
        }

        #[test]
        fn ranking_ignores_positive_rescaling(s in prop::collection::vec(0.01f64..100.0, 2..8), c in 0.001f64..1000.0) {
            let entities = SocialDimension::ALL[..s.len()].to_vec();
            let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
            let a = rank_dimensions(&BradleyTerryFit::from_strengths(entities.clone(), s).unwrap());
            let b = rank_dimensions(&BradleyTerryFit::from_strengths(entities, scaled).unwrap());
            prop_assert_eq!(a.order(), b.order());
        }
    }
}
