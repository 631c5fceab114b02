use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueTranscript, SocialDimension, StubbornnessLevel};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Persuasion probability for one (dimension, stubbornness) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuasionEstimate {
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
    pub n: u64,
    pub k: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Transcripts with an ambiguous stage-5 signal, not counted in `n`.
    #[serde(skip)]
    pub excluded: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("cell ({0}, {1}) has no valid transcripts")]
    EmptyCell(SocialDimension, StubbornnessLevel),
    #[error("baseline persuasion probability is zero; relative change is undefined")]
    DivisionByZero,
}

/// Wilson score interval for `k` successes out of `n` trials.
///
/// The bounds are exactly 0 at `k = 0` and exactly 1 at `k = n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "wilson_interval needs 0 <= k <= n, n > 0");
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if k == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if k == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (low, high)
}

impl PersuasionEstimate {
    pub fn from_counts(
        dimension: SocialDimension,
        stubbornness: StubbornnessLevel,
        k: u64,
        n: u64,
    ) -> Result<Self, EstimateError> {
        if n == 0 {
            return Err(EstimateError::EmptyCell(dimension, stubbornness));
        }
        let (ci_low, ci_high) = wilson_interval(k, n, Z_95);
        Ok(PersuasionEstimate {
            dimension,
            stubbornness,
            n,
            k,
            p_hat: k as f64 / n as f64,
            ci_low,
            ci_high,
            excluded: 0,
        })
    }
}

#[derive(Default)]
struct Counts {
    n: u64,
    k: u64,
    excluded: u64,
}

fn tally_cells(
    transcripts: &[DialogueTranscript],
) -> BTreeMap<(SocialDimension, StubbornnessLevel), Counts> {
    let mut cells: BTreeMap<_, Counts> = BTreeMap::new();
    for t in transcripts {
        let c = cells.entry((t.dimension, t.stubbornness)).or_default();
        if t.outcome.valid {
            c.n += 1;
            c.k += u64::from(t.outcome.changed);
        } else {
            c.excluded += 1;
        }
    }
    cells
}

/// Per-cell p̂ = k/n with Wilson 95% intervals. Ambiguous outcomes reduce n.
///
/// Output is ordered by (dimension, stubbornness), independent of input order.
pub fn estimate_persuasion(
    transcripts: &[DialogueTranscript],
) -> Result<Vec<PersuasionEstimate>, EstimateError> {
    tally_cells(transcripts)
        .into_iter()
        .map(|((d, s), c)| {
            let mut est = PersuasionEstimate::from_counts(d, s, c.k, c.n)?;
            est.excluded = c.excluded;
            Ok(est)
        })
        .collect()
}

/// Like [`estimate_persuasion`], but returns cells without valid transcripts
/// separately instead of failing.
pub fn estimate_persuasion_partial(
    transcripts: &[DialogueTranscript],
) -> (Vec<PersuasionEstimate>, Vec<(SocialDimension, StubbornnessLevel)>) {
    let mut estimates = Vec::new();
    let mut empty = Vec::new();
    for ((d, s), c) in tally_cells(transcripts) {
        match PersuasionEstimate::from_counts(d, s, c.k, c.n) {
            Ok(mut est) => {
                est.excluded = c.excluded;
                estimates.push(est);
            }
            Err(_) => empty.push((d, s)),
        }
    }
    (estimates, empty)
}

/// Relative change (b − a) / a of persuasion probability from `a` to `b`.
pub fn relative_change(
    a: &PersuasionEstimate,
    b: &PersuasionEstimate,
) -> Result<f64, EstimateError> {
    relative_change_of(a.p_hat, b.p_hat)
}

pub fn relative_change_of(a: f64, b: f64) -> Result<f64, EstimateError> {
    if a == 0.0 {
        return Err(EstimateError::DivisionByZero);
    }
    Ok((b - a) / a)
}

/// Unweighted mean over dimensions of the relative change from level `from`
/// to level `to`. Dimensions lacking either cell, or with p̂ = 0 at `from`,
/// are skipped; returns the mean and the number of dimensions used.
pub fn mean_relative_change(
    estimates: &[PersuasionEstimate],
    from: StubbornnessLevel,
    to: StubbornnessLevel,
) -> Option<(f64, usize)> {
    let by_cell: BTreeMap<_, _> = estimates
        .iter()
        .map(|e| ((e.dimension, e.stubbornness), e))
        .collect();
    let changes: Vec<f64> = SocialDimension::ALL
        .iter()
        .filter_map(|&d| {
            let a = by_cell.get(&(d, from))?;
            let b = by_cell.get(&(d, to))?;
            relative_change(a, b).ok()
        })
        .collect();
    if changes.is_empty() {
        None
    } else {
        Some((changes.iter().sum::<f64>() / changes.len() as f64, changes.len()))
    }
}
