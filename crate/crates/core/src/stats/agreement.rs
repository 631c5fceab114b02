use std::collections::BTreeMap;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters_per_item: u64,
    pub category_count: usize,
}

/// Fleiss' kappa over an items × categories matrix of rater counts.
pub fn fleiss_kappa(ratings: &[Vec<u64>]) -> Result<KappaResult, StatsError> {
    let first = ratings
        .first()
        .ok_or_else(|| StatsError::InsufficientData("no items".into()))?;
    let k = first.len();
    let n: u64 = first.iter().sum();
    for row in ratings {
        if row.len() != k {
            return Err(StatsError::InvalidInput("rows have different category counts".into()));
        }
        let total: u64 = row.iter().sum();
        if total != n {
            return Err(StatsError::UnequalRaterCounts(n, total));
        }
    }
    if n < 2 {
        return Err(StatsError::InsufficientData("need at least two raters per item".into()));
    }
    let items = ratings.len() as f64;
    let nf = n as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sq - nf) / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let share = ratings.iter().map(|row| row[j]).sum::<u64>() as f64 / (items * nf);
            share * share
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(StatsError::DegenerateAllOneCategory);
    }
    Ok(KappaResult {
        kappa: (p_bar - p_e) / (1.0 - p_e),
        n_items: ratings.len(),
        n_raters_per_item: n,
        category_count: k,
    })
}

/// Share of judgments that picked the most common option, or `None` when
/// there are no judgments.
pub fn agreement_fraction<T: Ord>(choices: &[T]) -> Option<f64> {
    if choices.is_empty() {
        return None;
    }
    let mut counts = BTreeMap::new();
    for c in choices {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    Some(top as f64 / choices.len() as f64)
}
