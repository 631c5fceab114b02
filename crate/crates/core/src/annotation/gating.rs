use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::stats::{entities_of, tally_from_votes, PairVotes, PairwiseTally, StatsError};

use super::{JudgmentRecord, TaskSet};

pub const JUDGMENTS_HEADER: &str = "worker,pair,choice,order,timestamp,is_control";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatingPolicy {
    pub min_pairs: usize,
    pub max_control_fail_rate: f64,
    pub reward_cents_per_judgment: u64,
}

impl Default for GatingPolicy {
    fn default() -> Self {
        GatingPolicy {
            min_pairs: 10,
            max_control_fail_rate: 0.25,
            reward_cents_per_judgment: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkerRecord {
    pub worker: String,
    pub pairs_completed: usize,
    pub controls_seen: usize,
    pub controls_failed: usize,
    pub retained: bool,
    pub reward_cents: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    /// Sorted by worker id.
    pub workers: Vec<WorkerRecord>,
    /// Judgments of retained workers, sorted by (worker, pair).
    pub retained: Vec<JudgmentRecord>,
}

impl GateOutcome {
    pub fn retained_workers(&self) -> Vec<&str> {
        self.workers.iter().filter(|w| w.retained).map(|w| w.worker.as_str()).collect()
    }

    pub fn discarded_workers(&self) -> Vec<&str> {
        self.workers.iter().filter(|w| !w.retained).map(|w| w.worker.as_str()).collect()
    }
}

/// Drops every judgment of a worker who saw no control pair, failed more
/// than the allowed share of controls, or completed too few pairs.
pub fn gate_workers(judgments: &[JudgmentRecord], policy: &GatingPolicy) -> GateOutcome {
    let mut by_worker: BTreeMap<&str, Vec<&JudgmentRecord>> = BTreeMap::new();
    for j in judgments {
        by_worker.entry(&j.worker).or_default().push(j);
    }
    let mut workers = Vec::new();
    let mut retained = Vec::new();
    for (worker, js) in by_worker {
        let pairs: BTreeSet<&str> = js.iter().map(|j| j.pair.as_str()).collect();
        let seen = js.iter().filter(|j| j.is_control).count();
        let failed = js.iter().filter(|j| j.failed_control()).count();
        let keep = seen > 0
            && failed as f64 / seen as f64 <= policy.max_control_fail_rate
            && pairs.len() >= policy.min_pairs;
        if keep {
            retained.extend(js.iter().map(|j| (*j).clone()));
        }
        workers.push(WorkerRecord {
            worker: worker.to_string(),
            pairs_completed: pairs.len(),
            controls_seen: seen,
            controls_failed: failed,
            retained: keep,
            reward_cents: js.len() as u64 * policy.reward_cents_per_judgment,
        });
    }
    retained.sort_by(|a, b| (&a.worker, &a.pair, a.timestamp).cmp(&(&b.worker, &b.pair, b.timestamp)));
    GateOutcome { workers, retained }
}

/// Vote counts for every non-control pair of `tasks`, in task order, with
/// `first`/`second` being the stored left/right arguments. Control
/// judgments and judgments on unknown pairs are ignored.
pub fn votes_from_judgments(judgments: &[JudgmentRecord], tasks: &TaskSet) -> Vec<PairVotes> {
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for j in judgments.iter().filter(|j| !j.is_control) {
        let c = counts.entry(&j.pair).or_default();
        if j.prefers_stored_left() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    tasks
        .pairs
        .iter()
        .filter(|p| !p.is_control)
        .map(|p| {
            let (first_votes, second_votes) = counts.get(p.id.as_str()).copied().unwrap_or_default();
            PairVotes {
                pair_id: p.id.clone(),
                first: p.dimension_pair[0],
                second: p.dimension_pair[1],
                first_votes,
                second_votes,
            }
        })
        .collect()
}

/// Tally over non-control pairs whose agreement reaches `threshold`. The
/// entity set is every dimension in the task set, so one that loses all
/// its pairs to the filter is still present (with no comparisons).
pub fn export_tally(
    judgments: &[JudgmentRecord],
    tasks: &TaskSet,
    threshold: f64,
) -> Result<PairwiseTally, StatsError> {
    let votes = votes_from_judgments(judgments, tasks);
    tally_from_votes(entities_of(&votes), &votes, threshold)
}

pub fn write_judgments_csv(w: impl Write, judgments: &[JudgmentRecord]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(JUDGMENTS_HEADER.split(','))?;
    for j in judgments {
        out.serialize(j)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_judgments_csv(r: impl Read) -> csv::Result<Vec<JudgmentRecord>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r)
        .deserialize()
        .collect()
}
