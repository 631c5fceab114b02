use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::seed::{derive_seed, opaque_token};
use crate::stats::{PairwiseTally, StatsError};

use super::{
    export_tally, gate_workers, render_argument_png, AnnotationError, Choice, DisplayOrder,
    GateOutcome, GatingPolicy, JudgmentRecord, RenderOptions, TaskSet,
};

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServiceConfig {
    pub gating: GatingPolicy,
    pub render: RenderOptions,
}

/// What a worker is shown. Carries no dimension or control information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskView {
    pub pair_id: String,
    pub left_image_ref: String,
    pub right_image_ref: String,
    pub completed: usize,
    pub required: usize,
}

#[derive(Default)]
struct WorkerState {
    served: BTreeMap<usize, DisplayOrder>,
    judged: BTreeSet<usize>,
    pending: Option<usize>,
}

struct State {
    workers: BTreeMap<String, WorkerState>,
    judged: Vec<u32>,
    in_flight: Vec<u32>,
    serves: Vec<u64>,
    judgments: Vec<JudgmentRecord>,
    registrations: u64,
    log: Option<Box<dyn Write + Send>>,
}

/// In-memory annotation service. All mutation goes through one lock, so
/// serving and recording are linearizable.
pub struct AnnotationService {
    tasks: TaskSet,
    config: ServiceConfig,
    clock: Clock,
    pair_index: HashMap<String, usize>,
    image_ids: HashMap<String, String>,
    images: Mutex<HashMap<String, Arc<Vec<u8>>>>,
    state: Mutex<State>,
}

fn image_token(seed: u64, argument_id: &str) -> String {
    opaque_token(seed, &format!("image:{argument_id}"), 20)
}

impl AnnotationService {
    pub fn new(tasks: TaskSet, config: ServiceConfig) -> Result<Self, AnnotationError> {
        tasks.validate()?;
        let n = tasks.pairs.len();
        let pair_index = tasks.pairs.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
        let image_ids = tasks
            .pairs
            .iter()
            .flat_map(|p| [&p.left, &p.right])
            .map(|id| (image_token(tasks.seed, id), id.clone()))
            .collect();
        Ok(AnnotationService {
            tasks,
            config,
            clock: system_clock(),
            pair_index,
            image_ids,
            images: Mutex::new(HashMap::new()),
            state: Mutex::new(State {
                workers: BTreeMap::new(),
                judged: vec![0; n],
                in_flight: vec![0; n],
                serves: vec![0; n],
                judgments: Vec::new(),
                registrations: 0,
                log: None,
            }),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Every recorded judgment is also appended to `log` as a CSV row.
    pub fn with_log(self, log: Box<dyn Write + Send>) -> Self {
        self.lock().log = Some(log);
        self
    }

    /// Replays judgments from an earlier session.
    pub fn restore(&self, judgments: &[JudgmentRecord]) -> Result<(), AnnotationError> {
        let mut st = self.lock();
        for j in judgments {
            let idx = self.index(&j.pair)?;
            let w = st.workers.entry(j.worker.clone()).or_default();
            if !w.judged.insert(idx) {
                return Err(AnnotationError::DuplicateJudgment {
                    worker: j.worker.clone(),
                    pair: j.pair.clone(),
                });
            }
            w.served.insert(idx, j.order);
            st.judged[idx] += 1;
            st.serves[idx] += 1;
            st.judgments.push(j.clone());
        }
        Ok(())
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn index(&self, pair_id: &str) -> Result<usize, AnnotationError> {
        self.pair_index
            .get(pair_id)
            .copied()
            .ok_or_else(|| AnnotationError::UnknownPair(pair_id.to_string()))
    }

    pub fn tasks(&self) -> &TaskSet {
        &self.tasks
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn register_worker(&self) -> String {
        let mut st = self.lock();
        loop {
            st.registrations += 1;
            let id = format!("w-{}", opaque_token(self.tasks.seed, &format!("worker:{}", st.registrations), 10));
            if !st.workers.contains_key(&id) {
                st.workers.insert(id.clone(), WorkerState::default());
                return id;
            }
        }
    }

    fn view(&self, idx: usize, order: DisplayOrder, completed: usize) -> TaskView {
        let p = &self.tasks.pairs[idx];
        let (l, r) = match order {
            DisplayOrder::Original => (&p.left, &p.right),
            DisplayOrder::Swapped => (&p.right, &p.left),
        };
        TaskView {
            pair_id: p.id.clone(),
            left_image_ref: format!("/images/{}.png", image_token(self.tasks.seed, l)),
            right_image_ref: format!("/images/{}.png", image_token(self.tasks.seed, r)),
            completed,
            required: self.config.gating.min_pairs,
        }
    }

    /// The next pair for `worker`, or `None` when nothing is left for them.
    ///
    /// An unanswered pair is served again unchanged. Otherwise the pick is
    /// the pair with the fewest recorded judgments, then the fewest
    /// outstanding serves, then a per-worker hash so concurrent workers
    /// spread over the task set.
    pub fn next_pair(&self, worker: &str) -> Result<Option<TaskView>, AnnotationError> {
        let mut guard = self.lock();
        let st = &mut *guard;
        let w = st
            .workers
            .get_mut(worker)
            .ok_or_else(|| AnnotationError::UnknownWorker(worker.to_string()))?;
        let completed = w.judged.len();
        if let Some(idx) = w.pending {
            if st.judged[idx] < self.tasks.pairs[idx].target_redundancy {
                return Ok(Some(self.view(idx, w.served[&idx], completed)));
            }
            w.pending = None;
            st.in_flight[idx] -= 1;
        }
        let pick = (0..self.tasks.pairs.len())
            .filter(|&i| !w.served.contains_key(&i) && st.judged[i] < self.tasks.pairs[i].target_redundancy)
            .min_by_key(|&i| {
                (
                    st.judged[i],
                    st.judged[i] + st.in_flight[i],
                    derive_seed(self.tasks.seed, &["order", worker], i as u64),
                )
            });
        let Some(idx) = pick else { return Ok(None) };
        let swap = derive_seed(self.tasks.pairs[idx].placement_seed, &["serve"], st.serves[idx]) & 1 == 1;
        let order = if swap { DisplayOrder::Swapped } else { DisplayOrder::Original };
        st.serves[idx] += 1;
        st.in_flight[idx] += 1;
        w.served.insert(idx, order);
        w.pending = Some(idx);
        Ok(Some(self.view(idx, order, completed)))
    }

    pub fn record_judgment(
        &self,
        worker: &str,
        pair_id: &str,
        choice: Choice,
    ) -> Result<JudgmentRecord, AnnotationError> {
        let idx = self.index(pair_id)?;
        let mut guard = self.lock();
        let st = &mut *guard;
        let w = st
            .workers
            .get_mut(worker)
            .ok_or_else(|| AnnotationError::UnknownWorker(worker.to_string()))?;
        if w.judged.contains(&idx) {
            return Err(AnnotationError::DuplicateJudgment {
                worker: worker.to_string(),
                pair: pair_id.to_string(),
            });
        }
        let Some(&order) = w.served.get(&idx) else {
            return Err(AnnotationError::UnservedPair {
                worker: worker.to_string(),
                pair: pair_id.to_string(),
            });
        };
        let was_pending = w.pending == Some(idx);
        let task = &self.tasks.pairs[idx];
        if st.judged[idx] >= task.target_redundancy {
            if was_pending {
                w.pending = None;
                st.in_flight[idx] -= 1;
            }
            return Err(AnnotationError::RedundancyReached(pair_id.to_string()));
        }
        let record = JudgmentRecord {
            worker: worker.to_string(),
            pair: pair_id.to_string(),
            choice,
            order,
            timestamp: (self.clock)(),
            is_control: task.is_control,
        };
        if let Some(log) = st.log.as_mut() {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            out.serialize(&record)
                .map_err(|e| AnnotationError::Io(format!("judgment log: {e}")))?;
            let line = out.into_inner().map_err(|e| AnnotationError::Io(e.to_string()))?;
            log.write_all(&line)
                .and_then(|_| log.flush())
                .map_err(|e| AnnotationError::Io(format!("judgment log: {e}")))?;
        }
        w.judged.insert(idx);
        if was_pending {
            w.pending = None;
            st.in_flight[idx] -= 1;
        }
        st.judged[idx] += 1;
        st.judgments.push(record.clone());
        Ok(record)
    }

    pub fn judgments(&self) -> Vec<JudgmentRecord> {
        self.lock().judgments.clone()
    }

    pub fn judgment_count(&self, pair_id: &str) -> Result<u32, AnnotationError> {
        let idx = self.index(pair_id)?;
        Ok(self.lock().judged[idx])
    }

    pub fn gate(&self) -> GateOutcome {
        gate_workers(&self.judgments(), &self.config.gating)
    }

    /// Tally over gated judgments, or over all of them when `gated` is false.
    pub fn export_tally(&self, threshold: f64, gated: bool) -> Result<PairwiseTally, StatsError> {
        let judgments = if gated { self.gate().retained } else { self.judgments() };
        export_tally(&judgments, &self.tasks, threshold)
    }

    /// PNG for an image token from a [`TaskView`], rendered on first use.
    pub fn image(&self, token: &str) -> Option<Arc<Vec<u8>>> {
        let id = self.image_ids.get(token)?;
        let mut cache = self.images.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(png) = cache.get(token) {
            return Some(png.clone());
        }
        let text = self.tasks.text_of(id)?;
        let png = Arc::new(render_argument_png(text, &self.config.render));
        cache.insert(token.to_string(), png.clone());
        Some(png)
    }
}
