//! The dimension × stubbornness experiment grid.
//!
//! Every dialogue gets a seed derived from the experiment seed and its
//! (dimension, stubbornness, index) coordinates, so any cell can be re-run on
//! its own and produces the same transcripts. Dialogues run on a worker pool;
//! a single writer persists them in grid order as they complete.

mod estimate;
pub mod io;
mod lengths;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::dialogue::{
    run_dialogue, DialogueError, DialogueSpec, DialogueTranscript, PromptCatalog,
    SocialDimension, StubbornnessLevel,
};
use crate::gateway::{
    BackendConfig, ChatBackend, GatewayError, HttpBackend, MockBackend, MockBehavior, MockCorpus,
};
use crate::seed::derive_seed;

pub use estimate::{
    estimate_persuasion, estimate_persuasion_partial, mean_relative_change, relative_change,
    relative_change_of, wilson_interval, EstimateError, PersuasionEstimate, Z_95,
};
pub use lengths::{argument_length_stats, argument_length_stats_over, LengthRow, Stratum};

pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const LENGTHS_FILE: &str = "lengths.csv";
pub const CELLS_FILE: &str = "cells.csv";
pub const RUN_FILE: &str = "run.json";

/// Mock backend settings as written in an experiment config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSettings {
    /// Alternative corpus file; the bundled corpus is used otherwise.
    pub corpus: Option<PathBuf>,
    /// Per-cell overrides of the corpus's default probabilities.
    pub persuasion_prob: BTreeMap<SocialDimension, BTreeMap<StubbornnessLevel, f64>>,
}

impl MockSettings {
    pub fn behavior(&self) -> Result<MockBehavior, GatewayError> {
        let corpus = match &self.corpus {
            Some(path) => MockCorpus::load(path)?,
            None => MockCorpus::default(),
        };
        let mut behavior = MockBehavior::with_defaults(corpus);
        for (dim, levels) in &self.persuasion_prob {
            for (level, p) in levels {
                behavior.set_probability(*dim, *level, *p)?;
            }
        }
        Ok(behavior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Mock(MockSettings),
    Http(BackendConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Mock(MockSettings::default())
    }
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn ChatBackend>, GatewayError> {
        Ok(match self {
            BackendSpec::Mock(settings) => Box::new(MockBackend::new(settings.behavior()?)),
            BackendSpec::Http(config) => {
                let mut config = config.clone();
                config.apply_env();
                Box::new(HttpBackend::new(config)?)
            }
        })
    }
}

fn default_dimensions() -> Vec<SocialDimension> {
    SocialDimension::ALL.to_vec()
}

fn default_levels() -> Vec<StubbornnessLevel> {
    StubbornnessLevel::ALL.to_vec()
}

fn default_per_cell() -> u32 {
    100
}

fn default_parallelism() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<SocialDimension>,
    #[serde(default = "default_levels")]
    pub stubbornness_levels: Vec<StubbornnessLevel>,
    #[serde(default = "default_per_cell")]
    pub dialogues_per_cell: u32,
    /// Root seed. When absent a random seed is drawn and recorded in `run.json`.
    #[serde(default)]
    pub experiment_seed: Option<u64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub prompt_catalog: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dimensions: default_dimensions(),
            stubbornness_levels: default_levels(),
            dialogues_per_cell: default_per_cell(),
            experiment_seed: None,
            parallelism: default_parallelism(),
            output_dir: default_output_dir(),
            prompt_catalog: None,
            backend: BackendSpec::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Catalog(#[from] crate::dialogue::CatalogError),
    #[error("persisting transcripts: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.dialogues_per_cell == 0 {
            return fail("dialogues_per_cell must be at least 1");
        }
        if self.dimensions.is_empty() {
            return fail("dimensions must not be empty");
        }
        if self.stubbornness_levels.is_empty() {
            return fail("stubbornness_levels must not be empty");
        }
        let unique: HashSet<_> = self.dimensions.iter().collect();
        if unique.len() != self.dimensions.len() {
            return fail("dimensions contain duplicates");
        }
        let unique: HashSet<_> = self.stubbornness_levels.iter().collect();
        if unique.len() != self.stubbornness_levels.len() {
            return fail("stubbornness_levels contain duplicates");
        }
        if self.parallelism == 0 {
            return fail("parallelism must be at least 1");
        }
        if let BackendSpec::Http(c) = &self.backend {
            c.validate()?;
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<PromptCatalog, ExperimentError> {
        Ok(match &self.prompt_catalog {
            Some(path) => PromptCatalog::load(path)?,
            None => PromptCatalog::default(),
        })
    }

    /// Grid cells in run order.
    pub fn cells(&self) -> Vec<(SocialDimension, StubbornnessLevel)> {
        self.dimensions
            .iter()
            .flat_map(|&d| self.stubbornness_levels.iter().map(move |&s| (d, s)))
            .collect()
    }

    /// All dialogues of the grid, in persistence order.
    pub fn dialogue_specs(&self, experiment_seed: u64) -> Vec<DialogueSpec> {
        self.cells()
            .into_iter()
            .flat_map(|(d, s)| {
                (0..self.dialogues_per_cell).map(move |i| dialogue_spec(experiment_seed, d, s, i))
            })
            .collect()
    }
}

/// Parameters of dialogue `index` within a cell.
pub fn dialogue_spec(
    experiment_seed: u64,
    dimension: SocialDimension,
    stubbornness: StubbornnessLevel,
    index: u32,
) -> DialogueSpec {
    DialogueSpec {
        id: format!("{dimension}-{stubbornness}-{index:04}"),
        dimension,
        stubbornness,
        seed: derive_seed(
            experiment_seed,
            &[dimension.as_str(), stubbornness.as_str()],
            u64::from(index),
        ),
    }
}

/// Per-cell bookkeeping, including dialogues lost to backend errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
    pub requested: u32,
    pub completed: u32,
    pub failed: u32,
    pub ambiguous: u32,
}

impl CellSummary {
    pub fn shortfall(&self) -> u32 {
        self.requested - self.completed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub experiment_seed: u64,
    pub transcripts: Vec<DialogueTranscript>,
    pub cells: Vec<CellSummary>,
}

/// Runs every dialogue of the grid.
///
/// `persist` is called once per completed transcript, in grid order, from the
/// calling thread. A backend failure drops only the affected dialogue and is
/// counted in the cell summary; an error from `persist` stops the run.
pub fn run_experiment(
    config: &ExperimentConfig,
    experiment_seed: u64,
    backend: &dyn ChatBackend,
    catalog: &PromptCatalog,
    mut persist: impl FnMut(&DialogueTranscript) -> std::io::Result<()>,
) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    let specs = config.dialogue_specs(experiment_seed);
    let mut cells: BTreeMap<(SocialDimension, StubbornnessLevel), CellSummary> = config
        .cells()
        .into_iter()
        .map(|(d, s)| {
            (
                (d, s),
                CellSummary {
                    dimension: d,
                    stubbornness: s,
                    requested: config.dialogues_per_cell,
                    completed: 0,
                    failed: 0,
                    ambiguous: 0,
                },
            )
        })
        .collect();

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = config.parallelism.min(specs.len()).max(1);
    let (tx, rx) = mpsc::channel::<(usize, Result<DialogueTranscript, DialogueError>)>();

    let mut transcripts = Vec::with_capacity(specs.len());
    let mut persist_error = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (specs, next, stop) = (&specs, &next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(idx) else { break };
                let result = run_dialogue(backend, catalog, spec);
                if tx.send((idx, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // reorder buffer: emit strictly in grid order
        let mut pending = BTreeMap::new();
        let mut expected = 0usize;
        for (idx, result) in rx {
            pending.insert(idx, result);
            while let Some(result) = pending.remove(&expected) {
                let spec = &specs[expected];
                let cell = cells
                    .get_mut(&(spec.dimension, spec.stubbornness))
                    .expect("spec belongs to the grid");
                match result {
                    Ok(t) => {
                        cell.completed += 1;
                        cell.ambiguous += u32::from(!t.outcome.valid);
                        if persist_error.is_none() {
                            if let Err(e) = persist(&t) {
                                persist_error = Some(e);
                                stop.store(true, Ordering::Relaxed);
                            }
                        }
                        transcripts.push(t);
                    }
                    Err(err) => {
                        tracing::warn!(id = %spec.id, error = %err, "dialogue failed");
                        cell.failed += 1;
                    }
                }
                expected += 1;
            }
        }
    });

    if let Some(e) = persist_error {
        return Err(e.into());
    }
    Ok(ExperimentRun {
        experiment_seed,
        transcripts,
        cells: config
            .cells()
            .into_iter()
            .map(|key| cells.remove(&key).expect("cell present"))
            .collect(),
    })
}

/// Files produced by [`run_to_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutputs {
    pub transcripts: PathBuf,
    pub estimates: PathBuf,
    pub lengths: PathBuf,
    pub cells: PathBuf,
    pub run: PathBuf,
}

impl RunOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        RunOutputs {
            transcripts: dir.join(TRANSCRIPTS_FILE),
            estimates: dir.join(ESTIMATES_FILE),
            lengths: dir.join(LENGTHS_FILE),
            cells: dir.join(CELLS_FILE),
            run: dir.join(RUN_FILE),
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    experiment_seed: u64,
    prompt_catalog_version: &'a str,
    config: &'a ExperimentConfig,
}

/// Runs the grid and writes transcripts, estimates, length table, cell
/// summary and the resolved run record into `config.output_dir`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    experiment_seed: u64,
    backend: &dyn ChatBackend,
) -> Result<(ExperimentRun, RunOutputs), ExperimentError> {
    let catalog = config.catalog()?;
    fs::create_dir_all(&config.output_dir)?;
    let outputs = RunOutputs::in_dir(&config.output_dir);

    let record = RunRecord {
        experiment_seed,
        prompt_catalog_version: catalog.version(),
        config,
    };
    fs::write(
        &outputs.run,
        serde_json::to_string_pretty(&record).map_err(std::io::Error::from)? + "\n",
    )?;

    let mut writer = io::TranscriptWriter::create(&outputs.transcripts)?;
    let run = run_experiment(config, experiment_seed, backend, &catalog, |t| writer.append(t))?;
    drop(writer);

    let (estimates, empty) = estimate_persuasion_partial(&run.transcripts);
    for (d, s) in empty {
        tracing::warn!(dimension = %d, stubbornness = %s, "no valid transcripts in cell");
    }
    io::write_estimates_csv(fs::File::create(&outputs.estimates)?, &estimates)?;
    let lengths = argument_length_stats_over(&run.transcripts, config.cells());
    io::write_lengths_csv(fs::File::create(&outputs.lengths)?, &lengths)?;
    io::write_cells_csv(fs::File::create(&outputs.cells)?, &run.cells)?;
    Ok((run, outputs))
}
