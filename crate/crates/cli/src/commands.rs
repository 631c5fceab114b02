use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use persuasion_core::annotation::{
    self, arguments_from_transcripts, inject_controls, read_judgments_csv,
    AnnotationService, ControlCorpus, GatingPolicy, JudgmentRecord, SamplingConfig, ServiceConfig,
    TaskSet, JUDGMENTS_HEADER,
};
use persuasion_core::experiment::{
    self, argument_length_stats, estimate_persuasion_partial, mean_relative_change,
    BackendSpec, ExperimentConfig, MockSettings,
};
use persuasion_core::stats::io::{
    read_embeddings_csv, read_labels_csv, read_pairwise_input, read_scores_csv,
    write_probability_matrix_csv, write_strengths_csv, write_sweep_csv, write_tally_csv,
    write_votes_csv, PairwiseInput,
};
use persuasion_core::stats::{
    default_threshold_grid, entities_of, fit_bradley_terry, kappa_from_votes, odds_ratio,
    rank_dimensions, sensitivity_sweep, similarity_to_baseline, tally_from_votes,
    validate_dimension_expression, LengthDiscount, PairVotes, PairwiseTally,
};
use persuasion_core::{SocialDimension, StubbornnessLevel};

use crate::error::{CliError, CliResult};
use crate::{
    BtFitArgs, EstimateArgs, ExportArgs, GatingArgs, JudgmentsIn, OddsArgs, RunArgs,
    SamplePairsArgs, ServeArgs, SimilarityArgs, SweepArgs, TranscriptsIn, TtestArgs,
};

fn output(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn policy(g: GatingArgs) -> CliResult<GatingPolicy> {
    if !(0.0..=1.0).contains(&g.max_control_fail_rate) {
        return Err(CliError::Usage("--max-control-fail-rate must be in [0, 1]".into()));
    }
    Ok(GatingPolicy {
        min_pairs: g.min_pairs,
        max_control_fail_rate: g.max_control_fail_rate,
        ..GatingPolicy::default()
    })
}

fn check_threshold(t: f64) -> CliResult {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("threshold {t} must be in [0, 1]")))
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("no seed given; using {s}");
        s
    })
}

pub fn run(a: RunArgs) -> CliResult {
    let mut config = ExperimentConfig::load(&a.config).map_err(CliError::config)?;
    if a.mock && !matches!(config.backend, BackendSpec::Mock(_)) {
        config.backend = BackendSpec::Mock(MockSettings::default());
    }
    if let Some(dir) = a.output {
        config.output_dir = dir;
    }
    if let Some(n) = a.per_cell {
        config.dialogues_per_cell = n;
    }
    if let Some(p) = a.parallelism {
        config.parallelism = p;
    }
    config.validate().map_err(CliError::config)?;
    config.catalog().map_err(CliError::config)?;
    let seed = seed_or_random(a.seed.or(config.experiment_seed));
    config.experiment_seed = Some(seed);
    let backend = config.backend.build().map_err(CliError::config)?;
    let (run, outputs) =
        experiment::run_to_dir(&config, seed, backend.as_ref()).map_err(CliError::runtime)?;
    let shortfall: u32 = run.cells.iter().map(|c| c.shortfall()).sum();
    eprintln!(
        "seed {seed}: {} transcripts written to {}",
        run.transcripts.len(),
        outputs.transcripts.display()
    );
    if shortfall > 0 {
        eprintln!("{shortfall} dialogues failed; see {}", outputs.cells.display());
    }
    Ok(())
}

fn load_transcripts(path: &Path) -> CliResult<Vec<persuasion_core::DialogueTranscript>> {
    experiment::io::read_transcripts(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn estimate(a: EstimateArgs) -> CliResult {
    let transcripts = load_transcripts(&a.io.transcripts)?;
    let (estimates, empty) = estimate_persuasion_partial(&transcripts);
    for (d, s) in empty {
        eprintln!("cell {d}/{s} has no valid transcripts");
    }
    experiment::io::write_estimates_csv(output(&a.io.out)?, &estimates).map_err(CliError::runtime)?;
    if let Some(path) = a.changes {
        let mut w = csv_writer(create(&path)?);
        write_row(&mut w, ["from", "to", "mean_relative_change", "dimensions"])?;
        use StubbornnessLevel::*;
        for (from, to) in [(Soft, Moderate), (Moderate, Hard), (Soft, Hard)] {
            let (mean, n) = match mean_relative_change(&estimates, from, to) {
                Some((m, n)) => (m.to_string(), n),
                None => (String::new(), 0),
            };
            write_row(&mut w, [from.to_string(), to.to_string(), mean, n.to_string()])?;
        }
        w.flush().map_err(CliError::runtime)?;
    }
    Ok(())
}

pub fn lengths(a: TranscriptsIn) -> CliResult {
    let transcripts = load_transcripts(&a.transcripts)?;
    let rows = argument_length_stats(&transcripts);
    experiment::io::write_lengths_csv(output(&a.out)?, &rows).map_err(CliError::runtime)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn write_row<W: Write, I, T>(w: &mut csv::Writer<W>, row: I) -> CliResult
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(CliError::runtime)
}

/// Judgment-level input: either a judgment log with its task set or
/// already-aggregated pair votes.
enum PairInput {
    Log {
        judgments: Vec<JudgmentRecord>,
        tasks: TaskSet,
    },
    Votes(Vec<PairVotes>),
}

fn default_tasks(judgments: &Path, tasks: &Option<PathBuf>) -> PathBuf {
    tasks.clone().unwrap_or_else(|| {
        judgments
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("tasks.json")
    })
}

fn read_pair_input(judgments: &Path, tasks: &Option<PathBuf>) -> CliResult<PairInput> {
    let mut text = String::new();
    open(judgments)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::config(format!("{}: {e}", judgments.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::config(format!("{}: {e}", judgments.display()));
    if text.trim_start().starts_with("pair_id") {
        return match read_pairwise_input(text.as_bytes()).map_err(|e| bad(&e))? {
            PairwiseInput::Votes(v) => Ok(PairInput::Votes(v)),
            PairwiseInput::Matrix(_) => unreachable!("pair_id header always parses as votes"),
        };
    }
    let log = read_judgments_csv(text.as_bytes()).map_err(|e| bad(&e))?;
    let tasks_path = default_tasks(judgments, tasks);
    let tasks = TaskSet::load(&tasks_path).map_err(CliError::config)?;
    Ok(PairInput::Log { judgments: log, tasks })
}

fn gated_votes(judgments: &[JudgmentRecord], tasks: &TaskSet, policy: &GatingPolicy) -> Vec<PairVotes> {
    let out = annotation::gate_workers(judgments, policy);
    let (kept, dropped) = (out.retained_workers().len(), out.discarded_workers().len());
    tracing::info!(kept, dropped, "worker gating");
    annotation::votes_from_judgments(&out.retained, tasks)
}

pub fn bt_fit(a: BtFitArgs) -> CliResult {
    let policy = policy(a.gating)?;
    if let Some(t) = a.threshold {
        check_threshold(t)?;
    }
    let tally: PairwiseTally = match (&a.tally, &a.judgments) {
        (Some(path), None) => match read_pairwise_input(open(path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        {
            PairwiseInput::Matrix(t) => {
                if a.threshold.is_some() {
                    return Err(CliError::Usage(
                        "--threshold needs per-pair votes; a tally matrix has none".into(),
                    ));
                }
                t
            }
            PairwiseInput::Votes(v) => {
                tally_from_votes(entities_of(&v), &v, a.threshold.unwrap_or(0.0)).map_err(CliError::config)?
            }
        },
        (None, Some(path)) => match read_pair_input(path, &a.tasks)? {
            PairInput::Log { judgments, tasks } => {
                let v = gated_votes(&judgments, &tasks, &policy);
                tally_from_votes(entities_of(&v), &v, a.threshold.unwrap_or(0.0)).map_err(CliError::config)?
            }
            PairInput::Votes(v) => {
                tally_from_votes(entities_of(&v), &v, a.threshold.unwrap_or(0.0)).map_err(CliError::config)?
            }
        },
        _ => return Err(CliError::Usage("give exactly one of --tally or --judgments".into())),
    };
    let fit = fit_bradley_terry(&tally, a.tolerance, a.max_iter).map_err(CliError::runtime)?;
    if !fit.converged {
        eprintln!("warning: no convergence after {} iterations", fit.iterations);
    }
    create_dir(&a.out_dir)?;
    let ranking = rank_dimensions(&fit);
    let strengths = a.out_dir.join("strengths.csv");
    let probabilities = a.out_dir.join("probabilities.csv");
    write_strengths_csv(create(&strengths)?, &ranking).map_err(CliError::runtime)?;
    write_probability_matrix_csv(create(&probabilities)?, &fit).map_err(CliError::runtime)?;
    eprintln!(
        "{} iterations, log-likelihood {:.6}; wrote {} and {}",
        fit.iterations,
        fit.log_likelihood,
        strengths.display(),
        probabilities.display()
    );
    Ok(())
}

pub fn kappa(a: JudgmentsIn) -> CliResult {
    let policy = policy(a.gating)?;
    let scopes: Vec<(&str, Vec<PairVotes>)> = match read_pair_input(&a.judgments, &a.tasks)? {
        PairInput::Log { judgments, tasks } => vec![
            ("all", annotation::votes_from_judgments(&judgments, &tasks)),
            ("gated", gated_votes(&judgments, &tasks, &policy)),
        ],
        PairInput::Votes(v) => vec![("all", v)],
    };
    let mut w = csv_writer(output(&a.out)?);
    write_row(
        &mut w,
        ["scope", "kappa", "n_items", "n_raters_per_item", "category_count", "dropped_pairs", "note"],
    )?;
    for (scope, votes) in scopes {
        match kappa_from_votes(&votes) {
            Ok((k, dropped)) => write_row(
                &mut w,
                [
                    scope.to_string(),
                    k.kappa.to_string(),
                    k.n_items.to_string(),
                    k.n_raters_per_item.to_string(),
                    k.category_count.to_string(),
                    dropped.to_string(),
                    String::new(),
                ],
            )?,
            Err(e) => write_row(&mut w, [scope, "", "", "", "", "", &e.to_string()])?,
        }
    }
    w.flush().map_err(CliError::runtime)
}

pub fn sweep(a: SweepArgs) -> CliResult {
    let policy = policy(a.input.gating)?;
    let thresholds = if a.thresholds.is_empty() {
        default_threshold_grid()
    } else {
        a.thresholds
    };
    for &t in &thresholds {
        check_threshold(t)?;
    }
    let votes = match read_pair_input(&a.input.judgments, &a.input.tasks)? {
        PairInput::Log { judgments, tasks } => gated_votes(&judgments, &tasks, &policy),
        PairInput::Votes(v) => v,
    };
    let points = sensitivity_sweep(
        &votes,
        &thresholds,
        persuasion_core::stats::DEFAULT_TOLERANCE,
        persuasion_core::stats::DEFAULT_MAX_ITER,
    )
    .map_err(CliError::config)?;
    write_sweep_csv(output(&a.input.out)?, &points).map_err(CliError::runtime)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn ttest(a: TtestArgs) -> CliResult {
    let discount: LengthDiscount = a.discount.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let set = read_scores_csv(open(&a.scores)?, discount)
        .map_err(|e| CliError::config(format!("{}: {e}", a.scores.display())))?;
    let mut w = csv_writer(output(&a.out)?);
    write_row(
        &mut w,
        [
            "dimension",
            "n_dimension",
            "n_baseline",
            "mean_dimension",
            "mean_baseline",
            "t",
            "df",
            "p_two_sided",
            "discount",
            "note",
        ],
    )?;
    for t in validate_dimension_expression(&set) {
        let (stat, df, p, note) = match &t.result {
            Ok(r) => (r.t.to_string(), r.df.to_string(), r.p_two_sided.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        write_row(
            &mut w,
            [
                t.dimension.to_string(),
                t.n_dimension.to_string(),
                t.n_baseline.to_string(),
                opt(t.mean_dimension),
                opt(t.mean_baseline),
                stat,
                df,
                p,
                discount.to_string(),
                note,
            ],
        )?;
    }
    w.flush().map_err(CliError::runtime)
}

pub fn similarity(a: SimilarityArgs) -> CliResult {
    let set = read_embeddings_csv(open(&a.embeddings)?)
        .map_err(|e| CliError::config(format!("{}: {e}", a.embeddings.display())))?;
    let labels = read_labels_csv(open(&a.labels)?)
        .map_err(|e| CliError::config(format!("{}: {e}", a.labels.display())))?;
    let rows = similarity_to_baseline(&set, &labels).map_err(CliError::config)?;
    let mut w = csv_writer(output(&a.out)?);
    write_row(&mut w, ["dimension", "mean_cosine_similarity"])?;
    for (d, s) in rows {
        write_row(&mut w, [d.to_string(), s.to_string()])?;
    }
    w.flush().map_err(CliError::runtime)
}

pub fn odds(a: OddsArgs) -> CliResult {
    let r = odds_ratio(a.a, a.b, a.c, a.d).map_err(CliError::config)?;
    println!("odds_ratio,corrected\n{},{}", r.value(), r.corrected);
    Ok(())
}

pub fn sample_pairs(a: SamplePairsArgs) -> CliResult {
    let excluded = a
        .exclude
        .iter()
        .map(|s| s.parse::<SocialDimension>().map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<_>>()?;
    let config = SamplingConfig {
        pairs_per_dimension_pair: a.per_pair,
        excluded,
        target_redundancy: a.redundancy,
        control_fraction: a.control_fraction,
    };
    let corpus = match &a.controls {
        Some(p) => ControlCorpus::load(p).map_err(CliError::config)?,
        None => ControlCorpus::default(),
    };
    let transcripts = load_transcripts(&a.transcripts)?;
    let arguments = arguments_from_transcripts(&transcripts);
    let seed = seed_or_random(a.seed);
    let pairs = sample_pairs_with(&arguments, &config, &corpus, seed)?;
    let used: std::collections::BTreeSet<&str> =
        pairs.iter().flat_map(|p| [p.left.as_str(), p.right.as_str()]).collect();
    let tasks = TaskSet {
        seed,
        arguments: arguments.iter().filter(|x| used.contains(x.id.as_str())).cloned().collect(),
        controls: corpus.controls.iter().filter(|c| used.contains(c.id.as_str())).cloned().collect(),
        pairs,
    };
    tasks.save(&a.out).map_err(CliError::runtime)?;
    let controls = tasks.pairs.iter().filter(|p| p.is_control).count();
    eprintln!(
        "seed {seed}: {} pairs ({} regular, {controls} control) written to {}",
        tasks.pairs.len(),
        tasks.pairs.len() - controls,
        a.out.display()
    );
    Ok(())
}

fn sample_pairs_with(
    arguments: &[annotation::ArgumentRecord],
    config: &SamplingConfig,
    corpus: &ControlCorpus,
    seed: u64,
) -> CliResult<Vec<annotation::PairTask>> {
    let pairs = annotation::sample_pairs(arguments, config, seed).map_err(CliError::config)?;
    inject_controls(pairs, config.control_fraction, &corpus.controls, arguments, seed).map_err(CliError::config)
}

pub fn serve(a: ServeArgs) -> CliResult {
    let tasks = TaskSet::load(&a.tasks).map_err(CliError::config)?;
    let config = ServiceConfig {
        gating: policy(a.gating)?,
        ..ServiceConfig::default()
    };
    let mut service = AnnotationService::new(tasks, config).map_err(CliError::config)?;
    if let Some(path) = &a.log {
        let existing = match fs::read(path) {
            Ok(bytes) if !bytes.is_empty() => Some(
                read_judgments_csv(bytes.as_slice())
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?,
            ),
            _ => None,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        match existing {
            Some(prior) => {
                service.restore(&prior).map_err(CliError::config)?;
                eprintln!("replayed {} judgments from {}", prior.len(), path.display());
            }
            None => writeln!(file, "{JUDGMENTS_HEADER}").map_err(CliError::runtime)?,
        }
        service = service.with_log(Box::new(file));
    }
    let service = Arc::new(service);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.bind)
            .await
            .map_err(|e| CliError::runtime(format!("bind {}: {e}", a.bind)))?;
        let addr = listener.local_addr().map_err(CliError::runtime)?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, annotation::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(CliError::runtime)
    })
}

pub fn export(a: ExportArgs) -> CliResult {
    check_threshold(a.threshold)?;
    let policy = policy(a.gating)?;
    let text = fs::read(&a.judgments).map_err(|e| CliError::config(format!("{}: {e}", a.judgments.display())))?;
    let judgments = read_judgments_csv(text.as_slice())
        .map_err(|e| CliError::config(format!("{}: {e}", a.judgments.display())))?;
    let tasks = TaskSet::load(&default_tasks(&a.judgments, &a.tasks)).map_err(CliError::config)?;
    let gate = annotation::gate_workers(&judgments, &policy);

    create_dir(&a.out_dir)?;
    let mut w = csv_writer(create(&a.out_dir.join("workers.csv"))?);
    for rec in &gate.workers {
        w.serialize(rec).map_err(CliError::runtime)?;
    }
    if gate.workers.is_empty() {
        write_row(
            &mut w,
            ["worker", "pairs_completed", "controls_seen", "controls_failed", "retained", "reward_cents"],
        )?;
    }
    w.flush().map_err(CliError::runtime)?;

    let all = annotation::votes_from_judgments(&judgments, &tasks);
    let kept = annotation::votes_from_judgments(&gate.retained, &tasks);
    write_votes_csv(create(&a.out_dir.join("votes_all.csv"))?, &all).map_err(CliError::runtime)?;
    write_votes_csv(create(&a.out_dir.join("votes.csv"))?, &kept).map_err(CliError::runtime)?;
    let tally = tally_from_votes(entities_of(&kept), &kept, a.threshold).map_err(CliError::config)?;
    write_tally_csv(create(&a.out_dir.join("tally.csv"))?, &tally).map_err(CliError::runtime)?;
    annotation::write_judgments_csv(create(&a.out_dir.join("judgments_retained.csv"))?, &gate.retained)
        .map_err(CliError::runtime)?;

    let controls = |js: &[JudgmentRecord]| js.iter().filter(|j| j.is_control).count();
    eprintln!(
        "{} judgments ({} control) from {} workers; retained {} judgments ({} control) from {} workers; \
         tally at threshold {} holds {} comparisons",
        judgments.len(),
        controls(&judgments),
        gate.workers.len(),
        gate.retained.len(),
        controls(&gate.retained),
        gate.retained_workers().len(),
        a.threshold,
        tally.total_comparisons()
    );
    Ok(())
}
