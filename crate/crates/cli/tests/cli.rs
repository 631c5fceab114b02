use std::path::Path;
use std::process::{Command, Output};

use persuasion_core::annotation::{write_judgments_csv, Choice, DisplayOrder, JudgmentRecord, TaskSet};

fn persuasion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuasion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = persuasion(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn config() -> String {
    format!("{}/../../configs/mock.toml", env!("CARGO_MANIFEST_DIR"))
}

fn run_into(dir: &Path, seed: &str) {
    ok(&[
        "run",
        "--config",
        &config(),
        "--mock",
        "--seed",
        seed,
        "--per-cell",
        "12",
        "--output",
        dir.to_str().unwrap(),
    ]);
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn mock_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), "5");
    for f in ["transcripts.jsonl", "estimates.csv", "lengths.csv", "cells.csv", "run.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let est = lines(&tmp.path().join("estimates.csv"));
    assert_eq!(est[0], "dimension,stubbornness,n,k,p_hat,ci_low,ci_high");
    // ten dimensions by three levels
    assert_eq!(est.len(), 1 + 30);
    assert_eq!(lines(&tmp.path().join("transcripts.jsonl")).len(), 360);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_into(a.path(), "99");
    run_into(b.path(), "99");
    for f in ["transcripts.jsonl", "estimates.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn estimate_matches_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), "5");
    let changes = tmp.path().join("changes.csv");
    let stdout = ok(&[
        "estimate",
        "--transcripts",
        tmp.path().join("transcripts.jsonl").to_str().unwrap(),
        "--changes",
        changes.to_str().unwrap(),
    ]);
    assert_eq!(stdout, std::fs::read_to_string(tmp.path().join("estimates.csv")).unwrap());
    let ch = lines(&changes);
    assert_eq!(ch[0], "from,to,mean_relative_change,dimensions");
    assert!(ch[1].starts_with("soft,moderate,"));
}

#[test]
fn odds_ratio_prints_exact_value() {
    let out = ok(&["odds", "30", "70", "10", "90"]);
    let value: f64 = out.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((value - 27.0 / 7.0).abs() < 1e-12);
    assert!(out.contains(",false"));
    assert!(ok(&["odds", "5", "0", "5", "5"]).contains(",true"));
    // all-zero margin is a config-level failure
    assert_eq!(persuasion(&["odds", "0", "0", "5", "5"]).status.code(), Some(3));
}

#[test]
fn bt_fit_and_sweep_from_tally_and_votes() {
    let tmp = tempfile::tempdir().unwrap();
    let tally = tmp.path().join("tally.csv");
    std::fs::write(&tally, "dimension,knowledge,trust,fun\nknowledge,0,8,9\ntrust,2,0,8\nfun,1,2,0\n").unwrap();
    ok(&["bt-fit", "--tally", tally.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    let strengths = lines(&tmp.path().join("strengths.csv"));
    assert_eq!(strengths[0], "rank,dimension,strength,tied");
    assert!(strengths[1].starts_with("1,knowledge,"));
    assert!(strengths[3].starts_with("3,fun,"));
    let probs = lines(&tmp.path().join("probabilities.csv"));
    assert_eq!(probs.len(), 4);

    // a threshold makes no sense for a pre-aggregated matrix
    let out = persuasion(&["bt-fit", "--tally", tally.to_str().unwrap(), "--threshold", "0.7"]);
    assert_eq!(out.status.code(), Some(2));

    let votes = tmp.path().join("votes.csv");
    std::fs::write(
        &votes,
        "pair_id,first,second,first_votes,second_votes\n\
         a,knowledge,trust,18,2\nb,trust,fun,18,2\nc,fun,knowledge,18,2\n\
         d,conflict,knowledge,17,3\ne,trust,conflict,17,3\n",
    )
    .unwrap();
    let sweep = ok(&["sweep", "--judgments", votes.to_str().unwrap()]);
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "threshold,retained_pairs,status,rank,dimension,strength,detail");
    let degenerate: Vec<_> = rows.iter().filter(|r| r.contains(",degenerate,")).collect();
    assert_eq!(degenerate.len(), 1, "{sweep}");
    assert!(degenerate[0].starts_with("0.90,"));
    let thresholds: std::collections::BTreeSet<_> =
        rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(thresholds.len(), 9);
}

/// Ten careful workers and one who always picks the control argument.
fn judgments_for(tasks: &TaskSet) -> Vec<JudgmentRecord> {
    let mut out = Vec::new();
    for w in 0..11 {
        let worker = format!("w{w:02}");
        for (i, p) in tasks.pairs.iter().enumerate() {
            let choice = if p.is_control {
                if w == 10 { Choice::Right } else { Choice::Left }
            } else if (i + w) % 5 == 0 {
                Choice::Right
            } else {
                Choice::Left
            };
            out.push(JudgmentRecord {
                worker: worker.clone(),
                pair: p.id.clone(),
                choice,
                order: DisplayOrder::Original,
                timestamp: (w * 1000 + i) as u64,
                is_control: p.is_control,
            });
        }
    }
    out
}

#[test]
fn sample_label_export_kappa() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    run_into(&run, "5");
    let tasks_path = tmp.path().join("tasks.json");
    let stdout = ok(&[
        "sample-pairs",
        "--transcripts",
        run.join("transcripts.jsonl").to_str().unwrap(),
        "--out",
        tasks_path.to_str().unwrap(),
        "--per-pair",
        "1",
        "--exclude",
        "power",
        "--seed",
        "3",
    ]);
    let tasks = TaskSet::load(&tasks_path).unwrap();
    let controls = tasks.pairs.iter().filter(|p| p.is_control).count();
    assert_eq!(tasks.pairs.len() - controls, 36, "{stdout}");
    assert_eq!(controls, 4);

    let judgments = tmp.path().join("judgments.csv");
    write_judgments_csv(std::fs::File::create(&judgments).unwrap(), &judgments_for(&tasks)).unwrap();

    let export = tmp.path().join("export");
    ok(&[
        "export",
        "--judgments",
        judgments.to_str().unwrap(),
        "--out-dir",
        export.to_str().unwrap(),
        "--threshold",
        "0.5",
    ]);
    for f in ["workers.csv", "votes_all.csv", "votes.csv", "tally.csv", "judgments_retained.csv"] {
        assert!(export.join(f).exists(), "{f} missing");
    }
    let workers = lines(&export.join("workers.csv"));
    let discarded: Vec<_> = workers.iter().filter(|l| l.contains(",false,")).collect();
    assert_eq!(discarded.len(), 1);
    assert!(discarded[0].starts_with("w10,"));
    let retained = lines(&export.join("judgments_retained.csv"));
    assert_eq!(retained.len(), 1 + 10 * tasks.pairs.len());
    assert!(!retained.iter().any(|l| l.starts_with("w10,")));
    // controls stay out of the vote rows
    assert_eq!(lines(&export.join("votes.csv")).len(), 1 + 36);

    let kappa = ok(&["kappa", "--judgments", judgments.to_str().unwrap()]);
    let rows: Vec<_> = kappa.lines().collect();
    assert_eq!(rows[0], "scope,kappa,n_items,n_raters_per_item,category_count,dropped_pairs,note");
    assert!(rows[1].starts_with("all,") && rows[2].starts_with("gated,"));
    assert!(rows[2].contains(",36,10,2,"), "{kappa}");

    ok(&[
        "bt-fit",
        "--judgments",
        judgments.to_str().unwrap(),
        "--threshold",
        "0.5",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(lines(&tmp.path().join("strengths.csv")).len(), 1 + 9);
}

#[test]
fn exit_codes() {
    assert_eq!(persuasion(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(persuasion(&["odds", "1", "2"]).status.code(), Some(2));
    assert_eq!(
        persuasion(&["run", "--config", "/nonexistent/config.toml", "--mock"]).status.code(),
        Some(3)
    );
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "dialogues_per_cell = \"many\"\n").unwrap();
    assert_eq!(persuasion(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn help_documents_file_formats() {
    let help = ok(&["--help"]);
    for needle in ["transcripts.jsonl", "estimates.csv", "pair_id,first,second", "worker,pair,choice", "Exit codes"] {
        assert!(help.contains(needle), "--help lacks {needle}");
    }
}

#[test]
fn ttest_and_similarity_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.csv");
    let mut text = String::from("argument_id,dimension,score,word_count,source\n");
    for i in 1..=5 {
        text += &format!("a{i},trust,0.{},{},trust\n", i + 3, 10 + i);
        text += &format!("b{i},trust,0.{},{},baseline\n", i + 1, 10 + i);
    }
    std::fs::write(&scores, text).unwrap();
    let out = ok(&["ttest", "--scores", scores.to_str().unwrap(), "--discount", "none"]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    // undiscounted: means 0.6 and 0.4, equal variances 0.025, so t = 0.2 / 0.1
    assert_eq!(row[0], "trust");
    assert!((row[3].parse::<f64>().unwrap() - 0.6).abs() < 1e-12);
    assert!((row[5].parse::<f64>().unwrap() - 2.0).abs() < 1e-9);
    assert!((row[6].parse::<f64>().unwrap() - 8.0).abs() < 1e-9);

    let emb = tmp.path().join("emb.csv");
    let labels = tmp.path().join("labels.csv");
    std::fs::write(&emb, "argument_id,v0,v1\na1,1,0\na2,1,1\nb1,1,0\nb2,0,1\n").unwrap();
    std::fs::write(&labels, "argument_id,dimension\na1,trust\na2,trust\nb1,baseline\nb2,baseline\n").unwrap();
    let out = ok(&["similarity", "--embeddings", emb.to_str().unwrap(), "--labels", labels.to_str().unwrap()]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    // cosines 1, 0, 1/sqrt2, 1/sqrt2
    let want = (1.0 + 2.0 / 2f64.sqrt()) / 4.0;
    assert_eq!(row[0], "trust");
    assert!((row[1].parse::<f64>().unwrap() - want).abs() < 1e-12);
}
