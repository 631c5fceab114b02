//! CSV import and export for the statistics module.
//!
//! | file | header |
//! |------|--------|
//! | tally matrix | `dimension,<id>,<id>,...` (row beats column) |
//! | pair votes | `pair_id,first,second,first_votes,second_votes` |
//! | scores | `argument_id,dimension,score,word_count[,source]` |
//! | embeddings | `argument_id,v0,v1,...` |
//! | strengths | `rank,dimension,strength,tied` |
//! | probability matrix | `dimension,<id>,...` (P(row beats column)) |

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::Deserialize;

use crate::dialogue::SocialDimension;

use super::{
    BradleyTerryFit, DimensionScoreSet, EmbeddingSet, LengthDiscount, PairVotes, PairwiseTally,
    Ranking, StatsError, SweepPoint,
};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn invalid(msg: impl Into<String>) -> CsvError {
    CsvError::Invalid(msg.into())
}

fn parse_dim(s: &str) -> Result<SocialDimension, CsvError> {
    s.trim().parse().map_err(|e| invalid(format!("{e}")))
}

/// Either form of pairwise input accepted by the fitting commands.
#[derive(Debug, Clone, PartialEq)]
pub enum PairwiseInput {
    Matrix(PairwiseTally),
    Votes(Vec<PairVotes>),
}

/// Reads a tally matrix or a pair-votes file, telling them apart by header.
pub fn read_pairwise_input(mut r: impl Read) -> Result<PairwiseInput, CsvError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or("");
    if header.trim_start().starts_with("pair_id") {
        Ok(PairwiseInput::Votes(read_votes_csv(text.as_bytes())?))
    } else {
        Ok(PairwiseInput::Matrix(read_tally_csv(text.as_bytes())?))
    }
}

pub fn read_tally_csv(r: impl Read) -> Result<PairwiseTally, CsvError> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("dimension") {
        return Err(invalid("tally header must start with `dimension`"));
    }
    let entities = header.iter().skip(1).map(parse_dim).collect::<Result<Vec<_>, _>>()?;
    let mut wins = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_dim = parse_dim(rec.get(0).unwrap_or(""))?;
        if entities.get(i) != Some(&row_dim) {
            return Err(invalid(format!(
                "tally row {} is `{row_dim}`, expected the column order",
                i + 1
            )));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|c| c.trim().parse::<u64>().map_err(|_| invalid(format!("bad count `{c}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        wins.push(row);
    }
    Ok(PairwiseTally::from_matrix(entities, wins)?)
}

pub fn write_tally_csv(w: impl Write, tally: &PairwiseTally) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dimension".to_string()];
    header.extend(tally.entities().iter().map(|e| e.to_string()));
    out.write_record(&header)?;
    for (i, e) in tally.entities().iter().enumerate() {
        let mut row = vec![e.to_string()];
        row.extend(tally.matrix()[i].iter().map(|c| c.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_votes_csv(r: impl Read) -> Result<Vec<PairVotes>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let votes = reader.deserialize().collect::<Result<Vec<PairVotes>, _>>()?;
    Ok(votes)
}

pub fn write_votes_csv(w: impl Write, votes: &[PairVotes]) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    for v in votes {
        out.serialize(v)?;
    }
    if votes.is_empty() {
        out.write_record(["pair_id", "first", "second", "first_votes", "second_votes"])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_strengths_csv(w: impl Write, ranking: &Ranking) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "dimension", "strength", "tied"])?;
    for (i, e) in ranking.entries.iter().enumerate() {
        out.write_record([
            (i + 1).to_string(),
            e.dimension.to_string(),
            e.strength.to_string(),
            e.tied.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_probability_matrix_csv(w: impl Write, fit: &BradleyTerryFit) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dimension".to_string()];
    header.extend(fit.entities().iter().map(|e| e.to_string()));
    out.write_record(&header)?;
    for (e, row) in fit.entities().iter().zip(fit.probability_matrix()) {
        let mut rec = vec![e.to_string()];
        rec.extend(row.iter().map(|p| p.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per (threshold, dimension); a degenerate threshold gets a single
/// row carrying the reason in `detail`.
pub fn write_sweep_csv(w: impl Write, points: &[SweepPoint]) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "threshold",
        "retained_pairs",
        "status",
        "rank",
        "dimension",
        "strength",
        "detail",
    ])?;
    for p in points {
        let t = format!("{:.2}", p.threshold);
        match &p.outcome {
            Ok((_, ranking)) => {
                for (i, e) in ranking.entries.iter().enumerate() {
                    out.write_record([
                        t.clone(),
                        p.retained_pairs.to_string(),
                        "ok".into(),
                        (i + 1).to_string(),
                        e.dimension.to_string(),
                        e.strength.to_string(),
                        if e.tied { "tied".into() } else { String::new() },
                    ])?;
                }
            }
            Err(d) => out.write_record([
                t,
                p.retained_pairs.to_string(),
                "degenerate".into(),
                String::new(),
                String::new(),
                String::new(),
                d.to_string(),
            ])?,
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ScoreRow {
    argument_id: String,
    dimension: String,
    score: f64,
    word_count: u64,
    #[serde(default)]
    source: Option<String>,
}

/// Scores file; a missing or empty `source` means the argument was written
/// with the strategy it is scored on.
pub fn read_scores_csv(r: impl Read, discount: LengthDiscount) -> Result<DimensionScoreSet, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut set = DimensionScoreSet::new(discount);
    for row in reader.deserialize::<ScoreRow>() {
        let row = row?;
        let dimension = parse_dim(&row.dimension)?;
        let source = match row.source.as_deref() {
            Some(s) if !s.is_empty() => parse_dim(s)?,
            _ => dimension,
        };
        set.push(row.argument_id, dimension, source, row.score, row.word_count)?;
    }
    Ok(set)
}

pub fn read_embeddings_csv(r: impl Read) -> Result<EmbeddingSet, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("argument_id") || header.len() < 2 {
        return Err(invalid("embeddings header must be `argument_id,v0,...`"));
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_string();
        let v = rec
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>().map_err(|_| invalid(format!("bad value `{x}` for `{id}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        entries.push((id, v));
    }
    Ok(EmbeddingSet::new(entries)?)
}

#[derive(Deserialize)]
struct LabelRow {
    argument_id: String,
    dimension: String,
}

/// `argument_id,dimension` pairs; other columns are ignored, so a scores
/// file can be used directly.
pub fn read_labels_csv(r: impl Read) -> Result<BTreeMap<String, SocialDimension>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row?;
        out.insert(row.argument_id, parse_dim(&row.dimension)?);
    }
    Ok(out)
}
