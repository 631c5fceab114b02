//! Transcript JSONL and estimate/length CSV files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dialogue::DialogueTranscript;

use super::{CellSummary, LengthRow, PersuasionEstimate};

/// Appends transcripts as JSON lines, flushing after each record so a
/// partially failed run stays readable.
pub struct TranscriptWriter<W: Write> {
    inner: W,
}

impl TranscriptWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(TranscriptWriter::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> TranscriptWriter<W> {
    pub fn new(inner: W) -> Self {
        TranscriptWriter { inner }
    }

    pub fn append(&mut self, transcript: &DialogueTranscript) -> io::Result<()> {
        serde_json::to_writer(&mut self.inner, transcript)?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

pub fn read_transcripts(path: &Path) -> Result<Vec<DialogueTranscript>, ReadError> {
    read_transcripts_from(BufReader::new(File::open(path)?))
}

pub fn read_transcripts_from(reader: impl BufRead) -> Result<Vec<DialogueTranscript>, ReadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|source| ReadError::Json {
            line: i + 1,
            source,
        })?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_estimates_csv(w: impl Write, estimates: &[PersuasionEstimate]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dimension", "stubbornness", "n", "k", "p_hat", "ci_low", "ci_high"])?;
    for e in estimates {
        out.write_record([
            e.dimension.to_string(),
            e.stubbornness.to_string(),
            e.n.to_string(),
            e.k.to_string(),
            e.p_hat.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_estimates_csv(r: impl io::Read) -> Result<Vec<PersuasionEstimate>, ReadError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| ReadError::Invalid(format!("estimates row {:?}: bad {what}", rec));
        out.push(PersuasionEstimate {
            dimension: field(0).parse().map_err(|_| bad("dimension"))?,
            stubbornness: field(1).parse().map_err(|_| bad("stubbornness"))?,
            n: field(2).parse().map_err(|_| bad("n"))?,
            k: field(3).parse().map_err(|_| bad("k"))?,
            p_hat: field(4).parse().map_err(|_| bad("p_hat"))?,
            ci_low: field(5).parse().map_err(|_| bad("ci_low"))?,
            ci_high: field(6).parse().map_err(|_| bad("ci_high"))?,
            excluded: 0,
        });
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_lengths_csv(w: impl Write, rows: &[LengthRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dimension", "stubbornness", "stratum", "n", "mean_words", "std_words"])?;
    for r in rows {
        out.write_record([
            r.dimension.to_string(),
            r.stubbornness.to_string(),
            r.stratum.to_string(),
            r.n.to_string(),
            opt(r.mean),
            opt(r.std),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_cells_csv(w: impl Write, cells: &[CellSummary]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dimension",
        "stubbornness",
        "requested",
        "completed",
        "failed",
        "ambiguous",
    ])?;
    for c in cells {
        out.write_record([
            c.dimension.to_string(),
            c.stubbornness.to_string(),
            c.requested.to_string(),
            c.completed.to_string(),
            c.failed.to_string(),
            c.ambiguous.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
