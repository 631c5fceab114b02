use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialogue::{word_count, DialogueTranscript, SocialDimension, StubbornnessLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    All,
    Successful,
    Unsuccessful,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::All, Stratum::Successful, Stratum::Unsuccessful];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::All => "all",
            Stratum::Successful => "successful",
            Stratum::Unsuccessful => "unsuccessful",
        }
    }

    fn admits(self, success: bool) -> bool {
        match self {
            Stratum::All => true,
            Stratum::Successful => success,
            Stratum::Unsuccessful => !success,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Word-count summary of stage-2 arguments in one stratum of one cell.
///
/// `mean` is `None` when `n == 0`; `std` (sample, n − 1 denominator) is
/// `None` when `n < 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
    pub stratum: Stratum,
    pub n: u64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

fn summarize(lengths: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = lengths.len();
    if n == 0 {
        return (None, None);
    }
    let mean = lengths.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = lengths.iter().map(|x| (x - mean).powi(2)).sum();
    (Some(mean), Some((ss / (n as f64 - 1.0)).sqrt()))
}

/// Length table over the cells present in `transcripts`.
pub fn argument_length_stats(transcripts: &[DialogueTranscript]) -> Vec<LengthRow> {
    let cells: BTreeSet<_> = transcripts
        .iter()
        .map(|t| (t.dimension, t.stubbornness))
        .collect();
    argument_length_stats_over(transcripts, cells)
}

/// Length table over an explicit cell grid; cells with no transcripts get
/// `n = 0` rows. Transcripts with an ambiguous outcome are left out so that
/// the successful and unsuccessful strata always sum to the whole.
pub fn argument_length_stats_over(
    transcripts: &[DialogueTranscript],
    cells: impl IntoIterator<Item = (SocialDimension, StubbornnessLevel)>,
) -> Vec<LengthRow> {
    let mut rows = Vec::new();
    for (dimension, stubbornness) in cells {
        let in_cell: Vec<(f64, bool)> = transcripts
            .iter()
            .filter(|t| t.dimension == dimension && t.stubbornness == stubbornness && t.outcome.valid)
            .map(|t| {
                let words = t.argument().map(word_count).unwrap_or(0);
                (words as f64, t.outcome.changed)
            })
            .collect();
        for stratum in Stratum::ALL {
            let lengths: Vec<f64> = in_cell
                .iter()
                .filter(|(_, success)| stratum.admits(*success))
                .map(|(len, _)| *len)
                .collect();
            let (mean, std) = summarize(&lengths);
            rows.push(LengthRow {
                dimension,
                stubbornness,
                stratum,
                n: lengths.len() as u64,
                mean,
                std,
            });
        }
    }
    rows
}
