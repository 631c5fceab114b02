use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueTranscript, SocialDimension};
use crate::seed::{derive_seed, opaque_token};

use super::{AnnotationError, ArgumentRecord, PairTask, DEFAULT_REDUNDANCY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlArgument {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ControlCorpus {
    pub version: String,
    #[serde(rename = "control", default)]
    pub controls: Vec<ControlArgument>,
}

impl Default for ControlCorpus {
    fn default() -> Self {
        toml::from_str(include_str!("../../data/control_corpus.toml"))
            .expect("bundled control corpus parses")
    }
}

impl ControlCorpus {
    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AnnotationError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| AnnotationError::InvalidTaskSet(format!("{}: {e}", path.display())))
    }
}

/// One record per valid transcript, keyed by the transcript id.
pub fn arguments_from_transcripts(transcripts: &[DialogueTranscript]) -> Vec<ArgumentRecord> {
    transcripts
        .iter()
        .filter(|t| t.outcome.valid)
        .filter_map(|t| {
            Some(ArgumentRecord {
                id: format!("arg-{}", t.id),
                dimension: t.dimension,
                text: t.argument()?.to_string(),
                source_transcript: t.id.clone(),
                successful: t.outcome.is_success(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub pairs_per_dimension_pair: usize,
    pub excluded: BTreeSet<SocialDimension>,
    pub target_redundancy: u32,
    pub control_fraction: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            pairs_per_dimension_pair: 5,
            excluded: BTreeSet::new(),
            target_redundancy: DEFAULT_REDUNDANCY,
            control_fraction: 0.10,
        }
    }
}

impl SamplingConfig {
    pub fn entities(&self) -> Vec<SocialDimension> {
        SocialDimension::ALL
            .into_iter()
            .filter(|d| !self.excluded.contains(d))
            .collect()
    }
}

fn pair_id(seed: u64, index: usize) -> String {
    format!("p-{}", opaque_token(seed, &format!("pair:{index}"), 12))
}

/// `pairs_per_dimension_pair` distinct argument pairs for every unordered
/// pair of non-excluded dimensions, drawn from successful arguments only.
pub fn sample_pairs(
    arguments: &[ArgumentRecord],
    config: &SamplingConfig,
    seed: u64,
) -> Result<Vec<PairTask>, AnnotationError> {
    let mut by_dim: BTreeMap<SocialDimension, Vec<&ArgumentRecord>> = BTreeMap::new();
    for a in arguments.iter().filter(|a| a.successful) {
        by_dim.entry(a.dimension).or_default().push(a);
    }
    let entities = config.entities();
    let k = config.pairs_per_dimension_pair;
    let mut pairs = Vec::new();
    for (i, &di) in entities.iter().enumerate() {
        for &dj in &entities[i + 1..] {
            let xs = by_dim.get(&di).map(Vec::as_slice).unwrap_or(&[]);
            let ys = by_dim.get(&dj).map(Vec::as_slice).unwrap_or(&[]);
            let combos = xs.len() * ys.len();
            if combos < k || k == 0 {
                return Err(AnnotationError::InsufficientArguments([di, dj]));
            }
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &["pairs", di.as_str(), dj.as_str()], 0));
            let mut picks = index::sample(&mut rng, combos, k).into_vec();
            picks.sort_unstable();
            for c in picks {
                let (a, b) = (xs[c / ys.len()], ys[c % ys.len()]);
                let (left, right, dims) = if rng.random::<bool>() {
                    (a, b, [di, dj])
                } else {
                    (b, a, [dj, di])
                };
                let idx = pairs.len();
                pairs.push(PairTask {
                    id: pair_id(seed, idx),
                    left: left.id.clone(),
                    right: right.id.clone(),
                    dimension_pair: dims,
                    is_control: false,
                    placement_seed: derive_seed(seed, &["placement"], idx as u64),
                    target_redundancy: config.target_redundancy,
                });
            }
        }
    }
    Ok(pairs)
}

/// Appends `ceil(fraction * pairs.len())` control pairs, each a successful
/// baseline argument against a control argument. Controls are used in
/// shuffled order and reused once the corpus runs out.
pub fn inject_controls(
    mut pairs: Vec<PairTask>,
    fraction: f64,
    controls: &[ControlArgument],
    arguments: &[ArgumentRecord],
    seed: u64,
) -> Result<Vec<PairTask>, AnnotationError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnnotationError::InvalidFraction(fraction));
    }
    if controls.is_empty() {
        return Err(AnnotationError::EmptyControlCorpus);
    }
    let baseline: Vec<&ArgumentRecord> = arguments
        .iter()
        .filter(|a| a.successful && a.dimension.is_baseline())
        .collect();
    if baseline.is_empty() {
        let b = SocialDimension::Baseline;
        return Err(AnnotationError::InsufficientArguments([b, b]));
    }
    // the epsilon keeps e.g. 0.1 * 180 = 18.000000000000004 from rounding up
    let count = (fraction * pairs.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["controls"], 0));
    let mut order: Vec<&ControlArgument> = controls.iter().collect();
    order.shuffle(&mut rng);
    let start = pairs.len();
    let target = pairs.first().map(|p| p.target_redundancy).unwrap_or(DEFAULT_REDUNDANCY);
    for n in 0..count {
        let base = baseline[rng.random_range(0..baseline.len())];
        let control = order[n % order.len()];
        let idx = start + n;
        pairs.push(PairTask {
            id: pair_id(seed, idx),
            left: base.id.clone(),
            right: control.id.clone(),
            dimension_pair: [SocialDimension::Baseline, SocialDimension::Baseline],
            is_control: true,
            placement_seed: derive_seed(seed, &["placement"], idx as u64),
            target_redundancy: target,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use SocialDimension::*;

    /// `per_dim` successful and one failed argument for every dimension.
    pub(crate) fn arguments(per_dim: usize) -> Vec<ArgumentRecord> {
        let mut out = Vec::new();
        for d in SocialDimension::ALL {
            for i in 0..=per_dim {
                out.push(ArgumentRecord {
                    id: format!("{d}-{i}"),
                    dimension: d,
                    text: format!("{d} argument number {i}"),
                    source_transcript: format!("t-{d}-{i}"),
                    successful: i < per_dim,
                });
            }
        }
        out
    }

    fn without_power() -> SamplingConfig {
        SamplingConfig {
            excluded: BTreeSet::from([Power]),
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn nine_entities_give_180_pairs_and_18_controls() {
        let args = arguments(4);
        let pairs = sample_pairs(&args, &without_power(), 7).unwrap();
        assert_eq!(pairs.len(), 180);
        let mut per_dims: BTreeMap<BTreeSet<SocialDimension>, usize> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for p in &pairs {
            *per_dims.entry(p.dimension_pair.into_iter().collect()).or_default() += 1;
            let key: BTreeSet<&str> = [p.left.as_str(), p.right.as_str()].into();
            assert!(seen.insert(key), "argument pair repeated");
            assert!(!p.left.ends_with("-4") && !p.right.ends_with("-4"), "failed argument sampled");
            assert!(!p.dimension_pair.contains(&Power));
        }
        assert_eq!(per_dims.len(), 36);
        assert!(per_dims.values().all(|&n| n == 5));

        let all = inject_controls(pairs, 0.10, &ControlCorpus::default().controls, &args, 7).unwrap();
        assert_eq!(all.len(), 198);
        let controls: Vec<_> = all.iter().filter(|p| p.is_control).collect();
        assert_eq!(controls.len(), 18);
        for c in controls {
            assert!(c.left.starts_with("baseline-"));
            assert!(c.right.starts_with("ctrl-"));
        }
        let ids: BTreeSet<_> = all.iter().map(|p| &p.id).collect();
        assert_eq!(ids.len(), 198);
    }

    #[test]
    fn small_cases() {
        let args = arguments(2);
        let two = SamplingConfig {
            pairs_per_dimension_pair: 1,
            excluded: SocialDimension::ALL.into_iter().filter(|d| ![Trust, Fun].contains(d)).collect(),
            ..SamplingConfig::default()
        };
        let pairs = sample_pairs(&args, &two, 1).unwrap();
        assert_eq!(pairs.len(), 1);

        let five: Vec<PairTask> = sample_pairs(
            &args,
            &SamplingConfig {
                pairs_per_dimension_pair: 4,
                ..two.clone()
            },
            1,
        )
        .unwrap();
        assert_eq!(five.len(), 4);
        let with_one = inject_controls(five[..4].to_vec(), 0.1, &ControlCorpus::default().controls, &args, 1).unwrap();
        assert_eq!(with_one.len(), 5);
        let mut pairs5 = five.clone();
        pairs5.push(five[0].clone());
        let with_ceil = inject_controls(pairs5, 0.1, &ControlCorpus::default().controls, &args, 1).unwrap();
        assert_eq!(with_ceil.iter().filter(|p| p.is_control).count(), 1);
    }

    #[test]
    fn missing_dimension_is_an_error() {
        let args: Vec<_> = arguments(3).into_iter().filter(|a| a.dimension != Fun).collect();
        assert_eq!(
            sample_pairs(&args, &SamplingConfig::default(), 1),
            Err(AnnotationError::InsufficientArguments([Knowledge, Fun]))
        );
    }

    #[test]
    fn control_errors() {
        let args = arguments(3);
        let pairs = sample_pairs(&args, &without_power(), 1).unwrap();
        assert_eq!(
            inject_controls(pairs.clone(), 0.1, &[], &args, 1),
            Err(AnnotationError::EmptyControlCorpus)
        );
        assert_eq!(
            inject_controls(pairs, 0.0, &ControlCorpus::default().controls, &args, 1),
            Err(AnnotationError::InvalidFraction(0.0))
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let args = arguments(3);
        let a = sample_pairs(&args, &without_power(), 42).unwrap();
        let b = sample_pairs(&args, &without_power(), 42).unwrap();
        let c = sample_pairs(&args, &without_power(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bundled_corpus_has_ten_controls() {
        let c = ControlCorpus::default();
        assert_eq!(c.controls.len(), 10);
        assert!(c.controls.iter().all(|x| !x.text.trim().is_empty()));
    }
}
