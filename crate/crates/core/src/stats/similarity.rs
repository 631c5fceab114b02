use std::collections::BTreeMap;

use crate::dialogue::SocialDimension;

use super::StatsError;

/// Embedding vectors keyed by argument id, all of one length.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self, StatsError> {
        let dim = entries.first().map(|(_, v)| v.len());
        let mut ids = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        for (id, v) in entries {
            let want = dim.unwrap_or(v.len());
            if v.len() != want {
                return Err(StatsError::DimensionMismatch(want, v.len()));
            }
            if v.iter().all(|x| *x == 0.0) {
                return Err(StatsError::ZeroVector(id));
            }
            ids.push(id);
            vectors.push(v);
        }
        Ok(EmbeddingSet { ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == id).map(|i| self.vectors[i].as_slice())
    }

    /// The entries whose id satisfies `keep`, in original order.
    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> EmbeddingSet {
        let (ids, vectors) = self
            .ids
            .iter()
            .zip(&self.vectors)
            .filter(|(id, _)| keep(id))
            .map(|(id, v)| (id.clone(), v.clone()))
            .unzip();
        EmbeddingSet { ids, vectors }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Mean cosine similarity over every cross pair `(x in a, y in b)`.
pub fn mean_cosine_similarity(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::InsufficientData("empty embedding set".into()));
    }
    let (da, db) = (a.dimension().unwrap_or(0), b.dimension().unwrap_or(0));
    if da != db {
        return Err(StatsError::DimensionMismatch(da, db));
    }
    let mut sum = 0.0;
    for x in &a.vectors {
        for y in &b.vectors {
            sum += cosine(x, y);
        }
    }
    Ok(sum / (a.len() * b.len()) as f64)
}

/// Mean similarity between each labelled dimension's arguments and the
/// baseline arguments. Ids without a label are ignored.
pub fn similarity_to_baseline(
    set: &EmbeddingSet,
    labels: &BTreeMap<String, SocialDimension>,
) -> Result<Vec<(SocialDimension, f64)>, StatsError> {
    let of = |d: SocialDimension| set.filter(|id| labels.get(id) == Some(&d));
    let baseline = of(SocialDimension::Baseline);
    if baseline.is_empty() {
        return Err(StatsError::InsufficientData("no baseline embeddings".into()));
    }
    let mut out = Vec::new();
    for d in SocialDimension::ALL.into_iter().filter(|d| !d.is_baseline()) {
        let group = of(d);
        if !group.is_empty() {
            out.push((d, mean_cosine_similarity(&group, &baseline)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::new(
            vs.iter()
                .enumerate()
                .map(|(i, v)| (format!("a{i}"), v.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn examples() {
        let v = set(&[&[0.3, -1.2, 4.0]]);
        assert!((mean_cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let x = set(&[&[1.0, 0.0]]);
        let y = set(&[&[0.0, 1.0]]);
        assert_eq!(mean_cosine_similarity(&x, &y).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = set(&[&[h, h]]);
        assert!((mean_cosine_similarity(&a, &b).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn invalid_sets() {
        assert_eq!(
            EmbeddingSet::new(vec![("a".into(), vec![1.0]), ("b".into(), vec![1.0, 2.0])]),
            Err(StatsError::DimensionMismatch(1, 2))
        );
        assert_eq!(
            EmbeddingSet::new(vec![("z".into(), vec![0.0, 0.0])]),
            Err(StatsError::ZeroVector("z".into()))
        );
        assert_eq!(
            mean_cosine_similarity(&set(&[&[1.0]]), &set(&[&[1.0, 1.0]])),
            Err(StatsError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn grouped_by_label() {
        let s = EmbeddingSet::new(vec![
            ("b".into(), vec![1.0, 0.0]),
            ("t".into(), vec![1.0, 0.0]),
            ("f".into(), vec![0.0, 2.0]),
            ("x".into(), vec![5.0, 5.0]),
        ])
        .unwrap();
        let labels = BTreeMap::from([
            ("b".to_string(), SocialDimension::Baseline),
            ("t".to_string(), SocialDimension::Trust),
            ("f".to_string(), SocialDimension::Fun),
        ]);
        let got = similarity_to_baseline(&s, &labels).unwrap();
        assert_eq!(got, vec![(SocialDimension::Trust, 1.0), (SocialDimension::Fun, 0.0)]);
    }
}
