//! Top-N recommenders over implicit (user, item) interactions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::{Assignment, ModelId, ModelParams, TrainError, TrainedModel, TrainingMeta};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopularityModel {
    /// Catalog ordered by descending count, ties by ascending item id.
    pub items: Vec<String>,
    pub counts: Vec<usize>,
}

impl PopularityModel {
    pub fn recommend(&self, history: &HashSet<String>, k: usize) -> Vec<(String, f64)> {
        self.items
            .iter()
            .zip(&self.counts)
            .filter(|(i, _)| !history.contains(*i))
            .take(k)
            .map(|(i, &c)| (i.clone(), c as f64))
            .collect()
    }
}

pub fn train_popularity(interactions: &[(String, String)]) -> Result<TrainedModel, TrainError> {
    if interactions.is_empty() {
        return Err(TrainError::EmptyInteractions);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, item) in interactions {
        *counts.entry(item).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // stable sort keeps the ascending-id order among equal counts
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let model = PopularityModel {
        items: ranked.iter().map(|(i, _)| i.to_string()).collect(),
        counts: ranked.iter().map(|(_, c)| *c).collect(),
    };
    Ok(TrainedModel {
        model_id: ModelId::Popularity,
        hyperparameters: Assignment::default(),
        params: ModelParams::Popularity(model),
        meta: TrainingMeta::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemKnnParams {
    pub k_neighbors: usize,
    pub shrinkage: f64,
}

impl Default for ItemKnnParams {
    fn default() -> Self {
        ItemKnnParams { k_neighbors: 50, shrinkage: 10.0 }
    }
}

impl ItemKnnParams {
    pub fn from_assignment(a: &Assignment) -> Self {
        let d = ItemKnnParams::default();
        ItemKnnParams {
            k_neighbors: a.usize_or("k_neighbors", d.k_neighbors),
            shrinkage: a.f64_or("shrinkage", d.shrinkage).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemKnnModel {
    /// Catalog in ascending id order; indices below refer to it.
    pub items: Vec<String>,
    /// Per item, up to `k_neighbors` (index, similarity) pairs, most similar
    /// first, ties by ascending index.
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl ItemKnnModel {
    pub fn index_of(&self, item: &str) -> Option<usize> {
        self.items.binary_search_by(|p| p.as_str().cmp(item)).ok()
    }

    /// Score of every catalog item for a user with this history: the sum of
    /// similarities from each history item to the candidates in its
    /// neighbor list.
    pub fn score_all(&self, history: &HashSet<String>) -> Vec<f64> {
        let mut scores = vec![0.0; self.items.len()];
        let mut hist: Vec<usize> = history.iter().filter_map(|h| self.index_of(h)).collect();
        hist.sort_unstable();
        for h in hist {
            for &(c, s) in &self.neighbors[h] {
                scores[c] += s;
            }
        }
        scores
    }

    /// Top `k` items not in `history`, by score then ascending id.
    pub fn recommend(&self, history: &HashSet<String>, k: usize) -> Vec<(String, f64)> {
        let scores = self.score_all(history);
        let mut cand: Vec<usize> = (0..self.items.len()).filter(|&i| !history.contains(&self.items[i])).collect();
        cand.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        cand.truncate(k);
        cand.into_iter().map(|i| (self.items[i].clone(), scores[i])).collect()
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.neighbors.iter().flatten().all(|(_, s)| s.is_finite())
    }
}

/// Cosine similarity over binary user sets, scaled by
/// `co / (co + shrinkage)` where `co` is the co-occurrence count.
pub fn train_item_knn(
    interactions: &[(String, String)],
    hp: &ItemKnnParams,
    hyperparameters: Assignment,
) -> Result<TrainedModel, TrainError> {
    if interactions.is_empty() {
        return Err(TrainError::EmptyInteractions);
    }
    let catalog: BTreeSet<&str> = interactions.iter().map(|(_, i)| i.as_str()).collect();
    let items: Vec<String> = catalog.iter().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, usize> = catalog.iter().enumerate().map(|(k, s)| (*s, k)).collect();

    let mut by_user: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (u, i) in interactions {
        by_user.entry(u).or_default().insert(index[i.as_str()]);
    }
    let n = items.len();
    let mut support = vec![0usize; n];
    let mut co: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n];
    for set in by_user.values() {
        let v: Vec<usize> = set.iter().copied().collect();
        for (a, &i) in v.iter().enumerate() {
            support[i] += 1;
            for &j in &v[a + 1..] {
                *co[i].entry(j).or_default() += 1;
                *co[j].entry(i).or_default() += 1;
            }
        }
    }
    let neighbors = co
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut list: Vec<(usize, f64)> = row
                .iter()
                .map(|(&j, &c)| {
                    let c = c as f64;
                    let cos = c / ((support[i] * support[j]) as f64).sqrt();
                    (j, cos * c / (c + hp.shrinkage))
                })
                .collect();
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            list.truncate(hp.k_neighbors);
            list
        })
        .collect();
    Ok(TrainedModel {
        model_id: ModelId::ItemKnn,
        hyperparameters,
        params: ModelParams::ItemKnn(ItemKnnModel { items, neighbors }),
        meta: TrainingMeta::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(u, i)| (u.to_string(), i.to_string())).collect()
    }

    #[test]
    fn popularity_orders_and_excludes_history() {
        let data = pairs(&[("u1", "b"), ("u2", "b"), ("u1", "a"), ("u3", "c"), ("u2", "a"), ("u3", "d")]);
        let m = train_popularity(&data).unwrap();
        let ModelParams::Popularity(p) = &m.params else { panic!() };
        assert_eq!(p.items, ["a", "b", "c", "d"]);
        let recs = p.recommend(&HashSet::from(["a".to_string()]), 2);
        assert_eq!(recs, vec![("b".to_string(), 2.0), ("c".to_string(), 1.0)]);
    }

    #[test]
    fn knn_toy_similarities() {
        // a and b share both users; c shares one of them
        let data = pairs(&[("u1", "a"), ("u1", "b"), ("u2", "a"), ("u2", "b"), ("u2", "c")]);
        let hp = ItemKnnParams { k_neighbors: 10, shrinkage: 0.0 };
        let m = train_item_knn(&data, &hp, Assignment::default()).unwrap();
        let ModelParams::ItemKnn(k) = &m.params else { panic!() };
        assert_eq!(k.neighbors[0][0], (1, 1.0));
        assert!((k.neighbors[0][1].1 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let recs = k.recommend(&HashSet::from(["a".to_string()]), 5);
        assert_eq!(recs.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["b", "c"]);
    }

    #[test]
    fn shrinkage_scales_by_support() {
        let data = pairs(&[("u1", "a"), ("u1", "b")]);
        let hp = ItemKnnParams { k_neighbors: 10, shrinkage: 1.0 };
        let m = train_item_knn(&data, &hp, Assignment::default()).unwrap();
        let ModelParams::ItemKnn(k) = &m.params else { panic!() };
        assert_eq!(k.neighbors[0], vec![(1, 0.5)]);
    }

    #[test]
    fn neighbor_lists_truncated() {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(("u".to_string(), format!("i{i}")));
        }
        let m = train_item_knn(&v, &ItemKnnParams { k_neighbors: 3, shrinkage: 0.0 }, Assignment::default()).unwrap();
        let ModelParams::ItemKnn(k) = &m.params else { panic!() };
        assert!(k.neighbors.iter().all(|n| n.len() == 3));
        // equal similarity everywhere: lowest ids win
        assert_eq!(k.neighbors[0].iter().map(|n| n.0).collect::<Vec<_>>(), [1, 2, 3]);
    }
}
