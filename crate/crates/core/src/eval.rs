//! Leave-one-out evaluation.
//!
//! For every user with at least three positives, one positive is held out for
//! validation and another for testing, each paired with `n_neg` sampled items
//! the user never interacted with. The held-out positive is ranked among its
//! `1 + n_neg` candidates and scored with HR@K and NDCG@K.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, EntityMaps};
use crate::model::{Embeddings, SceneRec};
use crate::rng::{stream, STREAM_SPLIT};
use crate::tsv::write_lines;

pub const DEFAULT_NEGATIVES: usize = 100;
pub const DEFAULT_K: usize = 10;

/// Users need this many positives to take part in validation and testing.
pub const MIN_POSITIVES: usize = 3;

/// One held-out positive with its sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldOut {
    pub positive: usize,
    pub negatives: Vec<usize>,
}

impl HeldOut {
    /// Positive first, then the negatives in sampled order.
    pub fn candidates(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(1 + self.negatives.len());
        out.push(self.positive);
        out.extend_from_slice(&self.negatives);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSplit {
    pub seed: u64,
    pub n_neg: usize,
    /// Training positives per user, sorted.
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Option<HeldOut>>,
    pub test: Vec<Option<HeldOut>>,
}

impl EvalSplit {
    pub fn n_users(&self) -> usize {
        self.train.len()
    }

    /// Interaction graph restricted to training positives.
    pub fn train_graph(&self, n_items: usize) -> Result<BipartiteGraph> {
        BipartiteGraph::from_edges(
            self.train.len(),
            n_items,
            self.train
                .iter()
                .enumerate()
                .flat_map(|(u, items)| items.iter().map(move |&i| (u, i))),
        )
    }

    pub fn partition(&self, which: Partition) -> &[Option<HeldOut>] {
        match which {
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }
}

fn sample_negatives<R: Rng>(
    rng: &mut R,
    unobserved: &[usize],
    n_neg: usize,
) -> Vec<usize> {
    sample(rng, unobserved.len(), n_neg)
        .into_iter()
        .map(|k| unobserved[k])
        .collect()
}

/// Splits every user's positives into train / validation / test.
pub fn leave_one_out_split(bg: &BipartiteGraph, n_neg: usize, seed: u64) -> Result<EvalSplit> {
    let mut rng = stream(seed, STREAM_SPLIT);
    let n_items = bg.n_items();
    let mut train = Vec::with_capacity(bg.n_users());
    let mut validation = Vec::with_capacity(bg.n_users());
    let mut test = Vec::with_capacity(bg.n_users());
    for u in 0..bg.n_users() {
        let positives = bg.user_items(u);
        if positives.len() < MIN_POSITIVES {
            train.push(positives.to_vec());
            validation.push(None);
            test.push(None);
            continue;
        }
        let unobserved: Vec<usize> = (0..n_items)
            .filter(|i| positives.binary_search(i).is_err())
            .collect();
        if unobserved.len() < n_neg {
            return Err(Error::Split(format!(
                "user {} has only {} unobserved items, {} negatives requested",
                u,
                unobserved.len(),
                n_neg
            )));
        }
        let picked = sample(&mut rng, positives.len(), 2).into_vec();
        let (val_pos, test_pos) = (positives[picked[0]], positives[picked[1]]);
        train.push(
            positives
                .iter()
                .copied()
                .filter(|&i| i != val_pos && i != test_pos)
                .collect(),
        );
        validation.push(Some(HeldOut {
            positive: val_pos,
            negatives: sample_negatives(&mut rng, &unobserved, n_neg),
        }));
        test.push(Some(HeldOut {
            positive: test_pos,
            negatives: sample_negatives(&mut rng, &unobserved, n_neg),
        }));
    }
    Ok(EvalSplit {
        seed,
        n_neg,
        train,
        validation,
        test,
    })
}

/// Rank of `scores[0]`: one plus the candidates scoring strictly higher plus
/// equal-scoring candidates with a smaller item index.
pub fn rank_of_first(scores: &[f64], items: &[usize]) -> usize {
    assert_eq!(scores.len(), items.len());
    assert!(!scores.is_empty());
    let (s0, i0) = (scores[0], items[0]);
    1 + scores[1..]
        .iter()
        .zip(&items[1..])
        .filter(|&(&s, &i)| s > s0 || (s == s0 && i < i0))
        .count()
}

/// Rank of `candidates[0]` among `candidates` under the model's scores.
pub fn rank_candidates(model: &SceneRec<'_>, u: usize, candidates: &[usize]) -> usize {
    let user = model.user_embed(u);
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&i| model.score_reprs(&user, &model.item_embed(i)))
        .collect();
    rank_of_first(&scores, candidates)
}

pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Single relevant item, so the ideal DCG is 1.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserResult {
    pub user: usize,
    pub rank: usize,
    pub hr: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub users: Vec<UserResult>,
    pub hr: f64,
    pub ndcg: f64,
}

impl EvalReport {
    /// Aggregates per-user ranks, summing in the given order.
    pub fn from_ranks(k: usize, ranks: &[(usize, usize)]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Eval("evaluation partition is empty".into()));
        }
        let users: Vec<UserResult> = ranks
            .iter()
            .map(|&(user, rank)| UserResult {
                user,
                rank,
                hr: hr_at_k(rank, k),
                ndcg: ndcg_at_k(rank, k),
            })
            .collect();
        let n = users.len() as f64;
        let hr = users.iter().map(|r| r.hr).sum::<f64>() / n;
        let ndcg = users.iter().map(|r| r.ndcg).sum::<f64>() / n;
        Ok(EvalReport { k, users, hr, ndcg })
    }

    /// `metric\tvalue` summary lines.
    pub fn summary_lines(&self) -> Vec<String> {
        vec![
            format!("users\t{}", self.users.len()),
            format!("k\t{}", self.k),
            format!("hr@{}\t{:.6}", self.k, self.hr),
            format!("ndcg@{}\t{:.6}", self.k, self.ndcg),
        ]
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        write_lines(path, self.summary_lines())
    }

    /// `user_id\trank\thr\tndcg` per evaluated user.
    pub fn write_per_user(&self, path: &Path, maps: &EntityMaps) -> Result<()> {
        write_lines(
            path,
            self.users.iter().map(|r| {
                format!(
                    "{}\t{}\t{}\t{:.6}",
                    maps.users.id(r.user),
                    r.rank,
                    r.hr,
                    r.ndcg
                )
            }),
        )
    }
}

/// Evaluates precomputed representations on one partition of the split.
pub fn evaluate_embedded(
    model: &SceneRec<'_>,
    emb: &Embeddings,
    split: &EvalSplit,
    k: usize,
    which: Partition,
) -> Result<EvalReport> {
    let mut ranks = Vec::new();
    for (u, held) in split.partition(which).iter().enumerate() {
        let Some(held) = held else { continue };
        let candidates = held.candidates();
        let scores: Vec<f64> = candidates
            .iter()
            .map(|&i| model.score_reprs(&emb.users[u], &emb.items[i]))
            .collect();
        ranks.push((u, rank_of_first(&scores, &candidates)));
    }
    EvalReport::from_ranks(k, &ranks)
}

/// HR@K and NDCG@K averaged over every user in the chosen partition.
pub fn evaluate(
    model: &SceneRec<'_>,
    split: &EvalSplit,
    k: usize,
    which: Partition,
) -> Result<EvalReport> {
    evaluate_embedded(model, &model.embed_all(), split, k, which)
}

/// Scene-based attention between a candidate and a user's interacted items.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub user: usize,
    pub candidate: usize,
    /// Mean pre-softmax attention score over the interacted items.
    pub average: f64,
    /// `(interacted item, attention score)` in item order.
    pub pairs: Vec<(usize, f64)>,
    pub score: f64,
}

impl Explanation {
    pub fn lines(&self, maps: &EntityMaps) -> Vec<String> {
        let mut out = vec![
            format!("user\t{}", maps.users.id(self.user)),
            format!("candidate\t{}", maps.items.id(self.candidate)),
            format!("score\t{:.6}", self.score),
            format!("average_attention\t{:.6}", self.average),
        ];
        out.extend(
            self.pairs
                .iter()
                .map(|&(i, a)| format!("item\t{}\t{:.6}", maps.items.id(i), a)),
        );
        out
    }
}

pub fn explain(model: &SceneRec<'_>, u: usize, candidate: usize) -> Result<Explanation> {
    let graphs = model.graphs;
    if u >= graphs.n_users() || candidate >= graphs.n_items() {
        return Err(Error::Contract(format!(
            "user {} / item {} out of range",
            u, candidate
        )));
    }
    let items = graphs.bipartite.user_items(u);
    if items.is_empty() {
        return Err(Error::Eval(format!("user {} has no interactions to explain", u)));
    }
    let pairs: Vec<(usize, f64)> = items
        .iter()
        .map(|&x| (x, model.item_attention(candidate, x)))
        .collect();
    let average = pairs.iter().map(|&(_, a)| a).sum::<f64>() / pairs.len() as f64;
    Ok(Explanation {
        user: u,
        candidate,
        average,
        pairs,
        score: model.score(u, candidate),
    })
}
