//! Forward pass.
//!
//! Users aggregate the base embeddings of the items they interacted with.
//! Items combine a user-side embedding (aggregated user embeddings) with a
//! scene-side embedding propagated down the scene hierarchy:
//!
//! ```text
//! h_S(c)  = sum of scene embeddings of c's scenes
//! h_C(c)  = sum over category neighbors q of alpha(c, q) * e_q
//! m(c)    = relu(W_c [h_S(c) | h_C(c)] + b_c)
//! h_I(i)  = sum over item neighbors q of beta(i, q) * e_q
//! m_S(i)  = relu(W_s [m(cat(i)) | h_I(i)] + b_s)
//! m(i)    = F_item([m_U(i) | m_S(i)])
//! score   = F_score([m(u) | m(i)])
//! ```
//!
//! `alpha` and `beta` are softmax-normalized cosine similarities between the
//! scene sums of the two endpoints' categories. Both MLPs are
//! affine -> relu -> affine.

use std::collections::BTreeMap;

use super::params::{axpy, dot, ParameterSet, Variant};
use crate::graph::Graphs;

pub(crate) fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

/// Cosine similarity; zero when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

#[derive(Debug, Clone)]
pub(crate) struct UserState {
    pub item_sum: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct CategoryState {
    pub neighbors: Vec<usize>,
    /// Pre-softmax cosine scores; empty when attention is disabled.
    pub raw: Vec<f64>,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct ItemState {
    pub category: usize,
    pub user_sum: Vec<f64>,
    pub user_pre: Vec<f64>,
    pub user_side: Vec<f64>,
    pub neighbors: Vec<usize>,
    pub raw: Vec<f64>,
    pub weights: Vec<f64>,
    pub item_context: Vec<f64>,
    pub category_context: Vec<f64>,
    pub scene_pre: Vec<f64>,
    pub scene_side: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct PairState {
    pub user: usize,
    pub item: usize,
    pub hidden_pre: Vec<f64>,
    pub score: f64,
}

/// Intermediates of one batched forward pass, kept for backpropagation.
///
/// Maps are ordered by entity index so that every reduction in the backward
/// pass happens in a fixed order.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub(crate) variant: Variant,
    pub(crate) scene_sums: Vec<Vec<f64>>,
    pub(crate) users: BTreeMap<usize, UserState>,
    pub(crate) categories: BTreeMap<usize, CategoryState>,
    pub(crate) items: BTreeMap<usize, ItemState>,
    pub(crate) pairs: Vec<PairState>,
}

impl ForwardTrace {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn scores(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.score).collect()
    }

    pub fn user_repr(&self, u: usize) -> Option<&[f64]> {
        self.users.get(&u).map(|s| s.out.as_slice())
    }

    pub fn item_repr(&self, i: usize) -> Option<&[f64]> {
        self.items.get(&i).map(|s| s.out.as_slice())
    }

    pub fn category_repr(&self, c: usize) -> Option<&[f64]> {
        self.categories.get(&c).map(|s| s.out.as_slice())
    }

    /// Normalized category attention weights over `CC(c)`.
    pub fn category_weights(&self, c: usize) -> Option<&[f64]> {
        self.categories.get(&c).map(|s| s.weights.as_slice())
    }

    /// Normalized item attention weights over `II(i)`.
    pub fn item_weights(&self, i: usize) -> Option<&[f64]> {
        self.items.get(&i).map(|s| s.weights.as_slice())
    }

    /// Pre-softmax category attention scores; empty without attention.
    pub fn category_scores(&self, c: usize) -> Option<&[f64]> {
        self.categories.get(&c).map(|s| s.raw.as_slice())
    }

    /// Pre-softmax item attention scores; empty without attention.
    pub fn item_scores(&self, i: usize) -> Option<&[f64]> {
        self.items.get(&i).map(|s| s.raw.as_slice())
    }

    /// Every relu input computed during the pass.
    pub fn relu_inputs(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.users.values() {
            out.extend_from_slice(&s.pre);
        }
        for s in self.categories.values() {
            out.extend_from_slice(&s.pre);
        }
        for s in self.items.values() {
            out.extend_from_slice(&s.user_pre);
            out.extend_from_slice(&s.scene_pre);
            out.extend_from_slice(&s.hidden_pre);
        }
        for p in &self.pairs {
            out.extend_from_slice(&p.hidden_pre);
        }
        out
    }
}

/// Scene-based recommender bound to a parameter set and its graphs.
#[derive(Debug, Clone, Copy)]
pub struct SceneRec<'a> {
    pub params: &'a ParameterSet,
    pub graphs: &'a Graphs,
    pub variant: Variant,
}

impl<'a> SceneRec<'a> {
    pub fn new(params: &'a ParameterSet, graphs: &'a Graphs, variant: Variant) -> Self {
        SceneRec {
            params,
            graphs,
            variant,
        }
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn sum_rows(&self, table: &super::params::Tensor, rows: &[usize]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for &r in rows {
            axpy(1.0, table.row(r), &mut acc);
        }
        acc
    }

    pub(crate) fn user_state(&self, u: usize) -> UserState {
        let p = self.params;
        let item_sum = self.sum_rows(&p.item_emb, self.graphs.bipartite.user_items(u));
        let pre = p.user_w.affine(&item_sum, p.user_b.as_slice());
        let out = relu(&pre);
        UserState { item_sum, pre, out }
    }

    /// User representation `m(u)`.
    pub fn user_embed(&self, u: usize) -> Vec<f64> {
        self.user_state(u).out
    }

    fn item_user_parts(&self, i: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.params;
        let user_sum = self.sum_rows(&p.user_emb, self.graphs.bipartite.item_users(i));
        let pre = p.item_user_w.affine(&user_sum, p.item_user_b.as_slice());
        let out = relu(&pre);
        (user_sum, pre, out)
    }

    /// User-side item representation `m_U(i)`.
    pub fn item_user_embed(&self, i: usize) -> Vec<f64> {
        self.item_user_parts(i).2
    }

    /// Sum of the scene embeddings of category `c`'s scenes.
    pub fn scene_sum(&self, c: usize) -> Vec<f64> {
        self.sum_rows(&self.params.scene_emb, self.graphs.scene.category_scenes(c))
    }

    pub(crate) fn all_scene_sums(&self) -> Vec<Vec<f64>> {
        (0..self.graphs.n_categories())
            .map(|c| self.scene_sum(c))
            .collect()
    }

    /// Raw (pre-softmax) scene-based attention score between two categories.
    pub fn category_attention(&self, cp: usize, cq: usize) -> f64 {
        cosine(&self.scene_sum(cp), &self.scene_sum(cq))
    }

    /// Raw (pre-softmax) scene-based attention score between two items.
    pub fn item_attention(&self, ip: usize, iq: usize) -> f64 {
        let cat = |i| self.graphs.scene.item_category(i);
        self.category_attention(cat(ip), cat(iq))
    }

    fn neighbor_weights(&self, attend: bool, raw: &[f64], n: usize) -> Vec<f64> {
        if attend {
            softmax(raw)
        } else {
            uniform_weights(n)
        }
    }

    pub(crate) fn category_state(&self, c: usize, scene_sums: &[Vec<f64>]) -> CategoryState {
        let p = self.params;
        let neighbors = self.graphs.scene.category_neighbors(c).to_vec();
        let attend = self.variant.uses_attention();
        let raw: Vec<f64> = if attend {
            neighbors
                .iter()
                .map(|&q| cosine(&scene_sums[c], &scene_sums[q]))
                .collect()
        } else {
            Vec::new()
        };
        let weights = self.neighbor_weights(attend, &raw, neighbors.len());
        let mut context = vec![0.0; self.dim()];
        for (&q, &w) in neighbors.iter().zip(&weights) {
            axpy(w, p.category_emb.row(q), &mut context);
        }
        let pre = p
            .category_w
            .affine(&concat(&scene_sums[c], &context), p.category_b.as_slice());
        let out = relu(&pre);
        CategoryState {
            neighbors,
            raw,
            weights,
            context,
            pre,
            out,
        }
    }

    /// Normalized attention weights of category `c` over its neighbors.
    pub fn category_weights(&self, c: usize) -> Vec<f64> {
        self.category_state(c, &self.all_scene_sums()).weights
    }

    /// Category representation `m(c)`.
    pub fn category_repr(&self, c: usize) -> Vec<f64> {
        self.category_state(c, &self.all_scene_sums()).out
    }

    /// Builds an item's state given the scene sums and, unless the variant
    /// drops categories, the representation of the item's category.
    pub(crate) fn item_state(
        &self,
        i: usize,
        scene_sums: &[Vec<f64>],
        category_out: Option<&[f64]>,
    ) -> ItemState {
        let p = self.params;
        let d = self.dim();
        let category = self.graphs.scene.item_category(i);
        let (user_sum, user_pre, user_side) = self.item_user_parts(i);

        let neighbors = if self.variant.uses_item_edges() {
            self.graphs.scene.item_neighbors(i).to_vec()
        } else {
            Vec::new()
        };
        let attend = self.variant.uses_attention();
        let raw: Vec<f64> = if attend {
            neighbors
                .iter()
                .map(|&q| {
                    let cq = self.graphs.scene.item_category(q);
                    cosine(&scene_sums[category], &scene_sums[cq])
                })
                .collect()
        } else {
            Vec::new()
        };
        let weights = self.neighbor_weights(attend, &raw, neighbors.len());
        let mut item_context = vec![0.0; d];
        for (&q, &w) in neighbors.iter().zip(&weights) {
            axpy(w, p.item_emb.row(q), &mut item_context);
        }

        let category_context = match (self.variant.uses_categories(), category_out) {
            (true, Some(m)) => m.to_vec(),
            _ => vec![0.0; d],
        };
        let scene_pre = p.item_scene_w.affine(
            &concat(&category_context, &item_context),
            p.item_scene_b.as_slice(),
        );
        let scene_side = relu(&scene_pre);

        let hidden_pre = p
            .item_mlp_w1
            .affine(&concat(&user_side, &scene_side), p.item_mlp_b1.as_slice());
        let out = p
            .item_mlp_w2
            .affine(&relu(&hidden_pre), p.item_mlp_b2.as_slice());

        ItemState {
            category,
            user_sum,
            user_pre,
            user_side,
            neighbors,
            raw,
            weights,
            item_context,
            category_context,
            scene_pre,
            scene_side,
            hidden_pre,
            out,
        }
    }

    fn standalone_item_state(&self, i: usize) -> ItemState {
        let scene_sums = self.all_scene_sums();
        let category_out = self.variant.uses_categories().then(|| {
            self.category_state(self.graphs.scene.item_category(i), &scene_sums)
                .out
        });
        self.item_state(i, &scene_sums, category_out.as_deref())
    }

    /// Normalized attention weights of item `i` over its item neighbors.
    pub fn item_weights(&self, i: usize) -> Vec<f64> {
        self.standalone_item_state(i).weights
    }

    /// Scene-side item representation `m_S(i)`.
    pub fn item_scene_embed(&self, i: usize) -> Vec<f64> {
        self.standalone_item_state(i).scene_side
    }

    /// General item representation `m(i)`.
    pub fn item_embed(&self, i: usize) -> Vec<f64> {
        self.standalone_item_state(i).out
    }

    pub(crate) fn pair_state(&self, u: usize, user: &[f64], i: usize, item: &[f64]) -> PairState {
        let p = self.params;
        let hidden_pre = p
            .score_mlp_w1
            .affine(&concat(user, item), p.score_mlp_b1.as_slice());
        let score = dot(p.score_mlp_w2.row(0), &relu(&hidden_pre)) + p.score_mlp_b2.as_slice()[0];
        PairState {
            user: u,
            item: i,
            hidden_pre,
            score,
        }
    }

    /// Score from precomputed user and item representations.
    pub fn score_reprs(&self, user: &[f64], item: &[f64]) -> f64 {
        self.pair_state(0, user, 0, item).score
    }

    /// Preference score for `(u, i)`; unbounded, only differences matter.
    pub fn score(&self, u: usize, i: usize) -> f64 {
        self.score_reprs(&self.user_embed(u), &self.item_embed(i))
    }

    /// Scores `(users[k], items[k])` for every `k`, retaining intermediates.
    pub fn forward_batch(&self, users: &[usize], items: &[usize]) -> (Vec<f64>, ForwardTrace) {
        assert_eq!(users.len(), items.len(), "user and item lists differ in length");
        let scene_sums = self.all_scene_sums();

        let mut user_states = BTreeMap::new();
        for &u in users {
            user_states.entry(u).or_insert_with(|| self.user_state(u));
        }
        let mut categories = BTreeMap::new();
        if self.variant.uses_categories() {
            for &i in items {
                let c = self.graphs.scene.item_category(i);
                categories
                    .entry(c)
                    .or_insert_with(|| self.category_state(c, &scene_sums));
            }
        }
        let mut item_states = BTreeMap::new();
        for &i in items {
            if item_states.contains_key(&i) {
                continue;
            }
            let c = self.graphs.scene.item_category(i);
            let category_out = categories.get(&c).map(|s: &CategoryState| s.out.as_slice());
            item_states.insert(i, self.item_state(i, &scene_sums, category_out));
        }
        let pairs: Vec<PairState> = users
            .iter()
            .zip(items)
            .map(|(&u, &i)| self.pair_state(u, &user_states[&u].out, i, &item_states[&i].out))
            .collect();

        let trace = ForwardTrace {
            variant: self.variant,
            scene_sums,
            users: user_states,
            categories,
            items: item_states,
            pairs,
        };
        (trace.scores(), trace)
    }

    /// Representations of every user and item, for bulk scoring.
    pub fn embed_all(&self) -> Embeddings {
        let scene_sums = self.all_scene_sums();
        let category_out: Vec<Option<Vec<f64>>> = (0..self.graphs.n_categories())
            .map(|c| {
                self.variant
                    .uses_categories()
                    .then(|| self.category_state(c, &scene_sums).out)
            })
            .collect();
        let users = (0..self.graphs.n_users())
            .map(|u| self.user_state(u).out)
            .collect();
        let items = (0..self.graphs.n_items())
            .map(|i| {
                let c = self.graphs.scene.item_category(i);
                self.item_state(i, &scene_sums, category_out[c].as_deref())
                    .out
            })
            .collect();
        Embeddings { users, items }
    }
}

/// Cached user and item representations.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
}
