use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::EntityCounts;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} tensor",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// `self · x + bias`.
    pub fn affine(&self, x: &[f64], bias: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(bias.len(), self.rows);
        (0..self.rows)
            .map(|r| dot(self.row(r), x) + bias[r])
            .collect()
    }

    /// `dx += selfᵀ · dy`.
    pub fn transpose_mul_acc(&self, dy: &[f64], dx: &mut [f64]) {
        for (r, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, self.row(r), dx);
            }
        }
    }

    /// `self += dy · xᵀ`.
    pub fn outer_acc(&mut self, dy: &[f64], x: &[f64]) {
        for (r, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, x, self.row_mut(r));
            }
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a · x`.
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Model variant: the full model or one of its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    /// No item-item edges in the scene graph.
    NoItem,
    /// No category or scene nodes; only item-item relations remain.
    NoScene,
    /// Uniform neighbor weights instead of scene-based attention.
    NoAttention,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoItem,
        Variant::NoScene,
        Variant::NoAttention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoItem => "noitem",
            Variant::NoScene => "nosce",
            Variant::NoAttention => "noatt",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Full => 0,
            Variant::NoItem => 1,
            Variant::NoScene => 2,
            Variant::NoAttention => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Variant::ALL.iter().copied().find(|v| v.code() == code)
    }

    pub(crate) fn uses_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoItem)
    }

    pub(crate) fn uses_categories(self) -> bool {
        self != Variant::NoScene
    }

    pub(crate) fn uses_item_edges(self) -> bool {
        self != Variant::NoItem
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {:?} (expected full, noitem, nosce or noatt)",
                    s
                ))
            })
    }
}

/// Number of tensors in a [`ParameterSet`].
pub const N_TENSORS: usize = 20;

/// Every learnable tensor of the model.
///
/// Biases are stored as `1 x n` tensors. The order of [`ParameterSet::tensors`]
/// is fixed and is the order used by checkpoints:
///
/// | # | name | shape |
/// |---|------|-------|
/// | 0 | `user_emb` | users x d |
/// | 1 | `item_emb` | items x d |
/// | 2 | `category_emb` | categories x d |
/// | 3 | `scene_emb` | scenes x d |
/// | 4, 5 | `user_w`, `user_b` | d x d, 1 x d |
/// | 6, 7 | `item_user_w`, `item_user_b` | d x d, 1 x d |
/// | 8, 9 | `category_w`, `category_b` | d x 2d, 1 x d |
/// | 10, 11 | `item_scene_w`, `item_scene_b` | d x 2d, 1 x d |
/// | 12, 13 | `item_mlp_w1`, `item_mlp_b1` | d x 2d, 1 x d |
/// | 14, 15 | `item_mlp_w2`, `item_mlp_b2` | d x d, 1 x d |
/// | 16, 17 | `score_mlp_w1`, `score_mlp_b1` | d x 2d, 1 x d |
/// | 18, 19 | `score_mlp_w2`, `score_mlp_b2` | 1 x d, 1 x 1 |
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub dim: usize,
    pub user_emb: Tensor,
    pub item_emb: Tensor,
    pub category_emb: Tensor,
    pub scene_emb: Tensor,
    pub user_w: Tensor,
    pub user_b: Tensor,
    pub item_user_w: Tensor,
    pub item_user_b: Tensor,
    pub category_w: Tensor,
    pub category_b: Tensor,
    pub item_scene_w: Tensor,
    pub item_scene_b: Tensor,
    pub item_mlp_w1: Tensor,
    pub item_mlp_b1: Tensor,
    pub item_mlp_w2: Tensor,
    pub item_mlp_b2: Tensor,
    pub score_mlp_w1: Tensor,
    pub score_mlp_b1: Tensor,
    pub score_mlp_w2: Tensor,
    pub score_mlp_b2: Tensor,
}

pub const TENSOR_NAMES: [&str; N_TENSORS] = [
    "user_emb",
    "item_emb",
    "category_emb",
    "scene_emb",
    "user_w",
    "user_b",
    "item_user_w",
    "item_user_b",
    "category_w",
    "category_b",
    "item_scene_w",
    "item_scene_b",
    "item_mlp_w1",
    "item_mlp_b1",
    "item_mlp_w2",
    "item_mlp_b2",
    "score_mlp_w1",
    "score_mlp_b1",
    "score_mlp_w2",
    "score_mlp_b2",
];

/// Whether tensor `k` (checkpoint order) is a bias vector.
pub fn is_bias(k: usize) -> bool {
    k >= 4 && k % 2 == 1
}

impl ParameterSet {
    /// Expected `(rows, cols)` of every tensor, in checkpoint order.
    pub fn shapes(dim: usize, counts: EntityCounts) -> [(usize, usize); N_TENSORS] {
        let d = dim;
        [
            (counts.users, d),
            (counts.items, d),
            (counts.categories, d),
            (counts.scenes, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, 2 * d),
            (1, d),
            (d, 2 * d),
            (1, d),
            (d, 2 * d),
            (1, d),
            (d, d),
            (1, d),
            (d, 2 * d),
            (1, d),
            (1, d),
            (1, 1),
        ]
    }

    pub fn zeros(dim: usize, counts: EntityCounts) -> Self {
        let tensors = Self::shapes(dim, counts)
            .iter()
            .map(|&(r, c)| Tensor::zeros(r, c))
            .collect();
        Self::from_tensors(dim, tensors).expect("shapes are consistent by construction")
    }

    /// Embedding tables and weight matrices uniform in `[-1/sqrt(d), 1/sqrt(d)]`,
    /// biases zero.
    pub fn init<R: Rng>(dim: usize, counts: EntityCounts, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let tensors = Self::shapes(dim, counts)
            .iter()
            .enumerate()
            .map(|(k, &(r, c))| {
                if is_bias(k) {
                    Tensor::zeros(r, c)
                } else {
                    Tensor::uniform(r, c, bound, rng)
                }
            })
            .collect();
        Self::from_tensors(dim, tensors).expect("shapes are consistent by construction")
    }

    /// Rebuilds a parameter set from tensors in checkpoint order.
    pub fn from_tensors(dim: usize, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != N_TENSORS {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensors, got {}",
                N_TENSORS,
                tensors.len()
            )));
        }
        let counts = EntityCounts {
            users: tensors[0].rows(),
            items: tensors[1].rows(),
            categories: tensors[2].rows(),
            scenes: tensors[3].rows(),
        };
        for (k, (t, want)) in tensors.iter().zip(Self::shapes(dim, counts)).enumerate() {
            if t.shape() != want {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    TENSOR_NAMES[k],
                    t.shape(),
                    want
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        Ok(ParameterSet {
            dim,
            user_emb: next(),
            item_emb: next(),
            category_emb: next(),
            scene_emb: next(),
            user_w: next(),
            user_b: next(),
            item_user_w: next(),
            item_user_b: next(),
            category_w: next(),
            category_b: next(),
            item_scene_w: next(),
            item_scene_b: next(),
            item_mlp_w1: next(),
            item_mlp_b1: next(),
            item_mlp_w2: next(),
            item_mlp_b2: next(),
            score_mlp_w1: next(),
            score_mlp_b1: next(),
            score_mlp_w2: next(),
            score_mlp_b2: next(),
        })
    }

    pub fn counts(&self) -> EntityCounts {
        EntityCounts {
            users: self.user_emb.rows(),
            items: self.item_emb.rows(),
            categories: self.category_emb.rows(),
            scenes: self.scene_emb.rows(),
        }
    }

    pub fn tensors(&self) -> [&Tensor; N_TENSORS] {
        [
            &self.user_emb,
            &self.item_emb,
            &self.category_emb,
            &self.scene_emb,
            &self.user_w,
            &self.user_b,
            &self.item_user_w,
            &self.item_user_b,
            &self.category_w,
            &self.category_b,
            &self.item_scene_w,
            &self.item_scene_b,
            &self.item_mlp_w1,
            &self.item_mlp_b1,
            &self.item_mlp_w2,
            &self.item_mlp_b2,
            &self.score_mlp_w1,
            &self.score_mlp_b1,
            &self.score_mlp_w2,
            &self.score_mlp_b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; N_TENSORS] {
        [
            &mut self.user_emb,
            &mut self.item_emb,
            &mut self.category_emb,
            &mut self.scene_emb,
            &mut self.user_w,
            &mut self.user_b,
            &mut self.item_user_w,
            &mut self.item_user_b,
            &mut self.category_w,
            &mut self.category_b,
            &mut self.item_scene_w,
            &mut self.item_scene_b,
            &mut self.item_mlp_w1,
            &mut self.item_mlp_b1,
            &mut self.item_mlp_w2,
            &mut self.item_mlp_b2,
            &mut self.score_mlp_w1,
            &mut self.score_mlp_b1,
            &mut self.score_mlp_w2,
            &mut self.score_mlp_b2,
        ]
    }

    /// Squared l2 norm over every entry of every tensor.
    pub fn sum_squares(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_squares()).sum()
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.as_slice().iter().all(|v| v.is_finite()))
    }

    /// Sets every value to zero, keeping shapes.
    pub fn zero_out(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}
