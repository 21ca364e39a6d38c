//! Reverse-mode differentiation of a [`ForwardTrace`].
//!
//! Gradients flow through every path of the forward pass, including the
//! cosine scores and softmax of the scene-based attention. The relu
//! derivative at exactly zero is taken as zero.

use std::collections::BTreeMap;

use super::forward::{cosine, relu, ForwardTrace, SceneRec};
use super::params::{axpy, dot, ParameterSet, Tensor};

fn relu_grad(upstream: &[f64], pre: &[f64]) -> Vec<f64> {
    upstream
        .iter()
        .zip(pre)
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Backpropagates `upstream` through `relu(w · input + b)`'s affine part:
/// accumulates weight and bias gradients and returns the input gradient.
fn affine_backward(
    w: &Tensor,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
    upstream: &[f64],
    input: &[f64],
) -> Vec<f64> {
    grad_w.outer_acc(upstream, input);
    axpy(1.0, upstream, grad_b.as_mut_slice());
    let mut dx = vec![0.0; input.len()];
    w.transpose_mul_acc(upstream, &mut dx);
    dx
}

/// Gradient of softmax inputs given gradients of its outputs.
pub(crate) fn softmax_backward(weights: &[f64], grad_weights: &[f64]) -> Vec<f64> {
    let inner = dot(weights, grad_weights);
    weights
        .iter()
        .zip(grad_weights)
        .map(|(&w, &g)| w * (g - inner))
        .collect()
}

/// Accumulates `upstream * d cos(a, b) / da` and `/ db` into `grad_a`, `grad_b`.
pub(crate) fn cosine_backward(
    a: &[f64],
    b: &[f64],
    upstream: f64,
    grad_a: &mut [f64],
    grad_b: &mut [f64],
) {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 || upstream == 0.0 {
        return;
    }
    let cos = cosine(a, b);
    let inv = 1.0 / (na * nb);
    for k in 0..a.len() {
        grad_a[k] += upstream * (b[k] * inv - cos * a[k] / (na * na));
        grad_b[k] += upstream * (a[k] * inv - cos * b[k] / (nb * nb));
    }
}

/// Accumulates into `upstream_by_key[key]`, creating a zero entry if needed.
fn add_to(map: &mut BTreeMap<usize, Vec<f64>>, key: usize, values: &[f64]) {
    let entry = map
        .entry(key)
        .or_insert_with(|| vec![0.0; values.len()]);
    axpy(1.0, values, entry);
}

/// Scene-sum gradients for a pair of categories connected by attention.
fn attention_backward(
    scene_sums: &[Vec<f64>],
    grad_scene_sums: &mut [Vec<f64>],
    cp: usize,
    cq: usize,
    upstream: f64,
) {
    let d = scene_sums[cp].len();
    let mut ga = vec![0.0; d];
    let mut gb = vec![0.0; d];
    cosine_backward(&scene_sums[cp], &scene_sums[cq], upstream, &mut ga, &mut gb);
    axpy(1.0, &ga, &mut grad_scene_sums[cp]);
    axpy(1.0, &gb, &mut grad_scene_sums[cq]);
}

/// Accumulates `d(sum_k dscores[k] * scores[k]) / d(theta)` into `grads`.
pub fn backward(
    model: &SceneRec<'_>,
    trace: &ForwardTrace,
    dscores: &[f64],
    grads: &mut ParameterSet,
) {
    assert_eq!(dscores.len(), trace.pairs.len());
    let p = model.params;
    let graphs = model.graphs;
    let variant = trace.variant;
    let d = p.dim;

    let mut grad_users: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut grad_items: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    // score MLP
    for (pair, &g) in trace.pairs.iter().zip(dscores) {
        if g == 0.0 {
            continue;
        }
        let hidden = relu(&pair.hidden_pre);
        axpy(g, &hidden, grads.score_mlp_w2.row_mut(0));
        grads.score_mlp_b2.as_mut_slice()[0] += g;
        let dh: Vec<f64> = p.score_mlp_w2.row(0).iter().map(|&w| g * w).collect();
        let da = relu_grad(&dh, &pair.hidden_pre);
        let input = concat(&trace.users[&pair.user].out, &trace.items[&pair.item].out);
        let dx = affine_backward(
            &p.score_mlp_w1,
            &mut grads.score_mlp_w1,
            &mut grads.score_mlp_b1,
            &da,
            &input,
        );
        add_to(&mut grad_users, pair.user, &dx[..d]);
        add_to(&mut grad_items, pair.item, &dx[d..]);
    }

    let n_cats = graphs.n_categories();
    let mut grad_category_out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut grad_scene_sums = vec![vec![0.0; d]; n_cats];

    // items
    for (&i, g_out) in &grad_items {
        let st = &trace.items[&i];
        let hidden = relu(&st.hidden_pre);
        let dh = affine_backward(
            &p.item_mlp_w2,
            &mut grads.item_mlp_w2,
            &mut grads.item_mlp_b2,
            g_out,
            &hidden,
        );
        let da = relu_grad(&dh, &st.hidden_pre);
        let dx = affine_backward(
            &p.item_mlp_w1,
            &mut grads.item_mlp_w1,
            &mut grads.item_mlp_b1,
            &da,
            &concat(&st.user_side, &st.scene_side),
        );

        // user-side
        let da_user = relu_grad(&dx[..d], &st.user_pre);
        let d_user_sum = affine_backward(
            &p.item_user_w,
            &mut grads.item_user_w,
            &mut grads.item_user_b,
            &da_user,
            &st.user_sum,
        );
        for &u in graphs.bipartite.item_users(i) {
            axpy(1.0, &d_user_sum, grads.user_emb.row_mut(u));
        }

        // scene-side
        let da_scene = relu_grad(&dx[d..], &st.scene_pre);
        let d_ctx = affine_backward(
            &p.item_scene_w,
            &mut grads.item_scene_w,
            &mut grads.item_scene_b,
            &da_scene,
            &concat(&st.category_context, &st.item_context),
        );
        if variant.uses_categories() {
            add_to(&mut grad_category_out, st.category, &d_ctx[..d]);
        }
        let d_item_ctx = &d_ctx[d..];
        let mut grad_weights = Vec::with_capacity(st.neighbors.len());
        for (&q, &w) in st.neighbors.iter().zip(&st.weights) {
            axpy(w, d_item_ctx, grads.item_emb.row_mut(q));
            grad_weights.push(dot(p.item_emb.row(q), d_item_ctx));
        }
        if variant.uses_attention() && !st.neighbors.is_empty() {
            let grad_raw = softmax_backward(&st.weights, &grad_weights);
            for (&q, &g) in st.neighbors.iter().zip(&grad_raw) {
                let cq = graphs.scene.item_category(q);
                attention_backward(&trace.scene_sums, &mut grad_scene_sums, st.category, cq, g);
            }
        }
    }

    // categories
    for (&c, g_out) in &grad_category_out {
        let st = &trace.categories[&c];
        let da = relu_grad(g_out, &st.pre);
        let dx = affine_backward(
            &p.category_w,
            &mut grads.category_w,
            &mut grads.category_b,
            &da,
            &concat(&trace.scene_sums[c], &st.context),
        );
        axpy(1.0, &dx[..d], &mut grad_scene_sums[c]);
        let d_context = &dx[d..];
        let mut grad_weights = Vec::with_capacity(st.neighbors.len());
        for (&q, &w) in st.neighbors.iter().zip(&st.weights) {
            axpy(w, d_context, grads.category_emb.row_mut(q));
            grad_weights.push(dot(p.category_emb.row(q), d_context));
        }
        if variant.uses_attention() && !st.neighbors.is_empty() {
            let grad_raw = softmax_backward(&st.weights, &grad_weights);
            for (&q, &g) in st.neighbors.iter().zip(&grad_raw) {
                attention_backward(&trace.scene_sums, &mut grad_scene_sums, c, q, g);
            }
        }
    }

    // scene sums
    for (c, g) in grad_scene_sums.iter().enumerate() {
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        for &s in graphs.scene.category_scenes(c) {
            axpy(1.0, g, grads.scene_emb.row_mut(s));
        }
    }

    // users
    for (&u, g_out) in &grad_users {
        let st = &trace.users[&u];
        let da = relu_grad(g_out, &st.pre);
        let d_sum = affine_backward(
            &p.user_w,
            &mut grads.user_w,
            &mut grads.user_b,
            &da,
            &st.item_sum,
        );
        for &i in graphs.bipartite.user_items(u) {
            axpy(1.0, &d_sum, grads.item_emb.row_mut(i));
        }
    }
}
