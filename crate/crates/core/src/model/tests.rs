use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{BipartiteGraph, Graphs, SceneGraph};

fn set(t: &mut Tensor, values: &[f64]) {
    t.as_mut_slice().copy_from_slice(values);
}

fn identity(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d * d];
    for k in 0..d {
        v[k * d + k] = 1.0;
    }
    v
}

/// `[0 | I]`, selecting the second half of a `2d` input.
fn select_second(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d * 2 * d];
    for k in 0..d {
        v[k * 2 * d + d + k] = 1.0;
    }
    v
}

/// `[I | 0]`, selecting the first half of a `2d` input.
fn select_first(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d * 2 * d];
    for k in 0..d {
        v[k * 2 * d + k] = 1.0;
    }
    v
}

fn graphs(
    n_users: usize,
    interactions: &[(usize, usize)],
    item_cat: Vec<usize>,
    n_cats: usize,
    n_scenes: usize,
    item_edges: &[(usize, usize)],
    cat_edges: &[(usize, usize)],
    memberships: &[(usize, usize)],
) -> Graphs {
    let n_items = item_cat.len();
    let bg = BipartiteGraph::from_edges(n_users, n_items, interactions.iter().copied()).unwrap();
    let sg = SceneGraph::new(item_cat, n_cats, n_scenes, item_edges, cat_edges, memberships)
        .unwrap();
    Graphs::new(bg, sg).unwrap()
}

fn zero_params(g: &Graphs, d: usize) -> ParameterSet {
    ParameterSet::zeros(
        d,
        crate::graph::EntityCounts {
            users: g.n_users(),
            items: g.n_items(),
            categories: g.n_categories(),
            scenes: g.n_scenes(),
        },
    )
}

fn two_item_graph() -> Graphs {
    // user 0 -> items 0, 1; user 1 -> nothing
    graphs(2, &[(0, 0), (0, 1)], vec![0, 0, 0], 1, 1, &[], &[], &[(0, 0)])
}

#[test]
fn user_embed_hand_values() {
    let g = two_item_graph();
    let mut p = zero_params(&g, 2);
    set(&mut p.user_w, &identity(2));
    set(&mut p.item_emb, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.user_embed(0), vec![1.0, 1.0]);
    assert_eq!(m.user_embed(1), vec![0.0, 0.0]);

    set(&mut p.user_b, &[-5.0, -5.0]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.user_embed(0), vec![0.0, 0.0]);
}

#[test]
fn item_user_embed_hand_values() {
    // item 0 <- users 0, 1; item 1 <- user 2 (zero embedding); item 2 cold
    let g = graphs(3, &[(0, 0), (1, 0), (2, 1)], vec![0, 0, 0], 1, 1, &[], &[], &[(0, 0)]);
    let mut p = zero_params(&g, 2);
    set(&mut p.item_user_w, &identity(2));
    set(&mut p.user_emb, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    set(&mut p.item_user_b, &[0.25, -0.5]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_user_embed(0), vec![1.25, 0.5]);
    assert_eq!(m.item_user_embed(1), vec![0.25, 0.0]);
    assert_eq!(m.item_user_embed(2), vec![0.25, 0.0]);

    set(&mut p.item_user_b, &[0.0, 0.0]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_user_embed(0), vec![1.0, 1.0]);
}

/// Categories: 0 in scenes {0, 1}, 1 in {0}, 2 in none.
fn scene_toy() -> (Graphs, ParameterSet) {
    let g = graphs(
        1,
        &[],
        vec![0, 1, 2],
        3,
        2,
        &[],
        &[(0, 1)],
        &[(0, 0), (1, 0), (0, 1)],
    );
    let mut p = zero_params(&g, 2);
    set(&mut p.scene_emb, &[1.0, 0.0, 0.0, 1.0]);
    (g, p)
}

#[test]
fn scene_sums() {
    let (g, p) = scene_toy();
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.scene_sum(0), vec![1.0, 1.0]);
    assert_eq!(m.scene_sum(1), vec![1.0, 0.0]);
    assert_eq!(m.scene_sum(2), vec![0.0, 0.0]);
}

#[test]
fn category_attention_cases() {
    // categories 0 and 1 share the scene set {0}; 2 has none
    let g = graphs(
        1,
        &[],
        vec![0],
        3,
        1,
        &[],
        &[(0, 1)],
        &[(0, 0), (0, 1)],
    );
    let mut p = zero_params(&g, 2);
    set(&mut p.scene_emb, &[0.3, -0.7]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert!((m.category_attention(0, 1) - 1.0).abs() < 1e-15);
    assert_eq!(m.category_attention(0, 2), 0.0);
    // singleton neighbor set
    assert_eq!(m.category_weights(0), vec![1.0]);

    let g = graphs(1, &[], vec![0], 3, 1, &[], &[(0, 1), (0, 2)], &[(0, 0), (0, 1), (0, 2)]);
    let p = zero_params(&g, 2);
    let mut p = p;
    set(&mut p.scene_emb, &[0.3, -0.7]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.category_weights(0), vec![0.5, 0.5]);
}

#[test]
fn category_repr_cases() {
    let g = graphs(1, &[], vec![0], 2, 1, &[], &[], &[(0, 1)]);
    let p = zero_params(&g, 2);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.category_repr(0), vec![0.0, 0.0]);

    // category 0 with the single neighbor 1 whose embedding is (2, 0)
    let g = graphs(1, &[], vec![0], 2, 1, &[], &[(0, 1)], &[(0, 1)]);
    let mut p = zero_params(&g, 2);
    set(&mut p.category_emb, &[0.0, 0.0, 2.0, 0.0]);
    set(&mut p.category_w, &select_second(2));
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.category_repr(0), vec![2.0, 0.0]);
}

#[test]
fn noatt_category_weights_are_uniform() {
    let (g, mut p) = scene_toy();
    // give category 1 a second neighbor so the scene sums differ across neighbors
    let g = graphs(
        1,
        &[],
        g.scene.item_cat.clone(),
        3,
        2,
        &[],
        &[(1, 0), (1, 2)],
        &[(0, 0), (1, 0), (0, 1)],
    );
    set(&mut p.scene_emb, &[1.0, 0.0, 0.0, 1.0]);
    let full = SceneRec::new(&p, &g, Variant::Full).category_weights(1);
    assert!(full[0] != full[1]);
    let noatt = SceneRec::new(&p, &g, Variant::NoAttention).category_weights(1);
    assert_eq!(noatt, vec![0.5, 0.5]);
}

/// Item 0 in category 0; neighbors 1 (cat 0), 2 (cat 1, same scenes) and
/// 3 (cat 2, orthogonal scene).
fn item_attention_toy() -> (Graphs, ParameterSet) {
    let g = graphs(
        1,
        &[],
        vec![0, 0, 1, 2],
        3,
        2,
        &[(0, 1), (0, 2), (0, 3)],
        &[],
        &[(0, 0), (0, 1), (1, 2)],
    );
    let mut p = zero_params(&g, 2);
    set(&mut p.scene_emb, &[1.0, 0.0, 0.0, 1.0]);
    (g, p)
}

#[test]
fn item_attention_cases() {
    let (g, p) = item_attention_toy();
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_attention(0, 1), 1.0);
    assert_eq!(m.item_attention(0, 2), 1.0);
    assert_eq!(m.item_attention(0, 3), 0.0);

    let e = std::f64::consts::E;
    let expected = [e / (2.0 * e + 1.0), e / (2.0 * e + 1.0), 1.0 / (2.0 * e + 1.0)];
    let w = m.item_weights(0);
    for (a, b) in w.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{:?}", w);
    }
    // singleton neighbor set
    assert_eq!(m.item_weights(3), vec![1.0]);
}

#[test]
fn item_scene_embed_cases() {
    // II(0) = {1}; W_ii selects the item context, so m_S = beta * e_1 = e_1
    let g = graphs(1, &[], vec![0, 0], 1, 1, &[(0, 1)], &[], &[(0, 0)]);
    let mut p = zero_params(&g, 2);
    set(&mut p.item_emb, &[0.0, 0.0, 0.75, 0.5]);
    set(&mut p.item_scene_w, &select_second(2));
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_scene_embed(0), vec![0.75, 0.5]);

    // no item neighbors: m_S = relu(W [m_c | 0] + b)
    let g = graphs(1, &[], vec![0], 1, 1, &[], &[], &[(0, 0)]);
    let mut p = zero_params(&g, 2);
    set(&mut p.scene_emb, &[0.5, 1.0]);
    set(&mut p.category_w, &select_first(2));
    set(&mut p.item_scene_w, &select_first(2));
    set(&mut p.item_scene_b, &[0.25, -2.0]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    let m_c = m.category_repr(0);
    assert_eq!(m_c, vec![0.5, 1.0]);
    assert_eq!(m.item_scene_embed(0), vec![0.75, 0.0]);
}

#[test]
fn item_embed_cases() {
    let g = graphs(2, &[(0, 0), (1, 0)], vec![0], 1, 1, &[], &[], &[(0, 0)]);
    let p = zero_params(&g, 2);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_embed(0), vec![0.0, 0.0]);

    let mut p = zero_params(&g, 2);
    set(&mut p.user_emb, &[1.0, 2.0, 0.5, -1.0]);
    set(&mut p.item_user_w, &identity(2));
    set(&mut p.item_mlp_w1, &select_first(2));
    set(&mut p.item_mlp_w2, &identity(2));
    set(&mut p.scene_emb, &[3.0, 3.0]);
    set(&mut p.category_w, &select_first(2));
    set(&mut p.item_scene_w, &select_first(2));
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.item_user_embed(0), vec![1.5, 1.0]);
    assert_eq!(m.item_embed(0), m.item_user_embed(0));
}

#[test]
fn score_cases() {
    let g = two_item_graph();
    let p = zero_params(&g, 3);
    let m = SceneRec::new(&p, &g, Variant::Full);
    assert_eq!(m.score(0, 1), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = ParameterSet::init(3, p.counts(), &mut rng);
    p.score_mlp_w2.fill(0.0);
    set(&mut p.score_mlp_b2, &[0.7]);
    let m = SceneRec::new(&p, &g, Variant::Full);
    for u in 0..2 {
        for i in 0..3 {
            assert_eq!(m.score(u, i), 0.7);
        }
    }
}

/// Independent scalar recomputation of the score for a d = 2 toy with every
/// parameter hand-set.
#[test]
fn score_matches_scalar_recomputation() {
    // user 0 -> items 0, 1; user 1 -> item 0; items 0, 1 in category 0,
    // item 2 in category 1; item edges 0-1, 0-2; category edge 0-1;
    // scene 0 = {0, 1}, scene 1 = {0}
    let g = graphs(
        2,
        &[(0, 0), (0, 1), (1, 0)],
        vec![0, 0, 1],
        2,
        2,
        &[(0, 1), (0, 2)],
        &[(0, 1)],
        &[(0, 0), (0, 1), (1, 0)],
    );
    let mut p = zero_params(&g, 2);
    set(&mut p.user_emb, &[0.5, -0.25, 0.1, 0.4]);
    set(&mut p.item_emb, &[0.2, 0.3, -0.1, 0.6, 0.8, -0.5]);
    set(&mut p.category_emb, &[0.4, 0.1, -0.3, 0.9]);
    set(&mut p.scene_emb, &[1.0, 0.5, -0.5, 1.0]);
    set(&mut p.user_w, &[0.9, -0.2, 0.3, 0.7]);
    set(&mut p.user_b, &[0.05, 0.1]);
    set(&mut p.item_user_w, &[0.6, 0.1, -0.4, 0.8]);
    set(&mut p.item_user_b, &[0.1, 0.2]);
    set(&mut p.category_w, &[0.3, -0.1, 0.5, 0.2, 0.1, 0.4, -0.2, 0.6]);
    set(&mut p.category_b, &[0.0, 0.1]);
    set(&mut p.item_scene_w, &[0.2, 0.3, 0.4, -0.5, -0.1, 0.2, 0.7, 0.3]);
    set(&mut p.item_scene_b, &[0.1, 0.05]);
    set(&mut p.item_mlp_w1, &[0.5, -0.3, 0.2, 0.1, 0.4, 0.6, -0.2, 0.3]);
    set(&mut p.item_mlp_b1, &[0.1, -0.05]);
    set(&mut p.item_mlp_w2, &[0.7, 0.2, -0.4, 0.9]);
    set(&mut p.item_mlp_b2, &[0.0, 0.1]);
    set(&mut p.score_mlp_w1, &[0.3, 0.2, -0.5, 0.4, 0.6, -0.1, 0.2, 0.8]);
    set(&mut p.score_mlp_b1, &[0.05, -0.1]);
    set(&mut p.score_mlp_w2, &[1.2, -0.7]);
    set(&mut p.score_mlp_b2, &[0.3]);

    let relu = |x: f64| x.max(0.0);
    let cos = |a: (f64, f64), b: (f64, f64)| {
        let na = (a.0 * a.0 + a.1 * a.1).sqrt();
        let nb = (b.0 * b.0 + b.1 * b.1).sqrt();
        (a.0 * b.0 + a.1 * b.1) / (na * nb)
    };
    // scene sums: category 0 in scenes {0, 1}, category 1 in {0}
    let hs0 = (1.0 + -0.5, 0.5 + 1.0);
    let hs1 = (1.0, 0.5);

    // user 0: items 0 + 1 = (0.1, 0.9)
    let us = (0.2 - 0.1, 0.3 + 0.6);
    let mu = (
        relu(0.9 * us.0 - 0.2 * us.1 + 0.05),
        relu(0.3 * us.0 + 0.7 * us.1 + 0.1),
    );

    // category 0: single neighbor 1, weight 1
    let hc = (-0.3, 0.9);
    let mc = (
        relu(0.3 * hs0.0 - 0.1 * hs0.1 + 0.5 * hc.0 + 0.2 * hc.1 + 0.0),
        relu(0.1 * hs0.0 + 0.4 * hs0.1 - 0.2 * hc.0 + 0.6 * hc.1 + 0.1),
    );

    // item 0: users 0, 1 -> (0.6, 0.15)
    let is = (0.5 + 0.1, -0.25 + 0.4);
    let mu_i = (
        relu(0.6 * is.0 + 0.1 * is.1 + 0.1),
        relu(-0.4 * is.0 + 0.8 * is.1 + 0.2),
    );
    // neighbors 1 (cat 0) and 2 (cat 1)
    let b1 = cos(hs0, hs0);
    let b2 = cos(hs0, hs1);
    let z = b1.exp() + b2.exp();
    let (w1, w2) = (b1.exp() / z, b2.exp() / z);
    let hi = (w1 * -0.1 + w2 * 0.8, w1 * 0.6 + w2 * -0.5);
    let ms = (
        relu(0.2 * mc.0 + 0.3 * mc.1 + 0.4 * hi.0 - 0.5 * hi.1 + 0.1),
        relu(-0.1 * mc.0 + 0.2 * mc.1 + 0.7 * hi.0 + 0.3 * hi.1 + 0.05),
    );
    let h = (
        relu(0.5 * mu_i.0 - 0.3 * mu_i.1 + 0.2 * ms.0 + 0.1 * ms.1 + 0.1),
        relu(0.4 * mu_i.0 + 0.6 * mu_i.1 - 0.2 * ms.0 + 0.3 * ms.1 - 0.05),
    );
    let mi = (0.7 * h.0 + 0.2 * h.1 + 0.0, -0.4 * h.0 + 0.9 * h.1 + 0.1);
    let r = (
        relu(0.3 * mu.0 + 0.2 * mu.1 - 0.5 * mi.0 + 0.4 * mi.1 + 0.05),
        relu(0.6 * mu.0 - 0.1 * mu.1 + 0.2 * mi.0 + 0.8 * mi.1 - 0.1),
    );
    let expected = 1.2 * r.0 - 0.7 * r.1 + 0.3;

    let m = SceneRec::new(&p, &g, Variant::Full);
    let got = m.score(0, 0);
    assert!((got - expected).abs() < 1e-12, "{} vs {}", got, expected);
}

fn random_instance(seed: u64) -> (Graphs, ParameterSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = 6;
    let n_items = 10;
    let n_cats = 4;
    let n_scenes = 3;
    let item_cat: Vec<usize> = (0..n_items).map(|i| i % n_cats).collect();
    let mut interactions = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            if rng.gen_bool(0.35) {
                interactions.push((u, i));
            }
        }
    }
    let mut item_edges = Vec::new();
    for p in 0..n_items {
        for q in p + 1..n_items {
            if rng.gen_bool(0.3) {
                item_edges.push((p, q));
            }
        }
    }
    let cat_edges = vec![(0, 1), (0, 2), (1, 2), (2, 3)];
    let memberships = vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)];
    let g = graphs(
        n_users,
        &interactions,
        item_cat,
        n_cats,
        n_scenes,
        &item_edges,
        &cat_edges,
        &memberships,
    );
    let mut p = zero_params(&g, 4);
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
    (g, p)
}

#[test]
fn batch_matches_scalar_path() {
    let (g, p) = random_instance(11);
    for variant in Variant::ALL {
        let m = SceneRec::new(&p, &g, variant);
        let (one, _) = m.forward_batch(&[2], &[7]);
        assert_eq!(one[0].to_bits(), m.score(2, 7).to_bits());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let users: Vec<usize> = (0..20).map(|_| rng.gen_range(0..g.n_users())).collect();
        let items: Vec<usize> = (0..20).map(|_| rng.gen_range(0..g.n_items())).collect();
        let (scores, _) = m.forward_batch(&users, &items);
        for k in 0..20 {
            assert_eq!(scores[k].to_bits(), m.score(users[k], items[k]).to_bits());
        }

        let rev_users: Vec<usize> = users.iter().rev().copied().collect();
        let rev_items: Vec<usize> = items.iter().rev().copied().collect();
        let (rev, _) = m.forward_batch(&rev_users, &rev_items);
        let mut expected = scores.clone();
        expected.reverse();
        assert_eq!(rev, expected);

        let emb = m.embed_all();
        for k in 0..20 {
            let s = m.score_reprs(&emb.users[users[k]], &emb.items[items[k]]);
            assert_eq!(s.to_bits(), scores[k].to_bits());
        }
    }
}

#[test]
fn noitem_equals_full_without_item_edges() {
    let (g, p) = random_instance(12);
    let stripped = Graphs::new(g.bipartite.clone(), g.scene.without_item_edges()).unwrap();
    let noitem = SceneRec::new(&p, &g, Variant::NoItem);
    let full = SceneRec::new(&p, &stripped, Variant::Full);
    for i in 0..g.n_items() {
        assert_eq!(noitem.item_scene_embed(i), full.item_scene_embed(i));
        assert_eq!(noitem.item_embed(i), full.item_embed(i));
    }
}

#[test]
fn nosce_uses_uniform_item_weights_and_no_categories() {
    let (g, mut p) = random_instance(13);
    let m = SceneRec::new(&p, &g, Variant::NoScene);
    let before: Vec<Vec<f64>> = (0..g.n_items()).map(|i| m.item_scene_embed(i)).collect();
    for i in 0..g.n_items() {
        let n = g.scene.item_neighbors(i).len();
        assert!(m.item_weights(i).iter().all(|&w| w == 1.0 / n as f64));
    }
    // category and scene tables do not influence the nosce variant
    p.category_emb.fill(9.0);
    p.scene_emb.fill(-3.0);
    p.category_w.fill(1.0);
    let m = SceneRec::new(&p, &g, Variant::NoScene);
    for i in 0..g.n_items() {
        assert_eq!(m.item_scene_embed(i), before[i]);
    }
}

#[test]
fn outputs_finite_and_deterministic() {
    for seed in 0..5 {
        let (g, p) = random_instance(100 + seed);
        for variant in Variant::ALL {
            let m = SceneRec::new(&p, &g, variant);
            for u in 0..g.n_users() {
                for i in 0..g.n_items() {
                    let a = m.score(u, i);
                    assert!(a.is_finite());
                    assert_eq!(a.to_bits(), m.score(u, i).to_bits());
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn attention_rows_are_distributions(seed in 0u64..500) {
        let (g, p) = random_instance(seed);
        let m = SceneRec::new(&p, &g, Variant::Full);
        for c in 0..g.n_categories() {
            let w = m.category_weights(c);
            if !w.is_empty() {
                prop_assert!(w.iter().all(|&x| x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        for i in 0..g.n_items() {
            let w = m.item_weights(i);
            if !w.is_empty() {
                prop_assert!(w.iter().all(|&x| x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn raw_attention_is_symmetric(seed in 0u64..500) {
        let (g, p) = random_instance(seed);
        let m = SceneRec::new(&p, &g, Variant::Full);
        for a in 0..g.n_categories() {
            for b in 0..g.n_categories() {
                prop_assert_eq!(m.category_attention(a, b), m.category_attention(b, a));
            }
        }
        for a in 0..g.n_items() {
            for b in 0..g.n_items() {
                prop_assert_eq!(m.item_attention(a, b), m.item_attention(b, a));
            }
        }
    }

    #[test]
    fn softmax_is_shift_invariant(
        scores in proptest::collection::vec(-5.0f64..5.0, 1..12),
        shift in -50.0f64..50.0,
    ) {
        let base = softmax(&scores);
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        for (a, b) in base.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn noatt_weights_exactly_uniform(seed in 0u64..500) {
        let (g, p) = random_instance(seed);
        let m = SceneRec::new(&p, &g, Variant::NoAttention);
        for c in 0..g.n_categories() {
            let n = g.scene.category_neighbors(c).len();
            prop_assert!(m.category_weights(c).iter().all(|&w| w == 1.0 / n as f64));
        }
        for i in 0..g.n_items() {
            let n = g.scene.item_neighbors(i).len();
            prop_assert!(m.item_weights(i).iter().all(|&w| w == 1.0 / n as f64));
        }
    }

    #[test]
    fn equal_scene_sets_make_attention_uniform(seed in 0u64..300) {
        // every category belongs to exactly the same scenes
        let (g, p) = random_instance(seed);
        let n_cats = g.n_categories();
        let memberships: Vec<(usize, usize)> =
            (0..n_cats).flat_map(|c| [(0, c), (1, c), (2, c)]).collect();
        let sg = SceneGraph::new(
            g.scene.item_cat.clone(),
            n_cats,
            3,
            &g.scene.ii.iter().enumerate()
                .flat_map(|(a, l)| l.iter().map(move |&b| (a, b))).collect::<Vec<_>>(),
            &g.scene.cc.iter().enumerate()
                .flat_map(|(a, l)| l.iter().map(move |&b| (a, b))).collect::<Vec<_>>(),
            &memberships,
        ).unwrap();
        let g = Graphs::new(g.bipartite.clone(), sg).unwrap();
        let full = SceneRec::new(&p, &g, Variant::Full);
        let noatt = SceneRec::new(&p, &g, Variant::NoAttention);
        for i in 0..g.n_items() {
            let a = full.item_scene_embed(i);
            let b = noatt.item_scene_embed(i);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
