//! Item-item and category-category layers from view sessions.
//!
//! Two items are linked when they are viewed in the same session; the edge
//! weight is the number of sessions in which both appear. Each node then keeps
//! its `k` heaviest neighbors and the kept edges are symmetrized by union.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::EntityMaps;
use crate::tsv::{file_label, read_rows, write_lines};

/// Default per-item neighbor cap.
pub const DEFAULT_ITEM_TOPK: usize = 300;
/// Default per-category neighbor cap.
pub const DEFAULT_CATEGORY_TOPK: usize = 100;

/// View sessions: `(user, items in view order)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionLog {
    pub sessions: Vec<(usize, Vec<usize>)>,
}

impl SessionLog {
    /// Loads `sessions.tsv`: user id, then comma-separated item ids.
    pub fn load(path: &Path, maps: &EntityMaps) -> Result<Self> {
        let label = file_label(path);
        let mut sessions = Vec::new();
        for row in read_rows(path, 2)? {
            let user = maps.users.get(&row.fields[0]).ok_or_else(|| Error::UnknownId {
                file: label.clone(),
                line: row.line,
                kind: "user",
                id: row.fields[0].clone(),
            })?;
            let items = row.fields[1]
                .split(',')
                .map(|id| {
                    let id = id.trim();
                    maps.items.get(id).ok_or_else(|| Error::UnknownId {
                        file: label.clone(),
                        line: row.line,
                        kind: "item",
                        id: id.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sessions.push((user, items));
        }
        Ok(SessionLog { sessions })
    }
}

/// Symmetric co-occurrence counts; no self entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedAdjacency {
    adj: Vec<BTreeMap<usize, u64>>,
}

impl WeightedAdjacency {
    pub fn new(n_nodes: usize) -> Self {
        WeightedAdjacency {
            adj: vec![BTreeMap::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn weight(&self, p: usize, q: usize) -> u64 {
        self.adj[p].get(&q).copied().unwrap_or(0)
    }

    pub fn neighbors(&self, p: usize) -> &BTreeMap<usize, u64> {
        &self.adj[p]
    }

    /// Adds `w` to the undirected pair `{p, q}`; self pairs are ignored.
    pub fn add(&mut self, p: usize, q: usize, w: u64) {
        if p == q {
            return;
        }
        *self.adj[p].entry(q).or_insert(0) += w;
        *self.adj[q].entry(p).or_insert(0) += w;
    }

    /// Sums another count map into this one.
    pub fn merge(&mut self, other: &WeightedAdjacency) {
        for (p, row) in other.adj.iter().enumerate() {
            for (&q, &w) in row {
                *self.adj[p].entry(q).or_insert(0) += w;
            }
        }
    }

    /// Undirected pairs `(p, q, w)` with `p < q`, in ascending order.
    pub fn pairs(&self) -> Vec<(usize, usize, u64)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(p, row)| {
                row.range(p + 1..).map(move |(&q, &w)| (p, q, w))
            })
            .collect()
    }
}

fn count_pairs<I>(groups: I, n_nodes: usize) -> WeightedAdjacency
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut adj = WeightedAdjacency::new(n_nodes);
    for mut group in groups {
        group.sort_unstable();
        group.dedup();
        for (a, &p) in group.iter().enumerate() {
            for &q in &group[a + 1..] {
                adj.add(p, q, 1);
            }
        }
    }
    adj
}

/// Co-view counts over `n_items` items: each session adds one to every
/// unordered pair of distinct items it contains.
pub fn coview_edges(log: &SessionLog, n_items: usize) -> WeightedAdjacency {
    count_pairs(log.sessions.iter().map(|(_, items)| items.clone()), n_items)
}

/// Each node's `k` heaviest neighbors, ties broken by smaller index.
pub fn topk_selection(adj: &WeightedAdjacency, k: usize) -> Vec<Vec<usize>> {
    adj.adj
        .iter()
        .map(|row| {
            let mut ranked: Vec<(usize, u64)> = row.iter().map(|(&q, &w)| (q, w)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut kept: Vec<usize> = ranked.into_iter().take(k).map(|(q, _)| q).collect();
            kept.sort_unstable();
            kept
        })
        .collect()
}

/// Keeps each node's top-`k` neighbors and symmetrizes the union.
pub fn topk_prune(adj: &WeightedAdjacency, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::Config("top-k cap must be at least 1".into()));
    }
    let selected = topk_selection(adj, k);
    let mut out = vec![Vec::new(); adj.n_nodes()];
    for (p, keep) in selected.iter().enumerate() {
        for &q in keep {
            out[p].push(q);
            out[q].push(p);
        }
    }
    for list in &mut out {
        list.sort_unstable();
        list.dedup();
    }
    Ok(out)
}

/// Category co-view counts: sessions are mapped to categories, then counted
/// like items. Same-category pairs never form edges.
pub fn category_counts(
    log: &SessionLog,
    item_cat: &[usize],
    n_categories: usize,
) -> WeightedAdjacency {
    count_pairs(
        log.sessions
            .iter()
            .map(|(_, items)| items.iter().map(|&i| item_cat[i]).collect()),
        n_categories,
    )
}

/// Pruned, symmetric category adjacency.
pub fn category_coview(
    log: &SessionLog,
    item_cat: &[usize],
    n_categories: usize,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    topk_prune(&category_counts(log, item_cat, n_categories), k)
}

/// Pruned item and category layers, with the pre-prune counts kept as edge
/// weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltLayers {
    pub item_edges: Vec<(usize, usize, u64)>,
    pub category_edges: Vec<(usize, usize, u64)>,
}

fn weighted_pairs(adj: &[Vec<usize>], counts: &WeightedAdjacency) -> Vec<(usize, usize, u64)> {
    adj.iter()
        .enumerate()
        .flat_map(|(p, list)| {
            list.iter()
                .filter(move |&&q| q > p)
                .map(move |&q| (p, q, counts.weight(p, q)))
        })
        .collect()
}

/// Runs the full co-view pipeline over a session log.
pub fn build_layers(
    log: &SessionLog,
    item_cat: &[usize],
    n_categories: usize,
    item_topk: usize,
    cat_topk: usize,
) -> Result<BuiltLayers> {
    let item_counts = coview_edges(log, item_cat.len());
    let items = topk_prune(&item_counts, item_topk)?;
    let cat_counts = category_counts(log, item_cat, n_categories);
    let cats = topk_prune(&cat_counts, cat_topk)?;
    Ok(BuiltLayers {
        item_edges: weighted_pairs(&items, &item_counts),
        category_edges: weighted_pairs(&cats, &cat_counts),
    })
}

/// Writes `item_item.tsv` and `category_category.tsv` into `dir`.
pub fn write_layers(dir: &Path, layers: &BuiltLayers, maps: &EntityMaps) -> Result<()> {
    write_lines(
        &dir.join(crate::graph::ITEM_ITEM_FILE),
        layers.item_edges.iter().map(|&(p, q, w)| {
            format!("{}\t{}\t{}", maps.items.id(p), maps.items.id(q), w)
        }),
    )?;
    write_lines(
        &dir.join(crate::graph::CATEGORY_CATEGORY_FILE),
        layers
            .category_edges
            .iter()
            .map(|&(p, q, _)| format!("{}\t{}", maps.categories.id(p), maps.categories.id(q))),
    )
}

/// Builds both co-view layers for a dataset directory from its
/// `sessions.tsv`, `items.tsv` and `interactions.tsv`, writing the layer files
/// into `out`.
///
/// Existing layer files in `dir` are not read.
pub fn build_graph_dir(
    dir: &Path,
    out: &Path,
    item_topk: usize,
    cat_topk: usize,
) -> Result<BuiltLayers> {
    let mut maps = EntityMaps::default();
    for row in read_rows(&dir.join(crate::graph::INTERACTIONS_FILE), 2)? {
        maps.users.insert(row.fields[0].as_str());
    }
    let items_path = dir.join(crate::graph::ITEMS_FILE);
    let label = file_label(&items_path);
    let rows = read_rows(&items_path, 2)?;
    for row in &rows {
        if maps.items.get(&row.fields[0]).is_some() {
            return Err(Error::Validation(format!(
                "{}: item {:?} listed more than once (line {})",
                label, row.fields[0], row.line
            )));
        }
        maps.items.insert(row.fields[0].as_str());
        maps.categories.insert(row.fields[1].as_str());
    }
    let item_cat: Vec<usize> = rows
        .iter()
        .map(|row| maps.categories.get(&row.fields[1]).expect("inserted above"))
        .collect();
    let sessions_path = dir.join(crate::graph::SESSIONS_FILE);
    for row in read_rows(&sessions_path, 2)? {
        maps.users.insert(row.fields[0].as_str());
    }
    let log = SessionLog::load(&sessions_path, &maps)?;
    let layers = build_layers(&log, &item_cat, maps.categories.len(), item_topk, cat_topk)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_layers(out, &layers, &maps)?;
    Ok(layers)
}
