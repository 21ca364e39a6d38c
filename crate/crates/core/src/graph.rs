//! User-item bipartite graph and the three-layer scene graph.
//!
//! Both graphs are immutable once built. Every adjacency list is sorted by
//! dense index and free of duplicates, so iteration order (and therefore every
//! floating-point reduction over neighbors) is deterministic.
//!
//! The scene graph stores:
//!
//! - item-item edges (undirected, unweighted),
//! - a single category per item,
//! - category-category edges (undirected, unweighted),
//! - category-scene memberships in both directions.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::tsv::{file_label, read_rows};

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const ITEMS_FILE: &str = "items.tsv";
pub const ITEM_ITEM_FILE: &str = "item_item.tsv";
pub const CATEGORY_CATEGORY_FILE: &str = "category_category.tsv";
pub const SCENE_CATEGORY_FILE: &str = "scene_category.tsv";
pub const SESSIONS_FILE: &str = "sessions.tsv";

/// Bijection between external string ids and dense indices for one entity class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from a list of ids; duplicates are rejected.
    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = IdMap::new();
        for id in ids {
            let id = id.into();
            if map.index.contains_key(&id) {
                return Err(Error::Validation(format!("duplicate id {:?}", id)));
            }
            map.insert(id);
        }
        Ok(map)
    }

    /// Returns the index of `id`, assigning the next dense index if it is new.
    pub fn insert(&mut self, id: impl Into<String>) -> usize {
        let id = id.into();
        if let Some(&idx) = self.index.get(&id) {
            return idx;
        }
        let idx = self.ids.len();
        self.index.insert(id.clone(), idx);
        self.ids.push(id);
        idx
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Dense index spaces for users, items, categories and scenes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityMaps {
    pub users: IdMap,
    pub items: IdMap,
    pub categories: IdMap,
    pub scenes: IdMap,
}

impl EntityMaps {
    /// Derives the index spaces from a dataset directory, in order of first
    /// appearance: users from `interactions.tsv`; items from `items.tsv`;
    /// categories from `items.tsv`, then `scene_category.tsv`, then
    /// `category_category.tsv`; scenes from `scene_category.tsv`.
    pub fn from_dataset(dir: &Path) -> Result<Self> {
        let mut maps = EntityMaps::default();
        for row in read_rows(&dir.join(INTERACTIONS_FILE), 2)? {
            maps.users.insert(row.fields[0].as_str());
        }
        for row in read_rows(&dir.join(ITEMS_FILE), 2)? {
            maps.items.insert(row.fields[0].as_str());
            maps.categories.insert(row.fields[1].as_str());
        }
        for row in read_rows(&dir.join(SCENE_CATEGORY_FILE), 2)? {
            maps.scenes.insert(row.fields[0].as_str());
            maps.categories.insert(row.fields[1].as_str());
        }
        for row in read_rows(&dir.join(CATEGORY_CATEGORY_FILE), 2)? {
            maps.categories.insert(row.fields[0].as_str());
            maps.categories.insert(row.fields[1].as_str());
        }
        Ok(maps)
    }

    pub fn counts(&self) -> EntityCounts {
        EntityCounts {
            users: self.users.len(),
            items: self.items.len(),
            categories: self.categories.len(),
            scenes: self.scenes.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityCounts {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub scenes: usize,
}

fn sorted_dedup(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn resolve(
    map: &IdMap,
    id: &str,
    kind: &'static str,
    file: &str,
    line: usize,
) -> Result<usize> {
    map.get(id).ok_or_else(|| Error::UnknownId {
        file: file.to_string(),
        line,
        kind,
        id: id.to_string(),
    })
}

/// User-item interactions stored as binary presence in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    ui: Vec<Vec<usize>>,
    iu: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds the graph from `(user, item)` pairs; duplicates collapse.
    pub fn from_edges<I>(n_users: usize, n_items: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut ui = vec![Vec::new(); n_users];
        let mut iu = vec![Vec::new(); n_items];
        for (u, i) in edges {
            if u >= n_users || i >= n_items {
                return Err(Error::Contract(format!(
                    "edge ({}, {}) out of range for {} users / {} items",
                    u, i, n_users, n_items
                )));
            }
            ui[u].push(i);
            iu[i].push(u);
        }
        Ok(BipartiteGraph {
            ui: ui.into_iter().map(sorted_dedup).collect(),
            iu: iu.into_iter().map(sorted_dedup).collect(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.ui.len()
    }

    pub fn n_items(&self) -> usize {
        self.iu.len()
    }

    pub fn n_edges(&self) -> usize {
        self.ui.iter().map(Vec::len).sum()
    }

    /// Items the user interacted with, sorted.
    pub fn user_items(&self, u: usize) -> &[usize] {
        &self.ui[u]
    }

    /// Users who interacted with the item, sorted.
    pub fn item_users(&self, i: usize) -> &[usize] {
        &self.iu[i]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.ui
            .get(u)
            .map(|items| items.binary_search(&i).is_ok())
            .unwrap_or(false)
    }

    /// All edges in `(user, item)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ui
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }
}

/// Loads `interactions.tsv` (user id, item id).
pub fn load_bipartite(path: &Path, maps: &EntityMaps) -> Result<BipartiteGraph> {
    let label = file_label(path);
    let mut edges = Vec::new();
    for row in read_rows(path, 2)? {
        let u = resolve(&maps.users, &row.fields[0], "user", &label, row.line)?;
        let i = resolve(&maps.items, &row.fields[1], "item", &label, row.line)?;
        edges.push((u, i));
    }
    BipartiteGraph::from_edges(maps.users.len(), maps.items.len(), edges)
}

/// The item / category / scene hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneGraph {
    pub(crate) ii: Vec<Vec<usize>>,
    pub(crate) item_cat: Vec<usize>,
    pub(crate) cc: Vec<Vec<usize>>,
    pub(crate) cat_scenes: Vec<Vec<usize>>,
    pub(crate) scene_cats: Vec<Vec<usize>>,
}

fn symmetric_adjacency(n: usize, edges: &[(usize, usize)], what: &str) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    let mut loops = 0usize;
    for &(p, q) in edges {
        if p == q {
            loops += 1;
            continue;
        }
        adj[p].push(q);
        adj[q].push(p);
    }
    if loops > 0 {
        warn!("dropped {} self-loop(s) from {} edges", loops, what);
    }
    adj.into_iter().map(sorted_dedup).collect()
}

impl SceneGraph {
    /// Builds and validates a scene graph from dense-index edge lists.
    ///
    /// Item-item and category-category edges are symmetrized by union;
    /// self-loops are dropped with a warning.
    pub fn new(
        item_cat: Vec<usize>,
        n_categories: usize,
        n_scenes: usize,
        item_edges: &[(usize, usize)],
        category_edges: &[(usize, usize)],
        memberships: &[(usize, usize)],
    ) -> Result<Self> {
        let n_items = item_cat.len();
        if let Some(&c) = item_cat.iter().find(|&&c| c >= n_categories) {
            return Err(Error::Contract(format!("category index {} out of range", c)));
        }
        for &(p, q) in item_edges {
            if p >= n_items || q >= n_items {
                return Err(Error::Contract(format!("item edge ({}, {}) out of range", p, q)));
            }
        }
        for &(p, q) in category_edges {
            if p >= n_categories || q >= n_categories {
                return Err(Error::Contract(format!(
                    "category edge ({}, {}) out of range",
                    p, q
                )));
            }
        }
        let mut cat_scenes = vec![Vec::new(); n_categories];
        let mut scene_cats = vec![Vec::new(); n_scenes];
        for &(s, c) in memberships {
            if s >= n_scenes || c >= n_categories {
                return Err(Error::Contract(format!(
                    "membership (scene {}, category {}) out of range",
                    s, c
                )));
            }
            scene_cats[s].push(c);
            cat_scenes[c].push(s);
        }
        let graph = SceneGraph {
            ii: symmetric_adjacency(n_items, item_edges, "item-item"),
            item_cat,
            cc: symmetric_adjacency(n_categories, category_edges, "category-category"),
            cat_scenes: cat_scenes.into_iter().map(sorted_dedup).collect(),
            scene_cats: scene_cats.into_iter().map(sorted_dedup).collect(),
        };
        if let Some(s) = graph.scene_cats.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!("scene {} has no categories", s)));
        }
        Ok(graph)
    }

    pub fn n_items(&self) -> usize {
        self.item_cat.len()
    }

    pub fn n_categories(&self) -> usize {
        self.cc.len()
    }

    pub fn n_scenes(&self) -> usize {
        self.scene_cats.len()
    }

    pub fn item_category(&self, i: usize) -> usize {
        self.item_cat[i]
    }

    pub fn item_neighbors(&self, i: usize) -> &[usize] {
        &self.ii[i]
    }

    pub fn category_neighbors(&self, c: usize) -> &[usize] {
        &self.cc[c]
    }

    pub fn category_scenes(&self, c: usize) -> &[usize] {
        &self.cat_scenes[c]
    }

    pub fn scene_categories(&self, s: usize) -> &[usize] {
        &self.scene_cats[s]
    }

    /// Scenes containing the item's category.
    pub fn item_scenes(&self, i: usize) -> &[usize] {
        &self.cat_scenes[self.item_cat[i]]
    }

    /// Copy of this graph with every item-item edge removed.
    pub fn without_item_edges(&self) -> SceneGraph {
        SceneGraph {
            ii: vec![Vec::new(); self.ii.len()],
            ..self.clone()
        }
    }

    pub fn n_item_edges(&self) -> usize {
        self.ii.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn n_category_edges(&self) -> usize {
        self.cc.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn n_memberships(&self) -> usize {
        self.scene_cats.iter().map(Vec::len).sum()
    }
}

/// Loads the scene graph from `items.tsv`, `item_item.tsv`,
/// `category_category.tsv` and `scene_category.tsv`.
pub fn load_scene_graph(
    items_path: &Path,
    item_item_path: &Path,
    category_category_path: &Path,
    scene_category_path: &Path,
    maps: &EntityMaps,
) -> Result<SceneGraph> {
    let label = file_label(items_path);
    let mut item_cat: Vec<Option<usize>> = vec![None; maps.items.len()];
    for row in read_rows(items_path, 2)? {
        let i = resolve(&maps.items, &row.fields[0], "item", &label, row.line)?;
        let c = resolve(&maps.categories, &row.fields[1], "category", &label, row.line)?;
        if item_cat[i].is_some() {
            return Err(Error::Validation(format!(
                "item {:?} listed with more than one category (line {})",
                row.fields[0], row.line
            )));
        }
        item_cat[i] = Some(c);
    }
    let item_cat = item_cat
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| {
                Error::Validation(format!("item {:?} has no category", maps.items.id(i)))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let label = file_label(item_item_path);
    let mut item_edges = Vec::new();
    for row in read_rows(item_item_path, 3)? {
        let p = resolve(&maps.items, &row.fields[0], "item", &label, row.line)?;
        let q = resolve(&maps.items, &row.fields[1], "item", &label, row.line)?;
        row.fields[2]
            .parse::<f64>()
            .map_err(|_| Error::parse(&label, row.line, "weight is not a number"))?;
        item_edges.push((p, q));
    }

    let label = file_label(category_category_path);
    let mut category_edges = Vec::new();
    for row in read_rows(category_category_path, 2)? {
        let p = resolve(&maps.categories, &row.fields[0], "category", &label, row.line)?;
        let q = resolve(&maps.categories, &row.fields[1], "category", &label, row.line)?;
        category_edges.push((p, q));
    }

    let label = file_label(scene_category_path);
    let mut memberships = Vec::new();
    for row in read_rows(scene_category_path, 2)? {
        let s = resolve(&maps.scenes, &row.fields[0], "scene", &label, row.line)?;
        let c = resolve(&maps.categories, &row.fields[1], "category", &label, row.line)?;
        memberships.push((s, c));
    }

    SceneGraph::new(
        item_cat,
        maps.categories.len(),
        maps.scenes.len(),
        &item_edges,
        &category_edges,
        &memberships,
    )
    .map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {}", label, msg)),
        other => other,
    })
}

/// Everything loaded from one dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub maps: EntityMaps,
    pub bipartite: BipartiteGraph,
    pub scene: SceneGraph,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let maps = EntityMaps::from_dataset(dir)?;
        let bipartite = load_bipartite(&dir.join(INTERACTIONS_FILE), &maps)?;
        let scene = load_scene_graph(
            &dir.join(ITEMS_FILE),
            &dir.join(ITEM_ITEM_FILE),
            &dir.join(CATEGORY_CATEGORY_FILE),
            &dir.join(SCENE_CATEGORY_FILE),
            &maps,
        )?;
        Ok(Dataset {
            maps,
            bipartite,
            scene,
        })
    }
}

/// Neighbor relations the model queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Items of a user.
    UserItem,
    /// Users of an item.
    ItemUser,
    /// Item-item neighbors.
    ItemItem,
    /// Category-category neighbors.
    CategoryCategory,
    /// Scenes of a category.
    CategoryScene,
    /// Scenes of an item's category.
    ItemScene,
}

/// A bipartite graph paired with the scene graph over the same items.
#[derive(Debug, Clone)]
pub struct Graphs {
    pub bipartite: BipartiteGraph,
    pub scene: SceneGraph,
}

impl Graphs {
    pub fn new(bipartite: BipartiteGraph, scene: SceneGraph) -> Result<Self> {
        if bipartite.n_items() != scene.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "bipartite graph has {} items, scene graph has {}",
                bipartite.n_items(),
                scene.n_items()
            )));
        }
        Ok(Graphs { bipartite, scene })
    }

    pub fn n_users(&self) -> usize {
        self.bipartite.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.scene.n_items()
    }

    pub fn n_categories(&self) -> usize {
        self.scene.n_categories()
    }

    pub fn n_scenes(&self) -> usize {
        self.scene.n_scenes()
    }

    /// Sorted neighbor list for `index` under `relation`.
    pub fn neighbors(&self, relation: Relation, index: usize) -> Result<&[usize]> {
        let bound = match relation {
            Relation::UserItem => self.n_users(),
            Relation::ItemUser | Relation::ItemItem | Relation::ItemScene => self.n_items(),
            Relation::CategoryCategory | Relation::CategoryScene => self.n_categories(),
        };
        if index >= bound {
            return Err(Error::Contract(format!(
                "{:?} query index {} out of range (size {})",
                relation, index, bound
            )));
        }
        Ok(match relation {
            Relation::UserItem => self.bipartite.user_items(index),
            Relation::ItemUser => self.bipartite.item_users(index),
            Relation::ItemItem => self.scene.item_neighbors(index),
            Relation::CategoryCategory => self.scene.category_neighbors(index),
            Relation::CategoryScene => self.scene.category_scenes(index),
            Relation::ItemScene => self.scene.item_scenes(index),
        })
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    InteractionMirror { user: usize, item: usize },
    DuplicateEntry { relation: &'static str, node: usize, neighbor: usize },
    UnsortedList { relation: &'static str, node: usize },
    OutOfRange { relation: &'static str, node: usize, neighbor: usize },
    AsymmetricEdge { relation: &'static str, from: usize, to: usize },
    SelfLoop { relation: &'static str, node: usize },
    MembershipMirror { category: usize, scene: usize },
    EmptyScene { scene: usize },
    ItemCountMismatch { bipartite: usize, scene: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InteractionMirror { user, item } => {
                write!(f, "interaction (user {}, item {}) is not mirrored", user, item)
            }
            Violation::DuplicateEntry { relation, node, neighbor } => {
                write!(f, "{}: node {} lists {} more than once", relation, node, neighbor)
            }
            Violation::UnsortedList { relation, node } => {
                write!(f, "{}: adjacency of node {} is not sorted", relation, node)
            }
            Violation::OutOfRange { relation, node, neighbor } => {
                write!(f, "{}: node {} lists out-of-range index {}", relation, node, neighbor)
            }
            Violation::AsymmetricEdge { relation, from, to } => {
                write!(f, "{}: edge {} -> {} has no reverse edge", relation, from, to)
            }
            Violation::SelfLoop { relation, node } => {
                write!(f, "{}: self-loop on node {}", relation, node)
            }
            Violation::MembershipMirror { category, scene } => write!(
                f,
                "membership (category {}, scene {}) is not mirrored",
                category, scene
            ),
            Violation::EmptyScene { scene } => {
                write!(f, "scene {} has no categories (|s| >= 1 violated)", scene)
            }
            Violation::ItemCountMismatch { bipartite, scene } => write!(
                f,
                "bipartite graph has {} items but scene graph has {}",
                bipartite, scene
            ),
        }
    }
}

/// Every invariant violation found; empty means the graphs are well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_lists(
    relation: &'static str,
    adj: &[Vec<usize>],
    bound: usize,
    out: &mut Vec<Violation>,
) {
    for (node, list) in adj.iter().enumerate() {
        for w in list.windows(2) {
            if w[0] == w[1] {
                out.push(Violation::DuplicateEntry {
                    relation,
                    node,
                    neighbor: w[0],
                });
            } else if w[0] > w[1] {
                out.push(Violation::UnsortedList { relation, node });
            }
        }
        for &neighbor in list {
            if neighbor >= bound {
                out.push(Violation::OutOfRange {
                    relation,
                    node,
                    neighbor,
                });
            }
        }
    }
}

fn check_symmetric(relation: &'static str, adj: &[Vec<usize>], out: &mut Vec<Violation>) {
    for (p, list) in adj.iter().enumerate() {
        for &q in list {
            if q == p {
                out.push(Violation::SelfLoop { relation, node: p });
            } else if q < adj.len() && !adj[q].contains(&p) {
                out.push(Violation::AsymmetricEdge {
                    relation,
                    from: p,
                    to: q,
                });
            }
        }
    }
}

/// Checks every structural invariant of both graphs.
pub fn validate(bg: &BipartiteGraph, sg: &SceneGraph) -> ValidationReport {
    let mut v = Vec::new();
    if bg.n_items() != sg.n_items() {
        v.push(Violation::ItemCountMismatch {
            bipartite: bg.n_items(),
            scene: sg.n_items(),
        });
    }
    check_lists("user-item", &bg.ui, bg.n_items(), &mut v);
    check_lists("item-user", &bg.iu, bg.n_users(), &mut v);
    for (u, items) in bg.ui.iter().enumerate() {
        for &i in items {
            if i < bg.iu.len() && !bg.iu[i].contains(&u) {
                v.push(Violation::InteractionMirror { user: u, item: i });
            }
        }
    }
    for (i, users) in bg.iu.iter().enumerate() {
        for &u in users {
            if u < bg.ui.len() && !bg.ui[u].contains(&i) {
                v.push(Violation::InteractionMirror { user: u, item: i });
            }
        }
    }

    let n_cats = sg.n_categories();
    for (i, &c) in sg.item_cat.iter().enumerate() {
        if c >= n_cats {
            v.push(Violation::OutOfRange {
                relation: "item-category",
                node: i,
                neighbor: c,
            });
        }
    }
    check_lists("item-item", &sg.ii, sg.n_items(), &mut v);
    check_symmetric("item-item", &sg.ii, &mut v);
    check_lists("category-category", &sg.cc, n_cats, &mut v);
    check_symmetric("category-category", &sg.cc, &mut v);
    check_lists("category-scene", &sg.cat_scenes, sg.n_scenes(), &mut v);
    check_lists("scene-category", &sg.scene_cats, n_cats, &mut v);
    for (c, scenes) in sg.cat_scenes.iter().enumerate() {
        for &s in scenes {
            if s < sg.scene_cats.len() && !sg.scene_cats[s].contains(&c) {
                v.push(Violation::MembershipMirror { category: c, scene: s });
            }
        }
    }
    for (s, cats) in sg.scene_cats.iter().enumerate() {
        if cats.is_empty() {
            v.push(Violation::EmptyScene { scene: s });
        }
        for &c in cats {
            if c < sg.cat_scenes.len() && !sg.cat_scenes[c].contains(&s) {
                v.push(Violation::MembershipMirror { category: c, scene: s });
            }
        }
    }
    ValidationReport { violations: v }
}
