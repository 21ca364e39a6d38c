//! Seeded synthetic datasets with planted scene preferences.
//!
//! Items are spread evenly over categories, each scene is a random set of
//! categories, and each user prefers one or two scenes. Most interactions come
//! from items in a preferred scene, the rest are uniform noise, so the scene
//! hierarchy carries real signal about what a user will click next.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;

use crate::coview::{build_layers, write_layers, SessionLog, DEFAULT_CATEGORY_TOPK, DEFAULT_ITEM_TOPK};
use crate::error::{Error, Result};
use crate::graph::{
    EntityMaps, IdMap, CATEGORY_CATEGORY_FILE, INTERACTIONS_FILE, ITEMS_FILE, ITEM_ITEM_FILE,
    SCENE_CATEGORY_FILE, SESSIONS_FILE,
};
use crate::graph::Dataset;
use crate::rng::{stream, STREAM_SYNTH};
use crate::tsv::{read_rows, write_lines};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const SESSION_LENGTH: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_scenes: usize,
    pub n_categories: usize,
    pub n_items: usize,
    pub n_users: usize,
    pub cats_per_scene: usize,
    pub interactions_per_user: usize,
    pub noise_rate: f64,
    pub seed: u64,
    pub item_topk: usize,
    pub cat_topk: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_scenes: 8,
            n_categories: 20,
            n_items: 1000,
            n_users: 200,
            cats_per_scene: 2,
            interactions_per_user: 50,
            noise_rate: 0.2,
            seed: 0,
            item_topk: DEFAULT_ITEM_TOPK,
            cat_topk: DEFAULT_CATEGORY_TOPK,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_scenes", self.n_scenes),
            ("n_categories", self.n_categories),
            ("n_items", self.n_items),
            ("n_users", self.n_users),
            ("cats_per_scene", self.cats_per_scene),
            ("interactions_per_user", self.interactions_per_user),
            ("item_topk", self.item_topk),
            ("cat_topk", self.cat_topk),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{} must be at least 1", name)));
        }
        if self.cats_per_scene > self.n_categories {
            return Err(Error::Config(format!(
                "cats_per_scene ({}) exceeds n_categories ({})",
                self.cats_per_scene, self.n_categories
            )));
        }
        if self.n_items < self.n_categories {
            return Err(Error::Config(format!(
                "n_items ({}) must be at least n_categories ({}) so every category has an item",
                self.n_items, self.n_categories
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!(
                "noise_rate {} is outside [0, 1]",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

/// The planted structure and raw interaction log, before anything is written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthData {
    pub item_cat: Vec<usize>,
    /// Categories of each scene, sorted.
    pub scenes: Vec<Vec<usize>>,
    /// Preferred scenes of each user, sorted.
    pub preferred: Vec<Vec<usize>>,
    /// Interactions of each user, in draw order.
    pub interactions: Vec<Vec<usize>>,
}

impl SynthData {
    /// Items whose category belongs to one of the user's preferred scenes.
    pub fn preferred_items(&self, u: usize) -> Vec<usize> {
        let cats: BTreeSet<usize> = self.preferred[u]
            .iter()
            .flat_map(|&s| self.scenes[s].iter().copied())
            .collect();
        (0..self.item_cat.len())
            .filter(|i| cats.contains(&self.item_cat[*i]))
            .collect()
    }

    pub fn sessions(&self) -> SessionLog {
        SessionLog {
            sessions: self
                .interactions
                .iter()
                .enumerate()
                .flat_map(|(u, items)| {
                    items
                        .chunks(SESSION_LENGTH)
                        .map(move |run| (u, run.to_vec()))
                })
                .collect(),
        }
    }
}

fn draw_interactions<R: Rng>(
    rng: &mut R,
    pool: &[usize],
    n_items: usize,
    count: usize,
    noise_rate: f64,
) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let noisy = rng.gen::<f64>() < noise_rate;
        let item = if noisy {
            loop {
                let i = rng.gen_range(0..n_items);
                if !chosen.contains(&i) || chosen.len() >= n_items {
                    break i;
                }
            }
        } else {
            let fresh: Vec<usize> = pool.iter().copied().filter(|i| !chosen.contains(i)).collect();
            if fresh.is_empty() {
                // pool exhausted: repeat a preferred item
                pool[rng.gen_range(0..pool.len())]
            } else {
                fresh[rng.gen_range(0..fresh.len())]
            }
        };
        chosen.insert(item);
        out.push(item);
    }
    out
}

/// Draws the planted structure and interactions for `cfg`.
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, STREAM_SYNTH);
    let item_cat: Vec<usize> = (0..cfg.n_items).map(|j| j % cfg.n_categories).collect();
    let scenes: Vec<Vec<usize>> = (0..cfg.n_scenes)
        .map(|_| {
            let mut cats = sample(&mut rng, cfg.n_categories, cfg.cats_per_scene).into_vec();
            cats.sort_unstable();
            cats
        })
        .collect();
    let mut data = SynthData {
        item_cat,
        scenes,
        preferred: Vec::with_capacity(cfg.n_users),
        interactions: Vec::with_capacity(cfg.n_users),
    };
    for u in 0..cfg.n_users {
        let n_pref = if cfg.n_scenes >= 2 { rng.gen_range(1..=2) } else { 1 };
        let mut pref = sample(&mut rng, cfg.n_scenes, n_pref).into_vec();
        pref.sort_unstable();
        data.preferred.push(pref);
        let pool = data.preferred_items(u);
        let items = draw_interactions(
            &mut rng,
            &pool,
            cfg.n_items,
            cfg.interactions_per_user,
            cfg.noise_rate,
        );
        data.interactions.push(items);
    }
    Ok(data)
}

fn user_id(u: usize) -> String {
    format!("u{}", u)
}
fn item_id(i: usize) -> String {
    format!("i{}", i)
}
fn category_id(c: usize) -> String {
    format!("c{}", c)
}
fn scene_id(s: usize) -> String {
    format!("s{}", s)
}

/// Row counts written by [`generate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub seed: u64,
    pub rows: Vec<(&'static str, usize)>,
}

impl Manifest {
    pub fn rows_of(&self, file: &str) -> Option<usize> {
        self.rows.iter().find(|(f, _)| *f == file).map(|&(_, n)| n)
    }
}

/// Writes a complete dataset directory for `cfg`.
pub fn generate(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let data = synthesize(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let maps = EntityMaps {
        users: IdMap::from_ids((0..cfg.n_users).map(user_id))?,
        items: IdMap::from_ids((0..cfg.n_items).map(item_id))?,
        categories: IdMap::from_ids((0..cfg.n_categories).map(category_id))?,
        scenes: IdMap::from_ids((0..cfg.n_scenes).map(scene_id))?,
    };

    let interactions: Vec<String> = data
        .interactions
        .iter()
        .enumerate()
        .flat_map(|(u, items)| items.iter().map(move |&i| format!("{}\t{}", user_id(u), item_id(i))))
        .collect();
    write_lines(&dir.join(INTERACTIONS_FILE), &interactions)?;

    write_lines(
        &dir.join(ITEMS_FILE),
        data.item_cat
            .iter()
            .enumerate()
            .map(|(i, &c)| format!("{}\t{}", item_id(i), category_id(c))),
    )?;

    let memberships: Vec<String> = data
        .scenes
        .iter()
        .enumerate()
        .flat_map(|(s, cats)| cats.iter().map(move |&c| format!("{}\t{}", scene_id(s), category_id(c))))
        .collect();
    write_lines(&dir.join(SCENE_CATEGORY_FILE), &memberships)?;

    let log = data.sessions();
    write_lines(
        &dir.join(SESSIONS_FILE),
        log.sessions.iter().map(|(u, items)| {
            let ids: Vec<String> = items.iter().map(|&i| item_id(i)).collect();
            format!("{}\t{}", user_id(*u), ids.join(","))
        }),
    )?;

    let layers = build_layers(&log, &data.item_cat, cfg.n_categories, cfg.item_topk, cfg.cat_topk)?;
    write_layers(dir, &layers, &maps)?;

    let manifest = Manifest {
        seed: cfg.seed,
        rows: vec![
            (INTERACTIONS_FILE, interactions.len()),
            (ITEMS_FILE, cfg.n_items),
            (SCENE_CATEGORY_FILE, memberships.len()),
            (SESSIONS_FILE, log.sessions.len()),
            (ITEM_ITEM_FILE, layers.item_edges.len()),
            (CATEGORY_CATEGORY_FILE, layers.category_edges.len()),
        ],
    };
    let mut lines = vec![
        format!("seed\t{}", cfg.seed),
        format!("n_users\t{}", cfg.n_users),
        format!("n_items\t{}", cfg.n_items),
        format!("n_categories\t{}", cfg.n_categories),
        format!("n_scenes\t{}", cfg.n_scenes),
        format!("cats_per_scene\t{}", cfg.cats_per_scene),
        format!("interactions_per_user\t{}", cfg.interactions_per_user),
        format!("noise_rate\t{}", cfg.noise_rate),
        format!("item_topk\t{}", cfg.item_topk),
        format!("cat_topk\t{}", cfg.cat_topk),
    ];
    lines.extend(manifest.rows.iter().map(|(f, n)| format!("rows:{}\t{}", f, n)));
    write_lines(&dir.join(MANIFEST_FILE), lines)?;
    Ok(manifest)
}

/// Entity and relation counts of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub scenes: usize,
    pub interaction_rows: usize,
    pub user_item: usize,
    pub item_category: usize,
    pub item_item: usize,
    pub category_category: usize,
    pub category_scene: usize,
}

impl Summary {
    /// `name\tcount` lines.
    pub fn lines(&self) -> Vec<String> {
        [
            ("users", self.users),
            ("items", self.items),
            ("categories", self.categories),
            ("scenes", self.scenes),
            ("interaction rows", self.interaction_rows),
            ("user-item", self.user_item),
            ("item-category", self.item_category),
            ("item-item", self.item_item),
            ("category-category", self.category_category),
            ("category-scene", self.category_scene),
        ]
        .iter()
        .map(|(k, v)| format!("{}\t{}", k, v))
        .collect()
    }
}

/// Loads a dataset directory and counts its entities and relations.
///
/// Edge counts are distinct undirected edges after symmetrization.
pub fn describe(dir: &Path) -> Result<Summary> {
    let ds = Dataset::load(dir)?;
    let interaction_rows = read_rows(&dir.join(INTERACTIONS_FILE), 2)?.len();
    let counts = ds.maps.counts();
    Ok(Summary {
        users: counts.users,
        items: counts.items,
        categories: counts.categories,
        scenes: counts.scenes,
        interaction_rows,
        user_item: ds.bipartite.n_edges(),
        item_category: ds.scene.n_items(),
        item_item: ds.scene.n_item_edges(),
        category_category: ds.scene.n_category_edges(),
        category_scene: ds.scene.n_memberships(),
    })
}
