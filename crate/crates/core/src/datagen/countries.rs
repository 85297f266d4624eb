//! The countries benchmark: complete a world map's `locatedIn` facts.
//!
//! A world assigns every country a region and, usually, a subregion inside
//! that region; countries are linked by a symmetric `neighborOf` relation.
//! Samples drop location facts of a set of countries:
//!
//! * S1: `locatedIn(c, region)`, recoverable through the subregion;
//! * S2: additionally `locatedIn(c, subregion)`;
//! * S3: additionally `locatedIn(n, region)` for every neighbor `n` of `c`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{stream_rng, DatagenError, LabeledSample};
use crate::dsl::{parse_program, Program};
use crate::kb::{query_universe, IndividualId, QueryScope, Roster, SampleKb, Triple, Vocabulary};
use crate::reasoner::{label_with_model, materialize};

pub const COUNTRIES_ONTOLOGY: &str = "\
@class country, region, subregion.
@relation locatedIn, neighborOf.

locatedIn(X,Z) :- locatedIn(X,Y), locatedIn(Y,Z).
neighborOf(X,Y) :- neighborOf(Y,X).
country(X) :- neighborOf(X,_).
subregion(Y) :- locatedIn(X,Y), locatedIn(Y,Z).
region(Z) :- locatedIn(Y,Z), subregion(Y).

false :- country(X), region(X).
false :- country(X), subregion(X).
false :- region(X), subregion(X).
";

pub fn countries_ontology() -> Program {
    parse_program(COUNTRIES_ONTOLOGY).expect("built-in countries ontology parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum CountriesVersion {
    S1,
    S2,
    S3,
}

impl CountriesVersion {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Some(Self::S1),
            "S2" => Some(Self::S2),
            "S3" => Some(Self::S3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Country {
    pub name: String,
    pub region: String,
    pub subregion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorldData {
    pub countries: Vec<Country>,
    /// Unordered neighbor pairs.
    pub neighbors: Vec<(String, String)>,
}

impl WorldData {
    /// Checks that every subregion lies in exactly one region and neighbor
    /// pairs name known countries, then deduplicates pairs as `(min, max)`.
    pub fn normalized(mut self) -> Result<Self, DatagenError> {
        let mut sub_region: BTreeMap<&str, &str> = BTreeMap::new();
        let mut names = BTreeSet::new();
        for c in &self.countries {
            if !names.insert(c.name.as_str()) {
                return Err(DatagenError::BadWorld(format!("duplicate country {}", c.name)));
            }
            if let Some(s) = &c.subregion {
                if let Some(r) = sub_region.insert(s, &c.region) {
                    if r != c.region {
                        return Err(DatagenError::BadWorld(format!(
                            "subregion {s} lies in both {r} and {}",
                            c.region
                        )));
                    }
                }
            }
        }
        let mut pairs = BTreeSet::new();
        for (a, b) in &self.neighbors {
            for x in [a, b] {
                if !names.contains(x.as_str()) {
                    return Err(DatagenError::BadWorld(format!("unknown neighbor {x}")));
                }
            }
            if a != b {
                pairs.insert(if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) });
            }
        }
        self.neighbors = pairs.into_iter().collect();
        Ok(self)
    }

    pub fn regions(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.countries.iter().map(|c| &c.region).collect();
        set.into_iter().cloned().collect()
    }

    pub fn subregions(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.countries.iter().filter_map(|c| c.subregion.as_ref()).collect();
        set.into_iter().cloned().collect()
    }

    fn without(&self, removed: &BTreeSet<String>) -> WorldData {
        WorldData {
            countries: self.countries.iter().filter(|c| !removed.contains(&c.name)).cloned().collect(),
            neighbors: self
                .neighbors
                .iter()
                .filter(|(a, b)| !removed.contains(a) && !removed.contains(b))
                .cloned()
                .collect(),
        }
    }
}

/// The bundled synthetic world: 60 countries on a 10x6 grid.
pub fn synthetic_world() -> WorldData {
    synthetic_grid_world(10, 6)
}

/// A synthetic world of `cols * rows` countries on a grid.
///
/// Regions are pairs of grid columns; each region except the last is split
/// into a northern and a southern subregion. Countries neighbor their grid
/// neighbors, so borders cross region lines.
pub fn synthetic_grid_world(cols: usize, rows: usize) -> WorldData {
    assert!(cols >= 4 && rows >= 2, "grid too small");
    let regions = cols.div_ceil(2);
    let mut countries = Vec::new();
    let name = |r: usize, c: usize| format!("land{:03}", r * cols + c);
    for r in 0..rows {
        for c in 0..cols {
            let reg = format!("region{}", c / 2);
            let subregion = if c / 2 == regions - 1 {
                None
            } else {
                Some(format!("{reg}_{}", if r < rows / 2 { "north" } else { "south" }))
            };
            countries.push(Country { name: name(r, c), region: reg, subregion });
        }
    }
    let mut neighbors = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                neighbors.push((name(r, c), name(r, c + 1)));
            }
            if r + 1 < rows {
                neighbors.push((name(r, c), name(r + 1, c)));
            }
        }
    }
    WorldData { countries, neighbors }.normalized().expect("synthetic world is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CountriesConfig {
    pub version: CountriesVersion,
    /// Countries per held-out (eval or test) set.
    pub test_size: usize,
    /// Countries whose facts are dropped in each training sample; capped at
    /// half of the eligible countries left after removing held-out sets.
    pub train_drop: usize,
}

impl CountriesConfig {
    pub fn new(version: CountriesVersion) -> Self {
        Self { version, test_size: 20, train_drop: 20 }
    }
}

/// A countries sample with the countries whose facts were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountriesSample {
    pub labeled: LabeledSample,
    pub test_countries: Vec<IndividualId>,
}

/// Generator for one countries dataset instance.
#[derive(Debug, Clone)]
pub struct CountriesGenerator {
    program: Program,
    world: WorldData,
    train_world: WorldData,
    cfg: CountriesConfig,
    seed: u64,
    eval_set: Vec<String>,
    test_set: Vec<String>,
}

impl CountriesGenerator {
    /// Fixes the two disjoint held-out country sets for `seed`.
    pub fn new(world: WorldData, cfg: CountriesConfig, seed: u64) -> Result<Self, DatagenError> {
        if cfg.test_size == 0 {
            return Err(DatagenError::InvalidConfig("test size must be positive"));
        }
        let world = world.normalized()?;
        let mut rng = stream_rng(seed, u64::MAX);
        let mut chosen = BTreeSet::new();
        let eval_set = pick_droppable(&world, cfg.test_size, &chosen, true, &mut rng)?;
        chosen.extend(eval_set.iter().cloned());
        let test_set = pick_droppable(&world, cfg.test_size, &chosen, true, &mut rng)?;
        chosen.extend(test_set.iter().cloned());
        let train_world = world.without(&chosen);
        Ok(Self {
            program: countries_ontology(),
            world,
            train_world,
            cfg,
            seed,
            eval_set,
            test_set,
        })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn held_out(&self) -> (&[String], &[String]) {
        (&self.eval_set, &self.test_set)
    }

    pub fn eval_sample(&self) -> CountriesSample {
        self.build(&self.world, &self.eval_set, true)
    }

    pub fn test_sample(&self) -> CountriesSample {
        self.build(&self.world, &self.test_set, true)
    }

    /// Training sample `index`, drawn from the world without held-out countries.
    pub fn train_sample(&self, index: u64) -> Result<CountriesSample, DatagenError> {
        let mut rng = stream_rng(self.seed, index);
        let eligible = self.train_world.countries.iter().filter(|c| c.subregion.is_some()).count();
        let k = self.cfg.train_drop.min(eligible / 2).max(1);
        let drop = pick_droppable(&self.train_world, k, &BTreeSet::new(), false, &mut rng)?;
        Ok(self.build(&self.train_world, &drop, false))
    }

    fn build(&self, world: &WorldData, dropped: &[String], touching: bool) -> CountriesSample {
        let vocab = &self.program.vocabulary;
        let regions = world.regions();
        let subregions = world.subregions();
        let roster = Roster::from_names(
            regions.iter().chain(&subregions).cloned().chain(world.countries.iter().map(|c| c.name.clone())),
        );
        let truth_kb = world_facts(world, vocab, &roster);
        let mut removed = BTreeSet::new();
        let loc = vocab.relation("locatedIn").expect("declared");
        let id = |n: &str| roster.get(n).expect("interned");
        let by_name: BTreeMap<&str, &Country> = world.countries.iter().map(|c| (c.name.as_str(), c)).collect();
        let dropped_set: BTreeSet<&str> = dropped.iter().map(String::as_str).collect();
        for name in dropped {
            let c = by_name[name.as_str()];
            removed.insert(Triple::relation(id(name), loc, id(&c.region)));
            if self.cfg.version >= CountriesVersion::S2 {
                if let Some(s) = &c.subregion {
                    removed.insert(Triple::relation(id(name), loc, id(s)));
                }
            }
            if self.cfg.version == CountriesVersion::S3 {
                for (a, b) in &world.neighbors {
                    let other = if a == name { b } else if b == name { a } else { continue };
                    if dropped_set.contains(other.as_str()) {
                        continue;
                    }
                    let n = by_name[other.as_str()];
                    removed.insert(Triple::relation(id(other), loc, id(&n.region)));
                }
            }
        }
        let mut kb = SampleKb::new(roster.clone()).with_provenance(
            &format!("countries-{}", self.cfg.version.name()),
            self.seed,
        );
        for t in truth_kb.facts() {
            if !removed.contains(t) {
                kb.insert(*t).expect("same roster");
            }
        }
        let test: Vec<IndividualId> = dropped.iter().map(|n| id(n)).collect();
        let extras: Vec<IndividualId> = regions.iter().chain(&subregions).map(|n| id(n)).collect();
        let scope = if touching {
            QueryScope::Touching { test: &test, class_extras: &extras }
        } else {
            QueryScope::Full
        };
        let universe = query_universe(&kb, vocab, scope);
        let truth = materialize(&self.program, &truth_kb);
        let queries = label_with_model(&truth, vocab, &kb, &universe);
        CountriesSample { labeled: LabeledSample { kb, queries }, test_countries: test }
    }
}

/// Every location and neighbor fact of `world` (neighbors in both directions).
pub fn world_facts(world: &WorldData, vocab: &Vocabulary, roster: &Roster) -> SampleKb {
    let loc = vocab.relation("locatedIn").expect("countries vocabulary");
    let nb = vocab.relation("neighborOf").expect("countries vocabulary");
    let id = |n: &str| roster.get(n).expect("world name in roster");
    let mut kb = SampleKb::new(roster.clone());
    let mut seen_sub = BTreeSet::new();
    for c in &world.countries {
        kb.insert(Triple::relation(id(&c.name), loc, id(&c.region))).expect("in roster");
        if let Some(s) = &c.subregion {
            kb.insert(Triple::relation(id(&c.name), loc, id(s))).expect("in roster");
            if seen_sub.insert(s) {
                kb.insert(Triple::relation(id(s), loc, id(&c.region))).expect("in roster");
            }
        }
    }
    for (a, b) in &world.neighbors {
        kb.insert(Triple::relation(id(a), nb, id(b))).expect("in roster");
        kb.insert(Triple::relation(id(b), nb, id(a))).expect("in roster");
    }
    kb
}

// Picks `k` countries with a subregion, none in `exclude`, such that each keeps
// at least one neighbor outside the picked set. Unless `exact`, a smaller
// non-empty pick is accepted when `k` cannot be reached.
fn pick_droppable<R: Rng + ?Sized>(
    world: &WorldData,
    k: usize,
    exclude: &BTreeSet<String>,
    exact: bool,
    rng: &mut R,
) -> Result<Vec<String>, DatagenError> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in &world.neighbors {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut pool: Vec<&str> = world
        .countries
        .iter()
        .filter(|c| c.subregion.is_some() && !exclude.contains(&c.name) && adj.contains_key(c.name.as_str()))
        .map(|c| c.name.as_str())
        .collect();
    if pool.is_empty() || (exact && pool.len() < k) {
        return Err(DatagenError::WorldTooSmall("not enough countries with a subregion and a neighbor"));
    }
    for _ in 0..100 {
        pool.shuffle(rng);
        let mut picked: BTreeSet<&str> = BTreeSet::new();
        for &c in &pool {
            if picked.len() == k {
                break;
            }
            picked.insert(c);
            let ok = picked
                .iter()
                .all(|p| adj[p].iter().any(|n| !picked.contains(n)));
            if !ok {
                picked.remove(c);
            }
        }
        if picked.len() == k || (!exact && !picked.is_empty()) {
            return Ok(picked.into_iter().map(String::from).collect());
        }
    }
    Err(DatagenError::WorldTooSmall("cannot keep a free neighbor for every held-out country"))
}
