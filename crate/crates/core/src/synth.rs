//! Synthetic transfer logs with planted structure and a ground-truth record.

use std::collections::{BTreeMap, HashSet};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bowtie::Component;
use crate::geonmf::{haversine_km, GeoGrid, EARTH_RADIUS_KM};
use crate::ingest::{Coord, PartyKind, TransferRecord};

pub const WINDOW_MONTHS: u32 = 29;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalnutShares {
    pub gscc: f64,
    #[serde(rename = "in")]
    pub in_: f64,
    pub out: f64,
    pub te: f64,
}

impl WalnutShares {
    /// Proportions observed in the reference bank network.
    pub const REFERENCE: WalnutShares = WalnutShares {
        gscc: 0.382,
        in_: 0.149,
        out: 0.373,
        te: 0.096,
    };

    pub const CORE_ONLY: WalnutShares = WalnutShares {
        gscc: 1.0,
        in_: 0.0,
        out: 0.0,
        te: 0.0,
    };

    fn sum(&self) -> f64 {
        self.gscc + self.in_ + self.out + self.te
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub center: Coord,
    /// Standard deviation of account positions around the center.
    pub spread_km: f64,
    /// Fraction of all accounts located in this city.
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub count: usize,
    /// Sub-blocks per block; 1 plants a flat partition.
    pub sub_blocks: usize,
    /// Probability that a link stays inside its sub-block.
    pub sub_block_locality: f64,
    /// Probability that a link stays inside its block (but not forced into
    /// the sub-block).
    pub block_locality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubSpec {
    /// Fraction of eligible accounts receiving monthly payments from the hub.
    /// With cities, each city gets the same expected number of payees.
    pub reach: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub nodes: usize,
    pub walnut: WalnutShares,
    /// Fraction of IN and OUT accounts linked directly to the core; the rest
    /// sit two hops away.
    pub skin_distance_one: f64,
    /// CCDF exponent of the per-account link propensity.
    pub degree_exponent: f64,
    /// Probability that an account's in-propensity equals its
    /// out-propensity instead of being drawn independently.
    pub degree_coupling: f64,
    /// CCDF exponent of the transfer count on ordinary links.
    pub frequency_exponent: f64,
    pub max_frequency: u64,
    /// Share of links paid once a month over the window (frequency 29).
    pub monthly_share: f64,
    /// Share of links paid twice a month (frequency 58).
    pub biweekly_share: f64,
    /// Parameters of the lognormal amount distribution (natural log of yen).
    pub amount_log_mean: f64,
    pub amount_log_sd: f64,
    /// Square region holding all accounts.
    pub region_center: Coord,
    pub region_side_km: f64,
    pub cities: Vec<City>,
    /// Probability that a link stays inside its city.
    pub city_locality: f64,
    pub blocks: Option<BlockSpec>,
    pub hub: Option<HubSpec>,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            walnut: WalnutShares::REFERENCE,
            skin_distance_one: 0.965,
            degree_exponent: 1.5,
            degree_coupling: 0.3,
            frequency_exponent: 1.8,
            max_frequency: 1000,
            monthly_share: 0.1,
            biweekly_share: 0.03,
            amount_log_mean: 50_000f64.ln(),
            amount_log_sd: 1.5,
            region_center: Coord::new(35.68, 139.76),
            region_side_km: 100.0,
            cities: six_cities(Coord::new(35.68, 139.76)),
            city_locality: 0.6,
            blocks: None,
            hub: None,
            seed: 1,
        }
    }
}

/// Six cities spread over a 100 km square; the first is the largest.
pub fn six_cities(center: Coord) -> Vec<City> {
    let layout = [
        ("C1", 0.0, 0.0, 0.30),
        ("C2", 30.0, 25.0, 0.15),
        ("C3", -30.0, 25.0, 0.15),
        ("C4", 30.0, -25.0, 0.14),
        ("C5", -30.0, -25.0, 0.13),
        ("C6", 0.0, -38.0, 0.13),
    ];
    layout
        .iter()
        .map(|&(name, east, north, share)| City {
            name: name.into(),
            center: offset_km(center, east, north),
            spread_km: 2.0,
            share,
        })
        .collect()
}

fn offset_km(c: Coord, east_km: f64, north_km: f64) -> Coord {
    let dlat = (north_km / EARTH_RADIUS_KM).to_degrees();
    let dlon = (east_km / (EARTH_RADIUS_KM * c.lat.to_radians().cos())).to_degrees();
    Coord::new(c.lat + dlat, c.lon + dlon)
}

impl ScenarioSpec {
    /// Bowtie proportions of the reference network, no geography effects.
    /// Degrees and transfer counts are lighter-tailed than the default so
    /// that potentials reflect topology rather than a few busy links.
    pub fn walnut(nodes: usize, seed: u64) -> Self {
        Self {
            nodes,
            degree_exponent: 3.0,
            frequency_exponent: 3.0,
            monthly_share: 0.0,
            biweekly_share: 0.0,
            city_locality: 0.0,
            seed,
            ..Self::default()
        }
    }

    /// Strongly connected geography-driven network over six cities; `hub`
    /// adds an account in the largest city paying accounts everywhere.
    pub fn cities(nodes: usize, hub: bool, seed: u64) -> Self {
        Self {
            nodes,
            walnut: WalnutShares::CORE_ONLY,
            monthly_share: 0.5,
            biweekly_share: 0.1,
            city_locality: 0.97,
            degree_coupling: 1.0,
            // a tenth of the accounts live between the cities
            cities: six_cities(Coord::new(35.68, 139.76))
                .into_iter()
                .map(|c| City {
                    share: 0.9 * c.share,
                    ..c
                })
                .collect(),
            hub: hub.then_some(HubSpec { reach: 0.3 }),
            seed,
            ..Self::default()
        }
    }

    /// Strongly connected network with planted communities.
    pub fn blocks(nodes: usize, count: usize, sub_blocks: usize, seed: u64) -> Self {
        Self {
            nodes,
            walnut: WalnutShares::CORE_ONLY,
            degree_exponent: 1.2,
            city_locality: 0.0,
            blocks: Some(BlockSpec {
                count,
                sub_blocks,
                sub_block_locality: if sub_blocks > 1 { 0.8 } else { 0.0 },
                block_locality: if sub_blocks > 1 { 0.17 } else { 0.95 },
            }),
            seed,
            ..Self::default()
        }
    }

    pub fn grid(&self, k: usize) -> GeoGrid {
        GeoGrid::square_around(self.region_center, self.region_side_km, k)
            .expect("positive region side")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let w = &self.walnut;
        for (name, x) in [
            ("walnut.gscc", w.gscc),
            ("walnut.in", w.in_),
            ("walnut.out", w.out),
            ("walnut.te", w.te),
            ("skin_distance_one", self.skin_distance_one),
            ("monthly_share", self.monthly_share),
            ("biweekly_share", self.biweekly_share),
            ("city_locality", self.city_locality),
        ] {
            if !unit(x) {
                return bad(format!("{name} = {x} is outside [0, 1]"));
            }
        }
        if w.sum() > 1.0 + 1e-9 {
            return bad(format!("walnut shares sum to {} > 1", w.sum()));
        }
        if self.monthly_share + self.biweekly_share > 1.0 + 1e-9 {
            return bad("monthly_share + biweekly_share > 1".into());
        }
        if self.degree_exponent <= 0.0 || self.frequency_exponent <= 0.0 {
            return bad("exponents must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.degree_coupling) {
            return bad("degree_coupling must lie in [0, 1]".into());
        }
        if self.max_frequency == 0 {
            return bad("max_frequency must be positive".into());
        }
        if !(self.amount_log_sd >= 0.0) || !self.amount_log_mean.is_finite() {
            return bad("amount parameters must be finite with sd >= 0".into());
        }
        if !(self.region_side_km > 0.0) {
            return bad("region_side_km must be positive".into());
        }
        let city_share: f64 = self.cities.iter().map(|c| c.share).sum();
        if self
            .cities
            .iter()
            .any(|c| !unit(c.share) || !(c.spread_km >= 0.0))
            || city_share > 1.0 + 1e-9
        {
            return bad("city shares must lie in [0, 1] and sum to at most 1".into());
        }
        if let Some(b) = self.blocks {
            if b.count == 0 || b.sub_blocks == 0 {
                return bad("block counts must be positive".into());
            }
            if !unit(b.block_locality)
                || !unit(b.sub_block_locality)
                || b.block_locality + b.sub_block_locality > 1.0 + 1e-9
            {
                return bad("block localities must lie in [0, 1] and sum to at most 1".into());
            }
        }
        if let Some(h) = self.hub {
            if !unit(h.reach) {
                return bad("hub.reach outside [0, 1]".into());
            }
        }
        Ok(())
    }
}

/// Planted role of one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountTruth {
    pub id: String,
    pub component: Component,
    /// Hops to (IN) or from (OUT) the core.
    pub skin_distance: Option<u32>,
    pub city: Option<u32>,
    pub block: Option<u32>,
    pub sub_block: Option<u32>,
    pub coord: Coord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCounts {
    pub gscc: usize,
    #[serde(rename = "in")]
    pub in_: usize,
    pub out: usize,
    pub te: usize,
    pub outside_gwcc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: ScenarioSpec,
    pub counts: PlantedCounts,
    pub links: usize,
    pub records: usize,
    pub hub: Option<String>,
    /// Sorted by id.
    pub accounts: Vec<AccountTruth>,
}

impl GroundTruth {
    pub fn account(&self, id: &str) -> Option<&AccountTruth> {
        self.accounts
            .binary_search_by(|a| a.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.accounts[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub records: Vec<TransferRecord>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Core,
    In1,
    In2,
    Out1,
    Out2,
    TeIn,
    TeOut,
    Outside,
}

#[derive(Debug, Clone, Copy)]
enum Schedule {
    Monthly,
    Biweekly,
    Ordinary(u64),
}

struct Pool {
    nodes: Vec<u32>,
    index: WeightedIndex<f64>,
}

impl Pool {
    fn new(nodes: Vec<u32>, weight: &[f64]) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        let index = WeightedIndex::new(nodes.iter().map(|&v| weight[v as usize])).ok()?;
        Some(Self { nodes, index })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        self.nodes[self.index.sample(rng)]
    }
}

/// Nested grouping used to keep links local: `labels[v]` and the probability
/// that a link from `v` stays in `v`'s group at this level.
struct Level {
    labels: Vec<u32>,
    locality: f64,
}

/// Weighted draws from a node class, optionally restricted to the group of a
/// reference node.
struct LocalPool {
    global: Option<Pool>,
    by_level: Vec<BTreeMap<u32, Pool>>,
}

impl LocalPool {
    fn new(members: &[u32], weight: &[f64], levels: &[Level]) -> Self {
        let by_level = levels
            .iter()
            .map(|level| {
                let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
                for &v in members {
                    groups.entry(level.labels[v as usize]).or_default().push(v);
                }
                groups
                    .into_iter()
                    .filter_map(|(g, nodes)| Pool::new(nodes, weight).map(|p| (g, p)))
                    .collect()
            })
            .collect();
        Self {
            global: Pool::new(members.to_vec(), weight),
            by_level,
        }
    }

    fn is_empty(&self) -> bool {
        self.global.is_none()
    }

    fn draw(&self, rng: &mut ChaCha8Rng, near: u32, levels: &[Level]) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, level) in levels.iter().enumerate() {
            acc += level.locality;
            if u < acc {
                if let Some(p) = self.by_level[i].get(&level.labels[near as usize]) {
                    return p.draw(rng);
                }
                break;
            }
        }
        self.global.as_ref().expect("non-empty pool").draw(rng)
    }
}

#[derive(Default)]
struct Edges {
    seen: HashSet<(u32, u32)>,
    list: Vec<(u32, u32)>,
}

impl Edges {
    fn add(&mut self, s: u32, t: u32) -> bool {
        if s != t && self.seen.insert((s, t)) {
            self.list.push((s, t));
            true
        } else {
            false
        }
    }
}

fn counts_for(spec: &ScenarioSpec) -> Result<PlantedCounts, SynthError> {
    let n = spec.nodes;
    let r = |x: f64| (x * n as f64).round() as usize;
    let w = &spec.walnut;
    let (mut gscc, in_, out, te) = (r(w.gscc), r(w.in_), r(w.out), r(w.te));
    let mut planted = gscc + in_ + out + te;
    if planted > n {
        // rounding overshoot goes to the core
        gscc -= planted - n;
        planted = n;
    }
    let mut outside = n - planted;
    if outside == 1 {
        // a single account cannot form a component of its own
        gscc += 1;
        outside = 0;
    }
    if gscc < 2 {
        return Err(SynthError::Infeasible(format!(
            "{gscc} core accounts cannot form a strongly connected core"
        )));
    }
    if te > 0 && in_ == 0 && out == 0 {
        return Err(SynthError::Infeasible(
            "tendrils need an IN or OUT component".into(),
        ));
    }
    if outside >= gscc + in_ + out + te {
        return Err(SynthError::Infeasible(
            "outside share too large for a giant component".into(),
        ));
    }
    Ok(PlantedCounts {
        gscc,
        in_,
        out,
        te,
        outside_gwcc: outside,
    })
}

/// Discrete Pareto draw with `P(X ≥ k) = k^-exponent` for integer `k ≥ 1`.
fn pareto(rng: &mut ChaCha8Rng, exponent: f64, cap: u64) -> u64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.powf(-1.0 / exponent).floor() as u64).clamp(1, cap.max(1))
}

fn month_start(m: u32) -> NaiveDate {
    let months = 2 + m;
    NaiveDate::from_ymd_opt(2017 + (months / 12) as i32, months % 12 + 1, 1).expect("valid date")
}

fn window() -> (NaiveDateTime, i64) {
    let start = month_start(0).and_hms_opt(0, 0, 0).unwrap();
    let end = month_start(WINDOW_MONTHS).and_hms_opt(0, 0, 0).unwrap();
    (start, (end - start).num_seconds())
}

fn random_time(rng: &mut ChaCha8Rng, date: NaiveDate) -> NaiveDateTime {
    date.and_hms_opt(
        rng.random_range(8..18),
        rng.random_range(0..60),
        rng.random_range(0..60),
    )
    .unwrap()
}

pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let counts = counts_for(spec)?;
    let n = spec.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // roles in index order
    let in1 = if counts.in_ == 0 {
        0
    } else {
        ((counts.in_ as f64 * spec.skin_distance_one).round() as usize).clamp(1, counts.in_)
    };
    let out1 = if counts.out == 0 {
        0
    } else {
        ((counts.out as f64 * spec.skin_distance_one).round() as usize).clamp(1, counts.out)
    };
    let (te_in, te_out) = match (counts.in_ > 0, counts.out > 0) {
        (true, true) => (counts.te / 2, counts.te - counts.te / 2),
        (true, false) => (counts.te, 0),
        _ => (0, counts.te),
    };
    let mut role = Vec::with_capacity(n);
    for (r, c) in [
        (Role::Core, counts.gscc),
        (Role::In1, in1),
        (Role::In2, counts.in_ - in1),
        (Role::Out1, out1),
        (Role::Out2, counts.out - out1),
        (Role::TeIn, te_in),
        (Role::TeOut, te_out),
        (Role::Outside, counts.outside_gwcc),
    ] {
        role.extend(std::iter::repeat_n(r, c));
    }
    let members = |pred: &dyn Fn(Role) -> bool| -> Vec<u32> {
        (0..n as u32).filter(|&v| pred(role[v as usize])).collect()
    };

    // geography and planted groups
    let city_of: Vec<Option<u32>> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (c, city) in spec.cities.iter().enumerate() {
                acc += city.share;
                if u < acc {
                    return Some(c as u32);
                }
            }
            None
        })
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let half = spec.region_side_km / 2.0;
    let mut coords: Vec<Coord> = city_of
        .iter()
        .map(|c| {
            let (center, e, nk) = match c {
                Some(c) => {
                    let city = &spec.cities[*c as usize];
                    let e: f64 = normal.sample(&mut rng) * city.spread_km;
                    let nk: f64 = normal.sample(&mut rng) * city.spread_km;
                    (city.center, e, nk)
                }
                None => (
                    spec.region_center,
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                ),
            };
            let p = offset_km(center, e, nk);
            // keep every account inside the region
            let lim = offset_km(spec.region_center, half * 0.999, half * 0.999);
            let low = offset_km(spec.region_center, -half * 0.999, -half * 0.999);
            Coord::new(p.lat.clamp(low.lat, lim.lat), p.lon.clamp(low.lon, lim.lon))
        })
        .collect();
    let (block_of, sub_of) = match spec.blocks {
        Some(b) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut block = vec![0u32; n];
            let mut sub = vec![0u32; n];
            for (rank, &v) in order.iter().enumerate() {
                let fine = rank * b.count * b.sub_blocks / n;
                block[v] = (fine / b.sub_blocks) as u32;
                sub[v] = fine as u32;
            }
            (Some(block), Some(sub))
        }
        None => (None, None),
    };
    let mut levels = Vec::new();
    if let (Some(b), Some(sub)) = (spec.blocks, &sub_of) {
        if b.sub_blocks > 1 {
            levels.push(Level {
                labels: sub.clone(),
                locality: b.sub_block_locality,
            });
        }
        levels.push(Level {
            labels: block_of.clone().unwrap(),
            locality: b.block_locality,
        });
    }
    if !spec.cities.is_empty() && spec.city_locality > 0.0 {
        // accounts outside every city trade with the nearest one
        let nearest = |p: Coord| {
            (0..spec.cities.len())
                .min_by(|&a, &b| {
                    haversine_km(p, spec.cities[a].center)
                        .total_cmp(&haversine_km(p, spec.cities[b].center))
                })
                .unwrap() as u32
        };
        levels.push(Level {
            labels: city_of
                .iter()
                .zip(&coords)
                .map(|(c, &p)| c.unwrap_or_else(|| nearest(p)))
                .collect(),
            locality: spec.city_locality,
        });
    }

    // link propensities
    let cap = n as u64;
    let out_prop: Vec<u64> = (0..n)
        .map(|_| pareto(&mut rng, spec.degree_exponent, cap))
        .collect();
    let in_prop: Vec<f64> = out_prop
        .iter()
        .map(|&a| {
            let own = pareto(&mut rng, spec.degree_exponent, cap);
            (if rng.random::<f64>() < spec.degree_coupling {
                a
            } else {
                own
            }) as f64
        })
        .collect();
    let out_weight: Vec<f64> = out_prop.iter().map(|&a| a as f64).collect();

    let core = members(&|r| r == Role::Core);
    let core_targets = LocalPool::new(&core, &in_prop, &levels);
    let core_sources = LocalPool::new(&core, &out_weight, &levels);
    let in1_targets = LocalPool::new(&members(&|r| r == Role::In1), &in_prop, &levels);
    let in_sources = LocalPool::new(
        &members(&|r| matches!(r, Role::In1 | Role::In2)),
        &out_weight,
        &levels,
    );
    let out1_sources = LocalPool::new(&members(&|r| r == Role::Out1), &out_weight, &levels);
    let out_targets = LocalPool::new(
        &members(&|r| matches!(r, Role::Out1 | Role::Out2)),
        &in_prop,
        &levels,
    );

    let mut edges = Edges::default();
    // core: one cycle through all core accounts, grouped so that most cycle
    // steps stay inside a group
    let mut cycle = core.clone();
    let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let finest = levels.first().map(|l| &l.labels);
    cycle.sort_by_key(|&v| (finest.map_or(0, |l| l[v as usize]), keys[v as usize]));
    for i in 0..cycle.len() {
        edges.add(cycle[i], cycle[(i + 1) % cycle.len()]);
    }
    let attempts = |k: u64| 3 * k + 10;
    let fan_out = |edges: &mut Edges, rng: &mut ChaCha8Rng, s: u32, k: u64, pool: &LocalPool| {
        let mut made = 0;
        for _ in 0..attempts(k) {
            if made >= k {
                break;
            }
            if edges.add(s, pool.draw(rng, s, &levels)) {
                made += 1;
            }
        }
    };
    let fan_in = |edges: &mut Edges, rng: &mut ChaCha8Rng, t: u32, k: u64, pool: &LocalPool| {
        let mut made = 0;
        for _ in 0..attempts(k) {
            if made >= k {
                break;
            }
            if edges.add(pool.draw(rng, t, &levels), t) {
                made += 1;
            }
        }
    };
    for v in 0..n as u32 {
        let a = out_prop[v as usize];
        let b = in_prop[v as usize] as u64;
        match role[v as usize] {
            Role::Core => fan_out(&mut edges, &mut rng, v, a - 1, &core_targets),
            Role::In1 => fan_out(&mut edges, &mut rng, v, a, &core_targets),
            Role::In2 => fan_out(&mut edges, &mut rng, v, a, &in1_targets),
            Role::Out1 => fan_in(&mut edges, &mut rng, v, b, &core_sources),
            Role::Out2 => fan_in(&mut edges, &mut rng, v, b, &out1_sources),
            Role::TeIn => fan_in(&mut edges, &mut rng, v, b, &in_sources),
            Role::TeOut => fan_out(&mut edges, &mut rng, v, a, &out_targets),
            Role::Outside => {}
        }
    }
    debug_assert!(!core_targets.is_empty());
    // outside the giant component: pairs, with one path of three if odd
    let outside = members(&|r| r == Role::Outside);
    let mut i = 0;
    while i < outside.len() {
        let rest = outside.len() - i;
        edges.add(outside[i], outside[i + 1]);
        if rest == 3 {
            edges.add(outside[i + 1], outside[i + 2]);
            i += 3;
        } else {
            i += 2;
        }
    }
    let ordinary_links = edges.list.len();
    let mut hub = None;
    if let Some(h) = spec.hub {
        let h_node = core
            .iter()
            .copied()
            .find(|&v| spec.cities.is_empty() || city_of[v as usize] == Some(0))
            .unwrap_or(core[0]);
        hub = Some(h_node);
        // on the edge of its city, away from the busy central cells
        if let Some(c) = spec.cities.first() {
            coords[h_node as usize] = offset_km(c.center, 3.0 * c.spread_km, 0.0);
        }
        let even = 1.0 / spec.cities.len().max(1) as f64;
        for v in 0..n as u32 {
            let p = match city_of[v as usize] {
                Some(c) => (h.reach * even / spec.cities[c as usize].share).min(1.0),
                None => h.reach,
            };
            if matches!(role[v as usize], Role::Core | Role::Out1 | Role::Out2)
                && rng.random::<f64>() < p
            {
                edges.add(h_node, v);
            }
        }
    }

    // schedules and amounts
    let amount_dist = LogNormal::new(spec.amount_log_mean, spec.amount_log_sd)
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let link_seed: u64 = rng.random();
    let (start, span) = window();
    const CHUNK: usize = 4096;
    let mut records: Vec<(NaiveDateTime, u32, u32, u64)> = edges
        .list
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(c, chunk)| {
            let mut r = ChaCha8Rng::seed_from_u64(link_seed);
            r.set_stream(c as u64);
            let mut out = Vec::new();
            for (j, &(s, t)) in chunk.iter().enumerate() {
                let is_hub = c * CHUNK + j >= ordinary_links;
                let u: f64 = r.random();
                let schedule = if is_hub || u < spec.monthly_share {
                    Schedule::Monthly
                } else if u < spec.monthly_share + spec.biweekly_share {
                    Schedule::Biweekly
                } else {
                    Schedule::Ordinary(pareto(&mut r, spec.frequency_exponent, spec.max_frequency))
                };
                let fixed = (amount_dist.sample(&mut r).round() as u64).max(1);
                match schedule {
                    Schedule::Monthly => {
                        let day = r.random_range(0..28);
                        for m in 0..WINDOW_MONTHS {
                            let d = month_start(m) + Duration::days(day);
                            out.push((random_time(&mut r, d), s, t, fixed));
                        }
                    }
                    Schedule::Biweekly => {
                        let day = r.random_range(0..14);
                        for m in 0..WINDOW_MONTHS {
                            for extra in [0, 14] {
                                let d = month_start(m) + Duration::days(day + extra);
                                out.push((random_time(&mut r, d), s, t, fixed));
                            }
                        }
                    }
                    Schedule::Ordinary(f) => {
                        for _ in 0..f {
                            let ts = start + Duration::seconds(r.random_range(0..span));
                            let amount = (amount_dist.sample(&mut r).round() as u64).max(1);
                            out.push((ts, s, t, amount));
                        }
                    }
                }
            }
            out
        })
        .collect();
    records.par_sort_unstable();

    // identifiers: random permutation of zero-padded numbers
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let width = (n.max(1) as f64).log10().floor() as usize + 1;
    let ids: Vec<String> = perm
        .iter()
        .map(|&p| format!("F{:0width$}", p + 1, width = width.max(6)))
        .collect();

    let out_records: Vec<TransferRecord> = records
        .par_iter()
        .map(|&(timestamp, s, t, amount)| TransferRecord {
            timestamp,
            source: ids[s as usize].clone(),
            destination: ids[t as usize].clone(),
            amount,
            source_kind: PartyKind::Firm,
            destination_kind: PartyKind::Firm,
            source_coord: Some(coords[s as usize]),
            destination_coord: Some(coords[t as usize]),
        })
        .collect();

    let mut accounts: Vec<AccountTruth> = (0..n)
        .map(|v| {
            let (component, skin_distance) = match role[v] {
                Role::Core => (Component::Gscc, None),
                Role::In1 => (Component::In, Some(1)),
                Role::In2 => (Component::In, Some(2)),
                Role::Out1 => (Component::Out, Some(1)),
                Role::Out2 => (Component::Out, Some(2)),
                Role::TeIn | Role::TeOut => (Component::Te, None),
                Role::Outside => (Component::OutsideGwcc, None),
            };
            AccountTruth {
                id: ids[v].clone(),
                component,
                skin_distance,
                city: city_of[v],
                block: block_of.as_ref().map(|b| b[v]),
                sub_block: sub_of.as_ref().map(|s| s[v]),
                coord: coords[v],
            }
        })
        .collect();
    accounts.sort_by(|a, b| a.id.cmp(&b.id));

    Ok(SyntheticData {
        truth: GroundTruth {
            spec: spec.clone(),
            counts,
            links: edges.list.len(),
            records: out_records.len(),
            hub: hub.map(|h| ids[h as usize].clone()),
            accounts,
        },
        records: out_records,
    })
}
