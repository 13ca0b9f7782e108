//! Synthetic grid states and brute-force oracles for tiny instances.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BBox, DistrictGraph, EdgeRecord, Vtd};
use crate::plan::{Plan, PlanState};
use crate::sampler::chain_rng;
use crate::score::{score_components, Compactness, ScoreWeights};
use crate::tally::VoteTable;

/// Largest graph [`enumerate_connected_plans`] accepts.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationModel {
    Uniform {
        per_cell: f64,
    },
    /// Population peaks at `center` (fractions of the grid extent) and
    /// decays with a Gaussian of width `radius` (fraction of the longer side).
    UrbanCluster {
        per_cell: f64,
        center: (f64, f64),
        radius: f64,
        peak_factor: f64,
        /// Relative multiplicative noise per cell.
        jitter: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteModel {
    /// Statewide two-party dem share.
    pub dem_fraction: f64,
    /// Extra dem share at the urban core relative to the average cell.
    pub urban_boost: f64,
    /// Absolute noise added to each cell's dem share.
    pub noise: f64,
}

impl Default for VoteModel {
    fn default() -> Self {
        VoteModel {
            dem_fraction: 0.5,
            urban_boost: 0.0,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinorityModel {
    pub base_fraction: f64,
    /// Minority fraction at the urban core.
    pub cluster_fraction: f64,
}

impl Default for MinorityModel {
    fn default() -> Self {
        MinorityModel {
            base_fraction: 0.2,
            cluster_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub num_districts: u32,
    pub population: PopulationModel,
    #[serde(default)]
    pub votes: VoteModel,
    /// Counties are `county_block x county_block` tiles.
    pub county_block: usize,
    #[serde(default)]
    pub minority: MinorityModel,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn uniform(rows: usize, cols: usize, num_districts: u32) -> Self {
        SynthSpec {
            rows,
            cols,
            num_districts,
            population: PopulationModel::Uniform { per_cell: 1.0 },
            votes: VoteModel::default(),
            county_block: 2,
            minority: MinorityModel::default(),
            seed: 0,
        }
    }

    /// 20x20 grid with a dense, strongly Democratic city off-center in an
    /// evenly split state, eight districts and 2x2 counties.
    pub fn urban_fixture() -> Self {
        SynthSpec {
            rows: 20,
            cols: 20,
            num_districts: 8,
            population: PopulationModel::UrbanCluster {
                per_cell: 1000.0,
                center: (0.3, 0.35),
                radius: 0.15,
                peak_factor: 4.0,
                jitter: 0.1,
            },
            votes: VoteModel {
                dem_fraction: 0.5,
                urban_boost: 0.35,
                noise: 0.03,
            },
            county_block: 2,
            minority: MinorityModel {
                base_fraction: 0.15,
                cluster_fraction: 0.6,
            },
            seed: 2016,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("grid must have at least one row and column".into()));
        }
        if self.num_districts < 1 || self.rows * self.cols < self.num_districts as usize {
            return Err(Error::Config("need 1 <= num_districts <= rows * cols".into()));
        }
        if self.county_block == 0 {
            return Err(Error::Config("county_block must be positive".into()));
        }
        let mut fractions = vec![
            self.votes.dem_fraction,
            self.votes.urban_boost,
            self.votes.noise,
            self.minority.base_fraction,
            self.minority.cluster_fraction,
        ];
        match self.population {
            PopulationModel::Uniform { per_cell } => {
                if !(per_cell > 0.0) {
                    return Err(Error::Config("per_cell population must be positive".into()));
                }
            }
            PopulationModel::UrbanCluster {
                per_cell,
                center,
                radius,
                peak_factor,
                jitter,
            } => {
                if !(per_cell > 0.0 && radius > 0.0 && peak_factor >= 1.0) {
                    return Err(Error::Config(
                        "urban cluster needs positive per_cell and radius, peak_factor >= 1".into(),
                    ));
                }
                fractions.extend([center.0, center.1, jitter]);
            }
        }
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("synth fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn cell_id(row: usize, col: usize) -> String {
        format!("r{row:03}c{col:03}")
    }

    fn urbanness(&self, r: usize, c: usize) -> f64 {
        let (center, radius) = match self.population {
            PopulationModel::UrbanCluster { center, radius, .. } => (center, radius),
            PopulationModel::Uniform { .. } => ((0.5, 0.5), 0.25),
        };
        let scale = self.rows.max(self.cols) as f64;
        let dy = (r as f64 + 0.5) / self.rows as f64 - center.0;
        let dx = (c as f64 + 0.5) / self.cols as f64 - center.1;
        let d2 = (dx * dx * (self.cols as f64).powi(2) + dy * dy * (self.rows as f64).powi(2)) / (scale * scale);
        (-d2 / (2.0 * radius * radius)).exp()
    }
}

/// Builds the grid graph and its vote table. Cells have unit area, unit
/// shared perimeter with each grid neighbor and an outer boundary equal to
/// their exposed sides.
pub fn make_grid_state(spec: &SynthSpec) -> Result<(DistrictGraph, VoteTable)> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    let mut rng = chain_rng(spec.seed);
    let urban: Vec<f64> = (0..n).map(|i| spec.urbanness(i / cols, i % cols)).collect();

    let population: Vec<f64> = match spec.population {
        PopulationModel::Uniform { per_cell } => vec![per_cell; n],
        PopulationModel::UrbanCluster {
            per_cell,
            peak_factor,
            jitter,
            ..
        } => urban
            .iter()
            .map(|u| {
                let noise = 1.0 + jitter * (2.0 * rng.gen::<f64>() - 1.0);
                (per_cell * (1.0 + (peak_factor - 1.0) * u) * noise).round().max(1.0)
            })
            .collect(),
    };

    let total_pop: f64 = population.iter().sum();
    let mean_urban = urban.iter().zip(&population).map(|(u, p)| u * p).sum::<f64>() / total_pop;
    let mut share: Vec<f64> = urban
        .iter()
        .map(|u| {
            let noise = if spec.votes.noise > 0.0 {
                spec.votes.noise * (2.0 * rng.gen::<f64>() - 1.0)
            } else {
                0.0
            };
            spec.votes.dem_fraction + spec.votes.urban_boost * (u - mean_urban) + noise
        })
        .collect();
    // recentre so the statewide share matches, then clamp
    let mean_share = share.iter().zip(&population).map(|(s, p)| s * p).sum::<f64>() / total_pop;
    for s in &mut share {
        *s = (*s + spec.votes.dem_fraction - mean_share).clamp(0.0, 1.0);
    }

    let m = &spec.minority;
    let mut vtds = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let exposed = [r == 0, r + 1 == rows, c == 0, c + 1 == cols]
                .iter()
                .filter(|b| **b)
                .count();
            let minority = m.base_fraction + (m.cluster_fraction - m.base_fraction) * urban[i];
            vtds.push(Vtd {
                id: SynthSpec::cell_id(r, c),
                population: population[i],
                area: 1.0,
                minority_population: (population[i] * minority).round().min(population[i]),
                county: format!("k{:02}_{:02}", r / spec.county_block, c / spec.county_block),
                outer_boundary_length: exposed as f64,
                bbox: Some(BBox {
                    min_x: c as f64,
                    min_y: r as f64,
                    max_x: c as f64 + 1.0,
                    max_y: r as f64 + 1.0,
                }),
            });
            if c + 1 < cols {
                edges.push(EdgeRecord::new(SynthSpec::cell_id(r, c), SynthSpec::cell_id(r, c + 1), 1.0));
            }
            if r + 1 < rows {
                edges.push(EdgeRecord::new(SynthSpec::cell_id(r, c), SynthSpec::cell_id(r + 1, c), 1.0));
            }
        }
    }
    let g = DistrictGraph::from_parts(vtds, edges)?;
    let dem = population.iter().zip(&share).map(|(p, s)| p * s).collect();
    let rep = population.iter().zip(&share).map(|(p, s)| p * (1.0 - s)).collect();
    let votes = VoteTable::new("synthetic", dem, rep)?;
    Ok((g, votes))
}

/// Cuts the boustrophedon ordering of the grid into `D` runs of roughly
/// equal population. Each run is connected.
pub fn snake_plan(spec: &SynthSpec, g: &DistrictGraph) -> Result<Plan> {
    let (rows, cols, d) = (spec.rows, spec.cols, spec.num_districts as usize);
    if g.len() != rows * cols {
        return Err(Error::PlanSize {
            plan: rows * cols,
            graph: g.len(),
        });
    }
    let order: Vec<usize> = (0..rows)
        .flat_map(|r| {
            let row: Vec<usize> = if r % 2 == 0 {
                (0..cols).map(|c| r * cols + c).collect()
            } else {
                (0..cols).rev().map(|c| r * cols + c).collect()
            };
            row
        })
        .collect();
    let target = g.total_population() / d as f64;
    let mut labels = vec![0u32; g.len()];
    let (mut district, mut acc) = (1usize, 0.0);
    for (k, &i) in order.iter().enumerate() {
        let left = order.len() - k;
        let needed = d - district;
        let pop = g.vtd(i).population;
        // close the district when adding this cell overshoots more than
        // stopping short, or when the remaining cells are just enough
        if district < d && acc > 0.0 && (acc + pop / 2.0 >= target * district as f64 || left == needed) {
            district += 1;
        }
        labels[i] = district as u32;
        acc += pop;
    }
    Plan::new(labels, spec.num_districts)
}

fn connected_mask(mask: u32, adj: &[u32]) -> bool {
    if mask == 0 {
        return true;
    }
    let start = mask.trailing_zeros();
    let mut seen = 1u32 << start;
    let mut frontier = seen;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adj[v] & mask & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == mask
}

fn component_count(mask: u32, adj: &[u32]) -> u32 {
    let mut rest = mask;
    let mut count = 0;
    while rest != 0 {
        let start = rest.trailing_zeros();
        let mut seen = 1u32 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = adj[v] & rest & !seen;
            seen |= new;
            frontier |= new;
        }
        rest &= !seen;
        count += 1;
    }
    count
}

struct Enumerator<'a> {
    adj: Vec<u32>,
    pop: Vec<f64>,
    bounds: Option<(f64, f64)>,
    parts: usize,
    current: Vec<u32>,
    out: &'a mut Vec<Vec<u32>>,
}

impl Enumerator<'_> {
    fn pop_of(&self, mask: u32) -> f64 {
        let mut m = mask;
        let mut p = 0.0;
        while m != 0 {
            p += self.pop[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        p
    }

    fn balanced(&self, mask: u32) -> bool {
        match self.bounds {
            Some((lo, hi)) => {
                let p = self.pop_of(mask);
                p >= lo && p <= hi
            }
            None => true,
        }
    }

    fn partition(&mut self, free: u32) {
        let left = self.parts - self.current.len();
        if left == 1 {
            if free != 0 && connected_mask(free, &self.adj) && self.balanced(free) {
                self.current.push(free);
                self.out.push(self.current.clone());
                self.current.pop();
            }
            return;
        }
        if (free.count_ones() as usize) < left || component_count(free, &self.adj) as usize > left {
            return;
        }
        let v = free.trailing_zeros() as usize;
        let start = 1u32 << v;
        let ext = self.adj[v] & free;
        self.grow(start, ext, start, free);
    }

    // Visits every connected subset of `free` containing the seed exactly
    // once: `banned` holds vertices already branched on at this level.
    fn grow(&mut self, set: u32, mut ext: u32, mut banned: u32, free: u32) {
        if self.balanced(set) {
            self.current.push(set);
            self.partition(free & !set);
            self.current.pop();
        }
        if let Some((_, hi)) = self.bounds {
            if self.pop_of(set) > hi {
                return;
            }
        }
        while ext != 0 {
            let w = ext.trailing_zeros() as usize;
            let bit = 1u32 << w;
            ext &= !bit;
            banned |= bit;
            let next_set = set | bit;
            let next_ext = (ext | self.adj[w]) & free & !next_set & !banned;
            self.grow(next_set, next_ext | ext, banned, free);
        }
    }
}

/// Every partition of the units into `D` nonempty connected parts, each once.
/// Labels are canonical: parts are numbered by their smallest unit id.
/// With `balance`, only parts within that fraction of the ideal population
/// are kept. Output is sorted by label vector.
pub fn enumerate_connected_plans(g: &DistrictGraph, num_districts: u32, balance: Option<f64>) -> Result<Vec<Plan>> {
    let n = g.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if num_districts < 1 {
        return Err(Error::DistrictCount {
            min: 1,
            got: num_districts,
        });
    }
    // bit k is the unit with the k-th smallest id
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.vtd(a).id.cmp(&g.vtd(b).id));
    let mut rank = vec![0usize; n];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }
    let mut adj = vec![0u32; n];
    for e in g.adjacencies() {
        adj[rank[e.a]] |= 1 << rank[e.b];
        adj[rank[e.b]] |= 1 << rank[e.a];
    }
    let pop: Vec<f64> = order.iter().map(|&i| g.vtd(i).population).collect();
    let bounds = balance.map(|b| {
        let ideal = g.total_population() / f64::from(num_districts);
        let slack = 1e-9 * ideal.max(1.0);
        (ideal * (1.0 - b) - slack, ideal * (1.0 + b) + slack)
    });
    let mut parts = Vec::new();
    if (num_districts as usize) <= n {
        let mut e = Enumerator {
            adj,
            pop,
            bounds,
            parts: num_districts as usize,
            current: Vec::new(),
            out: &mut parts,
        };
        let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        e.partition(full);
    }
    let mut plans = parts
        .into_iter()
        .map(|masks| {
            let mut labels = vec![0u32; n];
            for (d, mut m) in masks.into_iter().enumerate() {
                while m != 0 {
                    labels[order[m.trailing_zeros() as usize]] = d as u32 + 1;
                    m &= m - 1;
                }
            }
            Plan::new(labels, num_districts)
        })
        .collect::<Result<Vec<_>>>()?;
    plans.sort_by(|a, b| a.labels().cmp(b.labels()));
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactEntry {
    #[serde(skip)]
    pub plan: Plan,
    pub j: f64,
    pub probability: f64,
}

/// Gibbs distribution `exp(-beta J) / Z` over an enumerated plan set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub beta: f64,
    pub entries: Vec<ExactEntry>,
    /// `ln Z`; `Z` itself under- or overflows for large scores.
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn probability_of(&self, plan: &Plan) -> Option<f64> {
        self.entries.iter().find(|e| &e.plan == plan).map(|e| e.probability)
    }
}

/// Scores every enumerated plan and normalizes with log-sum-exp.
pub fn exact_distribution(
    g: &DistrictGraph,
    num_districts: u32,
    w: &ScoreWeights,
    compactness: Compactness,
    beta: f64,
    balance: Option<f64>,
) -> Result<ExactDistribution> {
    let plans = enumerate_connected_plans(g, num_districts, balance)?;
    gibbs(g, plans, w, compactness, beta)
}

/// Gibbs distribution over an explicit plan list.
pub fn gibbs(
    g: &DistrictGraph,
    plans: Vec<Plan>,
    w: &ScoreWeights,
    compactness: Compactness,
    beta: f64,
) -> Result<ExactDistribution> {
    if plans.is_empty() {
        return Err(Error::Empty("plan set"));
    }
    let mut js = Vec::with_capacity(plans.len());
    for p in &plans {
        let s = PlanState::new(g, p)?;
        js.push(score_components(&s, w, compactness)?.j_total);
    }
    let top = js.iter().map(|j| -beta * j).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = js.iter().map(|j| (-beta * j - top).exp()).sum();
    let log_partition = top + sum.ln();
    let entries = plans
        .into_iter()
        .zip(js)
        .map(|(plan, j)| ExactEntry {
            plan,
            j,
            probability: (-beta * j - log_partition).exp(),
        })
        .collect();
    Ok(ExactDistribution {
        beta,
        entries,
        log_partition,
    })
}

fn stays_connected(free: &[bool], g: &DistrictGraph, removed: usize) -> bool {
    let start = match (0..free.len()).find(|&i| free[i] && i != removed) {
        Some(s) => s,
        None => return true,
    };
    let mut seen = vec![false; free.len()];
    seen[start] = true;
    seen[removed] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for nb in g.neighbors(v) {
            if free[nb.vtd] && !seen[nb.vtd] {
                seen[nb.vtd] = true;
                count += 1;
                queue.push_back(nb.vtd);
            }
        }
    }
    count == free.iter().filter(|f| **f).count() - 1
}

// Grows one district from `seed` until it reaches `target` population,
// adding the frontier unit with the highest priority whose removal keeps the
// unassigned units connected.
fn grow_district(
    g: &DistrictGraph,
    free: &mut [bool],
    labels: &mut [u32],
    label: u32,
    seed: usize,
    target: f64,
    priority: &dyn Fn(usize) -> f64,
) -> Result<()> {
    let mut pop = g.vtd(seed).population;
    free[seed] = false;
    labels[seed] = label;
    loop {
        if pop >= target {
            return Ok(());
        }
        let mut best: Option<(f64, usize)> = None;
        let mut frontier: Vec<usize> = (0..g.len())
            .filter(|&v| free[v] && g.neighbors(v).iter().any(|nb| labels[nb.vtd] == label))
            .collect();
        frontier.sort_by(|&a, &b| priority(b).total_cmp(&priority(a)).then(a.cmp(&b)));
        for v in frontier {
            // overshooting by more than half a unit is worse than stopping
            if pop + g.vtd(v).population / 2.0 > target && pop > 0.0 {
                continue;
            }
            if stays_connected(free, g, v) {
                best = Some((priority(v), v));
                break;
            }
        }
        match best {
            Some((_, v)) => {
                free[v] = false;
                labels[v] = label;
                pop += g.vtd(v).population;
            }
            None => return Ok(()),
        }
    }
}

/// Packs the most Democratic units into `ceil(D/4)` contiguous districts
/// and splits the remainder into contiguous districts of roughly equal
/// population.
pub fn plant_packed_plan(g: &DistrictGraph, votes: &VoteTable, num_districts: u32) -> Result<Plan> {
    let d = num_districts as usize;
    if d < 2 || d > g.len() {
        return Err(Error::DistrictCount {
            min: 2,
            got: num_districts,
        });
    }
    if votes.len() != g.len() {
        return Err(Error::LengthMismatch {
            left: votes.len(),
            right: g.len(),
        });
    }
    let share = |v: usize| votes.dem_share(v).unwrap_or(0.5);
    let target = g.total_population() / d as f64;
    let mut free = vec![true; g.len()];
    let mut labels = vec![0u32; g.len()];
    let packed = d.div_ceil(4);
    for k in 0..packed {
        let seed = (0..g.len())
            .filter(|&v| free[v] && stays_connected(&free, g, v))
            .max_by(|&a, &b| share(a).total_cmp(&share(b)).then(b.cmp(&a)))
            .ok_or_else(|| Error::Infeasible("no seed for a packed district".into()))?;
        grow_district(g, &mut free, &mut labels, k as u32 + 1, seed, target, &share)?;
    }
    for k in packed..d - 1 {
        let remaining: f64 = (0..g.len()).filter(|&v| free[v]).map(|v| g.vtd(v).population).sum();
        let goal = remaining / (d - k) as f64;
        // start in a corner of what is left and grow by graph distance
        let seed = (0..g.len())
            .filter(|&v| free[v] && stays_connected(&free, g, v))
            .min_by_key(|&v| (g.neighbors(v).iter().filter(|nb| free[nb.vtd]).count(), v))
            .ok_or_else(|| Error::Infeasible("no seed for a remainder district".into()))?;
        let dist = bfs_distance(g, &free, seed);
        grow_district(g, &mut free, &mut labels, k as u32 + 1, seed, goal, &|v| -(dist[v] as f64))?;
    }
    for v in 0..g.len() {
        if free[v] {
            labels[v] = num_districts;
        }
    }
    let plan = Plan::new(labels, num_districts)?;
    let state = PlanState::new(g, &plan)?;
    if let Some(bad) = (1..=num_districts).find(|&k| !state.is_contiguous(k)) {
        return Err(Error::Infeasible(format!("district {bad} is not contiguous")));
    }
    Ok(plan)
}

fn bfs_distance(g: &DistrictGraph, free: &[bool], seed: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.len()];
    dist[seed] = 0;
    let mut queue = VecDeque::from([seed]);
    while let Some(v) = queue.pop_front() {
        for nb in g.neighbors(v) {
            if free[nb.vtd] && dist[nb.vtd] == usize::MAX {
                dist[nb.vtd] = dist[v] + 1;
                queue.push_back(nb.vtd);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_geometry() {
        let (g, votes) = make_grid_state(&SynthSpec::uniform(2, 2, 2)).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.adjacencies().len(), 4);
        assert!(g.vtds().iter().all(|v| v.outer_boundary_length == 2.0));
        for i in 0..4 {
            assert_eq!(votes.dem(i), votes.rep(i));
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = SynthSpec::urban_fixture();
        let a = make_grid_state(&spec).unwrap();
        let b = make_grid_state(&spec).unwrap();
        assert_eq!(a.0.vtds(), b.0.vtds());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn urban_fixture_is_evenly_split() {
        let (_, votes) = make_grid_state(&SynthSpec::urban_fixture()).unwrap();
        let share = votes.total_dem() / (votes.total_dem() + votes.total_rep());
        assert!((share - 0.5).abs() < 0.01, "{share}");
    }

    #[test]
    fn snake_plan_is_connected_and_balanced() {
        let spec = SynthSpec::uniform(6, 5, 3);
        let (g, _) = make_grid_state(&spec).unwrap();
        let plan = snake_plan(&spec, &g).unwrap();
        let s = PlanState::new(&g, &plan).unwrap();
        for d in 1..=3 {
            assert!(s.is_contiguous(d));
            assert_eq!(s.aggregate(d).vtd_count, 10);
        }
    }

    #[test]
    fn path_of_three_has_two_plans() {
        let spec = SynthSpec::uniform(1, 3, 2);
        let (g, _) = make_grid_state(&spec).unwrap();
        let plans = enumerate_connected_plans(&g, 2, None).unwrap();
        let labels: Vec<&[u32]> = plans.iter().map(|p| p.labels()).collect();
        assert_eq!(labels, vec![&[1, 1, 2][..], &[1, 2, 2][..]]);
    }

    #[test]
    fn two_by_two_balanced_splits() {
        let (g, _) = make_grid_state(&SynthSpec::uniform(2, 2, 2)).unwrap();
        let plans = enumerate_connected_plans(&g, 2, Some(0.0)).unwrap();
        let labels: Vec<&[u32]> = plans.iter().map(|p| p.labels()).collect();
        assert_eq!(labels, vec![&[1, 1, 2, 2][..], &[1, 2, 1, 2][..]]);
        assert_eq!(enumerate_connected_plans(&g, 1, None).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_guard() {
        let (g, _) = make_grid_state(&SynthSpec::uniform(3, 7, 2)).unwrap();
        assert!(matches!(
            enumerate_connected_plans(&g, 2, None),
            Err(Error::TooLarge { size: 21, limit: 20 })
        ));
    }

    #[test]
    fn exact_distribution_properties() {
        let (g, _) = make_grid_state(&SynthSpec::uniform(3, 3, 3)).unwrap();
        let w = ScoreWeights {
            w_m: 0.0,
            ..Default::default()
        };
        let uniform = exact_distribution(&g, 3, &w, Compactness::Iso, 0.0, None).unwrap();
        let n = uniform.entries.len() as f64;
        assert!(uniform.entries.iter().all(|e| (e.probability - 1.0 / n).abs() < 1e-15));
        let total: f64 = uniform.entries.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let a = exact_distribution(&g, 3, &w, Compactness::Iso, 0.05, None).unwrap();
        let b = exact_distribution(&g, 3, &w, Compactness::Iso, 0.1, None).unwrap();
        let gap = |d: &ExactDistribution| d.entries[0].probability.ln() - d.entries[5].probability.ln();
        assert!((2.0 * gap(&a) - gap(&b)).abs() < 1e-9);
    }

    #[test]
    fn planted_plan_is_contiguous() {
        let spec = SynthSpec::urban_fixture();
        let (g, votes) = make_grid_state(&spec).unwrap();
        let plan = plant_packed_plan(&g, &votes, spec.num_districts).unwrap();
        let s = PlanState::new(&g, &plan).unwrap();
        for d in 1..=spec.num_districts {
            assert!(s.is_contiguous(d));
            assert!(s.aggregate(d).vtd_count > 0);
        }
    }
}
