//! District plans and the incrementally maintained state the sampler mutates.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{csv_reader, BBox, DistrictGraph};

pub const PLAN_HEADER: &str = "id,district";

/// An assignment of every unit to a district label in `1..=num_districts`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    labels: Vec<u32>,
    num_districts: u32,
}

impl Plan {
    /// Labels are indexed by graph vertex. Every label must be in range and
    /// every district must be used.
    pub fn new(labels: Vec<u32>, num_districts: u32) -> Result<Self> {
        if num_districts == 0 {
            return Err(Error::DistrictCount { min: 1, got: 0 });
        }
        let mut used = vec![false; num_districts as usize];
        for &l in &labels {
            if l == 0 || l > num_districts {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    num_districts,
                });
            }
            used[(l - 1) as usize] = true;
        }
        if let Some(d) = used.iter().position(|u| !u) {
            return Err(Error::EmptyDistrict(d as u32 + 1));
        }
        Ok(Plan {
            labels,
            num_districts,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_districts(&self) -> u32 {
        self.num_districts
    }

    pub fn members(&self, district: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == district)
            .map(|(i, _)| i)
            .collect()
    }

    /// Relabels districts by first appearance along `order` (a permutation of
    /// the vertices), so plans differing only by label permutation coincide.
    pub fn canonical(&self, order: &[usize]) -> Plan {
        let mut map = vec![0u32; self.num_districts as usize + 1];
        let mut next = 1;
        for &v in order {
            let l = self.labels[v] as usize;
            if map[l] == 0 {
                map[l] = next;
                next += 1;
            }
        }
        Plan {
            labels: self.labels.iter().map(|&l| map[l as usize]).collect(),
            num_districts: self.num_districts,
        }
    }
}

/// Reads a `id,district` plan file. When `num_districts` is `None` the count
/// is taken from the largest label.
pub fn read_plan_csv<R: Read>(r: R, g: &DistrictGraph, num_districts: Option<u32>) -> Result<Plan> {
    let mut rdr = csv_reader(r);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != PLAN_HEADER {
        return Err(Error::Header {
            file: "plan.csv",
            expected: PLAN_HEADER.into(),
            found: header,
        });
    }
    let mut labels = vec![0u32; g.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let id = &rec[0];
        let v = g.index_of(id).ok_or_else(|| Error::UnknownVtd(id.to_string()))?;
        if labels[v] != 0 {
            return Err(Error::DuplicateLabel(id.to_string()));
        }
        labels[v] = rec[1].parse::<u32>().map_err(|_| Error::Header {
            file: "plan.csv",
            expected: "an integer district label".into(),
            found: rec[1].to_string(),
        })?;
        if labels[v] == 0 {
            return Err(Error::LabelOutOfRange {
                label: 0,
                num_districts: num_districts.unwrap_or(0),
            });
        }
    }
    if let Some(v) = labels.iter().position(|&l| l == 0) {
        return Err(Error::UnlabeledVtd(g.vtd(v).id.clone()));
    }
    let d = num_districts.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
    Plan::new(labels, d)
}

pub fn write_plan_csv<W: Write>(w: W, g: &DistrictGraph, plan: &Plan) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    w.write_record(PLAN_HEADER.split(','))?;
    for (v, &l) in plan.labels().iter().enumerate() {
        w.write_record([g.vtd(v).id.as_str(), &l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-district sums maintained under flips.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistrictAggregate {
    pub population: f64,
    pub area: f64,
    pub minority_population: f64,
    /// Perimeter including any border with the state exterior.
    pub boundary_length: f64,
    pub vtd_count: u32,
}

impl DistrictAggregate {
    pub fn minority_fraction(&self) -> f64 {
        if self.population > 0.0 {
            self.minority_population / self.population
        } else {
            0.0
        }
    }

    pub fn isoperimetric_ratio(&self) -> f64 {
        self.boundary_length * self.boundary_length / self.area
    }
}

/// How a county is divided: the number of districts it touches and its
/// square-root weight toward the county score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountySplit {
    pub districts: u32,
    pub weight: f64,
}

/// Classifies a county from its per-district unit counts. A county touching
/// two districts weighs `sqrt(second / total)`; touching three or more it
/// weighs `sqrt((total - first - second) / total)`.
pub fn county_split(counts: &[u32]) -> CountySplit {
    let (mut first, mut second, mut total, mut districts) = (0u32, 0u32, 0u32, 0u32);
    for &c in counts {
        if c == 0 {
            continue;
        }
        districts += 1;
        total += c;
        if c > first {
            second = first;
            first = c;
        } else if c > second {
            second = c;
        }
    }
    let weight = match districts {
        0 | 1 => 0.0,
        2 => (f64::from(second) / f64::from(total)).sqrt(),
        _ => (f64::from(total - first - second) / f64::from(total)).sqrt(),
    };
    CountySplit { districts, weight }
}

#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Multisets of member bbox coordinates, so the district bounding rectangle
/// survives removals in logarithmic time.
#[derive(Debug, Clone, Default, PartialEq)]
struct BboxTracker {
    min_x: BTreeMap<Key, u32>,
    min_y: BTreeMap<Key, u32>,
    max_x: BTreeMap<Key, u32>,
    max_y: BTreeMap<Key, u32>,
}

fn ms_add(m: &mut BTreeMap<Key, u32>, x: f64) {
    *m.entry(Key(x)).or_insert(0) += 1;
}

fn ms_remove(m: &mut BTreeMap<Key, u32>, x: f64) {
    let k = Key(x);
    let c = m.get_mut(&k).expect("bbox coordinate present");
    *c -= 1;
    if *c == 0 {
        m.remove(&k);
    }
}

// Smallest (or largest) element once one copy of `without` is removed.
fn ms_extreme(m: &BTreeMap<Key, u32>, without: Option<f64>, largest: bool) -> Option<f64> {
    let mut it: Box<dyn Iterator<Item = (&Key, &u32)>> = if largest {
        Box::new(m.iter().rev())
    } else {
        Box::new(m.iter())
    };
    let (k, &c) = it.next()?;
    match without {
        Some(w) if Key(w) == *k && c == 1 => it.next().map(|(k, _)| k.0),
        _ => Some(k.0),
    }
}

impl BboxTracker {
    fn add(&mut self, b: &BBox) {
        ms_add(&mut self.min_x, b.min_x);
        ms_add(&mut self.min_y, b.min_y);
        ms_add(&mut self.max_x, b.max_x);
        ms_add(&mut self.max_y, b.max_y);
    }

    fn remove(&mut self, b: &BBox) {
        ms_remove(&mut self.min_x, b.min_x);
        ms_remove(&mut self.min_y, b.min_y);
        ms_remove(&mut self.max_x, b.max_x);
        ms_remove(&mut self.max_y, b.max_y);
    }

    fn bbox(&self, without: Option<&BBox>, with: Option<&BBox>) -> Option<BBox> {
        let base = (|| {
            Some(BBox {
                min_x: ms_extreme(&self.min_x, without.map(|b| b.min_x), false)?,
                min_y: ms_extreme(&self.min_y, without.map(|b| b.min_y), false)?,
                max_x: ms_extreme(&self.max_x, without.map(|b| b.max_x), true)?,
                max_y: ms_extreme(&self.max_y, without.map(|b| b.max_y), true)?,
            })
        })();
        match (base, with) {
            (Some(a), Some(b)) => Some(a.union(b)),
            (None, Some(b)) => Some(*b),
            (a, None) => a,
        }
    }
}

/// The result of a hypothetical flip, computed without mutating the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipPreview {
    pub vtd: usize,
    pub from: u32,
    pub to: u32,
    pub donor: DistrictAggregate,
    pub acceptor: DistrictAggregate,
    pub county_split: CountySplit,
    pub conflicted_after: usize,
}

/// Everything needed to undo a flip exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipDelta {
    pub vtd: usize,
    pub old_label: u32,
    pub new_label: u32,
    pub prev_donor: DistrictAggregate,
    pub prev_acceptor: DistrictAggregate,
    pub prev_county_split: CountySplit,
    pub conflicted_delta: i64,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: VecDeque<usize>,
}

impl Scratch {
    fn next_epoch(&mut self, n: usize) -> u32 {
        if self.stamp.len() != n || self.epoch == u32::MAX {
            self.stamp = vec![0; n];
            self.epoch = 0;
        }
        self.epoch += 1;
        self.queue.clear();
        self.epoch
    }
}

const ABSENT: usize = usize::MAX;

/// A plan over a shared graph with cached district aggregates, per-county
/// district counts and the set of conflicted edges.
#[derive(Debug, Clone)]
pub struct PlanState<'g> {
    graph: &'g DistrictGraph,
    labels: Vec<u32>,
    num_districts: u32,
    aggregates: Vec<DistrictAggregate>,
    county_counts: Vec<Vec<u32>>,
    county_splits: Vec<CountySplit>,
    conflicted: Vec<usize>,
    conflicted_pos: Vec<usize>,
    bboxes: Option<Vec<BboxTracker>>,
    scratch: RefCell<Scratch>,
}

impl PartialEq for PlanState<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.graph, other.graph)
            && self.labels == other.labels
            && self.num_districts == other.num_districts
            && self.aggregates == other.aggregates
            && self.county_counts == other.county_counts
            && self.county_splits == other.county_splits
            && self.conflicted.len() == other.conflicted.len()
            && self
                .conflicted_pos
                .iter()
                .zip(&other.conflicted_pos)
                .all(|(a, b)| (*a == ABSENT) == (*b == ABSENT))
            && self.bboxes == other.bboxes
    }
}

impl<'g> PlanState<'g> {
    pub fn new(graph: &'g DistrictGraph, plan: &Plan) -> Result<Self> {
        if plan.len() != graph.len() {
            return Err(Error::PlanSize {
                plan: plan.len(),
                graph: graph.len(),
            });
        }
        let d = plan.num_districts() as usize;
        let mut aggregates = vec![DistrictAggregate::default(); d];
        let mut county_counts = vec![vec![0u32; d]; graph.num_counties()];
        let mut bboxes = graph.has_bboxes().then(|| vec![BboxTracker::default(); d]);
        for (v, vtd) in graph.vtds().iter().enumerate() {
            let k = (plan.label(v) - 1) as usize;
            let a = &mut aggregates[k];
            a.population += vtd.population;
            a.area += vtd.area;
            a.minority_population += vtd.minority_population;
            a.boundary_length += vtd.outer_boundary_length;
            a.vtd_count += 1;
            county_counts[graph.county_of(v)][k] += 1;
            if let (Some(t), Some(b)) = (bboxes.as_mut(), vtd.bbox.as_ref()) {
                t[k].add(b);
            }
        }
        let mut conflicted = Vec::new();
        let mut conflicted_pos = vec![ABSENT; graph.adjacencies().len()];
        for (e, adj) in graph.adjacencies().iter().enumerate() {
            let (la, lb) = (plan.label(adj.a), plan.label(adj.b));
            if la != lb {
                aggregates[(la - 1) as usize].boundary_length += adj.shared_perimeter;
                aggregates[(lb - 1) as usize].boundary_length += adj.shared_perimeter;
                conflicted_pos[e] = conflicted.len();
                conflicted.push(e);
            }
        }
        let county_splits = county_counts.iter().map(|c| county_split(c)).collect();
        Ok(PlanState {
            graph,
            labels: plan.labels().to_vec(),
            num_districts: plan.num_districts(),
            aggregates,
            county_counts,
            county_splits,
            conflicted,
            conflicted_pos,
            bboxes,
            scratch: RefCell::default(),
        })
    }

    pub fn graph(&self) -> &'g DistrictGraph {
        self.graph
    }

    pub fn num_districts(&self) -> u32 {
        self.num_districts
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn plan(&self) -> Plan {
        Plan {
            labels: self.labels.clone(),
            num_districts: self.num_districts,
        }
    }

    pub fn aggregate(&self, district: u32) -> &DistrictAggregate {
        &self.aggregates[(district - 1) as usize]
    }

    pub fn aggregates(&self) -> &[DistrictAggregate] {
        &self.aggregates
    }

    pub fn conflicted_count(&self) -> usize {
        self.conflicted.len()
    }

    pub fn conflicted_edges(&self) -> &[usize] {
        &self.conflicted
    }

    pub fn is_conflicted(&self, edge: usize) -> bool {
        self.conflicted_pos[edge] != ABSENT
    }

    /// Units of `county` in each district, indexed by `label - 1`.
    pub fn county_counts(&self, county: usize) -> &[u32] {
        &self.county_counts[county]
    }

    pub fn county_splits(&self) -> &[CountySplit] {
        &self.county_splits
    }

    /// County id → number of member units inside `district`.
    pub fn district_county_counts(&self, district: u32) -> BTreeMap<&str, u32> {
        let k = (district - 1) as usize;
        self.county_counts
            .iter()
            .enumerate()
            .filter(|(_, c)| c[k] > 0)
            .map(|(i, c)| (self.graph.counties()[i].as_str(), c[k]))
            .collect()
    }

    /// Bounding rectangle of the district, if unit bboxes are present.
    pub fn bbox(&self, district: u32) -> Option<BBox> {
        self.bbox_with(district, None, None)
    }

    /// Bounding rectangle with one unit hypothetically removed or added.
    pub fn bbox_with(&self, district: u32, remove: Option<usize>, add: Option<usize>) -> Option<BBox> {
        let t = &self.bboxes.as_ref()?[(district - 1) as usize];
        let rm = remove.and_then(|v| self.graph.vtd(v).bbox);
        let ad = add.and_then(|v| self.graph.vtd(v).bbox);
        t.bbox(rm.as_ref(), ad.as_ref())
    }

    /// Whether `district` induces a single connected component.
    pub fn is_contiguous(&self, district: u32) -> bool {
        let Some(start) = self.labels.iter().position(|&l| l == district) else {
            return false;
        };
        let target = self.aggregate(district).vtd_count as usize;
        self.reach_count(district, start, None, usize::MAX) == target
    }

    // BFS within `district` from `start`, skipping `skip`. Stops once
    // `stop_after` marked targets have been reached; returns the number of
    // district vertices visited (or targets reached when stopping early).
    fn reach_count(&self, district: u32, start: usize, skip: Option<usize>, stop_after: usize) -> usize {
        let mut s = self.scratch.borrow_mut();
        let epoch = s.next_epoch(self.labels.len());
        let Scratch { stamp, queue, .. } = &mut *s;
        stamp[start] = epoch;
        if let Some(x) = skip {
            stamp[x] = epoch;
        }
        queue.push_back(start);
        let mut visited = 1;
        while let Some(u) = queue.pop_front() {
            for nb in self.graph.neighbors(u) {
                let w = nb.vtd;
                if stamp[w] != epoch && self.labels[w] == district {
                    stamp[w] = epoch;
                    visited += 1;
                    if visited >= stop_after {
                        return visited;
                    }
                    queue.push_back(w);
                }
            }
        }
        visited
    }

    /// Whether the district currently holding `v` stays connected (and
    /// nonempty) once `v` leaves it. Assumes that district is connected now.
    pub fn donor_stays_connected(&self, v: usize) -> bool {
        let d = self.labels[v];
        if self.aggregate(d).vtd_count <= 1 {
            return false;
        }
        let same: Vec<usize> = self
            .graph
            .neighbors(v)
            .iter()
            .filter(|nb| self.labels[nb.vtd] == d)
            .map(|nb| nb.vtd)
            .collect();
        match same.len() {
            0 => false,
            1 => true,
            _ => {
                // The remaining district is connected iff every former
                // neighbor of v is reachable from the first one without v.
                let mut s = self.scratch.borrow_mut();
                let epoch = s.next_epoch(self.labels.len());
                let Scratch { stamp, queue, .. } = &mut *s;
                let mut pending = same.len() - 1;
                let want = epoch;
                let targets = &same[1..];
                stamp[v] = want;
                stamp[same[0]] = want;
                queue.push_back(same[0]);
                while let Some(u) = queue.pop_front() {
                    for nb in self.graph.neighbors(u) {
                        let w = nb.vtd;
                        if stamp[w] != want && self.labels[w] == d {
                            stamp[w] = want;
                            if targets.contains(&w) {
                                pending -= 1;
                                if pending == 0 {
                                    return true;
                                }
                            }
                            queue.push_back(w);
                        }
                    }
                }
                false
            }
        }
    }

    /// Computes the aggregates that flipping `v` to `to` would produce.
    pub fn preview_flip(&self, v: usize, to: u32) -> Result<FlipPreview> {
        let from = self.labels[v];
        if to == 0 || to > self.num_districts {
            return Err(Error::LabelOutOfRange {
                label: to,
                num_districts: self.num_districts,
            });
        }
        if to == from {
            return Err(Error::NoOpFlip(from));
        }
        let mut donor = *self.aggregate(from);
        if donor.vtd_count <= 1 {
            return Err(Error::EmptiesDistrict(from));
        }
        let mut acceptor = *self.aggregate(to);
        let vtd = self.graph.vtd(v);
        donor.population -= vtd.population;
        donor.area -= vtd.area;
        donor.minority_population -= vtd.minority_population;
        donor.vtd_count -= 1;
        acceptor.population += vtd.population;
        acceptor.area += vtd.area;
        acceptor.minority_population += vtd.minority_population;
        acceptor.vtd_count += 1;

        let mut conflicted = self.conflicted.len() as i64;
        let mut donor_delta = -vtd.outer_boundary_length;
        let mut acceptor_delta = vtd.outer_boundary_length;
        for nb in self.graph.neighbors(v) {
            let lw = self.labels[nb.vtd];
            if lw == from {
                donor_delta += nb.length;
                acceptor_delta += nb.length;
                conflicted += 1;
            } else if lw == to {
                donor_delta -= nb.length;
                acceptor_delta -= nb.length;
                conflicted -= 1;
            } else {
                donor_delta -= nb.length;
                acceptor_delta += nb.length;
            }
        }
        donor.boundary_length += donor_delta;
        acceptor.boundary_length += acceptor_delta;

        let c = self.graph.county_of(v);
        let mut counts = self.county_counts[c].clone();
        counts[(from - 1) as usize] -= 1;
        counts[(to - 1) as usize] += 1;

        Ok(FlipPreview {
            vtd: v,
            from,
            to,
            donor,
            acceptor,
            county_split: county_split(&counts),
            conflicted_after: conflicted as usize,
        })
    }

    /// Relabels `v` to `new_label`. Contiguity is not checked here.
    pub fn apply_flip(&mut self, v: usize, new_label: u32) -> Result<FlipDelta> {
        let p = self.preview_flip(v, new_label)?;
        Ok(self.commit(&p))
    }

    /// Applies a preview produced against the current state.
    pub fn commit(&mut self, p: &FlipPreview) -> FlipDelta {
        debug_assert_eq!(self.labels[p.vtd], p.from);
        let (fi, ti) = ((p.from - 1) as usize, (p.to - 1) as usize);
        let c = self.graph.county_of(p.vtd);
        let delta = FlipDelta {
            vtd: p.vtd,
            old_label: p.from,
            new_label: p.to,
            prev_donor: self.aggregates[fi],
            prev_acceptor: self.aggregates[ti],
            prev_county_split: self.county_splits[c],
            conflicted_delta: p.conflicted_after as i64 - self.conflicted.len() as i64,
        };
        self.aggregates[fi] = p.donor;
        self.aggregates[ti] = p.acceptor;
        self.county_counts[c][fi] -= 1;
        self.county_counts[c][ti] += 1;
        self.county_splits[c] = p.county_split;
        self.relabel(p.vtd, p.from, p.to);
        delta
    }

    /// Undoes a flip, restoring the prior state exactly.
    pub fn revert(&mut self, delta: &FlipDelta) {
        let (oi, ni) = ((delta.old_label - 1) as usize, (delta.new_label - 1) as usize);
        let c = self.graph.county_of(delta.vtd);
        self.aggregates[oi] = delta.prev_donor;
        self.aggregates[ni] = delta.prev_acceptor;
        self.county_counts[c][ni] -= 1;
        self.county_counts[c][oi] += 1;
        self.county_splits[c] = delta.prev_county_split;
        self.relabel(delta.vtd, delta.new_label, delta.old_label);
    }

    fn relabel(&mut self, v: usize, from: u32, to: u32) {
        self.labels[v] = to;
        if let (Some(t), Some(b)) = (self.bboxes.as_mut(), self.graph.vtd(v).bbox.as_ref()) {
            t[(from - 1) as usize].remove(b);
            t[(to - 1) as usize].add(b);
        }
        for nb in self.graph.neighbors(v) {
            let now = self.labels[nb.vtd] != to;
            let was = self.conflicted_pos[nb.edge] != ABSENT;
            if now && !was {
                self.conflicted_pos[nb.edge] = self.conflicted.len();
                self.conflicted.push(nb.edge);
            } else if !now && was {
                let pos = self.conflicted_pos[nb.edge];
                self.conflicted.swap_remove(pos);
                if let Some(&moved) = self.conflicted.get(pos) {
                    self.conflicted_pos[moved] = pos;
                }
                self.conflicted_pos[nb.edge] = ABSENT;
            }
        }
    }
}

/// Largest per-district symmetric difference, in units, between two plans.
pub fn plan_deviation(plan: &[u32], reference: &[u32], num_districts: u32) -> Result<u32> {
    if plan.len() != reference.len() {
        return Err(Error::PlanSize {
            plan: plan.len(),
            graph: reference.len(),
        });
    }
    let mut diff = vec![0u32; num_districts as usize + 1];
    for (&a, &b) in plan.iter().zip(reference) {
        if a != b {
            diff[a as usize] += 1;
            diff[b as usize] += 1;
        }
    }
    Ok(diff.into_iter().max().unwrap_or(0))
}

/// `max_i |D_i(state) Δ D_i(reference)|`.
pub fn max_district_deviation(state: &PlanState<'_>, reference: &Plan) -> Result<u32> {
    if reference.num_districts() != state.num_districts() {
        return Err(Error::DistrictCount {
            min: state.num_districts(),
            got: reference.num_districts(),
        });
    }
    plan_deviation(state.labels(), reference.labels(), state.num_districts())
}
