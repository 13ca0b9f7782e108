//! The immutable unit-adjacency graph that plans partition.
//!
//! Vertices are voting units carrying population, area, minority population
//! and a county. Edges join units sharing a border of positive length; units
//! meeting only at a point are not adjacent. The state exterior is not a
//! vertex: each unit instead records the length of border it shares with the
//! outside, which contributes to the perimeter of whichever district holds it.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NODES_HEADER: &str = "id,population,area,minority_population,county,outer_boundary_length";
pub const NODES_BBOX_HEADER: &str =
    "id,population,area,minority_population,county,outer_boundary_length,min_x,min_y,max_x,max_y";
pub const EDGES_HEADER: &str = "id_a,id_b,shared_perimeter";

/// Axis-aligned rectangle in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0) * (self.max_y - self.min_y).max(0.0)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }
}

/// A voting tabulation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Vtd {
    pub id: String,
    pub population: f64,
    pub area: f64,
    pub minority_population: f64,
    pub county: String,
    pub outer_boundary_length: f64,
    pub bbox: Option<BBox>,
}

/// An edge record as read from input, keyed by unit ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub id_a: String,
    pub id_b: String,
    pub shared_perimeter: f64,
}

impl EdgeRecord {
    pub fn new(id_a: impl Into<String>, id_b: impl Into<String>, shared_perimeter: f64) -> Self {
        EdgeRecord {
            id_a: id_a.into(),
            id_b: id_b.into(),
            shared_perimeter,
        }
    }
}

/// An edge between two unit indices, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacency {
    pub a: usize,
    pub b: usize,
    pub shared_perimeter: f64,
}

impl Adjacency {
    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub vtd: usize,
    pub edge: usize,
    pub length: f64,
}

/// One broken invariant found while validating a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    DuplicateId(String),
    UnknownEndpoint { id_a: String, id_b: String, missing: String },
    SelfLoop(String),
    DuplicateEdge(String, String),
    NonPositivePerimeter(String, String),
    NonPositiveArea(String),
    NegativePopulation(String),
    MinorityExceedsPopulation(String),
    NegativeOuterBoundary(String),
    Disconnected { components: Vec<Vec<String>> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no units"),
            Violation::DuplicateId(id) => write!(f, "duplicate unit id `{id}`"),
            Violation::UnknownEndpoint { id_a, id_b, missing } => {
                write!(f, "edge ({id_a}, {id_b}) references unknown unit `{missing}`")
            }
            Violation::SelfLoop(id) => write!(f, "self-loop on `{id}`"),
            Violation::DuplicateEdge(a, b) => write!(f, "edge ({a}, {b}) listed more than once"),
            Violation::NonPositivePerimeter(a, b) => {
                write!(f, "edge ({a}, {b}) has non-positive shared perimeter")
            }
            Violation::NonPositiveArea(id) => write!(f, "unit `{id}` has non-positive area"),
            Violation::NegativePopulation(id) => write!(f, "unit `{id}` has negative population"),
            Violation::MinorityExceedsPopulation(id) => {
                write!(f, "unit `{id}` has minority population above total population")
            }
            Violation::NegativeOuterBoundary(id) => {
                write!(f, "unit `{id}` has negative outer boundary length")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph has {} components:", components.len())?;
                for c in components {
                    write!(f, " [{}]", c.join(" "))?;
                }
                Ok(())
            }
        }
    }
}

/// Every invariant violation found in a graph; empty iff the graph is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DistrictGraph {
    vtds: Vec<Vtd>,
    adjacencies: Vec<Adjacency>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<Neighbor>>,
    county_of: Vec<usize>,
    counties: Vec<String>,
    county_members: Vec<Vec<usize>>,
    total_population: f64,
    total_area: f64,
    // Structural problems tolerated by `from_parts_unchecked`.
    structural: Vec<Violation>,
}

impl DistrictGraph {
    /// Builds and fully validates a graph. The first violation found is
    /// returned as the error.
    pub fn from_parts(vtds: Vec<Vtd>, edges: Vec<EdgeRecord>) -> Result<Self> {
        let g = Self::from_parts_unchecked(vtds, edges)?;
        match g.validate().violations.into_iter().next() {
            Some(v) => Err(Error::Graph(v)),
            None => Ok(g),
        }
    }

    /// Builds a graph without checking value invariants. Only problems that
    /// make indexing impossible (duplicate ids, unknown endpoints) are errors.
    /// Self-loops and repeated edges are dropped and reported by `validate`.
    pub fn from_parts_unchecked(vtds: Vec<Vtd>, edges: Vec<EdgeRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vtds.len());
        for (i, v) in vtds.iter().enumerate() {
            if index.insert(v.id.clone(), i).is_some() {
                return Err(Error::Graph(Violation::DuplicateId(v.id.clone())));
            }
        }

        let mut counties: Vec<String> = Vec::new();
        let mut county_lookup: HashMap<&str, usize> = HashMap::new();
        let mut county_of = Vec::with_capacity(vtds.len());
        for v in &vtds {
            let next = counties.len();
            let c = *county_lookup.entry(v.county.as_str()).or_insert(next);
            if c == next {
                counties.push(v.county.clone());
            }
            county_of.push(c);
        }
        let mut county_members = vec![Vec::new(); counties.len()];
        for (i, &c) in county_of.iter().enumerate() {
            county_members[c].push(i);
        }

        let mut structural = Vec::new();
        let mut seen = HashSet::new();
        let mut adjacencies = Vec::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); vtds.len()];
        for e in edges {
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| {
                    Error::Graph(Violation::UnknownEndpoint {
                        id_a: e.id_a.clone(),
                        id_b: e.id_b.clone(),
                        missing: id.to_string(),
                    })
                })
            };
            let ia = lookup(&e.id_a)?;
            let ib = lookup(&e.id_b)?;
            if ia == ib {
                structural.push(Violation::SelfLoop(e.id_a.clone()));
                continue;
            }
            let (a, b) = if ia < ib { (ia, ib) } else { (ib, ia) };
            if !seen.insert((a, b)) {
                structural.push(Violation::DuplicateEdge(e.id_a.clone(), e.id_b.clone()));
                continue;
            }
            let edge = adjacencies.len();
            adjacencies.push(Adjacency {
                a,
                b,
                shared_perimeter: e.shared_perimeter,
            });
            neighbors[a].push(Neighbor {
                vtd: b,
                edge,
                length: e.shared_perimeter,
            });
            neighbors[b].push(Neighbor {
                vtd: a,
                edge,
                length: e.shared_perimeter,
            });
        }

        let total_population = vtds.iter().map(|v| v.population).sum();
        let total_area = vtds.iter().map(|v| v.area).sum();
        Ok(DistrictGraph {
            vtds,
            adjacencies,
            index,
            neighbors,
            county_of,
            counties,
            county_members,
            total_population,
            total_area,
            structural,
        })
    }

    /// Lists every invariant violation. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = self.structural.clone();
        if self.vtds.is_empty() {
            violations.push(Violation::Empty);
            return ValidationReport { violations };
        }
        for v in &self.vtds {
            if !(v.area > 0.0) {
                violations.push(Violation::NonPositiveArea(v.id.clone()));
            }
            if !(v.population >= 0.0) {
                violations.push(Violation::NegativePopulation(v.id.clone()));
            }
            if !(v.minority_population >= 0.0) || v.minority_population > v.population {
                violations.push(Violation::MinorityExceedsPopulation(v.id.clone()));
            }
            if !(v.outer_boundary_length >= 0.0) {
                violations.push(Violation::NegativeOuterBoundary(v.id.clone()));
            }
        }
        for e in &self.adjacencies {
            if !(e.shared_perimeter > 0.0) {
                violations.push(Violation::NonPositivePerimeter(
                    self.vtds[e.a].id.clone(),
                    self.vtds[e.b].id.clone(),
                ));
            }
        }
        let components = self.components();
        if components.len() > 1 {
            violations.push(Violation::Disconnected {
                components: components
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| self.vtds[i].id.clone()).collect())
                    .collect(),
            });
        }
        ValidationReport { violations }
    }

    /// Connected components by BFS, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vtds.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for nb in &self.neighbors[u] {
                    if !seen[nb.vtd] {
                        seen[nb.vtd] = true;
                        comp.push(nb.vtd);
                        queue.push_back(nb.vtd);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.vtds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vtds.is_empty()
    }

    pub fn vtds(&self) -> &[Vtd] {
        &self.vtds
    }

    pub fn vtd(&self, i: usize) -> &Vtd {
        &self.vtds[i]
    }

    pub fn adjacencies(&self) -> &[Adjacency] {
        &self.adjacencies
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn county_of(&self, i: usize) -> usize {
        self.county_of[i]
    }

    pub fn counties(&self) -> &[String] {
        &self.counties
    }

    pub fn county_members(&self, county: usize) -> &[usize] {
        &self.county_members[county]
    }

    pub fn num_counties(&self) -> usize {
        self.counties.len()
    }

    pub fn total_population(&self) -> f64 {
        self.total_population
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn has_bboxes(&self) -> bool {
        self.vtds.iter().all(|v| v.bbox.is_some())
    }

    /// Writes `nodes.csv` and `edges.csv` in the same format `load_graph` reads.
    pub fn write_csv<N: Write, E: Write>(&self, nodes: N, edges: E) -> Result<()> {
        let with_bbox = self.has_bboxes() && !self.vtds.is_empty();
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(nodes);
        let header = if with_bbox { NODES_BBOX_HEADER } else { NODES_HEADER };
        w.write_record(header.split(','))?;
        for v in &self.vtds {
            let mut rec = vec![
                v.id.clone(),
                v.population.to_string(),
                v.area.to_string(),
                v.minority_population.to_string(),
                v.county.clone(),
                v.outer_boundary_length.to_string(),
            ];
            if let (true, Some(b)) = (with_bbox, v.bbox) {
                rec.extend([b.min_x, b.min_y, b.max_x, b.max_y].iter().map(f64::to_string));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(edges);
        w.write_record(EDGES_HEADER.split(','))?;
        for e in &self.adjacencies {
            w.write_record([
                self.vtds[e.a].id.as_str(),
                self.vtds[e.b].id.as_str(),
                &e.shared_perimeter.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_header(file: &'static str, found: &csv::StringRecord, allowed: &[&str]) -> Result<usize> {
    let found_joined = found.iter().collect::<Vec<_>>().join(",");
    allowed
        .iter()
        .find(|h| **h == found_joined)
        .map(|h| h.split(',').count())
        .ok_or_else(|| Error::Header {
            file,
            expected: allowed.join("` or `"),
            found: found_joined,
        })
}

fn parse_f64(file: &'static str, field: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Header {
        file,
        expected: format!("a number in column {field}"),
        found: raw.to_string(),
    })
}

pub(crate) fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

/// Reads nodes and edges tables and returns a validated graph.
pub fn load_graph<N: Read, E: Read>(nodes: N, edges: E) -> Result<DistrictGraph> {
    let mut rdr = csv_reader(nodes);
    let width = check_header("nodes.csv", rdr.headers()?, &[NODES_HEADER, NODES_BBOX_HEADER])?;
    let mut vtds = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize, name: &str| parse_f64("nodes.csv", name, &rec[i]);
        let bbox = if width == 10 {
            Some(BBox {
                min_x: num(6, "min_x")?,
                min_y: num(7, "min_y")?,
                max_x: num(8, "max_x")?,
                max_y: num(9, "max_y")?,
            })
        } else {
            None
        };
        vtds.push(Vtd {
            id: rec[0].to_string(),
            population: num(1, "population")?,
            area: num(2, "area")?,
            minority_population: num(3, "minority_population")?,
            county: rec[4].to_string(),
            outer_boundary_length: num(5, "outer_boundary_length")?,
            bbox,
        });
    }

    let mut rdr = csv_reader(edges);
    check_header("edges.csv", rdr.headers()?, &[EDGES_HEADER])?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        records.push(EdgeRecord {
            id_a: rec[0].to_string(),
            id_b: rec[1].to_string(),
            shared_perimeter: parse_f64("edges.csv", "shared_perimeter", &rec[2])?,
        });
    }
    DistrictGraph::from_parts(vtds, records)
}

/// `N_pop / D`, unrounded.
pub fn ideal_population(g: &DistrictGraph, num_districts: u32) -> Result<f64> {
    if num_districts == 0 {
        return Err(Error::DistrictCount { min: 1, got: 0 });
    }
    Ok(g.total_population() / f64::from(num_districts))
}
