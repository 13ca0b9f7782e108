//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use redistrict::synth::{make_grid_state, snake_plan, SynthSpec};
use redistrict::tally::VoteTable;
use redistrict::{DistrictGraph, Plan, ScoreWeights};

pub fn grid(rows: usize, cols: usize, d: u32) -> (DistrictGraph, VoteTable, Plan) {
    let spec = SynthSpec::uniform(rows, cols, d);
    let (g, votes) = make_grid_state(&spec).unwrap();
    let plan = snake_plan(&spec, &g).unwrap();
    (g, votes, plan)
}

pub fn urban() -> (SynthSpec, DistrictGraph, VoteTable, Plan) {
    let spec = SynthSpec::urban_fixture();
    let (g, votes) = make_grid_state(&spec).unwrap();
    let plan = snake_plan(&spec, &g).unwrap();
    (spec, g, votes, plan)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Connected components of district `d` counted with union-find.
pub fn district_components(g: &DistrictGraph, labels: &[u32], d: u32) -> usize {
    let mut uf = UnionFind((0..g.len()).collect());
    for e in g.adjacencies() {
        if labels[e.a] == d && labels[e.b] == d {
            uf.union(e.a, e.b);
        }
    }
    let mut roots: Vec<usize> = (0..g.len()).filter(|&v| labels[v] == d).map(|v| uf.find(v)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Total isoperimetric score computed straight from the unit data.
pub fn oracle_score(g: &DistrictGraph, labels: &[u32], d: u32, w: &ScoreWeights) -> f64 {
    let k = d as usize;
    let mut pop = vec![0.0; k];
    let mut area = vec![0.0; k];
    let mut minority = vec![0.0; k];
    let mut perimeter = vec![0.0; k];
    for (v, u) in g.vtds().iter().enumerate() {
        let i = labels[v] as usize - 1;
        pop[i] += u.population;
        area[i] += u.area;
        minority[i] += u.minority_population;
        perimeter[i] += u.outer_boundary_length;
    }
    for e in g.adjacencies() {
        if labels[e.a] != labels[e.b] {
            perimeter[labels[e.a] as usize - 1] += e.shared_perimeter;
            perimeter[labels[e.b] as usize - 1] += e.shared_perimeter;
        }
    }
    let ideal = pop.iter().sum::<f64>() / k as f64;
    let jp = pop.iter().map(|p| (p / ideal - 1.0).powi(2)).sum::<f64>().sqrt();
    let ji: f64 = (0..k).map(|i| perimeter[i] * perimeter[i] / area[i]).sum();

    let (mut n2, mut w2, mut n3, mut w3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..g.num_counties() {
        let mut counts = vec![0u32; k];
        for &v in g.county_members(c) {
            counts[labels[v] as usize - 1] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let touched = counts.iter().filter(|&&x| x > 0).count();
        let total: u32 = counts.iter().sum();
        match touched {
            2 => {
                n2 += 1.0;
                w2 += (f64::from(counts[1]) / f64::from(total)).sqrt();
            }
            t if t >= 3 => {
                n3 += 1.0;
                w3 += (f64::from(total - counts[0] - counts[1]) / f64::from(total)).sqrt();
            }
            _ => {}
        }
    }
    let jc = n2 * w2 + w.m_c * n3 * w3;

    let mut fractions: Vec<f64> = (0..k).map(|i| if pop[i] > 0.0 { minority[i] / pop[i] } else { 0.0 }).collect();
    fractions.sort_by(|a, b| b.total_cmp(a));
    let h = |x: f64| if x > 0.0 { x.sqrt() } else { 0.0 };
    let jm = h(w.minority_target_1 - fractions[0]) + h(w.minority_target_2 - fractions[1]);

    w.w_p * jp + w.w_i * ji + w.w_c * jc + w.w_m * jm
}

/// Relabels districts in order of first appearance by unit index.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len() as u32 + 1;
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// `|{v : plan(v) = d} Δ {v : reference(v) = d}|`, maximized over `d`.
pub fn max_deviation(plan: &[u32], reference: &[u32], d: u32) -> u32 {
    (1..=d)
        .map(|k| {
            plan.iter()
                .zip(reference)
                .filter(|(&a, &b)| (a == k) != (b == k))
                .count() as u32
        })
        .max()
        .unwrap_or(0)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
