mod common;

use std::collections::{BTreeSet, HashMap};

use redistrict::plan::PlanState;
use redistrict::sampler::{chain_rng, AnnealingSchedule, Chain, ProposalRatio, SamplerSettings};
use redistrict::synth::{enumerate_connected_plans, exact_distribution, gibbs, ExactDistribution};
use redistrict::{Compactness, DistrictGraph, Plan, ScoreWeights};

use common::{canonical, district_components, grid, total_variation};

/// Every labelling in `D^n`, kept if all parts are nonempty and connected.
fn brute_force(g: &DistrictGraph, d: u32) -> BTreeSet<Vec<u32>> {
    let n = g.len();
    let mut out = BTreeSet::new();
    let mut labels = vec![1u32; n];
    loop {
        let all_used = (1..=d).all(|k| labels.contains(&k));
        if all_used && (1..=d).all(|k| district_components(g, &labels, k) == 1) {
            out.insert(canonical(&labels));
        }
        let mut i = 0;
        while i < n && labels[i] == d {
            labels[i] = 1;
            i += 1;
        }
        if i == n {
            return out;
        }
        labels[i] += 1;
    }
}

#[test]
fn enumeration_matches_brute_force() {
    for (rows, cols, d) in [(2, 3, 2), (2, 4, 2), (2, 4, 3), (3, 3, 2), (3, 3, 3), (1, 6, 4), (2, 3, 6)] {
        let (g, _, _) = grid(rows, cols, d);
        let plans = enumerate_connected_plans(&g, d, None).unwrap();
        let got: Vec<Vec<u32>> = plans.iter().map(|p| p.labels().to_vec()).collect();
        let expected: Vec<Vec<u32>> = brute_force(&g, d).into_iter().collect();
        assert_eq!(got, expected, "{rows}x{cols} D={d}");
    }
}

#[test]
fn path_partitions_are_compositions() {
    // a path of n units splits into D connected parts in C(n-1, D-1) ways
    let (g, _, _) = grid(1, 8, 3);
    assert_eq!(enumerate_connected_plans(&g, 3, None).unwrap().len(), 21);
}

#[test]
fn balanced_enumeration_is_a_filter() {
    let (g, _, _) = grid(3, 4, 2);
    let all = enumerate_connected_plans(&g, 2, None).unwrap();
    let balanced = enumerate_connected_plans(&g, 2, Some(0.0)).unwrap();
    let expected: Vec<&Plan> = all.iter().filter(|p| p.members(1).len() == 6).collect();
    assert_eq!(balanced.iter().collect::<Vec<_>>(), expected);
}

#[test]
fn gibbs_probabilities_normalize() {
    let (g, _, _) = grid(3, 3, 2);
    let w = ScoreWeights::default();
    let exact = exact_distribution(&g, 2, &w, Compactness::Iso, 0.5, None).unwrap();
    let total: f64 = exact.entries.iter().map(|e| e.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let best = exact.entries.iter().map(|e| e.j).fold(f64::INFINITY, f64::min);
    for e in &exact.entries {
        let ratio = e.probability / exact.entries.iter().find(|x| x.j == best).unwrap().probability;
        assert!((ratio - (-(0.5) * (e.j - best)).exp()).abs() < 1e-9);
    }
    let uniform = gibbs(&g, enumerate_connected_plans(&g, 2, None).unwrap(), &w, Compactness::Iso, 0.0).unwrap();
    let p0 = 1.0 / uniform.entries.len() as f64;
    assert!(uniform.entries.iter().all(|e| (e.probability - p0).abs() < 1e-12));
}

#[allow(clippy::too_many_arguments)]
fn empirical_tv(
    g: &DistrictGraph,
    start: &Plan,
    exact: &ExactDistribution,
    w: ScoreWeights,
    beta: f64,
    steps: u64,
    ratio: ProposalRatio,
    seed: u64,
) -> f64 {
    let index: HashMap<Vec<u32>, usize> =
        exact.entries.iter().enumerate().map(|(i, e)| (e.plan.labels().to_vec(), i)).collect();
    let state = PlanState::new(g, start).unwrap();
    let mut chain = Chain::new(state, w, Compactness::Iso, None, chain_rng(seed))
        .unwrap()
        .with_proposal_ratio(ratio);
    let mut counts = vec![0u64; exact.entries.len()];
    let mut outside = 0u64;
    for t in 0..steps {
        chain.step(beta).unwrap();
        match index.get(&canonical(chain.state().labels())) {
            Some(&i) => counts[i] += 1,
            None => outside += 1,
        }
        if t % 10_000 == 0 {
            chain.check_invariants().unwrap();
        }
    }
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
    let q: Vec<f64> = exact.entries.iter().map(|e| e.probability).collect();
    total_variation(&p, &q) + 0.5 * outside as f64 / steps as f64
}

fn zero_weights() -> ScoreWeights {
    ScoreWeights {
        w_p: 0.0,
        w_i: 0.0,
        w_c: 0.0,
        w_m: 0.0,
        ..ScoreWeights::default()
    }
}

#[test]
fn exact_ratio_chain_is_stationary_on_uniform_target() {
    let (g, _, plan) = grid(3, 3, 2);
    let exact = exact_distribution(&g, 2, &zero_weights(), Compactness::Iso, 1.0, None).unwrap();
    let tv = empirical_tv(&g, &plan, &exact, zero_weights(), 1.0, 2_000_000, ProposalRatio::Exact, 7);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn exact_ratio_chain_is_stationary_with_a_score() {
    let (g, _, plan) = grid(3, 3, 2);
    let w = ScoreWeights {
        w_p: 2.0,
        w_i: 0.1,
        ..zero_weights()
    };
    let exact = exact_distribution(&g, 2, &w, Compactness::Iso, 1.0, None).unwrap();
    let tv = empirical_tv(&g, &plan, &exact, w, 1.0, 2_000_000, ProposalRatio::Exact, 11);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn conflicted_edge_ratio_is_biased() {
    // the |C|/|C'| correction ignores how many edges join a unit to the
    // target district, so even the flat target is missed by a wide margin
    let (g, _, plan) = grid(3, 3, 2);
    let exact = exact_distribution(&g, 2, &zero_weights(), Compactness::Iso, 1.0, None).unwrap();
    let tv = empirical_tv(&g, &plan, &exact, zero_weights(), 1.0, 2_000_000, ProposalRatio::Conflicted, 7);
    assert!(tv > 0.05, "tv {tv}");
}

#[test]
fn zero_schedule_emits_initial_plan() {
    let (g, _, plan) = grid(4, 4, 2);
    let settings = SamplerSettings {
        schedule: AnnealingSchedule::fixed(0.0, 0),
        num_districts: 2,
        ..SamplerSettings::default()
    };
    let state = PlanState::new(&g, &plan).unwrap();
    let mut chain = Chain::new(state, settings.weights, Compactness::Iso, None, chain_rng(3)).unwrap();
    let rec = redistrict::sampler::run_annealing_cycle(&mut chain, &settings, 0, 0).unwrap();
    assert_eq!(rec.plan, plan);
}

#[test]
fn hot_cycles_sample_the_flat_distribution() {
    // cycles of pure beta = 0 steps, one emitted plan per cycle
    let (g, _, plan) = grid(3, 3, 2);
    let exact = exact_distribution(&g, 2, &zero_weights(), Compactness::Iso, 0.0, None).unwrap();
    let settings = SamplerSettings {
        schedule: AnnealingSchedule::fixed(0.0, 50),
        num_districts: 2,
        weights: zero_weights(),
        proposal_ratio: ProposalRatio::Exact,
        ..SamplerSettings::default()
    };
    let state = PlanState::new(&g, &plan).unwrap();
    let mut chain = Chain::new(state, settings.weights, Compactness::Iso, None, chain_rng(5))
        .unwrap()
        .with_proposal_ratio(ProposalRatio::Exact);
    let cycles = 100_000;
    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    for c in 0..cycles {
        let rec = redistrict::sampler::run_annealing_cycle(&mut chain, &settings, 0, c).unwrap();
        *counts.entry(canonical(rec.plan.labels())).or_default() += 1;
    }
    let p: Vec<f64> = exact
        .entries
        .iter()
        .map(|e| *counts.get(e.plan.labels()).unwrap_or(&0) as f64 / cycles as f64)
        .collect();
    let q: Vec<f64> = exact.entries.iter().map(|e| e.probability).collect();
    let tv = total_variation(&p, &q);
    assert!(tv < 0.03, "tv {tv}");
}
