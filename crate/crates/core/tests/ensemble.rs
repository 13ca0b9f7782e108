mod common;

use redistrict::ensemble::{read_ensemble, write_ensemble};
use redistrict::plan::PlanState;
use redistrict::sampler::{
    chain_rng, generate_ensemble, metropolis, AnnealingSchedule, Chain, Neighborhood, SamplerConfig,
    SamplerSettings, ThresholdConfig,
};
use redistrict::synth::plant_packed_plan;
use redistrict::{Compactness, ScoreWeights};

use common::{grid, max_deviation, urban};

fn short_settings(d: u32, chains: u32, samples: u64) -> SamplerSettings {
    SamplerSettings {
        schedule: AnnealingSchedule {
            hot_steps: 500,
            ramp_steps: 500,
            cold_steps: 300,
            beta_hot: 0.0,
            beta_cold: 1.0,
        },
        num_districts: d,
        chains,
        target_samples: samples,
        rng_seed: 42,
        thresholds: ThresholdConfig::none(),
        ..SamplerSettings::default()
    }
}

#[test]
fn same_seed_same_records() {
    let (g, _, plan) = grid(8, 8, 4);
    let cfg = SamplerConfig::new(short_settings(4, 3, 5), plan);
    let a = generate_ensemble(&g, &cfg).unwrap();
    let b = generate_ensemble(&g, &cfg).unwrap();
    assert_eq!(a.records, b.records);
    let order: Vec<(u32, u64)> = a.records.iter().map(|r| (r.chain, r.cycle)).collect();
    let mut sorted = order.clone();
    sorted.sort_unstable();
    assert_eq!(order, sorted);
    assert_eq!(a.records.len(), 15);
}

#[test]
fn chain_zero_ignores_the_chain_count() {
    let (g, _, plan) = grid(8, 8, 4);
    let one = generate_ensemble(&g, &SamplerConfig::new(short_settings(4, 1, 4), plan.clone())).unwrap();
    let four = generate_ensemble(&g, &SamplerConfig::new(short_settings(4, 4, 4), plan)).unwrap();
    let chain0: Vec<_> = four.records.iter().filter(|r| r.chain == 0).cloned().collect();
    assert_eq!(one.records, chain0);
    assert_ne!(four.records[0].plan, four.records[4].plan);
}

#[test]
fn restart_mode_reheats_from_the_initial_plan() {
    let (g, _, plan) = grid(6, 6, 3);
    let mut s = short_settings(3, 1, 3);
    s.schedule = AnnealingSchedule::fixed(0.0, 0);
    s.restart = true;
    let e = generate_ensemble(&g, &SamplerConfig::new(s, plan.clone())).unwrap();
    assert!(e.records.iter().all(|r| r.plan == plan));
}

#[test]
fn jsonl_round_trip() {
    let (g, votes, plan) = grid(6, 6, 3);
    let e = generate_ensemble(&g, &SamplerConfig::new(short_settings(3, 2, 3), plan)).unwrap();
    let mut buf = Vec::new();
    write_ensemble(&mut buf, &g, &e.records, Some(&votes)).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 6);
    let back = read_ensemble(buf.as_slice(), &g, None).unwrap();
    assert_eq!(back.len(), e.records.len());
    for (a, b) in back.iter().zip(&e.records) {
        assert_eq!(a.plan, b.plan);
        assert_eq!((a.chain, a.cycle, a.passes), (b.chain, b.cycle, b.passes));
        assert_eq!(a.score.j_total, b.score.j_total);
    }
}

#[test]
fn neighborhood_bound_holds_at_every_step() {
    let (_, g, votes, _) = urban();
    let reference = plant_packed_plan(&g, &votes, 8).unwrap();
    let n = Neighborhood {
        reference: reference.clone(),
        max_deviation: 12,
    };
    let state = PlanState::new(&g, &reference).unwrap();
    let w = ScoreWeights {
        w_p: 50.0,
        ..ScoreWeights::default()
    };
    let mut chain = Chain::new(state, w, Compactness::Iso, Some(&n), chain_rng(9)).unwrap();
    let mut peak = 0;
    for t in 0..100_000 {
        chain.step(if t % 2 == 0 { 0.0 } else { 1.0 }).unwrap();
        let dev = max_deviation(chain.state().labels(), reference.labels(), 8);
        assert!(dev <= 12, "step {t}: {dev}");
        assert_eq!(chain.neighborhood().unwrap().current(), dev);
        peak = peak.max(dev);
        if t % 10_000 == 0 {
            chain.check_invariants().unwrap();
        }
    }
    assert!(peak >= 10, "chain never approached the bound: {peak}");
}

#[test]
fn acceptance_ignores_a_constant_shift() {
    for &(j, jn) in &[(1.0, 2.5), (10.0, 3.0), (0.0, 0.0), (100.0, 101.0)] {
        for &c in &[-50.0, 1e3, 7.25] {
            for &beta in &[0.0, 0.5, 1.0] {
                let a = metropolis(1.3, j, jn, beta);
                let b = metropolis(1.3, j + c, jn + c, beta);
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }
}

#[test]
fn default_schedule_reaches_population_target_on_ten_by_ten() {
    let (g, _, plan) = grid(10, 10, 4);
    let s = SamplerSettings {
        num_districts: 4,
        target_samples: 40,
        rng_seed: 3,
        ..SamplerSettings::default()
    };
    let e = generate_ensemble(&g, &SamplerConfig::new(s, plan)).unwrap();
    let good = e.records.iter().filter(|r| r.score.j_pop < 0.05).count();
    assert!(good * 4 >= e.records.len(), "{good} of {}", e.records.len());
    let rate = e.summary.mh_acceptance_rate;
    assert!(rate > 0.0 && rate < 1.0);
}
