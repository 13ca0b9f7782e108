//! Metropolis–Hastings over district plans with single-unit boundary flips,
//! a simulated-annealing inverse temperature schedule, post-hoc threshold
//! filtering and an optional constraint to stay near a reference plan.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DistrictGraph;
use crate::plan::{plan_deviation, DistrictAggregate, FlipPreview, Plan, PlanState};
use crate::score::{score_after, score_components, Compactness, ScoreBreakdown, ScoreWeights};

/// Per-chain random stream. ChaCha8 is counter based and produces the same
/// sequence on every platform.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingSchedule {
    pub hot_steps: u64,
    pub ramp_steps: u64,
    pub cold_steps: u64,
    pub beta_hot: f64,
    pub beta_cold: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule {
            hot_steps: 40_000,
            ramp_steps: 60_000,
            cold_steps: 20_000,
            beta_hot: 0.0,
            beta_cold: 1.0,
        }
    }
}

impl AnnealingSchedule {
    pub fn fixed(beta: f64, steps: u64) -> Self {
        AnnealingSchedule {
            hot_steps: 0,
            ramp_steps: 0,
            cold_steps: steps,
            beta_hot: beta,
            beta_cold: beta,
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.hot_steps + self.ramp_steps + self.cold_steps
    }

    /// Same betas, every phase `factor` times longer.
    pub fn stretched(&self, factor: u64) -> Self {
        AnnealingSchedule {
            hot_steps: self.hot_steps * factor,
            ramp_steps: self.ramp_steps * factor,
            cold_steps: self.cold_steps * factor,
            ..*self
        }
    }

    /// Inverse temperature for step `t` of a cycle.
    pub fn beta_at(&self, t: u64) -> f64 {
        if t < self.hot_steps {
            self.beta_hot
        } else if t < self.hot_steps + self.ramp_steps {
            let frac = (t - self.hot_steps) as f64 / self.ramp_steps as f64;
            self.beta_hot + (self.beta_cold - self.beta_hot) * frac
        } else {
            self.beta_cold
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_hot >= 0.0 && self.beta_cold >= self.beta_hot && self.beta_cold.is_finite()) {
            return Err(Error::Config("need 0 <= beta_hot <= beta_cold".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub max_pop_deviation: f64,
    pub max_district_iso: Option<f64>,
    pub forbid_3way_county_splits: bool,
    pub minority_floor_1: f64,
    pub minority_floor_2: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            max_pop_deviation: 0.01,
            max_district_iso: Some(60.0),
            forbid_3way_county_splits: true,
            minority_floor_1: 0.40,
            minority_floor_2: 0.335,
        }
    }
}

impl ThresholdConfig {
    /// Accepts everything.
    pub fn none() -> Self {
        ThresholdConfig {
            max_pop_deviation: 1.0,
            max_district_iso: None,
            forbid_3way_county_splits: false,
            minority_floor_1: 0.0,
            minority_floor_2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.max_pop_deviation, self.minority_floor_1, self.minority_floor_2] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config("threshold fractions must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThresholdFailure {
    PopulationDeviation,
    Isoperimetric,
    CountySplit3Way,
    MinorityFloor,
}

/// Serializable sampler parameters; the plans live in [`SamplerConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub weights: ScoreWeights,
    pub schedule: AnnealingSchedule,
    pub thresholds: ThresholdConfig,
    pub compactness: Compactness,
    pub num_districts: u32,
    /// Samples emitted by each chain.
    pub target_samples: u64,
    pub rng_seed: u64,
    pub chains: u32,
    /// Restart every cycle from the initial plan instead of continuing.
    pub restart: bool,
    pub proposal_ratio: ProposalRatio,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            weights: ScoreWeights::default(),
            schedule: AnnealingSchedule::default(),
            thresholds: ThresholdConfig::default(),
            compactness: Compactness::Iso,
            num_districts: 13,
            target_samples: 1,
            rng_seed: 0,
            chains: 1,
            restart: false,
            proposal_ratio: ProposalRatio::Conflicted,
        }
    }
}

/// Reference plan and the largest per-district deviation allowed from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub reference: Plan,
    pub max_deviation: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub settings: SamplerSettings,
    pub initial_plan: Plan,
    pub neighborhood: Option<Neighborhood>,
}

impl SamplerConfig {
    pub fn new(settings: SamplerSettings, initial_plan: Plan) -> Self {
        SamplerConfig {
            settings,
            initial_plan,
            neighborhood: None,
        }
    }

    pub fn validate(&self, g: &DistrictGraph) -> Result<()> {
        let s = &self.settings;
        s.weights.validate()?;
        s.schedule.validate()?;
        s.thresholds.validate()?;
        if s.target_samples < 1 {
            return Err(Error::Config("target_samples must be at least 1".into()));
        }
        if s.chains < 1 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if s.num_districts < 2 {
            return Err(Error::DistrictCount {
                min: 2,
                got: s.num_districts,
            });
        }
        if self.initial_plan.num_districts() != s.num_districts || self.initial_plan.len() != g.len() {
            return Err(Error::Config(
                "initial plan does not match the graph and district count".into(),
            ));
        }
        let state = PlanState::new(g, &self.initial_plan)?;
        if let Some(d) = (1..=s.num_districts).find(|&d| !state.is_contiguous(d)) {
            return Err(Error::Config(format!("initial plan district {d} is not contiguous")));
        }
        if s.compactness == Compactness::Dispersion && !g.has_bboxes() {
            return Err(Error::Config("dispersion compactness needs unit bboxes".into()));
        }
        if let Some(n) = &self.neighborhood {
            if n.reference.len() != g.len() || n.reference.num_districts() != s.num_districts {
                return Err(Error::Config("neighborhood reference does not match the graph".into()));
            }
            let dev = plan_deviation(self.initial_plan.labels(), n.reference.labels(), s.num_districts)?;
            if dev > n.max_deviation {
                return Err(Error::Config(format!(
                    "initial plan deviates {dev} units from the reference, limit {}",
                    n.max_deviation
                )));
            }
        }
        Ok(())
    }
}

/// Per-district symmetric difference against a reference plan, kept in step
/// with the chain.
#[derive(Debug, Clone)]
pub struct NeighborhoodTracker {
    reference: Vec<u32>,
    max_deviation: u32,
    sym_diff: Vec<u32>,
}

impl NeighborhoodTracker {
    pub fn new(state: &PlanState<'_>, n: &Neighborhood) -> Self {
        let mut sym_diff = vec![0u32; state.num_districts() as usize + 1];
        for (&a, &b) in state.labels().iter().zip(n.reference.labels()) {
            if a != b {
                sym_diff[a as usize] += 1;
                sym_diff[b as usize] += 1;
            }
        }
        NeighborhoodTracker {
            reference: n.reference.labels().to_vec(),
            max_deviation: n.max_deviation,
            sym_diff,
        }
    }

    pub fn current(&self) -> u32 {
        self.sym_diff.iter().copied().max().unwrap_or(0)
    }

    fn shifted(&self, v: usize, from: u32, to: u32) -> (u32, u32) {
        let r = self.reference[v];
        let f = self.sym_diff[from as usize];
        let t = self.sym_diff[to as usize];
        let f = if r == from { f + 1 } else { f - 1 };
        let t = if r == to { t - 1 } else { t + 1 };
        (f, t)
    }

    /// Whether moving `v` from `from` to `to` keeps every district within
    /// the allowed deviation.
    pub fn allows(&self, v: usize, from: u32, to: u32) -> bool {
        let (f, t) = self.shifted(v, from, to);
        f <= self.max_deviation
            && t <= self.max_deviation
            && self
                .sym_diff
                .iter()
                .enumerate()
                .all(|(d, &x)| d as u32 == from || d as u32 == to || x <= self.max_deviation)
    }

    fn commit(&mut self, v: usize, from: u32, to: u32) {
        let (f, t) = self.shifted(v, from, to);
        self.sym_diff[from as usize] = f;
        self.sym_diff[to as usize] = t;
    }
}

/// A proposed relabelling of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flip {
    pub vtd: usize,
    pub to: u32,
}

/// Picks a conflicted edge uniformly, then one of its endpoints with
/// probability one half, and proposes moving that endpoint into the other
/// endpoint's district.
pub fn propose<R: Rng + ?Sized>(state: &PlanState<'_>, rng: &mut R) -> Result<Flip> {
    let edges = state.conflicted_edges();
    if edges.is_empty() {
        return Err(Error::NoConflictedEdges);
    }
    let e = state.graph().adjacencies()[edges[rng.gen_range(0..edges.len())]];
    let (u, v) = if rng.gen::<bool>() { (e.a, e.b) } else { (e.b, e.a) };
    Ok(Flip {
        vtd: u,
        to: state.label(v),
    })
}

/// How the proposal probabilities enter the acceptance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalRatio {
    /// `|C(x)| / |C(x')|` only. A unit with several neighbors in the target
    /// district is proposed more often than this accounts for, so the chain
    /// is not exactly reversible with respect to `exp(-beta J)`.
    #[default]
    Conflicted,
    /// Also weighs by the number of edges joining the unit to the target
    /// district before the move and to its old district after it, which
    /// makes the chain reversible.
    Exact,
}

/// `min(1, conflicted / conflicted' * exp(-beta * (J' - J)))`.
pub fn acceptance_ratio(conflicted: usize, conflicted_after: usize, j: f64, j_after: f64, beta: f64) -> f64 {
    if conflicted_after == 0 {
        return 0.0;
    }
    metropolis(conflicted as f64 / conflicted_after as f64, j, j_after, beta)
}

/// `min(1, q_ratio * exp(-beta * (J' - J)))`, zero for a rejected `J'`.
pub fn metropolis(q_ratio: f64, j: f64, j_after: f64, beta: f64) -> f64 {
    if !j_after.is_finite() {
        return 0.0;
    }
    (q_ratio * (-beta * (j_after - j)).exp()).min(1.0)
}

// Number of edges from `v` into `district`.
fn links(state: &PlanState<'_>, v: usize, district: u32) -> usize {
    state
        .graph()
        .neighbors(v)
        .iter()
        .filter(|nb| state.label(nb.vtd) == district)
        .count()
}

/// Outcome of evaluating a candidate flip.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub probability: f64,
    pub preview: Option<FlipPreview>,
    pub score: Option<ScoreBreakdown>,
}

impl Evaluation {
    fn refused() -> Self {
        Evaluation {
            probability: 0.0,
            preview: None,
            score: None,
        }
    }
}

/// Scores a candidate and returns its Metropolis–Hastings acceptance
/// probability. Emptying or disconnecting the donor district, or leaving
/// the neighborhood, gives probability zero.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    state: &PlanState<'_>,
    current: &ScoreBreakdown,
    flip: Flip,
    beta: f64,
    w: &ScoreWeights,
    compactness: Compactness,
    neighborhood: Option<&NeighborhoodTracker>,
    ratio: ProposalRatio,
) -> Result<Evaluation> {
    let preview = match state.preview_flip(flip.vtd, flip.to) {
        Ok(p) => p,
        Err(Error::EmptiesDistrict(_)) => return Ok(Evaluation::refused()),
        Err(e) => return Err(e),
    };
    if let Some(n) = neighborhood {
        if !n.allows(flip.vtd, preview.from, preview.to) {
            return Ok(Evaluation::refused());
        }
    }
    if !state.donor_stays_connected(flip.vtd) {
        return Ok(Evaluation::refused());
    }
    let score = score_after(state, &preview, w, compactness)?;
    let (c, c_after) = (state.conflicted_count(), preview.conflicted_after);
    let probability = match ratio {
        ProposalRatio::Conflicted => acceptance_ratio(c, c_after, current.j_total, score.j_total, beta),
        ProposalRatio::Exact => {
            let forward = links(state, flip.vtd, preview.to) as f64 / c as f64;
            let backward = links(state, flip.vtd, preview.from) as f64 / c_after as f64;
            metropolis(backward / forward, current.j_total, score.j_total, beta)
        }
    };
    Ok(Evaluation {
        probability,
        preview: Some(preview),
        score: Some(score),
    })
}

/// Acceptance probability of `flip` from the current state.
pub fn acceptance_probability(
    state: &PlanState<'_>,
    flip: Flip,
    beta: f64,
    w: &ScoreWeights,
    compactness: Compactness,
    neighborhood: Option<&NeighborhoodTracker>,
) -> Result<f64> {
    let current = score_components(state, w, compactness)?;
    Ok(evaluate(state, &current, flip, beta, w, compactness, neighborhood, ProposalRatio::Conflicted)?.probability)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub proposed: u64,
    pub accepted: u64,
}

/// One Markov chain: a plan state, its cached score and its random stream.
#[derive(Debug, Clone)]
pub struct Chain<'g> {
    state: PlanState<'g>,
    score: ScoreBreakdown,
    weights: ScoreWeights,
    compactness: Compactness,
    neighborhood: Option<NeighborhoodTracker>,
    ratio: ProposalRatio,
    rng: ChainRng,
    pub stats: ChainStats,
}

impl<'g> Chain<'g> {
    pub fn new(
        state: PlanState<'g>,
        weights: ScoreWeights,
        compactness: Compactness,
        neighborhood: Option<&Neighborhood>,
        rng: ChainRng,
    ) -> Result<Self> {
        let score = score_components(&state, &weights, compactness)?;
        let neighborhood = neighborhood.map(|n| NeighborhoodTracker::new(&state, n));
        Ok(Chain {
            state,
            score,
            weights,
            compactness,
            neighborhood,
            ratio: ProposalRatio::Conflicted,
            rng,
            stats: ChainStats::default(),
        })
    }

    pub fn with_proposal_ratio(mut self, ratio: ProposalRatio) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn state(&self) -> &PlanState<'g> {
        &self.state
    }

    pub fn score(&self) -> &ScoreBreakdown {
        &self.score
    }

    pub fn neighborhood(&self) -> Option<&NeighborhoodTracker> {
        self.neighborhood.as_ref()
    }

    pub fn rng_mut(&mut self) -> &mut ChainRng {
        &mut self.rng
    }

    /// Replaces the plan, keeping the random stream.
    pub fn reset(&mut self, plan: &Plan, neighborhood: Option<&Neighborhood>) -> Result<()> {
        self.state = PlanState::new(self.state.graph(), plan)?;
        self.score = score_components(&self.state, &self.weights, self.compactness)?;
        self.neighborhood = neighborhood.map(|n| NeighborhoodTracker::new(&self.state, n));
        Ok(())
    }

    /// Full recheck: every district nonempty and connected, cached score and
    /// neighborhood bound consistent.
    pub fn check_invariants(&self) -> Result<()> {
        for d in 1..=self.state.num_districts() {
            if self.state.aggregate(d).vtd_count == 0 {
                return Err(Error::EmptyDistrict(d));
            }
            if !self.state.is_contiguous(d) {
                return Err(Error::Infeasible(format!("district {d} is disconnected")));
            }
        }
        if let Some(n) = &self.neighborhood {
            if n.current() > n.max_deviation {
                return Err(Error::Infeasible("neighborhood bound exceeded".into()));
            }
        }
        Ok(())
    }

    /// One proposal and accept/reject at inverse temperature `beta`.
    pub fn step(&mut self, beta: f64) -> Result<bool> {
        let flip = propose(&self.state, &mut self.rng)?;
        let eval = evaluate(
            &self.state,
            &self.score,
            flip,
            beta,
            &self.weights,
            self.compactness,
            self.neighborhood.as_ref(),
            self.ratio,
        )?;
        self.stats.proposed += 1;
        // Always draw, so the stream does not depend on the probability.
        let u: f64 = self.rng.gen();
        if eval.probability > 0.0 && u < eval.probability {
            let (preview, score) = (eval.preview.unwrap(), eval.score.unwrap());
            if let Some(n) = self.neighborhood.as_mut() {
                n.commit(flip.vtd, preview.from, preview.to);
            }
            self.state.commit(&preview);
            self.score = score;
            self.stats.accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Runs every step of `schedule`.
    pub fn anneal(&mut self, schedule: &AnnealingSchedule) -> Result<()> {
        for t in 0..schedule.total_steps() {
            self.step(schedule.beta_at(t))?;
        }
        Ok(())
    }
}

/// Free-function form of [`Chain::step`].
pub fn mh_step(chain: &mut Chain<'_>, beta: f64) -> Result<bool> {
    chain.step(beta)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountySplitSummary {
    pub two_way: u32,
    pub three_plus: u32,
}

/// One emitted plan and everything needed to filter and reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub chain: u32,
    pub cycle: u64,
    pub seed: u64,
    pub plan: Plan,
    pub score: ScoreBreakdown,
    pub aggregates: Vec<DistrictAggregate>,
    pub county_splits: CountySplitSummary,
    pub passes: bool,
    pub reasons: Vec<ThresholdFailure>,
}

impl SampleRecord {
    pub fn from_state(
        chain: u32,
        cycle: u64,
        seed: u64,
        state: &PlanState<'_>,
        score: ScoreBreakdown,
        thresholds: &ThresholdConfig,
    ) -> Self {
        let mut county_splits = CountySplitSummary::default();
        for s in state.county_splits() {
            match s.districts {
                0 | 1 => {}
                2 => county_splits.two_way += 1,
                _ => county_splits.three_plus += 1,
            }
        }
        let mut rec = SampleRecord {
            chain,
            cycle,
            seed,
            plan: state.plan(),
            score,
            aggregates: state.aggregates().to_vec(),
            county_splits,
            passes: false,
            reasons: Vec::new(),
        };
        let (passes, reasons) = passes_thresholds(&rec, thresholds);
        rec.passes = passes;
        rec.reasons = reasons;
        rec
    }

    /// Largest `|pop_i / ideal - 1|` over districts.
    pub fn max_pop_deviation(&self) -> f64 {
        let total: f64 = self.aggregates.iter().map(|a| a.population).sum();
        let ideal = total / self.aggregates.len() as f64;
        self.aggregates
            .iter()
            .map(|a| (a.population / ideal - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_isoperimetric_ratio(&self) -> f64 {
        self.aggregates
            .iter()
            .map(DistrictAggregate::isoperimetric_ratio)
            .fold(0.0, f64::max)
    }

    /// The two highest district minority fractions, largest first.
    pub fn top_minority_fractions(&self) -> (f64, f64) {
        let mut m: Vec<f64> = self.aggregates.iter().map(|a| a.minority_fraction()).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        (m.first().copied().unwrap_or(0.0), m.get(1).copied().unwrap_or(0.0))
    }
}

/// Checks the post-hoc acceptance thresholds, listing each failure.
pub fn passes_thresholds(record: &SampleRecord, t: &ThresholdConfig) -> (bool, Vec<ThresholdFailure>) {
    let mut reasons = Vec::new();
    if record.max_pop_deviation() > t.max_pop_deviation {
        reasons.push(ThresholdFailure::PopulationDeviation);
    }
    if let Some(max_iso) = t.max_district_iso {
        if record.max_isoperimetric_ratio() > max_iso {
            reasons.push(ThresholdFailure::Isoperimetric);
        }
    }
    if t.forbid_3way_county_splits && record.county_splits.three_plus > 0 {
        reasons.push(ThresholdFailure::CountySplit3Way);
    }
    let (m1, m2) = record.top_minority_fractions();
    if m1 < t.minority_floor_1 || m2 < t.minority_floor_2 {
        reasons.push(ThresholdFailure::MinorityFloor);
    }
    (reasons.is_empty(), reasons)
}

/// Anneals once through the schedule and emits the resulting plan.
pub fn run_annealing_cycle(
    chain: &mut Chain<'_>,
    settings: &SamplerSettings,
    chain_id: u32,
    cycle: u64,
) -> Result<SampleRecord> {
    chain.anneal(&settings.schedule)?;
    Ok(SampleRecord::from_state(
        chain_id,
        cycle,
        chain_seed(settings.rng_seed, chain_id),
        chain.state(),
        *chain.score(),
        &settings.thresholds,
    ))
}

pub fn chain_seed(seed: u64, chain_id: u32) -> u64 {
    seed.wrapping_add(u64::from(chain_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub chains: u32,
    pub samples: u64,
    pub passing_samples: u64,
    pub threshold_pass_fraction: f64,
    pub steps_per_cycle: u64,
    pub proposals: u64,
    pub accepted_steps: u64,
    pub mh_acceptance_rate: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub records: Vec<SampleRecord>,
    pub summary: RunSummary,
}

/// Runs one chain to completion.
pub fn run_chain(g: &DistrictGraph, cfg: &SamplerConfig, chain_id: u32) -> Result<(Vec<SampleRecord>, ChainStats)> {
    let s = &cfg.settings;
    let state = PlanState::new(g, &cfg.initial_plan)?;
    let mut chain = Chain::new(
        state,
        s.weights,
        s.compactness,
        cfg.neighborhood.as_ref(),
        chain_rng(chain_seed(s.rng_seed, chain_id)),
    )?
    .with_proposal_ratio(s.proposal_ratio);
    let mut records = Vec::with_capacity(s.target_samples as usize);
    for cycle in 0..s.target_samples {
        if s.restart && cycle > 0 {
            chain.reset(&cfg.initial_plan, cfg.neighborhood.as_ref())?;
        }
        records.push(run_annealing_cycle(&mut chain, s, chain_id, cycle)?);
    }
    Ok((records, chain.stats))
}

/// Runs `chains` independent chains in parallel. Records come back ordered
/// by `(chain, cycle)` whatever the thread interleaving.
pub fn generate_ensemble(g: &DistrictGraph, cfg: &SamplerConfig) -> Result<Ensemble> {
    cfg.validate(g)?;
    let start = Instant::now();
    let results: Vec<Result<(Vec<SampleRecord>, ChainStats)>> = (0..cfg.settings.chains)
        .into_par_iter()
        .map(|c| run_chain(g, cfg, c))
        .collect();
    let mut records = Vec::new();
    let mut stats = ChainStats::default();
    for r in results {
        let (recs, st) = r?;
        records.extend(recs);
        stats.proposed += st.proposed;
        stats.accepted += st.accepted;
    }
    let passing = records.iter().filter(|r| r.passes).count() as u64;
    let samples = records.len() as u64;
    let summary = RunSummary {
        chains: cfg.settings.chains,
        samples,
        passing_samples: passing,
        threshold_pass_fraction: passing as f64 / samples as f64,
        steps_per_cycle: cfg.settings.schedule.total_steps(),
        proposals: stats.proposed,
        accepted_steps: stats.accepted,
        mh_acceptance_rate: if stats.proposed > 0 {
            stats.accepted as f64 / stats.proposed as f64
        } else {
            0.0
        },
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Ensemble { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, Vtd};
    use crate::plan::max_district_deviation;

    fn grid(rows: usize, cols: usize) -> DistrictGraph {
        let mut vtds = Vec::new();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let exposed = [r == 0, r + 1 == rows, c == 0, c + 1 == cols]
                    .iter()
                    .filter(|b| **b)
                    .count();
                vtds.push(Vtd {
                    id: format!("{r}_{c}"),
                    population: 1.0,
                    area: 1.0,
                    minority_population: 0.0,
                    county: "k".into(),
                    outer_boundary_length: exposed as f64,
                    bbox: None,
                });
                if c + 1 < cols {
                    edges.push(EdgeRecord::new(format!("{r}_{c}"), format!("{r}_{}", c + 1), 1.0));
                }
                if r + 1 < rows {
                    edges.push(EdgeRecord::new(format!("{r}_{c}"), format!("{}_{c}", r + 1), 1.0));
                }
            }
        }
        DistrictGraph::from_parts(vtds, edges).unwrap()
    }

    fn columns(rows: usize, cols: usize, d: u32) -> Plan {
        let labels = (0..rows * cols)
            .map(|i| ((i % cols) * d as usize / cols) as u32 + 1)
            .collect();
        Plan::new(labels, d).unwrap()
    }

    #[test]
    fn proposal_frequencies_on_two_by_two() {
        let g = grid(2, 2);
        let s = PlanState::new(&g, &columns(2, 2, 2)).unwrap();
        let mut rng = chain_rng(11);
        let n = 1_000_000u64;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let f = propose(&s, &mut rng).unwrap();
            *counts.entry((f.vtd, f.to)).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 4);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn single_district_cannot_propose() {
        let g = grid(2, 2);
        let s = PlanState::new(&g, &Plan::new(vec![1; 4], 1).unwrap()).unwrap();
        assert!(matches!(propose(&s, &mut chain_rng(0)), Err(Error::NoConflictedEdges)));
    }

    #[test]
    fn emptying_candidate_is_proposable_but_refused() {
        let g = grid(1, 2);
        let s = PlanState::new(&g, &Plan::new(vec![1, 2], 2).unwrap()).unwrap();
        let f = propose(&s, &mut chain_rng(3)).unwrap();
        let w = ScoreWeights::default();
        let p = acceptance_probability(&s, f, 1.0, &w, Compactness::Iso, None).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn acceptance_ratio_examples() {
        assert_eq!(acceptance_ratio(5, 5, 3.0, 3.0, 1.0), 1.0);
        assert_eq!(acceptance_ratio(4, 8, 1.0, 7.0, 0.0), 0.5);
        assert_eq!(acceptance_ratio(4, 4, 1.0, f64::INFINITY, 1.0), 0.0);
        // only the difference of scores enters
        for shift in [-50.0, 0.0, 1e3] {
            let a = acceptance_ratio(6, 7, 10.0, 12.5, 0.7);
            let b = acceptance_ratio(6, 7, 10.0 + shift, 12.5 + shift, 0.7);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnecting_flip_has_zero_probability() {
        let g = grid(3, 3);
        // district 1 is a U; moving its bottom-middle cell cuts it
        let plan = Plan::new(vec![1, 2, 1, 1, 2, 1, 1, 1, 1], 2).unwrap();
        let s = PlanState::new(&g, &plan).unwrap();
        let p = acceptance_probability(
            &s,
            Flip { vtd: 7, to: 2 },
            0.0,
            &ScoreWeights::default(),
            Compactness::Iso,
            None,
        )
        .unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn zero_step_schedule_emits_initial_plan() {
        let g = grid(4, 4);
        let plan = columns(4, 4, 2);
        let mut settings = SamplerSettings {
            num_districts: 2,
            schedule: AnnealingSchedule {
                hot_steps: 0,
                ramp_steps: 0,
                cold_steps: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        settings.thresholds = ThresholdConfig::none();
        let state = PlanState::new(&g, &plan).unwrap();
        let mut chain =
            Chain::new(state, settings.weights, Compactness::Iso, None, chain_rng(1)).unwrap();
        let rec = run_annealing_cycle(&mut chain, &settings, 0, 0).unwrap();
        assert_eq!(rec.plan, plan);
        assert!(rec.passes);
    }

    #[test]
    fn schedule_betas() {
        let s = AnnealingSchedule {
            hot_steps: 2,
            ramp_steps: 4,
            cold_steps: 1,
            beta_hot: 0.0,
            beta_cold: 1.0,
        };
        let betas: Vec<f64> = (0..7).map(|t| s.beta_at(t)).collect();
        assert_eq!(betas, vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(s.stretched(2).total_steps(), 14);
    }

    #[test]
    fn chain_stays_valid_and_neighborhood_holds() {
        let g = grid(6, 6);
        let plan = columns(6, 6, 3);
        let n = Neighborhood {
            reference: plan.clone(),
            max_deviation: 4,
        };
        let w = ScoreWeights {
            w_p: 0.0,
            w_i: 0.0,
            w_c: 0.0,
            w_m: 0.0,
            ..Default::default()
        };
        let state = PlanState::new(&g, &plan).unwrap();
        let mut chain = Chain::new(state, w, Compactness::Iso, Some(&n), chain_rng(5)).unwrap();
        let mut moved = false;
        for i in 0..50_000 {
            moved |= chain.step(0.0).unwrap();
            assert!(chain.neighborhood().unwrap().current() <= 4);
            if i % 10_000 == 0 {
                chain.check_invariants().unwrap();
                assert!(max_district_deviation(chain.state(), &plan).unwrap() <= 4);
            }
        }
        assert!(moved);
        chain.check_invariants().unwrap();
    }

    #[test]
    fn never_accepts_when_neighborhood_is_zero() {
        let g = grid(4, 4);
        let plan = columns(4, 4, 2);
        let n = Neighborhood {
            reference: plan.clone(),
            max_deviation: 0,
        };
        let state = PlanState::new(&g, &plan).unwrap();
        let mut chain = Chain::new(state, ScoreWeights::default(), Compactness::Iso, Some(&n), chain_rng(9)).unwrap();
        for _ in 0..100_000 {
            assert!(!chain.step(0.0).unwrap());
        }
    }

    #[test]
    fn threshold_reasons() {
        let base = SampleRecord {
            chain: 0,
            cycle: 0,
            seed: 0,
            plan: Plan::new(vec![1, 2], 2).unwrap(),
            score: ScoreBreakdown::combine(0.0, 0.0, 0.0, 0.0, &ScoreWeights::default()),
            aggregates: vec![
                DistrictAggregate {
                    population: 100.0,
                    area: 1.0,
                    minority_population: 45.0,
                    boundary_length: 4.0,
                    vtd_count: 1,
                },
                DistrictAggregate {
                    population: 100.0,
                    area: 1.0,
                    minority_population: 36.0,
                    boundary_length: 4.0,
                    vtd_count: 1,
                },
            ],
            county_splits: CountySplitSummary::default(),
            passes: false,
            reasons: vec![],
        };
        let t = ThresholdConfig::default();
        assert_eq!(passes_thresholds(&base, &t), (true, vec![]));
        let mut r = base.clone();
        r.aggregates[0].population = 101.2;
        r.aggregates[1].population = 98.8;
        assert_eq!(passes_thresholds(&r, &t), (false, vec![ThresholdFailure::PopulationDeviation]));
        let mut r = base.clone();
        r.county_splits.three_plus = 1;
        assert_eq!(passes_thresholds(&r, &t), (false, vec![ThresholdFailure::CountySplit3Way]));
    }
}
