//! Staged weight search: raise one weight at a time to the smallest value
//! that meets its target, backing up whenever an earlier target is lost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DistrictGraph;
use crate::sampler::{generate_ensemble, SampleRecord, SamplerConfig};
use crate::score::ScoreWeights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningTargets {
    pub pop_deviation: f64,
    /// Share of samples that must have every district within `pop_deviation`.
    pub pop_fraction: f64,
    pub max_iso: f64,
    pub iso_fraction: f64,
    pub minority_floor_1: f64,
    pub minority_floor_2: f64,
    pub minority_fraction: f64,
    /// Largest tolerated share of samples splitting some county three ways.
    pub three_way_fraction: f64,
    pub mean_two_way_splits: f64,
}

impl Default for TuningTargets {
    fn default() -> Self {
        TuningTargets {
            pop_deviation: 0.005,
            pop_fraction: 0.25,
            max_iso: 60.0,
            iso_fraction: 0.10,
            minority_floor_1: 0.40,
            minority_floor_2: 0.335,
            minority_fraction: 0.50,
            three_way_fraction: 0.05,
            mean_two_way_splits: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub samples: usize,
    pub pop_fraction: f64,
    pub iso_fraction: f64,
    pub minority_fraction: f64,
    pub three_way_fraction: f64,
    pub mean_two_way_splits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Population,
    Compactness,
    Minority,
    County,
}

impl Stage {
    const ALL: [Stage; 4] = [Stage::Population, Stage::Compactness, Stage::Minority, Stage::County];

    fn weight_mut(self, w: &mut ScoreWeights) -> &mut f64 {
        match self {
            Stage::Population => &mut w.w_p,
            Stage::Compactness => &mut w.w_i,
            Stage::Minority => &mut w.w_m,
            Stage::County => &mut w.w_c,
        }
    }
}

impl TuningReport {
    pub fn from_records(records: &[SampleRecord], t: &TuningTargets) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("ensemble"));
        }
        let n = records.len() as f64;
        let frac = |f: &dyn Fn(&SampleRecord) -> bool| records.iter().filter(|r| f(r)).count() as f64 / n;
        Ok(TuningReport {
            samples: records.len(),
            pop_fraction: frac(&|r| r.max_pop_deviation() < t.pop_deviation),
            iso_fraction: frac(&|r| r.max_isoperimetric_ratio() < t.max_iso),
            minority_fraction: frac(&|r| {
                let (m1, m2) = r.top_minority_fractions();
                m1 > t.minority_floor_1 && m2 >= t.minority_floor_2
            }),
            three_way_fraction: frac(&|r| r.county_splits.three_plus > 0),
            mean_two_way_splits: records.iter().map(|r| f64::from(r.county_splits.two_way)).sum::<f64>() / n,
        })
    }

    pub fn meets(&self, stage: Stage, t: &TuningTargets) -> bool {
        match stage {
            Stage::Population => self.pop_fraction >= t.pop_fraction,
            Stage::Compactness => self.iso_fraction >= t.iso_fraction,
            Stage::Minority => self.minority_fraction >= t.minority_fraction,
            Stage::County => {
                self.three_way_fraction <= t.three_way_fraction && self.mean_two_way_splits <= t.mean_two_way_splits
            }
        }
    }
}

/// Candidate values per weight, searched in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightLadders {
    pub w_p: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_c: Vec<f64>,
}

impl Default for WeightLadders {
    fn default() -> Self {
        let geometric = |lo: f64, steps: usize| (0..steps).map(|k| lo * 2f64.powi(k as i32)).collect();
        WeightLadders {
            w_p: geometric(50.0, 10),
            w_i: geometric(0.1, 8),
            w_m: geometric(25.0, 8),
            w_c: geometric(0.05, 8),
        }
    }
}

impl WeightLadders {
    fn ladder(&self, stage: Stage) -> &[f64] {
        match stage {
            Stage::Population => &self.w_p,
            Stage::Compactness => &self.w_i,
            Stage::Minority => &self.w_m,
            Stage::County => &self.w_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub stage: Stage,
    pub weights: ScoreWeights,
    pub report: TuningReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub weights: ScoreWeights,
    pub report: TuningReport,
    pub converged: bool,
    pub trials: Vec<Trial>,
}

/// Runs the staged search starting from all-zero weights. Each trial samples
/// a full ensemble with `base`'s settings. Gives up after `max_trials`
/// ensembles and reports the last weights tried.
pub fn tune_weights(
    g: &DistrictGraph,
    base: &SamplerConfig,
    targets: &TuningTargets,
    ladders: &WeightLadders,
    max_trials: usize,
) -> Result<TuningOutcome> {
    let mut cfg = base.clone();
    for s in Stage::ALL {
        *s.weight_mut(&mut cfg.settings.weights) = 0.0;
    }
    let mut trials = Vec::new();
    let run = |cfg: &SamplerConfig, stage: Stage, trials: &mut Vec<Trial>| -> Result<TuningReport> {
        let report = TuningReport::from_records(&generate_ensemble(g, cfg)?.records, targets)?;
        trials.push(Trial {
            stage,
            weights: cfg.settings.weights,
            report,
        });
        Ok(report)
    };

    let mut stage = 0;
    let mut report = run(&cfg, Stage::Population, &mut trials)?;
    while stage < Stage::ALL.len() {
        let current = Stage::ALL[stage];
        if !report.meets(current, targets) {
            let floor = *current.weight_mut(&mut cfg.settings.weights);
            let mut met = false;
            for &value in ladders.ladder(current).iter().filter(|&&v| v > floor) {
                if trials.len() >= max_trials {
                    return Ok(TuningOutcome {
                        weights: cfg.settings.weights,
                        report,
                        converged: false,
                        trials,
                    });
                }
                *current.weight_mut(&mut cfg.settings.weights) = value;
                report = run(&cfg, current, &mut trials)?;
                if report.meets(current, targets) {
                    met = true;
                    break;
                }
            }
            if !met {
                return Ok(TuningOutcome {
                    weights: cfg.settings.weights,
                    report,
                    converged: false,
                    trials,
                });
            }
        }
        // back up to the first earlier target that was lost
        stage = match Stage::ALL[..stage].iter().position(|s| !report.meets(*s, targets)) {
            Some(k) => k,
            None => stage + 1,
        };
    }
    Ok(TuningOutcome {
        weights: cfg.settings.weights,
        report,
        converged: true,
        trials,
    })
}
