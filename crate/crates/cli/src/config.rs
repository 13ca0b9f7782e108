use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use redistrict::sampler::{AnnealingSchedule, ProposalRatio, SamplerSettings, ThresholdConfig};
use redistrict::{Compactness, ScoreWeights};

fn default_max_deviation() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodFile {
    pub reference: PathBuf,
    #[serde(default = "default_max_deviation")]
    pub max_deviation: u32,
}

/// Sampling run description. Field names follow the sampler configuration;
/// relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph_nodes: PathBuf,
    pub graph_edges: PathBuf,
    pub initial_plan: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighborhood: Option<NeighborhoodFile>,
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default)]
    pub schedule: AnnealingSchedule,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub compactness: Compactness,
    /// Inferred from the initial plan when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_districts: Option<u32>,
    #[serde(default = "one")]
    pub target_samples: u64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "one_u32")]
    pub chains: u32,
    #[serde(default)]
    pub restart: bool,
    #[serde(default)]
    pub proposal_ratio: ProposalRatio,
}

fn one() -> u64 {
    1
}

fn one_u32() -> u32 {
    1
}

impl RunConfig {
    pub fn new(graph_nodes: PathBuf, graph_edges: PathBuf, initial_plan: PathBuf) -> Self {
        RunConfig {
            graph_nodes,
            graph_edges,
            initial_plan,
            votes: None,
            neighborhood: None,
            weights: ScoreWeights::default(),
            schedule: AnnealingSchedule::default(),
            thresholds: ThresholdConfig::default(),
            compactness: Compactness::default(),
            num_districts: None,
            target_samples: 1,
            rng_seed: 0,
            chains: 1,
            restart: false,
            proposal_ratio: ProposalRatio::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.graph_nodes);
        fix(&mut self.graph_edges);
        fix(&mut self.initial_plan);
        if let Some(v) = self.votes.as_mut() {
            fix(v);
        }
        if let Some(n) = self.neighborhood.as_mut() {
            fix(&mut n.reference);
        }
    }

    /// Turns every path absolute so the snapshot can be replayed from
    /// anywhere.
    pub fn absolutized(&self) -> Result<Self> {
        let mut out = self.clone();
        let cwd = std::env::current_dir()?;
        out.rebase(&cwd);
        Ok(out)
    }

    pub fn settings(&self, num_districts: u32) -> Result<SamplerSettings> {
        if let Some(d) = self.num_districts {
            if d != num_districts {
                bail!("config says {d} districts but the initial plan has {num_districts}");
            }
        }
        Ok(SamplerSettings {
            weights: self.weights,
            schedule: self.schedule,
            thresholds: self.thresholds,
            compactness: self.compactness,
            num_districts,
            target_samples: self.target_samples,
            rng_seed: self.rng_seed,
            chains: self.chains,
            restart: self.restart,
            proposal_ratio: self.proposal_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"graph_nodes": "n.csv", "graph_edges": "e.csv", "initial_plan": "p.csv"}"#,
        )
        .unwrap();
        assert_eq!(cfg.weights, ScoreWeights::default());
        assert_eq!(cfg.schedule.total_steps(), 120_000);
        assert_eq!(cfg.chains, 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: std::result::Result<RunConfig, _> = serde_json::from_str(
            r#"{"graph_nodes": "n", "graph_edges": "e", "initial_plan": "p", "betta": 1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::new("n.csv".into(), "/abs/e.csv".into(), "p.csv".into());
        cfg.rebase(Path::new("/data/run"));
        assert_eq!(cfg.graph_nodes, PathBuf::from("/data/run/n.csv"));
        assert_eq!(cfg.graph_edges, PathBuf::from("/abs/e.csv"));
    }
}
