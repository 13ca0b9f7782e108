//! JSON-lines ensemble files: one sample record per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DistrictGraph;
use crate::plan::{read_plan_csv, DistrictAggregate, Plan};
use crate::sampler::{CountySplitSummary, SampleRecord, ThresholdFailure};
use crate::score::ScoreBreakdown;
use crate::tally::{tally, VoteTable};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    chain: u32,
    cycle: u64,
    seed: u64,
    score: ScoreBreakdown,
    passes: bool,
    reasons: Vec<ThresholdFailure>,
    county_splits: CountySplitSummary,
    districts: Vec<DistrictAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dem_shares: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plan: Option<BTreeMap<String, u32>>,
    /// Plan CSV path relative to the ensemble file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plan_file: Option<String>,
}

/// Where a record's plan is stored.
#[derive(Debug, Clone, Copy)]
pub enum PlanRef<'a> {
    Inline,
    Sidecar(&'a str),
}

/// Writes one record as a single JSON line. With `votes`, the per-district
/// Democratic shares are included.
pub fn write_record<W: Write>(
    mut w: W,
    g: &DistrictGraph,
    record: &SampleRecord,
    votes: Option<&VoteTable>,
    plan_ref: PlanRef<'_>,
) -> Result<()> {
    let dem_shares = match votes {
        Some(v) => Some(tally(&record.plan, v)?.iter().map(|r| r.dem_share).collect()),
        None => None,
    };
    let line = RecordLine {
        chain: record.chain,
        cycle: record.cycle,
        seed: record.seed,
        score: record.score,
        passes: record.passes,
        reasons: record.reasons.clone(),
        county_splits: record.county_splits,
        districts: record.aggregates.clone(),
        dem_shares,
        plan: match plan_ref {
            PlanRef::Inline => Some(
                g.vtds()
                    .iter()
                    .zip(record.plan.labels())
                    .map(|(v, &l)| (v.id.clone(), l))
                    .collect(),
            ),
            PlanRef::Sidecar(_) => None,
        },
        plan_file: match plan_ref {
            PlanRef::Inline => None,
            PlanRef::Sidecar(path) => Some(path.to_string()),
        },
    };
    serde_json::to_writer(&mut w, &line)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes all records with inline plans.
pub fn write_ensemble<W: Write>(
    mut w: W,
    g: &DistrictGraph,
    records: &[SampleRecord],
    votes: Option<&VoteTable>,
) -> Result<()> {
    for r in records {
        write_record(&mut w, g, r, votes, PlanRef::Inline)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every record, checking each plan against the graph. Sidecar plan
/// paths are resolved against `base_dir`.
pub fn read_ensemble<R: BufRead>(r: R, g: &DistrictGraph, base_dir: Option<&Path>) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("ensemble line {}: {e}", n + 1)))?;
        let d = rec.districts.len() as u32;
        let plan = match (&rec.plan, &rec.plan_file) {
            (Some(map), _) => {
                let mut labels = vec![0u32; g.len()];
                for (id, l) in map {
                    let i = g.index_of(id).ok_or_else(|| Error::UnknownVtd(id.clone()))?;
                    labels[i] = *l;
                }
                if let Some(i) = labels.iter().position(|&l| l == 0) {
                    return Err(Error::UnlabeledVtd(g.vtd(i).id.clone()));
                }
                Plan::new(labels, d)?
            }
            (None, Some(file)) => {
                let path = base_dir.map_or_else(|| Path::new(file).to_path_buf(), |b| b.join(file));
                read_plan_csv(File::open(path)?, g, Some(d))?
            }
            (None, None) => {
                return Err(Error::Config(format!("ensemble line {} has no plan", n + 1)));
            }
        };
        out.push(SampleRecord {
            chain: rec.chain,
            cycle: rec.cycle,
            seed: rec.seed,
            plan,
            score: rec.score,
            aggregates: rec.districts,
            county_splits: rec.county_splits,
            passes: rec.passes,
            reasons: rec.reasons,
        });
    }
    Ok(out)
}
