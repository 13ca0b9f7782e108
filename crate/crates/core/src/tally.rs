//! Re-tallies a fixed per-unit two-party vote table under any plan.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{csv_reader, DistrictGraph};
use crate::plan::Plan;

pub const VOTES_HEADER: &str = "id,dem,rep";

/// Two-party votes per unit, indexed like the graph's units.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub label: String,
    dem: Vec<f64>,
    rep: Vec<f64>,
}

#[derive(Deserialize)]
struct VoteRow {
    id: String,
    dem: f64,
    rep: f64,
}

impl VoteTable {
    pub fn new(label: impl Into<String>, dem: Vec<f64>, rep: Vec<f64>) -> Result<Self> {
        if dem.len() != rep.len() {
            return Err(Error::LengthMismatch {
                left: dem.len(),
                right: rep.len(),
            });
        }
        if let Some(i) = (0..dem.len()).find(|&i| !(dem[i] >= 0.0 && rep[i] >= 0.0)) {
            return Err(Error::NegativeVotes(format!("#{i}")));
        }
        Ok(VoteTable {
            label: label.into(),
            dem,
            rep,
        })
    }

    /// Reads `id,dem,rep`. Every graph unit needs exactly one row and every
    /// row must name a graph unit.
    pub fn from_csv<R: Read>(r: R, g: &DistrictGraph, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv_reader(r);
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != VOTES_HEADER {
            return Err(Error::Header {
                file: "votes.csv",
                expected: VOTES_HEADER.into(),
                found: header,
            });
        }
        let mut dem = vec![f64::NAN; g.len()];
        let mut rep = vec![f64::NAN; g.len()];
        for row in rdr.deserialize() {
            let row: VoteRow = row?;
            let i = g.index_of(&row.id).ok_or_else(|| Error::UnknownVtd(row.id.clone()))?;
            if !dem[i].is_nan() {
                return Err(Error::DuplicateLabel(row.id));
            }
            if !(row.dem >= 0.0 && row.rep >= 0.0) {
                return Err(Error::NegativeVotes(row.id));
            }
            dem[i] = row.dem;
            rep[i] = row.rep;
        }
        if let Some(i) = dem.iter().position(|d| d.is_nan()) {
            return Err(Error::MissingVotes(g.vtd(i).id.clone()));
        }
        Ok(VoteTable {
            label: label.into(),
            dem,
            rep,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W, g: &DistrictGraph) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(VOTES_HEADER.split(','))?;
        for (i, v) in g.vtds().iter().enumerate() {
            wtr.write_record([v.id.clone(), self.dem[i].to_string(), self.rep[i].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dem.is_empty()
    }

    pub fn dem(&self, i: usize) -> f64 {
        self.dem[i]
    }

    pub fn rep(&self, i: usize) -> f64 {
        self.rep[i]
    }

    pub fn total_dem(&self) -> f64 {
        self.dem.iter().sum()
    }

    pub fn total_rep(&self) -> f64 {
        self.rep.iter().sum()
    }

    /// Unit-level two-party dem share, `None` for zero-vote units.
    pub fn dem_share(&self, i: usize) -> Option<f64> {
        let t = self.dem[i] + self.rep[i];
        (t > 0.0).then(|| self.dem[i] / t)
    }

    /// Same votes with the parties exchanged.
    pub fn swapped(&self) -> VoteTable {
        VoteTable {
            label: self.label.clone(),
            dem: self.rep.clone(),
            rep: self.dem.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    Dem,
    Rep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistrictResult {
    pub district: u32,
    pub dem_votes: f64,
    pub rep_votes: f64,
    pub dem_share: f64,
    pub winner: Winner,
}

impl DistrictResult {
    /// Ties go to the Republican.
    pub fn from_votes(district: u32, dem_votes: f64, rep_votes: f64) -> Result<Self> {
        let total = dem_votes + rep_votes;
        if !(total > 0.0) {
            return Err(Error::ZeroVotes(district));
        }
        Ok(Self::from_share(district, dem_votes / total, dem_votes, rep_votes))
    }

    fn from_share(district: u32, dem_share: f64, dem_votes: f64, rep_votes: f64) -> Self {
        DistrictResult {
            district,
            dem_votes,
            rep_votes,
            dem_share,
            winner: if dem_share > 0.5 { Winner::Dem } else { Winner::Rep },
        }
    }

    /// A result known only by its dem share, e.g. from published tables.
    pub fn with_share(district: u32, dem_share: f64) -> Self {
        Self::from_share(district, dem_share, dem_share, 1.0 - dem_share)
    }
}

/// District results for `plan`, in label order.
pub fn tally(plan: &Plan, votes: &VoteTable) -> Result<Vec<DistrictResult>> {
    if plan.len() != votes.len() {
        return Err(Error::LengthMismatch {
            left: plan.len(),
            right: votes.len(),
        });
    }
    tally_labels(plan.labels(), plan.num_districts(), votes)
}

pub(crate) fn tally_labels(labels: &[u32], num_districts: u32, votes: &VoteTable) -> Result<Vec<DistrictResult>> {
    let mut dem = vec![0.0; num_districts as usize];
    let mut rep = vec![0.0; num_districts as usize];
    for (i, &l) in labels.iter().enumerate() {
        dem[l as usize - 1] += votes.dem[i];
        rep[l as usize - 1] += votes.rep[i];
    }
    (0..num_districts as usize)
        .map(|k| DistrictResult::from_votes(k as u32 + 1, dem[k], rep[k]))
        .collect()
}

/// Dem shares sorted ascending, most Republican district first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedShares(pub Vec<f64>);

impl RankedShares {
    pub fn from_results(results: &[DistrictResult]) -> Self {
        Self::from_shares(results.iter().map(|r| r.dem_share).collect())
    }

    pub fn from_shares(mut shares: Vec<f64>) -> Self {
        shares.sort_by(f64::total_cmp);
        RankedShares(shares)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Number of districts won by the Democrat.
pub fn seat_count(results: &[DistrictResult]) -> u32 {
    results.iter().filter(|r| r.winner == Winner::Dem).count() as u32
}

/// Dem seats plus the point where the line between the two marginal
/// districts crosses 50%. A Democratic sweep gives `D`, a Republican sweep 0.
pub fn interpolated_seats(results: &[DistrictResult]) -> f64 {
    let seats = seat_count(results);
    let weakest_dem_win = results
        .iter()
        .filter(|r| r.winner == Winner::Dem)
        .map(|r| r.dem_share)
        .min_by(f64::total_cmp);
    let strongest_dem_loss = results
        .iter()
        .filter(|r| r.winner == Winner::Rep)
        .map(|r| r.dem_share)
        .max_by(f64::total_cmp);
    match (weakest_dem_win, strongest_dem_loss) {
        (Some(won), Some(lost)) => {
            let r_d = 1.0 - won;
            let r_r = 1.0 - lost;
            f64::from(seats) + (0.5 - r_d) / (r_r - r_d)
        }
        (Some(_), None) => f64::from(seats),
        _ => 0.0,
    }
}
