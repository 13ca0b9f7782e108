//! Ensemble statistics and the three plan indices.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tally::{interpolated_seats, seat_count, DistrictResult, RankedShares, Winner};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = CompensatedSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("values"));
    }
    Ok(compensated_sum(xs.iter().copied()) / xs.len() as f64)
}

/// Linear interpolation between order statistics (`(n-1)p` positions) on
/// already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Lower whisker: `max(min, q1 - 1.5 IQR)`.
    pub lo: f64,
    /// Upper whisker: `min(max, q3 + 1.5 IQR)`.
    pub hi: f64,
}

impl RankSummary {
    fn from_values(rank: usize, mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        let mean = compensated_sum(xs.iter().copied()) / xs.len() as f64;
        let q1 = quantile_sorted(&xs, 0.25);
        let q3 = quantile_sorted(&xs, 0.75);
        let iqr = q3 - q1;
        RankSummary {
            rank,
            mean,
            median: quantile_sorted(&xs, 0.5),
            q1,
            q3,
            lo: xs[0].max(q1 - 1.5 * iqr),
            hi: xs[xs.len() - 1].min(q3 + 1.5 * iqr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub ranks: Vec<RankSummary>,
    pub seat_histogram: BTreeMap<u32, u64>,
    pub interpolated: Vec<f64>,
    pub interpolated_mean: f64,
}

impl EnsembleStats {
    pub fn rank_means(&self) -> Vec<f64> {
        self.ranks.iter().map(|r| r.mean).collect()
    }

    pub fn len(&self) -> usize {
        self.interpolated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interpolated.is_empty()
    }
}

/// Per-rank box-plot statistics of ranked share vectors.
pub fn rank_marginal_stats(ensemble: &[RankedShares]) -> Result<Vec<RankSummary>> {
    let d = ensemble.first().ok_or(Error::Empty("ensemble"))?.len();
    if let Some(bad) = ensemble.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            left: d,
            right: bad.len(),
        });
    }
    Ok((0..d)
        .map(|k| RankSummary::from_values(k + 1, ensemble.iter().map(|r| r.0[k]).collect()))
        .collect())
}

/// Rank marginals plus seat and interpolated-seat distributions from the
/// tallied plans of an ensemble.
pub fn ensemble_stats(results: &[Vec<DistrictResult>]) -> Result<EnsembleStats> {
    if results.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let ranked: Vec<RankedShares> = results.iter().map(|r| RankedShares::from_results(r)).collect();
    let ranks = rank_marginal_stats(&ranked)?;
    let interpolated: Vec<f64> = results.iter().map(|r| interpolated_seats(r)).collect();
    Ok(EnsembleStats {
        ranks,
        seat_histogram: seat_histogram(results),
        interpolated_mean: mean(&interpolated)?,
        interpolated,
    })
}

pub fn seat_histogram(results: &[Vec<DistrictResult>]) -> BTreeMap<u32, u64> {
    let mut h = BTreeMap::new();
    for r in results {
        *h.entry(seat_count(r)).or_insert(0) += 1;
    }
    h
}

/// Counts per bin `[k w, (k+1) w)`, keyed by the bin's lower edge index.
pub fn interpolated_histogram(values: &[f64], width: f64) -> Result<BTreeMap<i64, u64>> {
    if !(width > 0.0) {
        return Err(Error::Config("histogram width must be positive".into()));
    }
    let mut h = BTreeMap::new();
    for v in values {
        // nudge so values sitting on an edge are not split by rounding
        let k = (v / width + 1e-9).floor() as i64;
        *h.entry(k).or_insert(0) += 1;
    }
    Ok(h)
}

/// Euclidean distance between a ranked share vector and the rank means.
pub fn gerrymandering_index(ranked: &[f64], rank_means: &[f64]) -> Result<f64> {
    if ranked.len() != rank_means.len() {
        return Err(Error::LengthMismatch {
            left: ranked.len(),
            right: rank_means.len(),
        });
    }
    Ok(compensated_sum(ranked.iter().zip(rank_means).map(|(s, m)| (m - s) * (m - s))).sqrt())
}

pub fn representativeness_index(value: f64, ensemble_mean: f64) -> f64 {
    (value - ensemble_mean).abs()
}

/// Share-based efficiency gap: `(Dem waste - Rep waste) / D` where a party
/// wastes its whole share where it loses and the excess over one half where
/// it wins. Positive means Democrats wasted more.
pub fn efficiency_gap(results: &[DistrictResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("districts"));
    }
    let gap = compensated_sum(results.iter().map(|r| {
        let d = r.dem_share;
        let (dem_waste, rep_waste) = match r.winner {
            Winner::Dem => (d - 0.5, 1.0 - d),
            Winner::Rep => (d, 0.5 - d),
        };
        dem_waste - rep_waste
    }));
    Ok(gap / results.len() as f64)
}

/// Vote-count efficiency gap: wasted votes are all votes for the loser and
/// the winner's votes above half the district total, normalized by the
/// statewide two-party total.
pub fn efficiency_gap_votes(results: &[DistrictResult]) -> Result<f64> {
    let total = compensated_sum(results.iter().map(|r| r.dem_votes + r.rep_votes));
    if !(total > 0.0) {
        return Err(Error::Empty("votes"));
    }
    let gap = compensated_sum(results.iter().map(|r| {
        let half = (r.dem_votes + r.rep_votes) / 2.0;
        let (dem_waste, rep_waste) = match r.winner {
            Winner::Dem => (r.dem_votes - half, r.rep_votes),
            Winner::Rep => (r.dem_votes, r.rep_votes - half),
        };
        dem_waste - rep_waste
    }));
    Ok(gap / total)
}

/// `(x, fraction of values > x)` for each distinct value, ascending.
pub fn complementary_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = (xs.len() - i - 1) as f64 / n,
            _ => out.push((x, (xs.len() - i - 1) as f64 / n)),
        }
    }
    Ok(out)
}

/// Fraction of `values` strictly greater than `value`; 0 for an empty set.
pub fn quantile_of(value: f64, values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v > value).count() as f64 / values.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Empty("need at least two points"));
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = compensated_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    // sqrt of the product keeps corr(x, x) and corr(x, -x) exact
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Indices of one plan and where they fall in the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub gerrymandering_index: f64,
    pub representativeness_index: f64,
    pub efficiency_gap: f64,
    pub efficiency_gap_votes: f64,
    pub seats: u32,
    pub interpolated_seats: f64,
    pub ranked_shares: Vec<f64>,
    /// Fraction of ensemble plans with a strictly larger index.
    pub gerrymandering_quantile: f64,
    pub representativeness_quantile: f64,
    pub efficiency_gap_quantile: f64,
    /// Fraction of ensemble plans with strictly fewer Democratic seats.
    pub seats_below_fraction: f64,
}

/// Per-plan index values across an ensemble, measured against that
/// ensemble's own rank means and interpolated-seat mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleIndices {
    pub stats: EnsembleStats,
    pub gerrymandering: Vec<f64>,
    pub representativeness: Vec<f64>,
    pub efficiency_gap: Vec<f64>,
    pub seats: Vec<u32>,
}

impl EnsembleIndices {
    pub fn new(results: &[Vec<DistrictResult>]) -> Result<Self> {
        let stats = ensemble_stats(results)?;
        let means = stats.rank_means();
        let mut gerrymandering = Vec::with_capacity(results.len());
        let mut efficiency = Vec::with_capacity(results.len());
        for r in results {
            gerrymandering.push(gerrymandering_index(RankedShares::from_results(r).as_slice(), &means)?);
            efficiency.push(efficiency_gap(r)?);
        }
        let representativeness = stats
            .interpolated
            .iter()
            .map(|v| representativeness_index(*v, stats.interpolated_mean))
            .collect();
        Ok(EnsembleIndices {
            gerrymandering,
            representativeness,
            efficiency_gap: efficiency,
            seats: results.iter().map(|r| seat_count(r)).collect(),
            stats,
        })
    }

    /// Scores `plan` and places it within the ensemble.
    pub fn report(&self, plan: &[DistrictResult]) -> Result<IndexReport> {
        let ranked = RankedShares::from_results(plan);
        let gi = gerrymandering_index(ranked.as_slice(), &self.stats.rank_means())?;
        let interp = interpolated_seats(plan);
        let ri = representativeness_index(interp, self.stats.interpolated_mean);
        let eg = efficiency_gap(plan)?;
        let seats = seat_count(plan);
        let below = self.seats.iter().filter(|&&s| s < seats).count() as f64 / self.seats.len() as f64;
        Ok(IndexReport {
            gerrymandering_index: gi,
            representativeness_index: ri,
            efficiency_gap: eg,
            efficiency_gap_votes: efficiency_gap_votes(plan)?,
            seats,
            interpolated_seats: interp,
            ranked_shares: ranked.0,
            gerrymandering_quantile: quantile_of(gi, &self.gerrymandering),
            representativeness_quantile: quantile_of(ri, &self.representativeness),
            efficiency_gap_quantile: quantile_of(eg, &self.efficiency_gap),
            seats_below_fraction: below,
        })
    }
}

/// `rank,mean,median,q1,q3,lo,hi`.
pub fn write_boxplot_csv<W: Write>(w: W, ranks: &[RankSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in ranks {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `value,fraction_greater`.
pub fn write_ccdf_csv<W: Write>(w: W, ccdf: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["value", "fraction_greater"])?;
    for (x, p) in ccdf {
        wtr.write_record([x.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `seats,count`.
pub fn write_seats_csv<W: Write>(w: W, hist: &BTreeMap<u32, u64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["seats", "count"])?;
    for (s, c) in hist {
        wtr.write_record([s.to_string(), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `bin_start,bin_end,count`.
pub fn write_interpolated_csv<W: Write>(w: W, hist: &BTreeMap<i64, u64>, width: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["bin_start", "bin_end", "count"])?;
    for (k, c) in hist {
        let lo = *k as f64 * width;
        wtr.write_record([lo.to_string(), (lo + width).to_string(), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(xs: &[f64]) -> Vec<DistrictResult> {
        xs.iter()
            .enumerate()
            .map(|(i, &d)| DistrictResult::with_share(i as u32 + 1, d))
            .collect()
    }

    const MEANS: [f64; 13] = [
        0.37, 0.39, 0.41, 0.44, 0.46, 0.48, 0.50, 0.52, 0.55, 0.57, 0.60, 0.63, 0.67,
    ];
    const NC2012: [f64; 13] = [
        0.36, 0.38, 0.39, 0.40, 0.41, 0.42, 0.43, 0.44, 0.49, 0.52, 0.64, 0.66, 0.70,
    ];

    #[test]
    fn gerrymandering_index_worked_example() {
        let gi = gerrymandering_index(&NC2012, &MEANS).unwrap();
        assert!((gi * gi - 0.0291).abs() < 1e-12);
        assert!((gi - 0.17).abs() < 5e-3);
        assert_eq!(gerrymandering_index(&MEANS, &MEANS).unwrap(), 0.0);
        let mut bumped = MEANS;
        bumped[4] += 0.1;
        assert!((gerrymandering_index(&bumped, &MEANS).unwrap() - 0.1).abs() < 1e-12);
        assert!(gerrymandering_index(&MEANS[..3], &MEANS).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn representativeness_examples() {
        assert!((representativeness_index(6.28, 7.01) - 0.73).abs() < 1e-12);
        assert_eq!(representativeness_index(7.01, 7.01), 0.0);
        assert_eq!(representativeness_index(5.0, 6.0), representativeness_index(7.0, 6.0));
    }

    #[test]
    fn efficiency_gap_examples() {
        assert!(efficiency_gap(&shares(&[0.75, 0.25])).unwrap().abs() < 1e-15);
        assert!((efficiency_gap(&shares(&[0.6])).unwrap() + 0.3).abs() < 1e-15);
        let packed = efficiency_gap(&shares(&[0.45, 0.45, 0.90])).unwrap();
        assert!((packed - 1.1 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vote_count_gap_matches_shares_for_equal_districts() {
        let r = shares(&[0.45, 0.45, 0.90, 0.3]);
        let a = efficiency_gap(&r).unwrap();
        let b = efficiency_gap_votes(&r).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ccdf_and_quantile() {
        let v = [1.0, 2.0, 3.0];
        assert!((quantile_of(2.0, &v) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile_of(0.0, &v), 1.0);
        assert_eq!(quantile_of(4.0, &v), 0.0);
        let c = complementary_cdf(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(c, vec![(2.0, 0.0)]);
        let c = complementary_cdf(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(c, vec![(1.0, 0.75), (2.0, 0.25), (3.0, 0.0)]);
        assert!(complementary_cdf(&[]).is_err());
        let odd = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert!((quantile_of(3.0, &odd) - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 6.0];
        // sxy = 10, sxx = 10, syy = 14.8
        let r = pearson_correlation(&xs, &ys).unwrap();
        assert!((r - 10.0 / 148f64.sqrt()).abs() < 1e-12);
        assert_eq!(pearson_correlation(&xs, &xs).unwrap(), 1.0);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(pearson_correlation(&xs, &neg).unwrap(), -1.0);
        assert!(matches!(
            pearson_correlation(&xs, &[1.0; 5]),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn rank_stats_small_ensembles() {
        let one = vec![RankedShares(vec![0.3, 0.6])];
        let s = rank_marginal_stats(&one).unwrap();
        assert_eq!((s[0].mean, s[0].median, s[1].mean), (0.3, 0.3, 0.6));
        let two = vec![RankedShares(vec![0.2, 0.6]), RankedShares(vec![0.4, 0.8])];
        let s = rank_marginal_stats(&two).unwrap();
        assert!((s[0].mean - 0.3).abs() < 1e-15 && (s[1].mean - 0.7).abs() < 1e-15);
        assert!(rank_marginal_stats(&[]).is_err());
    }

    #[test]
    fn quartiles_and_whiskers() {
        let xs: Vec<f64> = (1..=9).map(f64::from).chain([100.0]).collect();
        let s = RankSummary::from_values(1, xs);
        assert_eq!((s.q1, s.median, s.q3), (3.25, 5.5, 7.75));
        assert_eq!(s.lo, 1.0);
        assert_eq!(s.hi, 7.75 + 1.5 * 4.5);
    }

    #[test]
    fn histograms() {
        let h = interpolated_histogram(&[4.03, 4.05, 4.1, 7.0], 0.1).unwrap();
        assert_eq!(h.get(&40), Some(&2));
        assert_eq!(h.get(&41), Some(&1));
        assert_eq!(h.get(&70), Some(&1));
        let results = vec![shares(&[0.6, 0.4]), shares(&[0.6, 0.7]), shares(&[0.3, 0.4])];
        let seats = seat_histogram(&results);
        assert_eq!(seats.values().sum::<u64>(), 3);
        assert_eq!(seats.get(&1), Some(&1));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(xs), 1.0);
    }
}
