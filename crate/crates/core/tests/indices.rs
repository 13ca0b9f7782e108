use proptest::prelude::*;
use redistrict::analytics::{
    complementary_cdf, efficiency_gap, efficiency_gap_votes, ensemble_stats, gerrymandering_index,
    pearson_correlation, quantile_of, quantile_sorted,
};
use redistrict::tally::{interpolated_seats, seat_count, DistrictResult, Winner};

fn results(shares: &[f64]) -> Vec<DistrictResult> {
    shares
        .iter()
        .enumerate()
        .map(|(i, &s)| DistrictResult::with_share(i as u32 + 1, s))
        .collect()
}

fn from_votes(votes: &[(f64, f64)]) -> Vec<DistrictResult> {
    votes
        .iter()
        .enumerate()
        .map(|(i, &(d, r))| DistrictResult::from_votes(i as u32 + 1, d, r).unwrap())
        .collect()
}

// a share of exactly one half goes to the Republican, so keep clear of it
fn share() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..0.499, 0.501f64..0.99]
}

proptest! {
    #[test]
    fn efficiency_gap_flips_sign_under_party_swap(shares in proptest::collection::vec(share(), 1..15)) {
        let r = results(&shares);
        let swapped: Vec<f64> = shares.iter().map(|s| 1.0 - s).collect();
        let s = results(&swapped);
        prop_assert!((efficiency_gap(&r).unwrap() + efficiency_gap(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn vote_gap_flips_sign_under_party_swap(
        votes in proptest::collection::vec((1u32..10_000, 1u32..10_000), 1..15)
    ) {
        prop_assume!(votes.iter().all(|(d, r)| d != r));
        let v: Vec<(f64, f64)> = votes.iter().map(|&(d, r)| (f64::from(d), f64::from(r))).collect();
        let w: Vec<(f64, f64)> = v.iter().map(|&(d, r)| (r, d)).collect();
        let a = efficiency_gap_votes(&from_votes(&v)).unwrap();
        let b = efficiency_gap_votes(&from_votes(&w)).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn gerrymandering_index_is_a_metric(
        x in proptest::collection::vec(0.0f64..1.0, 13),
        y in proptest::collection::vec(0.0f64..1.0, 13),
        z in proptest::collection::vec(0.0f64..1.0, 13),
    ) {
        let d = |a: &[f64], b: &[f64]| gerrymandering_index(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!(d(&x, &y) >= 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-15);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        let naive: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!((d(&x, &y) - naive).abs() < 1e-12);
    }

    #[test]
    fn ccdf_agrees_with_quantile_of(values in proptest::collection::vec(0u8..20, 1..60)) {
        let xs: Vec<f64> = values.iter().map(|&v| f64::from(v) / 4.0).collect();
        let ccdf = complementary_cdf(&xs).unwrap();
        for w in ccdf.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 > w[1].1);
        }
        prop_assert_eq!(ccdf.last().unwrap().1, 0.0);
        for &(x, f) in &ccdf {
            prop_assert_eq!(f, quantile_of(x, &xs));
            let brute = xs.iter().filter(|&&v| v > x).count() as f64 / xs.len() as f64;
            prop_assert_eq!(f, brute);
        }
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(mut xs in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
        xs.sort_by(f64::total_cmp);
        let mut last = f64::NEG_INFINITY;
        for k in 0..=20 {
            let q = quantile_sorted(&xs, k as f64 / 20.0);
            prop_assert!(q >= last);
            prop_assert!(q >= xs[0] && q <= xs[xs.len() - 1]);
            last = q;
        }
        prop_assert_eq!(quantile_sorted(&xs, 0.0), xs[0]);
        prop_assert_eq!(quantile_sorted(&xs, 1.0), xs[xs.len() - 1]);
    }

    #[test]
    fn pearson_self_correlation_is_exact(xs in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
        prop_assume!(xs.iter().any(|&x| x != xs[0]));
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        prop_assert_eq!(pearson_correlation(&xs, &xs).unwrap(), 1.0);
        prop_assert_eq!(pearson_correlation(&xs, &neg).unwrap(), -1.0);
    }

    #[test]
    fn interpolated_seats_stay_within_one_seat(shares in proptest::collection::vec(share(), 2..15)) {
        let r = results(&shares);
        let seats = f64::from(seat_count(&r));
        let interp = interpolated_seats(&r);
        prop_assert!(interp >= seats && interp <= seats + 1.0, "{} {}", seats, interp);
    }

    #[test]
    fn rank_means_are_sorted(ens in proptest::collection::vec(proptest::collection::vec(share(), 5), 1..30)) {
        let all: Vec<Vec<DistrictResult>> = ens.iter().map(|s| results(s)).collect();
        let stats = ensemble_stats(&all).unwrap();
        let means = stats.rank_means();
        prop_assert!(means.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        for r in &stats.ranks {
            prop_assert!(r.lo <= r.q1 && r.q1 <= r.median && r.median <= r.q3 && r.q3 <= r.hi);
        }
        prop_assert_eq!(stats.seat_histogram.values().sum::<u64>(), all.len() as u64);
    }
}

#[test]
fn symmetric_two_district_gap_is_zero() {
    assert_eq!(efficiency_gap(&results(&[0.6, 0.4])).unwrap(), 0.0);
    assert_eq!(efficiency_gap_votes(&from_votes(&[(60.0, 40.0), (40.0, 60.0)])).unwrap(), 0.0);
}

#[test]
fn ties_go_republican() {
    let r = from_votes(&[(50.0, 50.0)]);
    assert_eq!(r[0].winner, Winner::Rep);
}
