//! Component scores and their weighted total.
//!
//! All components are computed from the cached district aggregates and
//! county splits of a [`PlanState`], so evaluating a proposed flip only costs
//! a pass over districts and counties with two aggregates swapped out.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::plan::{CountySplit, DistrictAggregate, FlipPreview, PlanState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_p: f64,
    pub w_i: f64,
    pub w_c: f64,
    pub w_m: f64,
    /// Multiplier on counties split three or more ways.
    pub m_c: f64,
    pub minority_target_1: f64,
    pub minority_target_2: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_p: 3000.0,
            w_i: 2.5,
            w_c: 0.4,
            w_m: 800.0,
            m_c: 100.0,
            minority_target_1: 0.4448,
            minority_target_2: 0.3620,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_p, self.w_i, self.w_c, self.w_m];
        if ws.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("score weights must be finite and non-negative".into()));
        }
        if !(self.m_c >= 1.0) {
            return Err(Error::Config("m_c must be at least 1".into()));
        }
        for t in [self.minority_target_1, self.minority_target_2] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("minority targets must be fractions".into()));
            }
        }
        Ok(())
    }
}

/// Which compactness energy fills the `j_iso` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compactness {
    #[default]
    #[serde(alias = "isoperimetric")]
    Iso,
    Dispersion,
}

fn ser_total<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_total<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Evaluated components. `j_total` is `+inf` for rejected states and is
/// written as `null` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    #[serde(rename = "jp")]
    pub j_pop: f64,
    /// Isoperimetric or dispersion energy, per the selected compactness.
    #[serde(rename = "ji")]
    pub j_iso: f64,
    #[serde(rename = "jc")]
    pub j_county: f64,
    #[serde(rename = "jm")]
    pub j_minority: f64,
    #[serde(rename = "jtotal", serialize_with = "ser_total", deserialize_with = "de_total")]
    pub j_total: f64,
}

impl ScoreBreakdown {
    pub fn combine(j_pop: f64, j_iso: f64, j_county: f64, j_minority: f64, w: &ScoreWeights) -> Self {
        ScoreBreakdown {
            j_pop,
            j_iso,
            j_county,
            j_minority,
            j_total: w.w_p * j_pop + w.w_i * j_iso + w.w_c * j_county + w.w_m * j_minority,
        }
    }

    pub fn rejected() -> Self {
        ScoreBreakdown {
            j_pop: f64::NAN,
            j_iso: f64::NAN,
            j_county: f64::NAN,
            j_minority: f64::NAN,
            j_total: f64::INFINITY,
        }
    }

    pub fn is_rejected(&self) -> bool {
        self.j_total == f64::INFINITY
    }
}

// District aggregates with up to two districts replaced.
struct View<'a> {
    base: &'a [DistrictAggregate],
    over: [Option<(usize, DistrictAggregate)>; 2],
}

impl<'a> View<'a> {
    fn current(base: &'a [DistrictAggregate]) -> Self {
        View { base, over: [None, None] }
    }

    fn after(base: &'a [DistrictAggregate], p: &FlipPreview) -> Self {
        View {
            base,
            over: [
                Some(((p.from - 1) as usize, p.donor)),
                Some(((p.to - 1) as usize, p.acceptor)),
            ],
        }
    }

    fn iter(&self) -> impl Iterator<Item = (usize, &DistrictAggregate)> + '_ {
        self.base.iter().enumerate().map(move |(k, a)| {
            for (i, o) in self.over.iter().flatten() {
                if *i == k {
                    return (k, o);
                }
            }
            (k, a)
        })
    }
}

fn pop_score(view: &View<'_>, ideal: f64) -> f64 {
    view.iter()
        .map(|(_, a)| {
            let r = a.population / ideal - 1.0;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

fn iso_score(view: &View<'_>) -> Result<f64> {
    let mut total = 0.0;
    for (k, a) in view.iter() {
        if !(a.area > 0.0) {
            return Err(Error::ZeroArea(k as u32 + 1));
        }
        total += a.isoperimetric_ratio();
    }
    Ok(total)
}

fn county_score_of(splits: &[CountySplit], over: Option<(usize, CountySplit)>, m_c: f64) -> f64 {
    let (mut n2, mut w2, mut n3, mut w3) = (0u32, 0.0, 0u32, 0.0);
    for (i, s) in splits.iter().enumerate() {
        let s = match over {
            Some((j, o)) if j == i => o,
            _ => *s,
        };
        match s.districts {
            0 | 1 => {}
            2 => {
                n2 += 1;
                w2 += s.weight;
            }
            _ => {
                n3 += 1;
                w3 += s.weight;
            }
        }
    }
    f64::from(n2) * w2 + m_c * f64::from(n3) * w3
}

fn minority_score_of(view: &View<'_>, w: &ScoreWeights) -> Result<f64> {
    let (mut m1, mut m2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut n = 0;
    for (_, a) in view.iter() {
        n += 1;
        let m = a.minority_fraction();
        if m > m1 {
            m2 = m1;
            m1 = m;
        } else if m > m2 {
            m2 = m;
        }
    }
    if n < 2 {
        return Err(Error::DistrictCount { min: 2, got: n });
    }
    Ok(heaviside_sqrt(w.minority_target_1 - m1) + heaviside_sqrt(w.minority_target_2 - m2))
}

fn heaviside_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        x.sqrt()
    } else {
        0.0
    }
}

fn dispersion_of(state: &PlanState<'_>, view: &View<'_>, p: Option<&FlipPreview>) -> Result<f64> {
    let mut total = 0.0;
    for (k, a) in view.iter() {
        let d = k as u32 + 1;
        let bbox = match p {
            Some(p) if p.from == d => state.bbox_with(d, Some(p.vtd), None),
            Some(p) if p.to == d => state.bbox_with(d, None, Some(p.vtd)),
            _ => state.bbox(d),
        };
        let bbox = bbox.ok_or_else(|| {
            let missing = state
                .graph()
                .vtds()
                .iter()
                .find(|v| v.bbox.is_none())
                .map(|v| v.id.clone())
                .unwrap_or_default();
            Error::MissingBbox(missing)
        })?;
        if !(a.area > 0.0) {
            return Err(Error::ZeroArea(d));
        }
        total += bbox.area() / a.area;
    }
    Ok(total)
}

fn ideal(state: &PlanState<'_>) -> f64 {
    state.graph().total_population() / f64::from(state.num_districts())
}

/// `sqrt(Σ (pop_i / ideal - 1)^2)`.
pub fn population_score(state: &PlanState<'_>) -> f64 {
    pop_score(&View::current(state.aggregates()), ideal(state))
}

/// `Σ boundary_i^2 / area_i`.
pub fn isoperimetric_score(state: &PlanState<'_>) -> Result<f64> {
    iso_score(&View::current(state.aggregates()))
}

/// `n2 * W2 + M_C * n3 * W3`; a county split three or more ways counts only
/// in the second term.
pub fn county_score(state: &PlanState<'_>, w: &ScoreWeights) -> f64 {
    county_score_of(state.county_splits(), None, w.m_c)
}

/// `sqrt(H(t1 - m1)) + sqrt(H(t2 - m2))` over the two districts with the
/// highest minority fractions.
pub fn minority_score(state: &PlanState<'_>, w: &ScoreWeights) -> Result<f64> {
    minority_score_of(&View::current(state.aggregates()), w)
}

/// `Σ bbox_area_i / area_i` using axis-aligned bounding rectangles.
pub fn dispersion_score(state: &PlanState<'_>) -> Result<f64> {
    dispersion_of(state, &View::current(state.aggregates()), None)
}

fn breakdown(
    state: &PlanState<'_>,
    view: &View<'_>,
    county_over: Option<(usize, CountySplit)>,
    preview: Option<&FlipPreview>,
    w: &ScoreWeights,
    compactness: Compactness,
) -> Result<ScoreBreakdown> {
    let jp = pop_score(view, ideal(state));
    let ji = match compactness {
        Compactness::Iso => iso_score(view)?,
        Compactness::Dispersion => dispersion_of(state, view, preview)?,
    };
    let jc = county_score_of(state.county_splits(), county_over, w.m_c);
    let jm = minority_score_of(view, w)?;
    Ok(ScoreBreakdown::combine(jp, ji, jc, jm, w))
}

/// Scores the current state from its cached aggregates, without checking
/// contiguity.
pub fn score_components(
    state: &PlanState<'_>,
    w: &ScoreWeights,
    compactness: Compactness,
) -> Result<ScoreBreakdown> {
    breakdown(state, &View::current(state.aggregates()), None, None, w, compactness)
}

/// Full score; any non-contiguous district yields the rejected sentinel.
pub fn total_score(
    state: &PlanState<'_>,
    w: &ScoreWeights,
    compactness: Compactness,
) -> Result<ScoreBreakdown> {
    if (1..=state.num_districts()).any(|d| !state.is_contiguous(d)) {
        return Ok(ScoreBreakdown::rejected());
    }
    score_components(state, w, compactness)
}

/// Scores the state a preview describes, without mutating anything.
pub fn score_after(
    state: &PlanState<'_>,
    preview: &FlipPreview,
    w: &ScoreWeights,
    compactness: Compactness,
) -> Result<ScoreBreakdown> {
    let county = state.graph().county_of(preview.vtd);
    breakdown(
        state,
        &View::after(state.aggregates(), preview),
        Some((county, preview.county_split)),
        Some(preview),
        w,
        compactness,
    )
}

/// `J(after) - J(now)` for flipping `vtd` to `to`; `+inf` if the donor
/// district would be disconnected.
pub fn score_delta(
    state: &PlanState<'_>,
    vtd: usize,
    to: u32,
    w: &ScoreWeights,
    compactness: Compactness,
) -> Result<f64> {
    let preview = state.preview_flip(vtd, to)?;
    if !state.donor_stays_connected(vtd) {
        return Ok(f64::INFINITY);
    }
    let now = score_components(state, w, compactness)?;
    let after = score_after(state, &preview, w, compactness)?;
    Ok(after.j_total - now.j_total)
}
