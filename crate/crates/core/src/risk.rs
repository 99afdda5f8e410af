//! Posterior survival, carrier probability and hazard for an unaffected
//! individual, and cumulative disease risk with or without competing death.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::genemodel::GeneticModel;
use crate::inference::{carrier_probability_at, InferenceError};
use crate::pedigree::{Pedigree, PhenotypeKind};
use crate::survival::{DiseaseModel, PiecewiseHazard};

pub const DEFAULT_T_MAX: f64 = 100.0;
pub const DEFAULT_DELTA_T: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("invalid risk query: {0}")]
    Query(String),
    #[error("age {t} is before the conditioning age {tau}")]
    BeforeTau { t: f64, tau: f64 },
    #[error("individual {0:?} is affected; risk curves are only defined for unaffected individuals")]
    Affected(String),
    #[error("unknown individual {0:?}")]
    UnknownIndividual(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// An individual unaffected at age `tau` with posterior carrier probability `pi`.
#[derive(Debug, Clone, Copy)]
pub struct RiskQuery<'a> {
    pub pi: f64,
    pub tau: f64,
    pub disease: &'a DiseaseModel,
    pub death: Option<&'a PiecewiseHazard>,
    pub t_max: f64,
    pub delta_t: f64,
}

impl<'a> RiskQuery<'a> {
    pub fn new(pi: f64, tau: f64, disease: &'a DiseaseModel) -> Self {
        RiskQuery {
            pi,
            tau,
            disease,
            death: None,
            t_max: DEFAULT_T_MAX,
            delta_t: DEFAULT_DELTA_T,
        }
    }

    pub fn with_death(mut self, death: &'a PiecewiseHazard) -> Self {
        self.death = Some(death);
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_delta_t(mut self, delta_t: f64) -> Self {
        self.delta_t = delta_t;
        self
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(RiskError::Query(format!("pi = {} is not in [0, 1]", self.pi)));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(RiskError::Query(format!("tau = {} must be a non-negative age", self.tau)));
        }
        if !self.t_max.is_finite() || self.t_max <= self.tau {
            return Err(RiskError::Query(format!(
                "t_max = {} must exceed tau = {}",
                self.t_max, self.tau
            )));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(RiskError::Query(format!("delta_t = {} must be positive", self.delta_t)));
        }
        Ok(())
    }

    fn check_age(&self, t: f64) -> Result<(), RiskError> {
        if t < self.tau || t.is_nan() {
            Err(RiskError::BeforeTau { t, tau: self.tau })
        } else {
            Ok(())
        }
    }

    // ln of the unnormalised mixture weights π S1(t)/S1(τ) and (1-π) S0(t)/S0(τ)
    fn log_weights(&self, t: f64) -> (f64, f64) {
        let d1 = self.disease.carrier.cumulative_hazard(t) - self.disease.carrier.cumulative_hazard(self.tau);
        let d0 = self.disease.noncarrier.cumulative_hazard(t)
            - self.disease.noncarrier.cumulative_hazard(self.tau);
        (self.pi.ln() - d1, (1.0 - self.pi).ln() - d0)
    }
}

/// `S(t) = π S1(t)/S1(τ) + (1-π) S0(t)/S0(τ)`.
pub fn posterior_survival(q: &RiskQuery, t: f64) -> Result<f64, RiskError> {
    q.check_age(t)?;
    let (l1, l0) = q.log_weights(t);
    Ok(l1.exp() + l0.exp())
}

/// `P(X ≠ 00 | FH, T > t) = π S1(t)/S1(τ) / S(t)`.
pub fn posterior_carrier(q: &RiskQuery, t: f64) -> Result<f64, RiskError> {
    q.check_age(t)?;
    Ok(carrier_weight(q.log_weights(t)))
}

/// Posterior hazard: the carrier and non-carrier hazards mixed with the
/// posterior carrier probability at `t`.
pub fn posterior_hazard(q: &RiskQuery, t: f64) -> Result<f64, RiskError> {
    q.check_age(t)?;
    let w = carrier_weight(q.log_weights(t));
    Ok(w * q.disease.carrier.rate_at(t) + (1.0 - w) * q.disease.noncarrier.rate_at(t))
}

fn carrier_weight((l1, l0): (f64, f64)) -> f64 {
    if l1 == f64::NEG_INFINITY {
        return 0.0;
    }
    if l0 == f64::NEG_INFINITY {
        return 1.0;
    }
    // logistic of the log-odds, stable for large differences
    1.0 / (1.0 + (l0 - l1).exp())
}

/// `∫_τ^t α(u) S_β(u) du` with `S_β(u) = exp(-∫_τ^u β)`, for piecewise
/// constant `α` and `β`, evaluated interval by interval on their common cuts.
pub fn cumulative_incidence(alpha: &PiecewiseHazard, beta: &PiecewiseHazard, tau: f64, t: f64) -> f64 {
    if t <= tau {
        return 0.0;
    }
    let mut points = vec![tau];
    let mut cuts: Vec<f64> = alpha
        .breakpoints()
        .iter()
        .chain(beta.breakpoints())
        .copied()
        .filter(|c| *c > tau && *c < t)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    points.extend(cuts);
    points.push(t);

    let mut log_s = 0.0f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        total += interval_incidence(alpha.rate_at(mid), beta.rate_at(mid), log_s.exp(), b - a);
        log_s -= beta.rate_at(mid) * (b - a);
    }
    total
}

// α/β (S(a) - S(b)) on an interval of constant rates, S(a) = s; α Δ s when β = 0.
fn interval_incidence(alpha: f64, beta: f64, s: f64, width: f64) -> f64 {
    if beta > 0.0 {
        alpha / beta * s * -(-beta * width).exp_m1()
    } else {
        alpha * width * s
    }
}

/// Grid `τ = c_0 < … < c_N = t_max`: steps of `Δt` from `τ` merged with every
/// cut of the disease and death hazards.
pub fn risk_grid(q: &RiskQuery) -> Vec<f64> {
    let mut ages = Vec::new();
    let steps = ((q.t_max - q.tau) / q.delta_t).ceil() as usize;
    for k in 0..steps {
        let c = q.tau + k as f64 * q.delta_t;
        if c < q.t_max {
            ages.push(c);
        }
    }
    let death_cuts: &[f64] = q.death.map(|d| d.breakpoints()).unwrap_or(&[]);
    ages.extend(
        q.disease
            .noncarrier
            .breakpoints()
            .iter()
            .chain(q.disease.carrier.breakpoints())
            .chain(death_cuts)
            .filter(|c| **c > q.tau && **c < q.t_max),
    );
    ages.push(q.t_max);
    ages.sort_by(f64::total_cmp);
    // drop grid points that coincide with a cut up to rounding of k Δt
    let mut out: Vec<f64> = Vec::with_capacity(ages.len());
    for a in ages {
        match out.last() {
            Some(last) if a - last < 1e-9 => {
                if breakpoint_like(a, q) {
                    *out.last_mut().unwrap() = a;
                }
            }
            _ => out.push(a),
        }
    }
    out[0] = q.tau;
    out
}

fn breakpoint_like(a: f64, q: &RiskQuery) -> bool {
    let death_cuts: &[f64] = q.death.map(|d| d.breakpoints()).unwrap_or(&[]);
    q.disease
        .noncarrier
        .breakpoints()
        .iter()
        .chain(q.disease.carrier.breakpoints())
        .chain(death_cuts)
        .any(|c| *c == a)
        || a == q.t_max
}

/// Discretised cumulative incidence `P(T ≤ c_k | FH)` on `grid` with death as
/// a competing event: `α_j` is the posterior hazard at `c_j`,
/// `β_j = α_j + λ_death(c_j)`.
pub fn discretized_incidence(q: &RiskQuery, death: &PiecewiseHazard, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    let mut log_s = 0.0f64;
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let alpha = posterior_hazard(q, b).expect("grid starts at tau");
        let beta = alpha + death.rate_at(b);
        total += interval_incidence(alpha, beta, log_s.exp(), b - a);
        log_s -= beta * (b - a);
        out.push(total);
    }
    out
}

/// Risk curve from `τ` to `t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub ages: Vec<f64>,
    /// `1 - S(c_k)`, no competing event.
    pub risk_no_competing: Vec<f64>,
    /// Discretised risk with death as a competing event, when a death
    /// hazard was supplied.
    pub risk_competing: Option<Vec<f64>>,
    pub posterior_carrier: Vec<f64>,
    pub posterior_hazard: Vec<f64>,
}

impl RiskCurve {
    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    /// Value at the last grid point: risk without and with competing death.
    pub fn final_risks(&self) -> (f64, Option<f64>) {
        (
            *self.risk_no_competing.last().unwrap_or(&0.0),
            self.risk_competing.as_ref().and_then(|r| r.last().copied()),
        )
    }
}

/// The full curve for a query; the competing-risk column is filled when the
/// query carries a death hazard.
pub fn cumulative_incidence_competing(q: &RiskQuery) -> Result<RiskCurve, RiskError> {
    q.validate()?;
    let ages = risk_grid(q);
    let mut risk_no_competing = Vec::with_capacity(ages.len());
    let mut carrier = Vec::with_capacity(ages.len());
    let mut hazard = Vec::with_capacity(ages.len());
    for &c in &ages {
        risk_no_competing.push(1.0 - posterior_survival(q, c)?);
        carrier.push(posterior_carrier(q, c)?);
        hazard.push(posterior_hazard(q, c)?);
    }
    let risk_competing = q.death.map(|d| discretized_incidence(q, d, &ages));
    Ok(RiskCurve {
        ages,
        risk_no_competing,
        risk_competing,
        posterior_carrier: carrier,
        posterior_hazard: hazard,
    })
}

/// Carrier probability, conditioning age and risk curve of one individual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndividualRisk {
    pub id: String,
    pub pi: f64,
    pub tau: f64,
    pub curve: RiskCurve,
}

/// Options for [`risk_curve_from_pedigree`].
#[derive(Debug, Clone, Copy)]
pub struct RiskOptions<'a> {
    /// Conditioning age; defaults to the individual's censoring age (0 with
    /// no recorded phenotype).
    pub tau: Option<f64>,
    pub death: Option<&'a PiecewiseHazard>,
    pub t_max: f64,
    pub delta_t: f64,
}

impl Default for RiskOptions<'_> {
    fn default() -> Self {
        RiskOptions {
            tau: None,
            death: None,
            t_max: DEFAULT_T_MAX,
            delta_t: DEFAULT_DELTA_T,
        }
    }
}

/// Posterior carrier probability of an unaffected individual at `τ` given the
/// rest of the family, then the risk curve from there.
pub fn risk_curve_from_pedigree(
    pedigree: &Pedigree,
    id: &str,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
    options: RiskOptions,
) -> Result<IndividualRisk, RiskError> {
    let k = pedigree
        .index_of(id)
        .ok_or_else(|| RiskError::UnknownIndividual(id.to_string()))?;
    let recorded = pedigree.individual(k).phenotype;
    if let Some(ph) = recorded {
        if ph.kind == PhenotypeKind::Affected {
            return Err(RiskError::Affected(id.to_string()));
        }
    }
    let tau = options.tau.unwrap_or_else(|| recorded.map(|ph| ph.age).unwrap_or(0.0));
    let pi = carrier_probability_at(pedigree, k, tau, genetics, disease)?;
    let mut q = RiskQuery::new(pi, tau, disease)
        .with_t_max(options.t_max)
        .with_delta_t(options.delta_t);
    if let Some(d) = options.death {
        q = q.with_death(d);
    }
    let curve = cumulative_incidence_competing(&q)?;
    Ok(IndividualRisk {
        id: id.to_string(),
        pi,
        tau,
        curve,
    })
}

/// One cell of the `(π, τ)` sweep: risks at `t_max` and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub pi: f64,
    pub tau: f64,
    pub risk_no_competing: f64,
    pub risk_competing: f64,
    pub difference: f64,
}

/// Risk at `t_max` without minus with competing death over a grid of
/// `(π, τ)`, computed in parallel. Cells with `τ ≥ t_max` are skipped.
pub fn heatmap(
    pis: &[f64],
    taus: &[f64],
    disease: &DiseaseModel,
    death: &PiecewiseHazard,
    t_max: f64,
    delta_t: f64,
) -> Result<Vec<HeatmapCell>, RiskError> {
    let cells: Vec<(f64, f64)> = pis
        .iter()
        .flat_map(|pi| taus.iter().filter(|t| **t < t_max).map(move |tau| (*pi, *tau)))
        .collect();
    cells
        .par_iter()
        .map(|&(pi, tau)| {
            let q = RiskQuery::new(pi, tau, disease)
                .with_death(death)
                .with_t_max(t_max)
                .with_delta_t(delta_t);
            q.validate()?;
            let no = 1.0 - posterior_survival(&q, t_max)?;
            let grid = risk_grid(&q);
            let with = *discretized_incidence(&q, death, &grid).last().unwrap();
            Ok(HeatmapCell {
                pi,
                tau,
                risk_no_competing: no,
                risk_competing: with,
                difference: no - with,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{builtin_claus_easton, builtin_french_death};

    fn ce() -> DiseaseModel {
        builtin_claus_easton().0
    }

    #[test]
    fn degenerate_mixtures() {
        let dm = ce();
        let q1 = RiskQuery::new(1.0, 30.0, &dm);
        let q0 = RiskQuery::new(0.0, 30.0, &dm);
        for t in [30.0, 35.5, 60.0, 99.0] {
            let s1 = dm.carrier.survival(t) / dm.carrier.survival(30.0);
            let s0 = dm.noncarrier.survival(t) / dm.noncarrier.survival(30.0);
            assert!((posterior_survival(&q1, t).unwrap() - s1).abs() < 1e-14);
            assert!((posterior_survival(&q0, t).unwrap() - s0).abs() < 1e-14);
            assert_eq!(posterior_carrier(&q1, t).unwrap(), 1.0);
            assert_eq!(posterior_carrier(&q0, t).unwrap(), 0.0);
            assert_eq!(posterior_hazard(&q1, t).unwrap(), dm.carrier.rate_at(t));
            assert_eq!(posterior_hazard(&q0, t).unwrap(), dm.noncarrier.rate_at(t));
        }
    }

    #[test]
    fn mixture_at_fifty() {
        let dm = ce();
        let q = RiskQuery::new(0.5, 40.0, &dm);
        // constant rates on (40, 50]
        let expect = 0.5 * (-10.0 * 3153.21e-5f64).exp() + 0.5 * (-10.0 * 112.94e-5f64).exp();
        assert!((posterior_survival(&q, 50.0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn carrier_probability_starts_at_pi_and_decreases() {
        let dm = ce();
        let q = RiskQuery::new(0.3, 25.0, &dm);
        assert!((posterior_carrier(&q, 25.0).unwrap() - 0.3).abs() < 1e-15);
        let mut last = 0.3;
        for k in 1..=75 {
            let p = posterior_carrier(&q, 25.0 + k as f64).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ages_before_tau_are_rejected() {
        let dm = ce();
        let q = RiskQuery::new(0.3, 40.0, &dm);
        assert!(matches!(posterior_survival(&q, 39.0), Err(RiskError::BeforeTau { .. })));
        assert!(posterior_carrier(&q, 10.0).is_err());
        assert!(posterior_hazard(&q, 10.0).is_err());
    }

    #[test]
    fn invalid_queries() {
        let dm = ce();
        assert!(RiskQuery::new(1.2, 40.0, &dm).validate().is_err());
        assert!(RiskQuery::new(0.2, 100.0, &dm).validate().is_err());
        assert!(RiskQuery::new(0.2, 40.0, &dm).with_delta_t(0.0).validate().is_err());
        assert!(RiskQuery::new(0.2, -1.0, &dm).validate().is_err());
    }

    #[test]
    fn constant_rates_hand_case() {
        let alpha = PiecewiseHazard::constant(0.01).unwrap();
        let beta = PiecewiseHazard::constant(0.03).unwrap();
        let p = cumulative_incidence(&alpha, &beta, 0.0, 10.0);
        let expect = (1.0 - (-0.3f64).exp()) / 3.0;
        assert!((p - expect).abs() < 1e-15);
        assert!((p - 0.086394).abs() < 1e-6);
    }

    #[test]
    fn zero_beta_limit() {
        let z = PiecewiseHazard::zero();
        assert_eq!(cumulative_incidence(&z, &z, 0.0, 10.0), 0.0);
        // α = β gives 1 - exp(-rT)
        let r = PiecewiseHazard::constant(0.02).unwrap();
        let p = cumulative_incidence(&r, &r, 5.0, 25.0);
        assert!((p - (1.0 - (-0.4f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn grid_contains_cuts_and_ends() {
        let dm = ce();
        let death = builtin_french_death();
        let q = RiskQuery::new(0.5, 37.0, &dm).with_death(&death);
        let g = risk_grid(&q);
        assert_eq!(g[0], 37.0);
        assert_eq!(*g.last().unwrap(), 100.0);
        for c in [40.0, 50.0, 85.0, 95.0, 99.0] {
            assert!(g.contains(&c), "missing cut {c}");
        }
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-9));
    }

    #[test]
    fn curve_shape() {
        let dm = ce();
        let death = builtin_french_death();
        let q = RiskQuery::new(0.446, 37.0, &dm).with_death(&death);
        let curve = cumulative_incidence_competing(&q).unwrap();
        let with = curve.risk_competing.as_ref().unwrap();
        assert_eq!(curve.risk_no_competing[0], 0.0);
        assert_eq!(with[0], 0.0);
        for k in 1..curve.len() {
            assert!(curve.risk_no_competing[k] >= curve.risk_no_competing[k - 1]);
            assert!(with[k] >= with[k - 1]);
            assert!(with[k] <= curve.risk_no_competing[k] + 1e-12);
            assert!(curve.posterior_carrier[k] <= curve.posterior_carrier[k - 1]);
        }
    }

    #[test]
    fn no_death_matches_plain_incidence() {
        let dm = ce();
        let zero = PiecewiseHazard::zero();
        let q = RiskQuery::new(0.7, 30.0, &dm).with_death(&zero);
        let curve = cumulative_incidence_competing(&q).unwrap();
        let with = curve.risk_competing.unwrap();
        let worst = with
            .iter()
            .zip(&curve.risk_no_competing)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn heatmap_differences_are_non_negative() {
        let dm = ce();
        let death = builtin_french_death();
        let cells = heatmap(&[0.0, 0.5, 1.0], &[20.0, 50.0, 80.0, 100.0], &dm, &death, 100.0, 0.5).unwrap();
        assert_eq!(cells.len(), 9);
        for c in cells {
            assert!(c.difference >= 0.0);
        }
    }
}
