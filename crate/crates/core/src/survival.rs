//! Piecewise-constant hazards and the built-in incidence tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HazardError {
    #[error("at least one cut point is required")]
    NoCuts,
    #[error("cut points must be finite and strictly increasing (at position {0})")]
    CutOrder(usize),
    #[error("expected {expected} rates for {cuts} cut points, got {got}")]
    RateCount { cuts: usize, expected: String, got: usize },
    #[error("rate {value} at position {index} is negative or not finite")]
    BadRate { index: usize, value: f64 },
    #[error("penetrance F({age}) = {value} must be in [0, 1)")]
    Penetrance { age: f64, value: f64 },
    #[error("density f({age}) = {value} must be finite and non-negative")]
    Density { age: f64, value: f64 },
    #[error("ages, F and f must have the same non-zero length")]
    PenetranceShape,
    #[error("ages must be finite and strictly increasing")]
    AgeOrder,
}

/// A hazard that is constant on each interval `]c_{j-1}, c_j]`, with
/// `pre_rate` on `[0, c_0]` and `tail_rate` beyond the last cut.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHazard {
    cuts: Vec<f64>,
    rates: Vec<f64>,
    pre_rate: f64,
    tail_rate: f64,
    // cumulative hazard at each cut
    cumulative: Vec<f64>,
}

impl PiecewiseHazard {
    /// `rates[j]` applies on `]cuts[j], cuts[j + 1]]`, so `rates.len()` must be
    /// `cuts.len() - 1`.
    pub fn new(
        cuts: Vec<f64>,
        rates: Vec<f64>,
        pre_rate: f64,
        tail_rate: f64,
    ) -> Result<Self, HazardError> {
        if cuts.is_empty() {
            return Err(HazardError::NoCuts);
        }
        for (i, c) in cuts.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 || (i > 0 && *c <= cuts[i - 1]) {
                return Err(HazardError::CutOrder(i));
            }
        }
        if rates.len() + 1 != cuts.len() {
            return Err(HazardError::RateCount {
                cuts: cuts.len(),
                expected: format!("{}", cuts.len() - 1),
                got: rates.len(),
            });
        }
        let all = rates.iter().chain([&pre_rate, &tail_rate]);
        for (index, value) in all.enumerate() {
            if !value.is_finite() || *value < 0.0 {
                return Err(HazardError::BadRate {
                    index,
                    value: *value,
                });
            }
        }
        let mut cumulative = Vec::with_capacity(cuts.len());
        let mut acc = pre_rate * cuts[0];
        cumulative.push(acc);
        for j in 1..cuts.len() {
            acc += rates[j - 1] * (cuts[j] - cuts[j - 1]);
            cumulative.push(acc);
        }
        Ok(PiecewiseHazard {
            cuts,
            rates,
            pre_rate,
            tail_rate,
            cumulative,
        })
    }

    /// Table given as events per 100,000 person-years. With one value per
    /// interval the tail holds the last interval's rate; with one extra value
    /// that value is the tail rate. Zero before the first cut.
    pub fn from_per_100000(cuts: Vec<f64>, values: &[f64]) -> Result<Self, HazardError> {
        let per_year: Vec<f64> = values.iter().map(|v| v / 1e5).collect();
        Self::from_interval_rates(cuts, per_year)
    }

    fn from_interval_rates(cuts: Vec<f64>, mut rates: Vec<f64>) -> Result<Self, HazardError> {
        let n = cuts.len();
        if n == 0 {
            return Err(HazardError::NoCuts);
        }
        let tail = if rates.len() == n {
            rates.pop().unwrap()
        } else if rates.len() + 1 == n && !rates.is_empty() {
            *rates.last().unwrap()
        } else {
            return Err(HazardError::RateCount {
                cuts: n,
                expected: format!("{} or {}", n - 1, n),
                got: rates.len(),
            });
        };
        Self::new(cuts, rates, 0.0, tail)
    }

    /// Constant hazard on `[0, ∞)`.
    pub fn constant(rate: f64) -> Result<Self, HazardError> {
        Self::new(vec![0.0], vec![], rate, rate)
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero hazard is valid")
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn pre_rate(&self) -> f64 {
        self.pre_rate
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    /// λ(t), with λ(t) = rate_j for t in `]c_{j-1}, c_j]`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let k = self.cuts.partition_point(|c| *c < t);
        if k == 0 {
            self.pre_rate
        } else if k == self.cuts.len() {
            self.tail_rate
        } else {
            self.rates[k - 1]
        }
    }

    /// Λ(t) = ∫₀ᵗ λ(u) du, exact.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.cuts.partition_point(|c| *c < t);
        if k == 0 {
            self.pre_rate * t
        } else {
            let base = self.cumulative[k - 1];
            let rate = if k == self.cuts.len() {
                self.tail_rate
            } else {
                self.rates[k - 1]
            };
            base + rate * (t - self.cuts[k - 1])
        }
    }

    pub fn log_survival(&self, t: f64) -> f64 {
        -self.cumulative_hazard(t)
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.log_survival(t).exp()
    }

    /// λ(t)·S(t).
    pub fn density(&self, t: f64) -> f64 {
        self.rate_at(t) * self.survival(t)
    }

    /// Every age at which the rate may change.
    pub fn breakpoints(&self) -> &[f64] {
        &self.cuts
    }

    /// The table in the external JSON shape, tail rate appended.
    pub fn to_spec(&self) -> HazardSpec {
        // rounded so that literal tables echo back unchanged
        let per_100000 = |r: &f64| (r * 1e5 * 1e9).round() / 1e9;
        let mut rates: Vec<f64> = self.rates.iter().map(per_100000).collect();
        rates.push(per_100000(&self.tail_rate));
        HazardSpec::Table {
            cuts: self.cuts.clone(),
            rates_per_100000: rates,
        }
    }
}

/// Converts penetrance `F` and density `f` tabulated at representative ages
/// into hazards `f / (1 - F)`. Each age represents the interval between the
/// midpoints to its neighbours; the last age gives the tail rate.
pub fn hazard_from_penetrance(
    ages: &[f64],
    penetrance: &[f64],
    density: &[f64],
) -> Result<PiecewiseHazard, HazardError> {
    let m = ages.len();
    if m == 0 || penetrance.len() != m || density.len() != m {
        return Err(HazardError::PenetranceShape);
    }
    if ages.iter().any(|a| !a.is_finite() || *a < 0.0) || ages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HazardError::AgeOrder);
    }
    let mut rates = Vec::with_capacity(m);
    for ((&age, &big), &small) in ages.iter().zip(penetrance).zip(density) {
        if !(0.0..1.0).contains(&big) {
            return Err(HazardError::Penetrance { age, value: big });
        }
        if !small.is_finite() || small < 0.0 {
            return Err(HazardError::Density { age, value: small });
        }
        rates.push(small / (1.0 - big));
    }
    if m == 1 {
        return PiecewiseHazard::new(vec![0.0], vec![], 0.0, rates[0]);
    }
    let mut cuts = Vec::with_capacity(m);
    cuts.push((ages[0] - (ages[1] - ages[0]) / 2.0).max(0.0));
    for w in ages.windows(2) {
        cuts.push((w[0] + w[1]) / 2.0);
    }
    let tail = rates.pop().unwrap();
    PiecewiseHazard::new(cuts, rates, 0.0, tail)
}

/// External JSON form of a hazard table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum HazardSpec {
    Table {
        cuts: Vec<f64>,
        rates_per_100000: Vec<f64>,
    },
    Penetrance {
        ages: Vec<f64>,
        #[serde(rename = "F")]
        penetrance: Vec<f64>,
        #[serde(rename = "f")]
        density: Vec<f64>,
    },
}

impl HazardSpec {
    pub fn build(&self) -> Result<PiecewiseHazard, HazardError> {
        match self {
            HazardSpec::Table {
                cuts,
                rates_per_100000,
            } => PiecewiseHazard::from_per_100000(cuts.clone(), rates_per_100000),
            HazardSpec::Penetrance {
                ages,
                penetrance,
                density,
            } => hazard_from_penetrance(ages, penetrance, density),
        }
    }
}

/// Disease hazards for non-carriers (`lambda0`) and carriers (`lambda1`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseModel {
    pub noncarrier: PiecewiseHazard,
    pub carrier: PiecewiseHazard,
}

impl DiseaseModel {
    pub fn new(noncarrier: PiecewiseHazard, carrier: PiecewiseHazard) -> Self {
        DiseaseModel {
            noncarrier,
            carrier,
        }
    }

    pub fn hazard(&self, is_carrier: bool) -> &PiecewiseHazard {
        if is_carrier {
            &self.carrier
        } else {
            &self.noncarrier
        }
    }
}

pub const CLAUS_EASTON_ALLELE_FREQUENCY: f64 = 0.0033;

pub const CLAUS_EASTON_CUTS: [f64; 7] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

/// Annual breast-cancer incidence per 100,000, non-carriers; 20-30, ..., 70-80, >80.
pub const CLAUS_EASTON_NONCARRIER_PER_100000: [f64; 7] =
    [2.00, 26.04, 112.94, 139.94, 235.17, 232.16, 232.03];

/// Annual breast-cancer incidence per 100,000, carriers; same columns.
pub const CLAUS_EASTON_CARRIER_PER_100000: [f64; 7] =
    [168.35, 1391.49, 3153.21, 3222.22, 3281.25, 3289.86, 3286.43];

const CLAUS_EASTON_NONCARRIER_RATES: [f64; 7] =
    [2.00e-5, 26.04e-5, 112.94e-5, 139.94e-5, 235.17e-5, 232.16e-5, 232.03e-5];

const CLAUS_EASTON_CARRIER_RATES: [f64; 7] = [
    168.35e-5, 1391.49e-5, 3153.21e-5, 3222.22e-5, 3281.25e-5, 3289.86e-5, 3286.43e-5,
];

pub const FRENCH_DEATH_CUTS: [f64; 15] = [
    20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 85.0, 90.0, 95.0, 99.0, 100.0, 101.0, 102.0, 103.0,
];

/// Annual female all-cause death incidence per 100,000 (France 2012-2014),
/// one value per interval between consecutive `FRENCH_DEATH_CUTS`.
pub const FRENCH_DEATH_PER_100000: [f64; 14] = [
    23.85375, 46.86641, 130.5396, 308.9539, 599.914, 1493.6, 3845.406, 8114.203, 16400.99,
    27912.22, 35644.0, 38696.22, 43033.07, 45647.85,
];

const FRENCH_DEATH_RATES: [f64; 14] = [
    23.85375e-5,
    46.86641e-5,
    130.5396e-5,
    308.9539e-5,
    599.914e-5,
    1493.6e-5,
    3845.406e-5,
    8114.203e-5,
    16400.99e-5,
    27912.22e-5,
    35644e-5,
    38696.22e-5,
    43033.07e-5,
    45647.85e-5,
];

fn table_hazard(cuts: &[f64], rates: &[f64]) -> PiecewiseHazard {
    let n = cuts.len() - 1;
    let tail = rates[rates.len() - 1];
    PiecewiseHazard::new(cuts.to_vec(), rates[..n].to_vec(), 0.0, tail)
        .expect("built-in table is valid")
}

/// Claus-Easton breast-cancer hazards and mutated-allele frequency.
pub fn builtin_claus_easton() -> (DiseaseModel, f64) {
    let noncarrier = table_hazard(&CLAUS_EASTON_CUTS, &CLAUS_EASTON_NONCARRIER_RATES);
    let carrier = table_hazard(&CLAUS_EASTON_CUTS, &CLAUS_EASTON_CARRIER_RATES);
    (
        DiseaseModel::new(noncarrier, carrier),
        CLAUS_EASTON_ALLELE_FREQUENCY,
    )
}

/// French female all-cause mortality.
pub fn builtin_french_death() -> PiecewiseHazard {
    table_hazard(&FRENCH_DEATH_CUTS, &FRENCH_DEATH_RATES)
}
