//! Genotype space, founder priors and allele transmission.
//!
//! Genotypes are ordered pairs of alleles at one bi-allelic locus, written with
//! the paternal allele first: `10` is a heterozygous carrier whose mutated
//! allele came from the father. The ordering is kept everywhere so that
//! parent-of-origin posteriors stay available; collapsing to carrier status
//! happens only when reporting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One of the four ordered genotypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Genotype {
    G00,
    G01,
    G10,
    G11,
}

impl Genotype {
    pub const ALL: [Genotype; 4] = [Genotype::G00, Genotype::G01, Genotype::G10, Genotype::G11];

    /// Dense index: `2 * paternal + maternal`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Genotype {
        Self::ALL[index]
    }

    pub fn from_alleles(paternal: u8, maternal: u8) -> Genotype {
        Self::from_index(2 * (paternal as usize & 1) + (maternal as usize & 1))
    }

    pub fn paternal(self) -> u8 {
        (self.index() >> 1) as u8
    }

    pub fn maternal(self) -> u8 {
        (self.index() & 1) as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Genotype::G00 => "00",
            Genotype::G01 => "01",
            Genotype::G10 => "10",
            Genotype::G11 => "11",
        }
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid genotype {0:?}: expected one of \"00\", \"01\", \"10\", \"11\"")]
pub struct ParseGenotypeError(pub String);

impl FromStr for Genotype {
    type Err = ParseGenotypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "00" => Ok(Genotype::G00),
            "01" => Ok(Genotype::G01),
            "10" => Ok(Genotype::G10),
            "11" => Ok(Genotype::G11),
            other => Err(ParseGenotypeError(other.to_string())),
        }
    }
}

impl Serialize for Genotype {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A subset of the four genotypes, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenotypeSet(u8);

impl GenotypeSet {
    pub const ALL: GenotypeSet = GenotypeSet(0b1111);
    pub const EMPTY: GenotypeSet = GenotypeSet(0);

    pub fn only(g: Genotype) -> Self {
        GenotypeSet(1 << g.index())
    }

    pub fn from_bits(bits: u8) -> Self {
        GenotypeSet(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, g: Genotype) -> bool {
        self.0 & (1 << g.index()) != 0
    }

    pub fn insert(&mut self, g: Genotype) {
        self.0 |= 1 << g.index();
    }

    pub fn remove(&mut self, g: Genotype) {
        self.0 &= !(1 << g.index());
    }

    pub fn intersect(self, other: GenotypeSet) -> GenotypeSet {
        GenotypeSet(self.0 & other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_all(self) -> bool {
        self.0 == 0b1111
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Genotype> {
        Genotype::ALL.into_iter().filter(move |g| self.contains(*g))
    }
}

impl Default for GenotypeSet {
    fn default() -> Self {
        GenotypeSet::ALL
    }
}

impl FromIterator<Genotype> for GenotypeSet {
    fn from_iter<I: IntoIterator<Item = Genotype>>(iter: I) -> Self {
        let mut set = GenotypeSet::EMPTY;
        for g in iter {
            set.insert(g);
        }
        set
    }
}

/// Hardy-Weinberg genotype distribution for mutated-allele frequency `f`.
pub fn hardy_weinberg(f: f64) -> [f64; 4] {
    let q = 1.0 - f;
    [q * q, f * q, f * q, f * f]
}

/// Probability that a child of `father` and `mother` has genotype `child`,
/// each parent passing one of its two alleles uniformly at random.
pub fn mendelian_transmission(child: Genotype, father: Genotype, mother: Genotype) -> f64 {
    allele_pick(father, child.paternal()) * allele_pick(mother, child.maternal())
}

fn allele_pick(parent: Genotype, allele: u8) -> f64 {
    let hits = (parent.paternal() == allele) as u8 + (parent.maternal() == allele) as u8;
    f64::from(hits) / 2.0
}

/// Zeroes every entry outside `allowed`. No renormalisation: the missing mass
/// is accounted for globally through the evidence.
pub fn apply_constraint(values: [f64; 4], allowed: GenotypeSet) -> Result<[f64; 4], ModelError> {
    if allowed.is_empty() {
        return Err(ModelError::EmptyConstraint);
    }
    let mut out = values;
    for g in Genotype::ALL {
        if !allowed.contains(g) {
            out[g.index()] = 0.0;
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("allowed genotype set is empty")]
    EmptyConstraint,
    #[error("allele frequency {0} is outside [0, 1]")]
    AlleleFrequency(f64),
    #[error("founder prior must be non-negative and sum to 1 (sum = {0})")]
    FounderPrior(f64),
    #[error("transmission table for parents ({father}, {mother}) sums to {sum}, expected 1")]
    Transmission {
        father: Genotype,
        mother: Genotype,
        sum: f64,
    },
    #[error("every genotype is declared lethal")]
    AllLethal,
}

/// Which genotypes carry the disease-associated hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarrierPredicate(GenotypeSet);

impl CarrierPredicate {
    /// Autosomal dominant: any copy of the mutated allele.
    pub fn dominant() -> Self {
        CarrierPredicate(GenotypeSet::from_bits(0b1110))
    }

    pub fn from_set(carriers: GenotypeSet) -> Self {
        CarrierPredicate(carriers)
    }

    pub fn is_carrier(self, g: Genotype) -> bool {
        self.0.contains(g)
    }

    pub fn carriers(self) -> GenotypeSet {
        self.0
    }
}

impl Default for CarrierPredicate {
    fn default() -> Self {
        Self::dominant()
    }
}

/// Transmission table indexed `[father][mother][child]`.
pub type TransmissionTable = [[[f64; 4]; 4]; 4];

pub fn mendelian_table() -> TransmissionTable {
    let mut table = [[[0.0; 4]; 4]; 4];
    for father in Genotype::ALL {
        for mother in Genotype::ALL {
            for child in Genotype::ALL {
                table[father.index()][mother.index()][child.index()] =
                    mendelian_transmission(child, father, mother);
            }
        }
    }
    table
}

/// The genetic part of the network: founder prior, transmission and the
/// carrier mapping used by the disease model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneticModel {
    allele_frequency: f64,
    founder_prior: [f64; 4],
    transmission: TransmissionTable,
    carrier: CarrierPredicate,
    lethal: GenotypeSet,
}

impl GeneticModel {
    /// Hardy-Weinberg founders, Mendelian transmission, dominant carriers.
    pub fn new(allele_frequency: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&allele_frequency) {
            return Err(ModelError::AlleleFrequency(allele_frequency));
        }
        Ok(GeneticModel {
            allele_frequency,
            founder_prior: hardy_weinberg(allele_frequency),
            transmission: mendelian_table(),
            carrier: CarrierPredicate::dominant(),
            lethal: GenotypeSet::EMPTY,
        })
    }

    pub fn with_founder_prior(mut self, prior: [f64; 4]) -> Result<Self, ModelError> {
        let sum: f64 = prior.iter().sum();
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::FounderPrior(sum));
        }
        self.founder_prior = prior;
        Ok(self)
    }

    pub fn with_transmission(mut self, table: TransmissionTable) -> Result<Self, ModelError> {
        for father in Genotype::ALL {
            for mother in Genotype::ALL {
                let row = &table[father.index()][mother.index()];
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(ModelError::Transmission { father, mother, sum });
                }
            }
        }
        self.transmission = table;
        Ok(self)
    }

    pub fn with_carrier_predicate(mut self, carrier: CarrierPredicate) -> Self {
        self.carrier = carrier;
        self
    }

    /// Genotypes forbidden for every individual (zeroed, not renormalised).
    pub fn with_lethal(mut self, lethal: GenotypeSet) -> Result<Self, ModelError> {
        if lethal.is_all() {
            return Err(ModelError::AllLethal);
        }
        self.lethal = lethal;
        Ok(self)
    }

    pub fn allele_frequency(&self) -> f64 {
        self.allele_frequency
    }

    pub fn founder_prior(&self) -> [f64; 4] {
        self.founder_prior
    }

    pub fn transmission(&self, child: Genotype, father: Genotype, mother: Genotype) -> f64 {
        self.transmission[father.index()][mother.index()][child.index()]
    }

    pub fn carrier(&self) -> CarrierPredicate {
        self.carrier
    }

    pub fn is_carrier(&self, g: Genotype) -> bool {
        self.carrier.is_carrier(g)
    }

    pub fn lethal(&self) -> GenotypeSet {
        self.lethal
    }

    /// Genotypes not excluded as lethal.
    pub fn viable(&self) -> GenotypeSet {
        GenotypeSet::from_bits(!self.lethal.bits())
    }
}

/// Outcome of a genetic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOutcome {
    Positive,
    Negative,
}

/// `P(observed | genotype)` for a test with the given sensitivity and
/// specificity. The test sees carrier status only, so `01` and `10` always
/// receive the same likelihood.
pub fn test_likelihood(
    observed: TestOutcome,
    sensitivity: f64,
    specificity: f64,
    carrier: CarrierPredicate,
) -> [f64; 4] {
    let mut out = [0.0; 4];
    for g in Genotype::ALL {
        out[g.index()] = match (observed, carrier.is_carrier(g)) {
            (TestOutcome::Positive, true) => sensitivity,
            (TestOutcome::Positive, false) => 1.0 - specificity,
            (TestOutcome::Negative, true) => 1.0 - sensitivity,
            (TestOutcome::Negative, false) => specificity,
        };
    }
    out
}
