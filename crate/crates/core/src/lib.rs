//! Genotype posteriors and individual disease risk from a family history.
//!
//! A pedigree becomes a Bayesian network over four-state genotypes with
//! right-censored, piecewise-constant-hazard phenotypes. Exact posteriors come
//! from belief propagation on a junction tree; risk curves follow from the
//! posterior carrier probability with or without competing mortality.

pub mod config;
pub mod genemodel;
pub mod inference;
pub mod jtree;
pub mod oracle;
pub mod pedigree;
pub mod report;
pub mod risk;
pub mod survival;
pub mod table;

pub use config::Model;
pub use genemodel::{CarrierPredicate, GeneticModel, Genotype, GenotypeSet, TestOutcome};
pub use inference::{carrier_probability_at, InferenceError, Network, PosteriorResult};
pub use jtree::{JunctionTree, MinFill, Skeleton};
pub use pedigree::{Individual, Pedigree, PedigreeError, PhenotypeEvent, Sex};
pub use survival::{DiseaseModel, PiecewiseHazard};
pub use risk::{RiskCurve, RiskQuery};
