//! Model configuration: genetic parameters, disease hazards and the optional
//! death hazard, from JSON or built in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genemodel::{CarrierPredicate, GeneticModel, Genotype, GenotypeSet, ModelError};
use crate::survival::{
    builtin_claus_easton, builtin_french_death, DiseaseModel, HazardError, HazardSpec, PiecewiseHazard,
};

pub const CLAUS_EASTON: &str = "claus-easton";

/// Names accepted by [`Model::builtin`].
pub const BUILTIN_MODELS: [&str; 1] = [CLAUS_EASTON];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: {source}")]
    Hazard {
        field: &'static str,
        #[source]
        source: HazardError,
    },
    #[error(transparent)]
    Genetics(#[from] ModelError),
    #[error("unknown built-in model {0:?}")]
    UnknownModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenetranceConfig {
    pub noncarrier: HazardSpec,
    pub carrier: HazardSpec,
}

/// External JSON form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub allele_frequency: f64,
    /// Defaults to the dominant predicate (every genotype but 00).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_genotypes: Option<Vec<Genotype>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lethal_genotypes: Vec<Genotype>,
    pub penetrance: PenetranceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death: Option<HazardSpec>,
}

/// Everything inference and risk computations need.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub genetics: GeneticModel,
    pub disease: DiseaseModel,
    pub death: Option<PiecewiseHazard>,
}

impl Model {
    /// Claus-Easton breast-cancer model with French female mortality.
    pub fn claus_easton() -> Model {
        let (disease, f) = builtin_claus_easton();
        Model {
            name: CLAUS_EASTON.to_string(),
            genetics: GeneticModel::new(f).expect("built-in frequency is valid"),
            disease,
            death: Some(builtin_french_death()),
        }
    }

    pub fn builtin(name: &str) -> Result<Model, ConfigError> {
        match name {
            CLAUS_EASTON => Ok(Self::claus_easton()),
            other => Err(ConfigError::UnknownModel(other.to_string())),
        }
    }

    pub fn from_config(config: &ModelConfig) -> Result<Model, ConfigError> {
        let hazard = |field, spec: &HazardSpec| spec.build().map_err(|source| ConfigError::Hazard { field, source });
        let mut genetics = GeneticModel::new(config.allele_frequency)?;
        if let Some(carriers) = &config.carrier_genotypes {
            let set: GenotypeSet = carriers.iter().copied().collect();
            genetics = genetics.with_carrier_predicate(CarrierPredicate::from_set(set));
        }
        if !config.lethal_genotypes.is_empty() {
            genetics = genetics.with_lethal(config.lethal_genotypes.iter().copied().collect())?;
        }
        let disease = DiseaseModel::new(
            hazard("penetrance.noncarrier", &config.penetrance.noncarrier)?,
            hazard("penetrance.carrier", &config.penetrance.carrier)?,
        );
        let death = config.death.as_ref().map(|d| hazard("death", d)).transpose()?;
        Ok(Model {
            name: config.name.clone().unwrap_or_else(|| "custom".to_string()),
            genetics,
            disease,
            death,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Model, ConfigError> {
        Self::from_config(&serde_json::from_str(s)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Model, ConfigError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Parameters in the external JSON shape.
    pub fn to_config(&self) -> ModelConfig {
        let carriers = self.genetics.carrier().carriers();
        ModelConfig {
            name: Some(self.name.clone()),
            allele_frequency: self.genetics.allele_frequency(),
            carrier_genotypes: (carriers != CarrierPredicate::dominant().carriers()).then(|| carriers.iter().collect()),
            lethal_genotypes: self.genetics.lethal().iter().collect(),
            penetrance: PenetranceConfig {
                noncarrier: self.disease.noncarrier.to_spec(),
                carrier: self.disease.carrier.to_spec(),
            },
            death: self.death.as_ref().map(PiecewiseHazard::to_spec),
        }
    }
}

impl Default for Model {
    fn default() -> Self {
        Self::claus_easton()
    }
}
