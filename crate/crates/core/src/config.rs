//! TOML model configuration.
//!
//! Contents, reaction complexes and inflow rates are tables keyed by species
//! name; absent species count as zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crn::{Complex, Reaction, ReactionNetwork};
use crate::error::Error;
use crate::inflow::{InflowDistribution, DEFAULT_TAIL_BOUND};
use crate::kernel::FragmentationKernel;
use crate::model::{CompartmentModel, CompartmentRates};
use crate::population::PopulationState;
use crate::sim::{HitSpec, Observable, Predicate, RunOptions, StopCondition};

pub const DEFAULT_T_MAX: f64 = 100.0;
pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("unknown observable `{0}`")]
    UnknownObservable(String),
}

/// Counts keyed by species name.
pub type Counts = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub chemistry: ChemistryConfig,
    pub compartments: CompartmentsConfig,
    pub inflow: InflowConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemistryConfig {
    pub species: Vec<String>,
    #[serde(default)]
    pub reactions: Vec<ReactionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    #[serde(default)]
    pub source: Counts,
    #[serde(default)]
    pub product: Counts,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentsConfig {
    #[serde(rename = "kappa_I")]
    pub kappa_i: f64,
    #[serde(rename = "kappa_E")]
    pub kappa_e: f64,
    #[serde(rename = "kappa_F")]
    pub kappa_f: f64,
    #[serde(rename = "kappa_C")]
    pub kappa_c: f64,
    pub fragmentation_species: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedContent {
    pub content: Counts,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InflowConfig {
    PointMass {
        #[serde(default)]
        content: Counts,
    },
    Categorical {
        table: Vec<WeightedContent>,
    },
    /// Independent Poisson counts; species without a rate get zero.
    Poisson {
        rates: BTreeMap<String, f64>,
        #[serde(default = "default_tail_bound")]
        tail_bound: f64,
    },
}

fn default_tail_bound() -> f64 {
    DEFAULT_TAIL_BOUND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTableEntry {
    pub parent: Counts,
    pub daughters: Vec<WeightedContent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    BinomialHalf {},
    UniformUnorderedPairs {},
    EnzymeSubstrate {
        p: f64,
        enzyme: String,
        substrate: String,
    },
    Table {
        entries: Vec<KernelTableEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialEntry {
    #[serde(default)]
    pub content: Counts,
    pub count: u64,
}

/// A first-passage observation. `observable` is `compartments`,
/// `total_mass`, `s_hat` or a species name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitConfig {
    pub name: String,
    pub observable: String,
    #[serde(default)]
    pub at_most: Option<u64>,
    #[serde(default)]
    pub at_least: Option<u64>,
    #[serde(default)]
    pub after: f64,
}

/// Missing keys take their defaults; `t_max = inf` runs on the event
/// budget alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_max: f64,
    pub event_budget: u64,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub initial: Vec<InitialEntry>,
    pub hits: Vec<HitConfig>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_max: DEFAULT_T_MAX,
            event_budget: DEFAULT_EVENT_BUDGET,
            grid: Vec::new(),
            seed: 0,
            initial: Vec::new(),
            hits: Vec::new(),
        }
    }
}

fn species_index(species: &[String], name: &str) -> Result<usize, Error> {
    species
        .iter()
        .position(|s| s == name)
        .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
}

/// Content vector in species order.
pub fn content_from_counts(species: &[String], counts: &Counts) -> Result<Complex, Error> {
    let mut v = vec![0; species.len()];
    for (name, &k) in counts {
        v[species_index(species, name)?] = k;
    }
    Ok(Complex(v))
}

/// Counts table with zero entries left out.
pub fn counts_from_content(species: &[String], x: &Complex) -> Counts {
    species
        .iter()
        .zip(x.counts())
        .filter(|(_, &k)| k > 0)
        .map(|(s, &k)| (s.clone(), k))
        .collect()
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    fn species(&self) -> &[String] {
        &self.chemistry.species
    }

    pub fn network(&self) -> Result<ReactionNetwork, ConfigError> {
        let sp = self.species();
        let reactions = self
            .chemistry
            .reactions
            .iter()
            .map(|r| {
                Reaction::new(
                    content_from_counts(sp, &r.source)?,
                    content_from_counts(sp, &r.product)?,
                    r.rate,
                )
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(ReactionNetwork::new(sp.to_vec(), reactions)?)
    }

    pub fn inflow_distribution(&self) -> Result<InflowDistribution, ConfigError> {
        let sp = self.species();
        let d = match &self.inflow {
            InflowConfig::PointMass { content } => {
                InflowDistribution::point_mass(content_from_counts(sp, content)?)
            }
            InflowConfig::Categorical { table } => InflowDistribution::categorical(
                table
                    .iter()
                    .map(|w| Ok((content_from_counts(sp, &w.content)?, w.prob)))
                    .collect::<Result<Vec<_>, Error>>()?,
            )?,
            InflowConfig::Poisson { rates, tail_bound } => {
                let mut v = vec![0.0; sp.len()];
                for (name, &r) in rates {
                    v[species_index(sp, name)?] = r;
                }
                InflowDistribution::poisson_product(v, *tail_bound)?
            }
        };
        Ok(d)
    }

    pub fn fragmentation_kernel(&self) -> Result<FragmentationKernel, ConfigError> {
        let sp = self.species();
        let k = match &self.kernel {
            KernelConfig::BinomialHalf {} => FragmentationKernel::BinomialHalf,
            KernelConfig::UniformUnorderedPairs {} => FragmentationKernel::UniformUnorderedPairs,
            KernelConfig::EnzymeSubstrate {
                p,
                enzyme,
                substrate,
            } => FragmentationKernel::enzyme_substrate(
                *p,
                species_index(sp, enzyme)?,
                species_index(sp, substrate)?,
            )?,
            KernelConfig::Table { entries } => {
                let mut map = BTreeMap::new();
                for e in entries {
                    let daughters = e
                        .daughters
                        .iter()
                        .map(|w| Ok((content_from_counts(sp, &w.content)?, w.prob)))
                        .collect::<Result<Vec<_>, Error>>()?;
                    map.insert(content_from_counts(sp, &e.parent)?, daughters);
                }
                FragmentationKernel::Table { entries: map }
            }
        };
        Ok(k)
    }

    pub fn to_model(&self) -> Result<CompartmentModel, ConfigError> {
        let c = &self.compartments;
        Ok(CompartmentModel::new(
            self.network()?,
            CompartmentRates::new(c.kappa_i, c.kappa_e, c.kappa_f, c.kappa_c),
            species_index(self.species(), &c.fragmentation_species)?,
            self.inflow_distribution()?,
            self.fragmentation_kernel()?,
        )?)
    }

    pub fn initial_state(&self) -> Result<PopulationState, ConfigError> {
        let sp = self.species();
        let pairs = self
            .simulation
            .initial
            .iter()
            .map(|e| Ok((content_from_counts(sp, &e.content)?, e.count)))
            .collect::<Result<Vec<_>, Error>>()?;
        let mut n = PopulationState::from_pairs(pairs)?;
        if n.dim().is_none() {
            n = PopulationState::new();
        }
        Ok(n)
    }

    pub fn stop_condition(&self) -> StopCondition {
        StopCondition {
            t_max: self
                .simulation
                .t_max
                .is_finite()
                .then_some(self.simulation.t_max),
            event_budget: Some(self.simulation.event_budget),
            ..Default::default()
        }
    }

    pub fn observable(&self, name: &str) -> Result<Observable, ConfigError> {
        Ok(match name {
            "compartments" | "C" => Observable::Compartments,
            "total_mass" => Observable::TotalMass,
            "s_hat" | "S_hat" => Observable::SubstrateWithoutEnzyme,
            other => Observable::SpeciesTotal(
                species_index(self.species(), other)
                    .map_err(|_| ConfigError::UnknownObservable(other.to_string()))?,
            ),
        })
    }

    pub fn hit_specs(&self) -> Result<Vec<HitSpec>, ConfigError> {
        self.simulation
            .hits
            .iter()
            .map(|h| {
                let obs = self.observable(&h.observable)?;
                let predicate = match (h.at_most, h.at_least) {
                    (Some(v), None) => Predicate::at_most(obs, v),
                    (None, Some(v)) => Predicate::at_least(obs, v),
                    _ => {
                        return Err(ConfigError::Model(Error::InvalidParameter {
                            name: "hits",
                            reason: format!(
                                "hit `{}` needs exactly one of at_most, at_least",
                                h.name
                            ),
                        }))
                    }
                };
                Ok(HitSpec {
                    name: h.name.clone(),
                    predicate,
                    after: h.after,
                })
            })
            .collect()
    }

    pub fn run_options(&self) -> Result<RunOptions, ConfigError> {
        Ok(RunOptions {
            grid: self.simulation.grid.clone(),
            hits: self.hit_specs()?,
            record_events: false,
        })
    }
}

/// Config for the one-species model `0 ⇄ S` with empty inflow and the
/// fair-coin kernel.
pub fn model4_config(
    kappa_b: f64,
    kappa_d: f64,
    kappa_i: f64,
    kappa_e: f64,
    kappa_f: f64,
    kappa_c: f64,
) -> ModelConfig {
    let s = |k: u64| Counts::from([("S".to_string(), k)]);
    ModelConfig {
        chemistry: ChemistryConfig {
            species: vec!["S".into()],
            reactions: vec![
                ReactionConfig {
                    source: Counts::new(),
                    product: s(1),
                    rate: kappa_b,
                },
                ReactionConfig {
                    source: s(1),
                    product: Counts::new(),
                    rate: kappa_d,
                },
            ],
        },
        compartments: CompartmentsConfig {
            kappa_i,
            kappa_e,
            kappa_f,
            kappa_c,
            fragmentation_species: "S".into(),
        },
        inflow: InflowConfig::PointMass {
            content: Counts::new(),
        },
        kernel: KernelConfig::BinomialHalf {},
        simulation: SimulationConfig::default(),
    }
}

/// Config for a plain network: every compartment constant is zero.
pub fn chemistry_only_config(network: &ReactionNetwork) -> ModelConfig {
    let sp = network.species().to_vec();
    ModelConfig {
        chemistry: ChemistryConfig {
            reactions: network
                .reactions()
                .iter()
                .map(|r| ReactionConfig {
                    source: counts_from_content(&sp, r.source()),
                    product: counts_from_content(&sp, r.product()),
                    rate: r.rate_constant(),
                })
                .collect(),
            species: sp.clone(),
        },
        compartments: CompartmentsConfig {
            kappa_i: 0.0,
            kappa_e: 0.0,
            kappa_f: 0.0,
            kappa_c: 0.0,
            fragmentation_species: sp[0].clone(),
        },
        inflow: InflowConfig::PointMass {
            content: Counts::new(),
        },
        kernel: KernelConfig::BinomialHalf {},
        simulation: SimulationConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model4Params;

    const ALL_ONES: &str = r#"
[chemistry]
species = ["S"]

[[chemistry.reactions]]
product = { S = 1 }
rate = 1.0

[[chemistry.reactions]]
source = { S = 1 }
rate = 1.0

[compartments]
kappa_I = 1.0
kappa_E = 1.0
kappa_F = 1.0
kappa_C = 1.0
fragmentation_species = "S"

[inflow]
kind = "point_mass"

[kernel]
kind = "binomial_half"
"#;

    #[test]
    fn parses_all_ones_model() {
        let cfg = ModelConfig::from_toml_str(ALL_ONES).unwrap();
        let m = cfg.to_model().unwrap();
        assert_eq!(m, Model4Params::uniform(1.0).build_default().unwrap());
        assert_eq!(cfg.simulation, SimulationConfig::default());
        assert!(cfg.initial_state().unwrap().is_empty());
    }

    #[test]
    fn misspelled_key_is_named() {
        let bad = ALL_ONES.replace("kappa_F", "kapa_F");
        let err = ModelConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("kapa_F"), "{err}");
    }

    #[test]
    fn unknown_key_in_tagged_section() {
        let bad = ALL_ONES.replace(
            "kind = \"binomial_half\"",
            "kind = \"binomial_half\"\np = 0.3",
        );
        let err = ModelConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains('p'), "{err}");
    }

    #[test]
    fn unknown_species_in_reaction() {
        let bad = ALL_ONES.replace("product = { S = 1 }", "product = { T = 1 }");
        let err = ModelConfig::from_toml_str(&bad)
            .unwrap()
            .to_model()
            .unwrap_err();
        assert!(err.to_string().contains('T'));
    }

    #[test]
    fn model4_helper_round_trips() {
        let cfg = model4_config(1.0, 1.0, 1.0, 1.0, 1.9, 0.0);
        let text = cfg.to_toml_string().unwrap();
        let back = ModelConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_model().unwrap(), cfg.to_model().unwrap());
    }

    #[test]
    fn poisson_and_enzyme_kernel() {
        let text = r#"
[chemistry]
species = ["E", "S"]
[[chemistry.reactions]]
source = { E = 1, S = 2 }
product = { E = 1, S = 3 }
rate = 2.0
[compartments]
kappa_I = 1.0
kappa_E = 0.0
kappa_F = 1.0
kappa_C = 0.0
fragmentation_species = "S"
[inflow]
kind = "poisson"
rates = { S = 5.0 }
[kernel]
kind = "enzyme_substrate"
p = 0.4
enzyme = "E"
substrate = "S"
[simulation]
t_max = 1.0
initial = [{ content = { E = 1, S = 3 }, count = 2 }]
hits = [{ name = "few", observable = "s_hat", at_most = 0 }]
"#;
        let cfg = ModelConfig::from_toml_str(text).unwrap();
        let m = cfg.to_model().unwrap();
        assert_eq!(m.enzyme_layout(), Some((0, 1)));
        assert!((m.inflow().mean_mass() - 5.0).abs() < 1e-9);
        assert_eq!(cfg.initial_state().unwrap().total_compartments(), 2);
        assert_eq!(
            cfg.stop_condition().event_budget,
            Some(DEFAULT_EVENT_BUDGET)
        );
        assert_eq!(
            cfg.hit_specs().unwrap()[0].predicate.observable,
            Observable::SubstrateWithoutEnzyme
        );
    }
}
