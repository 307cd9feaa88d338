//! Scenario file loading: a single JSON document with sections
//! {registry, networks, terminal, mobility, applications, providers,
//! correlations, config, policies, constraints}, validated into a
//! [`ScenarioBundle`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::{
    ContextDomain, HandoffConfiguration, HandoffConstraint, HandoffPolicy, ToleranceRange, VarId,
    VariableRegistry,
};
use crate::environment::{
    ApplicationSpec, MobilityModel, NetworkSpec, ProviderSpec, ScenarioSpec, TerminalState,
};
use crate::error::LoadError;
use crate::objective::{CorrelationSpec, FeatureId, WEIGHT_SUM_TOLERANCE};
use crate::pipeline::ExecutionModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything one run needs, validated and cross-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub scenario: ScenarioSpec,
    pub registry: VariableRegistry,
    pub correlations: Vec<CorrelationSpec>,
    pub config: HandoffConfiguration,
    pub execution: ExecutionModel,
    pub policies: Vec<HandoffPolicy>,
    pub constraints: Vec<HandoffConstraint>,
    pub user_feature_weights: BTreeMap<FeatureId, f64>,
    pub provider_feature_weights: BTreeMap<FeatureId, f64>,
}

/// On-disk shape of the scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    pub registry: RegistrySection,
    pub networks: Vec<NetworkSpec>,
    pub terminal: TerminalState,
    #[serde(default = "default_mobility")]
    pub mobility: MobilityModel,
    #[serde(default)]
    pub applications: Vec<ApplicationSpec>,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderSpec>,
    pub correlations: Vec<CorrelationSpec>,
    pub config: ConfigSection,
    #[serde(default)]
    pub policies: Vec<HandoffPolicy>,
    #[serde(default)]
    pub constraints: Vec<HandoffConstraint>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_mobility() -> MobilityModel {
    MobilityModel::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RegistrySection {
    /// Tolerance ranges per variable, raw units.
    #[serde(default)]
    pub ranges: BTreeMap<String, RangeEntry>,
    /// Scenario-specific variables beyond the built-in list.
    #[serde(default)]
    pub custom: Vec<CustomVariable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEntry {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomVariable {
    pub name: String,
    pub domain: ContextDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSection {
    #[serde(flatten)]
    pub handoff: HandoffConfiguration,
    pub execution: ExecutionModel,
    /// Stakeholder weight profiles for the preference-mix sweep; both
    /// default to the scalarization weights.
    #[serde(default)]
    pub user_feature_weights: Option<BTreeMap<FeatureId, f64>>,
    #[serde(default)]
    pub provider_feature_weights: Option<BTreeMap<FeatureId, f64>>,
}

const REQUIRED_SECTIONS: &[&str] = &[
    "duration",
    "dt",
    "registry",
    "networks",
    "terminal",
    "correlations",
    "config",
];

/// Variables the environment can observe for every candidate without
/// network-specific extras.
fn standard_observables() -> Vec<VarId> {
    ["BL", "Vel", "ECR", "RSS", "Dist", "NL", "NBW", "ND", "price"]
        .iter()
        .map(|s| VarId::new(s))
        .collect()
}

/// Load and fully validate a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioBundle, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text, &path.display().to_string())
}

pub fn parse_scenario_str(text: &str, path: &str) -> Result<ScenarioBundle, LoadError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|source| LoadError::Json {
            path: path.to_string(),
            source,
        })?;
    if let Some(obj) = value.as_object() {
        for section in REQUIRED_SECTIONS {
            if !obj.contains_key(*section) {
                return Err(LoadError::MissingSection(section.to_string()));
            }
        }
    }
    let file: ScenarioFile =
        serde_json::from_value(value).map_err(|source| LoadError::Json {
            path: path.to_string(),
            source,
        })?;
    file.into_bundle()
}

impl ScenarioFile {
    pub fn into_bundle(self) -> Result<ScenarioBundle, LoadError> {
        let mut registry = VariableRegistry::with_builtins();
        for custom in &self.registry.custom {
            registry
                .register(VarId::new(&custom.name), custom.domain)
                .map_err(|e| LoadError::Invalid(e.to_string()))?;
        }
        for (name, entry) in &self.registry.ranges {
            let id = VarId::new(name);
            if !registry.contains(&id) {
                return Err(LoadError::UnknownVariable {
                    id: name.clone(),
                    location: "registry.ranges".to_string(),
                });
            }
            let range = ToleranceRange::new(entry.lower, entry.upper).map_err(|_| {
                LoadError::BadRange {
                    id: name.clone(),
                    lower: entry.lower,
                    upper: entry.upper,
                }
            })?;
            registry.set_range(&id, range).expect("id checked above");
        }

        // every variable the objective engine touches needs a range and must
        // be observable on every candidate
        let standard = standard_observables();
        for spec in &self.correlations {
            let location = format!("correlations.{}", spec.feature.name());
            let mut weight_sum = 0.0;
            for wv in spec.positives.iter().chain(&spec.negatives) {
                weight_sum += wv.weight;
                let id = &wv.variable;
                if !registry.contains(id) {
                    return Err(LoadError::UnknownVariable {
                        id: id.to_string(),
                        location: location.clone(),
                    });
                }
                if registry.range(id).is_none() {
                    return Err(LoadError::Invalid(format!(
                        "{location}: variable {id} has no tolerance range in registry.ranges"
                    )));
                }
                if !standard.contains(id) {
                    for net in &self.networks {
                        if !net.extra.contains_key(id) {
                            return Err(LoadError::Invalid(format!(
                                "{location}: variable {id} is not observable on network {} \
                                 (add it to the network's extra map)",
                                net.id
                            )));
                        }
                    }
                }
            }
            if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(LoadError::WeightSum {
                    location,
                    sum: weight_sum,
                });
            }
            spec.validate().map_err(|e| LoadError::Invalid(e.to_string()))?;
        }

        let check_weights = |weights: &BTreeMap<FeatureId, f64>,
                             location: &str|
         -> Result<(), LoadError> {
            let sum: f64 = weights.values().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(LoadError::WeightSum {
                    location: location.to_string(),
                    sum,
                });
            }
            Ok(())
        };
        check_weights(&self.config.handoff.feature_weights, "config.feature_weights")?;
        let user_weights = self
            .config
            .user_feature_weights
            .clone()
            .unwrap_or_else(|| self.config.handoff.feature_weights.clone());
        let provider_weights = self
            .config
            .provider_feature_weights
            .clone()
            .unwrap_or_else(|| self.config.handoff.feature_weights.clone());
        check_weights(&user_weights, "config.user_feature_weights")?;
        check_weights(&provider_weights, "config.provider_feature_weights")?;

        for (var, _) in &self.config.handoff.thresholds {
            if !registry.contains(var) {
                return Err(LoadError::UnknownVariable {
                    id: var.to_string(),
                    location: "config.thresholds".to_string(),
                });
            }
        }
        for policy in &self.policies {
            for rule in &policy.rules {
                if let crate::context::Condition::Threshold { variable, .. } = &rule.when {
                    if !registry.contains(variable) {
                        return Err(LoadError::UnknownVariable {
                            id: variable.to_string(),
                            location: "policies".to_string(),
                        });
                    }
                }
            }
        }
        for c in &self.constraints {
            if !registry.contains(&c.variable) {
                return Err(LoadError::UnknownVariable {
                    id: c.variable.to_string(),
                    location: "constraints".to_string(),
                });
            }
        }
        for app in &self.applications {
            for c in &app.constraints {
                if !registry.contains(&c.variable) {
                    return Err(LoadError::UnknownVariable {
                        id: c.variable.to_string(),
                        location: "applications.constraints".to_string(),
                    });
                }
            }
        }

        let mut config = self.config.handoff;
        config.seed = self.seed;

        let scenario = ScenarioSpec {
            duration: self.duration,
            dt: self.dt,
            networks: self.networks,
            terminal: self.terminal,
            mobility: self.mobility,
            applications: self.applications,
            providers: self.providers,
            seed: self.seed,
        };
        scenario
            .validate()
            .map_err(|e| LoadError::Invalid(e.to_string()))?;

        Ok(ScenarioBundle {
            scenario,
            registry,
            correlations: self.correlations,
            config,
            execution: self.config.execution,
            policies: self.policies,
            constraints: self.constraints,
            user_feature_weights: user_weights,
            provider_feature_weights: provider_weights,
        })
    }
}

impl ScenarioBundle {
    /// Reconstruct the on-disk document (round-trips through
    /// [`ScenarioFile::into_bundle`]).
    pub fn to_file(&self) -> ScenarioFile {
        let builtin: BTreeMap<VarId, ContextDomain> =
            crate::context::builtin_variables().into_iter().collect();
        let custom = self
            .registry
            .ids()
            .filter(|id| !builtin.contains_key(*id))
            .map(|id| CustomVariable {
                name: id.to_string(),
                domain: self.registry.domain(id).expect("registered"),
            })
            .collect();
        let ranges = self
            .registry
            .ranged_ids()
            .map(|id| {
                let r = self.registry.range(id).expect("ranged");
                (
                    id.to_string(),
                    RangeEntry {
                        lower: r.lower,
                        upper: r.upper,
                    },
                )
            })
            .collect();
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            duration: self.scenario.duration,
            dt: self.scenario.dt,
            seed: self.scenario.seed,
            registry: RegistrySection { ranges, custom },
            networks: self.scenario.networks.clone(),
            terminal: self.scenario.terminal.clone(),
            mobility: self.scenario.mobility.clone(),
            applications: self.scenario.applications.clone(),
            providers: self.scenario.providers.clone(),
            correlations: self.correlations.clone(),
            config: ConfigSection {
                handoff: self.config.clone(),
                execution: self.execution.clone(),
                user_feature_weights: Some(self.user_feature_weights.clone()),
                provider_feature_weights: Some(self.provider_feature_weights.clone()),
            },
            policies: self.policies.clone(),
            constraints: self.constraints.clone(),
        }
    }
}
