//! Run configuration files and the problems they describe.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use qgsa_core::optimizers::{Evaluators, Method, OptimizerConfig, Termination};
use qgsa_core::qml::{
    build_model, load_feature_csv, load_iris, synth_crack, Dataset, Loss, Reduction, RiskObjective,
};
use qgsa_core::shots_cost::{
    builtin_profiles, load_profiles, shots_for_descent, shots_for_precision, PricingProfile,
};
use qgsa_core::Evaluator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Iris {
        path: PathBuf,
        #[serde(default = "default_iris_classes")]
        classes: (String, String),
    },
    /// Numeric feature columns followed by a label column.
    Features { path: PathBuf },
    Synthetic {
        n_per_class: usize,
        features: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_iris_classes() -> (String, String) {
    ("setosa".into(), "versicolor".into())
}

impl DatasetSource {
    /// Short identifier used to group runs that share a dataset.
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Iris { classes, .. } => format!("iris-{}-{}", classes.0, classes.1),
            DatasetSource::Features { path } => format!(
                "features-{}",
                path.file_stem()
                    .map_or("unnamed".into(), |s| s.to_string_lossy())
            ),
            DatasetSource::Synthetic {
                n_per_class,
                features,
                seed,
            } => format!("synthetic-d{features}-n{n_per_class}-s{seed}"),
        }
    }

    /// Loads the data, resolving relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let data = match self {
            DatasetSource::Iris { path, classes } => {
                let path = resolve(path);
                load_iris(&path, (&classes.0, &classes.1))
                    .with_context(|| format!("loading {}", path.display()))?
            }
            DatasetSource::Features { path } => {
                let path = resolve(path);
                load_feature_csv(&path).with_context(|| format!("loading {}", path.display()))?
            }
            DatasetSource::Synthetic {
                n_per_class,
                features,
                seed,
            } => synth_crack(*n_per_class, *features, *seed)?,
        };
        Ok(data)
    }
}

/// How the optimizer's objective evaluations are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvaluatorChoice {
    /// Exact expectations, charged at `nominal_shots` per circuit.
    Exact {
        #[serde(default = "default_nominal_shots")]
        nominal_shots: u64,
    },
    Sampled {
        n_mu: u64,
        n_g: u64,
    },
    /// Shot counts from the Hoeffding calculators: `n_mu` for precision
    /// `epsilon`, `n_g` for resolving a descent gap of `epsilon`.
    SampledAuto {
        epsilon: f64,
        delta: f64,
    },
}

fn default_nominal_shots() -> u64 {
    Evaluator::DEFAULT_NOMINAL_SHOTS
}

impl Default for EvaluatorChoice {
    fn default() -> Self {
        EvaluatorChoice::Exact {
            nominal_shots: default_nominal_shots(),
        }
    }
}

impl EvaluatorChoice {
    pub fn resolve(&self) -> Result<Evaluators> {
        Ok(match *self {
            EvaluatorChoice::Exact { nominal_shots } => {
                let e = Evaluator::Exact { nominal_shots };
                Evaluators { mu: e, update: e }
            }
            EvaluatorChoice::Sampled { n_mu, n_g } => Evaluators {
                mu: Evaluator::Sampled { shots: n_mu },
                update: Evaluator::Sampled { shots: n_g },
            },
            EvaluatorChoice::SampledAuto { epsilon, delta } => Evaluators {
                mu: Evaluator::Sampled {
                    shots: shots_for_precision(epsilon, delta)?,
                },
                update: Evaluator::Sampled {
                    shots: shots_for_descent(epsilon, delta)?,
                },
            },
        })
    }
}

/// One training experiment: a problem, an optimizer and a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default = "default_layers")]
    pub layers: usize,
    pub loss: Loss,
    #[serde(default)]
    pub risk: Reduction,
    pub optimizer: Method,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    /// Seed for the initial parameters shared by every run.
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub evaluator: EvaluatorChoice,
    #[serde(default)]
    pub termination: Termination,
    /// Name of the profile used for the trace's cost column.
    #[serde(default = "default_pricing")]
    pub pricing: String,
    /// Extra profiles, relative to the config file.
    #[serde(default)]
    pub pricing_file: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
}

fn default_layers() -> usize {
    3
}

fn default_alpha() -> f64 {
    0.1
}

fn default_pricing() -> String {
    "IonQ - Harmony".into()
}

fn profile_key(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure!(sorted.len() == self.seeds.len(), "seeds must be distinct");
        ensure!(self.layers > 0, "layers must be positive");
        ensure!(
            self.name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            "run name '{}' may only contain letters, digits, '-', '_' and '.'",
            self.name
        );
        self.optimizer_config()?.validate()?;
        self.evaluator.resolve()?;
        Ok(())
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            method: self.optimizer,
            alpha: self.alpha,
            iterations: self.iterations,
            evaluators: self.evaluator.resolve()?,
            termination: self.termination,
            monitor_gradient: false,
        })
    }

    /// Builtin profiles followed by those in `pricing_file`.
    pub fn profiles(&self, base: &Path) -> Result<Vec<PricingProfile>> {
        let mut profiles = builtin_profiles();
        if let Some(file) = &self.pricing_file {
            let path = if file.is_absolute() {
                file.clone()
            } else {
                base.join(file)
            };
            profiles.extend(
                load_profiles(&path).with_context(|| format!("loading {}", path.display()))?,
            );
        }
        Ok(profiles)
    }

    /// The profile named by `pricing`, matched ignoring case and punctuation.
    pub fn selected_profile(&self, profiles: &[PricingProfile]) -> Result<PricingProfile> {
        let key = profile_key(&self.pricing);
        match profiles.iter().rev().find(|p| profile_key(&p.name) == key) {
            Some(p) => Ok(p.clone()),
            None => bail!(
                "unknown pricing profile '{}'; available: {}",
                self.pricing,
                profiles
                    .iter()
                    .map(|p| p.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }

    pub fn objective(&self, data: &Dataset) -> Result<RiskObjective> {
        let model = build_model(data.n_features(), self.layers)?;
        Ok(RiskObjective::new(model, data, self.loss, self.risk)?)
    }
}
