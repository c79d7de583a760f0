//! Shot budgeting, circuit/shot accounting and cloud pricing.

use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QgsaError, Result};

/// Circuits and shots consumed by one piece of work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub circuits: u64,
    pub shots: u64,
}

impl Usage {
    pub const ZERO: Usage = Usage {
        circuits: 0,
        shots: 0,
    };

    /// `circuits` executions of `shots_each` shots.
    pub fn circuits(circuits: u64, shots_each: u64) -> Self {
        Self {
            circuits,
            shots: circuits * shots_each,
        }
    }
}

impl Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            circuits: self.circuits + rhs.circuits,
            shots: self.shots + rhs.shots,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

/// Why a batch of circuits was run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Estimating the objective at the current point.
    Measure,
    /// Circuits that feed the parameter update (gradient shifts, trial points).
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub label: Purpose,
    pub circuits: u64,
    pub shots: u64,
}

/// Running count of circuits executed and shots fired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLedger {
    circuits: u64,
    shots: u64,
    events: Vec<LedgerEvent>,
}

impl ExecutionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, label: Purpose, usage: Usage) {
        self.circuits += usage.circuits;
        self.shots += usage.shots;
        self.events.push(LedgerEvent {
            label,
            circuits: usage.circuits,
            shots: usage.shots,
        });
    }

    pub fn circuits(&self) -> u64 {
        self.circuits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn total(&self) -> Usage {
        Usage {
            circuits: self.circuits,
            shots: self.shots,
        }
    }

    /// Totals restricted to one purpose.
    pub fn total_for(&self, label: Purpose) -> Usage {
        self.events
            .iter()
            .filter(|e| e.label == label)
            .fold(Usage::ZERO, |acc, e| {
                acc + Usage {
                    circuits: e.circuits,
                    shots: e.shots,
                }
            })
    }

    /// Appends `other`'s events. Associative, so per-run ledgers can be
    /// folded in any grouping.
    pub fn merge(mut self, other: &ExecutionLedger) -> Self {
        for e in &other.events {
            self.record(
                e.label,
                Usage {
                    circuits: e.circuits,
                    shots: e.shots,
                },
            );
        }
        self
    }
}

/// Per-circuit and per-shot tariff in USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingProfile {
    pub name: String,
    pub per_circuit: f64,
    pub per_shot: f64,
}

impl PricingProfile {
    pub fn new(name: impl Into<String>, per_circuit: f64, per_shot: f64) -> Result<Self> {
        if !(per_circuit >= 0.0 && per_shot >= 0.0) {
            return Err(QgsaError::InvalidArgument(
                "prices must be non-negative".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            per_circuit,
            per_shot,
        })
    }

    pub fn cost(&self, usage: Usage) -> f64 {
        usage.circuits as f64 * self.per_circuit + usage.shots as f64 * self.per_shot
    }
}

/// USD cost of everything in `ledger`.
pub fn cost(ledger: &ExecutionLedger, profile: &PricingProfile) -> f64 {
    profile.cost(ledger.total())
}

/// The four published cloud tariffs.
pub fn builtin_profiles() -> Vec<PricingProfile> {
    [
        ("IonQ - Harmony", 0.3, 0.01),
        ("IonQ - Aria", 0.3, 0.03),
        ("OQC - Lucy", 0.3, 0.00035),
        ("Rigetti - Aspen-M", 0.3, 0.00035),
    ]
    .into_iter()
    .map(|(name, per_circuit, per_shot)| PricingProfile {
        name: name.to_string(),
        per_circuit,
        per_shot,
    })
    .collect()
}

pub fn builtin_profile(name: &str) -> Option<PricingProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

/// Reads a JSON array of `{"name", "per_circuit", "per_shot"}` objects.
pub fn load_profiles(path: &Path) -> Result<Vec<PricingProfile>> {
    let text = std::fs::read_to_string(path)?;
    let profiles: Vec<PricingProfile> = serde_json::from_str(&text)
        .map_err(|e| QgsaError::Parse(format!("{}: {e}", path.display())))?;
    for p in &profiles {
        PricingProfile::new(p.name.clone(), p.per_circuit, p.per_shot)?;
    }
    Ok(profiles)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QgsaError::InvalidArgument(format!(
            "confidence parameter delta={delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Hoeffding sample size for averages of outcomes spanning an interval of
/// width `range`: `ceil(range^2 ln(2/delta) / (2 eps^2))`.
pub fn hoeffding_shots(epsilon: f64, delta: f64, range: f64) -> Result<u64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(QgsaError::InvalidArgument(format!(
            "precision epsilon={epsilon} must be positive"
        )));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(QgsaError::InvalidArgument(format!(
            "outcome range {range} must be positive"
        )));
    }
    check_delta(delta)?;
    let bound = range * range * (2.0 / delta).ln() / (2.0 * epsilon * epsilon);
    Ok((bound.ceil() as u64).max(1))
}

/// Shots needed to estimate an expectation to within `epsilon` with
/// confidence `1 - delta`, as `ceil(ln(2/delta) / (2 eps^2))`.
///
/// This is [`hoeffding_shots`] with a unit outcome range. For ±1 outcomes the
/// Hoeffding range is 2 and four times as many shots are required to actually
/// reach the stated confidence; use [`hoeffding_shots`] with `range = 2.0`
/// for that guarantee.
pub fn shots_for_precision(epsilon: f64, delta: f64) -> Result<u64> {
    hoeffding_shots(epsilon, delta, 1.0)
}

/// Shots needed to tell whether a trial point improves on the current value
/// when the two differ by `gap`.
pub fn shots_for_descent(gap: f64, delta: f64) -> Result<u64> {
    if gap == 0.0 || !gap.is_finite() {
        return Err(QgsaError::InvalidArgument(format!(
            "descent gap {gap} must be finite and nonzero"
        )));
    }
    shots_for_precision(gap.abs(), delta)
}
