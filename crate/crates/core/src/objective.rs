//! The scalar objective an optimizer minimizes, and how it is measured.

use serde::{Deserialize, Serialize};

use crate::error::{QgsaError, Result};
use crate::gradients::GradientVector;
use crate::observables::Observable;
use crate::rng::SimRng;
use crate::shots_cost::Usage;
use crate::statevector::StateVector;

/// How expectation values are obtained.
///
/// `Exact` reads them off the statevector but still charges the ledger for
/// one execution per Pauli term at `nominal_shots`, so noise-free runs can be
/// priced like hardware runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Evaluator {
    Exact { nominal_shots: u64 },
    Sampled { shots: u64 },
}

impl Evaluator {
    pub const DEFAULT_NOMINAL_SHOTS: u64 = 100;

    pub fn exact() -> Self {
        Evaluator::Exact {
            nominal_shots: Self::DEFAULT_NOMINAL_SHOTS,
        }
    }

    pub fn shots(&self) -> u64 {
        match *self {
            Evaluator::Exact { nominal_shots } => nominal_shots,
            Evaluator::Sampled { shots } => shots,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Evaluator::Exact { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Evaluator::Sampled { shots: 0 } => Err(QgsaError::ZeroShots),
            _ => Ok(()),
        }
    }

    /// `<H>` on `state`, with the circuits and shots it cost.
    pub fn estimate(
        &self,
        obs: &Observable,
        state: &StateVector,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)> {
        match *self {
            Evaluator::Exact { nominal_shots } => Ok((
                obs.expval(state)?,
                Usage::circuits(obs.n_terms() as u64, nominal_shots),
            )),
            Evaluator::Sampled { shots } => {
                let (value, executed) = obs.sample_expval(state, shots, rng)?;
                Ok((value, Usage::circuits(executed as u64, shots)))
            }
        }
    }
}

/// A differentiable, measurable function of the circuit parameters.
pub trait Objective {
    fn n_params(&self) -> usize;

    /// Estimate of the objective at `theta`, with its execution cost.
    fn evaluate(&self, theta: &[f64], eval: Evaluator, rng: &mut SimRng) -> Result<(f64, Usage)>;

    /// Exact value, for monitoring only. Never charged to a ledger.
    fn value(&self, theta: &[f64]) -> Result<f64>;

    /// Parameter-shift estimate of one partial derivative.
    fn partial(
        &self,
        theta: &[f64],
        index: usize,
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)>;

    /// Parameter-shift estimate of the full gradient.
    fn gradient(
        &self,
        theta: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(GradientVector, Usage)> {
        let mut values = Vec::with_capacity(self.n_params());
        let mut usage = Usage::ZERO;
        for i in 0..self.n_params() {
            let (v, u) = self.partial(theta, i, eval, rng)?;
            values.push(v);
            usage += u;
        }
        Ok((GradientVector::new(values), usage))
    }

    /// Upper bound on the spectral norm of the Hessian.
    fn smoothness_bound(&self) -> f64;
}
