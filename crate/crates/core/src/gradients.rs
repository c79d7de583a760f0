//! Parameter-shift gradients and the finite-difference oracle.

use std::f64::consts::FRAC_PI_2;

use crate::error::{QgsaError, Result};
use crate::objective::{Evaluator, Objective};
use crate::observables::Observable;
use crate::rng::SimRng;
use crate::shots_cost::Usage;
use crate::statevector::{ParamCircuit, StateVector};

/// `d<H>/dtheta_i` for every slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            values: vec![0.0; k],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

fn check_index(circuit: &ParamCircuit, index: usize) -> Result<()> {
    if index >= circuit.n_params() {
        return Err(QgsaError::ParamIndex {
            index,
            k: circuit.n_params(),
        });
    }
    Ok(())
}

/// Parameter-shift partial derivative starting from `initial` instead of
/// `|0...0>`. Each gate bound to the slot is shifted by `±pi/2` on its own
/// and the contributions are summed, which keeps the rule exact when a slot
/// drives several rotations.
pub fn psr_partial_from(
    initial: &StateVector,
    circuit: &ParamCircuit,
    obs: &Observable,
    theta: &[f64],
    index: usize,
    eval: Evaluator,
    rng: &mut SimRng,
) -> Result<(f64, Usage)> {
    check_index(circuit, index)?;
    let mut value = 0.0;
    let mut usage = Usage::ZERO;
    for gate in circuit.slot_gates(index) {
        let plus = circuit.run_from_shifted(initial, theta, Some((gate, FRAC_PI_2)))?;
        let minus = circuit.run_from_shifted(initial, theta, Some((gate, -FRAC_PI_2)))?;
        let (mu_plus, u_plus) = eval.estimate(obs, &plus, rng)?;
        let (mu_minus, u_minus) = eval.estimate(obs, &minus, rng)?;
        value += (mu_plus - mu_minus) / 2.0;
        usage += u_plus + u_minus;
    }
    Ok((value, usage))
}

/// `(mu(theta_i + pi/2) - mu(theta_i - pi/2)) / 2`.
pub fn psr_partial(
    circuit: &ParamCircuit,
    obs: &Observable,
    theta: &[f64],
    index: usize,
    eval: Evaluator,
    rng: &mut SimRng,
) -> Result<(f64, Usage)> {
    let zero = StateVector::zero(circuit.n_qubits())?;
    psr_partial_from(&zero, circuit, obs, theta, index, eval, rng)
}

/// Full parameter-shift gradient: `2k` circuits per observable term.
pub fn psr_gradient(
    circuit: &ParamCircuit,
    obs: &Observable,
    theta: &[f64],
    eval: Evaluator,
    rng: &mut SimRng,
) -> Result<(GradientVector, Usage)> {
    let zero = StateVector::zero(circuit.n_qubits())?;
    let mut values = Vec::with_capacity(circuit.n_params());
    let mut usage = Usage::ZERO;
    for i in 0..circuit.n_params() {
        let (v, u) = psr_partial_from(&zero, circuit, obs, theta, i, eval, rng)?;
        values.push(v);
        usage += u;
    }
    Ok((GradientVector::new(values), usage))
}

/// Central finite differences on exact expectation values.
pub fn fd_gradient(
    circuit: &ParamCircuit,
    obs: &Observable,
    theta: &[f64],
    h: f64,
) -> Result<GradientVector> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(QgsaError::InvalidArgument(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    if theta.len() != circuit.n_params() {
        return Err(QgsaError::LengthMismatch {
            expected: circuit.n_params(),
            actual: theta.len(),
        });
    }
    let zero = StateVector::zero(circuit.n_qubits())?;
    let mu = |t: &[f64]| -> Result<f64> { obs.expval(&circuit.run_from(&zero, t)?) };
    let mut shifted = theta.to_vec();
    let mut values = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        shifted[i] = theta[i] + h;
        let up = mu(&shifted)?;
        shifted[i] = theta[i] - h;
        let down = mu(&shifted)?;
        shifted[i] = theta[i];
        values.push((up - down) / (2.0 * h));
    }
    Ok(GradientVector::new(values))
}

/// `k * sum_i |c_i|`.
///
/// Every second derivative of a Pauli-rotation expectation is itself a
/// combination of shifted expectations bounded by `sum_i |c_i|`, so the
/// Hessian's spectral norm is at most `k` times that.
pub fn default_lipschitz(k: usize, obs: &Observable) -> f64 {
    k.max(1) as f64 * obs.abs_coefficient_sum()
}

/// `<psi(theta)|H|psi(theta)>` as an [`Objective`].
#[derive(Debug, Clone)]
pub struct ExpectationObjective {
    circuit: ParamCircuit,
    obs: Observable,
    zero: StateVector,
}

impl ExpectationObjective {
    pub fn new(circuit: ParamCircuit, obs: Observable) -> Result<Self> {
        if circuit.n_qubits() != obs.n_qubits() {
            return Err(QgsaError::LengthMismatch {
                expected: circuit.n_qubits(),
                actual: obs.n_qubits(),
            });
        }
        let zero = StateVector::zero(circuit.n_qubits())?;
        Ok(Self { circuit, obs, zero })
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }
}

impl Objective for ExpectationObjective {
    fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn evaluate(&self, theta: &[f64], eval: Evaluator, rng: &mut SimRng) -> Result<(f64, Usage)> {
        let state = self.circuit.run_from(&self.zero, theta)?;
        eval.estimate(&self.obs, &state, rng)
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.obs.expval(&self.circuit.run_from(&self.zero, theta)?)
    }

    fn partial(
        &self,
        theta: &[f64],
        index: usize,
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)> {
        psr_partial_from(
            &self.zero,
            &self.circuit,
            &self.obs,
            theta,
            index,
            eval,
            rng,
        )
    }

    fn smoothness_bound(&self) -> f64 {
        default_lipschitz(self.circuit.n_params(), &self.obs)
    }
}
