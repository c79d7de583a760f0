//! Dense pure-state simulation of parameterized circuits.
//!
//! Amplitudes are stored with qubit 0 as the most significant bit of the
//! basis index, so on two qubits `|q0 q1>` maps to index `2*q0 + q1`.
//!
//! Rotations use the half-angle convention `R_P(theta) = exp(-i theta P / 2)`.
//! Under this convention a single rotation contributes `cos(theta)`-type
//! dependence to an expectation value and the `pi/2` parameter shift is exact.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QgsaError, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Pure state of an `n_qubits` register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QgsaError::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes. The vector must have length
    /// `2^n` and unit norm (within 1e-9).
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QgsaError::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QgsaError::QubitCount(n_qubits));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(QgsaError::InvalidArgument(format!(
                "state is not normalized (squared norm {norm})"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let cmask = self.mask(control);
        let tmask = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// Applies one gate in place. `angle` is the bound rotation angle for
    /// parameterized gates and is ignored otherwise.
    fn apply(&mut self, gate: &Gate, angle: f64) {
        match *gate {
            Gate::H { target } => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.apply_single(target, [[h, h], [h, -h]]);
            }
            Gate::Rx { target, .. } => self.apply_single(target, rx_matrix(angle)),
            Gate::Ry { target, .. } => self.apply_single(target, ry_matrix(angle)),
            Gate::Rz { target, .. } => self.apply_single(target, rz_matrix(angle)),
            Gate::RzConst { target, angle } => self.apply_single(target, rz_matrix(angle)),
            Gate::Cx { control, target } => self.apply_cx(control, target),
        }
    }
}

fn rx_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let mis = Complex64::new(0.0, -s);
    [[c, mis], [mis, c]]
}

fn ry_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn rz_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

/// `|0...0>` on `n_qubits` qubits.
pub fn init_zero(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Gate set of the simulator. Parameterized rotations refer to a slot of the
/// circuit's parameter vector; several gates may share one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H {
        target: usize,
    },
    Rx {
        target: usize,
        slot: usize,
    },
    Ry {
        target: usize,
        slot: usize,
    },
    Rz {
        target: usize,
        slot: usize,
    },
    /// Fixed-angle Z rotation, used for data encoding.
    RzConst {
        target: usize,
        angle: f64,
    },
    Cx {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn slot(&self) -> Option<usize> {
        match *self {
            Gate::Rx { slot, .. } | Gate::Ry { slot, .. } | Gate::Rz { slot, .. } => Some(slot),
            _ => None,
        }
    }

    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H { target }
            | Gate::Rx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::RzConst { target, .. } => (target, None),
            Gate::Cx { control, target } => (control, Some(target)),
        }
    }
}

/// Ordered gate list over `n_qubits` qubits with `n_params` parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl ParamCircuit {
    /// Validates qubit indices and requires the referenced slots to be
    /// exactly `0..k` for some `k`.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QgsaError::QubitCount(n_qubits));
        }
        for gate in &gates {
            let (a, b) = gate.qubits();
            for q in std::iter::once(a).chain(b) {
                if q >= n_qubits {
                    return Err(QgsaError::QubitIndex { index: q, n_qubits });
                }
            }
            if Some(a) == b {
                return Err(QgsaError::SameControlTarget(a));
            }
        }
        let n_params = gates
            .iter()
            .filter_map(Gate::slot)
            .max()
            .map_or(0, |m| m + 1);
        let mut used = vec![false; n_params];
        for slot in gates.iter().filter_map(Gate::slot) {
            used[slot] = true;
        }
        if let Some(unused) = used.iter().position(|u| !u) {
            return Err(QgsaError::UnusedSlot(unused));
        }
        Ok(Self {
            n_qubits,
            gates,
            n_params,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Indices of the gates bound to `slot`.
    pub fn slot_gates(&self, slot: usize) -> impl Iterator<Item = usize> + '_ {
        self.gates
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.slot() == Some(slot))
            .map(|(i, _)| i)
    }

    /// Runs the circuit on `initial`, adding `shift.1` to the angle of the
    /// gate at index `shift.0` only. This is the primitive behind the
    /// parameter-shift rule for slots shared by several gates.
    pub fn run_from_shifted(
        &self,
        initial: &StateVector,
        theta: &[f64],
        shift: Option<(usize, f64)>,
    ) -> Result<StateVector> {
        if theta.len() != self.n_params {
            return Err(QgsaError::LengthMismatch {
                expected: self.n_params,
                actual: theta.len(),
            });
        }
        if initial.n_qubits != self.n_qubits {
            return Err(QgsaError::LengthMismatch {
                expected: self.n_qubits,
                actual: initial.n_qubits,
            });
        }
        let mut state = initial.clone();
        for (idx, gate) in self.gates.iter().enumerate() {
            let mut angle = gate.slot().map_or(0.0, |s| theta[s]);
            if let Some((at, offset)) = shift {
                if at == idx {
                    angle += offset;
                }
            }
            state.apply(gate, angle);
        }
        Ok(state)
    }

    pub fn run_from(&self, initial: &StateVector, theta: &[f64]) -> Result<StateVector> {
        self.run_from_shifted(initial, theta, None)
    }
}

/// `U(theta)|0...0>`.
pub fn run_circuit(circuit: &ParamCircuit, theta: &[f64]) -> Result<StateVector> {
    circuit.run_from(&StateVector::zero(circuit.n_qubits)?, theta)
}

/// Random circuit on `n_qubits` with `n_params` slots, each bound to one
/// rotation about a random axis, plus `shared` further rotations that reuse
/// already-bound slots. Hadamards and CNOTs are interleaved at random.
pub fn random_circuit<R: Rng + ?Sized>(
    n_qubits: usize,
    n_params: usize,
    shared: usize,
    rng: &mut R,
) -> Result<ParamCircuit> {
    if shared > 0 && n_params == 0 {
        return Err(QgsaError::InvalidArgument(
            "shared rotations need at least one slot".into(),
        ));
    }
    let mut slots: Vec<usize> = (0..n_params).collect();
    slots.extend((0..shared).map(|_| rng.random_range(0..n_params)));
    // shuffle so shared occurrences land anywhere in the circuit
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    let mut gates: Vec<Gate> = (0..n_qubits).map(|target| Gate::H { target }).collect();
    for slot in slots {
        let target = rng.random_range(0..n_qubits);
        gates.push(match rng.random_range(0..3) {
            0 => Gate::Rx { target, slot },
            1 => Gate::Ry { target, slot },
            _ => Gate::Rz { target, slot },
        });
        if n_qubits > 1 && rng.random_bool(0.5) {
            let control = rng.random_range(0..n_qubits);
            let target = (control + rng.random_range(1..n_qubits)) % n_qubits;
            gates.push(Gate::Cx { control, target });
        }
        if rng.random_bool(0.2) {
            gates.push(Gate::H {
                target: rng.random_range(0..n_qubits),
            });
        }
    }
    ParamCircuit::new(n_qubits, gates)
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl TryFrom<char> for Pauli {
    type Error = QgsaError;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(QgsaError::InvalidPauli(other)),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// Tensor product of Paulis, letter `q` acting on qubit `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self(letters)
    }

    /// `Z` on `qubit`, identity elsewhere.
    pub fn single_z(n_qubits: usize, qubit: usize) -> Self {
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = Pauli::Z;
        Self(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }
}

impl FromStr for PauliString {
    type Err = QgsaError;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(Pauli::try_from)
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(QgsaError::Parse("empty Pauli string".into()));
        }
        Ok(Self(letters))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Exact `<psi|P|psi>`.
pub fn expval_pauli(state: &StateVector, pauli: &PauliString) -> Result<f64> {
    let n = state.n_qubits;
    if pauli.len() != n {
        return Err(QgsaError::LengthMismatch {
            expected: n,
            actual: pauli.len(),
        });
    }
    // P|b> = i^{#Y} (-1)^{|b & zy|} |b ^ xy>
    let mut flip = 0usize;
    let mut phase_mask = 0usize;
    let mut n_y = 0u32;
    for (q, p) in pauli.letters().iter().enumerate() {
        let bit = 1usize << (n - 1 - q);
        match p {
            Pauli::I => {}
            Pauli::X => flip |= bit,
            Pauli::Y => {
                flip |= bit;
                phase_mask |= bit;
                n_y += 1;
            }
            Pauli::Z => phase_mask |= bit,
        }
    }
    let amps = &state.amplitudes;
    let mut acc = ZERO;
    for (b, &a) in amps.iter().enumerate() {
        let sign = if (b & phase_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += amps[b ^ flip].conj() * a * sign;
    }
    let global = Complex64::i().powu(n_y);
    Ok((acc * global).re.clamp(-1.0, 1.0))
}

/// Euclidean norm of the amplitude difference.
pub fn state_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(QgsaError::LengthMismatch {
            expected: a.amplitudes.len(),
            actual: b.amplitudes.len(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Shot-sampled estimate of `<P>`: the mean of `shots` outcomes in `{+1, -1}`
/// drawn with `P(+1) = (1 + <P>)/2`.
pub fn sample_expval<R: Rng + ?Sized>(
    state: &StateVector,
    pauli: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(QgsaError::ZeroShots);
    }
    let exact = expval_pauli(state, pauli)?;
    Ok(sample_from_mean(exact, shots, rng))
}

/// Binomial ±1 sampler for a known mean in `[-1, 1]`. `shots` must be
/// nonzero.
pub(crate) fn sample_from_mean<R: Rng + ?Sized>(mean: f64, shots: u64, rng: &mut R) -> f64 {
    let p = ((1.0 + mean) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(shots, p)
        .expect("p is clamped to [0, 1]")
        .sample(rng);
    2.0 * plus as f64 / shots as f64 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_rx() -> ParamCircuit {
        ParamCircuit::new(1, vec![Gate::Rx { target: 0, slot: 0 }]).unwrap()
    }

    fn assert_state(state: &StateVector, expected: &[Complex64]) {
        assert_eq!(state.amplitudes().len(), expected.len());
        for (a, e) in state.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, e.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, e.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_state() {
        assert_state(&init_zero(1).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_state(&init_zero(2).unwrap(), &[c(1.0, 0.0), ZERO, ZERO, ZERO]);
        assert_eq!(init_zero(21), Err(QgsaError::QubitCount(21)));
        assert_eq!(init_zero(0), Err(QgsaError::QubitCount(0)));
    }

    #[test]
    fn rx_zero_is_identity() {
        let s = run_circuit(&single_rx(), &[0.0]).unwrap();
        assert_state(&s, &[c(1.0, 0.0), ZERO]);
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        // exp(-i pi X / 2) = -i X
        let s = run_circuit(&single_rx(), &[PI]).unwrap();
        assert_state(&s, &[ZERO, c(0.0, -1.0)]);
    }

    #[test]
    fn bell_state() {
        let circ = ParamCircuit::new(
            2,
            vec![
                Gate::H { target: 0 },
                Gate::Cx {
                    control: 0,
                    target: 1,
                },
            ],
        )
        .unwrap();
        let s = run_circuit(&circ, &[]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_state(&s, &[c(r, 0.0), ZERO, ZERO, c(r, 0.0)]);
        let zz: PauliString = "ZZ".parse().unwrap();
        assert_abs_diff_eq!(expval_pauli(&s, &zz).unwrap(), 1.0, epsilon = 1e-12);
        let xx: PauliString = "XX".parse().unwrap();
        assert_abs_diff_eq!(expval_pauli(&s, &xx).unwrap(), 1.0, epsilon = 1e-12);
        let yy: PauliString = "YY".parse().unwrap();
        assert_abs_diff_eq!(expval_pauli(&s, &yy).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let circ = ParamCircuit::new(2, vec![Gate::Rx { target: 0, slot: 0 }]).unwrap();
        let s = run_circuit(&circ, &[PI]).unwrap();
        // |10> sits at index 2
        assert_abs_diff_eq!(s.amplitudes()[2].norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_length_checked() {
        assert_eq!(
            run_circuit(&single_rx(), &[0.0, 1.0]),
            Err(QgsaError::LengthMismatch {
                expected: 1,
                actual: 2
            })
        );
    }

    #[test]
    fn circuit_validation() {
        assert!(matches!(
            ParamCircuit::new(2, vec![Gate::H { target: 2 }]),
            Err(QgsaError::QubitIndex { index: 2, .. })
        ));
        assert_eq!(
            ParamCircuit::new(
                2,
                vec![Gate::Cx {
                    control: 1,
                    target: 1
                }]
            ),
            Err(QgsaError::SameControlTarget(1))
        );
        assert_eq!(
            ParamCircuit::new(1, vec![Gate::Rx { target: 0, slot: 1 }]),
            Err(QgsaError::UnusedSlot(0))
        );
    }

    #[test]
    fn expval_examples() {
        let z: PauliString = "Z".parse().unwrap();
        assert_eq!(expval_pauli(&init_zero(1).unwrap(), &z).unwrap(), 1.0);
        let s = run_circuit(&single_rx(), &[PI / 2.0]).unwrap();
        assert_abs_diff_eq!(expval_pauli(&s, &z).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(
            "ZQ".parse::<PauliString>(),
            Err(QgsaError::InvalidPauli('Q'))
        );
        assert!(expval_pauli(&s, &"ZZ".parse().unwrap()).is_err());
    }

    #[test]
    fn rx_expectation_is_cosine() {
        let z: PauliString = "Z".parse().unwrap();
        let y: PauliString = "Y".parse().unwrap();
        for &t in &[-2.0, -0.3, 0.0, 0.7, 1.0, 2.9] {
            let s = run_circuit(&single_rx(), &[t]).unwrap();
            assert_abs_diff_eq!(expval_pauli(&s, &z).unwrap(), f64::cos(t), epsilon = 1e-12);
            assert_abs_diff_eq!(expval_pauli(&s, &y).unwrap(), -f64::sin(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_matches_half_angle_identity() {
        // For a half-angle rotation the perturbed state differs by
        // 2|sin(delta/4)|.
        let circ = single_rx();
        for &(t, d) in &[(0.3, 0.1), (1.0, -0.5), (2.0, 1e-4), (0.0, PI)] {
            let a = run_circuit(&circ, &[t]).unwrap();
            let b = run_circuit(&circ, &[t + d]).unwrap();
            assert_abs_diff_eq!(
                state_distance(&a, &b).unwrap(),
                2.0 * f64::sin(d / 4.0).abs(),
                epsilon = 1e-12
            );
        }
        let a = init_zero(1).unwrap();
        assert_eq!(state_distance(&a, &a).unwrap(), 0.0);
        assert!(state_distance(&a, &init_zero(2).unwrap()).is_err());
    }

    #[test]
    fn sampling_degenerate_and_errors() {
        let z: PauliString = "Z".parse().unwrap();
        let up = init_zero(1).unwrap();
        let down = run_circuit(&single_rx(), &[PI]).unwrap();
        let mut rng = seeded(3);
        for shots in [1, 7, 1000] {
            assert_eq!(sample_expval(&up, &z, shots, &mut rng).unwrap(), 1.0);
            assert_eq!(sample_expval(&down, &z, shots, &mut rng).unwrap(), -1.0);
        }
        assert_eq!(
            sample_expval(&up, &z, 0, &mut rng),
            Err(QgsaError::ZeroShots)
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let z: PauliString = "Z".parse().unwrap();
        let s = run_circuit(&single_rx(), &[1.1]).unwrap();
        let a = sample_expval(&s, &z, 500, &mut seeded(9)).unwrap();
        let b = sample_expval(&s, &z, 500, &mut seeded(9)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn from_amplitudes_checks() {
        assert!(StateVector::from_amplitudes(vec![ONE, ZERO, ZERO]).is_err());
        assert!(StateVector::from_amplitudes(vec![ONE, ONE]).is_err());
        let s = StateVector::from_amplitudes(vec![ZERO, ONE]).unwrap();
        assert_eq!(s.n_qubits(), 1);
    }
}
