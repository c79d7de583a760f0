//! Binary classification with an angle-encoded hardware-efficient ansatz.
//!
//! An example `x` in `[0, pi]^d` is loaded by `H` then `RZ(x_j)` on qubit
//! `j`. The trainable part is `layers` repetitions of an `RX` per qubit
//! followed by a ring of CNOTs `q -> (q + 1) mod d`, and the prediction is
//! `<Z>` on qubit 0, a value in `[-1, 1]` whose sign is the class.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{QgsaError, Result};
use crate::gradients::{psr_partial_from, GradientVector};
use crate::objective::{Evaluator, Objective};
use crate::observables::Observable;
use crate::rng::{seeded, SimRng};
use crate::shots_cost::Usage;
use crate::statevector::{Gate, ParamCircuit, StateVector};

/// Labelled examples with features in `[0, pi]` and labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(QgsaError::LengthMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if features.is_empty() {
            return Err(QgsaError::Dataset("dataset has no examples".into()));
        }
        let d = features[0].len();
        if let Some(row) = features.iter().position(|r| r.len() != d) {
            return Err(QgsaError::Dataset(format!(
                "row {row} has {} features, expected {d}",
                features[row].len()
            )));
        }
        for &y in &labels {
            check_label(y)?;
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(QgsaError::InvalidArgument(format!(
            "label {y} must be -1 or +1"
        )))
    }
}

/// Rescales every column to `[0, pi]`. Constant columns map to 0.
pub fn scale_to_angles(features: &mut [Vec<f64>]) {
    let Some(d) = features.first().map(Vec::len) else {
        return;
    };
    for j in 0..d {
        let (lo, hi) = features
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[j]), hi.max(r[j]))
            });
        let span = hi - lo;
        for row in features.iter_mut() {
            row[j] = if span > 0.0 {
                (row[j] - lo) / span * PI
            } else {
                0.0
            };
        }
    }
}

fn class_key(name: &str) -> String {
    let lower = name.trim().to_ascii_lowercase();
    lower.strip_prefix("iris-").unwrap_or(&lower).to_string()
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| QgsaError::Io(format!("{}: {e}", path.display())))
}

fn parse_number(field: &str, row: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| QgsaError::Dataset(format!("row {row}: '{field}' is not a number")))
}

/// Reads the four-feature Iris CSV and keeps two classes. Class names match
/// case-insensitively with or without the `Iris-` prefix; `classes.0` gets
/// label -1 and `classes.1` label +1.
pub fn load_iris(path: &Path, classes: (&str, &str)) -> Result<Dataset> {
    let (neg, pos) = (class_key(classes.0), class_key(classes.1));
    if neg == pos {
        return Err(QgsaError::InvalidArgument(format!(
            "the two classes must differ, got '{neg}' twice"
        )));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader(path)?.records().enumerate() {
        let record = record.map_err(|e| QgsaError::Dataset(e.to_string()))?;
        if record.len() != 5 {
            return Err(QgsaError::Dataset(format!(
                "row {row} has {} columns, expected 5",
                record.len()
            )));
        }
        let class = class_key(&record[4]);
        let y = if class == neg {
            -1.0
        } else if class == pos {
            1.0
        } else {
            continue;
        };
        let x = (0..4)
            .map(|j| parse_number(&record[j], row))
            .collect::<Result<Vec<_>>>()?;
        features.push(x);
        labels.push(y);
    }
    if !labels.contains(&-1.0) || !labels.contains(&1.0) {
        return Err(QgsaError::Dataset(format!(
            "{} lacks examples of '{neg}' or '{pos}'",
            path.display()
        )));
    }
    scale_to_angles(&mut features);
    Dataset::new(features, labels)
}

/// Reads a headered CSV of numeric feature columns followed by a label
/// column holding `-1`/`+1` or `0`/`1`. Features are rescaled to `[0, pi]`.
pub fn load_feature_csv(path: &Path) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader(path)?.records().enumerate() {
        let record = record.map_err(|e| QgsaError::Dataset(e.to_string()))?;
        if record.len() < 2 {
            return Err(QgsaError::Dataset(format!(
                "row {row} needs at least one feature and a label"
            )));
        }
        let values = record
            .iter()
            .map(|f| parse_number(f, row))
            .collect::<Result<Vec<_>>>()?;
        let (label, x) = values.split_last().expect("at least two columns");
        let y = match *label {
            1.0 => 1.0,
            0.0 | -1.0 => -1.0,
            l => {
                return Err(QgsaError::Dataset(format!(
                    "row {row}: label {l} is not one of -1, 0, 1"
                )))
            }
        };
        features.push(x.to_vec());
        labels.push(y);
    }
    if features.is_empty() {
        return Err(QgsaError::Dataset(format!(
            "{} has no rows",
            path.display()
        )));
    }
    scale_to_angles(&mut features);
    Dataset::new(features, labels)
}

/// Stand-in for pre-extracted crack-image features: two Gaussian clusters
/// with standard deviation `pi/10` centred at `pi/2 -/+ pi/10` in every
/// coordinate, clipped to `[0, pi]`. Labels alternate starting with -1.
pub fn synth_crack(n_per_class: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || d == 0 {
        return Err(QgsaError::InvalidArgument(
            "synthetic dataset needs at least one example and one feature".into(),
        ));
    }
    let sigma = PI / 10.0;
    let noise = Normal::new(0.0, sigma).expect("positive deviation");
    let mut rng = seeded(seed);
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for y in [-1.0, 1.0] {
            let centre = PI / 2.0 + y * sigma;
            features.push(
                (0..d)
                    .map(|_| (centre + noise.sample(&mut rng)).clamp(0.0, PI))
                    .collect(),
            );
            labels.push(y);
        }
    }
    Dataset::new(features, labels)
}

/// Encoder plus trainable ansatz with a `Z_0` readout.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    d: usize,
    layers: usize,
    ansatz: ParamCircuit,
    readout: Observable,
}

/// Builds the `d`-qubit classifier with `layers * d` parameters.
pub fn build_model(d: usize, layers: usize) -> Result<ClassifierModel> {
    if d < 2 {
        return Err(QgsaError::InvalidArgument(format!(
            "the entangling ring needs at least 2 qubits, got {d}"
        )));
    }
    if layers == 0 {
        return Err(QgsaError::InvalidArgument(
            "at least one layer is required".into(),
        ));
    }
    let mut gates = Vec::with_capacity(layers * 2 * d);
    for layer in 0..layers {
        for q in 0..d {
            gates.push(Gate::Rx {
                target: q,
                slot: layer * d + q,
            });
        }
        for q in 0..d {
            gates.push(Gate::Cx {
                control: q,
                target: (q + 1) % d,
            });
        }
    }
    Ok(ClassifierModel {
        d,
        layers,
        ansatz: ParamCircuit::new(d, gates)?,
        readout: Observable::single_z(d, 0)?,
    })
}

impl ClassifierModel {
    pub fn n_qubits(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn n_params(&self) -> usize {
        self.ansatz.n_params()
    }

    pub fn ansatz(&self) -> &ParamCircuit {
        &self.ansatz
    }

    pub fn readout(&self) -> &Observable {
        &self.readout
    }

    /// The encoder and ansatz as a single circuit for input `x`.
    pub fn full_circuit(&self, x: &[f64]) -> Result<ParamCircuit> {
        let mut gates = self.encoder_gates(x)?;
        gates.extend_from_slice(self.ansatz.gates());
        ParamCircuit::new(self.d, gates)
    }

    fn encoder_gates(&self, x: &[f64]) -> Result<Vec<Gate>> {
        if x.len() != self.d {
            return Err(QgsaError::LengthMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        let mut gates: Vec<Gate> = (0..self.d).map(|target| Gate::H { target }).collect();
        gates.extend(
            x.iter()
                .enumerate()
                .map(|(target, &angle)| Gate::RzConst { target, angle }),
        );
        Ok(gates)
    }

    /// State after the encoder alone.
    pub fn encode(&self, x: &[f64]) -> Result<StateVector> {
        let encoder = ParamCircuit::new(self.d, self.encoder_gates(x)?)?;
        encoder.run_from(&StateVector::zero(self.d)?, &[])
    }

    /// Exact `h(x; theta)`.
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let state = self.ansatz.run_from(&self.encode(x)?, theta)?;
        self.readout.expval(&state)
    }

    /// `h(x; theta)` through `eval`, with its cost.
    pub fn predict_with(
        &self,
        theta: &[f64],
        x: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)> {
        let state = self.ansatz.run_from(&self.encode(x)?, theta)?;
        eval.estimate(&self.readout, &state, rng)
    }

    /// Fraction of examples whose predicted sign matches the label. A
    /// prediction of exactly 0 counts as +1.
    pub fn accuracy(&self, theta: &[f64], data: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for (x, &y) in data.features.iter().zip(&data.labels) {
            let h = self.predict(theta, x)?;
            if (h >= 0.0) == (y > 0.0) {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Per-example loss on a prediction `h` in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Quantum hinge `(1 - y h) / 2`, in `[0, 1]`.
    Qh,
    /// Squared error `(h - y)^2`.
    Mse,
}

impl Loss {
    pub fn value(self, h: f64, y: f64) -> Result<f64> {
        check_label(y)?;
        Ok(match self {
            Loss::Qh => (1.0 - y * h) / 2.0,
            Loss::Mse => (h - y) * (h - y),
        })
    }

    /// `d loss / d h`.
    pub fn derivative(self, h: f64, y: f64) -> f64 {
        match self {
            Loss::Qh => -y / 2.0,
            Loss::Mse => 2.0 * (h - y),
        }
    }

    /// Bound on the Hessian norm of one example's loss for a `k`-parameter
    /// model with a single-Pauli readout.
    fn smoothness_per_example(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            // (1 - y h)/2 inherits half of the readout's bound k
            Loss::Qh => k / 2.0,
            // 2 grad h grad h^T + 2 (h - y) hess h, with |grad h|^2 <= k and |h - y| <= 2
            Loss::Mse => 6.0 * k,
        }
    }
}

pub fn loss_qh(h: f64, y: f64) -> Result<f64> {
    Loss::Qh.value(h, y)
}

pub fn loss_mse(h: f64, y: f64) -> Result<f64> {
    Loss::Mse.value(h, y)
}

/// Whether the empirical risk sums or averages the per-example losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Exact empirical risk of `theta` on `data`.
pub fn empirical_risk(
    model: &ClassifierModel,
    theta: &[f64],
    data: &Dataset,
    loss: Loss,
    reduction: Reduction,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        total += loss.value(model.predict(theta, x)?, y)?;
    }
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / data.len() as f64,
    })
}

/// Empirical risk as an [`Objective`]. One evaluation runs one circuit per
/// example; gradients go through the chain rule with parameter-shift
/// derivatives of every prediction.
#[derive(Debug, Clone)]
pub struct RiskObjective {
    model: ClassifierModel,
    encoded: Vec<StateVector>,
    labels: Vec<f64>,
    loss: Loss,
    reduction: Reduction,
}

impl RiskObjective {
    pub fn new(
        model: ClassifierModel,
        data: &Dataset,
        loss: Loss,
        reduction: Reduction,
    ) -> Result<Self> {
        if data.n_features() != model.n_qubits() {
            return Err(QgsaError::LengthMismatch {
                expected: model.n_qubits(),
                actual: data.n_features(),
            });
        }
        let encoded = data
            .features
            .iter()
            .map(|x| model.encode(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            encoded,
            labels: data.labels.clone(),
            loss,
            reduction,
        })
    }

    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }

    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    fn scale(&self) -> f64 {
        match self.reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / self.labels.len() as f64,
        }
    }

    fn predictions(
        &self,
        theta: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(Vec<f64>, Usage)> {
        let mut usage = Usage::ZERO;
        let mut out = Vec::with_capacity(self.encoded.len());
        for state in &self.encoded {
            let out_state = self.model.ansatz.run_from(state, theta)?;
            let (h, u) = eval.estimate(&self.model.readout, &out_state, rng)?;
            out.push(h);
            usage += u;
        }
        Ok((out, usage))
    }

    /// `dR/dtheta_index` given the loss derivative for every example.
    fn chain_partial(
        &self,
        theta: &[f64],
        index: usize,
        dloss: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)> {
        let mut value = 0.0;
        let mut usage = Usage::ZERO;
        for (state, &w) in self.encoded.iter().zip(dloss) {
            let (dh, u) = psr_partial_from(
                state,
                &self.model.ansatz,
                &self.model.readout,
                theta,
                index,
                eval,
                rng,
            )?;
            value += w * dh;
            usage += u;
        }
        Ok((value * self.scale(), usage))
    }

    /// Loss derivatives at every example. The squared error needs the
    /// predictions themselves, which costs a charged forward pass.
    fn loss_derivatives(
        &self,
        theta: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(Vec<f64>, Usage)> {
        match self.loss {
            Loss::Qh => Ok((
                self.labels
                    .iter()
                    .map(|&y| self.loss.derivative(0.0, y))
                    .collect(),
                Usage::ZERO,
            )),
            Loss::Mse => {
                let (h, usage) = self.predictions(theta, eval, rng)?;
                let d = h
                    .iter()
                    .zip(&self.labels)
                    .map(|(&h, &y)| self.loss.derivative(h, y))
                    .collect();
                Ok((d, usage))
            }
        }
    }
}

impl Objective for RiskObjective {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn evaluate(&self, theta: &[f64], eval: Evaluator, rng: &mut SimRng) -> Result<(f64, Usage)> {
        let (h, usage) = self.predictions(theta, eval, rng)?;
        let mut total = 0.0;
        for (&h, &y) in h.iter().zip(&self.labels) {
            total += self.loss.value(h, y)?;
        }
        Ok((total * self.scale(), usage))
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (state, &y) in self.encoded.iter().zip(&self.labels) {
            let h = self
                .model
                .readout
                .expval(&self.model.ansatz.run_from(state, theta)?)?;
            total += self.loss.value(h, y)?;
        }
        Ok(total * self.scale())
    }

    fn partial(
        &self,
        theta: &[f64],
        index: usize,
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(f64, Usage)> {
        let (dloss, forward) = self.loss_derivatives(theta, eval, rng)?;
        let (value, usage) = self.chain_partial(theta, index, &dloss, eval, rng)?;
        Ok((value, forward + usage))
    }

    fn gradient(
        &self,
        theta: &[f64],
        eval: Evaluator,
        rng: &mut SimRng,
    ) -> Result<(GradientVector, Usage)> {
        let (dloss, mut usage) = self.loss_derivatives(theta, eval, rng)?;
        let mut values = Vec::with_capacity(self.n_params());
        for i in 0..self.n_params() {
            let (v, u) = self.chain_partial(theta, i, &dloss, eval, rng)?;
            values.push(v);
            usage += u;
        }
        Ok((GradientVector::new(values), usage))
    }

    fn smoothness_bound(&self) -> f64 {
        self.loss.smoothness_per_example(self.n_params()) * self.labels.len() as f64 * self.scale()
    }
}

/// Parameters drawn uniformly from `[0, 2 pi)`.
pub fn random_theta<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}
