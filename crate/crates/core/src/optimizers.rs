//! Gradient sampling and the baseline optimizers.
//!
//! Every optimizer advances an [`OptState`] one iteration at a time and
//! reports a [`StepOutcome`] carrying the circuits and shots it spent.
//! [`run_optimizer`] drives the loop and assembles an [`OptimizerTrace`].
//!
//! Gradient sampling replaces the gradient with a random vector `g_s` whose
//! components are drawn i.i.d. from a distribution supported on
//! `[-2 sqrt|mu|, 2 sqrt|mu|]`, then moves to whichever of `theta - alpha g_s`
//! and `theta + alpha g_s` has the lower objective. The ideal variant sets
//! `alpha` from the true gradient; the practical variant uses a fixed step
//! that decays whenever neither trial point improves.

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{QgsaError, Result};
use crate::gradients::GradientVector;
use crate::objective::{Evaluator, Objective};
use crate::rng::{seeded, SimRng};
use crate::shots_cost::{ExecutionLedger, Purpose, Usage};

/// Shape of the bounded distribution `g_s` is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
    /// Normal with standard deviation `half_width / 2`, rejected outside
    /// `[-half_width, half_width]`.
    TruncatedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub distribution: Distribution,
    /// Lower bound on the half-width so the support never collapses at `mu = 0`.
    pub floor: f64,
    /// Extra draws allowed when a sample comes out as the zero vector.
    pub max_resamples: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            distribution: Distribution::Uniform,
            floor: 1e-3,
            max_resamples: 5,
        }
    }
}

/// A random surrogate for the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDirection {
    pub components: Vec<f64>,
    /// Every component lies in `[-half_width, half_width]`.
    pub half_width: f64,
}

impl SampledDirection {
    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&c| c == 0.0)
    }
}

/// Draws `k` i.i.d. components supported on `[-h, h]` with
/// `h = max(2 sqrt|mu|, floor)`.
pub fn sample_direction<R: Rng + ?Sized>(
    mu: f64,
    k: usize,
    distribution: Distribution,
    floor: f64,
    rng: &mut R,
) -> SampledDirection {
    let half_width = (2.0 * mu.abs().sqrt()).max(floor.max(0.0));
    if half_width == 0.0 || !half_width.is_finite() {
        return SampledDirection {
            components: vec![0.0; k],
            half_width: if half_width.is_finite() {
                half_width
            } else {
                0.0
            },
        };
    }
    let components = match distribution {
        Distribution::Uniform => (0..k)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect(),
        Distribution::TruncatedGaussian => {
            let normal = Normal::new(0.0, half_width / 2.0).expect("positive deviation");
            (0..k)
                .map(|_| loop {
                    let x: f64 = normal.sample(rng);
                    if x.abs() <= half_width {
                        break x;
                    }
                })
                .collect()
        }
    };
    SampledDirection {
        components,
        half_width,
    }
}

/// `2 |g . g_s| / (a L ||g_s||^2)`, which for `a > 1` lies strictly inside
/// the interval of step sizes guaranteed to decrease the objective.
pub fn ideal_step_size(
    gradient: &GradientVector,
    direction: &SampledDirection,
    lipschitz: f64,
    a: f64,
) -> Result<f64> {
    if !(a > 1.0) {
        return Err(QgsaError::InvalidArgument(format!(
            "step-size divisor a={a} must exceed 1"
        )));
    }
    if !(lipschitz > 0.0) {
        return Err(QgsaError::InvalidArgument(format!(
            "smoothness constant {lipschitz} must be positive"
        )));
    }
    if gradient.len() != direction.components.len() {
        return Err(QgsaError::LengthMismatch {
            expected: gradient.len(),
            actual: direction.components.len(),
        });
    }
    let norm_sqr = direction.norm_sqr();
    if norm_sqr == 0.0 {
        return Err(QgsaError::ZeroDirection);
    }
    Ok(2.0 * gradient.dot(&direction.components).abs() / (a * lipschitz * norm_sqr))
}

/// Which trial point a gradient-sampling step moved to. The update is
/// `theta + s * alpha * g_s` with `s = -1` for `Minus`, `+1` for `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minus,
    Plus,
}

impl Direction {
    pub fn sign(self) -> i8 {
        match self {
            Direction::Minus => -1,
            Direction::Plus => 1,
        }
    }
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone)]
pub struct OptState {
    pub theta: Vec<f64>,
    /// Current step size. Only decays, never grows.
    pub alpha: f64,
    pub t: usize,
    pub rng: SimRng,
    /// Consecutive iterations without an accepted step.
    pub stall_count: usize,
    cached_mu: Option<f64>,
}

impl OptState {
    pub fn new(theta: Vec<f64>, alpha: f64, seed: u64) -> Self {
        Self {
            theta,
            alpha,
            t: 0,
            rng: seeded(seed),
            stall_count: 0,
            cached_mu: None,
        }
    }

    fn finish(&mut self, accepted: bool) {
        self.t += 1;
        if accepted {
            self.stall_count = 0;
        } else {
            self.stall_count += 1;
        }
    }
}

/// Result of a single iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub new_theta: Vec<f64>,
    /// Measured objective at `new_theta`, when the step measured it.
    pub mu_new: Option<f64>,
    /// Step size applied (or tried) this iteration.
    pub alpha: f64,
    /// Circuits spent estimating the objective at the current point.
    pub measure: Usage,
    /// Circuits spent on gradients or trial points.
    pub update: Usage,
    pub direction: Option<Direction>,
    /// Norm of the exact gradient at the starting point, when known.
    pub gradient_norm: Option<f64>,
}

impl StepOutcome {
    pub fn circuits_used(&self) -> u64 {
        self.measure.circuits + self.update.circuits
    }

    pub fn shots_used(&self) -> u64 {
        self.measure.shots + self.update.shots
    }
}

/// Evaluators for the two kinds of objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluators {
    /// For `mu` at the current point (`n_mu` shots).
    pub mu: Evaluator,
    /// For gradients and trial points (`n_g` shots).
    pub update: Evaluator,
}

impl Default for Evaluators {
    fn default() -> Self {
        Self {
            mu: Evaluator::exact(),
            update: Evaluator::exact(),
        }
    }
}

fn offset(theta: &[f64], direction: &[f64], scale: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(direction)
        .map(|(t, d)| t + scale * d)
        .collect()
}

fn draw_nonzero(
    mu: f64,
    k: usize,
    sampler: &SamplerConfig,
    rng: &mut SimRng,
) -> Option<SampledDirection> {
    (0..=sampler.max_resamples)
        .map(|_| sample_direction(mu, k, sampler.distribution, sampler.floor, rng))
        .find(|d| !d.is_zero())
}

fn rejected(
    state: &mut OptState,
    alpha: f64,
    measure: Usage,
    gradient_norm: Option<f64>,
) -> StepOutcome {
    state.finish(false);
    StepOutcome {
        accepted: false,
        new_theta: state.theta.clone(),
        mu_new: None,
        alpha,
        measure,
        update: Usage::ZERO,
        direction: None,
        gradient_norm,
    }
}

/// One iteration of gradient sampling with the step size set from the exact
/// gradient. The gradient comes from the simulator and is not charged.
pub fn qgsa_ideal_step(
    state: &mut OptState,
    objective: &dyn Objective,
    lipschitz: f64,
    a: f64,
    sampler: &SamplerConfig,
    evals: &Evaluators,
) -> Result<StepOutcome> {
    let k = objective.n_params();
    let (mu, measure) = objective.evaluate(&state.theta, evals.mu, &mut state.rng)?;
    let (gradient, _) = objective.gradient(
        &state.theta,
        Evaluator::Exact { nominal_shots: 0 },
        &mut state.rng,
    )?;
    let gradient_norm = Some(gradient.norm());
    let Some(direction) = draw_nonzero(mu, k, sampler, &mut state.rng) else {
        return Ok(rejected(state, 0.0, measure, gradient_norm));
    };
    let alpha = ideal_step_size(&gradient, &direction, lipschitz, a)?;
    let minus = offset(&state.theta, &direction.components, -alpha);
    let plus = offset(&state.theta, &direction.components, alpha);
    let (mu_minus, u_minus) = objective.evaluate(&minus, evals.update, &mut state.rng)?;
    let (mu_plus, u_plus) = objective.evaluate(&plus, evals.update, &mut state.rng)?;
    // ties go to theta-minus, the point the practical variant tries first
    let (chosen, mu_new, dir) = if mu_minus <= mu_plus {
        (minus, mu_minus, Direction::Minus)
    } else {
        (plus, mu_plus, Direction::Plus)
    };
    state.theta = chosen;
    state.finish(true);
    Ok(StepOutcome {
        accepted: true,
        new_theta: state.theta.clone(),
        mu_new: Some(mu_new),
        alpha,
        measure,
        update: u_minus + u_plus,
        direction: Some(dir),
        gradient_norm,
    })
}

/// One iteration of the practical variant: try `theta - alpha g_s`, then
/// `theta + alpha g_s`, accepting the first strict improvement on the
/// measured `mu`. If neither improves, `alpha <- alpha / (1 + gamma)`.
pub fn qgsa_practical_step(
    state: &mut OptState,
    objective: &dyn Objective,
    gamma: f64,
    reuse_mu: bool,
    sampler: &SamplerConfig,
    evals: &Evaluators,
) -> Result<StepOutcome> {
    if !(gamma >= 0.0) {
        return Err(QgsaError::InvalidArgument(format!(
            "decay gamma={gamma} must be non-negative"
        )));
    }
    let k = objective.n_params();
    let alpha = state.alpha;
    let (mu, measure) = match state.cached_mu {
        Some(mu) if reuse_mu => (mu, Usage::ZERO),
        _ => objective.evaluate(&state.theta, evals.mu, &mut state.rng)?,
    };
    state.cached_mu = Some(mu);
    let Some(direction) = draw_nonzero(mu, k, sampler, &mut state.rng) else {
        state.alpha = alpha / (1.0 + gamma);
        return Ok(rejected(state, alpha, measure, None));
    };

    let minus = offset(&state.theta, &direction.components, -alpha);
    let (mu_minus, mut update) = objective.evaluate(&minus, evals.update, &mut state.rng)?;
    let mut accepted = None;
    if mu_minus < mu {
        accepted = Some((minus, mu_minus, Direction::Minus));
    } else {
        let plus = offset(&state.theta, &direction.components, alpha);
        let (mu_plus, u_plus) = objective.evaluate(&plus, evals.update, &mut state.rng)?;
        update += u_plus;
        if mu_plus < mu {
            accepted = Some((plus, mu_plus, Direction::Plus));
        }
    }

    match accepted {
        Some((theta, mu_new, dir)) => {
            state.theta = theta;
            state.cached_mu = Some(mu_new);
            state.finish(true);
            Ok(StepOutcome {
                accepted: true,
                new_theta: state.theta.clone(),
                mu_new: Some(mu_new),
                alpha,
                measure,
                update,
                direction: Some(dir),
                gradient_norm: None,
            })
        }
        None => {
            state.alpha = alpha / (1.0 + gamma);
            let mut out = rejected(state, alpha, measure, None);
            out.update = update;
            Ok(out)
        }
    }
}

/// `theta <- theta - alpha * g` with the full parameter-shift gradient.
pub fn gd_step(
    state: &mut OptState,
    objective: &dyn Objective,
    eval: Evaluator,
) -> Result<StepOutcome> {
    let (gradient, update) = objective.gradient(&state.theta, eval, &mut state.rng)?;
    let alpha = state.alpha;
    state.theta = offset(&state.theta, gradient.values(), -alpha);
    state.finish(true);
    Ok(StepOutcome {
        accepted: true,
        new_theta: state.theta.clone(),
        mu_new: None,
        alpha,
        measure: Usage::ZERO,
        update,
        direction: None,
        gradient_norm: eval.is_exact().then(|| gradient.norm()),
    })
}

/// Updates one uniformly chosen coordinate with its parameter-shift partial.
/// With `track_mu` set, the objective at the new point is also measured.
pub fn rcd_step(
    state: &mut OptState,
    objective: &dyn Objective,
    eval: Evaluator,
    track_mu: Option<Evaluator>,
) -> Result<StepOutcome> {
    let k = objective.n_params();
    if k == 0 {
        return Err(QgsaError::InvalidArgument(
            "no parameters to optimize".into(),
        ));
    }
    let index = state.rng.random_range(0..k);
    let (partial, update) = objective.partial(&state.theta, index, eval, &mut state.rng)?;
    let alpha = state.alpha;
    state.theta[index] -= alpha * partial;
    let (mu_new, measure) = match track_mu {
        Some(mu_eval) => {
            let (mu, u) = objective.evaluate(&state.theta, mu_eval, &mut state.rng)?;
            (Some(mu), u)
        }
        None => (None, Usage::ZERO),
    };
    state.finish(true);
    Ok(StepOutcome {
        accepted: true,
        new_theta: state.theta.clone(),
        mu_new,
        alpha,
        measure,
        update,
        direction: None,
        gradient_norm: None,
    })
}

/// Gain schedule for SPSA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaParams {
    pub a: f64,
    pub alpha_exp: f64,
    pub c: f64,
    pub gamma_exp: f64,
    /// Stability constant added to the step-gain denominator.
    pub big_a: f64,
}

impl Default for SpsaParams {
    fn default() -> Self {
        Self {
            a: 0.1,
            alpha_exp: 0.602,
            c: 0.2,
            gamma_exp: 0.101,
            big_a: 0.0,
        }
    }
}

impl SpsaParams {
    /// `a / (t + 1 + A)^alpha_exp`
    pub fn step_gain(&self, t: usize) -> f64 {
        self.a / (t as f64 + 1.0 + self.big_a).powf(self.alpha_exp)
    }

    /// `c / (t + 1)^gamma_exp`
    pub fn perturbation_gain(&self, t: usize) -> f64 {
        self.c / (t as f64 + 1.0).powf(self.gamma_exp)
    }
}

/// Two-evaluation simultaneous-perturbation step with Rademacher `Delta`.
pub fn spsa_step(
    state: &mut OptState,
    objective: &dyn Objective,
    params: &SpsaParams,
    eval: Evaluator,
) -> Result<StepOutcome> {
    let k = objective.n_params();
    let a_t = params.step_gain(state.t);
    let c_t = params.perturbation_gain(state.t);
    let delta: Vec<f64> = (0..k)
        .map(|_| {
            if state.rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let plus = offset(&state.theta, &delta, c_t);
    let minus = offset(&state.theta, &delta, -c_t);
    let (y_plus, u_plus) = objective.evaluate(&plus, eval, &mut state.rng)?;
    let (y_minus, u_minus) = objective.evaluate(&minus, eval, &mut state.rng)?;
    let slope = (y_plus - y_minus) / (2.0 * c_t);
    for (t, d) in state.theta.iter_mut().zip(&delta) {
        *t -= a_t * slope / d;
    }
    state.finish(true);
    Ok(StepOutcome {
        accepted: true,
        new_theta: state.theta.clone(),
        mu_new: None,
        alpha: a_t,
        measure: Usage::ZERO,
        update: u_plus + u_minus,
        direction: None,
        gradient_norm: None,
    })
}

/// Optimizer choice and its method-specific settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    QgsaIdeal {
        #[serde(default = "default_a")]
        a: f64,
        /// Overrides the objective's analytic smoothness bound.
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    QgsaPractical {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        reuse_mu: bool,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    Gd,
    Rcd {
        #[serde(default)]
        track_mu: bool,
    },
    Spsa {
        #[serde(default, flatten)]
        params: SpsaParams,
    },
}

fn default_a() -> f64 {
    2.0
}

fn default_gamma() -> f64 {
    0.1
}

impl Method {
    pub fn qgsa_ideal() -> Self {
        Method::QgsaIdeal {
            a: default_a(),
            lipschitz: None,
            sampler: SamplerConfig::default(),
        }
    }

    pub fn qgsa_practical() -> Self {
        Method::QgsaPractical {
            gamma: default_gamma(),
            reuse_mu: false,
            sampler: SamplerConfig::default(),
        }
    }

    pub fn spsa() -> Self {
        Method::Spsa {
            params: SpsaParams::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::QgsaIdeal { .. } => "qgsa_ideal",
            Method::QgsaPractical { .. } => "qgsa_practical",
            Method::Gd => "gd",
            Method::Rcd { .. } => "rcd",
            Method::Spsa { .. } => "spsa",
        }
    }
}

/// Early-stopping rules. A zero limit or threshold disables the rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Termination {
    /// Consecutive non-improving iterations tolerated.
    pub stall_limit: usize,
    /// Stop once the step size falls below this value.
    pub alpha_floor: f64,
    /// Ideal variant only: stop once the exact gradient norm falls below this.
    pub gradient_epsilon: f64,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            stall_limit: 20,
            alpha_floor: 1e-6,
            gradient_epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Iterations,
    Stalled,
    AlphaFloor,
    GradientNorm,
    NoDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub method: Method,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub iterations: usize,
    #[serde(default)]
    pub evaluators: Evaluators,
    #[serde(default)]
    pub termination: Termination,
    /// Record the exact gradient norm at every iterate.
    #[serde(default)]
    pub monitor_gradient: bool,
}

fn default_alpha() -> f64 {
    0.1
}

impl OptimizerConfig {
    pub fn new(method: Method, iterations: usize) -> Self {
        Self {
            method,
            alpha: default_alpha(),
            iterations,
            evaluators: Evaluators::default(),
            termination: Termination::default(),
            monitor_gradient: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QgsaError::InvalidArgument(msg));
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("step size alpha={} must be positive", self.alpha));
        }
        self.evaluators.mu.validate()?;
        self.evaluators.update.validate()?;
        let check_sampler = |s: &SamplerConfig| {
            if !(s.floor >= 0.0) {
                return bad(format!("sampler floor {} must be non-negative", s.floor));
            }
            Ok(())
        };
        match self.method {
            Method::QgsaIdeal {
                a,
                lipschitz,
                ref sampler,
            } => {
                if !(a > 1.0) {
                    return bad(format!("step-size divisor a={a} must exceed 1"));
                }
                if let Some(l) = lipschitz {
                    if !(l > 0.0) {
                        return bad(format!("smoothness constant {l} must be positive"));
                    }
                }
                check_sampler(sampler)?;
            }
            Method::QgsaPractical {
                gamma, ref sampler, ..
            } => {
                if !(gamma >= 0.0) {
                    return bad(format!("decay gamma={gamma} must be non-negative"));
                }
                check_sampler(sampler)?;
            }
            Method::Spsa { params } => {
                if !(params.a > 0.0 && params.c > 0.0) {
                    return bad("SPSA gains a and c must be positive".into());
                }
                if !(params.alpha_exp >= 0.0 && params.gamma_exp >= 0.0 && params.big_a >= 0.0) {
                    return bad("SPSA exponents and stability constant must be non-negative".into());
                }
            }
            Method::Gd | Method::Rcd { .. } => {}
        }
        Ok(())
    }
}

/// State of the run after iteration `t` (`t = 0` is the starting point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Exact objective at the iterate, computed outside the ledger.
    pub loss: f64,
    pub circuits: u64,
    pub shots: u64,
    pub update_circuits: u64,
    pub alpha: f64,
    /// `false` for the starting record.
    pub accepted: bool,
    /// `-1` for `theta - alpha g_s`, `+1` for `theta + alpha g_s`, `0` otherwise.
    pub sign: i8,
    pub gradient_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub method: &'static str,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub ledger: ExecutionLedger,
    pub final_theta: Vec<f64>,
    pub stop: StopReason,
}

impl OptimizerTrace {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn update_circuits(&self) -> u64 {
        self.ledger.total_for(Purpose::Update).circuits
    }
}

fn monitored_norm(objective: &dyn Objective, theta: &[f64], rng: &mut SimRng) -> Result<f64> {
    let (g, _) = objective.gradient(theta, Evaluator::Exact { nominal_shots: 0 }, rng)?;
    Ok(g.norm())
}

/// Runs `config.iterations` steps from `theta0`, or fewer if a termination
/// rule fires.
pub fn run_optimizer(
    config: &OptimizerConfig,
    objective: &dyn Objective,
    theta0: Vec<f64>,
    seed: u64,
) -> Result<OptimizerTrace> {
    config.validate()?;
    let k = objective.n_params();
    if k == 0 {
        return Err(QgsaError::InvalidArgument(
            "objective has no parameters".into(),
        ));
    }
    if theta0.len() != k {
        return Err(QgsaError::LengthMismatch {
            expected: k,
            actual: theta0.len(),
        });
    }
    let mut state = OptState::new(theta0, config.alpha, seed);
    // the monitor gets its own stream so enabling it never perturbs the run
    let mut monitor_rng = seeded(seed ^ 0x006d_6f6e_6974_6f72);
    let lipschitz = match config.method {
        Method::QgsaIdeal {
            lipschitz: Some(l), ..
        } => l,
        _ => objective.smoothness_bound(),
    };
    let evals = config.evaluators;
    let mut ledger = ExecutionLedger::new();
    let gradient_norm = |theta: &[f64], rng: &mut SimRng| -> Result<Option<f64>> {
        if config.monitor_gradient {
            monitored_norm(objective, theta, rng).map(Some)
        } else {
            Ok(None)
        }
    };
    let mut records = vec![IterationRecord {
        t: 0,
        loss: objective.value(&state.theta)?,
        circuits: 0,
        shots: 0,
        update_circuits: 0,
        alpha: state.alpha,
        accepted: false,
        sign: 0,
        gradient_norm: gradient_norm(&state.theta, &mut monitor_rng)?,
    }];
    let mut stop = StopReason::Iterations;

    for _ in 0..config.iterations {
        let outcome = match config.method {
            Method::QgsaIdeal { a, ref sampler, .. } => {
                let out = qgsa_ideal_step(&mut state, objective, lipschitz, a, sampler, &evals)?;
                if config.termination.gradient_epsilon > 0.0
                    && out
                        .gradient_norm
                        .is_some_and(|n| n < config.termination.gradient_epsilon)
                {
                    stop = StopReason::GradientNorm;
                }
                out
            }
            Method::QgsaPractical {
                gamma,
                reuse_mu,
                ref sampler,
            } => qgsa_practical_step(&mut state, objective, gamma, reuse_mu, sampler, &evals)?,
            Method::Gd => gd_step(&mut state, objective, evals.update)?,
            Method::Rcd { track_mu } => rcd_step(
                &mut state,
                objective,
                evals.update,
                track_mu.then_some(evals.mu),
            )?,
            Method::Spsa { ref params } => spsa_step(&mut state, objective, params, evals.update)?,
        };
        if outcome.measure.circuits > 0 {
            ledger.record(Purpose::Measure, outcome.measure);
        }
        if outcome.update.circuits > 0 {
            ledger.record(Purpose::Update, outcome.update);
        }
        let no_direction = !outcome.accepted && outcome.update.circuits == 0;
        records.push(IterationRecord {
            t: state.t,
            loss: objective.value(&state.theta)?,
            circuits: ledger.circuits(),
            shots: ledger.shots(),
            update_circuits: ledger.total_for(Purpose::Update).circuits,
            alpha: outcome.alpha,
            accepted: outcome.accepted,
            sign: outcome.direction.map_or(0, Direction::sign),
            gradient_norm: gradient_norm(&state.theta, &mut monitor_rng)?,
        });

        if stop != StopReason::Iterations {
            break;
        }
        if matches!(config.method, Method::QgsaIdeal { .. }) && no_direction {
            stop = StopReason::NoDirection;
            break;
        }
        let limit = config.termination.stall_limit;
        if limit > 0 && state.stall_count >= limit {
            stop = StopReason::Stalled;
            break;
        }
        if state.alpha < config.termination.alpha_floor {
            stop = StopReason::AlphaFloor;
            break;
        }
    }

    Ok(OptimizerTrace {
        method: config.method.name(),
        seed,
        records,
        ledger,
        final_theta: state.theta,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::ExpectationObjective;
    use crate::observables::Observable;
    use crate::statevector::{Gate, ParamCircuit};
    use approx::assert_abs_diff_eq;

    fn cosine() -> ExpectationObjective {
        ExpectationObjective::new(
            ParamCircuit::new(1, vec![Gate::Rx { target: 0, slot: 0 }]).unwrap(),
            Observable::single_z(1, 0).unwrap(),
        )
        .unwrap()
    }

    fn ansatz_objective(d: usize, layers: usize) -> ExpectationObjective {
        let mut gates = Vec::new();
        let mut slot = 0;
        for _ in 0..layers {
            for q in 0..d {
                gates.push(Gate::Rx { target: q, slot });
                slot += 1;
            }
            for q in 0..d {
                gates.push(Gate::Cx {
                    control: q,
                    target: (q + 1) % d,
                });
            }
        }
        ExpectationObjective::new(
            ParamCircuit::new(d, gates).unwrap(),
            Observable::single_z(d, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn direction_examples() {
        let mut rng = seeded(4);
        let d = sample_direction(1.0, 3, Distribution::Uniform, 0.0, &mut rng);
        assert_eq!(d.half_width, 2.0);
        assert_eq!(d.components.len(), 3);
        assert!(d.components.iter().all(|c| c.abs() <= 2.0));

        let d = sample_direction(0.0, 4, Distribution::Uniform, 0.0, &mut rng);
        assert!(d.is_zero());
        assert_eq!(d.half_width, 0.0);

        let d = sample_direction(0.25, 2, Distribution::Uniform, 0.0, &mut rng);
        assert_eq!(d.half_width, 1.0);

        let d = sample_direction(0.0, 2, Distribution::Uniform, 1e-3, &mut rng);
        assert_eq!(d.half_width, 1e-3);
        let d = sample_direction(-0.25, 50, Distribution::TruncatedGaussian, 0.0, &mut rng);
        assert_eq!(d.half_width, 1.0);
        assert!(d.components.iter().all(|c| c.abs() <= 1.0));
    }

    #[test]
    fn step_size_examples() {
        let g = GradientVector::new(vec![0.3, -0.7]);
        let same = SampledDirection {
            components: vec![0.3, -0.7],
            half_width: 1.0,
        };
        assert_abs_diff_eq!(
            ideal_step_size(&g, &same, 4.0, 2.0).unwrap(),
            0.25,
            epsilon = 1e-15
        );

        let orth = SampledDirection {
            components: vec![0.7, 0.3],
            half_width: 1.0,
        };
        assert_abs_diff_eq!(
            ideal_step_size(&g, &orth, 4.0, 2.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );

        let g = GradientVector::new(vec![1.0, 0.0]);
        let gs = SampledDirection {
            components: vec![1.0, 1.0],
            half_width: 1.0,
        };
        assert_abs_diff_eq!(
            ideal_step_size(&g, &gs, 1.0, 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );

        let zero = SampledDirection {
            components: vec![0.0, 0.0],
            half_width: 0.0,
        };
        assert_eq!(
            ideal_step_size(&g, &zero, 1.0, 2.0),
            Err(QgsaError::ZeroDirection)
        );
        assert!(ideal_step_size(&g, &gs, 1.0, 1.0).is_err());
    }

    #[test]
    fn ideal_step_decreases_cosine() {
        let obj = cosine();
        let mut state = OptState::new(vec![1.0], 0.1, 11);
        let before = obj.value(&state.theta).unwrap();
        let out = qgsa_ideal_step(
            &mut state,
            &obj,
            1.0,
            2.0,
            &SamplerConfig::default(),
            &Evaluators::default(),
        )
        .unwrap();
        assert!(out.accepted);
        assert!(obj.value(&out.new_theta).unwrap() < before);
        assert_eq!(out.measure.circuits, 1);
        assert_eq!(out.update.circuits, 2);
    }

    #[test]
    fn ideal_step_without_direction_is_rejected() {
        // theta = pi/2 gives mu = 0 (up to rounding); with no floor the support is empty
        let obj = ExpectationObjective::new(
            ParamCircuit::new(1, vec![Gate::Ry { target: 0, slot: 0 }]).unwrap(),
            "1*X".parse().unwrap(),
        )
        .unwrap();
        let mut state = OptState::new(vec![0.0], 0.1, 0);
        let sampler = SamplerConfig {
            floor: 0.0,
            ..SamplerConfig::default()
        };
        let out =
            qgsa_ideal_step(&mut state, &obj, 1.0, 2.0, &sampler, &Evaluators::default()).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.new_theta, vec![0.0]);
        assert_eq!(out.update, Usage::ZERO);
        assert_eq!(state.stall_count, 1);
    }

    #[test]
    fn practical_decay_and_counts() {
        // at the minimum of cos, no trial point can strictly improve
        let obj = cosine();
        let mut state = OptState::new(vec![std::f64::consts::PI], 0.1, 2);
        let out = qgsa_practical_step(
            &mut state,
            &obj,
            0.1,
            false,
            &SamplerConfig::default(),
            &Evaluators::default(),
        )
        .unwrap();
        assert!(!out.accepted);
        assert_eq!(out.circuits_used(), 3);
        assert_abs_diff_eq!(state.alpha, 0.1 / 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(state.alpha, 0.0909090909, epsilon = 1e-10);

        let mut state = OptState::new(vec![std::f64::consts::PI], 0.1, 2);
        let out = qgsa_practical_step(
            &mut state,
            &obj,
            0.0,
            false,
            &SamplerConfig::default(),
            &Evaluators::default(),
        )
        .unwrap();
        assert!(!out.accepted);
        assert_eq!(state.alpha, 0.1);
        assert_eq!(out.new_theta, vec![std::f64::consts::PI]);
    }

    #[test]
    fn practical_accepting_minus_uses_two_circuits() {
        let obj = cosine();
        for seed in 0..50 {
            let mut state = OptState::new(vec![1.0], 0.1, seed);
            let out = qgsa_practical_step(
                &mut state,
                &obj,
                0.1,
                false,
                &SamplerConfig::default(),
                &Evaluators::default(),
            )
            .unwrap();
            assert!(out.accepted);
            match out.direction.unwrap() {
                Direction::Minus => assert_eq!(out.circuits_used(), 2),
                Direction::Plus => assert_eq!(out.circuits_used(), 3),
            }
        }
    }

    #[test]
    fn reuse_mu_skips_measurement() {
        let obj = cosine();
        let mut state = OptState::new(vec![1.0], 0.1, 5);
        let sampler = SamplerConfig::default();
        let evals = Evaluators::default();
        let first = qgsa_practical_step(&mut state, &obj, 0.1, true, &sampler, &evals).unwrap();
        assert_eq!(first.measure.circuits, 1);
        let second = qgsa_practical_step(&mut state, &obj, 0.1, true, &sampler, &evals).unwrap();
        assert_eq!(second.measure.circuits, 0);
    }

    #[test]
    fn gd_examples() {
        let obj = cosine();
        let mut state = OptState::new(vec![1.0], 0.1, 0);
        let out = gd_step(&mut state, &obj, Evaluator::exact()).unwrap();
        assert_abs_diff_eq!(out.new_theta[0], 1.0 + 0.1 * f64::sin(1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out.new_theta[0], 1.0841470985, epsilon = 1e-10);
        assert_eq!(out.update.circuits, 2);

        let mut state = OptState::new(vec![0.0], 0.1, 0);
        let out = gd_step(&mut state, &obj, Evaluator::exact()).unwrap();
        assert_abs_diff_eq!(out.new_theta[0], 0.0, epsilon = 1e-15);

        let obj = ansatz_objective(4, 3);
        let mut state = OptState::new(vec![0.3; 12], 0.1, 0);
        let out = gd_step(&mut state, &obj, Evaluator::exact()).unwrap();
        assert_eq!(out.update.circuits, 24);
    }

    #[test]
    fn rcd_examples() {
        let obj = cosine();
        let mut a = OptState::new(vec![1.0], 0.1, 3);
        let mut b = OptState::new(vec![1.0], 0.1, 3);
        let rcd = rcd_step(&mut a, &obj, Evaluator::exact(), None).unwrap();
        let gd = gd_step(&mut b, &obj, Evaluator::exact()).unwrap();
        assert_eq!(rcd.new_theta, gd.new_theta);
        assert_eq!(rcd.circuits_used(), 2);

        let obj = ansatz_objective(4, 3);
        let coords = |seed| {
            let mut s = OptState::new(vec![0.5; 12], 0.1, seed);
            (0..20)
                .map(|_| {
                    let before = s.theta.clone();
                    let out = rcd_step(&mut s, &obj, Evaluator::exact(), None).unwrap();
                    assert_eq!(out.circuits_used(), 2);
                    before.iter().zip(&out.new_theta).position(|(x, y)| x != y)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(coords(17), coords(17));

        let mut s = OptState::new(vec![0.5; 12], 0.1, 1);
        let out = rcd_step(&mut s, &obj, Evaluator::exact(), Some(Evaluator::exact())).unwrap();
        assert_eq!(out.circuits_used(), 3);
        assert!(out.mu_new.is_some());
    }

    #[test]
    fn spsa_gains_and_counts() {
        let p = SpsaParams::default();
        assert_abs_diff_eq!(p.step_gain(0), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.perturbation_gain(0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.step_gain(9), 0.1 / 10f64.powf(0.602), epsilon = 1e-15);
        let obj = ansatz_objective(4, 3);
        let mut s = OptState::new(vec![0.5; 12], 0.1, 1);
        let out = spsa_step(&mut s, &obj, &p, Evaluator::exact()).unwrap();
        assert_eq!(out.circuits_used(), 2);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn run_gd_on_cosine_reaches_minimum() {
        let cfg = OptimizerConfig::new(Method::Gd, 100);
        let trace = run_optimizer(&cfg, &cosine(), vec![1.0], 0).unwrap();
        assert_eq!(trace.records.len(), 101);
        assert!(trace.final_loss() <= -0.99, "{}", trace.final_loss());
        assert_eq!(trace.records.last().unwrap().circuits, 200);
    }

    #[test]
    fn zero_iterations_gives_initial_record() {
        let cfg = OptimizerConfig::new(Method::qgsa_practical(), 0);
        let trace = run_optimizer(&cfg, &cosine(), vec![1.0], 0).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].t, 0);
        assert_abs_diff_eq!(trace.records[0].loss, f64::cos(1.0), epsilon = 1e-12);
        assert_eq!(trace.ledger.circuits(), 0);
    }

    #[test]
    fn practical_run_is_reproducible() {
        let obj = ansatz_objective(3, 2);
        let mut cfg = OptimizerConfig::new(Method::qgsa_practical(), 40);
        cfg.evaluators = Evaluators {
            mu: Evaluator::Sampled { shots: 64 },
            update: Evaluator::Sampled { shots: 32 },
        };
        let a = run_optimizer(&cfg, &obj, vec![0.4; 6], 9).unwrap();
        let b = run_optimizer(&cfg, &obj, vec![0.4; 6], 9).unwrap();
        assert_eq!(a, b);
        let c = run_optimizer(&cfg, &obj, vec![0.4; 6], 10).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn stall_limit_stops_run() {
        let mut cfg = OptimizerConfig::new(Method::qgsa_practical(), 100);
        cfg.termination.stall_limit = 5;
        let trace = run_optimizer(&cfg, &cosine(), vec![std::f64::consts::PI], 0).unwrap();
        assert_eq!(trace.stop, StopReason::Stalled);
        assert_eq!(trace.records.len(), 6);
    }

    #[test]
    fn alpha_floor_stops_run() {
        let mut cfg = OptimizerConfig::new(Method::qgsa_practical(), 1000);
        cfg.termination.stall_limit = 0;
        cfg.termination.alpha_floor = 0.05;
        let trace = run_optimizer(&cfg, &cosine(), vec![std::f64::consts::PI], 0).unwrap();
        assert_eq!(trace.stop, StopReason::AlphaFloor);
        // 0.1 / 1.1^8 is the first value below 0.05
        assert_eq!(trace.records.len(), 9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::new(Method::Gd, 10);
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig::new(
            Method::QgsaIdeal {
                a: 1.0,
                lipschitz: None,
                sampler: SamplerConfig::default(),
            },
            10,
        );
        assert!(cfg.validate().is_err());
        let mut cfg = OptimizerConfig::new(Method::Gd, 10);
        cfg.evaluators.update = Evaluator::Sampled { shots: 0 };
        assert!(cfg.validate().is_err());
        assert!(run_optimizer(&OptimizerConfig::new(Method::Gd, 1), &cosine(), vec![], 0).is_err());
    }

    #[test]
    fn config_from_json() {
        let cfg: OptimizerConfig =
            serde_json::from_str(r#"{"method": "qgsa_practical", "gamma": 0.2, "iterations": 5}"#)
                .unwrap();
        assert_eq!(cfg.alpha, 0.1);
        assert!(matches!(cfg.method, Method::QgsaPractical { gamma, .. } if gamma == 0.2));
        let cfg: OptimizerConfig =
            serde_json::from_str(r#"{"method": "spsa", "c": 0.3, "iterations": 5}"#).unwrap();
        assert!(
            matches!(cfg.method, Method::Spsa { params } if params.c == 0.3 && params.a == 0.1)
        );
    }
}
