//! Pauli-sum observables and their coefficient normalization.
//!
//! Text form: `-0.5*XZI + 1.0*ZII`. A term is an optional coefficient,
//! `*`, then one Pauli letter per qubit. Terms are joined by `+` or `-`
//! (ASCII or U+2212), and whitespace is ignored.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{QgsaError, Result};
use crate::statevector::{expval_pauli, sample_from_mean, Pauli, PauliString, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub letters: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, letters: PauliString) -> Self {
        Self {
            coefficient,
            letters,
        }
    }
}

/// `sum_i c_i P_i` with duplicate strings merged. `c_star` is the divisor
/// applied by [`Observable::normalize`] (1 when never scaled).
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    c_star: f64,
}

impl Observable {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(QgsaError::EmptyObservable);
        }
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(terms.len());
        for term in terms {
            if term.letters.len() != n_qubits {
                return Err(QgsaError::LengthMismatch {
                    expected: n_qubits,
                    actual: term.letters.len(),
                });
            }
            match merged.iter_mut().find(|t| t.letters == term.letters) {
                Some(existing) => existing.coefficient += term.coefficient,
                None => merged.push(term),
            }
        }
        Ok(Self {
            n_qubits,
            terms: merged,
            c_star: 1.0,
        })
    }

    /// `1.0 * Z` on `qubit`.
    pub fn single_z(n_qubits: usize, qubit: usize) -> Result<Self> {
        if qubit >= n_qubits {
            return Err(QgsaError::QubitIndex {
                index: qubit,
                n_qubits,
            });
        }
        Self::new(
            n_qubits,
            vec![PauliTerm::new(1.0, PauliString::single_z(n_qubits, qubit))],
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    /// `sum_i |c_i|`, an upper bound on `|<H>|`.
    pub fn abs_coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Divides every coefficient by `max_i |c_i|`. Applying it twice is a
    /// no-op, and `c_star` accumulates the total divisor.
    pub fn normalize(&self) -> Result<Self> {
        let max = self
            .terms
            .iter()
            .map(|t| t.coefficient.abs())
            .fold(0.0, f64::max);
        if max == 0.0 {
            return Err(QgsaError::ZeroObservable);
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coefficient / max, t.letters.clone()))
                .collect(),
            c_star: self.c_star * max,
        })
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(QgsaError::LengthMismatch {
                expected: self.n_qubits,
                actual: state.n_qubits(),
            });
        }
        Ok(())
    }

    /// Exact `<psi|H|psi>`.
    pub fn expval(&self, state: &StateVector) -> Result<f64> {
        self.check_state(state)?;
        self.terms.iter().try_fold(0.0, |acc, t| {
            Ok(acc + t.coefficient * expval_pauli(state, &t.letters)?)
        })
    }

    /// Shot estimate with `shots_per_term` shots on every term. Returns the
    /// estimate and the number of circuit executions (one per term).
    pub fn sample_expval<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        shots_per_term: u64,
        rng: &mut R,
    ) -> Result<(f64, usize)> {
        if shots_per_term == 0 {
            return Err(QgsaError::ZeroShots);
        }
        self.check_state(state)?;
        let mut estimate = 0.0;
        for t in &self.terms {
            let mean = expval_pauli(state, &t.letters)?;
            estimate += t.coefficient * sample_from_mean(mean, shots_per_term, rng);
        }
        Ok((estimate, self.terms.len()))
    }
}

/// Free-function form of [`Observable::expval`].
pub fn expval(obs: &Observable, state: &StateVector) -> Result<f64> {
    obs.expval(state)
}

/// Free-function form of [`Observable::sample_expval`].
pub fn sample_expval_obs<R: Rng + ?Sized>(
    obs: &Observable,
    state: &StateVector,
    shots_per_term: u64,
    rng: &mut R,
) -> Result<(f64, usize)> {
    obs.sample_expval(state, shots_per_term, rng)
}

pub fn normalize(obs: &Observable) -> Result<Observable> {
    obs.normalize()
}

/// Sum of `n_terms` random non-identity Pauli strings with coefficients
/// uniform in `[-1, 1]`. Repeated strings are merged, so fewer terms may
/// remain.
pub fn random_observable<R: Rng + ?Sized>(
    n_qubits: usize,
    n_terms: usize,
    rng: &mut R,
) -> Result<Observable> {
    const LETTERS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    if n_qubits == 0 {
        return Err(QgsaError::QubitCount(0));
    }
    let terms = (0..n_terms)
        .map(|_| {
            let mut letters: Vec<Pauli> = (0..n_qubits)
                .map(|_| LETTERS[rng.random_range(0..4)])
                .collect();
            if letters.iter().all(|&p| p == Pauli::I) {
                letters[rng.random_range(0..n_qubits)] = LETTERS[rng.random_range(1..4)];
            }
            PauliTerm::new(rng.random_range(-1.0..=1.0), PauliString::new(letters))
        })
        .collect();
    Observable::new(n_qubits, terms)
}

impl FromStr for Observable {
    type Err = QgsaError;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| if c == '\u{2212}' { '-' } else { c })
            .collect();
        if chars.is_empty() {
            return Err(QgsaError::Parse("empty observable".into()));
        }
        let mut pos = 0;
        let mut terms = Vec::new();
        while pos < chars.len() {
            let mut sign = 1.0;
            match chars[pos] {
                '+' => pos += 1,
                '-' => {
                    sign = -1.0;
                    pos += 1;
                }
                _ if terms.is_empty() => {}
                c => {
                    return Err(QgsaError::Parse(format!(
                        "expected '+' or '-', found {c:?}"
                    )))
                }
            }
            let coefficient = if pos < chars.len()
                && (chars[pos].is_ascii_digit() || chars[pos] == '.')
            {
                let start = pos;
                while pos < chars.len() {
                    let c = chars[pos];
                    let exp_sign = (c == '+' || c == '-') && matches!(chars[pos - 1], 'e' | 'E');
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        pos += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..pos].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| QgsaError::Parse(format!("bad coefficient {text:?}")))?;
                if chars.get(pos) != Some(&'*') {
                    return Err(QgsaError::Parse(format!("expected '*' after {text}")));
                }
                pos += 1;
                value
            } else {
                1.0
            };
            let start = pos;
            while pos < chars.len() && chars[pos] != '+' && chars[pos] != '-' {
                pos += 1;
            }
            let letters = chars[start..pos]
                .iter()
                .map(|&c| Pauli::try_from(c))
                .collect::<Result<Vec<_>>>()?;
            if letters.is_empty() {
                return Err(QgsaError::Parse("term without Pauli letters".into()));
            }
            terms.push(PauliTerm::new(
                sign * coefficient,
                PauliString::new(letters),
            ));
        }
        let n_qubits = terms[0].letters.len();
        Observable::new(n_qubits, terms)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            let c = t.coefficient;
            match (i, c.is_sign_negative()) {
                (0, false) => write!(f, "{c}*{}", t.letters)?,
                (0, true) => write!(f, "-{}*{}", -c, t.letters)?,
                (_, false) => write!(f, " + {c}*{}", t.letters)?,
                (_, true) => write!(f, " - {}*{}", -c, t.letters)?,
            }
        }
        Ok(())
    }
}
