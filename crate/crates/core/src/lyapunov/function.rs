//! Candidate Lyapunov functions.

use serde::{Deserialize, Serialize};

use crate::crn::{Complex, CrnState};
use crate::error::{Error, Result};
use crate::population::PopulationState;

/// Parametric candidate functions. Each kind lives on one or more of three
/// domains: plain network states, population states, and the
/// one-dimensional substrate chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateFunction {
    /// `f(x) = w·x`.
    LinearCrn { w: Vec<f64> },
    /// `V(n) = C(n) + α Σ_x n_x (w·x)`.
    PopulationWeighted { alpha: f64, w: Vec<f64> },
    /// `g(x) = x^λ`.
    Power { lambda: f64 },
    /// `f(x) = 1 / ln(x + 2)`.
    RecipLog,
    /// `g(e, s) = e + ln(s + 1)`.
    LogShift,
    /// `V(n) = E(n) + ln(S(n) + C(n) + 1)` with totals over all compartments.
    EnzymeLog { enzyme: usize, substrate: usize },
    /// `V(n) = S(n)^λ + ln(Ŝ(n) + C(n))` where `S` counts substrate sharing a
    /// compartment with enzyme and `Ŝ` the rest. Defined for `C(n) ≥ 1`.
    CompositeStep3 {
        lambda: f64,
        enzyme: usize,
        substrate: usize,
    },
    /// `V(n) = 1 − 1/(W(n) + 1)` with `W = C + α C_{>0}`.
    TransienceWitness { alpha: f64 },
    /// Finite table over population states; other states take `default`.
    Table {
        #[serde(default)]
        entries: Vec<(PopulationState, f64)>,
        #[serde(default)]
        default: f64,
    },
    /// Finite table over network states; other states take `default`.
    CrnTable {
        #[serde(default)]
        entries: Vec<(Complex, f64)>,
        #[serde(default)]
        default: f64,
    },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} must be positive and finite"),
        })
    }
}

fn positive_vector(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidParameter {
            name: "w",
            reason: "empty weight vector".into(),
        });
    }
    w.iter().try_for_each(|&v| positive("w", v))
}

fn exponent(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("{lambda} must lie in (0, 1)"),
        })
    }
}

fn dot(w: &[f64], x: &Complex) -> f64 {
    w.iter().zip(x.counts()).map(|(a, &b)| a * b as f64).sum()
}

impl CandidateFunction {
    pub fn label(&self) -> &'static str {
        match self {
            CandidateFunction::LinearCrn { .. } => "linear_crn",
            CandidateFunction::PopulationWeighted { .. } => "population_weighted",
            CandidateFunction::Power { .. } => "power",
            CandidateFunction::RecipLog => "recip_log",
            CandidateFunction::LogShift => "log_shift",
            CandidateFunction::EnzymeLog { .. } => "enzyme_log",
            CandidateFunction::CompositeStep3 { .. } => "composite_step3",
            CandidateFunction::TransienceWitness { .. } => "transience_witness",
            CandidateFunction::Table { .. } => "table",
            CandidateFunction::CrnTable { .. } => "crn_table",
        }
    }

    /// A constant function (empty table).
    pub fn constant(value: f64) -> Self {
        CandidateFunction::Table {
            entries: Vec::new(),
            default: value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CandidateFunction::LinearCrn { w } => positive_vector(w),
            CandidateFunction::PopulationWeighted { alpha, w } => {
                positive("alpha", *alpha)?;
                positive_vector(w)
            }
            CandidateFunction::Power { lambda } => exponent(*lambda),
            CandidateFunction::CompositeStep3 {
                lambda,
                enzyme,
                substrate,
            } => {
                exponent(*lambda)?;
                distinct(*enzyme, *substrate)
            }
            CandidateFunction::EnzymeLog { enzyme, substrate } => distinct(*enzyme, *substrate),
            CandidateFunction::TransienceWitness { alpha } => positive("alpha", *alpha),
            CandidateFunction::Table { entries, default } => {
                finite_table(entries.iter().map(|(_, v)| *v), *default)
            }
            CandidateFunction::CrnTable { entries, default } => {
                finite_table(entries.iter().map(|(_, v)| *v), *default)
            }
            CandidateFunction::RecipLog | CandidateFunction::LogShift => Ok(()),
        }
    }

    /// Whether the function can be evaluated on population states.
    pub fn on_population(&self) -> bool {
        matches!(
            self,
            CandidateFunction::PopulationWeighted { .. }
                | CandidateFunction::EnzymeLog { .. }
                | CandidateFunction::CompositeStep3 { .. }
                | CandidateFunction::TransienceWitness { .. }
                | CandidateFunction::Table { .. }
        )
    }

    pub fn eval_population(&self, n: &PopulationState) -> Result<f64> {
        match self {
            CandidateFunction::PopulationWeighted { alpha, w } => {
                let mut acc = 0.0;
                for (x, nx) in n.iter() {
                    if x.dim() != w.len() {
                        return Err(Error::DimensionMismatch {
                            expected: w.len(),
                            got: x.dim(),
                        });
                    }
                    acc += nx as f64 * (1.0 + alpha * dot(w, x));
                }
                Ok(acc)
            }
            CandidateFunction::EnzymeLog { enzyme, substrate } => {
                let e = n.species_total(*enzyme)? as f64;
                let s = n.species_total(*substrate)? as f64;
                let c = n.total_compartments() as f64;
                Ok(e + (s + c + 1.0).ln())
            }
            CandidateFunction::CompositeStep3 {
                lambda,
                enzyme,
                substrate,
            } => {
                let s = n.substrate_with_enzyme(*enzyme, *substrate)? as f64;
                let s_hat = n.substrate_without_enzyme(*enzyme, *substrate)? as f64;
                let c = n.total_compartments() as f64;
                Ok(s.powf(*lambda) + (s_hat + c).ln())
            }
            CandidateFunction::TransienceWitness { alpha } => {
                let w = witness_w(*alpha, n);
                Ok(1.0 - 1.0 / (w + 1.0))
            }
            CandidateFunction::Table { entries, default } => Ok(entries
                .iter()
                .find(|(s, _)| s == n)
                .map(|(_, v)| *v)
                .unwrap_or(*default)),
            _ => Err(Error::UnsupportedFunction(self.label())),
        }
    }

    pub fn eval_crn(&self, x: &CrnState) -> Result<f64> {
        match self {
            CandidateFunction::LinearCrn { w } => {
                if w.len() != x.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: w.len(),
                        got: x.dim(),
                    });
                }
                Ok(dot(w, x))
            }
            CandidateFunction::LogShift => {
                if x.dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: x.dim(),
                    });
                }
                Ok(x.get(0) as f64 + (x.get(1) as f64 + 1.0).ln())
            }
            CandidateFunction::Power { .. } | CandidateFunction::RecipLog if x.dim() == 1 => {
                self.eval_chain(x.get(0))
            }
            CandidateFunction::CrnTable { entries, default } => Ok(entries
                .iter()
                .find(|(s, _)| s == x)
                .map(|(_, v)| *v)
                .unwrap_or(*default)),
            _ => Err(Error::UnsupportedFunction(self.label())),
        }
    }

    pub fn eval_chain(&self, x: u64) -> Result<f64> {
        let xf = x as f64;
        match self {
            CandidateFunction::Power { lambda } => Ok(xf.powf(*lambda)),
            CandidateFunction::RecipLog => Ok(1.0 / (xf + 2.0).ln()),
            CandidateFunction::LinearCrn { w } if w.len() == 1 => Ok(w[0] * xf),
            CandidateFunction::CrnTable { .. } => self.eval_crn(&Complex(vec![x])),
            _ => Err(Error::UnsupportedFunction(self.label())),
        }
    }

    /// A bound on `|V(n + e_x) − V(n)|` over all states and contents, when
    /// one exists independently of the inflow law.
    pub fn increment_bound(&self) -> Option<f64> {
        match self {
            CandidateFunction::TransienceWitness { .. } => Some(1.0),
            CandidateFunction::Table { entries, default } => {
                let m = entries
                    .iter()
                    .map(|(_, v)| v.abs())
                    .fold(default.abs(), f64::max);
                Some(2.0 * m)
            }
            _ => None,
        }
    }

    /// The level variable `W` of a transience witness.
    pub fn witness_level(&self, n: &PopulationState) -> Option<f64> {
        match self {
            CandidateFunction::TransienceWitness { alpha } => Some(witness_w(*alpha, n)),
            _ => None,
        }
    }
}

fn distinct(enzyme: usize, substrate: usize) -> Result<()> {
    if enzyme == substrate {
        Err(Error::InvalidParameter {
            name: "substrate",
            reason: "enzyme and substrate must be different species".into(),
        })
    } else {
        Ok(())
    }
}

fn finite_table<I: Iterator<Item = f64>>(mut values: I, default: f64) -> Result<()> {
    if default.is_finite() && values.all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "table",
            reason: "table values must be finite".into(),
        })
    }
}

/// `W(n) = C(n) + α C_{>0}(n)`.
pub fn witness_w(alpha: f64, n: &PopulationState) -> f64 {
    n.total_compartments() as f64 + alpha * n.nonempty_compartments() as f64
}
