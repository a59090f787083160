//! The one-species model: closed-form linear drift and regime
//! classification with Lyapunov certificates.

use serde::{Deserialize, Serialize};

use super::drift::{check_population_drift, BoundForm, DriftReport, ExceptionalRegion};
use super::function::CandidateFunction;
use super::region::RegionSpec;
use crate::error::{Error, Result};
use crate::model::{CompartmentModel, Model4Params};
use crate::population::PopulationState;

/// Drift of `V = α S + C` from the totals `C` and `S`:
/// `−κ_C C(C−1)/2 + (κ_F − α(κ_E+κ_d)) S + (α κ_b − κ_E) C + κ_I + κ_I λ α`.
pub fn closed_form_from_totals(p: &Model4Params, alpha: f64, c: u64, s: u64) -> f64 {
    let (c, s) = (c as f64, s as f64);
    -p.kappa_c * c * (c - 1.0) / 2.0
        + (p.kappa_f - alpha * (p.kappa_e + p.kappa_d)) * s
        + (alpha * p.kappa_b - p.kappa_e) * c
        + p.kappa_i
        + p.kappa_i * p.lambda * alpha
}

/// Closed-form `L(αS + C)(n)` for the one-species model.
pub fn closed_form_drift_model4(p: &Model4Params, alpha: f64, n: &PopulationState) -> Result<f64> {
    if let Some(d) = n.dim() {
        if d != 1 {
            return Err(Error::NotModel4(format!("state has {d} species")));
        }
    }
    Ok(closed_form_from_totals(
        p,
        alpha,
        n.total_compartments(),
        n.total_mass(),
    ))
}

/// Same, reading the parameters from a model (fails unless its chemistry
/// is `0 ⇄ S`).
pub fn closed_form_drift_for_model(
    model: &CompartmentModel,
    alpha: f64,
    n: &PopulationState,
) -> Result<f64> {
    closed_form_drift_model4(&Model4Params::from_model(model)?, alpha, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrCondition {
    /// `κ_C > 0` and `κ_E > 0`.
    A,
    /// `κ_E² + κ_E κ_d > κ_b κ_F`.
    B,
    /// `κ_C > 0`, `κ_d > 0`, `κ_E = 0`.
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    PositiveRecurrent {
        condition: PrCondition,
    },
    Transient,
    /// `κ_d = κ_E = 0` with coagulation: total `S` never decreases.
    Degenerate,
    UnknownGap {
        conjectured_transient: bool,
    },
}

/// Bounding box of the exceptional set of a positive-recurrence
/// certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model4Region {
    /// `None` when the exceptional set is empty.
    pub c_max: Option<u64>,
    pub s_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `V = α S + C` with `LV ≤ −1` outside `{closed form > −1}`.
    PositiveRecurrence {
        alpha: f64,
        alpha_lower: f64,
        alpha_upper: Option<f64>,
        region: Model4Region,
    },
    /// `V = 1 − 1/(W + 1)` with `LV ≥ 0` where `W ≥ k_epsilon`.
    Transience {
        alpha: f64,
        alpha_lower: f64,
        alpha_upper: Option<f64>,
        epsilon: f64,
        k_analytic: f64,
        k_epsilon: f64,
    },
}

impl Certificate {
    pub fn alpha(&self) -> f64 {
        match self {
            Certificate::PositiveRecurrence { alpha, .. }
            | Certificate::Transience { alpha, .. } => *alpha,
        }
    }

    pub fn function(&self) -> CandidateFunction {
        match self {
            Certificate::PositiveRecurrence { alpha, .. } => {
                CandidateFunction::PopulationWeighted {
                    alpha: *alpha,
                    w: vec![1.0],
                }
            }
            Certificate::Transience { alpha, .. } => {
                CandidateFunction::TransienceWitness { alpha: *alpha }
            }
        }
    }

    pub fn bound(&self, params: &Model4Params) -> BoundForm {
        match self {
            Certificate::PositiveRecurrence { alpha, .. } => BoundForm::NegativeOutside {
                region: ExceptionalRegion::Model4Drift {
                    params: *params,
                    alpha: *alpha,
                },
            },
            Certificate::Transience {
                alpha, k_epsilon, ..
            } => BoundForm::NonNegativeOutside {
                region: ExceptionalRegion::WitnessSublevel {
                    alpha: *alpha,
                    k: *k_epsilon,
                },
            },
        }
    }

    /// Runs the certificate's drift check on `model` over `region`.
    ///
    /// For a truncated inflow law and the linear function, the increment
    /// bound uses the largest represented inflow content.
    pub fn check(&self, model: &CompartmentModel, region: &RegionSpec) -> Result<DriftReport> {
        let params = Model4Params::from_model(model)?;
        let inc = match self {
            Certificate::PositiveRecurrence { alpha, .. } => {
                let m = model
                    .inflow()
                    .support()
                    .iter()
                    .map(|(x, _)| x.mass())
                    .max()
                    .unwrap_or(0);
                Some(1.0 + alpha * m as f64)
            }
            Certificate::Transience { .. } => None,
        };
        check_population_drift(model, &self.function(), &self.bound(&params), region, inc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// Always true: the linear function `x` certifies non-explosivity for
    /// any parameters with finite `λ`.
    pub non_explosive: bool,
    pub regime: Regime,
    /// Every positive-recurrence condition that holds (the regime names the
    /// first).
    pub conditions_met: Vec<PrCondition>,
    /// The state shown positive recurrent, when there is one.
    pub recurrent_state: Option<String>,
    pub certificate: Option<Certificate>,
    pub bullets: Vec<String>,
    pub params: Model4Params,
}

fn check_params(p: &Model4Params) -> Result<()> {
    let named = [
        ("kappa_b", p.kappa_b),
        ("kappa_d", p.kappa_d),
        ("kappa_i", p.kappa_i),
        ("kappa_e", p.kappa_e),
        ("kappa_f", p.kappa_f),
        ("kappa_c", p.kappa_c),
    ];
    for (name, v) in named {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("{v} must be finite and non-negative"),
            });
        }
    }
    if !p.lambda.is_finite() {
        return Err(Error::InfiniteInflowMass);
    }
    if p.lambda < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("{} is negative", p.lambda),
        });
    }
    Ok(())
}

/// Bounding box of `{(C, S) : closed form > −1}` when the `S`
/// coefficient is negative.
fn pr_region(p: &Model4Params, alpha: f64) -> Model4Region {
    let a_s = p.kappa_f - alpha * (p.kappa_e + p.kappa_d);
    let q = |c: u64| closed_form_from_totals(p, alpha, c, 0);
    // q is concave in C with its integer maximum at `vertex` or `vertex + 1`.
    let vertex = if p.kappa_c > 0.0 {
        let a_c = alpha * p.kappa_b - p.kappa_e;
        ((a_c + p.kappa_c / 2.0) / p.kappa_c).max(0.0).floor() as u64
    } else {
        0
    };
    let q_max = q(vertex).max(q(vertex + 1));
    if q_max <= -1.0 {
        return Model4Region {
            c_max: None,
            s_max: None,
        };
    }
    let mut c = vertex + 1;
    while q(c + 1) > -1.0 {
        c += 1;
    }
    let c_max = Some(c);
    let s_max = Some(((q_max + 1.0) / -a_s).max(0.0).floor() as u64);
    Model4Region { c_max, s_max }
}

/// `α` for conditions (a) and (c): twice the threshold `κ_F/(κ_d + κ_E)`,
/// or `1/(κ_d + κ_E)` when `κ_F = 0`.
fn alpha_ac(p: &Model4Params) -> (f64, f64) {
    let lower = p.kappa_f / (p.kappa_d + p.kappa_e);
    let alpha = if p.kappa_f > 0.0 {
        2.0 * lower
    } else {
        1.0 / (p.kappa_d + p.kappa_e)
    };
    (alpha, lower)
}

/// `α` for condition (b): midpoint of `(κ_F/(κ_E+κ_d), κ_E/κ_b)`.
fn alpha_b(p: &Model4Params) -> (f64, f64, Option<f64>) {
    let lower = p.kappa_f / (p.kappa_e + p.kappa_d);
    if p.kappa_b > 0.0 {
        let upper = p.kappa_e / p.kappa_b;
        ((lower + upper) / 2.0, lower, Some(upper))
    } else {
        let alpha = if lower > 0.0 { 2.0 * lower } else { 1.0 };
        (alpha, lower, None)
    }
}

/// Proof's lower bound on `(W+1)(W+2) LV` in terms of `n_0` and `C_{>0}`.
fn witness_lower_bound(p: &Model4Params, alpha: f64, n0: f64, cp: f64) -> f64 {
    let w = n0 + (1.0 + alpha) * cp;
    let mut b = p.kappa_f * cp + p.kappa_i;
    if n0 > 0.0 {
        b += alpha * p.kappa_b * n0 * (w + 2.0) / (w + 1.0 + alpha);
        b -= p.kappa_e * n0 * (w + 2.0) / w;
    }
    if cp > 0.0 {
        b -= (1.0 + alpha) * p.kappa_e * cp * (w + 2.0) / (w - alpha);
        b -= alpha * p.kappa_d * cp * (w + 2.0) / (w + 1.0 - alpha);
    }
    b
}

/// Pairs scanned when refining `k_ε` below the analytic value.
const WITNESS_SCAN_LIMIT: u64 = 20_000_000;

fn transience_certificate(p: &Model4Params) -> Certificate {
    let lower = p.kappa_e / p.kappa_b;
    let upper =
        (p.kappa_e + p.kappa_d > 0.0).then(|| (p.kappa_f - p.kappa_e) / (p.kappa_e + p.kappa_d));
    let alpha = match upper {
        Some(u) => (lower + u) / 2.0,
        None => lower + 1.0,
    };

    let eps_n0 = if p.kappa_e > 0.0 {
        (alpha * p.kappa_b - p.kappa_e) / (alpha * p.kappa_b + p.kappa_e)
    } else {
        1.0
    };
    let den = (1.0 + alpha) * p.kappa_e + alpha * p.kappa_d;
    let eps_cp = if den > 0.0 {
        (p.kappa_f - den) / den
    } else {
        f64::INFINITY
    };
    let epsilon = eps_n0.min(eps_cp).min(1.0) / 2.0;

    // W beyond which each ratio is within ε of 1.
    let e = epsilon;
    let k_analytic = [
        ((1.0 - e) * (1.0 + alpha) - 2.0) / e,
        2.0 / e,
        (2.0 + alpha * (1.0 + e)) / e,
        (2.0 - (1.0 + e) * (1.0 - alpha)) / e,
    ]
    .into_iter()
    .fold(0.0, f64::max)
    .ceil();

    // Below k_analytic, scan every (n_0, C_{>0}) pair for sign failures of
    // the bound, and keep the smallest level above all of them.
    let n0_max = k_analytic as u64;
    let cp_max = (k_analytic / (1.0 + alpha)).floor() as u64;
    let k_epsilon = if (n0_max + 1).saturating_mul(cp_max + 1) <= WITNESS_SCAN_LIMIT {
        let mut worst_bad = f64::NEG_INFINITY;
        for n0 in 0..=n0_max {
            for cp in 0..=cp_max {
                let (a, b) = (n0 as f64, cp as f64);
                let w = a + (1.0 + alpha) * b;
                if w >= k_analytic {
                    break;
                }
                if witness_lower_bound(p, alpha, a, b) < 0.0 {
                    worst_bad = worst_bad.max(w);
                }
            }
        }
        if worst_bad == f64::NEG_INFINITY {
            0.0
        } else {
            let mut next = k_analytic;
            for n0 in 0..=n0_max {
                for cp in 0..=cp_max {
                    let w = n0 as f64 + (1.0 + alpha) * cp as f64;
                    if w > worst_bad && w < next {
                        next = w;
                    }
                }
            }
            next
        }
    } else {
        k_analytic
    };

    Certificate::Transience {
        alpha,
        alpha_lower: lower,
        alpha_upper: upper,
        epsilon,
        k_analytic,
        k_epsilon,
    }
}

fn bullets_ab(p: &Model4Params) -> Vec<String> {
    let b = if p.kappa_i > 0.0 && (p.kappa_b > 0.0 || !p.inflow_is_delta_zero) {
        "all states are reachable from the state with no compartments and hence positive recurrent"
    } else if p.kappa_i > 0.0 {
        "all states with zero S are positive recurrent; all other states are transient and are \
         absorbed by the zero-S states in finite expected time"
    } else {
        "all states with a positive number of compartments are transient, but are absorbed by the \
         state with zero compartments in finite expected time"
    };
    vec![b.to_string()]
}

fn bullets_c(p: &Model4Params) -> Vec<String> {
    let b = if p.kappa_i * p.kappa_b > 0.0
        || p.kappa_f * p.kappa_b > 0.0
        || (p.kappa_i > 0.0 && !p.inflow_is_delta_zero)
    {
        "all states other than the state with no compartments are reachable from the state with \
         one empty compartment and hence positive recurrent"
    } else if p.kappa_i > 0.0 {
        "all states with zero S and a positive number of compartments are positive recurrent; all \
         other states are transient and are absorbed by the zero-S states in finite expected time"
    } else if p.kappa_b > 0.0 {
        "all states with one compartment are positive recurrent; all other states are transient \
         and are absorbed by the one-compartment states in finite expected time"
    } else {
        "the state with no compartments and the state with one empty compartment are absorbing; \
         all other states are transient and are absorbed by the state with one empty compartment \
         in finite expected time"
    };
    vec![b.to_string()]
}

/// Classifies the one-species model by the recurrence and transience
/// conditions, attaching a drift certificate where one applies.
pub fn classify_regime(p: &Model4Params) -> Result<Classification> {
    check_params(p)?;
    let (kb, kd, ki, ke, kf, kc) = (
        p.kappa_b, p.kappa_d, p.kappa_i, p.kappa_e, p.kappa_f, p.kappa_c,
    );
    let mut conditions = Vec::new();
    if kc > 0.0 && ke > 0.0 {
        conditions.push(PrCondition::A);
    }
    if ke * ke + ke * kd > kb * kf {
        conditions.push(PrCondition::B);
    }
    if kc > 0.0 && kd > 0.0 && ke == 0.0 {
        conditions.push(PrCondition::C);
    }

    let mut out = Classification {
        non_explosive: true,
        regime: Regime::Degenerate,
        conditions_met: conditions.clone(),
        recurrent_state: None,
        certificate: None,
        bullets: Vec::new(),
        params: *p,
    };

    if let Some(&cond) = conditions.first() {
        let (alpha, lower, upper) = match cond {
            PrCondition::A | PrCondition::C => {
                let (a, l) = alpha_ac(p);
                (a, l, None)
            }
            PrCondition::B => alpha_b(p),
        };
        out.regime = Regime::PositiveRecurrent { condition: cond };
        out.certificate = Some(Certificate::PositiveRecurrence {
            alpha,
            alpha_lower: lower,
            alpha_upper: upper,
            region: pr_region(p, alpha),
        });
        if cond == PrCondition::C {
            out.recurrent_state = Some("one empty compartment".into());
            out.bullets = bullets_c(p);
        } else {
            out.recurrent_state = Some("no compartments".into());
            out.bullets = bullets_ab(p);
        }
    } else if kc > 0.0 && kd == 0.0 && ke == 0.0 {
        out.regime = Regime::Degenerate;
        out.bullets =
            vec!["the total number of S molecules cannot decrease; no claim is made".into()];
    } else if kc == 0.0 && ki > 0.0 && (kf - ke) * kb > (ke + kd) * ke {
        out.regime = Regime::Transient;
        out.certificate = Some(transience_certificate(p));
        out.bullets = vec!["all states are transient".into()];
    } else {
        let conjectured = ki > 0.0
            && kc == 0.0
            && kb * kf > ke * ke + ke * kd
            && ke * ke + ke * kd >= kb * kf - kb * ke;
        out.regime = Regime::UnknownGap {
            conjectured_transient: conjectured,
        };
        out.bullets = vec![if conjectured {
            "parameters lie in the gap between the recurrence and transience conditions, in the \
             band conjectured transient; no claim is made"
                .into()
        } else {
            "parameters lie outside every proven regime; no claim is made".into()
        }];
    }
    Ok(out)
}
