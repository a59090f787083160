//! Numerical drift checks: evaluate a generator on a finite set of states
//! and compare against a bound. A clean report is corroboration over the
//! stated region, nothing more.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::function::{witness_w, CandidateFunction};
use super::model4::closed_form_from_totals;
use super::region::RegionSpec;
use crate::crn::{apply_crn_generator, Complex, CrnState, ReactionNetwork};
use crate::error::{Error, Result};
use crate::model::{apply_population_generator, CompartmentModel, Model4Params};
use crate::population::PopulationState;

/// At most this many violations are stored in a report; the count is exact.
pub const MAX_RECORDED_VIOLATIONS: usize = 100;
/// Relative slack for floating-point comparisons against a bound.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

/// States excluded from a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExceptionalRegion {
    None,
    /// `C(n) ≤ c_max` and total mass `≤ mass_max`.
    Box {
        c_max: u64,
        mass_max: u64,
    },
    /// States where the linear drift of the one-species model with weight
    /// `alpha` exceeds `−1`.
    Model4Drift {
        params: Model4Params,
        alpha: f64,
    },
    /// `W(n) = C + α C_{>0} < k`.
    WitnessSublevel {
        alpha: f64,
        k: f64,
    },
}

impl ExceptionalRegion {
    pub fn contains(&self, n: &PopulationState) -> bool {
        match self {
            ExceptionalRegion::None => false,
            ExceptionalRegion::Box { c_max, mass_max } => {
                n.total_compartments() <= *c_max && n.total_mass() <= *mass_max
            }
            ExceptionalRegion::Model4Drift { params, alpha } => {
                let c = n.total_compartments();
                let s = n.total_mass();
                closed_form_from_totals(params, *alpha, c, s) > -1.0
            }
            ExceptionalRegion::WitnessSublevel { alpha, k } => witness_w(*alpha, n) < *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundForm {
    /// `LV ≤ −1` outside `region`.
    NegativeOutside { region: ExceptionalRegion },
    /// `LV ≤ c V + d` everywhere.
    Linear { c: f64, d: f64 },
    /// `LV ≥ 0` outside `region`.
    NonNegativeOutside { region: ExceptionalRegion },
}

impl BoundForm {
    fn region(&self) -> Option<&ExceptionalRegion> {
        match self {
            BoundForm::NegativeOutside { region } | BoundForm::NonNegativeOutside { region } => {
                Some(region)
            }
            BoundForm::Linear { .. } => None,
        }
    }

    fn bound_value(&self, v: f64) -> f64 {
        match self {
            BoundForm::NegativeOutside { .. } => -1.0,
            BoundForm::Linear { c, d } => c * v + d,
            BoundForm::NonNegativeOutside { .. } => 0.0,
        }
    }

    /// How far `drift` is on the wrong side of `bound` (positive = worse).
    fn excess(&self, drift: f64, bound: f64) -> f64 {
        match self {
            BoundForm::NonNegativeOutside { .. } => bound - drift,
            _ => drift - bound,
        }
    }
}

/// Where a violation occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ViolationState {
    Population(PopulationState),
    Crn(Complex),
    Chain(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub state: ViolationState,
    pub drift: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub function: CandidateFunction,
    pub bound: BoundForm,
    pub region_checked: String,
    pub states_checked: u64,
    /// States inside the exceptional region (not tested).
    pub states_excluded: u64,
    /// States where the function or its drift is not finite.
    pub states_skipped: u64,
    pub violation_count: u64,
    /// The first violations in region order.
    pub violations: Vec<Violation>,
    /// Largest drift over tested states (`-inf` when none were tested).
    pub max_drift: f64,
    /// Smallest drift over tested states (`+inf` when none were tested).
    pub min_drift: f64,
    /// Largest signed distance past the bound (`-inf` when none).
    pub worst_excess: f64,
    pub certificate_params: BTreeMap<String, f64>,
    /// Largest inflow truncation bound seen.
    pub truncation_error_bound: f64,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Running totals, mergeable in region order.
#[derive(Debug, Clone)]
struct Tally {
    checked: u64,
    excluded: u64,
    skipped: u64,
    violation_count: u64,
    violations: Vec<Violation>,
    max_drift: f64,
    min_drift: f64,
    worst_excess: f64,
    truncation: f64,
}

impl Tally {
    fn empty() -> Self {
        Tally {
            checked: 0,
            excluded: 0,
            skipped: 0,
            violation_count: 0,
            violations: Vec::new(),
            max_drift: f64::NEG_INFINITY,
            min_drift: f64::INFINITY,
            worst_excess: f64::NEG_INFINITY,
            truncation: 0.0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checked += other.checked;
        self.excluded += other.excluded;
        self.skipped += other.skipped;
        self.violation_count += other.violation_count;
        let room = MAX_RECORDED_VIOLATIONS.saturating_sub(self.violations.len());
        self.violations
            .extend(other.violations.into_iter().take(room));
        self.max_drift = self.max_drift.max(other.max_drift);
        self.min_drift = self.min_drift.min(other.min_drift);
        self.worst_excess = self.worst_excess.max(other.worst_excess);
        self.truncation = self.truncation.max(other.truncation);
        self
    }

    fn record(&mut self, bound: &BoundForm, state: ViolationState, drift: f64, v: f64, trunc: f64) {
        let b = bound.bound_value(v);
        if !drift.is_finite() || !b.is_finite() {
            self.skipped += 1;
            return;
        }
        self.checked += 1;
        self.max_drift = self.max_drift.max(drift);
        self.min_drift = self.min_drift.min(drift);
        self.truncation = self.truncation.max(trunc);
        let excess = bound.excess(drift, b);
        self.worst_excess = self.worst_excess.max(excess);
        let tol = RELATIVE_TOLERANCE * (1.0 + drift.abs() + b.abs()) + trunc;
        if excess > tol {
            self.violation_count += 1;
            if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                self.violations.push(Violation {
                    state,
                    drift,
                    bound: b,
                });
            }
        }
    }

    fn into_report(
        self,
        function: CandidateFunction,
        bound: BoundForm,
        region_checked: String,
        certificate_params: BTreeMap<String, f64>,
    ) -> DriftReport {
        DriftReport {
            function,
            bound,
            region_checked,
            states_checked: self.checked,
            states_excluded: self.excluded,
            states_skipped: self.skipped,
            violation_count: self.violation_count,
            violations: self.violations,
            max_drift: self.max_drift,
            min_drift: self.min_drift,
            worst_excess: self.worst_excess,
            certificate_params,
            truncation_error_bound: self.truncation,
        }
    }
}

fn bound_params(bound: &BoundForm) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    match bound {
        BoundForm::Linear { c, d } => {
            m.insert("c".into(), *c);
            m.insert("d".into(), *d);
        }
        BoundForm::NegativeOutside { region } | BoundForm::NonNegativeOutside { region } => {
            match region {
                ExceptionalRegion::Model4Drift { alpha, .. } => {
                    m.insert("alpha".into(), *alpha);
                }
                ExceptionalRegion::WitnessSublevel { alpha, k } => {
                    m.insert("alpha".into(), *alpha);
                    m.insert("k_epsilon".into(), *k);
                }
                ExceptionalRegion::Box { c_max, mass_max } => {
                    m.insert("region_c_max".into(), *c_max as f64);
                    m.insert("region_mass_max".into(), *mass_max as f64);
                }
                ExceptionalRegion::None => {}
            }
        }
    }
    m
}

fn function_params(f: &CandidateFunction, m: &mut BTreeMap<String, f64>) {
    match f {
        CandidateFunction::PopulationWeighted { alpha, .. }
        | CandidateFunction::TransienceWitness { alpha } => {
            m.insert("alpha".into(), *alpha);
        }
        CandidateFunction::Power { lambda } | CandidateFunction::CompositeStep3 { lambda, .. } => {
            m.insert("lambda".into(), *lambda);
        }
        _ => {}
    }
}

/// Evaluates `LV` on every state of `region` and tests `bound`.
///
/// `increment_bound` bounds `|V(n + e_x) − V(n)|` for the inflow truncation
/// error; it defaults to the function's own bound when it has one.
pub fn check_population_drift(
    model: &CompartmentModel,
    function: &CandidateFunction,
    bound: &BoundForm,
    region: &RegionSpec,
    increment_bound: Option<f64>,
) -> Result<DriftReport> {
    function.validate()?;
    if !function.on_population() {
        return Err(Error::UnsupportedFunction(function.label()));
    }
    let states = region.states(model.dim())?;
    check_population_drift_on(
        model,
        function,
        bound,
        &states,
        region.describe(),
        increment_bound,
    )
}

/// As [`check_population_drift`] over an explicit list of states.
pub fn check_population_drift_on(
    model: &CompartmentModel,
    function: &CandidateFunction,
    bound: &BoundForm,
    states: &[PopulationState],
    description: String,
    increment_bound: Option<f64>,
) -> Result<DriftReport> {
    let inc = increment_bound.or_else(|| function.increment_bound());
    let exceptional = bound.region();
    let eval = |m: &PopulationState| function.eval_population(m).unwrap_or(f64::NAN);
    let tally = states
        .par_chunks(256)
        .map(|chunk| -> Result<Tally> {
            let mut t = Tally::empty();
            for n in chunk {
                if exceptional.is_some_and(|r| r.contains(n)) {
                    t.excluded += 1;
                    continue;
                }
                let v = function.eval_population(n)?;
                if !v.is_finite() {
                    t.skipped += 1;
                    continue;
                }
                let g = apply_population_generator(model, eval, n, inc)?;
                t.record(
                    bound,
                    ViolationState::Population(n.clone()),
                    g.value,
                    v,
                    g.truncation_bound,
                );
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Tally::empty(), Tally::merge);
    let mut params = bound_params(bound);
    function_params(function, &mut params);
    Ok(tally.into_report(function.clone(), bound.clone(), description, params))
}

fn box_state(mut index: u64, d: usize, side: u64) -> CrnState {
    let mut v = vec![0u64; d];
    for slot in v.iter_mut() {
        *slot = index % side;
        index /= side;
    }
    Complex(v)
}

/// Largest box (in states) [`check_crn_linear_bound`] will scan.
pub const CRN_BOX_LIMIT: u64 = 100_000_000;

/// Tests `Af(x) ≤ c f(x) + d` for `f(x) = w·x` on the box `[0, x_bound]^d`.
pub fn check_crn_linear_bound(
    network: &ReactionNetwork,
    w: &[f64],
    c: f64,
    d: f64,
    x_bound: u64,
) -> Result<DriftReport> {
    let function = CandidateFunction::LinearCrn { w: w.to_vec() };
    function.validate()?;
    let dim = network.dim();
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if !(c >= 0.0 && d >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "c, d",
            reason: "bound constants must be non-negative".into(),
        });
    }
    let side = x_bound.checked_add(1).ok_or(Error::CountOverflow)?;
    let total = (0..dim)
        .try_fold(1u64, |acc, _| acc.checked_mul(side))
        .filter(|&t| t <= CRN_BOX_LIMIT)
        .ok_or_else(|| Error::InvalidParameter {
            name: "x_bound",
            reason: format!("box exceeds {CRN_BOX_LIMIT} states"),
        })?;
    let bound = BoundForm::Linear { c, d };
    let eval = |x: &CrnState| function.eval_crn(x).unwrap_or(f64::NAN);
    const CHUNK: u64 = 4096;
    let tally = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| -> Result<Tally> {
            let mut t = Tally::empty();
            for i in k * CHUNK..((k + 1) * CHUNK).min(total) {
                let x = box_state(i, dim, side);
                let fx = eval(&x);
                let a = apply_crn_generator(network, eval, &x)?;
                t.record(&bound, ViolationState::Crn(x), a, fx, 0.0);
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Tally::empty(), Tally::merge);
    let description = format!("box [0, {x_bound}]^{dim}");
    Ok(tally.into_report(function, bound.clone(), description, bound_params(&bound)))
}

/// Looks for a state `(s, …, s)` with `Af > c f + d` for `f = w·x`, trying
/// `s = 1, 2, 4, …` and finally `s_max`. Returns the first violating `s`.
pub fn scan_linear_diagonal(
    network: &ReactionNetwork,
    w: &[f64],
    c: f64,
    d: f64,
    s_max: u64,
) -> Result<Option<u64>> {
    let function = CandidateFunction::LinearCrn { w: w.to_vec() };
    function.validate()?;
    let eval = |x: &CrnState| function.eval_crn(x).unwrap_or(f64::NAN);
    let mut candidates: Vec<u64> = std::iter::successors(Some(1u64), |s| s.checked_mul(2))
        .take_while(|&s| s < s_max)
        .collect();
    candidates.push(s_max);
    for s in candidates {
        let x = Complex(vec![s; network.dim()]);
        let a = apply_crn_generator(network, eval, &x)?;
        let b = c * eval(&x) + d;
        if a - b > RELATIVE_TOLERANCE * (1.0 + a.abs() + b.abs()) {
            return Ok(Some(s));
        }
    }
    Ok(None)
}
