//! Exact event-driven simulation of the compartment population process.
//!
//! The engine is the direct method over aggregated per-content channels: all
//! compartments sharing a content are exchangeable, so the state is the map
//! content → multiplicity and no per-compartment identity is kept.
//!
//! Channel selection draws one uniform scaled by the total rate and scans
//! inflow, then contents in canonical order (internal reactions in
//! declaration order, exit, fragmentation), then coagulation. A coagulation
//! draw then picks two distinct compartments uniformly, which gives each
//! same-content pair weight `C(n_x, 2)` and each distinct pair `n_x n_y`.
//! The scan is linear in the number of distinct contents; a sum tree over
//! contents would make it logarithmic if supports ever grow large.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crn::{mass_action_rate_unchecked, Complex, CrnState};
use crate::error::{Error, Result};
use crate::kernel::{binomial_pmf, sample_fragmentation};
use crate::model::CompartmentModel;
use crate::population::PopulationState;
use crate::rng::{self, substream_seed, SimRng};

/// Inter-event window length used by the explosion heuristic.
pub const EXPLOSION_WINDOW: usize = 1_000;
/// Contraction of the mean inter-event time that flags a suspected explosion.
pub const EXPLOSION_CONTRACTION: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Number of compartments.
    Compartments,
    /// Total of one species over all compartments.
    SpeciesTotal(usize),
    /// Substrate in compartments without enzyme.
    SubstrateWithoutEnzyme,
    /// Molecules of every species over all compartments.
    TotalMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// `observable <= value` or `observable >= value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub observable: Observable,
    pub comparison: Comparison,
    pub value: u64,
}

impl Predicate {
    /// No compartments at all.
    pub fn empty_population() -> Self {
        Predicate {
            observable: Observable::Compartments,
            comparison: Comparison::AtMost,
            value: 0,
        }
    }

    pub fn at_most(observable: Observable, value: u64) -> Self {
        Predicate {
            observable,
            comparison: Comparison::AtMost,
            value,
        }
    }

    pub fn at_least(observable: Observable, value: u64) -> Self {
        Predicate {
            observable,
            comparison: Comparison::AtLeast,
            value,
        }
    }

    fn holds(&self, tally: &Tally) -> bool {
        let v = tally.observe(self.observable);
        match self.comparison {
            Comparison::AtMost => v <= self.value,
            Comparison::AtLeast => v >= self.value,
        }
    }

    fn holds_crn(&self, x: &CrnState) -> Result<bool> {
        let v = match self.observable {
            Observable::SpeciesTotal(i) if i < x.dim() => x.get(i),
            Observable::TotalMass => x.mass(),
            Observable::SpeciesTotal(i) => {
                return Err(Error::InvalidSpeciesIndex {
                    index: i,
                    species: x.dim(),
                })
            }
            _ => {
                return Err(Error::UnsupportedFunction(
                    "compartment observable on a plain network",
                ))
            }
        };
        Ok(match self.comparison {
            Comparison::AtMost => v <= self.value,
            Comparison::AtLeast => v >= self.value,
        })
    }

    pub(crate) fn reached_crn(&self, x: &CrnState) -> Result<bool> {
        self.holds_crn(x)
    }
}

/// When a run ends. At least one bound must be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    pub t_max: Option<f64>,
    pub event_budget: Option<u64>,
    /// Stop (as absorbed) as soon as this holds.
    pub absorbing: Option<Predicate>,
    /// Stop (as bound hit) as soon as this holds.
    pub observable_bound: Option<Predicate>,
}

impl StopCondition {
    pub fn time(t_max: f64) -> Self {
        StopCondition {
            t_max: Some(t_max),
            ..Default::default()
        }
    }

    pub fn budget(events: u64) -> Self {
        StopCondition {
            event_budget: Some(events),
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, events: u64) -> Self {
        self.event_budget = Some(events);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max.is_none()
            && self.event_budget.is_none()
            && self.absorbing.is_none()
            && self.observable_bound.is_none()
        {
            return Err(Error::UnboundedStop);
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "t_max",
                    reason: format!("{t} must be positive"),
                });
            }
        }
        if self.event_budget == Some(0) {
            return Err(Error::InvalidParameter {
                name: "event_budget",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Time,
    Budget,
    Absorbed,
    BoundHit,
}

/// A first-passage observation: `predicate` is tracked from time `after`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSpec {
    pub name: String,
    pub predicate: Predicate,
    #[serde(default)]
    pub after: f64,
}

/// Outcome of a [`HitSpec`]: the first time at or after `after` that the
/// predicate held, and the number of maximal intervals on which it held that
/// reach into `[after, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRecord {
    pub name: String,
    pub first_time: Option<f64>,
    pub visits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Times at which observables are recorded (sorted on use).
    pub grid: Vec<f64>,
    pub hits: Vec<HitSpec>,
    /// Keep one [`EventRecord`] per event.
    pub record_events: bool,
}

impl RunOptions {
    pub fn with_grid(grid: &[f64]) -> Self {
        RunOptions {
            grid: grid.to_vec(),
            ..Default::default()
        }
    }
}

/// Observables at one grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub time: f64,
    pub compartments: u64,
    pub species_totals: Vec<u64>,
    pub substrate_without_enzyme: Option<u64>,
}

/// Event kinds in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Inflow,
    Internal,
    Exit,
    Fragmentation,
    Coagulation,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Inflow => "inflow",
            EventKind::Internal => "internal",
            EventKind::Exit => "exit",
            EventKind::Fragmentation => "fragmentation",
            EventKind::Coagulation => "coagulation",
        }
    }
}

/// One logged event with the observables right after it and the contents
/// it removed from the state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub compartments: u64,
    pub species_totals: Vec<u64>,
    pub substrate_without_enzyme: Option<u64>,
    pub touched: Vec<Complex>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub final_state: PopulationState,
    pub final_time: f64,
    pub event_count: u64,
    pub stop_reason: StopReason,
    pub suspected_explosion: bool,
    pub overflowed: bool,
    pub grid_observables: Vec<GridPoint>,
    pub hit_times: Vec<HitRecord>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventRecord>,
}

impl SimulationReport {
    pub fn final_compartments(&self) -> u64 {
        self.final_state.total_compartments()
    }

    pub fn final_mass(&self) -> u64 {
        self.final_state.total_mass()
    }
}

/// Incrementally maintained observables.
#[derive(Debug, Clone, PartialEq)]
struct Tally {
    compartments: u64,
    totals: Vec<u64>,
    mass: u64,
    layout: Option<(usize, usize)>,
    substrate_without_enzyme: u64,
}

impl Tally {
    fn new(n: &PopulationState, d: usize, layout: Option<(usize, usize)>) -> Result<Self> {
        let mut t = Tally {
            compartments: 0,
            totals: vec![0; d],
            mass: 0,
            layout,
            substrate_without_enzyme: 0,
        };
        for (x, nx) in n.iter() {
            for _ in 0..nx.min(1) {
                t.add_many(x, nx)?;
            }
        }
        Ok(t)
    }

    fn add_many(&mut self, x: &Complex, k: u64) -> Result<()> {
        let ov = || Error::CountOverflow;
        self.compartments = self.compartments.checked_add(k).ok_or_else(ov)?;
        for (t, &xi) in self.totals.iter_mut().zip(x.counts()) {
            *t = t
                .checked_add(xi.checked_mul(k).ok_or_else(ov)?)
                .ok_or_else(ov)?;
        }
        let m = x.mass().checked_mul(k).ok_or_else(ov)?;
        self.mass = self.mass.checked_add(m).ok_or_else(ov)?;
        if let Some((e, s)) = self.layout {
            if x.get(e) == 0 {
                let add = x.get(s).checked_mul(k).ok_or_else(ov)?;
                self.substrate_without_enzyme = self
                    .substrate_without_enzyme
                    .checked_add(add)
                    .ok_or_else(ov)?;
            }
        }
        Ok(())
    }

    fn add(&mut self, x: &Complex) -> Result<()> {
        self.add_many(x, 1)
    }

    fn remove(&mut self, x: &Complex) {
        self.compartments -= 1;
        for (t, &xi) in self.totals.iter_mut().zip(x.counts()) {
            *t -= xi;
        }
        self.mass -= x.mass();
        if let Some((e, s)) = self.layout {
            if x.get(e) == 0 {
                self.substrate_without_enzyme -= x.get(s);
            }
        }
    }

    fn observe(&self, o: Observable) -> u64 {
        match o {
            Observable::Compartments => self.compartments,
            Observable::SpeciesTotal(i) => self.totals.get(i).copied().unwrap_or(0),
            Observable::SubstrateWithoutEnzyme => self.substrate_without_enzyme,
            Observable::TotalMass => self.mass,
        }
    }

    fn s_hat(&self) -> Option<u64> {
        self.layout.map(|_| self.substrate_without_enzyme)
    }

    fn grid_point(&self, time: f64) -> GridPoint {
        GridPoint {
            time,
            compartments: self.compartments,
            species_totals: self.totals.clone(),
            substrate_without_enzyme: self.s_hat(),
        }
    }
}

struct HitState {
    spec: HitSpec,
    first_time: Option<f64>,
    visits: u64,
    /// Whether the current predicate-true interval was already counted.
    counted: bool,
}

impl HitState {
    fn new(spec: HitSpec) -> Self {
        HitState {
            spec,
            first_time: None,
            visits: 0,
            counted: false,
        }
    }

    /// The state held on `[start, end)` (or `[start, end]` when `closed`)
    /// with predicate value `holds`.
    fn segment(&mut self, holds: bool, start: f64, end: f64, closed: bool) {
        if !holds {
            self.counted = false;
            return;
        }
        let reaches = if closed {
            end >= self.spec.after
        } else {
            end > self.spec.after
        };
        if reaches && !self.counted {
            self.counted = true;
            self.visits += 1;
            if self.first_time.is_none() {
                self.first_time = Some(start.max(self.spec.after));
            }
        }
    }

    fn record(self) -> HitRecord {
        HitRecord {
            name: self.spec.name,
            first_time: self.first_time,
            visits: self.visits,
        }
    }
}

/// Tracks inter-event times for the explosion heuristic.
struct ContractionMonitor {
    first_sum: f64,
    first_len: usize,
    trailing: VecDeque<f64>,
}

impl ContractionMonitor {
    fn new() -> Self {
        ContractionMonitor {
            first_sum: 0.0,
            first_len: 0,
            trailing: VecDeque::with_capacity(EXPLOSION_WINDOW + 1),
        }
    }

    fn push(&mut self, dt: f64) {
        if self.first_len < EXPLOSION_WINDOW {
            self.first_sum += dt;
            self.first_len += 1;
        }
        self.trailing.push_back(dt);
        if self.trailing.len() > EXPLOSION_WINDOW {
            self.trailing.pop_front();
        }
    }

    /// Initial-window mean over trailing-window mean, once at least two full
    /// windows of events have been seen.
    fn contraction(&self, events: u64) -> Option<f64> {
        if events < 2 * EXPLOSION_WINDOW as u64 {
            return None;
        }
        let first = self.first_sum / self.first_len as f64;
        let last = self.trailing.iter().sum::<f64>() / self.trailing.len() as f64;
        Some(if last > 0.0 {
            first / last
        } else {
            f64::INFINITY
        })
    }
}

fn suspected_explosion(
    reason: StopReason,
    final_time: f64,
    t_max: Option<f64>,
    events: u64,
    monitor: &ContractionMonitor,
) -> bool {
    reason == StopReason::Budget
        && t_max.is_none_or(|t| final_time < t)
        && monitor
            .contraction(events)
            .is_some_and(|c| c >= EXPLOSION_CONTRACTION)
}

/// Simulates one trajectory, recording observables at `grid` times.
pub fn run_trajectory(
    model: &CompartmentModel,
    initial: &PopulationState,
    stop: &StopCondition,
    seed: u64,
    grid: &[f64],
) -> Result<SimulationReport> {
    run_trajectory_with(model, initial, stop, seed, &RunOptions::with_grid(grid))
}

/// Which event fired, resolved from a single scaled uniform.
enum Selected<'a> {
    Inflow,
    Internal(&'a Complex, usize),
    Exit(&'a Complex),
    Fragmentation(&'a Complex),
    Coagulation,
}

fn select<'a>(
    model: &CompartmentModel,
    state: &'a PopulationState,
    content_rates: &[f64],
    mut target: f64,
) -> Selected<'a> {
    let r = model.rates();
    if target < r.inflow {
        return Selected::Inflow;
    }
    target -= r.inflow;
    let mut last = None;
    for ((x, nx), &rate) in state.iter().zip(content_rates) {
        if rate <= 0.0 {
            continue;
        }
        if target >= rate {
            target -= rate;
            last = Some((x, nx));
            continue;
        }
        return select_within(model, x, nx, target);
    }
    let coag = r.coagulation * coag_pairs(state.total_compartments());
    if coag > 0.0 {
        return Selected::Coagulation;
    }
    // Rounding pushed the target past every channel: take the last content.
    match last {
        Some((x, nx)) => select_within(model, x, nx, f64::INFINITY),
        None => Selected::Inflow,
    }
}

fn select_within<'a>(
    model: &CompartmentModel,
    x: &'a Complex,
    nx: u64,
    mut target: f64,
) -> Selected<'a> {
    let nx = nx as f64;
    let chem = model.chemistry();
    let mut last = None;
    for &ri in chem.active_reactions() {
        let rate = nx * mass_action_rate_unchecked(&chem.reactions()[ri], x.counts());
        if rate <= 0.0 {
            continue;
        }
        if target < rate {
            return Selected::Internal(x, ri);
        }
        target -= rate;
        last = Some(Selected::Internal(x, ri));
    }
    let exit = model.rates().exit * nx;
    if exit > 0.0 {
        if target < exit {
            return Selected::Exit(x);
        }
        target -= exit;
        last = Some(Selected::Exit(x));
    }
    let frag = model.fragmentation_rate(x) * nx;
    if frag > 0.0 && target < frag {
        return Selected::Fragmentation(x);
    }
    if frag > 0.0 {
        return Selected::Fragmentation(x);
    }
    last.expect("selected content has a positive rate")
}

#[inline]
fn coag_pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Picks the `k`-th compartment (0-based) in canonical order, skipping one
/// copy of `exclude` when given.
fn nth_compartment(state: &PopulationState, mut k: u64, exclude: Option<&Complex>) -> Complex {
    for (x, nx) in state.iter() {
        let avail = if exclude == Some(x) { nx - 1 } else { nx };
        if k < avail {
            return x.clone();
        }
        k -= avail;
    }
    unreachable!("compartment index within population size")
}

/// Full-control variant of [`run_trajectory`].
pub fn run_trajectory_with(
    model: &CompartmentModel,
    initial: &PopulationState,
    stop: &StopCondition,
    seed: u64,
    options: &RunOptions,
) -> Result<SimulationReport> {
    model.check_state(initial)?;
    stop.validate()?;
    let d = model.dim();
    let layout = model.enzyme_layout();
    let mut rng: SimRng = rng::rng_from_seed(seed);
    let mut state = initial.clone();
    let mut tally = Tally::new(&state, d, layout)?;
    let mut grid: Vec<f64> = options.grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut grid_next = 0;
    let mut grid_out = Vec::with_capacity(grid.len());
    let mut hits: Vec<HitState> = options.hits.iter().cloned().map(HitState::new).collect();
    let mut events = Vec::new();
    let mut monitor = ContractionMonitor::new();
    let t_max = stop.t_max;
    let horizon = t_max.unwrap_or(f64::INFINITY);
    let budget = stop.event_budget.unwrap_or(u64::MAX);
    let rates = model.rates();
    let chem = model.chemistry();

    let mut time = 0.0;
    let mut count: u64 = 0;
    let mut overflowed = false;
    let mut content_rates: Vec<f64> = Vec::new();

    let (reason, final_end) = loop {
        if let Some(p) = &stop.absorbing {
            if p.holds(&tally) {
                break (StopReason::Absorbed, time);
            }
        }
        if let Some(p) = &stop.observable_bound {
            if p.holds(&tally) {
                break (StopReason::BoundHit, time);
            }
        }
        if count >= budget {
            break (StopReason::Budget, time);
        }

        content_rates.clear();
        let mut total = rates.inflow;
        for (x, nx) in state.iter() {
            let mut per = rates.exit + model.fragmentation_rate(x);
            for &ri in chem.active_reactions() {
                per += mass_action_rate_unchecked(&chem.reactions()[ri], x.counts());
            }
            let rate = per * nx as f64;
            content_rates.push(rate);
            total += rate;
        }
        total += rates.coagulation * coag_pairs(tally.compartments);

        if total <= 0.0 {
            // Nothing can fire: the state is frozen until the horizon.
            break (StopReason::Absorbed, horizon);
        }
        let dt = rng::exponential(&mut rng, total);
        let next_time = time + dt;
        if next_time > horizon {
            break (StopReason::Time, horizon);
        }

        while grid_next < grid.len() && grid[grid_next] < next_time {
            grid_out.push(tally.grid_point(grid[grid_next]));
            grid_next += 1;
        }
        for h in hits.iter_mut() {
            let holds = h.spec.predicate.holds(&tally);
            h.segment(holds, time, next_time, false);
        }

        let target = rng::uniform(&mut rng) * total;
        let before = if cfg!(debug_assertions) {
            Some(tally.clone())
        } else {
            None
        };
        let outcome = fire(
            model,
            &mut state,
            &mut tally,
            &content_rates,
            target,
            &mut rng,
        );
        let (kind, touched) = match outcome {
            Ok(v) => v,
            Err(Error::CountOverflow) => {
                overflowed = true;
                time = next_time;
                count += 1;
                break (StopReason::Budget, next_time);
            }
            Err(e) => return Err(e),
        };
        if let Some(before) = before {
            check_conservation(model, &before, &tally, kind, &touched, &state);
        }
        time = next_time;
        count += 1;
        monitor.push(dt);
        if options.record_events {
            events.push(EventRecord {
                time,
                kind,
                compartments: tally.compartments,
                species_totals: tally.totals.clone(),
                substrate_without_enzyme: tally.s_hat(),
                touched,
            });
        }
    };

    let (final_time, closed_end) = match reason {
        StopReason::Time => (horizon, horizon),
        StopReason::Absorbed => (time, final_end),
        _ => (time, time),
    };
    while grid_next < grid.len() && grid[grid_next] <= closed_end {
        grid_out.push(tally.grid_point(grid[grid_next]));
        grid_next += 1;
    }
    for h in hits.iter_mut() {
        let holds = h.spec.predicate.holds(&tally);
        h.segment(holds, time, closed_end, true);
    }

    Ok(SimulationReport {
        suspected_explosion: suspected_explosion(reason, final_time, t_max, count, &monitor),
        final_state: state,
        final_time,
        event_count: count,
        stop_reason: reason,
        overflowed,
        grid_observables: grid_out,
        hit_times: hits.into_iter().map(HitState::record).collect(),
        seed,
        events,
    })
}

/// Applies the event selected by `target`; returns its kind and the contents
/// removed from the state.
fn fire(
    model: &CompartmentModel,
    state: &mut PopulationState,
    tally: &mut Tally,
    content_rates: &[f64],
    target: f64,
    rng: &mut SimRng,
) -> Result<(EventKind, Vec<Complex>)> {
    // Resolve against an immutable borrow, then mutate with owned contents.
    enum Owned {
        Inflow,
        Internal(Complex, usize),
        Exit(Complex),
        Fragmentation(Complex),
        Coagulation,
    }
    let choice = match select(model, state, content_rates, target) {
        Selected::Inflow => Owned::Inflow,
        Selected::Internal(x, r) => Owned::Internal(x.clone(), r),
        Selected::Exit(x) => Owned::Exit(x.clone()),
        Selected::Fragmentation(x) => Owned::Fragmentation(x.clone()),
        Selected::Coagulation => Owned::Coagulation,
    };
    match choice {
        Owned::Inflow => {
            let x = model.inflow().sample(rng);
            tally.add(&x)?;
            state.add(x, 1)?;
            Ok((EventKind::Inflow, Vec::new()))
        }
        Owned::Internal(x, r) => {
            let next = x
                .apply_delta(model.chemistry().delta(r))?
                .expect("enabled reaction keeps counts non-negative");
            tally.add(&next)?;
            tally.remove(&x);
            state.remove_one(&x);
            state.add(next, 1)?;
            Ok((EventKind::Internal, vec![x]))
        }
        Owned::Exit(x) => {
            tally.remove(&x);
            state.remove_one(&x);
            Ok((EventKind::Exit, vec![x]))
        }
        Owned::Fragmentation(x) => {
            let (y, rest) = sample_fragmentation(model.kernel(), &x, rng)?;
            tally.add(&y)?;
            tally.add(&rest)?;
            tally.remove(&x);
            state.remove_one(&x);
            state.add(y, 1)?;
            state.add(rest, 1)?;
            Ok((EventKind::Fragmentation, vec![x]))
        }
        Owned::Coagulation => {
            let c = tally.compartments;
            let first = nth_compartment(state, rng.random_range(0..c), None);
            let second = nth_compartment(state, rng.random_range(0..c - 1), Some(&first));
            let merged = first.checked_add(&second)?;
            tally.add(&merged)?;
            tally.remove(&first);
            tally.remove(&second);
            state.remove_one(&first);
            state.remove_one(&second);
            state.add(merged, 1)?;
            Ok((EventKind::Coagulation, vec![first, second]))
        }
    }
}

/// Per-event mass bookkeeping, active in debug builds.
fn check_conservation(
    model: &CompartmentModel,
    before: &Tally,
    after: &Tally,
    kind: EventKind,
    touched: &[Complex],
    state: &PopulationState,
) {
    let d = model.dim();
    let recomputed = Tally::new(state, d, before.layout).expect("tally of a valid state");
    assert_eq!(&recomputed, after, "incremental observables drifted");
    let diff: Vec<i128> = after
        .totals
        .iter()
        .zip(&before.totals)
        .map(|(a, b)| *a as i128 - *b as i128)
        .collect();
    let dc = after.compartments as i128 - before.compartments as i128;
    match kind {
        EventKind::Fragmentation => {
            assert!(diff.iter().all(|&v| v == 0), "fragmentation changed mass");
            assert_eq!(dc, 1);
        }
        EventKind::Coagulation => {
            assert!(diff.iter().all(|&v| v == 0), "coagulation changed mass");
            assert_eq!(dc, -1);
        }
        EventKind::Exit => {
            let x = &touched[0];
            assert!(diff
                .iter()
                .zip(x.counts())
                .all(|(&v, &xi)| v == -(xi as i128)));
            assert_eq!(dc, -1);
        }
        EventKind::Inflow => {
            assert!(diff.iter().all(|&v| v >= 0));
            assert_eq!(dc, 1);
        }
        EventKind::Internal => {
            assert_eq!(dc, 0);
            let ok = model.chemistry().active_reactions().iter().any(|&r| {
                model
                    .chemistry()
                    .delta(r)
                    .iter()
                    .zip(&diff)
                    .all(|(&a, &b)| a as i128 == b)
            });
            assert!(ok, "internal event changed totals by a non-reaction vector");
        }
    }
}

/// Aggregate statistics over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleAggregate {
    pub count: usize,
    pub median_final_compartments: f64,
    pub median_final_species_totals: Vec<f64>,
    pub median_final_mass: f64,
    pub mean_event_count: f64,
    pub fraction_suspected_explosion: f64,
    pub fraction_stop_reason: Vec<(StopReason, f64)>,
    /// Per hit spec: `(name, fraction of trajectories with a visit, mean
    /// first time over those trajectories)`.
    pub hit_fractions: Vec<(String, f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub master_seed: u64,
    pub reports: Vec<SimulationReport>,
    pub aggregate: EnsembleAggregate,
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Sum of values in ascending order (independent of input order).
fn ordered_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Runs `count` trajectories; trajectory `i` uses
/// `substream_seed(master_seed, i)`.
pub fn run_ensemble(
    model: &CompartmentModel,
    initial: &PopulationState,
    stop: &StopCondition,
    master_seed: u64,
    count: usize,
    options: &RunOptions,
) -> Result<EnsembleReport> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "ensemble needs at least one trajectory".into(),
        });
    }
    let reports = (0..count)
        .into_par_iter()
        .map(|i| {
            run_trajectory_with(
                model,
                initial,
                stop,
                substream_seed(master_seed, i as u64),
                options,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&reports, model.dim(), &options.hits);
    Ok(EnsembleReport {
        master_seed,
        reports,
        aggregate,
    })
}

fn aggregate(reports: &[SimulationReport], d: usize, hits: &[HitSpec]) -> EnsembleAggregate {
    let n = reports.len() as f64;
    let comps: Vec<f64> = reports
        .iter()
        .map(|r| r.final_compartments() as f64)
        .collect();
    let mass: Vec<f64> = reports.iter().map(|r| r.final_mass() as f64).collect();
    let species = (0..d)
        .map(|i| {
            let v: Vec<f64> = reports
                .iter()
                .map(|r| r.final_state.species_total(i).unwrap_or(0) as f64)
                .collect();
            median(&v)
        })
        .collect();
    let events: Vec<f64> = reports.iter().map(|r| r.event_count as f64).collect();
    let reasons = [
        StopReason::Time,
        StopReason::Budget,
        StopReason::Absorbed,
        StopReason::BoundHit,
    ]
    .into_iter()
    .map(|s| {
        (
            s,
            reports.iter().filter(|r| r.stop_reason == s).count() as f64 / n,
        )
    })
    .collect();
    let hit_fractions = hits
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let firsts: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.hit_times[k].first_time)
                .collect();
            let frac = firsts.len() as f64 / n;
            let mean = (!firsts.is_empty()).then(|| ordered_sum(&firsts) / firsts.len() as f64);
            (h.name.clone(), frac, mean)
        })
        .collect();
    EnsembleAggregate {
        count: reports.len(),
        median_final_compartments: median(&comps),
        median_final_species_totals: species,
        median_final_mass: median(&mass),
        mean_event_count: ordered_sum(&events) / n,
        fraction_suspected_explosion: reports.iter().filter(|r| r.suspected_explosion).count()
            as f64
            / n,
        fraction_stop_reason: reasons,
        hit_fractions,
    }
}

/// Outcome of a run of the one-enzyme substrate chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnzymeChainReport {
    pub final_substrate: u64,
    pub final_time: f64,
    pub event_count: u64,
    pub up_events: u64,
    pub split_events: u64,
    /// Jumps from at or above `return_threshold` to below it.
    pub returns_below: u64,
    pub return_threshold: u64,
    pub stop_reason: StopReason,
    pub suspected_explosion: bool,
    pub overflowed: bool,
    pub seed: u64,
}

/// Default threshold for counting returns of the one-enzyme chain.
pub const DEFAULT_RETURN_THRESHOLD: u64 = 10;

/// Simulates the substrate count held with a single enzyme: from `x` it
/// moves to `x + 1` at rate `α x (x − 1) + 1`, and at rate `x` the
/// compartment splits and `x` is replaced by a Binomial(`x`, `p`) draw.
pub fn run_one_enzyme_chain(
    alpha: f64,
    p: f64,
    initial_s: u64,
    stop: &StopCondition,
    seed: u64,
) -> Result<EnzymeChainReport> {
    run_one_enzyme_chain_with(alpha, p, initial_s, stop, seed, DEFAULT_RETURN_THRESHOLD)
}

pub fn run_one_enzyme_chain_with(
    alpha: f64,
    p: f64,
    initial_s: u64,
    stop: &StopCondition,
    seed: u64,
    return_threshold: u64,
) -> Result<EnzymeChainReport> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} must be positive"),
        });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("{p} must lie in (0, 1)"),
        });
    }
    stop.validate()?;
    let mut rng = rng::rng_from_seed(seed);
    let horizon = stop.t_max.unwrap_or(f64::INFINITY);
    let budget = stop.event_budget.unwrap_or(u64::MAX);
    let mut x = initial_s;
    let mut time = 0.0;
    let mut count = 0u64;
    let (mut ups, mut splits, mut returns) = (0u64, 0u64, 0u64);
    let mut monitor = ContractionMonitor::new();
    let mut overflowed = false;

    let reason = loop {
        let chain_state = Complex(vec![x]);
        if let Some(pred) = &stop.absorbing {
            if pred.holds_crn(&chain_state)? {
                break StopReason::Absorbed;
            }
        }
        if let Some(pred) = &stop.observable_bound {
            if pred.holds_crn(&chain_state)? {
                break StopReason::BoundHit;
            }
        }
        if count >= budget {
            break StopReason::Budget;
        }
        let xf = x as f64;
        let up = alpha * xf * (xf - 1.0) + 1.0;
        let split = xf;
        let total = up + split;
        let dt = rng::exponential(&mut rng, total);
        if time + dt > horizon {
            time = horizon;
            break StopReason::Time;
        }
        time += dt;
        count += 1;
        monitor.push(dt);
        if rng::uniform(&mut rng) * total < up {
            match x.checked_add(1) {
                Some(v) => x = v,
                None => {
                    overflowed = true;
                    break StopReason::Budget;
                }
            }
            ups += 1;
        } else {
            let before = x;
            x = if x == 0 {
                0
            } else {
                rand_distr::Distribution::sample(
                    &rand_distr::Binomial::new(x, p).expect("p validated"),
                    &mut rng,
                )
            };
            splits += 1;
            if before >= return_threshold && x < return_threshold {
                returns += 1;
            }
        }
    };

    Ok(EnzymeChainReport {
        final_substrate: x,
        final_time: time,
        event_count: count,
        up_events: ups,
        split_events: splits,
        returns_below: returns,
        return_threshold,
        stop_reason: reason,
        suspected_explosion: suspected_explosion(reason, time, stop.t_max, count, &monitor),
        overflowed,
        seed,
    })
}

/// Exact one-step law of the one-enzyme chain from `x`: list of
/// `(next state, rate)` pairs. Used to cross-check drift computations.
pub fn one_enzyme_transitions(alpha: f64, p: f64, x: u64) -> Vec<(u64, f64)> {
    let xf = x as f64;
    let mut out = vec![(x + 1, alpha * xf * (xf - 1.0) + 1.0)];
    if x > 0 {
        for (y, q) in binomial_pmf(x, p).into_iter().enumerate() {
            out.push((y as u64, xf * q));
        }
    }
    out
}
