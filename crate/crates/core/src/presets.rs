//! Built-in experiments with their configurations and outcome checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::config::{
    chemistry_only_config, model4_config, Counts, HitConfig, InflowConfig, InitialEntry,
    KernelConfig, ModelConfig,
};
use crate::crn::{explosive_enzyme, projection_network, simulate_crn, Complex};
use crate::error::{Error, Result};
use crate::lyapunov::{classify_regime, Classification};
use crate::model::Model4Params;
use crate::rng::substream_seed;
use crate::sim::{
    median, run_ensemble, run_one_enzyme_chain, EnsembleAggregate, EnzymeChainReport,
    SimulationReport, StopCondition, StopReason, DEFAULT_RETURN_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ThresholdScan,
    DusoZechner,
    ExplosivityProbe,
    ProjectionCrn,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::ThresholdScan,
        Preset::DusoZechner,
        Preset::ExplosivityProbe,
        Preset::ProjectionCrn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ThresholdScan => "threshold-scan",
            Preset::DusoZechner => "duso-zechner",
            Preset::ExplosivityProbe => "explosivity-probe",
            Preset::ProjectionCrn => "projection-crn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Tag of the qualitative outcome the preset is expected to show.
    pub fn expected_outcome(self) -> &'static str {
        match self {
            Preset::ThresholdScan => "returns-below-threshold-grows-above",
            Preset::DusoZechner => "positive-recurrent",
            Preset::ExplosivityProbe => "explosive-iff-p-above-exp-minus-alpha",
            Preset::ProjectionCrn => "first-event-balanced",
        }
    }

    /// Named model configurations the preset runs.
    pub fn configs(self) -> Vec<(String, ModelConfig)> {
        match self {
            Preset::ThresholdScan => THRESHOLD_KAPPA_F
                .iter()
                .map(|&kf| (format!("kappa_F={kf}"), threshold_config(kf)))
                .collect(),
            Preset::DusoZechner => vec![("duso-zechner".into(), duso_zechner_config())],
            Preset::ExplosivityProbe => PROBE_P
                .iter()
                .map(|&p| (format!("p={p}"), probe_config(PROBE_ALPHA, p)))
                .collect(),
            Preset::ProjectionCrn => vec![("projection".into(), projection_config())],
        }
    }

    pub fn run(self, master_seed: u64) -> Result<ExperimentResult> {
        match self {
            Preset::ThresholdScan => threshold_scan(master_seed).map(|r| r.into_result()),
            Preset::DusoZechner => duso_zechner(master_seed).map(|r| r.into_result()),
            Preset::ExplosivityProbe => explosivity_probe(master_seed).map(|r| r.into_result()),
            Preset::ProjectionCrn => projection_crn(master_seed).map(|r| r.into_result()),
        }
    }
}

/// One thresholded observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    /// `at_least`, `at_most` or `within`.
    pub comparison: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_least(name: &str, observed: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            comparison: "at_least",
            threshold,
            passed: observed >= threshold,
        }
    }

    fn at_most(name: &str, observed: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            comparison: "at_most",
            threshold,
            passed: observed <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub expected: &'static str,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Evaluation {
    fn new(expected: &'static str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Evaluation {
            expected,
            checks,
            passed,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Per-trajectory rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// What `experiment` writes: rows for the CSV, everything else for JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub preset: &'static str,
    pub master_seed: u64,
    pub aggregate: serde_json::Value,
    pub evaluation: Evaluation,
    #[serde(skip)]
    pub table: Table,
}

pub fn stop_label(s: StopReason) -> &'static str {
    match s {
        StopReason::Time => "time",
        StopReason::Budget => "budget",
        StopReason::Absorbed => "absorbed",
        StopReason::BoundHit => "bound_hit",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

// ---------------------------------------------------------------- threshold

pub const THRESHOLD_KAPPA_F: [f64; 3] = [1.9, 2.0, 2.1];
pub const THRESHOLD_TRAJECTORIES: usize = 100;
pub const THRESHOLD_T_MAX: f64 = 100.0;
pub const THRESHOLD_AFTER: f64 = 10.0;
pub const THRESHOLD_MIN_RETURN_FRACTION: f64 = 0.8;
pub const THRESHOLD_MIN_MASS_RATIO: f64 = 5.0;
pub const EMPTY_HIT: &str = "empty_after_10";

/// `κ_C = 0`, `κ_b = κ_d = κ_E = κ_I = 1`, empty inflow, started empty.
pub fn threshold_config(kappa_f: f64) -> ModelConfig {
    let mut cfg = model4_config(1.0, 1.0, 1.0, 1.0, kappa_f, 0.0);
    cfg.simulation.t_max = THRESHOLD_T_MAX;
    cfg.simulation.grid = (0..=10).map(|k| k as f64 * 10.0).collect();
    cfg.simulation.hits = vec![HitConfig {
        name: EMPTY_HIT.into(),
        observable: "compartments".into(),
        at_most: Some(0),
        at_least: None,
        after: THRESHOLD_AFTER,
    }];
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEnsemble {
    pub kappa_f: f64,
    pub fraction_empty_after_10: f64,
    pub median_final_mass: f64,
    pub aggregate: EnsembleAggregate,
    #[serde(skip)]
    pub reports: Vec<SimulationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub master_seed: u64,
    pub ensembles: Vec<ThresholdEnsemble>,
    /// Median final mass at `κ_F = 2.1` over that at `1.9`.
    pub mass_ratio: f64,
    pub classifications: Vec<Classification>,
    pub evaluation: Evaluation,
}

/// Three ensembles of 100 trajectories to `t = 100`, all from master seed
/// `master_seed`.
pub fn threshold_scan(master_seed: u64) -> Result<ThresholdScan> {
    let mut ensembles = Vec::new();
    let mut classifications = Vec::new();
    for &kf in &THRESHOLD_KAPPA_F {
        let cfg = threshold_config(kf);
        let model = cfg.to_model().map_err(model_error)?;
        classifications.push(classify_regime(&Model4Params::from_model(&model)?)?);
        let e = run_ensemble(
            &model,
            &cfg.initial_state().map_err(model_error)?,
            &cfg.stop_condition(),
            master_seed,
            THRESHOLD_TRAJECTORIES,
            &cfg.run_options().map_err(model_error)?,
        )?;
        ensembles.push(ThresholdEnsemble {
            kappa_f: kf,
            fraction_empty_after_10: e.aggregate.hit_fractions[0].1,
            median_final_mass: e.aggregate.median_final_mass,
            aggregate: e.aggregate,
            reports: e.reports,
        });
    }
    let low = &ensembles[0];
    let high = &ensembles[2];
    let mass_ratio = ratio(high.median_final_mass, low.median_final_mass);
    let evaluation = Evaluation::new(
        Preset::ThresholdScan.expected_outcome(),
        vec![
            Check::at_least(
                "fraction_empty_after_10_at_1.9",
                low.fraction_empty_after_10,
                THRESHOLD_MIN_RETURN_FRACTION,
            ),
            Check::at_least(
                "median_mass_ratio_2.1_over_1.9",
                mass_ratio,
                THRESHOLD_MIN_MASS_RATIO,
            ),
        ],
    );
    Ok(ThresholdScan {
        master_seed,
        ensembles,
        mass_ratio,
        classifications,
        evaluation,
    })
}

impl ThresholdScan {
    pub fn table(&self) -> Table {
        let mut rows = Vec::new();
        for e in &self.ensembles {
            for (i, r) in e.reports.iter().enumerate() {
                let h = &r.hit_times[0];
                rows.push(vec![
                    e.kappa_f.to_string(),
                    i.to_string(),
                    r.seed.to_string(),
                    r.final_time.to_string(),
                    r.event_count.to_string(),
                    stop_label(r.stop_reason).into(),
                    r.final_compartments().to_string(),
                    r.final_mass().to_string(),
                    h.visits.to_string(),
                    opt(h.first_time),
                ]);
            }
        }
        Table {
            header: vec![
                "kappa_F",
                "trajectory",
                "seed",
                "final_time",
                "event_count",
                "stop_reason",
                "final_C",
                "final_mass",
                "empty_visits_after_10",
                "first_empty_after_10",
            ],
            rows,
        }
    }

    pub fn into_result(self) -> ExperimentResult {
        let table = self.table();
        ExperimentResult {
            preset: Preset::ThresholdScan.name(),
            master_seed: self.master_seed,
            aggregate: serde_json::to_value(&self).expect("serializable"),
            evaluation: self.evaluation,
            table,
        }
    }
}

fn model_error(e: crate::config::ConfigError) -> Error {
    match e {
        crate::config::ConfigError::Model(e) => e,
        other => Error::InvalidParameter {
            name: "config",
            reason: other.to_string(),
        },
    }
}

// ---------------------------------------------------------------- probe

pub const PROBE_ALPHA: f64 = 1.0;
pub const PROBE_P: [f64; 2] = [0.6, 0.2];
pub const PROBE_SEEDS: usize = 50;
pub const PROBE_INITIAL_S: u64 = 100;
pub const PROBE_EXPLOSIVE_BUDGET: u64 = 1_000_000;
pub const PROBE_EXPLOSIVE_TIME: f64 = 1.0;
pub const PROBE_RECURRENT_BUDGET: u64 = 100_000;
pub const PROBE_MIN_RETURNS: u64 = 100;
pub const PROBE_MIN_FRACTION: f64 = 0.9;

/// `0 → S`, `E + 2S → E + 3S` at rate `2α`, fragmentation at rate `S`
/// with the enzyme-tracking kernel, one compartment holding one enzyme.
pub fn probe_config(alpha: f64, p: f64) -> ModelConfig {
    let net = explosive_enzyme(alpha).expect("valid network");
    let mut cfg = chemistry_only_config(&net);
    cfg.compartments.kappa_f = 1.0;
    cfg.compartments.fragmentation_species = "S".into();
    cfg.kernel = KernelConfig::EnzymeSubstrate {
        p,
        enzyme: "E".into(),
        substrate: "S".into(),
    };
    cfg.simulation.t_max = PROBE_EXPLOSIVE_TIME;
    cfg.simulation.event_budget = PROBE_EXPLOSIVE_BUDGET;
    cfg.simulation.initial = vec![InitialEntry {
        content: Counts::from([("E".into(), 1), ("S".into(), PROBE_INITIAL_S)]),
        count: 1,
    }];
    cfg
}

/// Above the threshold a run succeeds when it uses the whole budget before
/// `t = 1`; below it, when it records at least 100 returns below 10.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeArm {
    pub alpha: f64,
    pub p: f64,
    pub explosive_side: bool,
    pub successes: usize,
    pub count: usize,
    pub fraction: f64,
    pub fraction_suspected_explosion: f64,
    pub median_final_time: f64,
    #[serde(skip)]
    pub runs: Vec<EnzymeChainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplosivityProbe {
    pub master_seed: u64,
    pub initial_s: u64,
    pub arms: Vec<ProbeArm>,
    pub evaluation: Evaluation,
}

fn probe_success(explosive_side: bool, r: &EnzymeChainReport) -> bool {
    if explosive_side {
        r.stop_reason == StopReason::Budget && !r.overflowed && r.final_time < PROBE_EXPLOSIVE_TIME
    } else {
        r.returns_below >= PROBE_MIN_RETURNS
    }
}

/// Runs the one-enzyme chain for each `p` on the same 50 sub-seeds.
pub fn explosivity_probe(master_seed: u64) -> Result<ExplosivityProbe> {
    use rayon::prelude::*;
    let mut arms = Vec::new();
    for &p in &PROBE_P {
        let explosive_side = p > (-PROBE_ALPHA).exp();
        let stop = if explosive_side {
            StopCondition::time(PROBE_EXPLOSIVE_TIME).with_budget(PROBE_EXPLOSIVE_BUDGET)
        } else {
            StopCondition::budget(PROBE_RECURRENT_BUDGET)
        };
        let runs = (0..PROBE_SEEDS)
            .into_par_iter()
            .map(|i| {
                run_one_enzyme_chain(
                    PROBE_ALPHA,
                    p,
                    PROBE_INITIAL_S,
                    &stop,
                    substream_seed(master_seed, i as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let successes = runs
            .iter()
            .filter(|r| probe_success(explosive_side, r))
            .count();
        let n = runs.len() as f64;
        let times: Vec<f64> = runs.iter().map(|r| r.final_time).collect();
        arms.push(ProbeArm {
            alpha: PROBE_ALPHA,
            p,
            explosive_side,
            successes,
            count: runs.len(),
            fraction: successes as f64 / n,
            fraction_suspected_explosion: runs.iter().filter(|r| r.suspected_explosion).count()
                as f64
                / n,
            median_final_time: median(&times),
            runs,
        });
    }
    let checks = arms
        .iter()
        .map(|a| {
            let name = if a.explosive_side {
                format!("fraction_budget_before_t1_at_p={}", a.p)
            } else {
                format!("fraction_100_returns_at_p={}", a.p)
            };
            Check::at_least(&name, a.fraction, PROBE_MIN_FRACTION)
        })
        .collect();
    Ok(ExplosivityProbe {
        master_seed,
        initial_s: PROBE_INITIAL_S,
        arms,
        evaluation: Evaluation::new(Preset::ExplosivityProbe.expected_outcome(), checks),
    })
}

impl ExplosivityProbe {
    pub fn table(&self) -> Table {
        let mut rows = Vec::new();
        for a in &self.arms {
            for (i, r) in a.runs.iter().enumerate() {
                rows.push(vec![
                    a.p.to_string(),
                    i.to_string(),
                    r.seed.to_string(),
                    self.initial_s.to_string(),
                    r.event_count.to_string(),
                    r.final_time.to_string(),
                    r.final_substrate.to_string(),
                    stop_label(r.stop_reason).into(),
                    r.suspected_explosion.to_string(),
                    r.returns_below.to_string(),
                    probe_success(a.explosive_side, r).to_string(),
                ]);
            }
        }
        Table {
            header: vec![
                "p",
                "trajectory",
                "seed",
                "initial_s",
                "event_count",
                "final_time",
                "final_substrate",
                "stop_reason",
                "suspected_explosion",
                "returns_below_10",
                "success",
            ],
            rows,
        }
    }

    pub fn into_result(self) -> ExperimentResult {
        debug_assert_eq!(DEFAULT_RETURN_THRESHOLD, 10);
        let table = self.table();
        ExperimentResult {
            preset: Preset::ExplosivityProbe.name(),
            master_seed: self.master_seed,
            aggregate: serde_json::to_value(&self).expect("serializable"),
            evaluation: self.evaluation,
            table,
        }
    }
}

// ---------------------------------------------------------------- duso-zechner

pub const DZ_POISSON_MEAN: f64 = 5.0;
pub const DZ_KAPPA_I: f64 = 1.0;
pub const DZ_KAPPA_E: f64 = 1.0;
pub const DZ_KAPPA_F: f64 = 1.0;
pub const DZ_KAPPA_C: f64 = 0.1;
pub const DZ_TRAJECTORIES: usize = 100;
pub const DZ_T_MAX: f64 = 200.0;
pub const DZ_GRID_STEP: f64 = 1.0;
pub const DZ_MIN_RETURN_FRACTION: f64 = 0.95;
pub const DZ_MAX_WINDOW_GAP: f64 = 0.1;
pub const RETURN_HIT: &str = "empty";

/// `κ_b = κ_d = 0`, Poisson inflow, uniform pair kernel, started empty.
pub fn duso_zechner_config() -> ModelConfig {
    let mut cfg = model4_config(0.0, 0.0, DZ_KAPPA_I, DZ_KAPPA_E, DZ_KAPPA_F, DZ_KAPPA_C);
    cfg.inflow = InflowConfig::Poisson {
        rates: BTreeMap::from([("S".to_string(), DZ_POISSON_MEAN)]),
        tail_bound: crate::inflow::DEFAULT_TAIL_BOUND,
    };
    cfg.kernel = KernelConfig::UniformUnorderedPairs {};
    cfg.simulation.t_max = DZ_T_MAX;
    let steps = (DZ_T_MAX / DZ_GRID_STEP).round() as usize;
    cfg.simulation.grid = (0..=steps).map(|k| k as f64 * DZ_GRID_STEP).collect();
    cfg.simulation.hits = vec![HitConfig {
        name: RETURN_HIT.into(),
        observable: "compartments".into(),
        at_most: Some(0),
        at_least: None,
        after: 0.0,
    }];
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DusoZechner {
    pub master_seed: u64,
    /// Trajectories that left the empty start state and came back.
    pub fraction_returned: f64,
    /// Ensemble means of `C` averaged over `(T/2, 3T/4]` and `(3T/4, T]`.
    pub window_means: [f64; 2],
    pub window_relative_gap: f64,
    pub classification: Classification,
    pub aggregate: EnsembleAggregate,
    pub evaluation: Evaluation,
    #[serde(skip)]
    pub reports: Vec<SimulationReport>,
}

/// The start state counts as one visit of the empty state, so a return is
/// a second visit.
fn returned(r: &SimulationReport) -> bool {
    r.hit_times[0].visits >= 2
}

pub fn duso_zechner(master_seed: u64) -> Result<DusoZechner> {
    let cfg = duso_zechner_config();
    let model = cfg.to_model().map_err(model_error)?;
    let classification = classify_regime(&Model4Params::from_model(&model)?)?;
    let e = run_ensemble(
        &model,
        &cfg.initial_state().map_err(model_error)?,
        &cfg.stop_condition(),
        master_seed,
        DZ_TRAJECTORIES,
        &cfg.run_options().map_err(model_error)?,
    )?;
    let n = e.reports.len() as f64;
    let fraction_returned = e.reports.iter().filter(|r| returned(r)).count() as f64 / n;
    let grid = &cfg.simulation.grid;
    let window = |lo: f64, hi: f64| {
        let idx: Vec<usize> = (0..grid.len())
            .filter(|&k| grid[k] > lo && grid[k] <= hi)
            .collect();
        let mut acc = 0.0;
        for r in &e.reports {
            for &k in &idx {
                acc += r.grid_observables[k].compartments as f64;
            }
        }
        acc / (n * idx.len() as f64)
    };
    let window_means = [
        window(DZ_T_MAX / 2.0, 0.75 * DZ_T_MAX),
        window(0.75 * DZ_T_MAX, DZ_T_MAX),
    ];
    let window_relative_gap =
        (window_means[0] - window_means[1]).abs() / window_means[0].max(window_means[1]);
    let evaluation = Evaluation::new(
        Preset::DusoZechner.expected_outcome(),
        vec![
            Check::at_least(
                "fraction_returned_to_empty",
                fraction_returned,
                DZ_MIN_RETURN_FRACTION,
            ),
            Check::at_most(
                "window_mean_relative_gap",
                window_relative_gap,
                DZ_MAX_WINDOW_GAP,
            ),
        ],
    );
    Ok(DusoZechner {
        master_seed,
        fraction_returned,
        window_means,
        window_relative_gap,
        classification,
        aggregate: e.aggregate,
        evaluation,
        reports: e.reports,
    })
}

impl DusoZechner {
    pub fn table(&self) -> Table {
        let rows = self
            .reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    i.to_string(),
                    r.seed.to_string(),
                    r.final_time.to_string(),
                    r.event_count.to_string(),
                    stop_label(r.stop_reason).into(),
                    r.final_compartments().to_string(),
                    r.final_mass().to_string(),
                    r.hit_times[0].visits.to_string(),
                    returned(r).to_string(),
                ]
            })
            .collect();
        Table {
            header: vec![
                "trajectory",
                "seed",
                "final_time",
                "event_count",
                "stop_reason",
                "final_C",
                "final_mass",
                "empty_visits",
                "returned",
            ],
            rows,
        }
    }

    pub fn into_result(self) -> ExperimentResult {
        let table = self.table();
        ExperimentResult {
            preset: Preset::DusoZechner.name(),
            master_seed: self.master_seed,
            aggregate: serde_json::to_value(&self).expect("serializable"),
            evaluation: self.evaluation,
            table,
        }
    }
}

// ---------------------------------------------------------------- projection

pub const PROJECTION_TRAJECTORIES: usize = 100;
pub const PROJECTION_T_MAX: f64 = 5.0;
pub const PROJECTION_BUDGET: u64 = 100_000;
pub const PROJECTION_FIRST_EVENT_DRAWS: usize = 10_000;
pub const PROJECTION_MAX_SPLIT_GAP: f64 = 0.03;

/// The network `2X → X`, `X → X + E`, `E + S → E + 2S`, `S → S + X` on its
/// own, started from `X = S = 1`.
pub fn projection_config() -> ModelConfig {
    let mut cfg = chemistry_only_config(&projection_network().expect("valid network"));
    cfg.simulation.t_max = PROJECTION_T_MAX;
    cfg.simulation.event_budget = PROJECTION_BUDGET;
    cfg
}

pub fn projection_initial() -> Complex {
    Complex(vec![1, 0, 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionCrn {
    pub master_seed: u64,
    pub initial: Complex,
    /// Fraction of first events that are `X → X + E` (the other enabled
    /// reaction is `S → S + X`).
    pub first_event_fraction_x_to_e: f64,
    pub first_event_draws: usize,
    pub median_final_counts: Vec<f64>,
    pub fraction_stop_reason: Vec<(StopReason, f64)>,
    pub evaluation: Evaluation,
    #[serde(skip)]
    pub reports: Vec<crate::crn::CrnSimulationReport>,
}

pub fn projection_crn(master_seed: u64) -> Result<ProjectionCrn> {
    use rayon::prelude::*;
    let net = projection_network()?;
    let x0 = projection_initial();
    let cfg = projection_config();
    let stop = cfg.stop_condition();
    let reports = (0..PROJECTION_TRAJECTORIES)
        .into_par_iter()
        .map(|i| simulate_crn(&net, &x0, &stop, substream_seed(master_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    // First events use their own block of sub-seeds.
    let first = StopCondition::budget(1);
    let offset = PROJECTION_TRAJECTORIES as u64;
    let to_e = (0..PROJECTION_FIRST_EVENT_DRAWS)
        .into_par_iter()
        .map(|i| {
            simulate_crn(
                &net,
                &x0,
                &first,
                substream_seed(master_seed, offset + i as u64),
            )
            .map(|r| (r.events[0].reaction == 1) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let frac = to_e as f64 / PROJECTION_FIRST_EVENT_DRAWS as f64;
    let n = reports.len() as f64;
    let median_final_counts = (0..net.dim())
        .map(|i| {
            let v: Vec<f64> = reports
                .iter()
                .map(|r| r.final_state.get(i) as f64)
                .collect();
            median(&v)
        })
        .collect();
    let fraction_stop_reason = [
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
    let evaluation = Evaluation::new(
        Preset::ProjectionCrn.expected_outcome(),
        vec![Check::at_most(
            "first_event_gap_from_half",
            (frac - 0.5).abs(),
            PROJECTION_MAX_SPLIT_GAP,
        )],
    );
    Ok(ProjectionCrn {
        master_seed,
        initial: x0,
        first_event_fraction_x_to_e: frac,
        first_event_draws: PROJECTION_FIRST_EVENT_DRAWS,
        median_final_counts,
        fraction_stop_reason,
        evaluation,
        reports,
    })
}

impl ProjectionCrn {
    pub fn table(&self) -> Table {
        let rows = self
            .reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![
                    i.to_string(),
                    r.seed.to_string(),
                    r.final_time.to_string(),
                    r.event_count.to_string(),
                    stop_label(r.stop_reason).into(),
                ];
                row.extend(r.final_state.counts().iter().map(|c| c.to_string()));
                row
            })
            .collect();
        Table {
            header: vec![
                "trajectory",
                "seed",
                "final_time",
                "event_count",
                "stop_reason",
                "X",
                "E",
                "S",
            ],
            rows,
        }
    }

    pub fn into_result(self) -> ExperimentResult {
        let table = self.table();
        ExperimentResult {
            preset: Preset::ProjectionCrn.name(),
            master_seed: self.master_seed,
            aggregate: serde_json::to_value(&self).expect("serializable"),
            evaluation: self.evaluation,
            table,
        }
    }
}

/// One line per check, for terminal output.
pub fn summary_lines(result: &ExperimentResult) -> String {
    let mut s = String::new();
    for c in &result.evaluation.checks {
        let _ = writeln!(
            s,
            "{} {}: {} {} {} -> {}",
            result.preset,
            c.name,
            c.observed,
            c.comparison,
            c.threshold,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
        assert_eq!(Preset::from_name("nope"), None);
    }

    #[test]
    fn configs_build_and_round_trip() {
        for p in Preset::ALL {
            for (name, cfg) in p.configs() {
                let m = cfg.to_model().unwrap_or_else(|e| panic!("{name}: {e}"));
                let text = cfg.to_toml_string().unwrap();
                let back = ModelConfig::from_toml_str(&text).unwrap();
                assert_eq!(back, cfg, "{name}");
                assert_eq!(back.to_model().unwrap(), m, "{name}");
            }
        }
    }

    #[test]
    fn duso_zechner_is_positive_recurrent() {
        let m = duso_zechner_config().to_model().unwrap();
        let c = classify_regime(&Model4Params::from_model(&m).unwrap()).unwrap();
        assert!(matches!(
            c.regime,
            crate::lyapunov::Regime::PositiveRecurrent { .. }
        ));
    }

    #[test]
    fn probe_sides() {
        assert!(0.6 > (-PROBE_ALPHA).exp());
        assert!(0.2 < (-PROBE_ALPHA).exp());
        let m = probe_config(1.0, 0.6).to_model().unwrap();
        assert_eq!(m.enzyme_layout(), Some((0, 1)));
    }
}
