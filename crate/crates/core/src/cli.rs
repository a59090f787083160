//! `fragsim` subcommands.
//!
//! Exit status: 0 success, 1 violation or failed outcome, 2 usage, parse or
//! model error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fragsim::config::{ConfigError, ModelConfig};
use fragsim::lyapunov::{
    check_crn_linear_bound, check_population_drift, classify_regime, BoundForm, CandidateFunction,
    Certificate, DriftReport, ExceptionalRegion, RegionSpec,
};
use fragsim::presets::{summary_lines, Preset};
use fragsim::sim::{run_trajectory_with, SimulationReport};
use fragsim::{CompartmentModel, Model4Params};

pub const OUT_DIR_ENV: &str = "FRAGSIM_OUT_DIR";
const DEFAULT_CRN_BOX: u64 = 200;

#[derive(Debug, Parser)]
#[command(
    name = "fragsim",
    version,
    about = "Compartment population simulator and drift checker"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory; writes trajectory.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        event_budget: Option<u64>,
        /// Comma-separated grid times.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check a drift condition; writes drift_report.json.
    DriftCheck {
        #[arg(long)]
        config: PathBuf,
        /// e.g. `population_weighted:alpha=auto`, `linear_crn:w=1;1`, `constant:value=0`.
        #[arg(long)]
        function: String,
        /// `negative_outside[:region=auto|none,c_max=..,mass_max=..]`,
        /// `nonnegative_outside[:k=auto|..]` or `linear:c=..,d=..`.
        #[arg(long)]
        bound: String,
        /// `default`, `enumerate:c_max=..,mass_max=..`,
        /// `sample:count=..,c_max=..,mass_max=..,seed=..` or `box:x_max=..`.
        #[arg(long, default_value = "default")]
        region: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Classify a one-species model; writes classification.json.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a built-in experiment; writes <preset>.csv and <preset>.json.
    Experiment {
        /// threshold-scan, duso-zechner, explosivity-probe or projection-crn.
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Print a preset's model configuration as TOML.
    PresetConfig {
        preset: String,
        /// Which of the preset's configurations (0-based).
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        usage(e.to_string())
    }
}

impl From<fragsim::Error> for Failure {
    fn from(e: fragsim::Error) -> Self {
        usage(e.to_string())
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            t_max,
            event_budget,
            grid,
            out,
        } => simulate(&config, seed, t_max, event_budget, grid, &out.out),
        Command::DriftCheck {
            config,
            function,
            bound,
            region,
            out,
        } => drift_check(&config, &function, &bound, &region, &out.out),
        Command::Classify { config, out } => classify(&config, &out.out),
        Command::Experiment { preset, seed, out } => experiment(&preset, seed, &out.out),
        Command::PresetConfig { preset, index } => {
            let p = find_preset(&preset)?;
            let configs = p.configs();
            let (_, cfg) = configs
                .get(index)
                .ok_or_else(|| usage(format!("{preset} has {} configurations", configs.len())))?;
            print!("{}", cfg.to_toml_string()?);
            Ok(0)
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- simulate

/// Trajectory CSV: `time,event_kind,C,<species...>[,S_hat]`, one row for the
/// initial state and one per event.
pub fn trajectory_csv(
    model: &CompartmentModel,
    initial: &fragsim::PopulationState,
    report: &SimulationReport,
) -> String {
    let species = model.chemistry().species();
    let s_hat = model.dim() == 2 && model.enzyme_layout().is_some();
    let mut out = String::from("time,event_kind,C");
    for s in species {
        out.push(',');
        out.push_str(s);
    }
    if s_hat {
        out.push_str(",S_hat");
    }
    out.push('\n');
    let row = |out: &mut String, t: f64, kind: &str, c: u64, totals: &[u64], sh: Option<u64>| {
        let _ = write!(out, "{t},{kind},{c}");
        for v in totals {
            let _ = write!(out, ",{v}");
        }
        if s_hat {
            let _ = write!(out, ",{}", sh.unwrap_or(0));
        }
        out.push('\n');
    };
    let d = model.dim();
    let totals = initial.species_totals(d).unwrap_or_else(|_| vec![0; d]);
    let sh = model
        .enzyme_layout()
        .and_then(|(e, s)| initial.substrate_without_enzyme(e, s).ok());
    row(
        &mut out,
        0.0,
        "initial",
        initial.total_compartments(),
        &totals,
        sh,
    );
    for ev in &report.events {
        row(
            &mut out,
            ev.time,
            ev.kind.label(),
            ev.compartments,
            &ev.species_totals,
            ev.substrate_without_enzyme,
        );
    }
    out
}

fn simulate(
    config: &Path,
    seed: Option<u64>,
    t_max: Option<f64>,
    event_budget: Option<u64>,
    grid: Option<Vec<f64>>,
    out: &Path,
) -> Result<u8, Failure> {
    let mut cfg = ModelConfig::load(config)?;
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    if let Some(t) = t_max {
        cfg.simulation.t_max = t;
    }
    if let Some(b) = event_budget {
        cfg.simulation.event_budget = b;
    }
    if let Some(g) = grid {
        cfg.simulation.grid = g;
    }
    let model = cfg.to_model()?;
    let initial = cfg.initial_state()?;
    let mut options = cfg.run_options()?;
    options.record_events = true;
    let mut report = run_trajectory_with(
        &model,
        &initial,
        &cfg.stop_condition(),
        cfg.simulation.seed,
        &options,
    )?;
    write_file(
        out,
        "trajectory.csv",
        &trajectory_csv(&model, &initial, &report),
    )?;
    report.events.clear();
    write_file(out, "summary.json", &to_json(&report))?;
    println!(
        "{} events, t = {}, stop = {:?}{}",
        report.event_count,
        report.final_time,
        report.stop_reason,
        if report.suspected_explosion {
            ", suspected explosion"
        } else {
            ""
        }
    );
    for h in &report.hit_times {
        println!(
            "hit {}: {} visits, first at {:?}",
            h.name, h.visits, h.first_time
        );
    }
    if report.overflowed {
        eprintln!("error: count overflow; run halted");
        return Ok(1);
    }
    Ok(0)
}

// ---------------------------------------------------------------- drift-check

/// `name` or `name:key=value,key=value`.
fn parse_spec(s: &str) -> Result<(String, BTreeMap<String, String>), Failure> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut map = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("`{part}` in `{s}` is not key=value")))?;
        if map
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            return Err(usage(format!("key `{k}` repeated in `{s}`")));
        }
    }
    Ok((name.trim().to_string(), map))
}

struct Params {
    spec: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, Failure> {
        self.take(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("`{key}={v}` in `{}` is not a number", self.spec)))
            })
            .transpose()
    }

    fn integer(&mut self, key: &str) -> Result<Option<u64>, Failure> {
        self.take(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("`{key}={v}` in `{}` is not an integer", self.spec)))
            })
            .transpose()
    }

    /// A number, or `None` for `auto` or absence.
    fn number_or_auto(&mut self, key: &str) -> Result<Option<f64>, Failure> {
        match self.map.get(key).map(String::as_str) {
            Some("auto") => {
                self.map.remove(key);
                Ok(None)
            }
            _ => self.number(key),
        }
    }

    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>, Failure> {
        self.take(key)
            .map(|v| {
                v.split(';')
                    .map(|x| {
                        x.trim().parse().map_err(|_| {
                            usage(format!("`{key}={v}` in `{}` is not a `;` list", self.spec))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn done(self) -> Result<(), Failure> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(usage(format!("unknown key `{k}` in `{}`", self.spec))),
        }
    }
}

fn params(s: &str) -> Result<(String, Params), Failure> {
    let (name, map) = parse_spec(s)?;
    Ok((
        name,
        Params {
            spec: s.to_string(),
            map,
        },
    ))
}

fn species(model: &CompartmentModel, name: &str) -> Result<usize, Failure> {
    model
        .chemistry()
        .species_index(name)
        .ok_or_else(|| usage(format!("unknown species `{name}`")))
}

/// The certificate attached to a one-species model's classification.
fn certificate(model: &CompartmentModel) -> Result<(Model4Params, Option<Certificate>), Failure> {
    let p = Model4Params::from_model(model)
        .map_err(|e| usage(format!("`auto` needs the one-species model: {e}")))?;
    Ok((p, classify_regime(&p)?.certificate))
}

fn resolve_function(spec: &str, model: &CompartmentModel) -> Result<CandidateFunction, Failure> {
    let (name, mut p) = params(spec)?;
    let d = model.dim();
    let f = match name.as_str() {
        "population_weighted" => {
            let w = p.vector("w")?.unwrap_or_else(|| vec![1.0; d]);
            let alpha = match p.number_or_auto("alpha")? {
                Some(a) => a,
                None => match certificate(model)? {
                    (_, Some(c @ Certificate::PositiveRecurrence { .. })) => c.alpha(),
                    _ => {
                        return Err(usage(
                            "alpha=auto needs a positive-recurrent classification",
                        ))
                    }
                },
            };
            CandidateFunction::PopulationWeighted { alpha, w }
        }
        "transience_witness" => {
            let alpha = match p.number_or_auto("alpha")? {
                Some(a) => a,
                None => match certificate(model)? {
                    (_, Some(c @ Certificate::Transience { .. })) => c.alpha(),
                    _ => return Err(usage("alpha=auto needs a transient classification")),
                },
            };
            CandidateFunction::TransienceWitness { alpha }
        }
        "linear_crn" => CandidateFunction::LinearCrn {
            w: p.vector("w")?.unwrap_or_else(|| vec![1.0; d]),
        },
        "enzyme_log" => {
            let e = p.take("enzyme").unwrap_or_else(|| "E".into());
            let s = p.take("substrate").unwrap_or_else(|| "S".into());
            CandidateFunction::EnzymeLog {
                enzyme: species(model, &e)?,
                substrate: species(model, &s)?,
            }
        }
        "composite_step3" => {
            let lambda = p
                .number("lambda")?
                .ok_or_else(|| usage("composite_step3 needs lambda"))?;
            let e = p.take("enzyme").unwrap_or_else(|| "E".into());
            let s = p.take("substrate").unwrap_or_else(|| "S".into());
            CandidateFunction::CompositeStep3 {
                lambda,
                enzyme: species(model, &e)?,
                substrate: species(model, &s)?,
            }
        }
        "constant" => CandidateFunction::constant(p.number("value")?.unwrap_or(0.0)),
        other => {
            return Err(usage(format!(
                "function `{other}` is not supported by drift-check \
                 (population_weighted, transience_witness, linear_crn, enzyme_log, \
                 composite_step3, constant)"
            )))
        }
    };
    p.done()?;
    f.validate()?;
    Ok(f)
}

fn resolve_bound(
    spec: &str,
    model: &CompartmentModel,
    f: &CandidateFunction,
) -> Result<BoundForm, Failure> {
    let (name, mut p) = params(spec)?;
    let bound = match name.as_str() {
        "negative_outside" => {
            let c_max = p.integer("c_max")?;
            let mass_max = p.integer("mass_max")?;
            let mode = p.take("region").unwrap_or_else(|| "auto".into());
            let region = match (c_max, mass_max, mode.as_str()) {
                (Some(c_max), Some(mass_max), _) => ExceptionalRegion::Box { c_max, mass_max },
                (None, None, "none") => ExceptionalRegion::None,
                (None, None, "auto") => match f {
                    CandidateFunction::PopulationWeighted { alpha, w }
                        if w.len() == 1 && w[0] == 1.0 =>
                    {
                        match Model4Params::from_model(model) {
                            Ok(params) => ExceptionalRegion::Model4Drift {
                                params,
                                alpha: *alpha,
                            },
                            Err(_) => ExceptionalRegion::None,
                        }
                    }
                    _ => ExceptionalRegion::None,
                },
                _ => {
                    return Err(usage(format!(
                        "`{spec}`: give both c_max and mass_max, or region=auto|none"
                    )))
                }
            };
            BoundForm::NegativeOutside { region }
        }
        "nonnegative_outside" => {
            let alpha = match f {
                CandidateFunction::TransienceWitness { alpha } => *alpha,
                _ => return Err(usage("nonnegative_outside needs transience_witness")),
            };
            let k = match p.number_or_auto("k")? {
                Some(k) => k,
                None => match certificate(model)? {
                    (
                        _,
                        Some(Certificate::Transience {
                            alpha: a,
                            k_epsilon,
                            ..
                        }),
                    ) if a == alpha => k_epsilon,
                    _ => {
                        return Err(usage(
                            "k=auto needs a transient classification with the same alpha",
                        ))
                    }
                },
            };
            BoundForm::NonNegativeOutside {
                region: ExceptionalRegion::WitnessSublevel { alpha, k },
            }
        }
        "linear" => BoundForm::Linear {
            c: p.number("c")?.unwrap_or(0.0),
            d: p.number("d")?.unwrap_or(0.0),
        },
        other => return Err(usage(format!("unknown bound `{other}`"))),
    };
    p.done()?;
    Ok(bound)
}

enum Region {
    Population(RegionSpec),
    CrnBox(u64),
}

fn resolve_region(spec: &str, d: usize, crn: bool) -> Result<Region, Failure> {
    let (name, mut p) = params(spec)?;
    let need = |p: &mut Params, k: &str| -> Result<u64, Failure> {
        p.integer(k)?
            .ok_or_else(|| usage(format!("`{spec}` needs {k}")))
    };
    let r = match (name.as_str(), crn) {
        ("default", false) => Region::Population(RegionSpec::default_for(d)),
        ("default", true) => Region::CrnBox(DEFAULT_CRN_BOX),
        ("box", true) => Region::CrnBox(need(&mut p, "x_max")?),
        ("enumerate", false) => Region::Population(RegionSpec::Enumerate {
            c_max: need(&mut p, "c_max")?,
            mass_max: need(&mut p, "mass_max")?,
        }),
        ("sample", false) => Region::Population(RegionSpec::Sample {
            count: need(&mut p, "count")? as usize,
            c_max: need(&mut p, "c_max")?,
            mass_max: need(&mut p, "mass_max")?,
            seed: p.integer("seed")?.unwrap_or(0),
        }),
        (other, true) => {
            return Err(usage(format!(
                "region `{other}` does not apply to network states; use box:x_max=.."
            )))
        }
        (other, false) => return Err(usage(format!("unknown population region `{other}`"))),
    };
    p.done()?;
    Ok(r)
}

/// `1 + α max w·x` over the represented inflow contents.
fn weighted_increment(model: &CompartmentModel, f: &CandidateFunction) -> Option<f64> {
    match f {
        CandidateFunction::PopulationWeighted { alpha, w } => {
            let m = model
                .inflow()
                .support()
                .iter()
                .map(|(x, _)| {
                    x.counts()
                        .iter()
                        .zip(w)
                        .map(|(&c, wi)| c as f64 * wi)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            Some(1.0 + alpha * m)
        }
        _ => None,
    }
}

pub fn run_drift_check(
    cfg: &ModelConfig,
    function: &str,
    bound: &str,
    region: &str,
) -> Result<DriftReport, Failure> {
    let model = cfg.to_model()?;
    let f = resolve_function(function, &model)?;
    let crn = matches!(f, CandidateFunction::LinearCrn { .. });
    let b = resolve_bound(bound, &model, &f)?;
    match resolve_region(region, model.dim(), crn)? {
        Region::CrnBox(x_max) => {
            let (w, (c, d)) = match (&f, &b) {
                (CandidateFunction::LinearCrn { w }, BoundForm::Linear { c, d }) => (w, (*c, *d)),
                _ => return Err(usage("linear_crn is checked against linear:c=..,d=.. only")),
            };
            Ok(check_crn_linear_bound(model.chemistry(), w, c, d, x_max)?)
        }
        Region::Population(r) => Ok(check_population_drift(
            &model,
            &f,
            &b,
            &r,
            weighted_increment(&model, &f),
        )?),
    }
}

fn drift_check(
    config: &Path,
    function: &str,
    bound: &str,
    region: &str,
    out: &Path,
) -> Result<u8, Failure> {
    let cfg = ModelConfig::load(config)?;
    let report = run_drift_check(&cfg, function, bound, region)?;
    write_file(out, "drift_report.json", &to_json(&report))?;
    println!(
        "{}: {} states checked, {} excluded, {} violations",
        report.region_checked,
        report.states_checked,
        report.states_excluded,
        report.violation_count
    );
    if let Some(v) = report.violations.first() {
        println!(
            "first violation: {}",
            serde_json::to_string(v).expect("serializable")
        );
    }
    Ok(if report.passed() { 0 } else { 1 })
}

// ---------------------------------------------------------------- classify

fn classify(config: &Path, out: &Path) -> Result<u8, Failure> {
    let cfg = ModelConfig::load(config)?;
    let model = cfg.to_model()?;
    let c = classify_regime(&Model4Params::from_model(&model)?)?;
    let json = to_json(&c);
    write_file(out, "classification.json", &json)?;
    print!("{json}");
    Ok(0)
}

// ---------------------------------------------------------------- experiment

fn find_preset(name: &str) -> Result<Preset, Failure> {
    Preset::from_name(name).ok_or_else(|| {
        let known: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        usage(format!(
            "unknown preset `{name}` (known: {})",
            known.join(", ")
        ))
    })
}

fn experiment(name: &str, seed: u64, out: &Path) -> Result<u8, Failure> {
    let preset = find_preset(name)?;
    let result = preset.run(seed)?;
    write_file(out, &format!("{name}.csv"), &result.table.to_csv())?;
    write_file(out, &format!("{name}.json"), &to_json(&result))?;
    print!("{}", summary_lines(&result));
    Ok(if result.evaluation.passed { 0 } else { 1 })
}
