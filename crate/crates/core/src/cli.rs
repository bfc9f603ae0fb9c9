//! Command-line front end for the `sta` binary.
//!
//! Every command resolves a [`RunConfig`] (CLI flags over config file over
//! defaults), computes all outputs in memory, and only then writes them
//! atomically. Exit codes: 0 success, 2 configuration error, 3 numeric
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::ancillary::{SchemeKind, Target};
use crate::descriptor::SchemeDescriptor;
use crate::dynamics::{beta_sweep, evolve, ground_state, trajectory_table, EvolveOptions, HamiltonianSpec};
use crate::error::{Result, StaError};
use crate::optimize::{report_json, sensitivity_frontier, tune_adiabatic_2l, OptProblem};
use crate::sensitivity::{self, sensitivity_sweep, sweep_table, PerturbedModel};
use crate::synthesis::{make_adiabatic_2l, make_stirap_3l, synth_two_level, AlphaMode, Pulse, DEFAULT_SAMPLES};
use crate::table::write_atomic;
use crate::tables::{pulse_for, table1, table2, table_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code(e: &StaError) -> i32 {
    match e {
        StaError::InvalidArgument(_) | StaError::Config(_) | StaError::Io(_) => EXIT_CONFIG,
        StaError::SynthesisFailure { .. } | StaError::NumericFailure { .. } | StaError::OptimizationFailure(_) => {
            EXIT_NUMERIC
        }
    }
}

/// A ΔT or β grid: either `{start, stop, points}` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, points } => {
                let n = *points;
                if n == 0 {
                    return Err(StaError::Config("grid needs at least one point".into()));
                }
                if n == 1 {
                    vec![*start]
                } else {
                    (0..n)
                        .map(|i| {
                            if i + 1 == n {
                                *stop
                            } else {
                                start + (stop - start) * i as f64 / (n - 1) as f64
                            }
                        })
                        .collect()
                }
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(StaError::Config("grid values must be finite and non-empty".into()));
        }
        Ok(v)
    }

    /// `start:stop:points` or `a,b,c`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || StaError::Config(format!("bad grid `{s}`; use start:stop:points or a,b,c"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Grid::Range {
                start: parts[0].trim().parse().map_err(|_| bad())?,
                stop: parts[1].trim().parse().map_err(|_| bad())?,
                points: parts[2].trim().parse().map_err(|_| bad())?,
            })
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(Grid::Values)
        }
    }
}

/// Adiabatic reference pulse selected instead of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticPulse {
    pub target: Target,
    #[serde(rename = "T", default = "one")]
    pub duration: f64,
    /// Peak Rabi frequency times T.
    #[serde(rename = "Omega0T")]
    pub omega0_t: f64,
    /// Chirp amplitude times T (two-level only).
    #[serde(rename = "delta0T", default)]
    pub delta0_t: f64,
}

fn one() -> f64 {
    1.0
}

/// Every input of a run. Fields left out fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adiabatic: Option<AdiabaticPulse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaMode>,
    #[serde(default, rename = "DeltaT", skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SchemeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StaError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            scheme,
            adiabatic,
            alpha,
            delta_t,
            grid,
            betas,
            trajectory,
            family,
            starts,
            max_evals,
            bounds,
            frontier,
            tune_energy,
            out,
            seed,
            samples,
            tol
        );
        self
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sta",
    version,
    about = "Invariant-based pulse design and transition-sensitivity analysis"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (directory for `tables`); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample count for pulse and trajectory output.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Integration tolerance (quadrature for sensitivities, local step
    /// error for simulations).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct SchemeArgs {
    /// Scheme descriptor as inline JSON or `@path`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Adiabatic reference pulse as inline JSON or `@path`.
    #[arg(long)]
    pub adiabatic: Option<String>,
    /// `real_rabi`, `scheme`, or a constant angle.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep q or Q over ΔT.
    Sensitivity {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// ΔT grid: `start:stop:points` or `a,b,c`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Minimize q or Q over a family's parameters.
    Optimize {
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "delta-t", allow_hyphen_values = true)]
        delta_t: Option<f64>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        max_evals: Option<usize>,
        /// Run a warm-started frontier over this ΔT grid instead.
        #[arg(long, allow_hyphen_values = true)]
        frontier: Option<String>,
        /// Tune the two-level adiabatic pulse to this energy (units π²ħ/T).
        #[arg(long)]
        tune_energy: Option<f64>,
    },
    /// Simulate the perturbed system over a β grid.
    Simulate {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long = "delta-t", allow_hyphen_values = true)]
        delta_t: Option<f64>,
        /// β grid: `start:stop:points` or `a,b,c`.
        #[arg(long, allow_hyphen_values = true)]
        betas: Option<String>,
        /// Write the population trajectory at the first β instead.
        #[arg(long)]
        trajectory: bool,
    },
    /// Write table1.csv and table2.csv (pulse area and energy).
    Tables,
    /// Write the physical controls of a scheme.
    Pulse {
        #[command(flatten)]
        scheme: SchemeArgs,
    },
}

fn inline_or_file(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| StaError::Config(format!("cannot read {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

fn parse_alpha(s: &str) -> Result<AlphaMode> {
    match s {
        "real_rabi" => Ok(AlphaMode::RealRabi),
        "scheme" => Ok(AlphaMode::Scheme),
        other => other
            .parse::<f64>()
            .map(AlphaMode::Constant)
            .map_err(|_| StaError::Config(format!("bad alpha `{other}`; use real_rabi, scheme or a number"))),
    }
}

impl SchemeArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<()> {
        if let Some(s) = &self.scheme {
            c.scheme = Some(SchemeDescriptor::from_json(&inline_or_file(s)?)?);
        }
        if let Some(s) = &self.adiabatic {
            c.adiabatic = Some(serde_json::from_str(&inline_or_file(s)?)?);
        }
        if let Some(a) = &self.alpha {
            c.alpha = Some(parse_alpha(a)?);
        }
        Ok(())
    }
}

impl Cli {
    /// Config built from flags alone.
    fn flag_config(&self) -> Result<RunConfig> {
        let mut c = RunConfig {
            out: self.out.clone(),
            seed: self.seed,
            samples: self.samples,
            tol: self.tol,
            ..RunConfig::default()
        };
        match &self.command {
            Command::Sensitivity { scheme, grid } => {
                scheme.apply(&mut c)?;
                c.grid = grid.as_deref().map(Grid::parse).transpose()?;
            }
            Command::Optimize {
                family,
                delta_t,
                starts,
                max_evals,
                frontier,
                tune_energy,
            } => {
                c.family = family.as_deref().map(SchemeKind::parse).transpose()?;
                c.delta_t = *delta_t;
                c.starts = *starts;
                c.max_evals = *max_evals;
                c.frontier = frontier.as_deref().map(Grid::parse).transpose()?;
                c.tune_energy = *tune_energy;
            }
            Command::Simulate {
                scheme,
                delta_t,
                betas,
                trajectory,
            } => {
                scheme.apply(&mut c)?;
                c.delta_t = *delta_t;
                c.betas = betas.as_deref().map(Grid::parse).transpose()?;
                c.trajectory = trajectory.then_some(true);
            }
            Command::Tables => {}
            Command::Pulse { scheme } => scheme.apply(&mut c)?,
        }
        Ok(c)
    }

    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Sensitivity { .. } => "sensitivity",
            Command::Optimize { .. } => "optimize",
            Command::Simulate { .. } => "simulate",
            Command::Tables => "tables",
            Command::Pulse { .. } => "pulse",
        }
    }
}

/// Fully merged configuration for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    Ok(base.overlay(cli.flag_config()?))
}

/// Output of a command: named files, or a single stdout body.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Stdout(String),
    Files(Vec<(PathBuf, String)>),
}

fn build_pulse(c: &RunConfig) -> Result<Pulse> {
    match (&c.scheme, &c.adiabatic) {
        (Some(_), Some(_)) => Err(StaError::Config(
            "give either a scheme or an adiabatic pulse, not both".into(),
        )),
        (None, None) => Err(StaError::Config("a scheme or adiabatic pulse is required".into())),
        (Some(d), None) => {
            let s = d.to_scheme()?;
            match (s.target(), c.alpha) {
                (Target::TwoLevel, Some(mode)) => Ok(synth_two_level(&s, mode)?.into()),
                _ => pulse_for(&s),
            }
        }
        (None, Some(a)) => {
            let t = a.duration;
            if !(t.is_finite() && t > 0.0) {
                return Err(StaError::Config("adiabatic pulse needs T > 0".into()));
            }
            Ok(match a.target {
                Target::TwoLevel => make_adiabatic_2l(t, a.omega0_t / t, a.delta0_t / t)?.into(),
                Target::ThreeLevel => make_stirap_3l(t, a.omega0_t / t)?.into(),
            })
        }
    }
}

fn cmd_sensitivity(c: &RunConfig) -> Result<String> {
    let d = c
        .scheme
        .as_ref()
        .ok_or_else(|| StaError::Config("sensitivity needs a scheme".into()))?;
    let s = d.to_scheme()?;
    let grid = c
        .grid
        .clone()
        .unwrap_or(Grid::Range {
            start: 0.0,
            stop: 20.0,
            points: 201,
        })
        .values()?;
    let reports = sensitivity_sweep(&s, &grid, c.tol.unwrap_or(sensitivity::DEFAULT_TOL))?;
    Ok(sweep_table(&reports).to_csv())
}

fn cmd_optimize(c: &RunConfig) -> Result<String> {
    if let Some(e) = c.tune_energy {
        let t = c.scheme.as_ref().map(|d| d.duration).unwrap_or(1.0);
        let r = tune_adiabatic_2l(e, t)?;
        let v = serde_json::json!({
            "version": crate::VERSION,
            "energy_pi2": e,
            "T": t,
            "result": r,
        });
        return Ok(serde_json::to_string_pretty(&v).expect("serializable") + "\n");
    }
    let family = c
        .family
        .ok_or_else(|| StaError::Config("optimize needs a family".into()))?;
    let mut p = OptProblem::new(family, c.delta_t.unwrap_or(1.0)).map_err(|e| StaError::Config(e.to_string()))?;
    if let Some(n) = c.starts {
        p.starts = n;
    }
    if let Some(n) = c.max_evals {
        p.max_evals = n;
    }
    if let Some(b) = &c.bounds {
        p.bounds = b.clone();
    }
    if let Some(s) = c.seed {
        p.seed = s;
    }
    if let Some(t) = c.tol {
        p.tol = t;
    }
    p.validate().map_err(|e| StaError::Config(e.to_string()))?;
    if let Some(g) = &c.frontier {
        let f = sensitivity_frontier(&p, &g.values()?)?;
        return Ok(f.table.to_csv());
    }
    let r = crate::optimize::minimize_sensitivity(&p)?;
    Ok(report_json(&p, &r) + "\n")
}

fn cmd_simulate(c: &RunConfig) -> Result<String> {
    let pulse = build_pulse(c)?;
    let delta = c.delta_t.unwrap_or(1.0) / pulse.duration();
    let betas = c
        .betas
        .clone()
        .unwrap_or(Grid::Range {
            start: -0.1,
            stop: 0.1,
            points: 21,
        })
        .values()?;
    let opts = EvolveOptions {
        local_tol: c.tol.unwrap_or(crate::dynamics::DEFAULT_LOCAL_TOL),
        ..EvolveOptions::default()
    };
    let spec = HamiltonianSpec::new(pulse, PerturbedModel::new(delta, betas[0]));
    if c.trajectory.unwrap_or(false) {
        let opts = EvolveOptions {
            samples: Some(c.samples.unwrap_or(DEFAULT_SAMPLES)),
            ..opts
        };
        let r = evolve(&spec, &ground_state(spec.dimension()), opts)?;
        return Ok(trajectory_table(&r).expect("sampling was requested").to_csv());
    }
    Ok(beta_sweep(&spec, &betas, opts)?.to_csv())
}

fn cmd_pulse(c: &RunConfig) -> Result<String> {
    Ok(build_pulse(c)?.to_csv(c.samples.unwrap_or(DEFAULT_SAMPLES)))
}

/// Executes an already-resolved command.
pub fn execute(command: &str, c: &RunConfig) -> Result<Output> {
    let single = |body: String| match &c.out {
        Some(p) => Output::Files(vec![(p.clone(), body)]),
        None => Output::Stdout(body),
    };
    match command {
        "sensitivity" => cmd_sensitivity(c).map(single),
        "optimize" => cmd_optimize(c).map(single),
        "simulate" => cmd_simulate(c).map(single),
        "pulse" => cmd_pulse(c).map(single),
        "tables" => {
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            Ok(Output::Files(vec![
                (dir.join("table1.csv"), table_csv(&table1()?)),
                (dir.join("table2.csv"), table_csv(&table2()?)),
            ]))
        }
        other => Err(StaError::Config(format!("unknown command `{other}`"))),
    }
}

/// Stamp written next to file outputs so a run can be reproduced.
pub fn run_stamp(command: &str, c: &RunConfig) -> String {
    let v = serde_json::json!({ "version": crate::VERSION, "command": command, "config": c });
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

fn write_output(command: &str, c: &RunConfig, out: Output, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Output::Stdout(body) => {
            stdout.write_all(body.as_bytes())?;
        }
        Output::Files(files) => {
            let stamp = run_stamp(command, c);
            for (path, body) in &files {
                write_atomic(path, body)?;
                let mut name = path.clone().into_os_string();
                name.push(".run.json");
                write_atomic(Path::new(&name), &stamp)?;
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    let command = cli.command_name();
    let result = resolve_config(&cli).and_then(|c| {
        let out = execute(command, &c)?;
        write_output(command, &c, out, stdout)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "sta {command}: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("sta").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(Grid::parse("0:1:3").unwrap().values().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::parse("1, 2.5").unwrap().values().unwrap(), vec![1.0, 2.5]);
        assert!(Grid::parse("0:1").is_err());
        assert!(Grid::parse("a,b").is_err());
        assert!(Grid::Range {
            start: 0.0,
            stop: 1.0,
            points: 0
        }
        .values()
        .is_err());
    }

    #[test]
    fn precedence_flags_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"seed": 5, "tol": 1e-9, "family": "num1_4l"}"#).unwrap();
        let cli = Cli::try_parse_from(["sta", "optimize", "--config", cfg.to_str().unwrap(), "--seed", "9"]).unwrap();
        let c = resolve_config(&cli).unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.tol, Some(1e-9));
        assert_eq!(c.family, Some(SchemeKind::Num1_4L));
    }

    #[test]
    fn sensitivity_to_stdout() {
        let (code, out, _) = run_capture(&[
            "sensitivity",
            "--scheme",
            r#"{"kind":"flat_pi","T":1}"#,
            "--grid",
            "0,0.5,3",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], "DeltaT,value,lower_bound,asymptotic,quad_error");
        let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        let lb: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(lb, 0.25);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_capture(&["sensitivity", "--scheme", "{not json"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["sensitivity"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(
            run_capture(&["sensitivity", "--scheme", r#"{"kind":"flat_pi"}"#, "--tol", "-1"]).0,
            EXIT_CONFIG
        );
        // A quadrature tolerance below rounding cannot be met.
        let (code, _, err) = run_capture(&[
            "sensitivity",
            "--scheme",
            r#"{"kind":"arcsin_eps","params":{"eps":1e-9}}"#,
            "--grid",
            "1",
            "--tol",
            "1e-30",
        ]);
        assert_eq!(code, EXIT_NUMERIC, "{err}");
    }

    #[test]
    fn failed_run_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        let (code, _, _) = run_capture(&["sensitivity", "--scheme", "{}", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(!out.exists());
    }

    #[test]
    fn files_are_idempotent_and_stamped() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("p.csv");
        let args = [
            "pulse",
            "--scheme",
            r#"{"kind":"flat_pi","T":2}"#,
            "--samples",
            "5",
            "--out",
            out.to_str().unwrap(),
        ];
        assert_eq!(run_capture(&args).0, 0);
        let first = std::fs::read(&out).unwrap();
        assert_eq!(run_capture(&args).0, 0);
        assert_eq!(std::fs::read(&out).unwrap(), first);
        let text = String::from_utf8(first).unwrap();
        assert_eq!(text.lines().count(), 6);
        let omega: f64 = text.lines().nth(3).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((omega - std::f64::consts::PI / 2.0).abs() < 1e-14);
        let stamp = std::fs::read_to_string(dir.path().join("p.csv.run.json")).unwrap();
        assert!(stamp.contains(crate::VERSION) && stamp.contains("\"pulse\""));
    }

    #[test]
    fn simulate_flat() {
        let (code, out, err) = run_capture(&[
            "simulate",
            "--scheme",
            r#"{"kind":"flat_pi"}"#,
            "--delta-t",
            "1",
            "--betas",
            "0,0.1",
        ]);
        assert_eq!(code, 0, "{err}");
        let p: Vec<f64> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(p[0] >= 1.0 - 1e-8);
        assert!((p[1] - 0.9906).abs() < 5e-4);
    }

    #[test]
    fn simulate_trajectory_and_adiabatic() {
        let (code, out, err) = run_capture(&[
            "simulate",
            "--adiabatic",
            r#"{"target":"three_level","Omega0T":26.33}"#,
            "--betas",
            "0",
            "--trajectory",
            "--samples",
            "3",
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.starts_with("t,p1,p2,p3,p4\n"));
        assert_eq!(out.lines().count(), 4);
        let p3: f64 = out.lines().nth(3).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!(p3 < 1.0);
    }

    #[test]
    fn optimize_report() {
        let (code, out, err) = run_capture(&[
            "optimize",
            "--family",
            "optimized_2l",
            "--delta-t",
            "3",
            "--starts",
            "2",
        ]);
        assert_eq!(code, 0, "{err}");
        let j: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(j["result"]["best_value"].as_f64().unwrap() < 1e-6);
        assert_eq!(j["problem"]["family"], "optimized_2l");
        assert_eq!(run_capture(&["optimize", "--family", "flat_pi"]).0, EXIT_CONFIG);
    }

    #[test]
    fn tables_written() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run_capture(&["tables", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let t1 = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
        let flat: Vec<&str> = t1.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&flat[..2], ["Flat pi pulse", ""]);
        assert!((flat[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        assert!(dir.path().join("table2.csv").exists());
    }

    #[test]
    fn config_file_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"sceme": {}}"#).unwrap();
        assert_eq!(
            run_capture(&["tables", "--config", cfg.to_str().unwrap()]).0,
            EXIT_CONFIG
        );
    }
}
