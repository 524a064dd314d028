//! Command-line frontend: `stationary`, `sweep`, `simulate` and `validate`.
//!
//! Parameters resolve as defaults, then the optional `--config` TOML file,
//! then flags. Files use the flag names as keys.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dynamics::{PopulationModel, TransitionForm};
use crate::error::{CrdError, Result};
use crate::markov::{average_cooperation, average_group_success, stationary_product_form};
use crate::simulate::{simulate_agents, simulate_chain, total_variation, SimulationConfig, GENERATOR};
use crate::sweep::{
    self, figure_preset, format_significant, param_fields, run_sweep_with_workers, Axis, Metric,
    ParamSet, SweepSpec, ENGINE_VERSION, SCHEMA_VERSION,
};
use crate::validation::run_validation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    #[default]
    Chain,
    Agents,
}

/// Fully resolved run configuration.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub Z: u32,
    pub mu: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
    pub N: u32,
    pub M: u32,
    pub a: u32,
    pub p: f64,
    pub r: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub steps: u64,
    /// Defaults to 1% of `steps`.
    pub burn_in: Option<u64>,
    pub group_samples: u32,
    pub workers: Option<usize>,
    pub literal_transitions: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ParamSet::default();
        Self {
            Z: p.Z,
            mu: p.mu,
            beta: p.beta,
            b: p.b,
            c: p.c,
            N: p.N,
            M: p.M,
            a: p.a,
            p: p.p,
            r: p.r,
            out: None,
            format: Format::Json,
            seed: 42,
            steps: 1_000_000,
            burn_in: None,
            group_samples: 100,
            workers: None,
            literal_transitions: false,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> ParamSet {
        ParamSet {
            Z: self.Z,
            mu: self.mu,
            beta: self.beta,
            b: self.b,
            c: self.c,
            N: self.N,
            M: self.M,
            a: self.a,
            p: self.p,
            r: self.r,
        }
    }

    pub fn transition_form(&self) -> TransitionForm {
        if self.literal_transitions {
            TransitionForm::Literal
        } else {
            TransitionForm::Corrected
        }
    }

    pub fn model(&self) -> Result<PopulationModel> {
        Ok(self.params().to_model()?.with_transition_form(self.transition_form()))
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(self.steps / 100)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CrdError::Config(format!("config file: {e}")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "hybrid-crd", version, about = "Collective risk dilemma in hybrid groups: stationary analysis, sweeps and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary distribution and metrics at one parameter point
    Stationary(CommonArgs),
    /// Parameter grid from a figure preset or explicit axes
    Sweep(SweepArgs),
    /// Monte Carlo run compared with the analytic distribution
    Simulate(SimulateArgs),
    /// Run the built-in property checks
    Validate(ValidateArgs),
}

#[allow(non_snake_case)]
#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// TOML file with RunConfig keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Population size
    #[arg(long = "Z")]
    Z: Option<u32>,
    /// Mutation rate
    #[arg(long)]
    mu: Option<f64>,
    /// Selection strength
    #[arg(long)]
    beta: Option<f64>,
    /// Endowment
    #[arg(long)]
    b: Option<f64>,
    /// Cost as a fraction of the endowment
    #[arg(long)]
    c: Option<f64>,
    /// Group size
    #[arg(long = "N")]
    N: Option<u32>,
    /// Threshold number of cooperators
    #[arg(long = "M")]
    M: Option<u32>,
    /// Fixed agents per group
    #[arg(long)]
    a: Option<u32>,
    /// Probability that the fixed agents cooperate
    #[arg(long)]
    p: Option<f64>,
    /// Risk of collective loss
    #[arg(long)]
    r: Option<f64>,
    /// Output file (or file stem for multi-panel presets)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Use the imitation-only transition rates (absorbing boundaries)
    #[arg(long)]
    literal_transitions: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Figure preset (control, fig2, fig3, fig4, fig5A, fig5B, fig5C)
    #[arg(long)]
    preset: Option<String>,
    /// First axis, name=start:stop:count
    #[arg(long)]
    axis1: Option<String>,
    /// Second axis, name=start:stop:count
    #[arg(long)]
    axis2: Option<String>,
    /// Comma-separated metrics for explicit axes
    #[arg(long, value_delimiter = ',', value_enum)]
    metrics: Vec<MetricArg>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MetricArg {
    AvgCooperation,
    AvgSuccess,
    StationaryDistribution,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::AvgCooperation => Metric::AvgCooperation,
            MetricArg::AvgSuccess => Metric::AvgSuccess,
            MetricArg::StationaryDistribution => Metric::StationaryDistribution,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = SimulationMode::Chain)]
    mode: SimulationMode,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    /// Groups sampled per fitness estimate (agents mode)
    #[arg(long)]
    group_samples: Option<u32>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    literal_transitions: bool,
}

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_toml(&std::fs::read_to_string(path).map_err(|e| {
            CrdError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?)?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = common.$field { cfg.$field = v; })*
        };
    }
    apply!(Z, mu, beta, b, c, N, M, a, p, r, format);
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if common.literal_transitions {
        cfg.literal_transitions = true;
    }
    Ok(cfg)
}

fn echo(cfg: &RunConfig) {
    if let Ok(text) = serde_json::to_string(cfg) {
        eprintln!("resolved config: {text}");
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Stationary(args) => cmd_stationary(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn output_path(cfg: &RunConfig, default_stem: &str) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{default_stem}.{}", cfg.format.extension())))
}

#[derive(Serialize)]
struct StationaryArtifact<'a> {
    schema_version: u32,
    engine_version: &'a str,
    kind: &'a str,
    params: ParamSet,
    transition_form: TransitionForm,
    method: crate::markov::SolverMethod,
    avg_cooperation: f64,
    avg_success: f64,
    normalization_residual: f64,
    detailed_balance_residual: f64,
    distribution: &'a [f64],
}

fn cmd_stationary(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve(args)?;
    echo(&cfg);
    let model = cfg.model()?;
    let dist = stationary_product_form(&model)?;
    let coop = average_cooperation(&dist);
    let success = average_group_success(&dist, &model)?;
    let path = output_path(&cfg, "stationary");
    let params = cfg.params();
    let mut out = BufWriter::new(File::create(&path)?);
    match cfg.format {
        Format::Json => {
            let artifact = StationaryArtifact {
                schema_version: SCHEMA_VERSION,
                engine_version: ENGINE_VERSION,
                kind: "stationary",
                params,
                transition_form: cfg.transition_form(),
                method: dist.method(),
                avg_cooperation: coop,
                avg_success: success,
                normalization_residual: dist.normalization_residual(),
                detailed_balance_residual: dist.detailed_balance_residual(),
                distribution: dist.probabilities(),
            };
            serde_json::to_writer_pretty(&mut out, &artifact)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "Z,mu,beta,b,c,N,M,a,p,r,avg_cooperation,avg_success,k,probability")?;
            let fixed = format!(
                "{},{},{}",
                param_fields(&params),
                format_significant(coop, 12),
                format_significant(success, 12)
            );
            for (k, prob) in dist.probabilities().iter().enumerate() {
                writeln!(out, "{fixed},{k},{}", format_significant(*prob, 12))?;
            }
        }
    }
    out.flush()?;
    println!("avg_cooperation = {coop:.6}");
    println!("avg_success = {success:.6}");
    eprintln!("wrote {}", path.display());
    Ok(true)
}

fn panel_path(cfg: &RunConfig, panel: &str, panels: usize) -> PathBuf {
    let ext = cfg.format.extension();
    match (&cfg.out, panels) {
        (Some(out), 1) => out.clone(),
        (Some(out), _) => {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
            out.with_file_name(format!("{stem}_{panel}.{ext}"))
        }
        (None, _) => PathBuf::from(format!("{panel}.{ext}")),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let cfg = resolve(&args.common)?;
    echo(&cfg);
    if cfg.literal_transitions {
        return Err(CrdError::Config(
            "sweeps use the corrected transition rates only".into(),
        ));
    }
    let explicit = args.axis1.is_some() || args.axis2.is_some();
    let specs = match (&args.preset, explicit) {
        (Some(_), true) => {
            return Err(CrdError::Config(
                "--preset cannot be combined with --axis1/--axis2".into(),
            ))
        }
        (Some(name), false) => figure_preset(name)?,
        (None, false) => {
            return Err(CrdError::Config(format!(
                "give --preset ({}) or --axis1",
                sweep::PRESET_NAMES.join(", ")
            )))
        }
        (None, true) => {
            let axis1: Axis = args
                .axis1
                .as_deref()
                .ok_or_else(|| CrdError::Config("--axis2 requires --axis1".into()))?
                .parse()?;
            let axis2 = args.axis2.as_deref().map(str::parse).transpose()?;
            let metrics = if args.metrics.is_empty() {
                vec![Metric::AvgCooperation, Metric::AvgSuccess]
            } else {
                args.metrics.iter().map(|&m| m.into()).collect()
            };
            vec![SweepSpec {
                name: "sweep".into(),
                base: cfg.params(),
                axis1,
                axis2,
                metrics,
            }]
        }
    };
    for spec in &specs {
        spec.validate()?;
    }
    let started = Instant::now();
    let workers = args.workers.or(cfg.workers);
    for spec in &specs {
        let result = run_sweep_with_workers(spec, workers)?;
        let path = panel_path(&cfg, &spec.name, specs.len());
        write_sweep(&result, cfg.format, &path)?;
        println!(
            "{}: {} cells, {} skipped -> {}",
            spec.name,
            result.records.len() + result.skipped.len(),
            result.skipped.len(),
            path.display()
        );
    }
    println!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    Ok(true)
}

#[derive(Serialize)]
struct SimulationArtifact<'a> {
    schema_version: u32,
    engine_version: &'a str,
    kind: &'a str,
    mode: SimulationMode,
    generator: &'a str,
    seed: u64,
    steps: u64,
    burn_in: u64,
    group_samples: u32,
    params: ParamSet,
    transition_form: TransitionForm,
    steps_counted: u64,
    tv_distance: f64,
    occupancy: &'a [f64],
    analytic: &'a [f64],
}

fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let mut cfg = resolve(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(burn_in) = args.burn_in {
        cfg.burn_in = Some(burn_in);
    }
    if let Some(g) = args.group_samples {
        cfg.group_samples = g;
    }
    echo(&cfg);
    let model = cfg.model()?;
    let sim = SimulationConfig::new(model, cfg.steps, cfg.burn_in(), cfg.seed, cfg.group_samples)?;
    let analytic = stationary_product_form(&model)?;
    let empirical = match args.mode {
        SimulationMode::Chain => simulate_chain(&sim)?,
        SimulationMode::Agents => simulate_agents(&sim)?,
    };
    let tv = total_variation(&empirical.occupancy, analytic.probabilities());
    let path = output_path(&cfg, "simulation");
    let params = cfg.params();
    let mut out = BufWriter::new(File::create(&path)?);
    match cfg.format {
        Format::Json => {
            let artifact = SimulationArtifact {
                schema_version: SCHEMA_VERSION,
                engine_version: ENGINE_VERSION,
                kind: "simulation",
                mode: args.mode,
                generator: GENERATOR,
                seed: cfg.seed,
                steps: sim.steps,
                burn_in: sim.burn_in,
                group_samples: sim.group_samples,
                params,
                transition_form: cfg.transition_form(),
                steps_counted: empirical.steps_counted,
                tv_distance: tv,
                occupancy: &empirical.occupancy,
                analytic: analytic.probabilities(),
            };
            serde_json::to_writer_pretty(&mut out, &artifact)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(
                out,
                "Z,mu,beta,b,c,N,M,a,p,r,mode,generator,seed,steps,burn_in,group_samples,tv_distance,k,occupancy,analytic"
            )?;
            let mode = match args.mode {
                SimulationMode::Chain => "chain",
                SimulationMode::Agents => "agents",
            };
            let fixed = format!(
                "{},{mode},{GENERATOR},{},{},{},{},{}",
                param_fields(&params),
                cfg.seed,
                sim.steps,
                sim.burn_in,
                sim.group_samples,
                format_significant(tv, 12)
            );
            for (k, (o, a)) in empirical
                .occupancy
                .iter()
                .zip(analytic.probabilities())
                .enumerate()
            {
                writeln!(
                    out,
                    "{fixed},{k},{},{}",
                    format_significant(*o, 12),
                    format_significant(*a, 12)
                )?;
            }
        }
    }
    out.flush()?;
    println!("tv_distance = {tv:.6}");
    eprintln!("wrote {}", path.display());
    Ok(true)
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let form = if args.literal_transitions {
        TransitionForm::Literal
    } else {
        TransitionForm::Corrected
    };
    let report = run_validation(form);
    for check in &report.checks {
        let comparison = if check.name == "fig5C_non_equivalence" || check.name == "full_support" {
            ">"
        } else {
            "<"
        };
        println!(
            "{} {:<24} residual={:e} (need {comparison} {:e}) {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.residual,
            check.threshold,
            check.detail
        );
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} checks, {} failed ({:?} transitions)",
        report.checks.len(),
        failed,
        form
    );
    Ok(failed == 0)
}

/// Writes `result` in `format` to `path`.
pub fn write_sweep(result: &sweep::SweepResult, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => sweep::write_csv(result, path),
        Format::Json => sweep::write_json(result, path),
    }
}
