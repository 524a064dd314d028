//! Parameter grids over the analytic pipeline, figure presets and the CSV /
//! JSON writers.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::PopulationModel;
use crate::error::{CrdError, Result};
use crate::game::{GameParams, HybridPolicy};
use crate::markov::{average_cooperation, average_group_success, stationary_product_form};

pub const SCHEMA_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Points per probability axis in the presets (step 0.02).
pub const DEFAULT_RESOLUTION: usize = 51;

pub const CSV_HEADER: &str = "Z,mu,beta,b,c,N,M,a,p,r,avg_cooperation,avg_success";

/// Every model parameter, unvalidated. Field names follow the usual symbols.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSet {
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
}

impl Default for ParamSet {
    fn default() -> Self {
        Self {
            Z: 100,
            mu: 0.01,
            beta: 2.0,
            b: 1.0,
            c: 0.1,
            N: 6,
            M: 3,
            a: 0,
            p: 0.0,
            r: 0.5,
        }
    }
}

impl ParamSet {
    pub fn to_model(&self) -> Result<PopulationModel> {
        let game = GameParams::new(self.N, self.M, self.r, self.b, self.c)?;
        let hybrid = HybridPolicy::new(self.a, self.p, &game)?;
        PopulationModel::new(self.Z, self.mu, self.beta, game, hybrid)
    }

    pub fn get(&self, param: Parameter) -> f64 {
        match param {
            Parameter::R => self.r,
            Parameter::P => self.p,
            Parameter::A => f64::from(self.a),
            Parameter::M => f64::from(self.M),
            Parameter::N => f64::from(self.N),
            Parameter::Beta => self.beta,
            Parameter::Mu => self.mu,
            Parameter::C => self.c,
        }
    }

    /// Sets one parameter, rejecting values outside its domain.
    pub fn set(&mut self, param: Parameter, value: f64) -> Result<()> {
        param.check(value)?;
        match param {
            Parameter::R => self.r = value,
            Parameter::P => self.p = value,
            Parameter::A => self.a = value.round() as u32,
            Parameter::M => self.M = value.round() as u32,
            Parameter::N => self.N = value.round() as u32,
            Parameter::Beta => self.beta = value,
            Parameter::Mu => self.mu = value,
            Parameter::C => self.c = value,
        }
        Ok(())
    }
}

/// Parameters a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "r")]
    R,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "a")]
    A,
    M,
    N,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "c")]
    C,
}

impl Parameter {
    pub const ALL: [Parameter; 8] = [
        Parameter::R,
        Parameter::P,
        Parameter::A,
        Parameter::M,
        Parameter::N,
        Parameter::Beta,
        Parameter::Mu,
        Parameter::C,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::R => "r",
            Parameter::P => "p",
            Parameter::A => "a",
            Parameter::M => "M",
            Parameter::N => "N",
            Parameter::Beta => "beta",
            Parameter::Mu => "mu",
            Parameter::C => "c",
        }
    }

    fn check(self, value: f64) -> Result<()> {
        let ok = match self {
            Parameter::R | Parameter::P | Parameter::Mu | Parameter::C => {
                (0.0..=1.0).contains(&value)
            }
            Parameter::Beta => value >= 0.0 && value.is_finite(),
            Parameter::A => is_whole(value) && value >= 0.0,
            Parameter::M | Parameter::N => is_whole(value) && value >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            let domain = match self {
                Parameter::Beta => "a finite non-negative number",
                Parameter::A => "a non-negative integer",
                Parameter::M | Parameter::N => "a positive integer",
                _ => "a probability in [0, 1]",
            };
            Err(CrdError::Config(format!(
                "axis value {}={value} must be {domain}",
                self.name()
            )))
        }
    }
}

fn is_whole(value: f64) -> bool {
    value.is_finite() && value.fract() == 0.0 && value <= f64::from(u32::MAX)
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = CrdError;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                CrdError::Config(format!(
                    "unknown sweep parameter '{s}' (expected one of r, p, a, M, N, beta, mu, c)"
                ))
            })
    }
}

/// One sweep axis. Each point assigns a value to every listed parameter,
/// so several parameters can move together (e.g. `N` and `a`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameters: Vec<Parameter>,
    pub points: Vec<Vec<f64>>,
}

impl Axis {
    pub fn values(param: Parameter, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            parameters: vec![param],
            points: values.into_iter().map(|v| vec![v]).collect(),
        }
    }

    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(param: Parameter, start: f64, stop: f64, count: usize) -> Self {
        Self::values(param, linspace(start, stop, count))
    }

    pub fn zipped(parameters: Vec<Parameter>, points: Vec<Vec<f64>>) -> Self {
        Self { parameters, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.parameters.is_empty() || self.points.is_empty() {
            return Err(CrdError::Config("sweep axis has no values".into()));
        }
        for point in &self.points {
            if point.len() != self.parameters.len() {
                return Err(CrdError::Config(format!(
                    "axis point {point:?} does not match parameters {:?}",
                    self.parameters
                )));
            }
            for (param, value) in self.parameters.iter().zip(point) {
                param.check(*value)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Axis {
    type Err = CrdError;

    /// Parses `name=start:stop:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CrdError::Config(format!("axis '{s}' is not of the form name=start:stop:count"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let param: Parameter = name.trim().parse()?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(CrdError::Config(format!("axis '{s}' has no values")));
        }
        Ok(Axis::linspace(param, start, stop, count))
    }
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let span = stop - start;
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        stop
                    } else {
                        start + span * i as f64 / last
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AvgCooperation,
    AvgSuccess,
    StationaryDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    pub base: ParamSet,
    pub axis1: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<Axis>,
    pub metrics: Vec<Metric>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(CrdError::Config("no metrics selected".into()));
        }
        self.axis1.validate()?;
        if let Some(axis2) = &self.axis2 {
            axis2.validate()?;
            if let Some(dup) = axis2
                .parameters
                .iter()
                .find(|p| self.axis1.parameters.contains(p))
            {
                return Err(CrdError::Config(format!(
                    "parameter {dup} appears on both axes"
                )));
            }
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.axis1.len() * self.axis2.as_ref().map_or(1, Axis::len)
    }

    /// Resolved parameters of every cell, row-major over `axis1 × axis2`.
    pub fn cells(&self) -> Result<Vec<ParamSet>> {
        let mut cells = Vec::with_capacity(self.grid_size());
        for p1 in &self.axis1.points {
            let mut row = self.base;
            for (param, value) in self.axis1.parameters.iter().zip(p1) {
                row.set(*param, *value)?;
            }
            match &self.axis2 {
                None => cells.push(row),
                Some(axis2) => {
                    for p2 in &axis2.points {
                        let mut cell = row;
                        for (param, value) in axis2.parameters.iter().zip(p2) {
                            cell.set(*param, *value)?;
                        }
                        cells.push(cell);
                    }
                }
            }
        }
        Ok(cells)
    }

    pub fn wants(&self, metric: Metric) -> bool {
        self.metrics.contains(&metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub params: ParamSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_cooperation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_success: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary_distribution: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub params: ParamSet,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub engine_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub spec: SweepSpec,
    pub records: Vec<SweepRecord>,
    pub skipped: Vec<SkippedCell>,
}

enum CellOutcome {
    Done(SweepRecord),
    Skipped(SkippedCell),
}

fn evaluate_cell(params: ParamSet, spec: &SweepSpec) -> CellOutcome {
    let attempt = || -> Result<SweepRecord> {
        let model = params.to_model()?;
        let dist = stationary_product_form(&model)?;
        Ok(SweepRecord {
            params,
            avg_cooperation: spec
                .wants(Metric::AvgCooperation)
                .then(|| average_cooperation(&dist)),
            avg_success: if spec.wants(Metric::AvgSuccess) {
                Some(average_group_success(&dist, &model)?)
            } else {
                None
            },
            stationary_distribution: spec
                .wants(Metric::StationaryDistribution)
                .then(|| dist.probabilities().to_vec()),
        })
    };
    match attempt() {
        Ok(record) => CellOutcome::Done(record),
        Err(err) => CellOutcome::Skipped(SkippedCell {
            params,
            reason: err.to_string(),
        }),
    }
}

/// Evaluates every cell on the global rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with_workers(spec, None)
}

/// Evaluates every cell on `workers` threads (all cores when `None`).
/// Record order is row-major over the axes whatever the completion order.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells()?;
    let evaluate = || -> Vec<CellOutcome> {
        cells
            .par_iter()
            .map(|params| evaluate_cell(*params, spec))
            .collect()
    };
    let outcomes = match workers {
        None => evaluate(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CrdError::Config(format!("cannot start worker pool: {e}")))?
            .install(evaluate),
    };
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            CellOutcome::Done(r) => records.push(r),
            CellOutcome::Skipped(s) => skipped.push(s),
        }
    }
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        engine_version: ENGINE_VERSION.to_string(),
        timestamp: None,
        spec: spec.clone(),
        records,
        skipped,
    })
}

pub const PRESET_NAMES: [&str; 7] = ["control", "fig2", "fig3", "fig4", "fig5A", "fig5B", "fig5C"];

/// Sweep specs behind a figure, one per panel.
pub fn figure_preset(name: &str) -> Result<Vec<SweepSpec>> {
    let base = ParamSet::default();
    let probability_axis = |param| Axis::linspace(param, 0.0, 1.0, DEFAULT_RESOLUTION);
    let both = vec![Metric::AvgCooperation, Metric::AvgSuccess];
    let with_distribution = vec![
        Metric::AvgCooperation,
        Metric::AvgSuccess,
        Metric::StationaryDistribution,
    ];
    let specs = match name {
        "control" | "fig3" => vec![SweepSpec {
            name: name.to_string(),
            base: ParamSet { a: 0, p: 0.0, ..base },
            axis1: probability_axis(Parameter::R),
            axis2: None,
            metrics: both,
        }],
        "fig2" => [1u32, 3, 5]
            .into_iter()
            .map(|m| SweepSpec {
                name: format!("fig2_M{m}"),
                base: ParamSet { r: 0.9, M: m, ..base },
                axis1: probability_axis(Parameter::P),
                axis2: Some(Axis::values(Parameter::A, (0..base.N).map(f64::from))),
                metrics: both.clone(),
            })
            .collect(),
        "fig4" => [1u32, 2, 3]
            .into_iter()
            .map(|a| SweepSpec {
                name: format!("fig4_a{a}"),
                base: ParamSet { a, ..base },
                axis1: probability_axis(Parameter::R),
                axis2: Some(probability_axis(Parameter::P)),
                metrics: both.clone(),
            })
            .collect(),
        "fig5A" => vec![SweepSpec {
            name: name.to_string(),
            base: ParamSet { M: 2, p: 0.0, ..base },
            axis1: Axis::zipped(
                vec![Parameter::N, Parameter::A],
                vec![vec![5.0, 0.0], vec![6.0, 1.0], vec![7.0, 2.0]],
            ),
            axis2: None,
            metrics: with_distribution,
        }],
        "fig5B" => vec![SweepSpec {
            name: name.to_string(),
            base: ParamSet { p: 1.0, ..base },
            axis1: Axis::zipped(
                vec![Parameter::N, Parameter::A, Parameter::M],
                vec![vec![4.0, 0.0, 2.0], vec![6.0, 2.0, 4.0]],
            ),
            axis2: None,
            metrics: with_distribution,
        }],
        "fig5C" => vec![SweepSpec {
            name: name.to_string(),
            base,
            axis1: Axis::zipped(
                vec![Parameter::A, Parameter::P],
                vec![vec![1.0, 1.0], vec![2.0, 0.5], vec![4.0, 0.25]],
            ),
            axis2: None,
            metrics: with_distribution,
        }],
        other => {
            return Err(CrdError::Config(format!(
                "unknown preset '{other}' (valid presets: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(specs)
}

/// Decimal rendering with `digits` significant digits, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let exponent: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn fmt12(x: f64) -> String {
    format_significant(x, 12)
}

pub(crate) fn param_fields(p: &ParamSet) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        p.Z,
        fmt12(p.mu),
        fmt12(p.beta),
        fmt12(p.b),
        fmt12(p.c),
        p.N,
        p.M,
        p.a,
        fmt12(p.p),
        fmt12(p.r)
    )
}

/// Writes the records as CSV to any writer.
pub fn write_csv_to<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for rec in &result.records {
        let metric = |v: Option<f64>| v.map(fmt12).unwrap_or_default();
        writeln!(
            out,
            "{},{},{}",
            param_fields(&rec.params),
            metric(rec.avg_cooperation),
            metric(rec.avg_success)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Path of the side-log listing skipped cells next to a CSV file.
pub fn skipped_log_path(destination: &Path) -> PathBuf {
    let mut name = destination.as_os_str().to_owned();
    name.push(".skipped.csv");
    PathBuf::from(name)
}

/// Writes the CSV file and, when cells were skipped, a side-log beside it.
pub fn write_csv(result: &SweepResult, destination: &Path) -> Result<()> {
    result.spec.validate()?;
    write_csv_to(result, BufWriter::new(File::create(destination)?))?;
    let log = skipped_log_path(destination);
    if !result.skipped.is_empty() {
        let mut out = BufWriter::new(File::create(&log)?);
        writeln!(out, "Z,mu,beta,b,c,N,M,a,p,r,reason")?;
        for cell in &result.skipped {
            writeln!(out, "{},\"{}\"", param_fields(&cell.params), cell.reason.replace('"', "'"))?;
        }
        out.flush()?;
    } else if log.exists() {
        std::fs::remove_file(log)?;
    }
    Ok(())
}

pub fn write_json_to<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    result.spec.validate()?;
    serde_json::to_writer_pretty(&mut out, result)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_json(result: &SweepResult, destination: &Path) -> Result<()> {
    // validate before touching the file system
    result.spec.validate()?;
    write_json_to(result, BufWriter::new(File::create(destination)?))
}
