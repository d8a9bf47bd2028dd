use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kresling_core::calibration::CalibrationError;
use kresling_core::cloud::CloudCsvWriter;
use kresling_core::design::{design_count, ENUMERATION_GUARD};
use kresling_core::optimize::{cost_table, write_cost_table, ConfigSet};
use kresling_core::simulate::{write_trajectory_csv, TrajectoryJson};
use kresling_core::{
    build_state_diagram, configuration_cloud, exhaustive_search, greedy_search, parse_design, plan_path, random_search,
    ActuatorDesign, Calibration, ConfigurationCloud, CostFunction, Extrapolation, Model, PanelState, Plan, PlanGoal, PressureEvent,
    SearchReport, StateDiagram, TargetSet, Trajectory,
};
use rayon::prelude::*;
use serde::Deserialize;

use crate::{Failure, Format, GlobalArgs};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CostArg {
    TargetError,
    MaxBend,
    MaxDeployment,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ConfigSetArg {
    All,
    StableOnly,
}

impl From<ConfigSetArg> for ConfigSet {
    fn from(c: ConfigSetArg) -> Self {
        match c {
            ConfigSetArg::All => ConfigSet::All,
            ConfigSetArg::StableOnly => ConfigSet::StableOnly,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Greedy,
    Exhaustive,
    Random,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    /// Number of units.
    #[arg(short = 'n', long = "units")]
    pub n: usize,
    /// Write one Ψ value per design instead of the configuration clouds.
    #[arg(long, value_enum)]
    pub cost: Option<CostArg>,
    /// Target points for the target-error cost (TOML or JSON).
    #[arg(long, value_name = "PATH")]
    pub targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub config_set: ConfigSetArg,
    #[arg(long)]
    pub monotone: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Design string, e.g. `[4\\2;3//6;4\\2]`.
    #[arg(long)]
    pub design: String,
    /// Comma-separated event pressures in kPa, e.g. `36,-21.2,-30,0`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "events_file")]
    pub events: Option<String>,
    /// Events as a plan JSON, a JSON array or a plain list of pressures; `-` reads stdin.
    #[arg(long, value_name = "PATH")]
    pub events_file: Option<PathBuf>,
    /// Initial panel state at 0 kPa. Defaults to all panels folded.
    #[arg(long)]
    pub initial: Option<String>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub design: String,
    /// Stable state (`s01`) or configuration label (`s11@p3-`, `s00@max+`).
    #[arg(long, required_unless_present = "tip", conflicts_with = "tip")]
    pub goal: Option<String>,
    /// Tip target `x,y,z` in mm; any configuration within the tolerance counts.
    #[arg(long, allow_hyphen_values = true)]
    pub tip: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub tolerance: f64,
    /// Starting stable state. Defaults to all panels folded.
    #[arg(long)]
    pub from: Option<String>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Target points (TOML with a `targets` array, or a JSON array).
    #[arg(long, value_name = "PATH")]
    pub targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "greedy")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "target_error")]
    pub cost: CostArg,
    #[arg(long, default_value_t = 3)]
    pub n_u: usize,
    #[arg(long, default_value_t = 5)]
    pub n_s_max: usize,
    /// Design length for exhaustive and random search.
    #[arg(short = 'n', long = "units")]
    pub n: Option<usize>,
    /// Number of random samples.
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
    #[arg(long, value_enum, default_value = "all")]
    pub config_set: ConfigSetArg,
    #[arg(long)]
    pub monotone: bool,
}

pub fn load_model(global: &GlobalArgs, calibration: Option<&Path>) -> Result<Model, Failure> {
    let calibration = match calibration.or(global.calibration.as_deref()) {
        Some(path) => Calibration::from_path(path).map_err(|e| match e {
            CalibrationError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        })?,
        None => Calibration::default_table(),
    };
    let extrapolation = if global.clamp {
        Extrapolation::Clamp
    } else {
        Extrapolation::Strict
    };
    Ok(Model::new(calibration).with_extrapolation(extrapolation))
}

/// Parses a design string, pointing at the offending character on failure.
pub fn design_arg(text: &str) -> Result<ActuatorDesign, Failure> {
    parse_design(text).map_err(|e| {
        let column = text.get(..e.position).map_or(e.position, |s| s.chars().count());
        Failure::Usage(format!("{e}\n  {text}\n  {}^", " ".repeat(column)))
    })
}

pub fn state_arg(text: Option<&str>, diagram: &StateDiagram, what: &str) -> Result<PanelState, Failure> {
    match text {
        None => Ok(PanelState::all_folded(diagram.width())),
        Some(t) => PanelState::parse(t.trim(), diagram.width()).ok_or_else(|| {
            Failure::Usage(format!(
                "{what} state `{t}` must have {} bits, e.g. `{}`",
                diagram.width(),
                PanelState::all_folded(diagram.width())
            ))
        }),
    }
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}

/// Events from a plan JSON, a JSON array of pressures or a plain list.
pub fn parse_events(text: &str) -> Result<Vec<PressureEvent>, Failure> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let plan: Plan = serde_json::from_str(text).map_err(|e| Failure::Usage(format!("plan JSON: {e}")))?;
        return Ok(plan.events);
    }
    if trimmed.starts_with('[') {
        let values: Vec<f64> =
            serde_json::from_str(text).map_err(|e| Failure::Usage(format!("event array: {e}")))?;
        return Ok(values.into_iter().map(PressureEvent::new).collect());
    }
    Ok(numbers(text, "events")?.into_iter().map(PressureEvent::new).collect())
}

#[derive(Deserialize)]
struct TargetsDoc {
    targets: Vec<[f64; 3]>,
}

/// Reads targets from a JSON array or any TOML file with a `targets` array.
pub fn load_targets(path: &Path) -> Result<TargetSet, Failure> {
    let text = read_input(path)?;
    let raw = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<[f64; 3]>>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str::<TargetsDoc>(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            .targets
    };
    TargetSet::new(raw).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn cost_function(
    cost: CostArg,
    targets: Option<TargetSet>,
    config_set: ConfigSetArg,
    monotone: bool,
) -> Result<CostFunction, Failure> {
    let f = match (cost, targets) {
        (CostArg::TargetError, Some(t)) => CostFunction::target_error(t),
        (CostArg::TargetError, None) => return Err(Failure::Usage("the target_error cost needs targets".into())),
        (_, Some(_)) => return Err(Failure::Usage("targets are only used by the target_error cost".into())),
        (CostArg::MaxBend, None) => CostFunction::max_bend(),
        (CostArg::MaxDeployment, None) => CostFunction::max_deployment(),
    };
    Ok(f.with_config_set(config_set.into()).with_monotone(monotone)?)
}

pub struct SearchTask {
    pub method: MethodArg,
    pub cost: CostFunction,
    pub n_u: usize,
    pub n_s_max: usize,
    pub n: Option<usize>,
    pub budget: u64,
    pub seed: u64,
    pub force: bool,
}

pub fn run_search(model: &Model, task: &SearchTask) -> Result<SearchReport, Failure> {
    let need_n = || {
        task.n
            .ok_or_else(|| Failure::Usage(format!("{:?} search needs a design length (-n)", task.method).to_lowercase()))
    };
    Ok(match task.method {
        MethodArg::Greedy => greedy_search(model, &task.cost, task.n_u, task.n_s_max)?,
        MethodArg::Exhaustive => exhaustive_search(model, &task.cost, need_n()?, task.force)?,
        MethodArg::Random => random_search(model, &task.cost, need_n()?, task.budget, task.seed)?,
    })
}

pub fn report_summary(report: &SearchReport) {
    eprintln!(
        "best {} (n = {}) psi = {:.6}; {} evaluations in {:.2} s",
        report.best.design, report.best.n_units, report.best.psi, report.total_evaluations, report.wall_time_s
    );
}

pub fn plan_goal(
    goal: Option<&str>,
    tip: Option<&str>,
    tolerance: f64,
    diagram: &StateDiagram,
) -> Result<PlanGoal, Failure> {
    if let Some(tip) = tip {
        let v = numbers(tip, "tip")?;
        let target_mm: [f64; 3] = v
            .try_into()
            .map_err(|_| Failure::Usage("tip must have three coordinates x,y,z".into()))?;
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(Failure::Usage("tolerance must be a non-negative number".into()));
        }
        return Ok(PlanGoal::Tip { target_mm, tolerance_mm: tolerance });
    }
    let goal = goal.ok_or_else(|| Failure::Usage("a goal or a tip target is required".into()))?;
    PlanGoal::parse(goal, diagram).ok_or_else(|| {
        let labels: Vec<String> = diagram.nodes.iter().map(|n| n.label(diagram)).collect();
        Failure::Usage(format!("unknown goal `{goal}`; configurations are {}", labels.join(", ")))
    })
}

pub fn plan_text(plan: &Plan) -> String {
    let mut s = String::new();
    let mut at = 0.0;
    for (i, e) in plan.events.iter().enumerate() {
        let verb = if e.target_kpa > at { "raise" } else { "lower" };
        s.push_str(&format!("{}. {verb} pressure to {} kPa\n", i + 1, e.target_kpa));
        at = e.target_kpa;
    }
    s.push_str(&format!(
        "final: s{} at {} kPa (total swing {} kPa)\n",
        plan.final_state, plan.final_pressure_kpa, plan.total_swing_kpa
    ));
    s
}

pub fn trajectory_summary(t: &Trajectory) {
    let last = t.final_sample();
    eprintln!(
        "final state {} at {} kPa; tip ({:.3}, {:.3}, {:.3}) mm",
        last.state, last.pressure_kpa, last.tip.d[0], last.tip.d[1], last.tip.d[2]
    );
}

pub fn open_output(global: &GlobalArgs) -> Result<Box<dyn Write>, Failure> {
    Ok(match &global.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn unsupported(format: Format, command: &str) -> Failure {
    Failure::Usage(format!("{command} does not support --format {format:?}").to_lowercase())
}

const CHUNK: u64 = 4096;

/// Evaluates clouds in parallel chunks and hands them out in lexicographic order.
fn for_each_cloud(
    model: &Model,
    n: usize,
    total: u64,
    mut f: impl FnMut(&ConfigurationCloud) -> Result<(), Failure>,
) -> Result<(), Failure> {
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let clouds = (start..end)
            .into_par_iter()
            .map(|i| {
                let design = ActuatorDesign::from_lex_index(n, u128::from(i))
                    .ok_or_else(|| kresling_core::Error::Internal(format!("design index {i} out of range")))?;
                configuration_cloud(&design, model)
            })
            .collect::<kresling_core::Result<Vec<_>>>()?;
        for cloud in &clouds {
            f(cloud)?;
        }
        start = end;
    }
    Ok(())
}

pub fn enumerate(global: &GlobalArgs, args: &EnumerateArgs) -> Result<(), Failure> {
    let model = load_model(global, None)?;
    if args.n == 0 {
        return Err(Failure::Usage("n must be at least 1".into()));
    }
    if args.n > ENUMERATION_GUARD && !global.force {
        return Err(kresling_core::Error::Guard {
            n: args.n,
            limit: ENUMERATION_GUARD,
        }
        .into());
    }
    let format = global.format.unwrap_or(Format::Csv);
    let count = design_count(args.n);
    let mut out = open_output(global)?;

    if let Some(cost) = args.cost {
        let targets = args.targets.as_deref().map(load_targets).transpose()?;
        let cost = cost_function(cost, targets, args.config_set, args.monotone)?;
        let rows = cost_table(&model, &cost, args.n, global.force)?;
        match format {
            Format::Csv => write_cost_table(&rows, &mut out)?,
            Format::Json => serde_json::to_writer(&mut out, &rows)?,
            Format::Text => return Err(unsupported(format, "enumerate")),
        }
        out.flush()?;
        eprintln!("{} designs", rows.len());
        return Ok(());
    }

    let total = u64::try_from(count).map_err(|_| Failure::Usage(format!("38^{} designs cannot be listed", args.n)))?;
    match format {
        Format::Csv => {
            let mut w = CloudCsvWriter::new(&mut out);
            for_each_cloud(&model, args.n, total, |c| Ok(w.write(c)?))?;
            w.finish()?;
        }
        Format::Json => {
            let mut first = true;
            for_each_cloud(&model, args.n, total, |c| {
                out.write_all(if first { b"[\n" } else { b",\n" })?;
                first = false;
                serde_json::to_writer(&mut out, c)?;
                Ok(())
            })?;
            out.write_all(if first { b"[]\n" } else { b"\n]\n" })?;
        }
        Format::Text => return Err(unsupported(format, "enumerate")),
    }
    out.flush()?;
    eprintln!("{count} designs");
    Ok(())
}

pub fn simulate(global: &GlobalArgs, args: &SimulateArgs) -> Result<(), Failure> {
    let model = load_model(global, None)?;
    let design = design_arg(&args.design)?;
    let diagram = build_state_diagram(&design, &model.calibration);
    let initial = state_arg(args.initial.as_deref(), &diagram, "initial")?;
    let events = match (&args.events, &args.events_file) {
        (Some(text), _) => parse_events(text)?,
        (None, Some(path)) => parse_events(&read_input(path)?)?,
        (None, None) => Vec::new(),
    };
    let trajectory = kresling_core::simulate_path(&design, &model, &events, initial)?;
    let mut out = open_output(global)?;
    match global.format.unwrap_or(Format::Csv) {
        Format::Csv => write_trajectory_csv(&trajectory, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &TrajectoryJson::from_trajectory(&trajectory))?;
            writeln!(out)?;
        }
        f @ Format::Text => return Err(unsupported(f, "simulate")),
    }
    out.flush()?;
    trajectory_summary(&trajectory);
    Ok(())
}

pub fn plan(global: &GlobalArgs, args: &PlanArgs) -> Result<(), Failure> {
    let model = load_model(global, None)?;
    let design = design_arg(&args.design)?;
    let diagram = build_state_diagram(&design, &model.calibration);
    let from = state_arg(args.from.as_deref(), &diagram, "starting")?;
    let goal = plan_goal(args.goal.as_deref(), args.tip.as_deref(), args.tolerance, &diagram)?;
    let plan = plan_path(&design, &model, &goal, from)?;
    let mut out = open_output(global)?;
    match global.format.unwrap_or(Format::Text) {
        Format::Text => out.write_all(plan_text(&plan).as_bytes())?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &plan)?;
            writeln!(out)?;
        }
        f @ Format::Csv => return Err(unsupported(f, "plan")),
    }
    out.flush()?;
    Ok(())
}

pub fn optimize(global: &GlobalArgs, args: &OptimizeArgs) -> Result<(), Failure> {
    let model = load_model(global, None)?;
    let targets = args.targets.as_deref().map(load_targets).transpose()?;
    let task = SearchTask {
        method: args.method,
        cost: cost_function(args.cost, targets, args.config_set, args.monotone)?,
        n_u: args.n_u,
        n_s_max: args.n_s_max,
        n: args.n,
        budget: args.budget,
        seed: global.seed,
        force: global.force,
    };
    let report = run_search(&model, &task)?;
    let mut out = open_output(global)?;
    match global.format.unwrap_or(Format::Json) {
        Format::Json => writeln!(out, "{}", report.to_json()?)?,
        Format::Csv => report.write_curve_csv(&mut out)?,
        f @ Format::Text => return Err(unsupported(f, "optimize")),
    }
    out.flush()?;
    report_summary(&report);
    Ok(())
}
