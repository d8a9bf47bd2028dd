//! Scenario files: one TOML document naming a command and its inputs, with
//! an optional expected-output snapshot next to it.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use kresling_core::simulate::TrajectoryJson;
use kresling_core::{build_state_diagram, plan_path, simulate_path, PressureEvent, TargetSet};
use serde::Deserialize;
use serde_json::Value;

use crate::commands::{
    cost_function, design_arg, load_model, plan_goal, plan_text, report_summary, run_search, state_arg,
    trajectory_summary, ConfigSetArg, CostArg, MethodArg, SearchTask,
};
use crate::{Failure, GlobalArgs};

/// Relative tolerance for numbers when checking a snapshot.
const SNAPSHOT_RTOL: f64 = 1e-9;
/// Keys left out of snapshot comparison.
const VOLATILE_KEYS: [&str; 1] = ["wall_time_s"];

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Compare the result with the scenario's expected snapshot.
    #[arg(long, conflicts_with = "bless")]
    pub check: bool,
    /// Overwrite the expected snapshot with the result.
    #[arg(long)]
    pub bless: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCommand {
    Simulate,
    Plan,
    Optimize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub command: ScenarioCommand,
    /// Calibration table, relative to the scenario file.
    pub calibration: Option<PathBuf>,
    /// Expected snapshot, relative to the scenario file.
    pub expected: Option<PathBuf>,

    pub design: Option<String>,
    pub initial: Option<String>,
    pub events: Option<Vec<f64>>,

    pub from: Option<String>,
    pub goal: Option<String>,
    pub tip: Option<[f64; 3]>,
    pub tolerance: Option<f64>,

    pub method: Option<MethodArg>,
    pub cost: Option<CostArg>,
    pub config_set: Option<ConfigSetArg>,
    pub monotone: Option<bool>,
    pub targets: Option<Vec<[f64; 3]>>,
    pub n_u: Option<usize>,
    pub n_s_max: Option<usize>,
    pub n: Option<usize>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, Failure> {
        let s: Scenario = toml::from_str(text).map_err(|e| Failure::Usage(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    fn present(&self) -> Vec<&'static str> {
        let mut p = Vec::new();
        let mut mark = |name, set: bool| {
            if set {
                p.push(name)
            }
        };
        mark("design", self.design.is_some());
        mark("initial", self.initial.is_some());
        mark("events", self.events.is_some());
        mark("from", self.from.is_some());
        mark("goal", self.goal.is_some());
        mark("tip", self.tip.is_some());
        mark("tolerance", self.tolerance.is_some());
        mark("method", self.method.is_some());
        mark("cost", self.cost.is_some());
        mark("config_set", self.config_set.is_some());
        mark("monotone", self.monotone.is_some());
        mark("targets", self.targets.is_some());
        mark("n_u", self.n_u.is_some());
        mark("n_s_max", self.n_s_max.is_some());
        mark("n", self.n.is_some());
        mark("budget", self.budget.is_some());
        mark("seed", self.seed.is_some());
        p
    }

    /// Rejects fields the command does not use and missing required ones.
    pub fn validate(&self) -> Result<(), Failure> {
        let (allowed, required): (&[&str], &[&str]) = match self.command {
            ScenarioCommand::Simulate => (&["design", "initial", "events"], &["design"]),
            ScenarioCommand::Plan => (&["design", "from", "goal", "tip", "tolerance"], &["design"]),
            ScenarioCommand::Optimize => (
                &[
                    "method", "cost", "config_set", "monotone", "targets", "n_u", "n_s_max", "n", "budget", "seed",
                ],
                &["method"],
            ),
        };
        let present = self.present();
        let command = format!("{:?}", self.command).to_lowercase();
        if let Some(extra) = present.iter().find(|f| !allowed.contains(f)) {
            return Err(Failure::Usage(format!(
                "scenario {}: field `{extra}` is not used by the {command} command",
                self.name
            )));
        }
        if let Some(missing) = required.iter().find(|f| !present.contains(f)) {
            return Err(Failure::Usage(format!(
                "scenario {}: the {command} command needs `{missing}`",
                self.name
            )));
        }
        if self.command == ScenarioCommand::Plan && self.goal.is_some() == self.tip.is_some() {
            return Err(Failure::Usage(format!(
                "scenario {}: a plan needs exactly one of `goal` and `tip`",
                self.name
            )));
        }
        Ok(())
    }

    /// Runs the scenario and returns its JSON result.
    pub fn execute(&self, global: &GlobalArgs, base: &Path) -> Result<Value, Failure> {
        let calibration = self.calibration.as_ref().map(|p| base.join(p));
        let model = load_model(global, calibration.as_deref())?;
        let design = || design_arg(self.design.as_deref().unwrap_or_default());
        match self.command {
            ScenarioCommand::Simulate => {
                let design = design()?;
                let diagram = build_state_diagram(&design, &model.calibration);
                let initial = state_arg(self.initial.as_deref(), &diagram, "initial")?;
                let events: Vec<PressureEvent> =
                    self.events.iter().flatten().map(|&p| PressureEvent::new(p)).collect();
                let t = simulate_path(&design, &model, &events, initial)?;
                trajectory_summary(&t);
                Ok(serde_json::to_value(TrajectoryJson::from_trajectory(&t))?)
            }
            ScenarioCommand::Plan => {
                let design = design()?;
                let diagram = build_state_diagram(&design, &model.calibration);
                let from = state_arg(self.from.as_deref(), &diagram, "starting")?;
                let tip = self.tip.map(|t| format!("{},{},{}", t[0], t[1], t[2]));
                let goal = plan_goal(self.goal.as_deref(), tip.as_deref(), self.tolerance.unwrap_or(1.0), &diagram)?;
                let plan = plan_path(&design, &model, &goal, from)?;
                eprint!("{}", plan_text(&plan));
                Ok(serde_json::to_value(&plan)?)
            }
            ScenarioCommand::Optimize => {
                let targets = self
                    .targets
                    .clone()
                    .map(TargetSet::new)
                    .transpose()
                    .map_err(|e| Failure::Usage(format!("scenario {}: {e}", self.name)))?;
                let task = SearchTask {
                    method: self.method.unwrap_or(MethodArg::Greedy),
                    cost: cost_function(
                        self.cost.unwrap_or(CostArg::TargetError),
                        targets,
                        self.config_set.unwrap_or(ConfigSetArg::All),
                        self.monotone.unwrap_or(false),
                    )?,
                    n_u: self.n_u.unwrap_or(3),
                    n_s_max: self.n_s_max.unwrap_or(5),
                    n: self.n,
                    budget: self.budget.unwrap_or(10_000),
                    seed: self.seed.unwrap_or(global.seed),
                    force: global.force,
                };
                let report = run_search(&model, &task)?;
                report_summary(&report);
                Ok(serde_json::to_value(&report)?)
            }
        }
    }
}

/// Differences between two JSON documents, ignoring volatile keys and
/// comparing numbers to a relative tolerance.
pub fn snapshot_diff(expected: &Value, actual: &Value) -> Vec<String> {
    let mut diffs = Vec::new();
    diff_into(expected, actual, "$", &mut diffs);
    diffs
}

fn diff_into(expected: &Value, actual: &Value, path: &str, diffs: &mut Vec<String>) {
    match (expected, actual) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            if (a - b).abs() > SNAPSHOT_RTOL * a.abs().max(b.abs()).max(1e-3) {
                diffs.push(format!("{path}: expected {a}, got {b}"));
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            for (k, va) in a {
                if VOLATILE_KEYS.contains(&k.as_str()) {
                    continue;
                }
                match b.get(k) {
                    Some(vb) => diff_into(va, vb, &format!("{path}.{k}"), diffs),
                    None => diffs.push(format!("{path}.{k}: missing")),
                }
            }
            for k in b.keys().filter(|k| !a.contains_key(*k) && !VOLATILE_KEYS.contains(&k.as_str())) {
                diffs.push(format!("{path}.{k}: unexpected"));
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                diffs.push(format!("{path}: expected {} items, got {}", a.len(), b.len()));
                return;
            }
            for (i, (va, vb)) in a.iter().zip(b).enumerate() {
                diff_into(va, vb, &format!("{path}[{i}]"), diffs);
            }
        }
        (a, b) if a == b => {}
        (a, b) => diffs.push(format!("{path}: expected {a}, got {b}")),
    }
}

pub fn run(global: &GlobalArgs, args: &RunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.scenario.display())))?;
    let scenario = Scenario::parse(&text)?;
    let base = args.scenario.parent().unwrap_or(Path::new("."));
    let expected_path = || {
        scenario
            .expected
            .as_ref()
            .map(|p| base.join(p))
            .ok_or_else(|| Failure::Usage(format!("scenario {} has no `expected` snapshot", scenario.name)))
    };
    if let Some(format) = global.format.filter(|f| *f != crate::Format::Json) {
        return Err(Failure::Usage(format!("run writes JSON only (got --format {format:?})").to_lowercase()));
    }
    let result = scenario.execute(global, base)?;
    let rendered = serde_json::to_string_pretty(&result)? + "\n";

    if args.bless {
        let path = expected_path()?;
        std::fs::write(&path, &rendered).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        eprintln!("{}: wrote {}", scenario.name, path.display());
        return Ok(());
    }
    if args.check {
        let path = expected_path()?;
        let expected_text =
            std::fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let expected: Value = serde_json::from_str(&expected_text)?;
        let diffs = snapshot_diff(&expected, &result);
        if diffs.is_empty() {
            eprintln!("{}: matches {}", scenario.name, path.display());
            return Ok(());
        }
        for d in diffs.iter().take(20) {
            eprintln!("  {d}");
        }
        return Err(Failure::Runtime(format!(
            "{}: {} differences from {}",
            scenario.name,
            diffs.len(),
            path.display()
        )));
    }
    let mut out = crate::commands::open_output(global)?;
    out.write_all(rendered.as_bytes())?;
    out.flush()?;
    Ok(())
}
