//! Command-line driver: validate assets, run and compare scenarios, play the
//! operator in a REPL, serve the HTTP back-end and summarize traces.
//!
//! Exit codes: 0 on success, 1 on validation or runtime errors, 2 on usage
//! errors.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use coassembly::assembly::{validate_plan, AssemblyPlan};
use coassembly::backend::Mode;
use coassembly::metrics::{compare, compute_metrics, csv_header, csv_row, render_table, MetricsReport};
use coassembly::script::{CompiledScript, ConversationScript};
use coassembly::sim::{run_batch, Scenario, ScenarioConfig, ScenarioError, Trace};

pub mod repl;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "coassembly", version, about = "Simulated human-robot co-assembly with a conversational assistant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario, plan or script for errors.
    Validate(ValidateArgs),
    /// Run scenarios headless and write traces and metrics.
    Run(RunArgs),
    /// Run one scenario in both modes with a shared seed.
    Compare(ScenarioArgs),
    /// Play the operator yourself against a live scenario.
    Repl(ReplArgs),
    /// Serve the HTTP back-end for a live scenario.
    Serve(ServeArgs),
    /// Summarize trace files as a table, CSV and JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
#[group(id = "target", required = true, multiple = true)]
pub struct ValidateArgs {
    #[arg(long, group = "target")]
    pub scenario: Option<PathBuf>,
    #[arg(long, group = "target")]
    pub plan: Option<PathBuf>,
    #[arg(long, group = "target")]
    pub script: Option<PathBuf>,
}

/// Options shared by every command that loads a scenario.
#[derive(Clone, Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Replaces the scenario's assembly plan.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Replaces the scenario's conversational script.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated seconds before the run is cut off.
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario files; more than one runs a batch.
    #[arg(long, required = true, num_args = 1..)]
    pub scenario: Vec<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Let simulated time follow the wall clock instead of stepping by turn.
    #[arg(long)]
    pub realtime: bool,
    /// Also write the session trace to the output directory.
    #[arg(long)]
    pub save: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trace files in NDJSON form.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Directory for report.json and report.csv.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// A failure that ends the command with a nonzero exit code.
#[derive(Debug)]
pub enum Failure {
    Invalid(Vec<String>),
    Runtime(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn invalid(errs: Vec<ScenarioError>) -> Failure {
    Failure::Invalid(errs.iter().map(ToString::to_string).collect())
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(cli.command, stdin, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Invalid(errs) => {
                    for e in errs {
                        let _ = writeln!(stderr, "error: {e}");
                    }
                }
                Failure::Runtime(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                }
            }
            EXIT_INVALID
        }
    }
}

fn execute(command: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Validate(a) => validate(&a, stdout),
        Command::Run(a) => run(&a, stdout),
        Command::Compare(a) => compare_modes(&a, stdout),
        Command::Repl(a) => {
            let scenario = load(&a.common, a.mode)?;
            let trace = repl::session(&scenario, a.realtime, stdin, stdout)?;
            if a.save {
                let path = a.common.out.join(format!("{}.repl.trace.jsonl", scenario.config.id));
                write_file(&path, &trace.to_ndjson())?;
                writeln!(stdout, "trace written to {}", path.display())?;
            }
            Ok(())
        }
        Command::Serve(a) => serve(&a),
        Command::Report(a) => report(&a, stdout),
    }
}

/// Loads a scenario and applies command-line overrides.
pub fn load(args: &ScenarioArgs, mode: Option<Mode>) -> Result<Scenario, Failure> {
    let scenario = load_with(&args.scenario, args.plan.as_deref(), args.script.as_deref(), mode, args.seed, args.max_time)?;
    log::info!("loaded scenario {} ({})", scenario.config.id, scenario.mode());
    Ok(scenario)
}

fn load_with(
    path: &Path,
    plan: Option<&Path>,
    script: Option<&Path>,
    mode: Option<Mode>,
    seed: Option<u64>,
    max_time: Option<f64>,
) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
    let mut config = ScenarioConfig::from_json(&text).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let plan_path = plan.map_or_else(|| dir.join(&config.plan), Path::to_path_buf);
    let script_path = script.map_or_else(|| dir.join(&config.script), Path::to_path_buf);
    let baseline_path = dir.join(&config.baseline_script);
    if let Some(mode) = mode {
        config.mode = mode;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(t) = max_time {
        config.max_time = t;
    }
    let load_err = |e: coassembly::script::LoadError| invalid(vec![ScenarioError::Load(e)]);
    let plan = AssemblyPlan::load(&plan_path).map_err(load_err)?;
    let script = ConversationScript::load(&script_path).map_err(load_err)?;
    let baseline = ConversationScript::load(&baseline_path).map_err(load_err)?;
    Scenario::from_parts(config, plan, script, baseline).map_err(invalid)
}

fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut errs = Vec::new();
    if let Some(path) = &a.scenario {
        if let Err(e) = load_with(path, a.plan.as_deref(), a.script.as_deref(), None, None, None) {
            match e {
                Failure::Invalid(e) => errs.extend(e),
                other => return Err(other),
            }
        }
    } else {
        if let Some(path) = &a.plan {
            match AssemblyPlan::load(path) {
                Ok(plan) => {
                    if let Err(e) = validate_plan(&plan) {
                        errs.extend(e.iter().map(|e| format!("plan: {e}")));
                    }
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
        if let Some(path) = &a.script {
            match ConversationScript::load(path) {
                Ok(script) => {
                    if let Err(e) = CompiledScript::compile(script) {
                        errs.extend(e.iter().map(|e| format!("script: {e}")));
                    }
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
    }
    if errs.is_empty() {
        writeln!(out, "ok")?;
        Ok(())
    } else {
        Err(Failure::Invalid(errs))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn run(a: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut scenarios = Vec::new();
    let mut errs = Vec::new();
    for path in &a.scenario {
        match load_with(path, a.plan.as_deref(), a.script.as_deref(), a.mode, a.seed, a.max_time) {
            Ok(s) => scenarios.push(s),
            Err(Failure::Invalid(e)) => errs.extend(e.into_iter().map(|e| format!("{}: {e}", path.display()))),
            Err(other) => return Err(other),
        }
    }
    if !errs.is_empty() {
        return Err(Failure::Invalid(errs));
    }
    let results = run_batch(&scenarios, a.seed.unwrap_or(0));
    let mut rows = Vec::new();
    for (scenario, result) in scenarios.iter().zip(results) {
        let name = format!("{}.{}", scenario.config.id, scenario.mode());
        let metrics = result.metrics.map_err(|e| Failure::Runtime(format!("{name}: {e}")))?;
        write_file(&a.out.join(format!("{name}.trace.jsonl")), &result.trace.to_ndjson())?;
        write_file(&a.out.join(format!("{name}.metrics.json")), &pretty(&metrics))?;
        rows.push((name, metrics));
    }
    let table: Vec<(&str, &MetricsReport)> = rows.iter().map(|(n, m)| (n.as_str(), m)).collect();
    write!(out, "{}", render_table(&table))?;
    Ok(())
}

fn compare_modes(a: &ScenarioArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let scenario = load(a, None)?;
    let runs: Vec<Scenario> = Mode::ALL.iter().map(|&m| scenario.with_mode(m)).collect();
    let results = run_batch(&runs, scenario.config.seed);
    let mut reports = Vec::new();
    for (mode, result) in Mode::ALL.iter().zip(results) {
        write_file(&a.out.join(format!("{mode}.trace.jsonl")), &result.trace.to_ndjson())?;
        let metrics = result.metrics.map_err(|e| Failure::Runtime(format!("{mode}: {e}")))?;
        reports.push(metrics);
    }
    let (base, prop) = (&reports[0], &reports[1]);
    let cmp = compare(base, prop).map_err(|e| Failure::Runtime(e.to_string()))?;
    let doc = serde_json::json!({
        "scenario": scenario.config.id,
        "seed": scenario.config.seed,
        "baseline": base,
        "conversational": prop,
        "execution_time_reduction_pct": cmp.execution_time_reduction_pct,
        "downtime_reduction_pct": cmp.downtime_reduction_pct,
    });
    write_file(&a.out.join("comparison.json"), &pretty(&doc))?;
    write!(out, "{}", render_table(&[("baseline", base), ("conversational", prop)]))?;
    writeln!(
        out,
        "execution time reduction {:.1}%, robot downtime reduction {:.1}%",
        cmp.execution_time_reduction_pct, cmp.downtime_reduction_pct
    )?;
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<(), Failure> {
    use coassembly::sim::{OperatorKind, Sim};
    use coassembly_server::{AppState, Clock};

    let scenario = load(&a.common, a.mode)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let sim = Sim::new(&scenario, OperatorKind::External);
        let state = AppState::new(sim, Clock::Wall { origin: std::time::Instant::now() });
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], a.port));
        coassembly_server::serve(state, addr).await
    })?;
    Ok(())
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for path in &a.traces {
        let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let trace = Trace::from_ndjson(&text).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.trim_end_matches(".jsonl").trim_end_matches(".trace"))
            .unwrap_or("trace")
            .to_owned();
        let metrics = compute_metrics(&trace).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
        rows.push((name, metrics));
    }
    let table: Vec<(&str, &MetricsReport)> = rows.iter().map(|(n, m)| (n.as_str(), m)).collect();
    let mut csv = csv_header();
    csv.push('\n');
    for (n, m) in &table {
        csv.push_str(&csv_row(n, m));
        csv.push('\n');
    }
    write!(out, "{}\n{}", render_table(&table), csv)?;
    if let Some(dir) = &a.out {
        let json: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(n, m)| (n.clone(), serde_json::to_value(m).expect("metrics serialize")))
            .collect();
        write_file(&dir.join("report.json"), &pretty(&json))?;
        write_file(&dir.join("report.csv"), &csv)?;
    }
    Ok(())
}
