//! Command-line front end. Every command writes CSV to the given output and
//! diagnostics to the error stream.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::ao::{audit, exhaustive_baseline, solve, Solution};
use crate::error::{Error, Result};
use crate::scaling::{compare, sweep_elements, sweep_power, PlacementPolicy, SweepRow};
use crate::scenario::{parse_scenario, Scenario};
use crate::validate::{run_all, CheckResult};

/// Bumped whenever a column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

pub const SOLUTION_COLUMNS: [&str; 4] = ["section", "index", "field", "value"];
pub const SWEEP_COLUMNS: [&str; 9] = [
    "value",
    "double_active",
    "single_active",
    "double_passive",
    "single_passive",
    "slope_double_active",
    "slope_single_active",
    "slope_double_passive",
    "slope_single_passive",
];
pub const COMPARE_COLUMNS: [&str; 6] = ["system", "min_rate", "x_first", "x_second", "m_first", "m_second"];
pub const VALIDATE_COLUMNS: [&str; 4] = ["check", "status", "max_rel_error", "tolerance"];

#[derive(Debug, Parser)]
#[command(name = "dual-irs-opt", version, about = "Deploy two active reflecting surfaces for max-min rate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario's user-draw seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Placement spacing of the exhaustive baseline (m).
    #[arg(long, global = true, default_value_t = 2.0)]
    pub grid_step: f64,
    /// Split spacing of the exhaustive baseline (elements).
    #[arg(long, global = true, default_value_t = 1)]
    pub alloc_step: usize,
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [1024usize, 2048, 4096])]
    pub m_values: Vec<usize>,
    /// Per-element powers (W).
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0])]
    pub pe_values: Vec<f64>,
    /// Sweeps re-optimize every deployment at each point instead of fixing the spread placement.
    #[arg(long, global = true)]
    pub optimize_placement: bool,
    /// Print the output columns of the command instead of running it.
    #[arg(long, global = true)]
    pub schema: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Alternating optimization of the split and placement.
    Solve,
    /// Joint exhaustive baseline and its gap to the alternating optimization.
    Oracle,
    /// Capacity of every system as the element budget grows.
    SweepM,
    /// Capacity of every system as the per-element power grows.
    SweepPe,
    /// Min-rate of the four systems at the scenario point.
    Compare,
    /// Oracle-equivalence and constraint-audit suites.
    Validate,
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

type Csv<'a> = csv::Writer<&'a mut dyn Write>;

fn csv_writer(out: &mut dyn Write) -> Csv<'_> {
    csv::WriterBuilder::new().from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("writing CSV: {e}"))
}

fn write_row<I, S>(w: &mut Csv, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(csv_err)
}

fn write_solution(w: &mut Csv, prefix: &str, s: &Solution) -> Result<()> {
    let mut put = |section: &str, index: usize, field: &str, value: String| {
        write_row(w, [format!("{prefix}{section}"), index.to_string(), field.to_string(), value])
    };
    put("placement", 0, "x0", num(s.placement.x0))?;
    put("placement", 0, "x1", num(s.placement.x1))?;
    put("placement", 0, "x2", num(s.placement.x2))?;
    put("allocation", 0, "m1", s.allocation.m1.to_string())?;
    put("allocation", 0, "m2", s.allocation.m2.to_string())?;
    put("allocation", 0, "m1_real", num(s.allocation.m1_real))?;
    put("allocation", 0, "m2_real", num(s.allocation.m2_real))?;
    for (u, (snr, rate)) in s.report.snr.iter().zip(&s.report.rates).enumerate() {
        put("user", u, "snr", num(*snr))?;
        put("user", u, "rate", num(*rate))?;
    }
    put("summary", 0, "min_rate", num(s.report.min_rate))?;
    put("summary", 0, "worst_user", s.report.worst_user.to_string())?;
    for (k, r) in s.trace.iter().enumerate() {
        put("trace", k, "min_rate", num(*r))?;
    }
    Ok(())
}

fn write_sweep(w: &mut Csv, rows: &[SweepRow]) -> Result<()> {
    write_row(w, SWEEP_COLUMNS)?;
    for r in rows {
        let mut rec = vec![num(r.value)];
        rec.extend(r.rates.iter().map(|v| num(*v)));
        rec.extend(r.slopes.iter().map(|s| s.map(num).unwrap_or_default()));
        write_row(w, rec)?;
    }
    Ok(())
}

fn columns(command: Command) -> Vec<&'static str> {
    match command {
        Command::Solve | Command::Oracle => SOLUTION_COLUMNS.to_vec(),
        Command::SweepM | Command::SweepPe => SWEEP_COLUMNS.to_vec(),
        Command::Compare => COMPARE_COLUMNS.to_vec(),
        Command::Validate => VALIDATE_COLUMNS.to_vec(),
    }
}

fn load(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("reading {}: {e}", path.display())))?;
            parse_scenario(&text)?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
        s.validate()?;
    }
    Ok(s)
}

/// Runs one parsed command; returns the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let mut w = csv_writer(out);
    if cli.schema {
        write_row(&mut w, ["schema_version", "position", "column"])?;
        for (i, c) in columns(cli.command).into_iter().enumerate() {
            write_row(&mut w, [SCHEMA_VERSION.to_string(), i.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::invalid(e.to_string()))?;
        return Ok(0);
    }
    let scenario = load(cli)?;
    let params = &scenario.params;
    let geometry = scenario.geometry();
    let policy = if cli.optimize_placement { PlacementPolicy::Optimize } else { PlacementPolicy::Spread };
    let mut code = 0;
    match cli.command {
        Command::Solve => {
            let s = solve(params, &geometry)?;
            audit(params, &geometry, &s)?;
            write_row(&mut w, SOLUTION_COLUMNS)?;
            write_solution(&mut w, "", &s)?;
        }
        Command::Oracle => {
            let base = exhaustive_baseline(params, &geometry, cli.alloc_step, cli.grid_step)?;
            let ao = solve(params, &geometry)?;
            write_row(&mut w, SOLUTION_COLUMNS)?;
            write_solution(&mut w, "baseline_", &base)?;
            write_solution(&mut w, "ao_", &ao)?;
            let gap = (base.report.min_rate - ao.report.min_rate) / base.report.min_rate;
            write_row(&mut w, ["gap".to_string(), "0".into(), "relative".into(), num(gap)])?;
        }
        Command::SweepM => write_sweep(&mut w, &sweep_elements(params, &geometry, policy, &cli.m_values)?)?,
        Command::SweepPe => write_sweep(&mut w, &sweep_power(params, &geometry, policy, &cli.pe_values)?)?,
        Command::Compare => {
            // Each system is compared at its own best deployment.
            write_row(&mut w, COMPARE_COLUMNS)?;
            for r in compare(params, &geometry, PlacementPolicy::Optimize)? {
                let site = |i: usize| r.sites.get(i).map(|v| num(*v)).unwrap_or_default();
                let count = |i: usize| r.elements.get(i).map(|v| v.to_string()).unwrap_or_default();
                write_row(&mut w, [r.kind.name().to_string(), num(r.min_rate), site(0), site(1), count(0), count(1)])?;
            }
        }
        Command::Validate => {
            let checks: Vec<CheckResult> = run_all(params, &geometry, scenario.seed)?;
            write_row(&mut w, VALIDATE_COLUMNS)?;
            for c in &checks {
                let status = if c.passed { "pass" } else { "fail" };
                write_row(&mut w, [c.name.to_string(), status.to_string(), num(c.max_rel_error), num(c.tolerance)])?;
            }
            if checks.iter().any(|c| !c.passed) {
                code = 1;
            }
        }
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(code)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvariantBreach(_) => 1,
                _ => 2,
            }
        }
    }
}
