//! `ferrocavity` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid configuration,
//! 3 numerical abort or failed validation. Results go to stdout as
//! `key=value` lines.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ferrocavity::cavity::{
    consistency_report, energy_drift, resonance_scan, run, static_dielectric_check, Duration, RunConfig,
};
use ferrocavity::config::{self, LoopConfig};
use ferrocavity::grid::GridSpec;
use ferrocavity::point::{loop_metrics, oracle_along_path, run_drive, run_history, ChannelSet, Sinusoid};
use ferrocavity::{Error, PhysicalConstants};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ferrocavity",
    version,
    about = "Hysteretic ferroelectric media in a driven, conducting cavity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Drive the point hysteresis model with a sinusoid and report loop metrics.
    PointLoop(Common),
    /// Run the cavity simulation and write probe and diagnostic CSVs.
    CavityRun(Common),
    /// Run the built-in validation suite.
    Validate {
        /// Shorter runs with the same checks.
        #[arg(long)]
        quick: bool,
    },
    /// Print derived time scales of a configuration.
    Report(Common),
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where output files go.
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// `key=value` override applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_text(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        None => Ok(String::new()),
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("cannot read config {}: {e}", p.display()),
        }),
    }
}

fn run_config(args: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = config::parse(&read_text(&args.config)?)?;
    for o in &args.overrides {
        config::apply_override(&mut cfg, o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn point_loop(args: &Common) -> Result<(), Failure> {
    let mut cfg = LoopConfig::parse(&read_text(&args.config)?)?;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    let set = ChannelSet::pe_only(cfg.hysteresis)?;
    let drive = Sinusoid::new(cfg.amplitude, cfg.frequency);
    let dt = drive.period() / cfg.steps_per_period as f64;
    let trace = run_drive(&drive, cfg.periods * drive.period(), dt, &set, &PhysicalConstants::SI)?;
    std::fs::create_dir_all(&args.output_dir).map_err(io_failure)?;
    let path = args.output_dir.join(format!("{}_trace.csv", cfg.prefix));
    trace
        .write_csv(BufWriter::new(File::create(&path).map_err(io_failure)?))
        .map_err(io_failure)?;
    println!("trace={}", path.display());
    println!("samples={}", trace.rows.len());
    println!("p_saturation_bound={:e}", cfg.hysteresis.saturation());
    match loop_metrics(&trace) {
        Ok(m) => {
            println!("p_sat={:e}", m.p_sat);
            println!("p_remanent={:e}", m.p_remanent);
            println!("e_coercive={:e}", m.e_coercive);
            println!("loop_area={:e}", m.loop_area);
        }
        Err(e) => println!("loop_metrics=unavailable ({e})"),
    }
    Ok(())
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_NUMERIC,
        message: format!("output: {e}"),
    }
}

fn cavity_run(args: &Common) -> Result<(), Failure> {
    let cfg = run_config(args)?;
    let g = cfg.validate()?;
    println!("steps_planned={}", cfg.steps(&g)?);
    let start = Instant::now();
    let out = run(&cfg, Some(&args.output_dir))?;
    println!("steps={}", out.steps);
    println!("final_time_s={:e}", out.final_time);
    println!("wall_time_s={:.3}", start.elapsed().as_secs_f64());
    for trace in &out.traces {
        let peak =
            |f: fn(&ferrocavity::cavity::ProbeRow) -> f64| trace.rows.iter().fold(0.0f64, |m, r| m.max(f(r).abs()));
        let name = &trace.probe.name;
        println!("probe.{name}.max_ez={:e}", peak(|r| r.e[2]));
        println!("probe.{name}.max_pz={:e}", peak(|r| r.pz));
        println!("probe.{name}.max_mx={:e}", peak(|r| r.mx));
    }
    for f in &out.files {
        println!("file={}", f.display());
    }
    Ok(())
}

fn report(args: &Common) -> Result<(), Failure> {
    let cfg = run_config(args)?;
    for line in consistency_report(&cfg)?.lines() {
        println!("{line}");
    }
    Ok(())
}

struct Suite {
    failed: usize,
}

impl Suite {
    fn check(&mut self, name: &str, value: f64, limit: f64) {
        let pass = value.abs() <= limit;
        if !pass {
            self.failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        println!("check={name} value={value:.3e} limit={limit:.1e} status={status}");
    }
}

fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn validate(quick: bool) -> Result<(), Failure> {
    let k = PhysicalConstants::SI;
    let params = ferrocavity::point::ChannelParams::ferroelectric();
    let set = ChannelSet::pe_only(params)?;
    let mut s = Suite { failed: 0 };

    let drive = Sinusoid::new(8.0e6, 250.0);
    let trace = run_drive(&drive, 4.0 * drive.period(), drive.period() / 2000.0, &set, &k)?;
    let e = trace.electric();
    let exact = oracle_along_path(&params, &k, e[0], 0.0, &e)?;
    s.check("branch_oracle", max_rel_dev(&trace.polarization(), &exact), 1e-6);
    let m = loop_metrics(&trace)?;
    s.check("saturation", m.p_sat / params.saturation() - 1.0, 5e-3);

    let fast = Sinusoid::new(8.0e6, 25.0e3);
    let other = run_drive(&fast, 4.0 * fast.period(), fast.period() / 2000.0, &set, &k)?;
    s.check(
        "rate_independence",
        max_rel_dev(&other.polarization(), &trace.polarization()),
        1e-6,
    );

    let g = GridSpec::reference(0.5)?;
    let (scan_steps, energy_steps) = if quick { (12_000, 10_000) } else { (38_000, 100_000) };
    let f110 = 0.5 * k.c * 2f64.sqrt() / 5.45;
    let lowest = resonance_scan(&g, scan_steps, 1)?.lowest().unwrap_or(f64::NAN);
    s.check("resonance_f110", lowest / f110 - 1.0, 0.02);
    let energy = energy_drift(&g, energy_steps, 2)?;
    s.check("energy_drift", energy.relative_drift, 1e-9);
    s.check("div_b", energy.div_b_ratio, 1e-12);

    let rest = RunConfig::reference_rest();
    let stat = static_dielectric_check(4.0, &rest.material_spec(), g.dx)?;
    s.check("static_dielectric", stat.ratio / stat.expected - 1.0, 0.05);

    let mut cavity = rest.scaled(1e4);
    cavity.run.duration = Duration::Periods(if quick { 1.0 } else { 10.0 });
    let out = run(&cavity, None)?;
    let tr = &out.traces[0];
    let mut t = vec![0.0];
    t.extend(tr.column(|r| r.t));
    let mut ez = vec![0.0];
    ez.extend(tr.column(|r| r.e[2]));
    let oracle = run_history(&t, &ez, 0.0, &set, &k)?;
    s.check(
        "rest_cavity_oracle",
        max_rel_dev(&tr.column(|r| r.pz), &oracle[1..]),
        0.01,
    );
    let mag = tr.rows.iter().fold(0.0f64, |m, r| m.max(r.mx.abs()).max(r.my.abs()));
    s.check("rest_magnetization", mag, 0.0);

    let report = consistency_report(&RunConfig::reference_rotating())?;
    s.check("omega_rad_s", report.omega - 156.77, 5e-3);
    s.check(
        "cycles_per_revolution",
        report.cycles_per_revolution.unwrap_or(f64::NAN) - 10.02,
        5e-3,
    );

    println!("failed={}", s.failed);
    if s.failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{} validation checks failed", s.failed),
        })
    }
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::PointLoop(a) => point_loop(a),
        Command::CavityRun(a) => cavity_run(a),
        Command::Validate { quick } => validate(*quick),
        Command::Report(a) => report(a),
        Command::Version => {
            println!("version={}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_are_collected_in_order() {
        let cli = Cli::try_parse_from([
            "ferrocavity",
            "cavity-run",
            "--config",
            "run.cfg",
            "--set",
            "material.omega_rpm=0",
            "--set",
            "run.periods=1",
        ])
        .unwrap();
        let Command::CavityRun(c) = cli.command else { panic!() };
        assert_eq!(c.config.as_deref(), Some(std::path::Path::new("run.cfg")));
        assert_eq!(c.overrides, ["material.omega_rpm=0", "run.periods=1"]);
    }

    #[test]
    fn unknown_subcommands_are_usage_errors() {
        let e = Cli::try_parse_from(["ferrocavity", "explode"]).unwrap_err();
        assert!(e.use_stderr());
    }
}
