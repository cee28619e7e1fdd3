use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shapeflow::checks::run_checks;
use shapeflow::config::ProblemConfig;
use shapeflow::export::read_coefficients;
use shapeflow::run::{output_dir, run, trace, RunReport, OUTPUT_ROOT_ENV};
use shapeflow::Error;

#[derive(Parser)]
#[command(name = "shapeflow", version, about = "Obstacle-aware shape optimization of 2D joints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured optimizers; several configs run in parallel.
    #[command(after_help = format!("Relative output directories resolve against ${OUTPUT_ROOT_ENV} when set."))]
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Trace a local (J1, J2) front by a warm-started weight sweep.
    Trace {
        config: PathBuf,
        /// Coefficient file with the free coefficients of the start shape.
        #[arg(long)]
        start: PathBuf,
        /// Output directory; defaults to `<output.directory>/trace`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check structural invariants of a configured problem.
    Check { config: PathBuf },
}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

fn fail(context: &Path, err: &Error) -> u8 {
    eprintln!("{}: {err}", context.display());
    exit_code(err)
}

fn print_report(path: &Path, report: &RunReport) {
    let v = &report.initial;
    println!("{}: output in {}", path.display(), report.dir.display());
    println!("  start        J = {:.6} (J1 {:.6}, J2 {:.6}, J3 {:.6})", v.j_lambda, v.j1, v.j2, v.j3);
    for m in report.gd.iter().chain(&report.hamiltonian) {
        let s = &m.summary;
        println!(
            "  {:<12} J = {:.6} (J1 {:.6}, J2 {:.6}, J3 {:.6}) after {} steps, {}, {:?} obstacle",
            s.method, s.j_lambda, s.j1, s.j2, s.j3, s.steps, s.termination, s.side
        );
    }
}

fn run_batch(paths: &[PathBuf]) -> u8 {
    let mut configs = Vec::new();
    let mut code = 0;
    for p in paths {
        match ProblemConfig::load(p) {
            Ok(c) => configs.push((p, c)),
            Err(e) => code = code.max(fail(p, &e)),
        }
    }
    if code != 0 {
        return code;
    }
    let mut seen = HashSet::new();
    for (p, c) in &configs {
        if !seen.insert(output_dir(c)) {
            eprintln!("{}: output directory {} is shared with another config", p.display(), output_dir(c).display());
            return EXIT_CONFIG;
        }
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|(_, c)| s.spawn(move || run(c, &output_dir(c)))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    for ((p, _), r) in configs.iter().zip(results) {
        match r {
            Ok(report) => print_report(p, &report),
            Err(e) => code = code.max(fail(p, &e)),
        }
    }
    code
}

fn run_trace(config: &Path, start: &Path, out: Option<PathBuf>) -> u8 {
    let result = ProblemConfig::load(config).and_then(|c| {
        let q = read_coefficients(start)?;
        let dir = out.unwrap_or_else(|| output_dir(&c).join("trace"));
        let report = trace(&c, &q, &dir)?;
        println!("{}: front in {}", config.display(), dir.display());
        for p in &report.front {
            println!(
                "  w = {:.3}  J1 = {:.6}  J2 = {:.6}  residual {:.1e}{}",
                p.weight,
                p.j1,
                p.j2,
                p.residual,
                if p.converged { "" } else { "  (not converged)" }
            );
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => fail(config, &e),
    }
}

fn run_check(config: &Path) -> u8 {
    let checks = match ProblemConfig::load(config).and_then(|c| run_checks(&c)) {
        Ok(c) => c,
        Err(e) => return fail(config, &e),
    };
    let mut code = 0;
    for c in &checks {
        println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            code = EXIT_NUMERICAL;
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { configs } => run_batch(&configs),
        Command::Trace { config, start, out } => run_trace(&config, &start, out),
        Command::Check { config } => run_check(&config),
    };
    ExitCode::from(code)
}
