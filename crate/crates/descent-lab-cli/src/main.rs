//! `descent-lab` command line.
//!
//! Exit codes: 0 success, 1 certificate failure, 2 configuration or usage error,
//! 3 solver failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use descent_lab::descent::{rate_bound, BoundKind, DescentMode, RateParams};
use descent_lab::harness::{
    build_figure_experiment, certify_experiment, emit_csv, emit_metadata, emit_svg_plot, run_experiment,
    ExperimentConfig, FigureName, Format, RunRecord,
};
use descent_lab::{Error, Order};

const EXIT_CERTIFICATE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "descent-lab", version, about = "Run, certify and bound descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write CSV, SVG and metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild one of the shipped figures.
    Figure {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and check its certificates.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a theoretical rate bound.
    Bound {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        p: Order,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        e0: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_enum, default_value = "current")]
        mode: Mode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    B11,
    B22,
    B33,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Current,
    Next,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() || matches!(e, Error::Io { .. }) {
        EXIT_CONFIG
    } else {
        EXIT_SOLVER
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cfg.apply_env_seed()? {
        eprintln!("seeds overridden to {seed}");
    }
    Ok(cfg)
}

fn write_outputs(cfg: &ExperimentConfig, records: &[RunRecord], out: &Path) -> Result<(), Error> {
    let formats = &cfg.outputs.formats;
    if formats.contains(&Format::Csv) {
        emit_csv(records, &out.join(format!("{}.csv", cfg.name)))?;
    }
    if formats.contains(&Format::Svg) && !records.is_empty() {
        for axis in &cfg.outputs.axes {
            emit_svg_plot(records, *axis, &out.join(format!("{}_{}.svg", cfg.name, axis.label())))?;
        }
    }
    emit_metadata(cfg, records, &out.join(format!("{}.json", cfg.name)))
}

fn report_runs(records: &[RunRecord]) -> u8 {
    let mut code = 0;
    for r in records {
        match &r.meta.error {
            Some(e) => {
                eprintln!("{}: error: {e}", r.meta.method);
                code = EXIT_SOLVER;
            }
            None => println!(
                "{}: eta {:e}, {} rows, final gap {:e}",
                r.meta.method,
                r.meta.eta,
                r.rows.len(),
                r.final_gap().unwrap_or(f64::NAN)
            ),
        }
    }
    code
}

fn run(cfg: &ExperimentConfig, out: &Path) -> Result<u8, Error> {
    let records = run_experiment(cfg)?;
    write_outputs(cfg, &records, out)?;
    Ok(report_runs(&records))
}

fn figure(name: &str, out: &Path) -> Result<u8, Error> {
    let name: FigureName = name.parse()?;
    let mut cfg = build_figure_experiment(name)?;
    if let Some(seed) = cfg.apply_env_seed()? {
        eprintln!("seeds overridden to {seed}");
    }
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let config_path = out.join(format!("{}_config.json", cfg.name));
    std::fs::write(&config_path, cfg.to_json()?).map_err(|source| Error::Io {
        path: config_path,
        source,
    })?;
    run(&cfg, out)
}

fn certify(cfg: &ExperimentConfig) -> Result<u8, Error> {
    let report = certify_experiment(cfg)?;
    for m in &report.methods {
        if let Some(e) = &m.error {
            println!("ERROR {}: {e}", m.method);
        }
        for c in &m.checks {
            println!("{} {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, m.method, c.name, c.detail);
        }
    }
    Ok(if report.config_errored() {
        EXIT_CONFIG
    } else if report.errored() {
        EXIT_SOLVER
    } else if report.passed() {
        0
    } else {
        EXIT_CERTIFICATE
    })
}

#[allow(clippy::too_many_arguments)]
fn bound(kind: Kind, p: Order, delta: f64, e0: f64, k: f64, mu: Option<f64>, r: Option<f64>, mode: Mode) -> Result<u8, Error> {
    let kind = match kind {
        Kind::B11 => BoundKind::GradNorm,
        Kind::B22 => BoundKind::Convex,
        Kind::B33 => BoundKind::GradDominated,
    };
    let mut params = RateParams::new(p, delta, e0);
    params.mu = mu;
    params.r = r;
    params.mode = match mode {
        Mode::Current => DescentMode::AtCurrent,
        Mode::Next => DescentMode::AtNext,
    };
    println!("{:.17e}", rate_bound(kind, &params, k)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => load(&config).and_then(|cfg| run(&cfg, &out)),
        Command::Figure { name, out } => figure(&name, &out),
        Command::Certify { config } => load(&config).and_then(|cfg| certify(&cfg)),
        Command::Bound {
            kind,
            p,
            delta,
            e0,
            k,
            mu,
            r,
            mode,
        } => bound(kind, p, delta, e0, k, mu, r, mode),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
