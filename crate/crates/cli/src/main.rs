//! `kacsim --config run.toml [--output out.csv] [--workers K] [--override KEY=VALUE]...`
//!
//! Exit status: 0 success, 2 config error, 3 admissibility warning (results
//! still written), 4 I/O failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kacsim::config::{parse_config_with, ExperimentConfig};
use kacsim::experiment::{run, RunReport};
use kacsim::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_WARNING: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "kacsim", version, about = "Monte Carlo experiments for generalized Kac equations")]
struct Args {
    /// TOML experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// CSV destination (overrides `output` in the config; stdout if neither).
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
    /// Set a config key, dotted for blocks (`kernel.kind=kac`). Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let mut overrides = args.overrides.clone();
    if let Some(w) = args.workers {
        overrides.push(format!("workers={w}"));
    }
    let mut config = match parse_config_with(&text, &overrides) {
        Ok(c) => c,
        Err(e) => return report_error(e),
    };
    if let Some(out) = args.output {
        config.output = Some(out);
    }

    let start = Instant::now();
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => return report_error(e),
    };
    let elapsed = start.elapsed();

    print_summary(&report);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = write_outputs(&config, &report) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    eprintln!("wall time: {:.3} s", elapsed.as_secs_f64());
    if report.admissibility_warned() {
        ExitCode::from(EXIT_WARNING)
    } else {
        ExitCode::SUCCESS
    }
}

fn report_error(e: Error) -> ExitCode {
    match e {
        Error::Config(errors) => {
            for err in errors {
                eprintln!("config error: {err}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Error::Io(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        other => {
            eprintln!("config error: {other}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn print_summary(report: &RunReport) {
    let r = &report.regime;
    eprintln!("experiment: {}", report.experiment.tag());
    eprintln!("S(alpha) = {}  mu(alpha) = {}  alpha = {}", r.s_alpha, r.mu_alpha, r.alpha);
    if let Some(s2) = r.s_2alpha {
        eprintln!("S(2 alpha) = {s2}");
    }
    if let Some(id) = r.case_id {
        eprintln!("regime: {id}");
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

fn write_outputs(config: &ExperimentConfig, report: &RunReport) -> io::Result<()> {
    let csv = report.csv();
    match &config.output {
        Some(path) => {
            fs::write(path, csv).map_err(|e| with_path(e, path))?;
            let meta = sidecar(path);
            fs::write(&meta, report.metadata(config)).map_err(|e| with_path(e, &meta))?;
        }
        None => io::stdout().lock().write_all(csv.as_bytes())?,
    }
    if let (Some(path), Some(pool)) = (&config.pool_output, &report.pool) {
        let file = fs::File::create(path).map_err(|e| with_path(e, path))?;
        let out = io::BufWriter::new(file);
        if path.extension().is_some_and(|x| x == "bin") {
            pool.write_binary(out)?;
        } else {
            pool.write_csv(out)?;
        }
    }
    Ok(())
}

fn with_path(e: io::Error, path: &Path) -> io::Error {
    io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}
