//! Command-line front end: simulate scenarios, re-run analyses, and
//! summarize run directories. Exit codes: 0 success, 1 failed invariant,
//! 2 usage or config error, 3 IO error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hrflab::error::{Error, Result};
use hrflab::report::emit_report;
use hrflab::runner::{analyze_dir, reduce_run, rescale_run, run_scenario};
use hrflab::soliton::{
    construct_exact, normalization_defect, soliton_residual, ExactSoliton,
};

#[derive(Parser)]
#[command(
    name = "hrflab",
    version,
    about = "Coupled Ricci / harmonic-map flow laboratory on symmetry-reduced geometries"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario config and write its run directory
    Simulate {
        /// Scenario config file
        config: PathBuf,
        /// Run directory (defaults to the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run analyses on a finished run directory
    Analyze {
        run_dir: PathBuf,
        /// Restrict to one analysis: singularity, reduced, soliton, rescale, harnack
        #[arg(long)]
        only: Option<String>,
    },
    /// Reduced-geometry survey from an explicit base
    Reduce {
        run_dir: PathBuf,
        /// Base as "<point>,<time>", with T for the estimated singular time
        #[arg(long)]
        base: String,
    },
    /// Residuals of a named exact soliton, e.g. "coupled_sphere:n=2,alpha=0.5,tau=1"
    SolitonCheck {
        /// Fixture spec: gaussian | round_sphere | coupled_sphere | noncanonical_sphere
        /// with comma-separated parameters after a colon
        spec: String,
        /// Residual bound for the PASS verdict
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Blow-up rescaling of a finished singular run at explicit scales
    Rescale {
        run_dir: PathBuf,
        /// Comma-separated scales, each above 1, strictly increasing
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
    },
    /// Summarize a run directory and emit plot-ready series files
    Report { run_dir: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate { config, out } => {
            let run_dir = run_scenario(&config, out.as_deref())?;
            println!("run written to {}", run_dir.display());
            Ok(())
        }
        Cmd::Analyze { run_dir, only } => {
            analyze_dir(&run_dir, only.as_deref())?;
            println!(
                "analyses refreshed in {} ({})",
                run_dir.display(),
                only.as_deref().unwrap_or("all configured")
            );
            Ok(())
        }
        Cmd::Reduce { run_dir, base } => {
            reduce_run(&run_dir, &base)?;
            println!("reduced-geometry artifacts written to {}", run_dir.display());
            Ok(())
        }
        Cmd::SolitonCheck { spec, tol } => soliton_check(&spec, tol),
        Cmd::Rescale { run_dir, lambda } => {
            rescale_run(&run_dir, &lambda)?;
            println!("rescale report written to {}", run_dir.display());
            Ok(())
        }
        Cmd::Report { run_dir } => {
            let summary = emit_report(&run_dir)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn soliton_check(spec: &str, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let kind = parse_fixture(spec)?;
    let spec = construct_exact(&kind)?;
    let res = soliton_residual(&spec)?;
    let defect = normalization_defect(&spec);
    println!("canonical residual        = {:.6e}", res.canonical);
    println!("map residual              = {:.6e}", res.map);
    println!("trace residual            = {:.6e}", res.trace);
    println!("elliptic residual         = {:.6e}", res.elliptic);
    println!("normalization defect      = {:.6e}", defect);
    let max = res.max();
    let pass = max <= tol;
    println!(
        "max residual = {:.6e} against tolerance {:.1e}: {}",
        max,
        tol,
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "soliton residual {max:.6e} exceeds tolerance {tol:.1e}"
        )))
    }
}

/// Parses "kind:key=value,key=value". Every kind has tau defaulting to 1;
/// the gaussian window defaults to r_max=8, samples=257.
fn parse_fixture(text: &str) -> Result<ExactSoliton> {
    let (kind, rest) = match text.split_once(':') {
        Some((k, r)) => (k.trim(), r),
        None => (text.trim(), ""),
    };
    let mut params = std::collections::BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((key, value)) = part.split_once('=') else {
            return Err(Error::Usage(format!("expected key=value, got '{part}'")));
        };
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad number '{}' for '{}'", value.trim(), key.trim())))?;
        if params.insert(key.trim().to_string(), value).is_some() {
            return Err(Error::Usage(format!("duplicate parameter '{}'", key.trim())));
        }
    }
    let mut take = |key: &str, default: Option<f64>| -> Result<f64> {
        match params.remove(key).or(default) {
            Some(v) => Ok(v),
            None => Err(Error::Usage(format!("fixture needs '{key}'"))),
        }
    };
    let fixture = match kind {
        "gaussian" => ExactSoliton::Gaussian {
            n: take("n", None)? as usize,
            r_max: take("r_max", Some(8.0))?,
            samples: take("samples", Some(257.0))? as usize,
            tau: take("tau", Some(1.0))?,
        },
        "round_sphere" => ExactSoliton::RoundSphere {
            n: take("n", None)? as usize,
            tau: take("tau", Some(1.0))?,
        },
        "coupled_sphere" => ExactSoliton::CoupledSphere {
            n: take("n", None)? as usize,
            alpha: take("alpha", None)?,
            tau: take("tau", Some(1.0))?,
        },
        "noncanonical_sphere" => ExactSoliton::NonCanonicalSphere { t: take("t", Some(0.5))? },
        other => {
            return Err(Error::Usage(format!(
                "unknown fixture '{other}'; expected gaussian, round_sphere, coupled_sphere, or noncanonical_sphere"
            )))
        }
    };
    if !params.is_empty() {
        return Err(Error::Usage(format!(
            "unknown parameters for '{kind}': {}",
            params.keys().cloned().collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(fixture)
}
