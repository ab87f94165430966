use std::process::ExitCode;

use clap::{Parser, Subcommand};
use indefla_cli::{run, Command};
use indefla_core::Schedule;

#[derive(Parser)]
#[command(name = "indefla", version, about = "Indefinite Laplacian on concentric circles: batch reports")]
struct Cli {
    /// Run every mode loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Cmd,
}

/// Arguments shared by every subcommand: `[CONFIG] [--key value]...`
#[derive(clap::Args)]
struct Rest {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "CONFIG] [--KEY VALUE")]
    args: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mode matrices B, C, D, D^-1, Theta, Psi for m_lo..=m_hi.
    Dtn(Rest),
    /// Radial samples of a single mode solution.
    Field(Rest),
    /// Critical (mu = 1, delta = 0) or regularized solve of the full source.
    Solve(Rest),
    /// Range membership verdict for the source.
    RangeCheck(Rest),
    /// Region norms over a grid of delta values and their blow-up fit.
    SweepDelta(Rest),
    /// Theta eigenvalues per mode and the contrast classification.
    ThetaSpectrum(Rest),
    /// Closed-form mode solution against the finite-difference oracle.
    OracleCompare(Rest),
}

/// Reads `INDEFLA_THREADS`. The value is validated in every build and sizes
/// the rayon pool when the `parallel` feature is on.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("INDEFLA_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return Err(format!("INDEFLA_THREADS must be a positive integer, got `{v}`")),
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        let err = indefla_core::Error::Validation {
            field: "INDEFLA_THREADS".into(),
            message: msg,
        };
        print!("{}", indefla_cli::output::pretty(&indefla_cli::error_json(&err)));
        return ExitCode::from(2);
    }
    let (cmd, rest) = match cli.command {
        Cmd::Dtn(r) => (Command::Dtn, r),
        Cmd::Field(r) => (Command::Field, r),
        Cmd::Solve(r) => (Command::Solve, r),
        Cmd::RangeCheck(r) => (Command::RangeCheck, r),
        Cmd::SweepDelta(r) => (Command::SweepDelta, r),
        Cmd::ThetaSpectrum(r) => (Command::ThetaSpectrum, r),
        Cmd::OracleCompare(r) => (Command::OracleCompare, r),
    };
    let schedule = if cli.sequential { Schedule::Sequential } else { Schedule::Auto };
    let out = std::env::var("INDEFLA_OUT").ok();
    let outcome = run(cmd, &rest.args, out.as_deref(), schedule);
    print!("{}", outcome.stdout);
    ExitCode::from(outcome.code as u8)
}
