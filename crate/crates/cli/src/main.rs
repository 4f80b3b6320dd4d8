//! `torbit` — normal forms, candidate phase shifts, and certified continuation
//! of periodic orbits near completely resonant tori.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 certification
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use torbit_core::error::CoreError;

mod artifacts;
mod commands;
mod pipeline;

use commands::{ContinueConfig, ShootingSource};
use pipeline::RunManifest;

#[derive(Parser)]
#[command(name = "torbit", version, about = "Resonant-torus continuation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expand a lattice model around its resonant torus and normalize.
    Normalize {
        /// Model JSON file, or the built-in `dnls-square`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 4)]
        degree_cap: usize,
        /// ε truncation; defaults to the normalization order.
        #[arg(long)]
        eps_cap: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Locate candidate phase shifts (zeros of the averaged gradient).
    Candidates {
        /// normal_form.json from the normalize stage.
        #[arg(long)]
        normal_form: PathBuf,
        /// Newton seeds per angle.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Continue one candidate into a certified periodic orbit.
    Continue {
        #[arg(long)]
        normal_form: PathBuf,
        /// candidates.json, when selecting by index.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Index into the isolated-candidate table.
        #[arg(long)]
        candidate: Option<usize>,
        /// Slow angles, comma-separated; alternative to --candidate.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        angles: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "original")]
        source: ShootingSource,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-12)]
        integrator_tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Eigenvalue moduli of the period-map Jacobian over an ε ladder.
    Spectrum {
        #[arg(long)]
        normal_form: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        angles: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps_list: Vec<f64>,
        #[arg(long, default_value = "normalized")]
        source: ShootingSource,
        #[arg(long, default_value_t = 1e-12)]
        integrator_tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check the quantitative normal-form bounds on a finished run.
    VerifyEstimates {
        #[arg(long)]
        normal_form: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.25)]
        d: f64,
        /// Override the measured perturbation size.
        #[arg(long)]
        e_bound: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the built-in four-site lattice reproduction end to end.
    ExampleDnls {
        #[arg(long, default_value = "dnls-run")]
        out: PathBuf,
    },
    /// Run a full pipeline from a manifest file.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn dispatch(cli: Cli) -> torbit_core::error::Result<()> {
    match cli.cmd {
        Cmd::Normalize {
            model,
            order,
            degree_cap,
            eps_cap,
            out,
        } => commands::cmd_normalize(&model, order, degree_cap, eps_cap, &out),
        Cmd::Candidates {
            normal_form,
            grid,
            out,
        } => commands::cmd_candidates(&normal_form, grid, &out),
        Cmd::Continue {
            normal_form,
            candidates,
            candidate,
            angles,
            eps,
            source,
            tol,
            max_iter,
            integrator_tol,
            out,
        } => commands::cmd_continue(
            &normal_form,
            candidates.as_ref(),
            candidate,
            &angles,
            &ContinueConfig {
                eps,
                source,
                newton_tol: tol,
                max_iter,
                integrator_tol,
            },
            &out,
        ),
        Cmd::Spectrum {
            normal_form,
            angles,
            eps_list,
            source,
            integrator_tol,
            out,
        } => commands::cmd_spectrum(&normal_form, &angles, &eps_list, source, integrator_tol, &out),
        Cmd::VerifyEstimates {
            normal_form,
            rho,
            sigma,
            d,
            e_bound,
            out,
        } => commands::cmd_verify_estimates(&normal_form, rho, sigma, d, e_bound, &out),
        Cmd::ExampleDnls { out } => {
            let manifest = RunManifest::example_dnls(&out);
            pipeline::run_pipeline(&manifest)?;
            println!("pipeline finished; summary in {}", out.join("summary.json").display());
            Ok(())
        }
        Cmd::Run { manifest } => {
            let manifest: RunManifest = artifacts::load_json(&manifest)?;
            pipeline::run_pipeline(&manifest)?;
            println!(
                "pipeline finished; summary in {}",
                PathBuf::from(&manifest.outdir).join("summary.json").display()
            );
            Ok(())
        }
    }
}

fn exit_code(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidInput(_)
        | CoreError::DimensionMismatch(_)
        | CoreError::UnsupportedResonance(_)
        | CoreError::Serialization(_)
        | CoreError::Io(_) => 2,
        CoreError::Certification(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
