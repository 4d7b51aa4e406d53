use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mptsig_cli::commands;
use mptsig_cli::io::exit_code;

/// Spectral polarizability toolkit: synthesize signatures, reduce them to
/// rotation invariants, recover equivalent ellipsoids, simulate coil
/// measurements and classify objects.
#[derive(Parser)]
#[command(name = "mptsig", version, about, max_term_width = 100)]
struct Cli {
    /// Worker threads for frequency sweeps and noise trials.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GridArgs {
    /// Lowest frequency in rad/s; 0 adds a static row.
    #[arg(long, default_value_t = 1e2)]
    omega_min: f64,
    /// Highest frequency in rad/s.
    #[arg(long, default_value_t = 1e8)]
    omega_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 21)]
    num: usize,
    /// Logarithmic spacing (the default).
    #[arg(long, conflicts_with = "linear")]
    log: bool,
    /// Uniform spacing instead of logarithmic.
    #[arg(long)]
    linear: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a modal model over a frequency grid and write a signature CSV.
    Synth {
        /// Model JSON file.
        model: PathBuf,
        /// Output signature CSV.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Reduce a signature to rotation invariants per frequency.
    Invariants {
        /// Signature CSV file.
        signature: PathBuf,
        /// Invariant set: eig, principal, alternative or commutator.
        #[arg(long)]
        set: String,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the equivalent ellipsoid of three static eigenvalues.
    EquivEllipsoid {
        /// The three tensor eigenvalues, any order.
        #[arg(long, num_args = 3, allow_negative_numbers = true)]
        eigs: Vec<f64>,
        /// Size scaling of the recovered shape.
        #[arg(long)]
        alpha: f64,
        /// Material contrast; above 1 permeable, 0 perfectly insulating.
        #[arg(long, allow_negative_numbers = true)]
        contrast: f64,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate coil voltages from a signature sample and recover the
    /// tensor back, optionally across noise trials.
    MeasureRoundtrip {
        /// Coil layout JSON file.
        layout: PathBuf,
        /// Signature CSV file.
        signature: PathBuf,
        /// Frequency in rad/s; off-sample values are interpolated.
        #[arg(long)]
        omega: f64,
        /// Singular-value truncation for off-sample interpolation.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Relative noise level applied to the tensor before forwarding.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Number of noise trials.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Noise seed; trial t draws from seed + t.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a labeled feature dataset from a config of modal models.
    Dataset {
        /// Config JSON file.
        config: PathBuf,
        /// Output dataset CSV; a .meta.json sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate nearest-neighbour classification over resampled held-out
    /// splits, optionally classifying a query signature.
    Classify {
        /// Config JSON file.
        config: PathBuf,
        /// Reuse an existing dataset CSV instead of rebuilding.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Signature CSV to classify against the dataset.
        #[arg(long)]
        query: Option<PathBuf>,
        /// Overrides the evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.max(1);
    let result = match &cli.command {
        Command::Synth { model, out, grid } => commands::cmd_synth(
            model,
            out,
            grid.omega_min,
            grid.omega_max,
            grid.num,
            grid.linear,
            threads,
        ),
        Command::Invariants { signature, set, out } => {
            commands::cmd_invariants(signature, set, out)
        }
        Command::EquivEllipsoid { eigs, alpha, contrast, out } => {
            let eigs: [f64; 3] = [eigs[0], eigs[1], eigs[2]];
            commands::cmd_equiv_ellipsoid(&eigs, *alpha, *contrast, out.as_deref())
        }
        Command::MeasureRoundtrip {
            layout,
            signature,
            omega,
            tol,
            noise,
            trials,
            seed,
            out,
        } => commands::cmd_measure_roundtrip(
            layout,
            signature,
            *omega,
            *tol,
            *noise,
            *trials,
            *seed,
            threads,
            out.as_deref(),
        ),
        Command::Dataset { config, out, seed } => commands::cmd_dataset(config, out, *seed),
        Command::Classify { config, dataset, query, seed, out } => commands::cmd_classify(
            config,
            dataset.as_deref(),
            query.as_deref(),
            *seed,
            out.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
