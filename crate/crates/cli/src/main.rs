use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lyapbounds::corpus::CorpusSpec;
use lyapbounds::optim::OptimizerSettings;
use lyapbounds_cli::{
    classify, compute_bounds, family_json, parse_k_list, parse_real, read_family, BoundsRequest,
    CliError, CliResult, LowerKind, UpperKind, DEFAULT_BUDGET, EXIT_OK,
};

#[derive(Parser)]
#[command(
    name = "lyapbounds",
    version,
    about = "Bounds on the Lyapunov exponent of random matrix products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the structure of a family and the applicable bounds as JSON.
    Classify {
        family: PathBuf,
        /// Pattern-state budget for the positive-product search.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Compute lower and upper bounds for each product length.
    Bounds {
        family: PathBuf,
        /// Product lengths, e.g. "1,2,4,8,12".
        #[arg(long, default_value = "1")]
        k: String,
        #[arg(long, value_enum, default_value_t = Lower::Beta)]
        lower: Lower,
        #[arg(long, value_enum, default_value_t = Upper::Alpha)]
        upper: Upper,
        /// Optimize the bound parameters instead of using all-ones.
        #[arg(long)]
        optimize: bool,
        /// Seed for the Monte Carlo column and the optimizer settings.
        #[arg(long)]
        seed: Option<u64>,
        /// Add a Monte Carlo estimate with products of this length.
        #[arg(long, requires = "seed")]
        mc_length: Option<usize>,
        #[arg(long, requires = "mc_length", default_value_t = 50)]
        mc_trajectories: usize,
        /// CSV output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON sidecar path; defaults to the CSV path with a .json extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the exponent.
    Mc {
        family: PathBuf,
        /// Product length per trajectory.
        #[arg(long = "length", short = 't')]
        length: usize,
        #[arg(long, short = 'n')]
        trajectories: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Write a built-in family as JSON.
    Corpus {
        #[command(subcommand)]
        spec: CorpusCmd,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// The two 6x6 odd-coefficient matrices.
    Sigma6,
    /// De Rham curve matrices.
    Derham {
        #[arg(long, value_parser = parse_real)]
        omega: f64,
    },
    /// {2 Rot(pi/3), 2 diag(1, 0)}.
    Counterexample,
    /// A seeded random pair.
    Random {
        #[arg(long)]
        dim: usize,
        #[arg(long, value_parser = parse_real, default_value = "1")]
        density: f64,
        /// Entries in [-0.5, 0.5) instead of [0, 1).
        #[arg(long)]
        signed: bool,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Lower {
    Beta,
    BetaTilde,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum Upper {
    Alpha,
    AlphaTilde,
    Euclid,
    GammaSdp,
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Classify { family, budget } => {
            let f = read_family(&family)?;
            print!("{}", to_json(&classify(&f, budget)?));
        }
        Command::Bounds {
            family,
            k,
            lower,
            upper,
            optimize,
            seed,
            mc_length,
            mc_trajectories,
            out,
            sidecar,
        } => {
            let f = read_family(&family)?;
            let settings = OptimizerSettings {
                seed: seed.unwrap_or(0),
                ..OptimizerSettings::default()
            };
            let req = BoundsRequest {
                ks: parse_k_list(&k).map_err(CliError::Invalid)?,
                lower: match lower {
                    Lower::Beta => LowerKind::Beta,
                    Lower::BetaTilde => LowerKind::BetaTilde,
                    Lower::None => LowerKind::None,
                },
                upper: match upper {
                    Upper::Alpha => UpperKind::Alpha,
                    Upper::AlphaTilde => UpperKind::AlphaTilde,
                    Upper::Euclid => UpperKind::Euclid,
                    Upper::GammaSdp => UpperKind::GammaSdp,
                },
                optimize,
                settings,
                mc: mc_length.map(|t| (t, mc_trajectories, seed.expect("required by clap"))),
            };
            let table = compute_bounds(&f, &req)?;
            for note in &table.notes {
                eprintln!("note: {note}");
            }
            write_or_print(out.as_ref(), &table.to_csv())?;
            let sidecar = sidecar.or_else(|| out.as_ref().map(|p| p.with_extension("json")));
            if let Some(path) = sidecar {
                write_or_print(Some(&path), &to_json(&table))?;
            }
            let bad = table.undefined_lower();
            if !bad.is_empty() {
                return Err(CliError::Undefined(format!(
                    "lower bound is -inf at k = {bad:?}: a product has a zero column; \
                     try --lower beta-tilde or the transposed family"
                )));
            }
        }
        Command::Mc {
            family,
            length,
            trajectories,
            seed,
        } => {
            let f = read_family(&family)?;
            match lyapbounds::monte_carlo_lambda(&f, length, trajectories, seed, None) {
                Ok(est) => print!("{}", to_json(&est)),
                Err(e @ lyapbounds::Error::AllTrajectoriesDegenerate { .. }) => {
                    return Err(CliError::Undefined(e.to_string()))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Corpus { spec, out } => {
            let spec = match spec {
                CorpusCmd::Sigma6 => CorpusSpec::Sigma6,
                CorpusCmd::Derham { omega } => CorpusSpec::Derham { omega },
                CorpusCmd::Counterexample => CorpusSpec::Counterexample,
                CorpusCmd::Random {
                    dim,
                    density,
                    signed,
                    seed,
                } => CorpusSpec::Random {
                    dim,
                    density,
                    signed,
                    seed,
                },
            };
            let mut text = family_json(&spec.build()?);
            text.push('\n');
            write_or_print(out.as_ref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
