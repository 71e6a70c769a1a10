//! Command-line driver: parse an operator family, run the requested
//! analysis, and print a text or machine-readable report.

mod problem;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use problem::ProblemFile;
use render::{CliError, Runner};

#[derive(Parser)]
#[command(name = "specsite", version, about = "Commutative-context analysis of normal matrix families")]
struct Cli {
    /// Relative tolerance for commutator/normality checks (overrides the file).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed recorded in the report provenance (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cohomology method.
    #[arg(long, global = true, value_enum, default_value_t = Method::Cech)]
    method: Method,

    /// Cover selector: "auto", "identity", or comma-separated context ids.
    #[arg(long, global = true, default_value = "auto")]
    cover: String,

    /// Include all unital *-subalgebras of each generated context.
    #[arg(long, global = true)]
    full_subcontexts: bool,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Method {
    Cech,
    Poset,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// List the contexts, their inclusion order, and the covers.
    Contexts { file: PathBuf },
    /// Jointly diagonalize all operators in the file.
    Diagonalize { file: PathBuf },
    /// Four-criterion joint-diagonalizability verdict for a named pair.
    Obstruction { file: PathBuf, t: String, s: String },
    /// Cohomology of an integer presheaf over the site.
    Cohomology {
        file: PathBuf,
        /// Presheaf choice: "k0" or "constant".
        #[arg(long, default_value = "k0")]
        presheaf: String,
    },
    /// K0 presheaf data, global sections, and the comparison map.
    Ktheory { file: PathBuf },
    /// Connected components of the category of elements of the spectral
    /// presheaf (and of the marked-diagonalization presheaf for pairs).
    Pi0 { file: PathBuf },
    /// Full pipeline: contexts, descent, cohomology, obstruction, pi0.
    Report { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, run): (&PathBuf, fn(&Runner) -> Result<serde_json::Value, CliError>) =
        match &cli.command {
            Command::Contexts { file } => (file, Runner::contexts),
            Command::Diagonalize { file } => (file, Runner::diagonalize),
            Command::Obstruction { file, .. } => (file, Runner::obstruction),
            Command::Cohomology { file, .. } => (file, Runner::cohomology),
            Command::Ktheory { file } => (file, Runner::ktheory),
            Command::Pi0 { file } => (file, Runner::pi0),
            Command::Report { file } => (file, Runner::report),
        };
    let outcome = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
        .and_then(|text| ProblemFile::parse(&text).map_err(CliError::Input))
        .and_then(|file| Runner::new(file, &cli).map_err(CliError::Input))
        .and_then(|runner| {
            let value = run(&runner)?;
            Ok((runner, value))
        });
    match outcome {
        Ok((runner, value)) => {
            match cli.format {
                Format::Machine => println!(
                    "{}",
                    serde_json::to_string_pretty(&runner.with_provenance(value)).unwrap()
                ),
                Format::Text => print!("{}", render::to_text(&value, 0)),
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal inconsistency: {msg}");
            ExitCode::from(2)
        }
    }
}

impl Runner {
    fn new(file: ProblemFile, cli: &Cli) -> Result<Runner, String> {
        let mut options = file.options.clone();
        if let Some(t) = cli.tol {
            if t <= 0.0 {
                return Err("--tol must be positive".into());
            }
            options.tol = t;
        }
        if let Some(s) = cli.seed {
            options.seed = s;
        }
        options.full_subcontexts |= cli.full_subcontexts;
        let (pair, presheaf_choice) = match &cli.command {
            Command::Obstruction { t, s, .. } => (Some((t.clone(), s.clone())), String::new()),
            Command::Cohomology { presheaf, .. } => (None, presheaf.clone()),
            _ => (None, String::new()),
        };
        Runner::build(
            file,
            options,
            matches!(cli.method, Method::Poset),
            cli.cover.clone(),
            pair,
            presheaf_choice,
        )
    }
}
