use caulk::commands::{self, Command};
use caulk::config;
use caulk::error::CliError;
use caulk::plots::chart_for;
use caulk::svg::render;
use caulk::tables::{Schema, Table};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "caulk",
    version,
    about = "Caulking experiments: sweeps, verification and plots"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// `key=value` override with a dotted key, applied before hashing.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; replaces the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serialize the composition target.
    GenTarget(RunArgs),
    /// Pretrain (oracle or empirical) and save head, extractor and middle.
    Pretrain(RunArgs),
    /// Fit caulked models and evaluate L2 and excess error.
    Caulk(RunArgs),
    /// Fit networks from scratch and evaluate them like `caulk`.
    Scratch(RunArgs),
    /// Error against sample size with a power-law fit.
    RateSweep(RunArgs),
    /// Error against adapter depth per pretrained variant.
    DepthSweep(RunArgs),
    /// Fitted rate exponent against source sample size.
    MSweep(RunArgs),
    /// Run the verification suite; exits 1 on a probative failure.
    Verify(RunArgs),
    /// Render an SVG from an emitted CSV.
    Plot {
        csv: PathBuf,
        /// Expected schema: rate, depth, m-sweep, caulking or trace.
        #[arg(long)]
        kind: Option<String>,
        /// Output SVG path; defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_command(cmd: Command, args: RunArgs) -> Result<(), CliError> {
    let resolved = config::load(&args.config, &args.set)?;
    let manifest = commands::run(cmd, &resolved, args.out)?;
    println!(
        "{}: wrote {} files (config {})",
        manifest.command,
        manifest.files.len(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn plot(csv: PathBuf, kind: Option<String>, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&csv).map_err(|e| CliError::io(&csv, e))?;
    let table = Table::parse(&text)?;
    if let Some(k) = kind {
        let want = Schema::ALL
            .into_iter()
            .find(|s| s.name() == k)
            .ok_or_else(|| CliError::config("kind", format!("unknown plot kind `{k}`")))?;
        if want != table.schema {
            return Err(CliError::Runtime(format!(
                "schema mismatch: {} has a {} header, not {}",
                csv.display(),
                table.schema.name(),
                want.name()
            )));
        }
    }
    let svg = render(&chart_for(&table)?);
    let out = out.unwrap_or_else(|| csv.with_extension("svg"));
    std::fs::write(&out, svg).map_err(|e| CliError::io(&out, e))?;
    println!("plot: wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::GenTarget(a) => run_command(Command::GenTarget, a),
        Cmd::Pretrain(a) => run_command(Command::Pretrain, a),
        Cmd::Caulk(a) => run_command(Command::Caulk, a),
        Cmd::Scratch(a) => run_command(Command::Scratch, a),
        Cmd::RateSweep(a) => run_command(Command::RateSweep, a),
        Cmd::DepthSweep(a) => run_command(Command::DepthSweep, a),
        Cmd::MSweep(a) => run_command(Command::MSweep, a),
        Cmd::Verify(a) => run_command(Command::Verify, a),
        Cmd::Plot { csv, kind, out } => plot(csv, kind, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
