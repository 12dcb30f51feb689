use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod error;
mod output;
mod run;

use config::Kind;
use error::CliError;
use output::{Artifacts, Format};

#[derive(Parser)]
#[command(name = "genfrac", version, about = "Generalized fractional operators and variational checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem kind named in the config.
    Run(RunArgs),
    /// Evaluate K_P, A_P and B_P of a function.
    #[command(name = "operator_eval", alias = "operator-eval")]
    OperatorEval(RunArgs),
    /// Minimize a functional with fixed or free left end.
    Solve(RunArgs),
    /// Euler-Lagrange residual along a trajectory.
    #[command(name = "el_check", alias = "el-check")]
    ElCheck(RunArgs),
    /// Isoperimetric problem with Lagrange multipliers.
    #[command(name = "iso_solve", alias = "iso-solve")]
    IsoSolve(RunArgs),
    /// Invariance check, Noether residual and conserved quantity.
    Noether(RunArgs),
    /// Residual of a field on a rectangular grid.
    #[command(name = "multidim_check", alias = "multidim-check")]
    MultidimCheck(RunArgs),
    /// Registered kernels and Lagrangians.
    #[command(name = "list-builtins", alias = "list_builtins")]
    ListBuiltins {
        /// Show a single entry.
        #[arg(long)]
        name: Option<String>,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to `output.dir` from the config, then `out`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the number of grid intervals (every axis for multidim_check).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Seed for randomized property checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tabular artifacts as CSV or JSON; summaries are always JSON.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_config(None, args),
        Command::OperatorEval(args) => run_config(Some(Kind::OperatorEval), args),
        Command::Solve(args) => run_config(Some(Kind::Solve), args),
        Command::ElCheck(args) => run_config(Some(Kind::ElCheck), args),
        Command::IsoSolve(args) => run_config(Some(Kind::IsoSolve), args),
        Command::Noether(args) => run_config(Some(Kind::Noether), args),
        Command::MultidimCheck(args) => run_config(Some(Kind::MultidimCheck), args),
        Command::ListBuiltins { name, json } => list_builtins(name.as_deref(), json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_config(command: Option<Kind>, args: RunArgs) -> Result<(), CliError> {
    let cfg = config::load(&args.config)?;
    let kind = match (command, cfg.kind) {
        (Some(c), Some(k)) if c != k => {
            return Err(CliError::validation(format!(
                "config kind is {} but the {} command was used",
                k.as_str(),
                c.as_str()
            )))
        }
        (Some(c), _) => c,
        (None, Some(k)) => k,
        (None, None) => return Err(CliError::validation("config has no 'kind'; use a problem subcommand or set kind")),
    };
    if args.grid_n == Some(0) {
        return Err(CliError::validation("--grid-n must be positive"));
    }
    let dir = args
        .out_dir
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Artifacts::new(&dir, args.format)?;
    let opts = run::Options { grid_n: args.grid_n, seed: args.seed };
    let outcome = run::execute(kind, &cfg, &opts, &mut out)?;
    println!("{} [{} in {}]", outcome.line, out.written().join(" "), dir.display());
    Ok(())
}

fn list_builtins(name: Option<&str>, json: bool) -> Result<(), CliError> {
    use genfrac::builtins::{kernels, lagrangians};
    let mut entries = vec![];
    for k in kernels() {
        let params: Vec<String> = k.params.iter().map(|p| p.to_string()).collect();
        entries.push(("kernel", k.name, k.formula, params, k.description));
    }
    for l in lagrangians() {
        let params: Vec<String> = l.params.iter().map(|(p, d)| format!("{p}={d}")).collect();
        entries.push(("lagrangian", l.name, l.formula, params, l.description));
    }
    if let Some(name) = name {
        entries.retain(|e| e.1 == name);
        if entries.is_empty() {
            return Err(CliError::validation(format!("no builtin named '{name}'")));
        }
    }
    let mut text = String::new();
    if json {
        let list: Vec<_> = entries
            .iter()
            .map(|(kind, name, formula, params, description)| {
                serde_json::json!({
                    "type": kind,
                    "name": name,
                    "formula": formula,
                    "params": params,
                    "description": description,
                })
            })
            .collect();
        text = serde_json::to_string_pretty(&list).expect("JSON values serialize");
        text.push('\n');
    } else {
        for (kind, name, formula, params, description) in entries {
            let params = if params.is_empty() { String::new() } else { format!(" [{}]", params.join(", ")) };
            let _ = writeln!(text, "{kind:<10} {name:<18} {formula}{params}\n{:29}{description}", "");
        }
    }
    // a closed pipe (e.g. `| head`) is not an error
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(())
}
