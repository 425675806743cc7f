use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kfold_stability::bounds::BoundMode;
use kfold_stability::complexity::RcMethod;
use kfold_stability::folds::Scheme;
use kfold_stability::MixingModel;
use kfold_stability_cli::commands::{self, VerifyRequest};
use kfold_stability_cli::config::{self, OUT_ENV};
use kfold_stability_cli::{io, CliError, Overrides, Result, RunConfig};

/// Stability bounds for K-fold cross-validation and minimax fold-count selection.
#[derive(Parser)]
#[command(name = "kfold-stability", version, about)]
#[command(after_help = format!("The output directory defaults to ${OUT_ENV}, then the working directory.\n\
Exit codes: 0 success, 1 input or domain error, 2 no feasible K."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select (K*, b*) and write bound_curve.csv, risks.csv and selection.json.
    Analyze(RunArgs),
    /// Select (K*, b*) and write bound_curve.csv and selection.json.
    Select(RunArgs),
    /// Monte Carlo coverage check of one inequality; writes verify_<tag>.json.
    Verify(VerifyArgs),
    /// Print a fold assignment as JSON.
    Split(SplitArgs),
    /// Estimate the Rademacher complexity of the loss class.
    Rc(RcArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dataset CSV, overriding `dataset_path`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// iid_one_round, iid_convoluted, mixing_one_round or mixing_convoluted.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<BoundMode>,
    #[arg(long)]
    varpi: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// Constant of the subexponential concentration inequality.
    #[arg(long = "bernstein-c")]
    c: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    rc_draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(
            &self.config,
            &Overrides {
                dataset_path: self.data.clone(),
                mode: self.mode,
                varpi: self.varpi,
                xi: self.xi,
                c: self.c,
                k_min: self.k_min,
                k_max: self.k_max,
                mu: self.mu,
                rc_draws: self.rc_draws,
                seed: self.seed,
                output_dir: self.out.clone(),
            },
        )
    }
}

fn parse_mode(s: &str) -> std::result::Result<BoundMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| "expected iid_one_round, iid_convoluted, mixing_one_round or mixing_convoluted".into())
}

#[derive(Args)]
struct VerifyArgs {
    /// 1, 2, 4, 5, lemma1, lemmaA1 or yu.
    #[arg(long)]
    theorem: String,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator description (JSON, or TOML by extension).
    #[arg(long)]
    generator: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    block_len: Option<usize>,
    #[arg(long)]
    varpi: Option<f64>,
    #[arg(long = "bernstein-c")]
    c: Option<f64>,
    #[arg(long)]
    rc_draws: Option<usize>,
    /// Exponential mixing rate r in beta_a = beta0 * r^a.
    #[arg(long)]
    mixing_r: Option<f64>,
    #[arg(long, default_value_t = 1.0, requires = "mixing_r")]
    mixing_beta0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Random,
    Blocked,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Random)]
    scheme: SchemeArg,
    /// Block pairs per side for the blocked scheme.
    #[arg(long, default_value_t = 2)]
    mu: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    MonteCarlo,
    Exhaustive,
}

#[derive(Args)]
struct RcArgs {
    #[arg(long)]
    config: PathBuf,
    /// One-round complexity of a K-fold split instead of the full sample.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(value: &impl serde::Serialize, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(p) => io::write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => select(&args, true),
        Command::Select(args) => select(&args, false),
        Command::Verify(args) => {
            let req = VerifyRequest {
                theorem: args.theorem,
                trials: args.trials,
                seed: args.seed,
                generator: args.generator,
                n: args.n,
                k: args.k,
                mu: args.mu,
                block_len: args.block_len,
                varpi: args.varpi,
                c: args.c,
                rc_draws: args.rc_draws,
                mixing: args.mixing_r.map(|r| MixingModel::Exponential {
                    beta0: args.mixing_beta0,
                    r,
                }),
            };
            let out = config::resolve_output_dir(args.out.as_deref());
            let (report, path) = commands::run_verify(&req, &out)?;
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            if report.grid.is_empty() {
                println!(
                    "theorem {}: {verdict} ({} violations in {} feasible trials, {} infeasible; frequency {} vs target {} + {})",
                    report.theorem,
                    report.violations,
                    report.feasible_trials,
                    report.infeasible,
                    io::num(report.frequency),
                    io::num(report.target),
                    io::num(report.tolerance),
                );
            } else {
                let held = report.grid.iter().filter(|g| g.pass).count();
                println!(
                    "theorem {}: {verdict} ({held}/{} grid points hold over {} trials)",
                    report.theorem,
                    report.grid.len(),
                    report.trials,
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Split(args) => {
            let scheme = match args.scheme {
                SchemeArg::Random => Scheme::Random,
                SchemeArg::Blocked => Scheme::Blocked,
            };
            let fa = commands::run_split(args.n, args.k, scheme, args.mu, args.seed)?;
            emit(&fa, args.output.as_ref())
        }
        Command::Rc(args) => {
            let cfg = RunConfig::load(
                &args.config,
                &Overrides {
                    rc_draws: args.draws,
                    seed: args.seed,
                    ..Overrides::default()
                },
            )?;
            let method = match args.method {
                MethodArg::Auto => RcMethod::Auto,
                MethodArg::MonteCarlo => RcMethod::MonteCarlo,
                MethodArg::Exhaustive => RcMethod::Exhaustive,
            };
            let report = commands::run_rc(&cfg, args.k, method)?;
            emit(&report, args.output.as_ref())
        }
    }
}

fn select(args: &RunArgs, risks: bool) -> Result<()> {
    let cfg = args.load()?;
    let out = cfg.resolve_output_dir();
    let sel = commands::run_select(&cfg, &out, risks)?;
    println!(
        "K* = {}, b* = {} (rhs {}, confidence {})",
        sel.k_star,
        sel.b_star,
        io::num(sel.rhs_star),
        io::num(sel.confidence)
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(kfold_stability::Error::NoFeasibleK(_)) = &e {
                eprintln!("bound_curve.csv lists the reason for each K");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
