use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use offload_core::codegen::Backend;
use offload_core::error::PipelineError;
use offload_core::frontend::{dump_ir_document, screen_all};
use offload_core::pipeline::{load_model, run_and_write, EvaluatorConfig, ExternalConfig, InputKind, PipelineConfig};

#[derive(Parser)]
#[command(name = "offload", version, about = "Search GPU offload patterns for loop programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Block trial, loop search, selection; writes report.json, measurements.jsonl and the candidate source.
    Run(RunArgs),
    /// Print the IR document for an input.
    DumpIr(InputArgs),
    /// Print the parallelizability verdict of every loop as JSON.
    Screen(InputArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluatorKind {
    CostModel,
    External,
}

#[derive(Args)]
struct InputArgs {
    /// TOML config file; relative paths inside it are taken from its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// mini or ir_document
    #[arg(long)]
    input_kind: Option<InputKind>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// c_openacc, python_cuda_marker or java_lambda_marker
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorKind>,
    /// Pattern DB (JSON).
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    allow_interface_change: bool,
    /// Run exhaustive loop search for every measured block subset.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    build_cmd: Option<String>,
    #[arg(long)]
    run_cmd: Option<String>,
    #[arg(long)]
    reference_output: Option<PathBuf>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Let the external runner measure candidates concurrently.
    #[arg(long)]
    parallel_eval: bool,
    #[arg(long)]
    keep_work_dirs: bool,
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if !p.as_os_str().is_empty() && p.is_relative() {
        *p = base.join(&*p);
    }
}

fn load_config_file(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let mut c: PipelineConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(base, &mut c.input);
    resolve(base, &mut c.out);
    if let Some(db) = &mut c.db {
        resolve(base, db);
    }
    if let EvaluatorConfig::External(e) = &mut c.evaluator {
        if let Some(r) = &mut e.reference_output {
            resolve(base, r);
        }
    }
    Ok(c)
}

fn base_config(args: &InputArgs) -> Result<PipelineConfig, PipelineError> {
    let mut c = match &args.config {
        Some(p) => load_config_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(i) = &args.input {
        c.input = i.clone();
    }
    if let Some(k) = args.input_kind {
        c.input_kind = k;
    } else if args.input.is_some() && c.input.extension().is_some_and(|e| e == "json") {
        c.input_kind = InputKind::IrDocument;
    }
    Ok(c)
}

fn run_config(args: &RunArgs) -> Result<PipelineConfig, PipelineError> {
    let mut c = base_config(&args.input)?;
    if let Some(b) = args.backend {
        c.backend = b;
    }
    if let Some(db) = &args.db {
        c.db = Some(db.clone());
    }
    if let Some(s) = args.seed {
        c.ga.seed = s;
    }
    if let Some(o) = &args.out {
        c.out = o.clone();
    }
    c.allow_interface_change |= args.allow_interface_change;
    c.exhaustive |= args.exhaustive;

    let external_flags = args.run_cmd.is_some() || args.build_cmd.is_some() || args.reference_output.is_some();
    match args.evaluator {
        Some(EvaluatorKind::CostModel) => {
            if !matches!(c.evaluator, EvaluatorConfig::CostModel(_)) {
                c.evaluator = EvaluatorConfig::default();
            }
        }
        Some(EvaluatorKind::External) | None if external_flags || matches!(args.evaluator, Some(EvaluatorKind::External)) => {
            let mut e = match &c.evaluator {
                EvaluatorConfig::External(e) => e.clone(),
                EvaluatorConfig::CostModel(_) => {
                    let run_cmd = args.run_cmd.clone().ok_or_else(|| config_error("the external evaluator needs --run-cmd"))?;
                    ExternalConfig {
                        build_cmd: None,
                        run_cmd,
                        reference_output: None,
                        timeout_seconds: 300.0,
                        rel_tol: offload_core::eval::DEFAULT_REL_TOL,
                        parallel: false,
                        keep_work_dirs: false,
                    }
                }
            };
            if let Some(v) = &args.build_cmd {
                e.build_cmd = Some(v.clone());
            }
            if let Some(v) = &args.run_cmd {
                e.run_cmd = v.clone();
            }
            if let Some(v) = &args.reference_output {
                e.reference_output = Some(v.clone());
            }
            if let Some(v) = args.timeout {
                e.timeout_seconds = v;
            }
            if let Some(v) = args.rel_tol {
                e.rel_tol = v;
            }
            e.parallel |= args.parallel_eval;
            e.keep_work_dirs |= args.keep_work_dirs;
            c.evaluator = EvaluatorConfig::External(e);
        }
        _ => {}
    }
    Ok(c)
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(args) => {
            let config = run_config(&args)?;
            let out = run_and_write(&config)?;
            match &out.report.chosen {
                Some(c) => println!(
                    "chosen: blocks [{}] genome `{}` time {:.6e} s ({} evaluations) -> {}",
                    c.blocks.join(", "),
                    c.genome,
                    c.time,
                    out.report.evaluations_performed,
                    config.out.display()
                ),
                None => println!("no valid measurement; wrote the unmodified program to {}", config.out.display()),
            }
        }
        Command::DumpIr(args) => {
            let config = base_config(&args)?;
            config.check()?;
            print!("{}", dump_ir_document(&load_model(&config)?));
        }
        Command::Screen(args) => {
            let config = base_config(&args)?;
            config.check()?;
            let verdicts = screen_all(&load_model(&config)?);
            println!("{}", serde_json::to_string_pretty(&verdicts).expect("verdicts serialize"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
