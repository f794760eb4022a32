use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use typeloom::checker::{type_check, COMPILER_ENV};
use typeloom::convert::convert_package;
use typeloom::fim::{annotate_parameters_via_fim, HttpCompletionClient};
use typeloom::metrics::{before_after_compare, MigrationReport};
use typeloom::pipeline::{
    build_report, run_pipeline, scan_corpus, PipelineConfig, PredictionFormat, Stage, WorkDir,
};
use typeloom::predictions::{load_location_predictions, load_token_predictions};
use typeloom::project::{scan_package, strip_tests};
use typeloom::weave::{weave_package, FilePredictions};

/// Migrate JavaScript packages to TypeScript with predicted types and
/// measure the result with the TypeScript compiler.
#[derive(Parser)]
#[command(name = "typeloom", version)]
struct Cli {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify and admit every package below a corpus directory.
    Scan {
        input_dir: PathBuf,
        #[arg(long)]
        declarations: Option<PathBuf>,
        #[arg(long)]
        max_lines: Option<usize>,
    },
    /// Convert one package from CommonJS to ECMAScript modules.
    Convert { in_dir: PathBuf, out_dir: PathBuf },
    /// Annotate the parameters of one package through a completion endpoint,
    /// writing location-keyed prediction tables.
    PredictFim {
        pkg_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Weave predictions into one package.
    Weave {
        #[arg(long, default_value = "location")]
        format: PredictionFormat,
        pkg_dir: PathBuf,
        pred_dir: PathBuf,
        out_dir: PathBuf,
    },
    /// Type check one TypeScript package.
    Check {
        pkg_dir: PathBuf,
        #[command(flatten)]
        compiler: CompilerArgs,
    },
    /// Rebuild the report of a work directory from its artifacts.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        work: PathBuf,
        #[arg(long)]
        declarations: Option<PathBuf>,
        /// Report of a run before module conversion, to pair with this one.
        #[arg(long)]
        before: Option<PathBuf>,
        #[arg(long, default_value = "location")]
        format: PredictionFormat,
    },
    /// Run the selected stages over a corpus.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct CompilerArgs {
    /// Compiler executable; also read from the TYPELOOM_TSC variable.
    #[arg(long)]
    compiler: Option<PathBuf>,
    /// Directory of declaration packages made visible as `@types`.
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long)]
    timeout: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    work: Option<PathBuf>,
    /// Comma-separated subset of convert, predict-fim, weave, check, report.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<Stage>>,
    #[arg(long)]
    format: Option<PredictionFormat>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    woven: Option<PathBuf>,
    #[arg(long)]
    declarations: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[command(flatten)]
    compiler: CompilerArgs,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(tsc) = std::env::var_os(COMPILER_ENV) {
        config.compile.compiler_path = tsc.into();
    }
    Ok(config)
}

fn apply_compiler_args(config: &mut PipelineConfig, args: CompilerArgs) {
    if let Some(c) = args.compiler {
        config.compile.compiler_path = c;
    }
    if let Some(t) = args.types {
        config.compile.ambient_types = Some(t);
    }
    if let Some(t) = args.timeout {
        config.compile.timeout_secs = t;
    }
}

fn print_jsonl<T: Serialize>(records: &[T]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

fn load_predictions(
    pred_dir: &Path,
    pkg: &typeloom::project::PackageUnit,
    format: PredictionFormat,
) -> Result<HashMap<String, FilePredictions>> {
    let mut out = HashMap::new();
    for unit in &pkg.files {
        let path = pred_dir.join(format!("{}.csv", unit.relative_path));
        if !path.is_file() {
            continue;
        }
        let table = match format {
            PredictionFormat::Token => FilePredictions::Token(load_token_predictions(&path)?),
            PredictionFormat::Location | PredictionFormat::Fim => {
                FilePredictions::Location(load_location_predictions(&path)?)
            }
        };
        out.insert(unit.relative_path.clone(), table);
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Scan {
            input_dir,
            declarations,
            max_lines,
        } => {
            config.input_dir = input_dir;
            config.declarations_dir = declarations.or(config.declarations_dir);
            config.max_lines = max_lines.unwrap_or(config.max_lines);
            let scanned = scan_corpus(&config)?;
            print_jsonl(&scanned.iter().map(|s| &s.record).collect::<Vec<_>>())?;
        }
        Command::Convert { in_dir, out_dir } => {
            let pkg = strip_tests(scan_package(&in_dir, false)?);
            let converted = convert_package(&pkg, &out_dir)?;
            print_jsonl(&converted.outcomes)?;
        }
        Command::PredictFim {
            pkg_dir,
            out_dir,
            endpoint,
        } => {
            config.endpoint_url = endpoint.or(config.endpoint_url);
            let fim = config.fim_config();
            let client = HttpCompletionClient::from_config(&fim);
            let pkg = strip_tests(scan_package(&pkg_dir, false)?);
            for unit in pkg.files.iter().filter(|f| f.parses()) {
                let outcome = annotate_parameters_via_fim(unit, &client, &fim)?;
                if let Some(e) = outcome.error {
                    bail!("{}: {e}", unit.relative_path);
                }
                let path = out_dir.join(format!("{}.csv", unit.relative_path));
                fs::create_dir_all(path.parent().expect("joined path has a parent"))?;
                fs::write(&path, outcome.location_table(&unit.relative_path).to_csv())?;
                println!(
                    "{}",
                    serde_json::json!({
                        "file": unit.relative_path,
                        "parameters": outcome.parameters,
                        "annotated": outcome.annotations.len(),
                        "requests": outcome.requests,
                    })
                );
            }
        }
        Command::Weave {
            format,
            pkg_dir,
            pred_dir,
            out_dir,
        } => {
            let pkg = strip_tests(scan_package(&pkg_dir, false)?);
            let predictions = load_predictions(&pred_dir, &pkg, format)?;
            let woven = weave_package(&pkg, &predictions, &out_dir)?;
            print_jsonl(&woven.records)?;
        }
        Command::Check { pkg_dir, compiler } => {
            apply_compiler_args(&mut config, compiler);
            let result = type_check(&pkg_dir, &config.compile)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Report {
            input,
            work,
            declarations,
            before,
            format,
        } => {
            config.input_dir = input;
            config.declarations_dir = declarations.or(config.declarations_dir);
            let scanned = scan_corpus(&config)?;
            let work = WorkDir::new(work);
            let mut report = build_report(&work, &scanned, format.name());
            if let Some(path) = before {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let earlier = MigrationReport::from_json(&text)?;
                report.before_after = Some(before_after_compare(&earlier, &report)?);
            }
            report.write_to(&work.report())?;
            print!("{}", report.tables());
        }
        Command::Pipeline(args) => {
            if let Some(v) = args.input {
                config.input_dir = v;
            }
            if let Some(v) = args.work {
                config.work_dir = v;
            }
            if let Some(v) = args.stages {
                config.stages = v.into_iter().collect();
            } else if config.prediction_format != PredictionFormat::Fim
                && args.format != Some(PredictionFormat::Fim)
            {
                config.stages.remove(&Stage::PredictFim);
            }
            if let Some(v) = args.format {
                config.prediction_format = v;
            }
            config.predictions_dir = args.predictions.or(config.predictions_dir);
            config.woven_dir = args.woven.or(config.woven_dir);
            config.declarations_dir = args.declarations.or(config.declarations_dir);
            config.endpoint_url = args.endpoint.or(config.endpoint_url);
            if let Some(v) = args.concurrency {
                config.concurrency = v;
            }
            apply_compiler_args(&mut config, args.compiler);
            let report = run_pipeline(&config)?;
            print!("{}", report.tables());
        }
    }
    Ok(())
}
