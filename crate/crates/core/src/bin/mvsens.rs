use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvsens::config::{parse_matrix, validate, RawCi, RawConfig, RawModel, RunConfig};
use mvsens::inference::{bootstrap_ci, delta_ci};
use mvsens::model::{ParamValue, ProjectionMatrix};
use mvsens::pickfreeze::{generate_design, parse_sample_csv, write_design_inputs};
use mvsens::report::{write_report, ReportFormat};
use mvsens::run::{run, RunOptions};
use mvsens::{estimate_index, estimate_index_general, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mvsens",
    version,
    about = "Sensitivity indices for vector-output models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate indices (and oracle values when available) for a model.
    Run(RunArgs),
    /// Write the input rows of a design for evaluation by an external code.
    Design(DesignArgs),
    /// Estimate an index from a CSV of paired outputs `y_1..y_k,yu_1..yu_k`.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Configuration document (TOML, `schema = 1`); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus model name.
    #[arg(long)]
    model: Option<String>,
    /// Corpus model parameter, `key=value` or `key=v1,v2,...` (repeatable).
    #[arg(long = "param")]
    params: Vec<String>,
    /// Tabulated model CSV with header `x1..xp,y1..yk`.
    #[arg(long)]
    external: Option<PathBuf>,
    /// Input subset as comma-separated 1-based indices (repeatable).
    #[arg(long = "subset")]
    subsets: Vec<String>,
    #[arg(long)]
    n: Option<i64>,
    #[arg(long)]
    seed: Option<i64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Weighting matrix file, whitespace-separated rows.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// `none`, `delta`, `bootstrap`, `bootstrap:B` or `bootstrap:B:LEVEL`.
    #[arg(long)]
    ci: Option<String>,
    #[arg(long)]
    replications: Option<i64>,
    /// `auto` or `none`.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    /// Omit timing fields so identical inputs give byte-identical reports.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output CSV; one file per subset gets a `.<index>` suffix when several are given.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// `none`, `delta`, `bootstrap`, `bootstrap:B` or `bootstrap:B:LEVEL`.
    #[arg(long, default_value = "delta")]
    ci: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })
}

fn parse_param(text: &str) -> Result<(String, ParamValue), Error> {
    let (key, value) = text.split_once('=').ok_or_else(|| Error::Config {
        field: "model.params".into(),
        message: format!("`{text}` is not key=value"),
    })?;
    let field = format!("model.params.{key}");
    let values = value
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| Error::Config {
                field: field.clone(),
                message: format!("`{v}` is not a number"),
            })
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    let param = if values.len() == 1 {
        ParamValue::Number(values[0])
    } else {
        ParamValue::Vector(values)
    };
    Ok((key.to_string(), param))
}

/// Config document merged with command-line overrides.
fn raw_config(args: &ModelArgs) -> Result<RawConfig, Error> {
    let mut raw = match &args.config {
        Some(path) => toml::from_str::<RawConfig>(&read(path)?).map_err(|e| Error::Config {
            field: "document".into(),
            message: e.message().to_string(),
        })?,
        None => RawConfig {
            schema: Some(mvsens::config::SCHEMA_VERSION),
            ..RawConfig::default()
        },
    };
    if args.model.is_some() || args.external.is_some() || !args.params.is_empty() {
        let model = raw.model.get_or_insert_with(RawModel::default);
        if let Some(name) = &args.model {
            model.name = Some(name.clone());
            model.external = None;
            model.params.clear();
        }
        if let Some(path) = &args.external {
            model.external = Some(path.clone());
            model.name = None;
        }
        for p in &args.params {
            let (k, v) = parse_param(p)?;
            model.params.insert(k, v);
        }
    }
    if !args.subsets.is_empty() {
        let subsets = args
            .subsets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.split(',')
                    .map(|v| {
                        v.trim().parse::<i64>().map_err(|_| Error::Config {
                            field: format!("subsets[{i}]"),
                            message: format!("`{v}` is not an index"),
                        })
                    })
                    .collect::<Result<Vec<i64>, Error>>()
            })
            .collect::<Result<Vec<_>, Error>>()?;
        raw.subsets = Some(subsets);
    }
    if args.n.is_some() {
        raw.n = args.n;
    }
    if args.seed.is_some() {
        raw.seed = args.seed;
    }
    Ok(raw)
}

fn ci_flag(text: &str) -> Result<RawCi, Error> {
    let mut parts = text.split(':');
    let method = parts.next().unwrap_or_default().to_string();
    let bad = || Error::Config {
        field: "ci".into(),
        message: format!("cannot parse `{text}`"),
    };
    let b_reps = parts
        .next()
        .map(|b| b.parse::<i64>().map_err(|_| bad()))
        .transpose()?;
    let level = parts
        .next()
        .map(|l| l.parse::<f64>().map_err(|_| bad()))
        .transpose()?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(RawCi {
        method,
        level,
        b_reps,
    })
}

fn run_command(args: RunArgs) -> Result<(), Error> {
    let mut raw = raw_config(&args.model)?;
    if let Some(path) = &args.matrix {
        let m = parse_matrix(&read(path)?).map_err(|e| Error::Config {
            field: "matrix".into(),
            message: e.to_string(),
        })?;
        raw.matrix = Some(mvsens::table::to_nested(&m));
    }
    if let Some(ci) = &args.ci {
        raw.ci = Some(ci_flag(ci)?);
    }
    if args.replications.is_some() {
        raw.replications = args.replications;
    }
    if args.oracle.is_some() {
        raw.oracle = args.oracle.clone();
    }
    let format: ReportFormat = args.format.parse()?;
    let config: RunConfig = validate(raw)?;
    let report = run(
        &config,
        RunOptions {
            reproducible: args.reproducible,
        },
    )?;
    match &args.output {
        Some(path) => write_report(&report, path, format),
        None => {
            let text = match format {
                ReportFormat::Json => report.to_json()?,
                ReportFormat::Csv => report.to_csv()?,
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn design_command(args: DesignArgs) -> Result<(), Error> {
    let config = validate(raw_config(&args.model)?)?;
    let several = config.subsets.len() > 1;
    for (j, u) in config.subsets.iter().enumerate() {
        let seed = mvsens::rng::derive_seed(config.seed, j as u64);
        let design = generate_design(&config.space, u, config.n, seed)?;
        let path = if several {
            let mut p = args.output.clone().into_os_string();
            p.push(format!(".{}", j + 1));
            PathBuf::from(p)
        } else {
            args.output.clone()
        };
        let file = fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        write_design_inputs(&design, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn estimate_command(args: EstimateArgs) -> Result<(), Error> {
    let sample = parse_sample_csv(&read(&args.samples)?)?;
    let mut out = serde_json::Map::new();
    out.insert("n".into(), sample.len().into());
    out.insert("estimate".into(), estimate_index(&sample)?.into());
    if let Some(path) = &args.matrix {
        let m = ProjectionMatrix::new(parse_matrix(&read(path)?)?)?;
        out.insert(
            "estimate_general".into(),
            estimate_index_general(&sample, &m)?.into(),
        );
    }
    let ci = ci_flag(&args.ci)?;
    let level = ci.level.unwrap_or(mvsens::config::DEFAULT_LEVEL);
    let interval = match ci.method.as_str() {
        "none" => None,
        "delta" => Some(delta_ci(&sample, level)?),
        "bootstrap" => {
            let b = ci
                .b_reps
                .map_or(mvsens::config::DEFAULT_BOOTSTRAP_REPS, |b| {
                    b.max(0) as usize
                });
            Some(bootstrap_ci(&sample, b, level, args.seed)?)
        }
        other => {
            return Err(Error::Config {
                field: "ci".into(),
                message: format!("unknown method `{other}`"),
            })
        }
    };
    if let Some(e) = interval {
        out.insert(
            "interval".into(),
            serde_json::to_value(e).map_err(|e| Error::Parse(e.to_string()))?,
        );
    }
    let text = serde_json::to_string_pretty(&out).map_err(|e| Error::Parse(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => EXIT_CONFIG,
        Error::DegenerateModel(_) | Error::DegenerateSample(_) | Error::IllPosed(_) => {
            EXIT_DEGENERATE
        }
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_command(a),
        Command::Design(a) => design_command(a),
        Command::Estimate(a) => estimate_command(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mvsens: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
