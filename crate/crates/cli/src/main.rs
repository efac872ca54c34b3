use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use odeco_tt::equations::Family;
use odeco_tt::ideal::span_matrix;
use odeco_tt::models::{build_train, certify_odeco, Symmetry, TrainModel};
use odeco_tt::poly::generate;
use odeco_tt::report::{
    cmd_certify, cmd_dimension, cmd_full_report, cmd_h_eval, cmd_ideal_test, cmd_parity_study,
    cmd_sample, cmd_vanish_check, generator_polys, parse_seeds, vanish_check_tensor, DimensionMode,
    IdealTarget, OutputFormat, ReportDocument, RunConfig, Suite, TensorSource,
};
use odeco_tt::tensor::AnyTensor;

/// Exit status for runs that could not produce a result at all.
const EXIT_INCOMPLETE: u8 = 64;

#[derive(Parser)]
#[command(name = "odeco-tt", version, about = "Odeco tensor trains: sampling, equations, certificates and dimension checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Train sides, comma separated (e.g. 2,3,4).
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Seeds: `K` for 1..=K, `a..b`, or a comma list such as `3,7,10..12`.
    #[arg(long, global = true, conflicts_with = "seed_count")]
    seeds: Option<String>,
    /// Use seeds 1..=K.
    #[arg(long, global = true)]
    seed_count: Option<u64>,
    #[arg(long, global = true)]
    tol_p: Option<f64>,
    #[arg(long, global = true)]
    tol_q: Option<f64>,
    #[arg(long, global = true)]
    tol_h: Option<f64>,
    /// Primes for modular rank computations, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    primes: Option<Vec<u32>>,
    /// Output file (a directory for `sample`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Train,
    Random,
    Degenerate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    H,
    Planted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Param,
    Variety,
}

#[derive(Subcommand)]
enum Command {
    /// Write sampled train models and their tensors.
    Sample,
    /// Residuals of the defining equations on sampled or supplied tensors.
    VanishCheck {
        #[arg(long, value_enum, default_value_t = Source::Train)]
        source: Source,
        /// Tensor file to check instead of sampling.
        #[arg(long, conflicts_with = "model")]
        input: Option<PathBuf>,
        /// Model file; its train tensor is checked.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Odeco certificates on samples, or on one tensor file.
    Certify {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Treat the input as an arbitrary (not necessarily symmetric) tensor.
        #[arg(long, requires = "input")]
        general: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Evaluate h on a tensor file.
    HEval {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a generated polynomial family.
    EmitEquations {
        #[arg(long, value_parser = parse_family)]
        family: Family,
    },
    /// Membership of h or a planted element in the ideal of the generators.
    IdealTest {
        #[arg(long, value_enum, default_value_t = Target::H)]
        target: Target,
        /// Generator families, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "P,Q")]
        gens: Vec<Family>,
        /// Also write the span matrix (first prime, first n) as sparse triplets.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Jacobian ranks of the parametrization or of the equations.
    Dimension {
        #[arg(long, value_enum, default_value_t = Mode::Param)]
        mode: Mode,
    },
    /// h on trains built from non-orthogonal nodes.
    ParityStudy,
    /// Every suite in one document.
    FullReport,
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "P" | "p" => Ok(Family::P),
        "Q" | "q" => Ok(Family::Q),
        "h" | "H" => Ok(Family::H),
        _ => Err(format!("unknown family {s:?}; expected P, Q or h")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::VanishCheck { .. } => "vanish-check",
            Command::Certify { .. } => "certify",
            Command::HEval { .. } => "h-eval",
            Command::EmitEquations { .. } => "emit-equations",
            Command::IdealTest { .. } => "ideal-test",
            Command::Dimension { .. } => "dimension",
            Command::ParityStudy => "parity-study",
            Command::FullReport => "full-report",
        }
    }

    fn default_n(&self) -> Vec<usize> {
        match self {
            Command::VanishCheck { .. } | Command::ParityStudy => vec![2, 3, 4],
            Command::Certify { .. } => vec![2, 3, 4, 5, 6],
            Command::Dimension { mode: Mode::Param } => vec![2, 3, 4],
            Command::Dimension { mode: Mode::Variety } => vec![2, 3],
            _ => vec![2],
        }
    }

    fn default_seed_count(&self) -> u64 {
        match self {
            Command::FullReport => 100,
            Command::Sample => 1,
            _ => 10,
        }
    }
}

fn build_config(common: &Common, command: &Command) -> Result<RunConfig> {
    let seeds = match (&common.seeds, common.seed_count) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(k)) => (1..=k).collect(),
        (None, None) => (1..=command.default_seed_count()).collect(),
    };
    let n = common.n.clone().unwrap_or_else(|| command.default_n());
    let mut config = RunConfig::new(command.name(), n, seeds);
    if let Some(t) = common.tol_p {
        config.tolerances.p = t;
    }
    if let Some(t) = common.tol_q {
        config.tolerances.q = t;
    }
    if let Some(t) = common.tol_h {
        config.tolerances.h = t;
    }
    if let Some(p) = &common.primes {
        config.primes = p.clone();
    }
    config.out = common.out.clone();
    config.format = match common.format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    };
    config.validate()?;
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_document(config: &RunConfig, doc: &ReportDocument) -> Result<u8> {
    emit(config.out.as_deref(), &doc.render(config.format)?)?;
    if let Some(e) = &doc.error {
        eprintln!("odeco-tt: run stopped early: {e}");
    }
    Ok(doc.exit_code() as u8)
}

fn emit_json(config: &RunConfig, value: &impl serde::Serialize) -> Result<()> {
    if matches!(config.format, OutputFormat::Csv) {
        bail!("{} writes JSON only", config.command);
    }
    emit(config.out.as_deref(), &serde_json::to_string_pretty(value)?)
}

fn read_tensor(path: &Path) -> Result<AnyTensor> {
    AnyTensor::read(path).with_context(|| format!("reading tensor {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    let config = build_config(&cli.common, &cli.command)?;
    match cli.command {
        Command::Sample => {
            let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("samples"));
            for path in cmd_sample(&config, &dir)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::VanishCheck { source, input, model } => {
            let tensor = match (input, model) {
                (Some(path), _) => read_tensor(&path)?,
                (None, Some(path)) => AnyTensor::Real(build_train(
                    &TrainModel::read(&path).with_context(|| format!("reading model {}", path.display()))?,
                )),
                (None, None) => {
                    let source = match source {
                        Source::Train => TensorSource::Train,
                        Source::Random => TensorSource::Random,
                        Source::Degenerate => TensorSource::Degenerate,
                    };
                    return emit_document(&config, &cmd_vanish_check(&config, source)?);
                }
            };
            let (reports, vanishes) = vanish_check_tensor(&tensor, &config.tolerances)?;
            emit_json(&config, &reports)?;
            Ok(if vanishes { 0 } else { Suite::Vanish.exit_bit() as u8 })
        }
        Command::Certify { input, general, tol } => match input {
            None => emit_document(&config, &cmd_certify(&config)?),
            Some(path) => {
                let t = read_tensor(&path)?.to_real();
                let symmetry = if general { Symmetry::General } else { Symmetry::Symmetric };
                let cert = certify_odeco(&t, tol, symmetry)?;
                emit_json(&config, &cert)?;
                Ok(if cert.pass { 0 } else { Suite::Certify.exit_bit() as u8 })
            }
        },
        Command::HEval { input } => {
            emit_json(&config, &cmd_h_eval(&read_tensor(&input)?)?)?;
            Ok(0)
        }
        Command::EmitEquations { family } => {
            let [n] = config.n[..] else {
                bail!("emit-equations takes a single --n");
            };
            emit(config.out.as_deref(), &generate(family, n)?.to_json()?)?;
            Ok(0)
        }
        Command::IdealTest { target, gens, dump_matrix } => {
            let target = match target {
                Target::H => IdealTarget::H,
                Target::Planted => IdealTarget::Planted(config.seeds[0]),
            };
            if let Some(path) = dump_matrix {
                let n = config.n[0];
                let polys = generator_polys(&gens, n)?;
                let refs: Vec<_> = polys.iter().collect();
                span_matrix(&refs, n as u32, config.primes[0])?
                    .write_triplets_file(&path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            emit_document(&config, &cmd_ideal_test(&config, target, &gens)?)
        }
        Command::Dimension { mode } => {
            let mode = match mode {
                Mode::Param => DimensionMode::Param,
                Mode::Variety => DimensionMode::Variety,
            };
            emit_document(&config, &cmd_dimension(&config, mode)?)
        }
        Command::ParityStudy => emit_document(&config, &cmd_parity_study(&config)?),
        Command::FullReport => emit_document(&config, &cmd_full_report(&config)?),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ODECO_TT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("ODECO_TT_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INCOMPLETE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("odeco-tt: error: {e:#}");
            ExitCode::from(EXIT_INCOMPLETE)
        }
    }
}
