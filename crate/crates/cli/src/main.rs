use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use celledge::config::{ArgmaxSetting, FitModeSetting, MatchSetting, CONFIG_ENV};
use celledge::pipeline;
use celledge::{Error, PipelineConfig};

/// Gradient-guided correction of polygon cell annotations.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML config file; every key is optional.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correct, refit and rasterize every image/annotation pair in a directory.
    Correct(CorrectArgs),
    /// Rasterize annotations as drawn, without correction.
    Rasterize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score soft edge maps against ground-truth edge maps.
    Eval(EvalArgs),
    /// Cut images and label maps into patches and split them 6:1:3.
    Prep {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Side-by-side overlay of original (red) and corrected (green) contours.
    Compare {
        /// Directory with the images and original annotations.
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory with corrected annotations of the same stems.
        #[arg(long)]
        corrected: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct CorrectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
    /// Search radius along the normal, in pixels.
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    lambda_t: Option<f64>,
    #[arg(long, value_enum)]
    argmax: Option<Argmax>,
    /// Maximum point spacing after interpolation.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Group overlap half-width for stitched mode, a multiple of 0.5.
    #[arg(long)]
    overlap: Option<f64>,
    /// Skip the uncorrected edge map.
    #[arg(long)]
    no_original: bool,
    /// Also write the gradient magnitude as a 16-bit PNG.
    #[arg(long)]
    dump_gradient: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Matching distance in pixels; defaults to a fraction of the diagonal.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    thresholds: Option<usize>,
    /// Greedy nearest-first matching instead of maximum matching.
    #[arg(long)]
    greedy: bool,
    /// Write eval.json and pr.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Argmax {
    Weighted,
    Raw,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Smooth,
    Stitched,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    match &cli.command {
        Command::Correct(a) => {
            if let Some(v) = a.sigma {
                config.sigma = v;
            }
            let c = &mut config.correction;
            if let Some(v) = a.radius {
                c.radius = v;
            }
            if let Some(v) = a.bandwidth {
                c.bandwidth = Some(v);
            }
            if let Some(v) = a.lambda_t {
                c.lambda_t = v;
            }
            if let Some(v) = a.argmax {
                c.argmax = match v {
                    Argmax::Weighted => ArgmaxSetting::Weighted,
                    Argmax::Raw => ArgmaxSetting::Raw,
                };
            }
            let f = &mut config.fit;
            if let Some(v) = a.step {
                f.step = v;
            }
            if let Some(v) = a.mode {
                f.mode = match v {
                    Mode::Smooth => FitModeSetting::SmoothClosed,
                    Mode::Stitched => FitModeSetting::Stitched,
                };
            }
            if let Some(v) = a.overlap {
                f.overlap = v;
            }
            if a.no_original {
                config.raster.write_original = false;
            }
            if a.dump_gradient {
                config.raster.dump_gradient = true;
            }
        }
        Command::Eval(a) => {
            if a.tol.is_some() {
                config.eval.tolerance = a.tol;
            }
            if let Some(n) = a.thresholds {
                config.eval.thresholds = n;
            }
            if a.greedy {
                config.eval.matching = MatchSetting::Greedy;
            }
        }
        Command::Prep { seed: Some(s), .. } => config.prep.seed = *s,
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn print_batch(what: &str, report: &pipeline::BatchReport) -> bool {
    println!(
        "{what}: {} files written, {} failed, {} skipped",
        report.written.len(),
        report.failures.len(),
        report.skipped.len()
    );
    for f in &report.failures {
        eprintln!("  {}: {}", f.name, f.error);
    }
    for s in &report.skipped {
        eprintln!("  skipped {s}");
    }
    report.is_clean()
}

fn run(cli: &Cli, config: &PipelineConfig) -> Result<bool, Failure> {
    match &cli.command {
        Command::Correct(a) => {
            let (report, timing) = pipeline::run_correct(&a.input, &a.out, config)?;
            println!(
                "corrected {} images in {:.2}s with {} workers ({} failed, {} unmatched)",
                report.images.len(),
                timing.total_seconds,
                timing.workers,
                report.failures.len(),
                report.unmatched.len()
            );
            for f in &report.failures {
                eprintln!("  {}: {}", f.name, f.error);
            }
            for u in &report.unmatched {
                eprintln!("  unmatched {u}");
            }
            Ok(report.is_clean())
        }
        Command::Rasterize { input, out } => Ok(print_batch("rasterize", &pipeline::run_rasterize(input, out, config)?)),
        Command::Eval(a) => {
            let run = pipeline::run_eval(&a.pred, &a.gt, config)?;
            match &run.summary {
                Some(s) => println!(
                    "ODS {:.4} (t = {:.4})  OIS {:.4}  AP {:.4}  over {} images",
                    s.ods,
                    s.ods_threshold,
                    s.ois,
                    s.ap,
                    s.per_image.len()
                ),
                None => println!("no images scored"),
            }
            for f in &run.failures {
                eprintln!("  {}: {}", f.name, f.error);
            }
            if let Some(out) = &a.out {
                pipeline::write_eval(&run, out)?;
            }
            Ok(run.failures.is_empty())
        }
        Command::Prep { images, labels, out, .. } => {
            let r = pipeline::run_prep(images, labels, out, config)?;
            println!("{} patches: {} train, {} val, {} test", r.patches, r.train, r.val, r.test);
            Ok(print_batch("prep", &r.batch))
        }
        Command::Compare { input, corrected, out } => {
            Ok(print_batch("compare", &pipeline::run_compare(input, corrected, out, config)?))
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn exists(path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Run(format!("{} is not a directory", path.display())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let outcome = load_config(&cli).and_then(|config| {
        match &cli.command {
            Command::Correct(a) => exists(&a.input)?,
            Command::Rasterize { input, .. } | Command::Compare { input, .. } => exists(input)?,
            Command::Eval(a) => {
                exists(&a.pred)?;
                exists(&a.gt)?
            }
            Command::Prep { images, labels, .. } => {
                exists(images)?;
                exists(labels)?
            }
        }
        run(&cli, &config)
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
