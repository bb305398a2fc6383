//! `eegkit`: run the EEG feature and classification pipeline, whole or by stage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eegkit::pipeline::{describe_plan, run, ElectrodeChoice, PipelineConfig, PipelineError, Stage};
use eegkit::synth::CohortSpec;

#[derive(Parser)]
#[command(name = "eegkit", version, about = "EEG band power, scalogram, coherence and classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Synth(Common),
    /// Epoch extraction, drift removal and line-noise notch.
    Preprocess(Common),
    /// Band power matrices per electrode.
    Bandpower(Common),
    /// Morlet scalograms as images.
    Wavelet(Common),
    /// Intra-hemisphere coherence reports.
    Coherence(Common),
    /// Subject-level feature table.
    Features(Common),
    /// Cross-validated classifiers and score regression; exports models.
    Train(Common),
    /// Apply exported models to the feature table.
    Eval(Common),
    /// Run the stages listed in the config.
    Run(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML pipeline config. Without it a default synthetic cohort is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["homan", "all"])]
    electrode_set: Option<String>,
    /// Worker threads for per-subject and per-electrode work.
    #[arg(long)]
    jobs: Option<usize>,
    /// Validate the config and print the stage plan without touching data.
    #[arg(long)]
    dry_run: bool,
}

impl Command {
    fn split(&self) -> (Option<Stage>, &Common) {
        match self {
            Command::Synth(c) => (Some(Stage::Synth), c),
            Command::Preprocess(c) => (Some(Stage::Preprocess), c),
            Command::Bandpower(c) => (Some(Stage::Bandpower), c),
            Command::Wavelet(c) => (Some(Stage::Wavelet), c),
            Command::Coherence(c) => (Some(Stage::Coherence), c),
            Command::Features(c) => (Some(Stage::Features), c),
            Command::Train(c) => (Some(Stage::Train), c),
            Command::Eval(c) => (Some(Stage::Eval), c),
            Command::Run(c) => (None, c),
        }
    }
}

fn build_config(stage: Option<Stage>, args: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig { synth: Some(CohortSpec::default()), ..Default::default() },
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(set) = &args.electrode_set {
        cfg.electrode_set = ElectrodeChoice::parse(set).expect("clap restricts values");
    }
    if let Some(stage) = stage {
        cfg.stages = cfg.closure(stage);
    }
    Ok(cfg)
}

fn out_dir(cfg: &PipelineConfig, args: &Common) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("eegkit-run"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (stage, args) = cli.command.split();
    let cfg = match build_config(stage, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.dry_run {
        return match describe_plan(&cfg) {
            Ok(plan) => {
                print!("{plan}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let out = out_dir(&cfg, args);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cfg, &out)) {
        Ok(summary) => {
            for c in &summary.classification {
                println!("{:<10} accuracy {:.3}  f1 {:.3}", c.classifier, c.accuracy, c.f1);
            }
            if let Some(r) = &summary.regression {
                println!("regression r2 {:.3}  rmse {:.3}", r.r2, r.rmse);
            }
            println!("{} files, summary at {}", summary.files.len(), out.join(eegkit::pipeline::SUMMARY_FILE).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PipelineError::Config(_) | PipelineError::Dependency { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
