use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plantsne::config::PipelineConfig;
use plantsne::pipeline::{self, SemanticSource, INSTANCE_PERPLEXITIES, THREADS_ENV};
use plantsne::synth::PlantSpec;

#[derive(Parser)]
#[command(name = "plantsne", version, about = "Plant point-cloud segmentation through t-SNE embeddings")]
struct Cli {
    /// Sectioned key = value settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set tsne.perplexity=40`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads for multi-file commands (also read from PLANTSNE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SemanticMode {
    /// Use the input's own semantic labels.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    gt_semantic: bool,
    /// Classify with this model first.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl SemanticMode {
    fn source(&self) -> SemanticSource {
        match &self.model {
            Some(m) => SemanticSource::Predicted(m.clone()),
            None => SemanticSource::GroundTruth,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Embed a cloud and plot its clusters.
    Embed {
        input: PathBuf,
        /// Output prefix for the written files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract superpoints and write their ids as an extra column.
    Superpoints {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the leaf/stem classifier on labeled clouds.
    Train {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Select perplexity and d_E by k-fold validation first.
        #[arg(long, value_name = "FOLDS")]
        sweep: Option<usize>,
    },
    /// Label a cloud as leaf/stem.
    Segment {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split leaf points into individual leaves.
    Instance {
        input: PathBuf,
        #[command(flatten)]
        mode: SemanticMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Write a synthetic plant with ground-truth labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        n_leaves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        leaf_min: Option<f64>,
        #[arg(long)]
        leaf_max: Option<f64>,
        #[arg(long)]
        stem_height: Option<f64>,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        /// Out-of-plane blade bow as a fraction of blade length.
        #[arg(long)]
        bow: Option<f64>,
    },
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(Sweep),
}

#[derive(Subcommand)]
enum Sweep {
    /// Perplexity x d_E grid with k-fold validated mIoU.
    Semantic {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// SBD for instance perplexities 20 to 80.
    Instance {
        input: PathBuf,
        #[command(flatten)]
        mode: SemanticMode,
    },
}

fn load_config(cli: &Cli) -> plantsne::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> plantsne::Result<()> {
    let cfg = load_config(&cli)?;
    log::debug!("unit: {}", cfg.data.unit);
    match cli.command {
        Command::Embed { input, out } => {
            let s = pipeline::cmd_embed(&input, &cfg, &out)?;
            println!("points={}\nembedded={}\nvoxel_size={}", s.points, s.embedded, s.voxel_size);
            println!("cluster_count={}\nfinal_kl={}", s.clusters, s.final_kl);
        }
        Command::Superpoints { input, out } => {
            let s = pipeline::cmd_superpoints(&input, &cfg, &out)?;
            println!("superpoints={}", s.superpoints);
            for (name, n) in &s.provenance {
                println!("{name}={n}");
            }
            println!("exhausted={}", u8::from(s.exhausted));
            if let Some(p) = s.purity {
                println!("purity={p:.6}");
            }
        }
        Command::Train { files, model, sweep } => {
            let s = pipeline::cmd_train(&files, &cfg, &model, sweep)?;
            for row in &s.sweep {
                println!("{}", row.to_line());
            }
            println!("files={}\nsamples={}", s.files, s.samples);
            println!("perplexity={}\nd_e={}", s.selected.0, s.selected.1);
            println!("training_miou={:.6}", s.training_miou);
        }
        Command::Segment { input, model, out } => {
            let s = pipeline::cmd_segment(&input, &model, &cfg, &out)?;
            println!("superpoints={}", s.superpoints);
            if let Some(r) = s.report {
                print!("{r}");
            }
        }
        Command::Instance { input, mode, out } => {
            let s = pipeline::cmd_instance(&input, &cfg, &mode.source(), &out)?;
            println!("instances={}\nperplexity={}", s.count, s.perplexity_used);
            match s.report {
                Some(r) => print!("{r}"),
                None => log::warn!("{} has no ground-truth instances; SBD skipped", input.display()),
            }
        }
        Command::Eval { pred, gt } => {
            let r = pipeline::cmd_eval(&pred, &gt, &cfg)?;
            if let Some(s) = r.semantic {
                print!("{s}");
            }
            if let Some(i) = r.instance {
                print!("{i}");
            }
        }
        Command::Synth {
            out,
            n_leaves,
            seed,
            leaf_min,
            leaf_max,
            stem_height,
            spacing,
            noise,
            bow,
        } => {
            let d = PlantSpec::default();
            let spec = PlantSpec {
                n_leaves,
                seed,
                leaf_size_range: (leaf_min.unwrap_or(d.leaf_size_range.0), leaf_max.unwrap_or(d.leaf_size_range.1)),
                stem_height: stem_height.unwrap_or(d.stem_height),
                point_spacing: spacing.unwrap_or(d.point_spacing),
                noise_std: noise.unwrap_or(d.noise_std),
                bow: bow.unwrap_or(d.bow),
                ..d
            };
            let cloud = pipeline::cmd_synth(&spec, &out)?;
            println!("points={}", cloud.len());
        }
        Command::Sweep(Sweep::Semantic { files, folds }) => {
            let rows = pipeline::semantic_sweep(
                &files,
                &cfg,
                &pipeline::SWEEP_PERPLEXITIES,
                &pipeline::SWEEP_D_E,
                folds,
            )?;
            for row in rows {
                println!("{}", row.to_line());
            }
        }
        Command::Sweep(Sweep::Instance { input, mode }) => {
            for (p, sbd) in pipeline::instance_sweep(&input, &cfg, &mode.source(), &INSTANCE_PERPLEXITIES)? {
                match sbd {
                    Some(v) => println!("perplexity={p} sbd={v:.6}"),
                    None => println!("perplexity={p} sbd=nan"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.threads {
        std::env::set_var(THREADS_ENV, n.to_string());
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
