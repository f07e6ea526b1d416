use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scanclass::synth::RenderStyle;
use scanclass::{FeatureMode, ModelKind, Orientation};
use scanclass_cli::commands::{self, PipelineInputs, SplitSpec};
use scanclass_cli::{server, CliError, PipelineConfig};

/// Scanned-document OCR and abstract classification.
///
/// Exit codes: 0 ok, 2 missing file or I/O error (also clap usage errors),
/// 3 unlabeled blobs, 4 unreadable image, 5 malformed file, 6 grid or blob
/// geometry error, 7 OCR model error, 8 text classification or comparison
/// error, 9 bad configuration, argument or port.
#[derive(Parser)]
#[command(name = "scanclass", version)]
struct Cli {
    /// JSON config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Smallest blob kept, in pixels.
    #[arg(long, global = true)]
    min_area: Option<u32>,
    /// Training sheet letters, in band order.
    #[arg(long, global = true)]
    alphabet: Option<String>,
    /// Samples per letter on the training sheet.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    orientation: Option<OrientationArg>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Gap, as a fraction of the median blob width, that becomes a space.
    #[arg(long, global = true)]
    space_factor: Option<f64>,
    /// full_bag, significant_k or significant_k(N).
    #[arg(long, global = true, value_parser = parse_feature_mode)]
    feature_mode: Option<FeatureMode>,
    #[arg(long, global = true)]
    stopwords: Option<bool>,
    #[arg(long, global = true)]
    port: Option<u16>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Columns,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Logreg,
    Centroid,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Logreg => ModelKind::Logreg,
            KindArg::Centroid => ModelKind::Centroid,
        }
    }
}

fn parse_feature_mode(s: &str) -> Result<FeatureMode, String> {
    s.parse().map_err(|e: scanclass::Error| e.to_string())
}

fn parse_source(s: &str) -> Result<(String, PathBuf), String> {
    let (class, path) = s.split_once('=').ok_or("expected CLASS=PATH")?;
    if class.is_empty() {
        return Err("class name is empty".into());
    }
    Ok((class.to_string(), PathBuf::from(path)))
}

#[derive(Subcommand)]
enum Command {
    /// Find blobs on a page and write `<image stem>.json` beside it.
    Segment {
        image: PathBuf,
        /// Label blobs from the training-sheet grid.
        #[arg(long)]
        grid: bool,
        /// Manifest path instead of the default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the three-line-per-blob training file of a reviewed manifest.
    ExportFeatures {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Page image; defaults to the one named in the manifest.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Train a character model from a training file.
    TrainOcr {
        training: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "logreg")]
        kind: KindArg,
    },
    /// Read a page with a trained model.
    Recognize {
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Character and word match of OCR text against the original.
    Compare {
        original: PathBuf,
        ocr: PathBuf,
        /// Report file; without it the report is printed as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect labeled documents into a corpus file.
    IngestCorpus {
        /// CLASS=PATH, a SMART file or a directory of text files.
        #[arg(long = "class", value_parser = parse_source)]
        sources: Vec<(String, PathBuf)>,
        /// Directory with one subdirectory per class.
        #[arg(long = "dir")]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the naive Bayes classifier on a corpus file.
    TrainNb {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify text files; prints one JSON object per file.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score a classifier on a labeled corpus.
    ///
    /// With --model the whole corpus is the test set. With --split the
    /// corpus is shuffled and split, and significant-words and full-bag
    /// models are trained and compared.
    EvalNb {
        corpus: PathBuf,
        #[arg(long, required_unless_present = "split", conflicts_with = "split")]
        model: Option<PathBuf>,
        #[arg(long)]
        split: bool,
        #[arg(long, default_value_t = 2200)]
        n_train: usize,
        #[arg(long, default_value_t = 295)]
        n_test: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Significant words per document.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// segment, export-features, train-ocr, recognize and compare in one run.
    Pipeline {
        #[arg(long)]
        train_image: PathBuf,
        /// Reviewed manifest for the training image.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        test_image: PathBuf,
        /// Ground-truth text of the test page.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "logreg")]
        kind: KindArg,
    },
    /// Render a synthetic training sheet, test page and ground truth.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: u32,
        #[arg(long, default_value_t = 0)]
        jitter: u32,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Text file for the test page; uppercase letters and spaces.
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        wrap: usize,
    },
    /// Serve pages and manifests to the review UI on 127.0.0.1.
    Serve {
        /// Static UI files served at /.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn build_config(path: Option<&Path>, o: Overrides) -> Result<PipelineConfig, CliError> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.workspace {
        cfg.workspace_dir = v;
    }
    if let Some(v) = o.min_area {
        cfg.min_area = v;
    }
    if let Some(v) = o.alphabet {
        cfg.grid.n_letters = v.chars().count();
        cfg.grid.alphabet = v;
    }
    if let Some(v) = o.samples {
        cfg.grid.n_samples = v;
    }
    if let Some(v) = o.orientation {
        cfg.grid.orientation = match v {
            OrientationArg::Columns => Orientation::LettersAlongColumns,
            OrientationArg::Rows => Orientation::LettersAlongRows,
        };
    }
    if let Some(v) = o.learning_rate {
        cfg.hyperparams.learning_rate = v;
    }
    if let Some(v) = o.iterations {
        cfg.hyperparams.iterations = v;
    }
    if let Some(v) = o.lambda {
        cfg.hyperparams.l2_lambda = v;
    }
    if let Some(v) = o.space_factor {
        cfg.space_factor = v;
    }
    if let Some(v) = o.feature_mode {
        cfg.feature_mode = v;
    }
    if let Some(v) = o.stopwords {
        cfg.stopwords_enabled = v;
    }
    if let Some(v) = o.port {
        cfg.serve_port = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output serializes")
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(cli.config.as_deref(), cli.overrides)?;
    match cli.command {
        Command::Segment { image, grid, out } => {
            let s = commands::cmd_segment(&image, &cfg, grid, out.as_deref())?;
            warn_all(&s.warnings);
            println!("{s}");
        }
        Command::ExportFeatures { manifest, out, image } => {
            let s = commands::cmd_export_features(&manifest, image.as_deref(), &out, &cfg)?;
            warn_all(&s.warnings);
            println!("{s}");
        }
        Command::TrainOcr { training, out, kind } => {
            let s = commands::cmd_train_ocr(&training, &out, kind.into(), &cfg)?;
            warn_all(&s.warnings);
            println!("{s}");
        }
        Command::Recognize { image, model, out } => {
            let s = commands::cmd_recognize(&image, &model, &out, &cfg)?;
            warn_all(&s.warnings);
            println!("{s}");
        }
        Command::Compare { original, ocr, out } => {
            let r = commands::cmd_compare(&original, &ocr, out.as_deref())?;
            if out.is_some() {
                println!("{}", commands::compare_summary(&r));
            } else {
                eprintln!("{}", commands::compare_summary(&r));
                println!("{}", json_line(&r));
            }
        }
        Command::IngestCorpus { sources, dirs, out } => {
            if sources.is_empty() && dirs.is_empty() {
                return Err(CliError::Config("give at least one --class or --dir".into()));
            }
            println!("{}", commands::cmd_ingest_corpus(&sources, &dirs, &out)?);
        }
        Command::TrainNb { corpus, out } => {
            println!("{}", commands::cmd_train_nb(&corpus, &out, &cfg)?);
        }
        Command::Classify { model, inputs } => {
            for c in commands::cmd_classify(&model, &inputs)? {
                println!("{}", json_line(&c));
            }
        }
        Command::EvalNb {
            corpus,
            model,
            n_train,
            n_test,
            seed,
            k,
            out,
            ..
        } => match model {
            Some(model) => {
                let e = commands::cmd_eval_nb(&model, &corpus, out.as_deref())?;
                println!("{}", commands::eval_summary(&e));
            }
            None => {
                let split = SplitSpec {
                    n_train,
                    n_test,
                    seed,
                    k,
                };
                let r = commands::cmd_replicate_nb(&corpus, split, &cfg, out.as_deref())?;
                if let Some(w) = &r.regression_warning {
                    eprintln!("warning: {w}");
                }
                println!("{r}");
            }
        },
        Command::Pipeline {
            train_image,
            manifest,
            test_image,
            truth,
            out_dir,
            kind,
        } => {
            let inputs = PipelineInputs {
                train_image: &train_image,
                train_manifest: manifest.as_deref(),
                test_image: &test_image,
                truth: &truth,
                out_dir: &out_dir,
                kind: kind.into(),
            };
            let s = commands::cmd_pipeline(&inputs, &cfg)?;
            warn_all(&s.warnings);
            println!("{s}");
        }
        Command::Synth {
            out_dir,
            scale,
            jitter,
            noise,
            seed,
            text,
            wrap,
        } => {
            let style = RenderStyle {
                scale,
                jitter,
                noise,
                seed,
            };
            let text = text.as_deref().map(commands::read_text).transpose()?;
            println!("{}", commands::cmd_synth(&out_dir, &style, text.as_deref(), wrap, &cfg)?);
        }
        Command::Serve { ui_dir } => {
            let mut cfg = cfg;
            if ui_dir.is_some() {
                cfg.ui_dir = ui_dir;
            }
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::Server(e.to_string()))?;
            rt.block_on(server::serve(&cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
