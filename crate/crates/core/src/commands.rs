//! Command-line surface: argument definitions and command implementations.
//! The binary only parses arguments and maps results to exit codes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::entity::{Frame, TrackId, Tracklet};
use crate::geometry::BoundingBox;
use crate::io::config::{apply_config, write_config, ConfigError, RunConfig};
use crate::io::mot::{parse_mot, write_detections, write_tracklets, ParseError};
use crate::io::write_atomic;
use crate::long_cues::{ConstantAppearance, PassThroughQuality};
use crate::metrics::{evaluate, MetricsError};
use crate::postproc::{attach_embeddings, postprocess};
use crate::sac::{parse_model, write_model, PairClassifier, SacError, ShortTermAffinity};
use crate::sim::{generate_scenario, Scenario, SimError};
use crate::workflow::{preprocess_detections, track_detections, train_on_scenarios, Oracles, WorkflowError};

/// Exit code for invalid or unreadable input data.
pub const EXIT_DATA: i32 = 2;
/// Exit code for command-line usage errors.
pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "sactrack", version, about = "Switcher-aware multi-object tracker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Kv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections online and write tracklet boxes.
    Track {
        /// Detection file (`id = -1` rows).
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// `key = value` run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained classifier; defaults to the short-term affinity baseline.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Scenario file supplying appearance and quality oracles.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Apply strict NMS to detections first.
        #[arg(long)]
        nms: bool,
    },
    /// Offline split/merge clustering and interpolation of tracklets.
    Postprocess {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario file supplying appearance embeddings.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Train the association classifier on simulated sequences.
    TrainSac {
        /// Scenario files to train on (repeatable).
        #[arg(long)]
        scenario: Vec<PathBuf>,
        /// Additionally generate this many scenarios from the configuration,
        /// with seeds `scenario.seed`, `scenario.seed + 1`, ...
        #[arg(long, default_value_t = 0)]
        seeds: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate tracks against ground truth.
    Eval {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = crate::metrics::DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Generate a scenario: `scenario.cfg`, `gt.txt`, `det.txt`.
    Simulate {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write one SVG overlay per frame.
    Render {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Ground truth drawn dashed underneath.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Scenario file supplying the frame size.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: SacError },
    #[error(transparent)]
    Scenario(#[from] SimError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Invalid(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        EXIT_DATA
    }
}

fn read(path: &Path) -> Result<String, CommandError> {
    std::fs::read_to_string(path).map_err(|source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CommandError> {
    write_atomic(path, text.as_bytes()).map_err(|source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_run_config(path: Option<&Path>) -> Result<RunConfig, CommandError> {
    load_run_config_over(RunConfig::default(), path)
}

fn load_run_config_over(base: RunConfig, path: Option<&Path>) -> Result<RunConfig, CommandError> {
    match path {
        None => Ok(base),
        Some(p) => apply_config(base, &read(p)?).map_err(|source| CommandError::Config {
            path: p.to_path_buf(),
            source,
        }),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CommandError> {
    let cfg = load_run_config(Some(path))?;
    Ok(generate_scenario(&cfg.scenario)?)
}

fn load_mot(path: &Path) -> Result<crate::io::mot::MotRecords, CommandError> {
    parse_mot(&read(path)?).map_err(|source| CommandError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn load_tracklets(path: &Path) -> Result<Vec<Tracklet>, CommandError> {
    let r = load_mot(path)?;
    if !r.detections.is_empty() {
        return Err(CommandError::Invalid(format!(
            "{}: expected tracklet rows, found detections (id = -1)",
            path.display()
        )));
    }
    Ok(r.tracklets)
}

/// Execute a command; returns text for standard output.
pub fn run(cli: Cli) -> Result<String, CommandError> {
    match cli.command {
        Command::Track {
            detections,
            output,
            config,
            model,
            scenario,
            nms,
        } => {
            let cfg = load_run_config(config.as_deref())?;
            cfg.tracker
                .validate()
                .map_err(|e| CommandError::Invalid(e.to_string()))?;
            let records = load_mot(&detections)?;
            let dets = preprocess_detections(
                &records.detections_by_frame(),
                (nms || cfg.preprocess.nms).then_some(cfg.preprocess.nms_iou),
            );
            let classifier: Box<dyn PairClassifier> = match &model {
                Some(p) => Box::new(parse_model(&read(p)?).map_err(|source| CommandError::Model {
                    path: p.clone(),
                    source,
                })?),
                None => Box::new(ShortTermAffinity),
            };
            let scen = scenario.as_deref().map(load_scenario).transpose()?;
            let fallback = ConstantAppearance::new(1);
            let oracles = match &scen {
                Some(s) => Oracles::from_scenario(s),
                None => Oracles {
                    appearance: &fallback,
                    quality: &PassThroughQuality,
                },
            };
            let run = track_detections(&dets, None, oracles, classifier.as_ref(), &cfg.tracker)?;
            write(&output, &write_tracklets(&run.output))?;
            Ok(format!(
                "tracked {} frames: {} tracklets, {} boxes\n",
                dets.len(),
                run.output.len(),
                run.output.iter().map(Tracklet::len).sum::<usize>()
            ))
        }
        Command::Postprocess {
            tracks,
            output,
            config,
            scenario,
        } => {
            let cfg = load_run_config(config.as_deref())?;
            let mut input = load_tracklets(&tracks)?;
            match scenario.as_deref().map(load_scenario).transpose()? {
                Some(s) => attach_embeddings(&mut input, &s),
                None => attach_embeddings(&mut input, &ConstantAppearance::new(1)),
            }
            let (out, converged) = postprocess(&input, &cfg.cluster);
            write(&output, &write_tracklets(&out))?;
            let mut msg = format!("{} tracklets in, {} out\n", input.len(), out.len());
            if !converged {
                msg.push_str("warning: clustering did not reach a fixed point\n");
            }
            Ok(msg)
        }
        Command::TrainSac {
            scenario,
            seeds,
            config,
            output,
        } => {
            let cfg = load_run_config(config.as_deref())?;
            cfg.tracker
                .validate()
                .map_err(|e| CommandError::Invalid(e.to_string()))?;
            let mut scenarios = Vec::new();
            for p in &scenario {
                scenarios.push(load_scenario(p)?);
            }
            for i in 0..seeds {
                let mut sc = cfg.scenario;
                sc.seed = sc.seed.wrapping_add(i);
                scenarios.push(generate_scenario(&sc)?);
            }
            if scenarios.is_empty() {
                return Err(CommandError::Invalid(
                    "no training sequences: pass --scenario or --seeds".into(),
                ));
            }
            let model = train_on_scenarios(&scenarios, &cfg.tracker, &cfg.training_set_config(), &cfg.train)?;
            write(&output, &write_model(&model))?;
            Ok(format!(
                "trained {} trees on {} sequences\n",
                model.trees.len(),
                scenarios.len()
            ))
        }
        Command::Eval {
            tracks,
            gt,
            iou,
            format,
        } => {
            if !(iou > 0.0 && iou <= 1.0) {
                return Err(CommandError::Invalid(format!("--iou {iou} must be in (0, 1]")));
            }
            let pred = load_tracklets(&tracks)?;
            let gt = load_tracklets(&gt)?;
            let report = evaluate(&gt, &pred, iou)?;
            Ok(match format {
                ReportFormat::Table => report.to_table(),
                ReportFormat::Kv => report.to_key_value(),
            })
        }
        Command::Simulate {
            output_dir,
            config,
            seed,
        } => {
            let mut cfg = load_run_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.scenario.seed = s;
            }
            let s = generate_scenario(&cfg.scenario)?;
            std::fs::create_dir_all(&output_dir).map_err(|source| CommandError::Io {
                path: output_dir.clone(),
                source,
            })?;
            write(&output_dir.join("scenario.cfg"), &write_config(&cfg, "scenario."))?;
            write(&output_dir.join("gt.txt"), &write_tracklets(&s.gt))?;
            let dets: Vec<_> = s.detections.values().flatten().copied().collect();
            write(&output_dir.join("det.txt"), &write_detections(&dets))?;
            Ok(format!(
                "wrote {} frames, {} targets, {} detections to {}\n",
                s.config.n_frames,
                s.gt.len(),
                dets.len(),
                output_dir.display()
            ))
        }
        Command::Render {
            tracks,
            output_dir,
            gt,
            scenario,
        } => {
            let pred = load_tracklets(&tracks)?;
            let gt = gt.as_deref().map(load_tracklets).transpose()?.unwrap_or_default();
            let size = match scenario.as_deref() {
                Some(p) => {
                    let c = load_run_config(Some(p))?.scenario;
                    (c.width, c.height)
                }
                None => extent(pred.iter().chain(&gt)),
            };
            std::fs::create_dir_all(&output_dir).map_err(|source| CommandError::Io {
                path: output_dir.clone(),
                source,
            })?;
            let frames = render_frames(&pred, &gt, size);
            for (f, svg) in &frames {
                write(&output_dir.join(format!("frame_{f:06}.svg")), svg)?;
            }
            Ok(format!(
                "rendered {} frames to {}\n",
                frames.len(),
                output_dir.display()
            ))
        }
    }
}

fn extent<'a>(tracks: impl Iterator<Item = &'a Tracklet>) -> (f64, f64) {
    tracks
        .flat_map(|t| t.positions.values())
        .fold((1.0, 1.0), |(w, h), b| (w.max(b.right()), h.max(b.bottom())))
}

fn color(id: TrackId) -> String {
    // golden-angle hue spacing keeps neighbouring ids distinguishable
    let hue = (id as f64 * 137.508) % 360.0;
    format!("hsl({hue:.0},70%,45%)")
}

fn svg_rect(out: &mut String, b: &BoundingBox, stroke: &str, dashed: bool) {
    let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"{dash}/>",
        b.x, b.y, b.w, b.h
    );
}

type FrameBoxes = Vec<(TrackId, BoundingBox)>;

/// One SVG document per frame containing any box.
pub fn render_frames(pred: &[Tracklet], gt: &[Tracklet], size: (f64, f64)) -> BTreeMap<Frame, String> {
    let mut frames: BTreeMap<Frame, (FrameBoxes, FrameBoxes)> = BTreeMap::new();
    for t in pred {
        for (f, b) in &t.positions {
            frames.entry(*f).or_default().0.push((t.id, *b));
        }
    }
    for t in gt {
        for (f, b) in &t.positions {
            frames.entry(*f).or_default().1.push((t.id, *b));
        }
    }
    frames
        .into_iter()
        .map(|(f, (p, g))| {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.2} {:.2}\">",
                size.0, size.1, size.0, size.1
            );
            let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"#f4f4f4\"/>");
            let _ = writeln!(s, "<text x=\"8\" y=\"20\" font-size=\"16\">frame {f}</text>");
            for (_, b) in &g {
                svg_rect(&mut s, b, "#888888", true);
            }
            for (id, b) in &p {
                let c = color(*id);
                svg_rect(&mut s, b, &c, false);
                let _ = writeln!(
                    s,
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" fill=\"{c}\">{id}</text>",
                    b.x + 2.0,
                    b.y + 14.0
                );
            }
            s.push_str("</svg>\n");
            (f, s)
        })
        .collect()
}
