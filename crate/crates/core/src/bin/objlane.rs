//! `objlane` command-line interface.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 for numerical failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use objlane::em_fit::{fit, EmConfig, EmState};
use objlane::error::{Error, Result};
use objlane::geometry::{LaneGraph, RegionOfInterest, Vec2};
use objlane::io::{
    read_graph, read_json, read_scene, write_json, write_text, BundleFile, DescentFile, EvalFile, FitFile,
    GraphJson, LoadedScene, LogitsFile, MatchFile, MatchJson, MembershipFile, SceneFile, FORMAT_VERSION,
};
use objlane::losses::LogitMatrix;
use objlane::matching::{curve_match_cost, match_graphs};
use objlane::membership::true_membership;
use objlane::metrics::evaluate;
use objlane::pipeline::{build_labels, descend_curves, DescentConfig};
use objlane::scenegen::{generate_scene, SceneSpec};

#[derive(Parser)]
#[command(
    name = "objlane",
    version,
    about = "Object-to-centerline clustering on Bezier lane graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene from a spec file.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// True membership of the scene objects.
    Assign {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Matching, target membership and losses for a predicted graph.
    Labels {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        logits: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient descent of the predicted control points.
    Descend {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        logits: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit K centerlines to the object centers with EM.
    EmFit {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
        /// CSV with columns iteration, log_likelihood, delta.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// M-F, Detect and C-F of a predicted graph.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hungarian matching between predicted and true curves.
    Match {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_logits(path: Option<&Path>, cols: usize) -> Result<Option<LogitMatrix>> {
    path.map(|p| read_json::<LogitsFile>(p)?.to_logits(cols))
        .transpose()
}

/// Truth graph and region from a scene or graph file.
fn read_truth(path: &Path) -> Result<(LaneGraph, RegionOfInterest)> {
    let (graph, roi) = read_graph(path)?;
    Ok((graph, roi.unwrap_or_default()))
}

fn trace_csv(state: &EmState) -> String {
    let mut out = String::from("iteration,log_likelihood,delta\n");
    for (i, ll) in state.trace.iter().enumerate() {
        let delta = if i == 0 {
            String::new()
        } else {
            (ll - state.trace[i - 1]).to_string()
        };
        writeln!(out, "{i},{ll},{delta}").expect("writing to a string");
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, seed, out } => {
            let mut spec: SceneSpec = read_json(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let scene = generate_scene(&spec)?;
            write_json(&out, &SceneFile::from_scene(&scene))
        }
        Command::Assign { scene, out } => {
            let s = read_scene(&scene)?;
            let z = true_membership(&s.graph, &s.objects)?;
            write_json(&out, &MembershipFile::new(&z))
        }
        Command::Labels {
            scene,
            pred,
            logits,
            alpha,
            out,
        } => {
            let s = read_scene(&scene)?;
            let (pred, _) = read_graph(&pred)?;
            let logits = read_logits(logits.as_deref(), pred.len() + 1)?;
            let bundle = build_labels(&pred, &s.graph, &s.objects, logits.as_ref(), alpha, &s.roi)?;
            write_json(&out, &BundleFile::new(&bundle))
        }
        Command::Descend {
            scene,
            pred,
            logits,
            alpha,
            lr,
            steps,
            out,
        } => {
            let s = read_scene(&scene)?;
            let (pred, _) = read_graph(&pred)?;
            let logits = read_logits(logits.as_deref(), pred.len() + 1)?;
            let cfg = DescentConfig {
                alpha,
                lr,
                steps,
                ..DescentConfig::default()
            };
            let d = descend_curves(&pred, &s.graph, &s.objects, logits.as_ref(), &cfg, &s.roi)?;
            write_json(
                &out,
                &DescentFile {
                    version: FORMAT_VERSION.into(),
                    graph: GraphJson::from_graph(&d.graph),
                    graph_match: MatchJson::new(&d.graph_match),
                    trace: d.trace,
                },
            )
        }
        Command::EmFit {
            scene,
            k,
            sigma,
            seed,
            max_iters,
            out,
            trace,
        } => {
            let LoadedScene { roi, objects, .. } = read_scene(&scene)?;
            let points: Vec<Vec2> = objects.iter().map(|b| b.bev_center()).collect();
            let cfg = EmConfig {
                outlier_density: 1.0 / roi.area(),
                max_iters,
                ..EmConfig::new(k, sigma).with_seed(seed)
            };
            let state = fit(&points, &cfg)?;
            write_json(&out, &FitFile::new(&state, &cfg, roi))?;
            match trace {
                Some(path) => write_text(&path, &trace_csv(&state)),
                None => Ok(()),
            }
        }
        Command::Eval { pred, gt, out } => {
            let (pred, _) = read_graph(&pred)?;
            let (gt, roi) = read_truth(&gt)?;
            let report = evaluate(&pred, &gt, &roi)?;
            write_json(
                &out,
                &EvalFile {
                    version: FORMAT_VERSION.into(),
                    report,
                },
            )
        }
        Command::Match { pred, gt, out } => {
            let (pred, _) = read_graph(&pred)?;
            let (gt, roi) = read_truth(&gt)?;
            let m = match_graphs(&pred, &gt, &roi)?;
            let cost = curve_match_cost(&pred, &gt, &roi);
            let total_cost = m.pairs().iter().map(|&(e, g)| cost[(e, g)]).sum();
            write_json(
                &out,
                &MatchFile {
                    version: FORMAT_VERSION.into(),
                    graph_match: MatchJson::new(&m),
                    cost: cost.to_rows(),
                    total_cost,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Diverged { trace, .. } = &e {
                eprintln!("objective trace: {trace:?}");
            }
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
