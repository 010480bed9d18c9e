use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use graspkit::cloud::{load_cloud, write_ply, CloudFormat};
use graspkit::geometry::Vec3;
use graspkit::mechanics::ClosureMode;
use graspkit::planner::{self, PlanStatus, PlannerConfig};
use graspkit::report;
use graspkit::robustness::{GraspContacts, SigmaMode};
use graspkit::synthetic::{corpus_lookup, corpus_standard, generate, ShapeSpec};
use graspkit::PointCloud;

const EXIT_ERROR: u8 = 1;
const EXIT_NO_GRASP: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "graspkit", version, about = "Antipodal two-finger grasp planning on point clouds")]
struct Cli {
    /// Planner config (flat TOML). GRASPKIT_<KEY> variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` config key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Closure mode: soft-pinch or strict. Overrides `closure_mode`.
    #[arg(long, global = true)]
    mode: Option<ClosureMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the best grasp and write a JSON report. Exits 2 when no grasp is found.
    Plan {
        #[arg(long)]
        input: PathBuf,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Preprocess and segment; writes a PLY with a per-point `region` id (-1 = residue).
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Monte Carlo robust force closure of a grasp under contact noise.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Plan report (its `best` grasp) or any JSON with `contact_a` / `contact_b`.
        #[arg(long)]
        grasp: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        /// Overrides the `trials` config key.
        #[arg(long)]
        trials: Option<usize>,
        /// absolute or relative (fraction of the bounding radius).
        #[arg(long)]
        sigma_mode: Option<SigmaMode>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Plan every corpus object and tabulate closure probability per sigma.
    Benchmark {
        #[arg(long, default_value = "standard")]
        corpus: String,
        /// Comma-separated; overrides the `sigmas` config key.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Overrides the `trials` config key.
        #[arg(long)]
        trials: Option<usize>,
        /// Restrict to these corpus names (comma-separated).
        #[arg(long, value_delimiter = ',')]
        objects: Option<Vec<String>>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic object as ASCII PLY with analytic normals.
    Synth {
        /// Corpus name, e.g. box_foam_brick.
        #[arg(long, required_unless_present = "list")]
        shape: Option<String>,
        #[arg(long, required_unless_present = "list")]
        output: Option<PathBuf>,
        /// Points per square metre; the corpus density when omitted.
        #[arg(long)]
        density: Option<f64>,
        /// Uniform per-axis jitter half-width.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// List corpus names and exit.
        #[arg(long)]
        list: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<PlannerConfig> {
    let mut cfg = PlannerConfig::resolve(cli.config.as_deref(), std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.closure_mode = mode;
    }
    Ok(cfg)
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    load_cloud(path, CloudFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn vec3(v: &serde_json::Value, key: &str) -> Result<Vec3> {
    let arr: [f64; 3] = serde_json::from_value(v.get(key).cloned().unwrap_or_default())
        .with_context(|| format!("`{key}` must be an array of 3 numbers"))?;
    Ok(Vec3::from(arr))
}

fn read_grasp(path: &Path) -> Result<GraspContacts> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).context("grasp file is not JSON")?;
    let g = match v.get("best") {
        Some(serde_json::Value::Null) => bail!("plan report has no grasp (status {})", v["status"]),
        Some(best) => best,
        None => &v,
    };
    Ok(GraspContacts {
        contact_a: vec3(g, "contact_a")?,
        contact_b: vec3(g, "contact_b")?,
    })
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Plan { input, output } => {
            let cloud = read_cloud(&input)?;
            let result = planner::plan(&cloud, &cfg)?;
            emit(output.as_deref(), &report::to_json(&result)?)?;
            if result.status != PlanStatus::Ok {
                eprintln!("no grasp: {}", result.status.as_str());
                return Ok(EXIT_NO_GRASP);
            }
        }
        Command::Segment { input, output } => {
            let cloud = read_cloud(&input)?;
            let (processed, seg) = planner::segment_cloud(&cloud, &cfg)?;
            let labels = seg.labels(processed.len());
            let mut f = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            write_ply(&mut f, &processed, Some(&labels))?;
            eprintln!("{} regions, {} residue points", seg.regions.len(), seg.residue.len());
        }
        Command::Eval {
            input,
            grasp,
            sigma,
            trials,
            sigma_mode,
            output,
        } => {
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(m) = sigma_mode {
                cfg.sigma_mode = m;
            }
            let cloud = read_cloud(&input)?;
            let contacts = read_grasp(&grasp)?;
            let result = planner::evaluate(&cloud, contacts, sigma, &cfg)?;
            emit(output.as_deref(), &report::to_json(&result)?)?;
        }
        Command::Benchmark {
            corpus,
            sigmas,
            trials,
            objects,
            output,
        } => {
            if corpus != "standard" {
                bail!("unknown corpus `{corpus}` (available: standard)");
            }
            if let Some(s) = sigmas {
                cfg.sigmas = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let entries = match objects {
                Some(names) => names.iter().map(|n| corpus_lookup(n)).collect::<graspkit::Result<Vec<_>>>()?,
                None => corpus_standard(),
            };
            let rows = planner::run_benchmark(&entries, &cfg)?;
            emit(output.as_deref(), &report::benchmark_csv(&rows, &cfg.sigmas)?)?;
        }
        Command::Synth {
            shape,
            output,
            density,
            jitter,
            list,
        } => {
            if list {
                for e in corpus_standard() {
                    println!("{}\t{}", e.name, e.analog);
                }
                return Ok(0);
            }
            let (Some(shape), Some(output)) = (shape, output) else {
                bail!("--shape and --output are required");
            };
            let entry = corpus_lookup(&shape)?;
            let mut spec: ShapeSpec = entry.spec.clone();
            if let Some(d) = density {
                spec.density = d;
            }
            if jitter > 0.0 {
                spec = spec.with_jitter(jitter, cfg.seed);
            }
            let cloud = generate(&spec)?;
            let mut f = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            write_ply(&mut f, &cloud, None)?;
        }
    }
    Ok(0)
}
