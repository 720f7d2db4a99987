//! `objnav` command-line interface.

use std::collections::{HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bc::{self, PolicyParams, TrainConfig};
use crate::desc::{self, OfflineGenerator, RemoteGenerator, TextGenerator};
use crate::episode::{self, Episode, SampleConfig};
use crate::eval::{self, AgentFactory, EvalConfig, EvalReport};
use crate::housegen::{generate_house, GenerationSpec};
use crate::render::{self, Overlays, RenderFormat, RenderSpec};
use crate::scene::{House, HouseError};
use crate::sim::SimConfig;
use crate::trace::{self, TraceOptions, TraceStep};
use crate::util::{derive_seed, read_jsonl, write_jsonl, JsonlError};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "objnav", version, about = "Grid-world object navigation pipeline")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "OBJNAV_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed; when omitted one is chosen and reported on stderr.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct HouseArgs {
    /// House JSON file (repeatable).
    #[arg(long = "house")]
    pub houses: Vec<PathBuf>,
    /// Directory of house JSON files.
    #[arg(long)]
    pub houses_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate procedural houses.
    GenHouse {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Generation spec JSON; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        scene_type: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample episodes with shortest-path demonstrations.
    GenEpisodes {
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        houses: HouseArgs,
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Split label stored on every episode.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile instruction/response traces from episodes.
    BuildTraces {
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        houses: HouseArgs,
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long)]
        gold_label: bool,
        #[arg(long)]
        diff_eq: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downsample MoveAhead steps and drop conflicting states.
    Postprocess {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        keep_rate: f64,
        #[arg(long)]
        out: PathBuf,
        /// Histogram report path (also printed to stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate and filter house descriptions.
    GenDescriptions {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Use the HTTP client configured by OBJNAV_TEXTGEN_* variables.
        #[arg(long)]
        remote: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the behavior-cloning policy.
    TrainBc {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        episodes: PathBuf,
        /// Only train on steps present in this trace file.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Fraction of episodes to train on.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Evaluate an agent on episodes.
    Eval {
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        houses: HouseArgs,
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long, value_enum)]
        agent: AgentKind,
        /// Policy parameters for `--agent policy`.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Program (and arguments) for `--agent external`.
        #[arg(long, num_args = 1.., allow_hyphen_values = true)]
        command: Vec<String>,
        #[arg(long, default_value_t = 5000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = crate::sim::MAX_STEPS)]
        max_steps: u32,
        /// Success by distance only.
        #[arg(long)]
        distance_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        houses: HouseArgs,
        #[arg(long)]
        episodes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a house with an episode's paths.
    Render {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        house: PathBuf,
        #[arg(long)]
        episodes: Option<PathBuf>,
        #[arg(long)]
        episode_id: Option<String>,
        /// Evaluation report providing the agent path.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ascii")]
        format: RenderFormat,
        #[arg(long)]
        no_demo: bool,
        #[arg(long)]
        no_agent: bool,
        #[arg(long)]
        no_target: bool,
        #[arg(long)]
        no_start: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AgentKind {
    Random,
    Oracle,
    Greedy,
    Policy,
    External,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage", message: msg.into() }
    }
    fn schema(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_SCHEMA, kind: "schema", message: msg.into() }
    }
    fn runtime(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, kind: "runtime", message: msg.into() }
    }
    fn io(path: &Path, e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::NotFound {
            CliError {
                code: EXIT_MISSING_INPUT,
                kind: "missing_input",
                message: format!("{}: {e}", path.display()),
            }
        } else {
            CliError::runtime(format!("{}: {e}", path.display()))
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn emit_error(err: &CliError) {
    let v = serde_json::json!({"error": err.kind, "code": err.code, "message": err.message});
    let _ = writeln!(io::stderr(), "{v}");
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            emit_error(&CliError::usage(e.to_string().trim_end()));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            emit_error(&e);
            e.code
        }
    }
}

fn resolve_seed(arg: &SeedArg) -> u64 {
    arg.seed.unwrap_or_else(|| {
        let s = rand::random::<u32>() as u64;
        let _ = writeln!(io::stderr(), "{}", serde_json::json!({ "auto_seed": s }));
        s
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, items).map_err(|e| CliError::runtime(e.to_string()))?;
    write_text(path, std::str::from_utf8(&buf).expect("json is utf-8"))
}

fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_jsonl(BufReader::new(f)).map_err(|e| match e {
        JsonlError::Io(e) => CliError::io(path, e),
        JsonlError::Parse { .. } => CliError::schema(format!("{}: {e}", path.display())),
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::schema(format!("{}: {e}", path.display())))
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::runtime(e.to_string())),
    }
}

fn load_one_house(path: &Path) -> CliResult<House> {
    let text = read_text(path)?;
    House::from_json_str(&text).map_err(|e| match e {
        HouseError::Io { source, .. } => CliError::io(path, source),
        other => CliError::schema(format!("{}: {other}", path.display())),
    })
}

/// Houses in a stable order: explicit files first, then the directory sorted
/// by file name.
fn load_houses(args: &HouseArgs) -> CliResult<Vec<House>> {
    let mut paths = args.houses.clone();
    if let Some(dir) = &args.houses_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        found.sort();
        paths.extend(found);
    }
    if paths.is_empty() {
        return Err(CliError::usage("no houses given (use --house or --houses-dir)"));
    }
    paths.iter().map(|p| load_one_house(p)).collect()
}

fn house_map(houses: Vec<House>) -> HashMap<String, House> {
    houses.into_iter().map(|h| (h.id().to_string(), h)).collect()
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let jobs = cli.jobs;
    match cli.command {
        Command::GenHouse { seed, count, spec, scene_type, out_dir } => {
            let seed = resolve_seed(&seed);
            let mut spec: GenerationSpec = match spec {
                Some(p) => read_json(&p)?,
                None => GenerationSpec::default(),
            };
            if scene_type.is_some() {
                spec.scene_type = scene_type;
            }
            let pool = thread_pool(jobs)?;
            let houses: Vec<_> = pool.install(|| {
                use rayon::prelude::*;
                (0..count as u64)
                    .into_par_iter()
                    .map(|i| generate_house(seed + i, &spec))
                    .collect()
            });
            let mut ids = Vec::new();
            for h in houses {
                let h = h.map_err(|e| CliError::runtime(e.to_string()))?;
                write_text(&out_dir.join(format!("{}.json", h.id())), &h.to_json_string())?;
                ids.push(h.id().to_string());
            }
            output(None, &to_pretty(&serde_json::json!({ "houses": ids })))
        }
        Command::GenEpisodes { seed, houses, n, split, out } => {
            let seed = resolve_seed(&seed);
            let houses = load_houses(&houses)?;
            let config = SampleConfig::default();
            let pool = thread_pool(jobs)?;
            let reports: Vec<_> = pool.install(|| {
                use rayon::prelude::*;
                houses
                    .par_iter()
                    .map(|h| episode::sample_episodes(h, n, seed, &config))
                    .collect()
            });
            let mut all: Vec<Episode> = Vec::new();
            let (mut skipped, mut unfilled) = (0usize, 0usize);
            for r in reports {
                let r = r.map_err(|e| CliError::runtime(e.to_string()))?;
                skipped += r.skipped.len();
                unfilled += r.unfilled.len();
                all.extend(r.episodes);
            }
            for ep in &mut all {
                ep.split = split.clone();
            }
            write_jsonl_file(&out, &all)?;
            output(
                None,
                &to_pretty(&serde_json::json!({
                    "episodes": all.len(),
                    "skipped_samples": skipped,
                    "unfilled_slots": unfilled,
                })),
            )
        }
        Command::BuildTraces { seed: _, houses, episodes, gold_label, diff_eq, out } => {
            let houses = house_map(load_houses(&houses)?);
            let episodes: Vec<Episode> = read_jsonl_file(&episodes)?;
            let opts = TraceOptions { gold_label, diff_eq };
            let pool = thread_pool(jobs)?;
            let compiled: Vec<CliResult<Vec<TraceStep>>> = pool.install(|| {
                use rayon::prelude::*;
                episodes
                    .par_iter()
                    .map(|ep| {
                        let h = houses
                            .get(&ep.house_id)
                            .ok_or_else(|| CliError::schema(format!("episode {} refers to unknown house {}", ep.id, ep.house_id)))?;
                        trace::compile_episode(h, ep, &opts).map_err(|e| CliError::runtime(e.to_string()))
                    })
                    .collect()
            });
            let mut steps = Vec::new();
            for c in compiled {
                steps.extend(c?);
            }
            write_jsonl_file(&out, &steps)?;
            let counts = trace::ActionCounts::from_steps(&steps);
            output(None, &to_pretty(&serde_json::json!({ "steps": steps.len(), "actions": counts })))
        }
        Command::Postprocess { seed, traces, keep_rate, out, report } => {
            let seed = resolve_seed(&seed);
            let steps: Vec<TraceStep> = read_jsonl_file(&traces)?;
            let (kept, rep) = trace::postprocess(steps, keep_rate, seed).map_err(|e| CliError::usage(e.to_string()))?;
            write_jsonl_file(&out, &kept)?;
            let doc = to_pretty(&serde_json::json!({ "summary": rep, "histogram": rep.histogram() }));
            if let Some(p) = report {
                write_text(&p, &doc)?;
            }
            output(None, &doc)
        }
        Command::GenDescriptions { seed, n, remote, out } => {
            let seed = resolve_seed(&seed);
            let generator: Box<dyn TextGenerator> = if remote {
                Box::new(RemoteGenerator::from_env().map_err(|e| CliError::usage(e.to_string()))?)
            } else {
                Box::new(OfflineGenerator)
            };
            let pool = thread_pool(jobs)?;
            let (records, counts) = pool.install(|| desc::run_pipeline(generator.as_ref(), n, seed));
            write_jsonl_file(&out, &records)?;
            output(None, &to_pretty(&counts))
        }
        Command::TrainBc {
            seed,
            episodes,
            traces,
            fraction,
            learning_rate,
            batch_size,
            epochs,
            l2,
            out,
            loss_csv,
        } => {
            let seed = resolve_seed(&seed);
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(CliError::usage(format!("--fraction must be in (0, 1], got {fraction}")));
            }
            let mut eps: Vec<Episode> = read_jsonl_file(&episodes)?;
            if fraction < 1.0 {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, "fraction"));
                eps.shuffle(&mut rng);
                eps.truncate(((eps.len() as f64 * fraction).ceil() as usize).max(1));
            }
            let selection: Option<HashSet<(String, usize)>> = match traces {
                Some(p) => {
                    let steps: Vec<TraceStep> = read_jsonl_file(&p)?;
                    Some(steps.into_iter().map(|s| (s.episode_id, s.step_index)).collect())
                }
                None => None,
            };
            let samples = bc::samples_from_episodes(&eps, selection.as_ref());
            let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
            if let Some(v) = learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            if let Some(v) = l2 {
                cfg.l2_penalty = v;
            }
            let outcome = bc::train(&samples, &cfg).map_err(|e| match e {
                bc::BcError::BadLearningRate(_) | bc::BcError::BadBatchSize | bc::BcError::EmptyBatch => {
                    CliError::usage(e.to_string())
                }
                other => CliError::runtime(other.to_string()),
            })?;
            write_text(&out, &outcome.params.to_json())?;
            if let Some(p) = loss_csv {
                write_text(&p, &outcome.loss_csv())?;
            }
            output(
                None,
                &to_pretty(&serde_json::json!({
                    "samples": samples.len(),
                    "final_loss": outcome.loss_curve.last(),
                    "train_accuracy": bc::accuracy(&outcome.params, &samples),
                })),
            )
        }
        Command::Eval {
            seed,
            houses,
            episodes,
            agent,
            params,
            command,
            timeout_ms,
            max_steps,
            distance_only,
            out,
            csv,
        } => {
            let factory: Box<dyn AgentFactory> = match agent {
                AgentKind::Random => Box::new(eval::RandomFactory { seed: resolve_seed(&seed) }),
                AgentKind::Oracle => Box::new(eval::OracleFactory),
                AgentKind::Greedy => Box::new(eval::GreedyFactory),
                AgentKind::Policy => {
                    let p = params.ok_or_else(|| CliError::usage("--agent policy needs --params"))?;
                    let text = read_text(&p)?;
                    let params = PolicyParams::from_json(&text).map_err(|e| CliError::schema(format!("{}: {e}", p.display())))?;
                    Box::new(eval::PolicyFactory { params })
                }
                AgentKind::External => {
                    let (program, args) = command
                        .split_first()
                        .ok_or_else(|| CliError::usage("--agent external needs --command"))?;
                    Box::new(eval::ExternalFactory {
                        program: program.clone(),
                        args: args.to_vec(),
                        timeout: Duration::from_millis(timeout_ms),
                    })
                }
            };
            let houses = house_map(load_houses(&houses)?);
            let episodes: Vec<Episode> = read_jsonl_file(&episodes)?;
            let config = EvalConfig {
                sim: SimConfig {
                    max_steps,
                    require_visibility: !distance_only,
                    ..SimConfig::default()
                },
                jobs: jobs.unwrap_or(0),
            };
            let report: EvalReport = eval::evaluate(factory.as_ref(), &houses, &episodes, &config);
            if let Some(p) = csv {
                write_text(&p, &report.to_csv())?;
            }
            output(out.as_deref(), &to_pretty(&report))?;
            if out.is_some() {
                output(None, &to_pretty(&serde_json::json!({ "overall": report.overall, "splits": report.splits })))?;
            }
            Ok(())
        }
        Command::Stats { seed: _, houses, episodes, out } => {
            let houses = load_houses(&houses)?;
            let eps: Vec<Episode> = match episodes {
                Some(p) => read_jsonl_file(&p)?,
                None => Vec::new(),
            };
            output(out.as_deref(), &to_pretty(&episode::corpus_stats(&houses, &eps)))
        }
        Command::Render {
            seed: _,
            house,
            episodes,
            episode_id,
            report,
            format,
            no_demo,
            no_agent,
            no_target,
            no_start,
            out,
        } => {
            let h = load_one_house(&house)?;
            let mut scene = render::Scene::default();
            if let Some(p) = episodes {
                let eps: Vec<Episode> = read_jsonl_file(&p)?;
                let ep = match &episode_id {
                    Some(id) => eps.iter().find(|e| &e.id == id),
                    None => eps.iter().find(|e| e.house_id == h.id()),
                }
                .ok_or_else(|| CliError::usage("no matching episode for this house"))?;
                scene.start = Some(ep.initial_pose.cell);
                scene.target = h.object(&ep.target_object_id).map(|o| h.object_cell(o));
                scene.demonstration = Some(ep.path.cells.clone());
                if let Some(rp) = report {
                    let rep: EvalReport = read_json(&rp)?;
                    if let Some(o) = rep.episodes.iter().find(|o| o.episode_id == ep.id) {
                        scene.agent_paths.push(o.trajectory.cells());
                    }
                }
            }
            let spec = RenderSpec {
                format,
                overlays: Overlays {
                    demonstration: !no_demo,
                    agent_path: !no_agent,
                    target: !no_target,
                    start: !no_start,
                },
            };
            let doc = render::render(&h, &scene, &spec).map_err(|e| match e {
                render::RenderError::NoOverlay => CliError::usage(e.to_string()),
                other => CliError::schema(other.to_string()),
            })?;
            output(out.as_deref(), &doc)
        }
    }
}
