//! Command-line front end: `simulate`, `track`, `eval`, `report` and `bench`.
//!
//! Exit codes: 0 on success, 1 when reading or writing files fails or a
//! pipeline cannot run, 2 on usage errors (bad flags, bad settings file).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector2;
use rayon::prelude::*;

use crate::evaluation::{bbox_distribution, TrackRecord};
use crate::geometry::BoundingBox;
use crate::io::{
    load_annotations, load_sequence, load_track_record, save_heat_grid_png, save_report_csv, save_report_json, save_scenario,
    save_track_record, save_trajectory_png, scenario_to_text, write_file, Annotation, EvalReport, IoError, SequenceManifest, Settings,
};
use crate::simulator::{generate_scenario, prepare_scenario, run_prepared, run_suite, ScenarioConfig, SimError, SuiteConfig};
use crate::tracker::Variant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_RUNS: u32 = 5;
const DEFAULT_SCENARIOS: usize = 50;
const PLOT_SIZE: u32 = 512;

#[derive(Debug, Parser)]
#[command(name = "groundtrack", version, about = "Ground-plane particle filter tracking for aerial video")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Runs per object [default: 5].
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario and write it as a sequence directory.
    Simulate,
    /// Track objects of a sequence and write one record file per run.
    Track(TrackArgs),
    /// Score track records against annotations.
    Eval(EvalArgs),
    /// Plot trajectories and the box distribution of a set of records.
    Report(ReportArgs),
    /// Run the variant comparison on generated scenarios.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Sequence manifest; without it a scenario is generated from the settings and seed.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Tracker variant: 3d, 2d or ml.
    #[arg(long)]
    variant: Option<Variant>,
    /// Track only this object (default: every annotated object).
    #[arg(long)]
    object: Option<u32>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Record files, or directories of them.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Annotation CSV.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    annotations: Option<PathBuf>,
    /// Take the annotations from this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Record files, or directories of them.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Take image size and annotations from this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Annotations for the box distribution (default: the record boxes).
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Image width in pixels (default: from the manifest).
    #[arg(long, required_unless_present = "manifest")]
    width: Option<u32>,
    /// Image height in pixels (default: from the manifest).
    #[arg(long, required_unless_present = "manifest")]
    height: Option<u32>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Number of generated scenarios [default: 50].
    #[arg(long)]
    scenarios: Option<usize>,
    /// Variants to compare (default: all).
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Flags and settings file merged; flags win.
struct Context {
    settings: Settings,
    seed: u64,
    runs: u32,
    out: PathBuf,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path).map_err(|e| match e {
            IoError::Io { .. } => CliError::Io(e),
            other => CliError::Usage(other.to_string()),
        })?,
        None => Settings::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(settings.seed).unwrap_or(0),
        runs: cli.runs.or(settings.runs).unwrap_or(DEFAULT_RUNS),
        out: cli.out,
        settings,
    };
    if ctx.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Track(a) => track(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Report(a) => report(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
    }
}

fn scenario_config(ctx: &Context) -> Result<ScenarioConfig, CliError> {
    ctx.settings.scenario_config(ctx.seed).map_err(|e| CliError::Usage(e.to_string()))
}

fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = scenario_config(ctx)?;
    let scenario = generate_scenario(&cfg, ctx.seed)?;
    let prepared = prepare_scenario(&scenario, &ctx.settings.episode)?;
    let manifest = save_scenario(&scenario, &prepared, &ctx.out)?;
    let text = scenario_to_text(&scenario.config);
    write_file(&ctx.out.join("scenario.txt"), |out| out.write_all(text.as_bytes()))?;
    println!("wrote {} ({} frames)", manifest.display(), scenario.n_frames);
    Ok(())
}

fn record_name(variant: Variant, object: u32, run: u32) -> String {
    format!("record_{}_{object}_{run}.csv", variant.name())
}

fn track(ctx: &Context, a: TrackArgs) -> Result<(), CliError> {
    let variant = a.variant.or(ctx.settings.variant).unwrap_or(Variant::Filter3d);
    let object = a.object.or(ctx.settings.object);
    let records: Vec<TrackRecord> = match &a.manifest {
        Some(path) => {
            let seq = load_sequence(path)?;
            let objects = match object {
                Some(o) if seq.object_ids().contains(&o) => vec![o],
                Some(o) => return Err(CliError::Usage(format!("object {o} is not annotated in {}", path.display()))),
                None => seq.object_ids(),
            };
            let jobs: Vec<(u32, u32)> = objects.iter().flat_map(|&o| (0..ctx.runs).map(move |r| (o, r))).collect();
            jobs.par_iter().map(|&(o, r)| seq.track(o, variant, &ctx.settings.episode, ctx.seed, r)).collect::<Result<_, _>>()?
        }
        None => {
            if object.is_some_and(|o| o != 0) {
                return Err(CliError::Usage("a generated scenario has only object 0".into()));
            }
            let scenario = generate_scenario(&scenario_config(ctx)?, ctx.seed)?;
            let prepared = prepare_scenario(&scenario, &ctx.settings.episode)?;
            (0..ctx.runs)
                .into_par_iter()
                .map(|r| run_prepared(&prepared, variant, &ctx.settings.episode, ctx.seed, r as u64, 0).map(|e| e.record))
                .collect::<Result<_, _>>()?
        }
    };
    for r in &records {
        save_track_record(r, &ctx.out.join(record_name(variant, r.object_id, r.run)))?;
    }
    println!("wrote {} records to {}", records.len(), ctx.out.display());
    Ok(())
}

/// Expands directories into their `.csv` files, sorted by name.
fn record_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, IoError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| IoError::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "csv") && f.file_name().is_some_and(|n| n.to_string_lossy().starts_with("record_")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_records(inputs: &[PathBuf]) -> Result<Vec<TrackRecord>, CliError> {
    let paths = record_paths(inputs)?;
    if paths.is_empty() {
        return Err(CliError::Usage("no record files found".into()));
    }
    Ok(paths.iter().map(|p| load_track_record(p)).collect::<Result<_, _>>()?)
}

fn manifest_annotations(path: &Path) -> Result<(SequenceManifest, Option<Vec<Annotation>>), CliError> {
    let m = SequenceManifest::load(path)?;
    let anns = match &m.annotations {
        Some(a) => Some(load_annotations(&m.resolve(a))?),
        None => None,
    };
    Ok((m, anns))
}

fn eval(ctx: &Context, a: EvalArgs) -> Result<(), CliError> {
    let records = load_records(&a.records)?;
    let annotations = match (&a.annotations, &a.manifest) {
        (Some(p), _) => load_annotations(p)?,
        (None, Some(m)) => manifest_annotations(m)?.1.ok_or_else(|| CliError::Usage(format!("{} lists no annotations", m.display())))?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let report = EvalReport::build(&records, &annotations, ctx.settings.episode.precision)?;
    save_report_json(&report, &ctx.out.join("report.json"))?;
    save_report_csv(&report, &ctx.out.join("report.csv"))?;
    println!("{}: f_final {:.4}  std {:.4}  ({} records)", report.summary.sequence_id, report.summary.f_final, report.summary.std, records.len());
    Ok(())
}

fn report(ctx: &Context, a: ReportArgs) -> Result<(), CliError> {
    let records = load_records(&a.records)?;
    let (manifest, manifest_anns) = match &a.manifest {
        Some(m) => {
            let (m, anns) = manifest_annotations(m)?;
            (Some(m), anns)
        }
        None => (None, None),
    };
    let width = a.width.or(manifest.as_ref().map(|m| m.width)).expect("clap requires a size");
    let height = a.height.or(manifest.as_ref().map(|m| m.height)).expect("clap requires a size");
    let annotations = match &a.annotations {
        Some(p) => Some(load_annotations(p)?),
        None => manifest_anns,
    };

    let image_tracks: Vec<Vec<Vector2<f64>>> = records
        .iter()
        .map(|r| r.frames().iter().filter_map(|f| f.bbox).map(|b| { let c = b.center(); Vector2::new(c.x, height as f64 - c.y) }).collect())
        .collect();
    save_trajectory_png(&image_tracks, PLOT_SIZE, &ctx.out.join("trajectories_image.png"))?;
    let ground_tracks: Vec<Vec<Vector2<f64>>> =
        records.iter().map(|r| r.frames().iter().filter_map(|f| f.position).map(|p| Vector2::new(p.x, p.y)).collect()).collect();
    if ground_tracks.iter().any(|t| !t.is_empty()) {
        save_trajectory_png(&ground_tracks, PLOT_SIZE, &ctx.out.join("trajectories_ground.png"))?;
    }

    let n_frames = records.iter().flat_map(|r| r.frames().last()).map(|f| f.frame + 1).max().unwrap_or(0) as usize;
    let mut per_frame: Vec<Vec<BoundingBox>> = vec![Vec::new(); n_frames];
    match &annotations {
        Some(anns) => {
            let n = anns.iter().map(|a| a.frame as usize + 1).max().unwrap_or(0).max(n_frames);
            per_frame.resize(n, Vec::new());
            for a in anns {
                per_frame[a.frame as usize].push(a.bbox);
            }
        }
        None => {
            for r in &records {
                for f in r.frames() {
                    if let Some(b) = f.bbox {
                        per_frame[f.frame as usize].push(b);
                    }
                }
            }
        }
    }
    let grid = bbox_distribution(&per_frame, width, height).map_err(|e| CliError::Usage(e.to_string()))?;
    save_heat_grid_png(&grid, &ctx.out.join("bbox_distribution.png"))?;
    write_file(&ctx.out.join("bbox_distribution.csv"), |out| {
        for row in grid.values.chunks(grid.width as usize) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    })?;
    println!("wrote plots for {} records to {}", records.len(), ctx.out.display());
    Ok(())
}

fn bench(ctx: &Context, a: BenchArgs) -> Result<(), CliError> {
    let scenarios = a.scenarios.or(ctx.settings.scenarios).unwrap_or(DEFAULT_SCENARIOS);
    if scenarios == 0 {
        return Err(CliError::Usage("--scenarios must be at least 1".into()));
    }
    // Settings keys refine the benchmark preset; check them once so the
    // per-scenario builder cannot fail.
    let overrides = ctx.settings.scenario.clone();
    overrides.apply(ScenarioConfig::benchmark(0)).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SuiteConfig {
        scenarios,
        runs: ctx.runs,
        seed: ctx.seed,
        variants: if a.variants.is_empty() { Variant::ALL.to_vec() } else { a.variants },
        episode: ctx.settings.episode.clone(),
        scenario: Arc::new(move |seed| overrides.apply(ScenarioConfig::benchmark(seed)).expect("overrides validated")),
    };
    let result = run_suite(&cfg)?;
    save_report_json(&result, &ctx.out.join("bench.json"))?;
    write_file(&ctx.out.join("bench.csv"), |out| {
        writeln!(out, "variant,f_final,std,scenarios,runs")?;
        for (name, r) in &result.variants {
            writeln!(out, "{name},{},{},{},{}", r.f_final, r.std, result.scenarios, result.runs)?;
        }
        Ok(())
    })?;
    for v in &cfg.variants {
        if let Some(r) = result.report(*v) {
            println!("{:>2}: f_final {:.4}  std {:.4}", v.name(), r.f_final, r.std);
        }
    }
    Ok(())
}
