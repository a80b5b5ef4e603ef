//! `gscrowd`: generate assets, render crowds, and run the benchmark tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gscrowd::avatar::{generate_synthetic_motion, generate_synthetic_template};
use gscrowd::bench::{memory_grid, run_benchmark, BenchMatrix, BenchOptions, BenchScene};
use gscrowd::crowd::{
    build_crowd, memory_report, AnimationMode, AssetStore, Crowd, MemoryLayoutModel, MemoryMode,
    MIB,
};
use gscrowd::io::{
    export_report, load_scene_assets, load_scene_config, load_template, parse_bench_report,
    save_motion, save_template, write_image, ImageFormat, SceneConfig,
};
use gscrowd::math::Camera;
use gscrowd::metrics::lod_quality_sweep;
use gscrowd::render::{render_frame, RenderSettings};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_ASSET: u8 = 4;

/// Failure class, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Asset(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Asset(_) => EXIT_ASSET,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Asset(e) | Failure::Runtime(e) => e,
        }
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

type Outcome = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "gscrowd",
    version,
    about = "Gaussian-splat crowd renderer",
    after_help = "Scene defaults: LoD thresholds 5 m and 10 m (no hysteresis), tile size 16, \
                  1280x720, 60 deg vertical FOV, camera (0, 1.6, 3) looking at (0, 1, -10), \
                  black background, crowd seed 0.\n\
                  Exit codes: 0 ok, 1 runtime failure, 2 usage, 3 config, 4 asset."
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "GSCROWD_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic multi-level avatar template (GSAT).
    GenTemplate(GenTemplateArgs),
    /// Write a synthetic looping walk-like clip (GSMO).
    GenMotion(GenMotionArgs),
    /// Render one frame of a scene.
    Render(RenderArgs),
    /// Render a numbered frame sequence.
    Animate(AnimateArgs),
    /// Time the update/gather/sort/rasterize pipeline over a matrix of cells.
    Bench(BenchArgs),
    /// Memory totals for naive and shared attribute storage.
    Memreport(MemreportArgs),
    /// PSNR of every LoD level against the finest at several distances.
    LodSweep(LodSweepArgs),
}

#[derive(Args, Debug)]
struct GenTemplateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussians per level, finest first, strictly decreasing.
    #[arg(long, default_value = "202738,12661,3176", value_delimiter = ',')]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 24)]
    joints: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenMotionArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    frames: usize,
    #[arg(long, default_value_t = 30.0)]
    fps: f32,
    #[arg(long, default_value_t = 24)]
    joints: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SceneArgs {
    /// Scene TOML (defaults: LoD 5/10 m, tile 16, 1280x720).
    #[arg(long)]
    scene: PathBuf,
    /// Bind pose instead of sampling the clips.
    #[arg(long)]
    static_pose: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Seconds on the crowd clock.
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    /// Output image; `.png` writes PNG, anything else binary PPM.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FrameFormat {
    Png,
    Ppm,
}

#[derive(Args, Debug)]
struct AnimateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, value_enum, default_value_t = FrameFormat::Png)]
    format: FrameFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, required_unless_present = "replay")]
    scene: Option<PathBuf>,
    /// e.g. `chars=1,100;gaussians=3176;motion=on,off`.
    #[arg(long, default_value = "chars=1,100,400,1000,5000;motion=off,on")]
    matrix: String,
    /// Timed frames per cell.
    #[arg(long, default_value_t = 30)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    /// Cells estimated above this working set are reported as skipped.
    #[arg(long, default_value_t = 8192.0)]
    memory_budget_mib: f64,
    /// Re-export a previously written report instead of measuring.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Naive,
    Shared,
    Both,
}

#[derive(Args, Debug)]
struct MemreportArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Fixed overhead added to every total.
    #[arg(long, default_value_t = 0.0)]
    overhead: f64,
    /// Character counts of the grid columns.
    #[arg(long, default_value = "1,100,400,1000,5000", value_delimiter = ',')]
    chars: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LodSweepArgs {
    #[arg(long)]
    template: PathBuf,
    /// Camera distances in meters.
    #[arg(long, default_value = "1.9,3,5,10", value_delimiter = ',')]
    distances: Vec<f32>,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 360)]
    height: u32,
    #[arg(long, default_value_t = 60.0)]
    fov_y_deg: f32,
    #[arg(long)]
    out: PathBuf,
}

fn load_scene(path: &Path) -> Result<SceneConfig, Failure> {
    let cfg = load_scene_config(path)
        .with_context(|| format!("loading scene {}", path.display()))
        .map_err(Failure::Config)?;
    for k in &cfg.unknown_keys {
        eprintln!("warning: unknown scene key `{k}` ignored");
    }
    Ok(cfg)
}

fn load_assets(cfg: &SceneConfig) -> Result<Arc<AssetStore>, Failure> {
    load_scene_assets(cfg)
        .map(Arc::new)
        .map_err(|e| Failure::Asset(e.into()))
}

fn scene_crowd(cfg: &SceneConfig) -> Result<(Crowd, RenderSettings), Failure> {
    let assets = load_assets(cfg)?;
    let crowd = build_crowd(&cfg.crowd_config(), assets, cfg.seed)
        .map_err(|e| Failure::Config(e.into()))?;
    Ok((crowd, cfg.render))
}

fn animation_mode(a: &SceneArgs) -> AnimationMode {
    if a.static_pose {
        AnimationMode::Static
    } else {
        AnimationMode::Motion
    }
}

fn gen_template(a: &GenTemplateArgs) -> Outcome {
    let t = generate_synthetic_template(a.seed, &a.counts, a.joints)
        .map_err(|e| Failure::Config(e.into()))?;
    save_template(&t, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::Runtime)?;
    for (i, n) in t.level_counts().iter().enumerate() {
        println!("level {i}: {n} gaussians");
    }
    Ok(())
}

fn gen_motion(a: &GenMotionArgs) -> Outcome {
    let clip = generate_synthetic_motion(a.seed, a.joints, a.frames, a.fps)
        .map_err(|e| Failure::Config(e.into()))?;
    save_motion(&clip, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::Runtime)?;
    println!(
        "{} frames at {} fps, {} joints",
        clip.frame_count(),
        clip.fps(),
        clip.joint_count()
    );
    Ok(())
}

fn render(a: &RenderArgs, threads: usize) -> Outcome {
    let cfg = load_scene(&a.scene.scene)?;
    let (mut crowd, mut settings) = scene_crowd(&cfg)?;
    settings.thread_count = threads;
    let fb = render_frame(
        &mut crowd,
        &cfg.camera(),
        a.time,
        &settings,
        animation_mode(&a.scene),
    )
    .map_err(runtime)?;
    write_image(&fb, &a.out, ImageFormat::from_path(&a.out)).map_err(runtime)?;
    Ok(())
}

fn animate(a: &AnimateArgs, threads: usize) -> Outcome {
    if !(a.fps.is_finite() && a.fps > 0.0) {
        return Err(Failure::Config(anyhow!("--fps must be positive")));
    }
    let cfg = load_scene(&a.scene.scene)?;
    let (mut crowd, mut settings) = scene_crowd(&cfg)?;
    settings.thread_count = threads;
    if a.frames == 0 {
        return Ok(());
    }
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))
        .map_err(Failure::Runtime)?;
    let (ext, format) = match a.format {
        FrameFormat::Png => ("png", ImageFormat::Png),
        FrameFormat::Ppm => ("ppm", ImageFormat::Ppm),
    };
    let width = (a.frames - 1).to_string().len().max(5);
    let camera = cfg.camera();
    for k in 0..a.frames {
        let t = a.start + k as f64 / a.fps;
        let fb = render_frame(&mut crowd, &camera, t, &settings, animation_mode(&a.scene))
            .map_err(runtime)?;
        let path = a.out_dir.join(format!("frame_{k:0width$}.{ext}"));
        write_image(&fb, &path, format).map_err(runtime)?;
    }
    Ok(())
}

fn bench(a: &BenchArgs, threads: usize) -> Outcome {
    let reports = if let Some(replay) = &a.replay {
        let text = std::fs::read_to_string(replay)
            .with_context(|| format!("reading {}", replay.display()))
            .map_err(Failure::Config)?;
        parse_bench_report(&text)
            .with_context(|| format!("parsing {}", replay.display()))
            .map_err(Failure::Config)?
    } else {
        let matrix: BenchMatrix = a
            .matrix
            .parse()
            .map_err(|e: gscrowd::error::BenchError| Failure::Config(e.into()))?;
        let Some(scene_path) = a.scene.as_deref() else {
            return Err(Failure::Config(anyhow!(
                "--scene is required without --replay"
            )));
        };
        let cfg = load_scene(scene_path)?;
        let assets = load_assets(&cfg)?;
        let mut settings = cfg.render;
        settings.thread_count = threads;
        let scene = BenchScene {
            assets,
            spacing_m: cfg.grid.spacing_m,
            camera: cfg.camera(),
            settings,
            seed: cfg.seed,
        };
        let options = BenchOptions {
            warmup_frames: a.warmup,
            timed_frames: a.repeats.max(1),
            memory_budget_bytes: Some((a.memory_budget_mib.max(0.0) * MIB) as u64),
            ..BenchOptions::default()
        };
        run_benchmark(&matrix, &scene, &options).map_err(|e| Failure::Config(e.into()))?
    };
    export_report(reports.as_slice(), &a.out).map_err(runtime)?;
    for r in &reports {
        match &r.skipped {
            None => println!(
                "{} x{}: {:.2} ms, {:.1} fps, {} splats",
                r.label, r.characters, r.total_ms, r.fps, r.splat_count
            ),
            Some(reason) => println!("{} x{}: skipped ({reason})", r.label, r.characters),
        }
    }
    if !reports.is_empty() && reports.iter().all(|r| r.skipped.is_some()) {
        return Err(runtime(anyhow!("every benchmark cell was skipped")));
    }
    Ok(())
}

fn memreport(a: &MemreportArgs) -> Outcome {
    if !(a.overhead.is_finite() && a.overhead >= 0.0) {
        return Err(Failure::Config(anyhow!(
            "--overhead must be a non-negative MiB value"
        )));
    }
    let cfg = load_scene(&a.scene)?;
    let (mut crowd, _) = scene_crowd(&cfg)?;
    let model = MemoryLayoutModel {
        fixed_overhead_bytes: (a.overhead * MIB).round() as u64,
        ..MemoryLayoutModel::default()
    };
    crowd.select_lods(&cfg.camera());
    let scene_report = memory_report(&crowd, &model, MemoryMode::Shared);
    println!(
        "scene: {} characters, naive {:.3} MiB, shared {:.3} MiB, savings {:.2}%",
        scene_report.instance_count,
        scene_report.naive_bytes as f64 / MIB,
        scene_report.shared_bytes as f64 / MIB,
        100.0 * scene_report.savings_fraction
    );
    let modes: &[MemoryMode] = match a.mode {
        ModeArg::Naive => &[MemoryMode::Naive],
        ModeArg::Shared => &[MemoryMode::Shared],
        ModeArg::Both => &[MemoryMode::Naive, MemoryMode::Shared],
    };
    let grid = memory_grid(
        crowd.assets(),
        cfg.grid.spacing_m,
        cfg.seed,
        &model,
        &a.chars,
        modes,
    )
    .map_err(|e| Failure::Config(e.into()))?;
    export_report(&grid, &a.out).map_err(runtime)?;
    Ok(())
}

fn lod_sweep(a: &LodSweepArgs, threads: usize) -> Outcome {
    let template = load_template(&a.template)
        .with_context(|| format!("loading {}", a.template.display()))
        .map_err(Failure::Asset)?;
    if template.level_count() < 2 {
        return Err(Failure::Asset(anyhow!(
            "{} has {} level; the sweep needs at least 2",
            a.template.display(),
            template.level_count()
        )));
    }
    let prototype = Camera::look_at(
        glam::Vec3::Z,
        glam::Vec3::ZERO,
        a.fov_y_deg,
        a.width,
        a.height,
    )
    .map_err(|e| Failure::Config(e.into()))?;
    let settings = RenderSettings {
        thread_count: threads,
        ..RenderSettings::default()
    };
    let table = lod_quality_sweep(&template, &a.distances, &prototype, &settings)
        .map_err(|e| Failure::Config(e.into()))?;
    export_report(&table, &a.out).map_err(runtime)?;
    for r in &table.rows {
        println!(
            "{:>5} m  level {}  {:>7} gaussians  {:.2} dB",
            r.distance_m, r.level, r.gaussian_count, r.psnr_db
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::GenTemplate(a) => gen_template(a),
        Command::GenMotion(a) => gen_motion(a),
        Command::Render(a) => render(a, cli.threads),
        Command::Animate(a) => animate(a, cli.threads),
        Command::Bench(a) => bench(a, cli.threads),
        Command::Memreport(a) => memreport(a),
        Command::LodSweep(a) => lod_sweep(a, cli.threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn list_defaults() {
        let a =
            Cli::try_parse_from(["gscrowd", "lod-sweep", "--template", "t", "--out", "o"]).unwrap();
        let Command::LodSweep(s) = a.command else {
            unreachable!()
        };
        assert_eq!(s.distances, gscrowd::metrics::DEFAULT_DISTANCES.to_vec());
        let a = Cli::try_parse_from(["gscrowd", "gen-template", "--out", "o"]).unwrap();
        let Command::GenTemplate(g) = a.command else {
            unreachable!()
        };
        assert_eq!(g.counts, vec![202738, 12661, 3176]);
        let a =
            Cli::try_parse_from(["gscrowd", "memreport", "--scene", "s", "--out", "o"]).unwrap();
        let Command::Memreport(m) = a.command else {
            unreachable!()
        };
        assert_eq!(m.chars, gscrowd::bench::TABLE_CHARACTERS.to_vec());
    }

    #[test]
    fn bad_list_is_usage_error() {
        assert!(
            Cli::try_parse_from(["gscrowd", "gen-template", "--counts", "1,x", "--out", "o"])
                .is_err()
        );
    }
}
