//! Static vs motion frame cost for a crowd of one template level: compositing
//! work per pose, then median stage timings over interleaved frames.
//!
//! `cargo run --release --example frame_stages -- [characters] [gaussians] [width] [height] [repeats]`

use std::sync::Arc;
use std::time::Duration;

use glam::{Vec2, Vec3};
use gscrowd::avatar::{generate_synthetic_motion, generate_synthetic_template};
use gscrowd::bench::bench_grid;
use gscrowd::crowd::{build_crowd, update_crowd, AnimationMode, AssetStore, CrowdConfig};
use gscrowd::lod::LodPolicy;
use gscrowd::math::eval_alpha;
use gscrowd::math::Camera;
use gscrowd::render::{
    gather_splats, render_frame_timed, sort_splats, RenderSettings, SplatFrame, StageTimings,
};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let count: usize = arg(1, 100);
    let gaussians: usize = arg(2, 3176);
    let (w, h): (u32, u32) = (arg(3, 1280), arg(4, 720));
    let template = generate_synthetic_template(1, &[gaussians], 24).unwrap();
    let motion = generate_synthetic_motion(2, 24, 60, 30.0).unwrap();
    let assets = Arc::new(AssetStore::new(vec![template], vec![motion]).unwrap());
    let config = CrowdConfig {
        grid: bench_grid(count, 1.5),
        count,
        lod: LodPolicy::default(),
    };
    let mut crowd = build_crowd(&config, assets, 3).unwrap();
    crowd.set_lod_override(Some(0));
    let camera = Camera::look_at(
        Vec3::new(0.0, 1.6, 3.0),
        Vec3::new(0.0, 1.0, -10.0),
        60.0,
        w,
        h,
    )
    .unwrap();
    let settings = RenderSettings::default();
    for mode in [AnimationMode::Static, AnimationMode::Motion] {
        update_crowd(&mut crowd, &camera, 0.4, mode).unwrap();
        print!("{mode:?}: ");
        let frame = sort_splats(gather_splats(&crowd, &camera));
        footprint_stats(&frame);
        composite_work(&frame, w, h, &settings);
    }
    let reps: usize = arg(5, 20);
    let mut samples = [Vec::new(), Vec::new()];
    for i in 0..reps + 3 {
        for (m, mode) in [AnimationMode::Static, AnimationMode::Motion]
            .into_iter()
            .enumerate()
        {
            let (_, t) =
                render_frame_timed(&mut crowd, &camera, i as f64 / 30.0, &settings, mode).unwrap();
            if i >= 3 {
                samples[m].push(t);
            }
        }
    }
    for (m, name) in ["off", "on"].iter().enumerate() {
        let med = |f: &dyn Fn(&StageTimings) -> Duration| {
            let mut v: Vec<f64> = samples[m]
                .iter()
                .map(|t| f(t).as_secs_f64() * 1e3)
                .collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        println!(
            "{name}: update {:.3} gather {:.3} sort {:.3} raster {:.3} total {:.3} ms",
            med(&|t| t.update),
            med(&|t| t.gather),
            med(&|t| t.sort),
            med(&|t| t.rasterize),
            med(&|t| t.total())
        );
    }
}

fn footprint_stats(frame: &SplatFrame) {
    let mut ext: Vec<f32> = frame
        .records
        .iter()
        .map(|r| r.splat.extent.x.max(r.splat.extent.y))
        .collect();
    ext.sort_by(f32::total_cmp);
    let area: f64 = frame
        .records
        .iter()
        .map(|r| (4.0 * r.splat.extent.x * r.splat.extent.y) as f64)
        .sum();
    println!(
        "extent median {:.1} p90 {:.1} max {:.1}; rect area sum {:.0} px",
        ext[ext.len() / 2],
        ext[ext.len() * 9 / 10],
        ext[ext.len() - 1],
        area
    );
}

/// Pixel-splat pairs the compositor visits before early termination.
fn composite_work(frame: &SplatFrame, w: u32, h: u32, settings: &RenderSettings) {
    let mut t = vec![1.0f32; (w * h) as usize];
    let (mut visited, mut blended) = (0usize, 0usize);
    let limits = settings.alpha_limits();
    for r in &frame.records {
        let s = &r.splat;
        let x0 = ((s.mean_px.x - s.extent.x - 0.5).ceil().max(0.0)) as u32;
        let x1 = ((s.mean_px.x + s.extent.x - 0.5).floor().min(w as f32 - 1.0)) as i64;
        let y0 = ((s.mean_px.y - s.extent.y - 0.5).ceil().max(0.0)) as u32;
        let y1 = ((s.mean_px.y + s.extent.y - 0.5).floor().min(h as f32 - 1.0)) as i64;
        for y in y0 as i64..=y1 {
            for x in x0 as i64..=x1 {
                let i = (y as u32 * w + x as u32) as usize;
                if t[i] < settings.transmittance_floor {
                    continue;
                }
                visited += 1;
                let a = eval_alpha(s, Vec2::new(x as f32 + 0.5, y as f32 + 0.5), limits);
                if a > 0.0 {
                    blended += 1;
                    t[i] *= 1.0 - a;
                }
            }
        }
    }
    let covered = t.iter().filter(|&&v| v < 1.0).count();
    println!("visited {visited} blended {blended} covered px {covered}");
}
