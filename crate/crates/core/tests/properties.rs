use std::sync::Arc;

use glam::{DMat3, DVec3, Mat4, Quat, Vec2, Vec3};
use gscrowd::avatar::{
    forward_kinematics, generate_synthetic_motion, generate_synthetic_template, sample_pose,
    skin_means,
};
use gscrowd::crowd::{
    build_crowd, layout_totals, update_crowd, AnimationMode, AssetStore, CrowdConfig, GridConfig,
    MemoryLayoutModel, MemoryMode, MemoryReport, PopulationEntry,
};
use gscrowd::io::{decode_motion, decode_template, encode_motion, encode_template};
use gscrowd::lod::{select_lod, LodPolicy};
use gscrowd::math::{
    build_covariance, eval_alpha, project_gaussian, AlphaLimits, Camera, Cov2, Gaussian3D, Splat2D,
    ALPHA_MAX,
};
use gscrowd::metrics::psnr;
use gscrowd::render::{
    composite_pixel, rasterize, sort_splats, splat_order, Framebuffer, RenderSettings, SplatFrame,
    SplatRecord,
};
use proptest::prelude::*;

fn unit_quat() -> impl Strategy<Value = Quat> {
    (-1.0f32..1.0, -1.0f32..1.0, -1.0f32..1.0, -1.0f32..1.0)
        .prop_filter("non-degenerate", |(x, y, z, w)| {
            x * x + y * y + z * z + w * w > 0.05
        })
        .prop_map(|(x, y, z, w)| Quat::from_xyzw(x, y, z, w).normalize())
}

fn color() -> impl Strategy<Value = Vec3> {
    (0.0f32..=1.0, 0.0f32..=1.0, 0.0f32..=1.0).prop_map(|(r, g, b)| Vec3::new(r, g, b))
}

fn splat() -> impl Strategy<Value = Splat2D> {
    (
        (-8.0f32..40.0, -8.0f32..40.0),
        (0.4f32..6.0, 0.4f32..6.0, -0.8f32..0.8),
        0.1f32..30.0,
        color(),
        0.02f32..1.0,
    )
        .prop_filter_map("invertible", |((x, y), (sx, sy, rho), depth, c, o)| {
            let cov = Cov2 {
                xx: sx * sx,
                xy: rho * sx * sy,
                yy: sy * sy,
            };
            Splat2D::new(Vec2::new(x, y), cov, depth, c, o)
        })
}

fn frame(max: usize) -> impl Strategy<Value = SplatFrame> {
    prop::collection::vec((splat(), 0u32..4), 1..max).prop_map(|v| SplatFrame {
        records: v
            .into_iter()
            .enumerate()
            .map(|(i, (splat, instance_id))| SplatRecord {
                splat,
                instance_id,
                gaussian_index: i as u32,
            })
            .collect(),
    })
}

fn small_template(seed: u64) -> gscrowd::avatar::AvatarTemplate {
    generate_synthetic_template(seed, &[120, 30], 24).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // characteristic polynomial of RSSᵀRᵀ equals that of diag(s²)
    #[test]
    fn covariance_spectrum_is_squared_scales(q in unit_quat(), s in (0.01f32..2.0, 0.01f32..2.0, 0.01f32..2.0)) {
        let cov = build_covariance(q, Vec3::new(s.0, s.1, s.2)).unwrap().as_dmat3();
        let e = DVec3::new(s.0 as f64, s.1 as f64, s.2 as f64);
        let e = e * e;
        let trace = cov.x_axis.x + cov.y_axis.y + cov.z_axis.z;
        let minors = cov.x_axis.x * cov.y_axis.y - cov.y_axis.x * cov.x_axis.y
            + cov.x_axis.x * cov.z_axis.z - cov.z_axis.x * cov.x_axis.z
            + cov.y_axis.y * cov.z_axis.z - cov.z_axis.y * cov.y_axis.z;
        let scale = e.max_element();
        prop_assert!((trace - e.element_sum()).abs() <= 1e-5 * scale);
        prop_assert!((minors - (e.x * e.y + e.x * e.z + e.y * e.z)).abs() <= 1e-5 * scale * scale);
        prop_assert!((DMat3::determinant(&cov) - e.x * e.y * e.z).abs() <= 1e-5 * scale * scale * scale);
    }

    #[test]
    fn pixel_radius_scales_inverse_with_distance(d in 2.0f32..40.0, k in 1.5f32..3.0) {
        let cam = Camera::look_at(Vec3::ZERO, Vec3::Z, 60.0, 1280, 720).unwrap();
        let radius = |dist: f32| {
            let g = Gaussian3D {
                mean: Vec3::new(0.0, 0.0, dist),
                rotation: Quat::IDENTITY,
                scale: Vec3::splat(0.04 * d),
                opacity: 1.0,
                color: Vec3::ONE,
            };
            let s = project_gaussian(&g, &cam).unwrap().unwrap();
            // undo the low-pass dilation before comparing
            (s.cov2d.xx - 0.3).sqrt()
        };
        let ratio = radius(d) / radius(k * d);
        prop_assert!((ratio / k - 1.0).abs() < 0.05, "ratio {ratio} vs {k}");
    }

    #[test]
    fn alpha_falls_with_mahalanobis_distance(s in splat(), dir in (-1.0f32..1.0, -1.0f32..1.0), t in 0.0f32..3.0, dt in 0.0f32..1.0) {
        let dir = Vec2::new(dir.0, dir.1);
        prop_assume!(dir.length() > 0.05);
        let lim = AlphaLimits::default();
        let a = eval_alpha(&s, s.mean_px + dir * t, lim);
        let b = eval_alpha(&s, s.mean_px + dir * (t + dt), lim);
        prop_assert!(b <= a);
        prop_assert!(a <= ALPHA_MAX);
    }

    #[test]
    fn blend_weights_and_transmittance_sum_to_one(f in frame(40), px in (0.0f32..32.0, 0.0f32..32.0)) {
        let settings = RenderSettings::default();
        let sorted = sort_splats(f);
        let center = Vec2::new(px.0, px.1);
        let splats: Vec<Splat2D> = sorted.records.iter().map(|r| r.splat).collect();
        // colors of one make the accumulated color the weight sum
        let white: Vec<Splat2D> = splats.iter().map(|s| Splat2D { color: Vec3::ONE, ..*s }).collect();
        let (c, t) = composite_pixel(&white, center, &settings);
        prop_assert!(((c.x + t) as f64 - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn pixels_stay_within_color_hull(f in frame(60), bg in color()) {
        let settings = RenderSettings { background: bg, ..RenderSettings::default() };
        let hi = f.records.iter().map(|r| r.splat.color.max_element()).fold(bg.max_element(), f32::max);
        let fb = rasterize(&sort_splats(f), &settings, 32, 24);
        for p in &fb.pixels {
            prop_assert!(p.min_element() >= 0.0 && p.max_element() <= hi + 1e-5);
        }
    }

    #[test]
    fn sort_matches_key_oracle(f in frame(80)) {
        let sorted = sort_splats(f.clone());
        let mut oracle = f.records.clone();
        oracle.sort_by(|a, b| {
            a.splat.depth.total_cmp(&b.splat.depth)
                .then(a.instance_id.cmp(&b.instance_id))
                .then(a.gaussian_index.cmp(&b.gaussian_index))
        });
        prop_assert_eq!(&sorted.records, &oracle);
        for w in sorted.records.windows(2) {
            prop_assert!(splat_order(&w[0], &w[1]).is_le());
        }
    }

    #[test]
    fn tile_size_does_not_change_output(f in frame(60), tile in 1u32..40) {
        let sorted = sort_splats(f);
        let a = rasterize(&sorted, &RenderSettings::default(), 40, 30);
        let b = rasterize(&sorted, &RenderSettings { tile_size: tile, ..RenderSettings::default() }, 40, 30);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn psnr_is_symmetric_and_falls_with_perturbation(
        base in prop::collection::vec(color(), 48),
        idx in prop::collection::btree_set(0usize..48, 1..10),
        m in 0.01f32..0.3,
        extra in 0.01f32..0.3,
    ) {
        let a = Framebuffer { width: 8, height: 6, pixels: base.clone() };
        let perturb = |mag: f32| {
            let mut p = base.clone();
            for &i in &idx {
                p[i] += Vec3::splat(mag);
            }
            Framebuffer { width: 8, height: 6, pixels: p }
        };
        let b = perturb(m);
        let c = perturb(m + extra);
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert!(psnr(&a, &c).unwrap() < psnr(&a, &b).unwrap());
    }

    #[test]
    fn lod_is_monotone_and_matches_intervals(t0 in 0.5f32..20.0, gap in 0.1f32..20.0, a in 0.0f32..60.0, b in 0.0f32..60.0) {
        let policy = LodPolicy::new(vec![t0, t0 + gap], 0.0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(select_lod(&policy, lo, None) <= select_lod(&policy, hi, None));
        let oracle = |d: f32| if d < t0 { 0 } else if d < t0 + gap { 1 } else { 2 };
        prop_assert_eq!(select_lod(&policy, a, None), oracle(a));
        prop_assert_eq!(select_lod(&policy, a, Some(1)), oracle(a));
    }

    #[test]
    fn hysteresis_holds_level_under_oscillation(t0 in 1.0f32..20.0, band in 0.05f32..1.0, start_high: bool, steps in 2usize..30) {
        let policy = LodPolicy::new(vec![t0, t0 + 2.0 * band + 1.0], band).unwrap();
        let first = if start_high { t0 + band / 4.0 } else { t0 - band / 4.0 };
        let mut level = select_lod(&policy, first, None);
        let held = level;
        for i in 0..steps {
            let d = if i % 2 == 0 { t0 - band / 4.0 } else { t0 + band / 4.0 };
            level = select_lod(&policy, d, Some(level));
            prop_assert_eq!(level, held);
        }
    }

    #[test]
    fn shared_never_exceeds_naive(levels in prop::collection::vec((0usize..3, 0usize..2), 0..50)) {
        let model = MemoryLayoutModel::default();
        // one count per (template, level)
        let pop: Vec<PopulationEntry> = levels
            .iter()
            .map(|&(t, l)| PopulationEntry { template_id: t, level: l, gaussian_count: 1000 + 7 * (t as u64 * 2 + l as u64) })
            .collect();
        let r = MemoryReport::from_population(&model, &pop, MemoryMode::Shared);
        prop_assert!(r.shared_bytes <= r.naive_bytes);
        if pop.is_empty() {
            prop_assert_eq!(r.shared_bytes, r.naive_bytes);
        }
    }

    #[test]
    fn layout_totals_grow_affinely(n in 1u64..300_000, k in 0usize..5000, dk in 1usize..100) {
        let model = MemoryLayoutModel::default();
        let (n0, s0) = layout_totals(&model, n, k);
        let (n1, s1) = layout_totals(&model, n, k + dk);
        prop_assert!(s0 <= n0 && s1 <= n1);
        prop_assert_eq!(s1 - s0, 12 * n * dk as u64);
        prop_assert_eq!(n1 - n0, 80 * n * dk as u64);
        let (n2, s2) = layout_totals(&model, n + 1, k.max(1));
        let (n3, s3) = layout_totals(&model, n, k.max(1));
        prop_assert!(n2 > n3 && s2 > s3);
    }

    #[test]
    fn bind_pose_skins_to_canonical(seed in 0u64..1000) {
        let t = small_template(seed);
        let world = forward_kinematics(t.skeleton(), &t.skeleton().bind_pose()).unwrap();
        for level in t.levels() {
            let posed = skin_means(level, &world, t.skeleton().inverse_bind());
            for (p, c) in posed.iter().zip(&level.means) {
                prop_assert!((*p - *c).abs().max_element() < 1e-4);
            }
        }
    }

    #[test]
    fn skinning_commutes_with_rigid_motion(seed in 0u64..1000, q in unit_quat(), tr in (-3.0f32..3.0, -3.0f32..3.0, -3.0f32..3.0)) {
        let t = small_template(seed);
        let clip = generate_synthetic_motion(seed, 24, 12, 30.0).unwrap();
        let pose = sample_pose(&clip, 0.13, true).unwrap();
        let world = forward_kinematics(t.skeleton(), &pose).unwrap();
        let g = Mat4::from_rotation_translation(q, Vec3::new(tr.0, tr.1, tr.2));
        let moved: Vec<Mat4> = world.iter().map(|w| g * *w).collect();
        let level = t.level(0);
        let a = skin_means(level, &world, t.skeleton().inverse_bind());
        let b = skin_means(level, &moved, t.skeleton().inverse_bind());
        for (p, m) in a.iter().zip(&b) {
            prop_assert!((g.transform_point3(*p) - *m).abs().max_element() < 1e-4);
        }
    }

    #[test]
    fn pose_sampling_is_continuous(seed in 0u64..1000, t in 0.0f64..1.5) {
        let clip = generate_synthetic_motion(seed, 24, 45, 30.0).unwrap();
        let a = sample_pose(&clip, t, true).unwrap();
        let b = sample_pose(&clip, t + 1e-4, true).unwrap();
        prop_assert!((a.root_translation - b.root_translation).length() < 1e-3);
        for (qa, qb) in a.local_rotations.iter().zip(&b.local_rotations) {
            prop_assert!(qa.dot(*qb).abs() > 1.0 - 1e-4);
        }
    }

    #[test]
    fn template_round_trip(seed in 0u64..10_000, n0 in 20usize..200, joints in 1usize..30) {
        let t = generate_synthetic_template(seed, &[n0, n0 / 4 + 1], joints).unwrap();
        let bytes = encode_template(&t);
        let again = encode_template(&decode_template(&bytes).unwrap());
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn motion_round_trip(seed in 0u64..10_000, joints in 1usize..30, frames in 1usize..60, fps in 1.0f32..120.0) {
        let clip = generate_synthetic_motion(seed, joints, frames, fps).unwrap();
        let bytes = encode_motion(&clip);
        prop_assert_eq!(encode_motion(&decode_motion(&bytes).unwrap()), bytes);
    }

    #[test]
    fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512), head in 0usize..2) {
        let mut data = bytes;
        if head == 1 && data.len() >= 8 {
            data[..4].copy_from_slice(b"GSAT");
            data[4..8].copy_from_slice(&1u32.to_le_bytes());
        }
        let _ = decode_template(&data);
        let _ = decode_motion(&data);
    }

    #[test]
    fn truncation_is_a_typed_error(seed in 0u64..1000, cut in 0.0f64..1.0) {
        let t = generate_synthetic_template(seed, &[40, 10], 24).unwrap();
        let bytes = encode_template(&t);
        let at = ((bytes.len() - 1) as f64 * cut) as usize;
        prop_assert!(decode_template(&bytes[..at]).is_err());
        let clip = generate_synthetic_motion(seed, 24, 5, 30.0).unwrap();
        let bytes = encode_motion(&clip);
        let at = ((bytes.len() - 1) as f64 * cut) as usize;
        prop_assert!(decode_motion(&bytes[..at]).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn crowd_update_is_deterministic_and_read_only(seed in 0u64..1000, count in 1usize..12, time in 0.0f64..4.0) {
        let assets = Arc::new(
            AssetStore::new(
                vec![small_template(seed), small_template(seed + 1)],
                vec![generate_synthetic_motion(seed, 24, 20, 30.0).unwrap()],
            )
            .unwrap(),
        );
        let before: Vec<Vec<u8>> = assets.templates().iter().map(encode_template).collect();
        let config = CrowdConfig {
            grid: GridConfig { rows: 3, cols: 4, spacing_m: 1.5 },
            count,
            lod: LodPolicy::default(),
        };
        let camera = Camera::look_at(Vec3::new(0.0, 1.6, 3.0), Vec3::new(0.0, 1.0, -10.0), 60.0, 64, 36).unwrap();
        let mut a = build_crowd(&config, Arc::clone(&assets), seed).unwrap();
        let mut b = build_crowd(&config, Arc::clone(&assets), seed).unwrap();
        update_crowd(&mut a, &camera, time, AnimationMode::Motion).unwrap();
        gscrowd::render::with_threads(3, || update_crowd(&mut b, &camera, time, AnimationMode::Motion)).unwrap();
        for (x, y) in a.instances().iter().zip(b.instances()) {
            prop_assert_eq!(x.posed_means(), y.posed_means());
        }
        let after: Vec<Vec<u8>> = assets.templates().iter().map(encode_template).collect();
        prop_assert_eq!(before, after);
    }
}
