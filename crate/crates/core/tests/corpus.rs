//! The checked-in fuzz seeds must stay valid inputs, or the fuzzers start cold.

use std::fs;
use std::path::{Path, PathBuf};

use gscrowd::bench::BenchMatrix;
use gscrowd::io::{decode_motion, decode_template, parse_bench_report, parse_scene_config};

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut v: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    assert!(!v.is_empty(), "no seeds for {target}");
    v
}

#[test]
fn binary_seeds_decode() {
    for p in seeds("template_decode") {
        decode_template(&fs::read(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for p in seeds("motion_decode") {
        decode_motion(&fs::read(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn text_seeds_parse() {
    for p in seeds("scene_config_parse") {
        let cfg = parse_scene_config(&fs::read_to_string(&p).unwrap(), Path::new("/assets"));
        let cfg = cfg.unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(
            cfg.unknown_keys.is_empty(),
            "{}: {:?}",
            p.display(),
            cfg.unknown_keys
        );
    }
    for p in seeds("bench_matrix_parse") {
        fs::read_to_string(&p)
            .unwrap()
            .parse::<BenchMatrix>()
            .unwrap();
    }
    for p in seeds("bench_report_parse") {
        assert!(!parse_bench_report(&fs::read_to_string(&p).unwrap())
            .unwrap()
            .is_empty());
    }
}

#[test]
fn shipped_benchmark_scene() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/bench/scene.toml");
    let cfg =
        parse_scene_config(&fs::read_to_string(&path).unwrap(), path.parent().unwrap()).unwrap();
    assert_eq!(cfg.count, 3500);
    assert_eq!(cfg.templates.len(), 14);
    assert_eq!(cfg.motions.len(), 15);
    assert_eq!((cfg.camera.width, cfg.camera.height), (1280, 720));
    assert!(cfg.unknown_keys.is_empty());
}
