#![no_main]

use std::path::Path;

use gscrowd::io::parse_scene_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_scene_config(text, Path::new("/assets")) {
            let _ = cfg.camera();
            let _ = cfg.crowd_config();
        }
    }
});
