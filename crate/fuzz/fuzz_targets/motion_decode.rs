#![no_main]

use gscrowd::io::{decode_motion, encode_motion};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = decode_motion(data) {
        let bytes = encode_motion(&clip);
        let again = decode_motion(&bytes).expect("re-encoded clip must decode");
        assert_eq!(encode_motion(&again), bytes);
    }
});
