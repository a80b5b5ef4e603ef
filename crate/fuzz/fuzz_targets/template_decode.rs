#![no_main]

use gscrowd::io::{decode_template, encode_template};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_template(data) {
        let bytes = encode_template(&t);
        let again = decode_template(&bytes).expect("re-encoded template must decode");
        assert_eq!(encode_template(&again), bytes);
    }
});
