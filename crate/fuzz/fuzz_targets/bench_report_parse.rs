#![no_main]

use gscrowd::io::{format_report, parse_bench_report};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_bench_report(text) {
        // one export normalises number formatting; after that replay is exact
        let out = format_report(rows.as_slice()).expect("format");
        let again = parse_bench_report(&out).expect("reparse");
        assert_eq!(format_report(again.as_slice()).expect("format"), out);
    }
});
