#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::rerank::ScoreFileScorer;

fuzz_target!(|data: &[u8]| {
    let _ = ScoreFileScorer::read_from(data, Path::new("fuzz"));
});
