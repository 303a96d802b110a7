#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::siamese::read_pairs;

fuzz_target!(|data: &[u8]| {
    let _ = read_pairs(data, Path::new("fuzz"));
});
