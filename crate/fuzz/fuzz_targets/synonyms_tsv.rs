#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::embed::read_synonyms;

fuzz_target!(|data: &[u8]| {
    let _ = read_synonyms(data, Path::new("fuzz"));
});
