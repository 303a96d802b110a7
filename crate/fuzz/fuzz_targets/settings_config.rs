#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::config::PipelineSettings;

// Settings parsing covers the line grammar, the key whitelist, and every
// per-key value validator; none of them may panic on arbitrary bytes.
fuzz_target!(|data: &[u8]| {
    let _ = PipelineSettings::from_reader(data, Path::new("fuzz"));
});
