#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::eval::RunSet;

// Run files carry floating-point scores, so the stability check compares
// serialized bytes rather than values (a NaN score never equals itself).
fuzz_target!(|data: &[u8]| {
    if let Ok(runs) = RunSet::read_from(data, Path::new("fuzz")) {
        let mut first = Vec::new();
        runs.write_to(&mut first).expect("rewrite failed");
        let again = RunSet::read_from(&first[..], Path::new("fuzz"))
            .expect("rewritten run file must parse");
        let mut second = Vec::new();
        again.write_to(&mut second).expect("rewrite failed");
        assert_eq!(first, second, "run file is not rewrite-stable");
    }
});
