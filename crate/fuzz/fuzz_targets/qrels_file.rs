#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::eval::JudgmentSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(judgments) = JudgmentSet::read_from(data, Path::new("fuzz")) {
        let mut bytes = Vec::new();
        judgments.write_to(&mut bytes).expect("rewrite failed");
        let again = JudgmentSet::read_from(&bytes[..], Path::new("fuzz"))
            .expect("rewritten qrels must parse");
        assert_eq!(judgments, again, "judgments changed across a rewrite");
    }
});
