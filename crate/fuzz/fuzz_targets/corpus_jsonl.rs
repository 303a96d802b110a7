#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simsent::corpus::Corpus;

// Arbitrary bytes must either parse into a corpus or return an error —
// never panic. A parsed corpus must survive a rewrite unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = Corpus::from_jsonl_reader(data, Path::new("fuzz")) {
        let mut bytes = Vec::new();
        corpus.write_jsonl(&mut bytes).expect("rewrite failed");
        let again = Corpus::from_jsonl_reader(&bytes[..], Path::new("fuzz"))
            .expect("rewritten corpus must parse");
        assert_eq!(
            corpus.sentences(),
            again.sentences(),
            "sentences changed across a rewrite"
        );
        assert_eq!(
            corpus.stats(),
            again.stats(),
            "derived statistics changed across a rewrite"
        );
    }
});
