#![no_main]

use libfuzzer_sys::fuzz_target;
use simsent::embed::{read_embeddings, write_embeddings};

// Decoding arbitrary bytes must never panic; anything that decodes must
// re-encode to a stable canonical form (terms are written sorted, so a
// second decode/encode cycle reproduces the first byte for byte).
fuzz_target!(|data: &[u8]| {
    if let Ok((d, entries)) = read_embeddings(&mut &data[..]) {
        let mut first = Vec::new();
        write_embeddings(&mut first, d, &entries).expect("re-encode failed");
        let (d2, entries2) = read_embeddings(&mut &first[..]).expect("canonical form must decode");
        let mut second = Vec::new();
        write_embeddings(&mut second, d2, &entries2).expect("re-encode failed");
        assert_eq!(first, second, "encoding is not idempotent");
    }
});
