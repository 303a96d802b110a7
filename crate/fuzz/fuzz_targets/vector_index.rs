#![no_main]

use libfuzzer_sys::fuzz_target;
use simsent::annindex::VectorIndex;

// Covers both the flat and the inverted-file payload variants.
fuzz_target!(|data: &[u8]| {
    if let Ok(index) = VectorIndex::read_from(&mut &data[..]) {
        let mut first = Vec::new();
        index.write_to(&mut first).expect("re-encode failed");
        let again = VectorIndex::read_from(&mut &first[..]).expect("canonical form must decode");
        let mut second = Vec::new();
        again.write_to(&mut second).expect("re-encode failed");
        assert_eq!(first, second, "encoding is not idempotent");
    }
});
