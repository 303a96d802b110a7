#![no_main]

use libfuzzer_sys::fuzz_target;
use simsent::lexical::InvertedIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = InvertedIndex::read_from(&mut &data[..]) {
        let mut first = Vec::new();
        index.write_to(&mut first).expect("re-encode failed");
        let again = InvertedIndex::read_from(&mut &first[..]).expect("canonical form must decode");
        let mut second = Vec::new();
        again.write_to(&mut second).expect("re-encode failed");
        assert_eq!(first, second, "encoding is not idempotent");
    }
});
