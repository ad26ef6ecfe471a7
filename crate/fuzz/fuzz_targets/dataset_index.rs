#![no_main]

use blocksim_harness::dataset::{parse_index, IndexEntry};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_index(text) {
        for e in entries {
            assert_eq!(IndexEntry::parse_line(&e.to_line()).as_ref(), Ok(&e));
        }
    }
});
