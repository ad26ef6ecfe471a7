#![no_main]

use blocksim_harness::table::ResultTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ResultTable::parse_tsv(text) {
        assert_eq!(ResultTable::parse_tsv(&table.to_tsv()), Ok(table));
    }
});
