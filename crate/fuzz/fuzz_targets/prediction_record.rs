#![no_main]

use blocksim_core::ipe::PredictionRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = PredictionRecord::parse_line(text) {
        assert_eq!(PredictionRecord::parse_line(&record.to_line()), Ok(record));
    }
});
