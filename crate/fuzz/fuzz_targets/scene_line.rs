#![no_main]

use blocksim_core::scene::SceneRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = SceneRecord::parse_line(text) {
        let again = SceneRecord::parse_line(&record.to_line()).expect("serialized record parses");
        assert_eq!(again, record);
        let _ = record.to_scene();
    }
});
