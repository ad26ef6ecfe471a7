#![no_main]

use blocksim_core::vision::PosteriorLine;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(line) = PosteriorLine::parse_line(text) {
        let _ = line.scene();
        assert_eq!(PosteriorLine::parse_line(&line.to_line()).ok(), Some(line));
    }
});
