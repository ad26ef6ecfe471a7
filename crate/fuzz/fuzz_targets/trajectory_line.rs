#![no_main]

use blocksim_core::dynamics::TrajectoryFrame;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(frame) = TrajectoryFrame::parse_line(text) {
        let again = TrajectoryFrame::parse_line(&frame.to_line()).expect("serialized frame parses");
        assert_eq!(again.step, frame.step);
        assert_eq!(again.poses.len(), frame.poses.len());
    }
});
