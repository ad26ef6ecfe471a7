#![no_main]

use blocksim_core::render::Image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = Image::from_pgm(data) {
        let again = Image::from_pgm(&image.to_pgm()).expect("encoded image decodes");
        assert_eq!((again.width(), again.height()), (image.width(), image.height()));
    }
});
