use super::Image;

/// Normalized Gaussian taps with stddev `sigma`, truncated at 3 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0 && sigma.is_finite(), "blur width must be positive");
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable Gaussian blur with stddev `width` pixels and clamped edges.
pub fn gaussian_blur(image: &Image, width: f64) -> Image {
    let kernel = gaussian_kernel(width);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (image.width(), image.height());
    let src = image.pixels();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in kernel.iter().enumerate() {
                acc += t * row[clamp(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, t) in kernel.iter().enumerate() {
            let sy = clamp(y as isize + k as isize - radius, h);
            let src_row = &tmp[sy * w..(sy + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src_row) {
                *o += t * s;
            }
        }
    }
    Image::from_pixels(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(n: usize) -> Image {
        let mut img = Image::filled(n, n, 0.0);
        img.set(n / 2, n / 2, 1.0);
        img
    }

    #[test]
    fn constant_is_a_fixed_point() {
        let img = Image::filled(17, 9, 0.37);
        let out = gaussian_blur(&img, 2.0);
        assert!(out.pixels().iter().all(|p| (p - 0.37).abs() < 1e-12));
    }

    #[test]
    fn impulse_becomes_unit_mass_gaussian() {
        let out = gaussian_blur(&impulse(41), 2.0);
        let sum: f64 = out.pixels().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        // second moment along x, against the truncated-normal variance
        let var: f64 = (0..41)
            .flat_map(|y| (0..41).map(move |x| (x, y)))
            .map(|(x, y)| out.get(x, y) * (x as f64 - 20.0).powi(2))
            .sum();
        let taps: Vec<f64> = (-6i32..=6).map(|i| (-(i * i) as f64 / 8.0).exp()).collect();
        let expected = (-6i32..=6).zip(&taps).map(|(i, t)| (i * i) as f64 * t).sum::<f64>() / taps.iter().sum::<f64>();
        assert!((var - expected).abs() < 1e-9, "{var} vs {expected}");
        assert!((expected - 4.0).abs() < 0.15);
        // separable: value at (dx, dy) is the product of 1D taps
        let k = gaussian_kernel(2.0);
        assert!((out.get(21, 22) - k[7] * k[8]).abs() < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let n = 64;
        let mut img = Image::filled(n, n, 0.0);
        for y in 24..40 {
            for x in 20..36 {
                img.set(x, y, 1.0);
            }
        }
        img.set(44, 30, 1.0);
        let twice = gaussian_blur(&gaussian_blur(&img, 2.0), 2.0);
        let once = gaussian_blur(&img, 8f64.sqrt());
        assert!(twice.max_abs_diff(&once) < 1e-3, "{}", twice.max_abs_diff(&once));
    }

    #[test]
    fn preserves_mean_and_is_linear() {
        let n = 48;
        let mut a = Image::filled(n, n, 0.0);
        let mut b = Image::filled(n, n, 0.0);
        for i in 12..36 {
            a.set(i, 20, 0.4);
            b.set(24, i, 0.5);
        }
        let sum = Image::from_pixels(n, n, a.pixels().iter().zip(b.pixels()).map(|(x, y)| x + y).collect());
        let (ba, bb, bs) = (gaussian_blur(&a, 2.0), gaussian_blur(&b, 2.0), gaussian_blur(&sum, 2.0));
        assert!((ba.mean() - a.mean()).abs() < 1e-6);
        for i in 0..n * n {
            assert!((bs.pixels()[i] - ba.pixels()[i] - bb.pixels()[i]).abs() < 1e-12);
        }
    }
}
