use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use super::{analytic_stability, generate_scene, GenParams, SceneError, FOUR_BLOCK_STDDEV};
use crate::seed::{derive_seed, stream};

const CALIBRATION_SEED: u64 = 0x0b10_c5ca_1e00;
const CALIBRATION_SCENES: usize = 10_000;
const BRACKET: (f64, f64) = (0.01, 2.0);

/// Fraction of `n_scenes` generated stacks that the exact rule calls stable.
/// Scene `k` uses seed `derive_seed(seed, CALIBRATION, k)`, so fractions at
/// different stddevs share their underlying normal draws.
pub fn stable_fraction(n_blocks: usize, stddev: f64, n_scenes: usize, seed: u64) -> f64 {
    let stable = (0..n_scenes as u64)
        .filter(|&k| {
            let params = GenParams::new(n_blocks, stddev, derive_seed(seed, stream::CALIBRATION, k))
                .expect("validated by caller");
            analytic_stability(&generate_scene(&params)).expect("generated form").stable
        })
        .count();
    stable as f64 / n_scenes as f64
}

/// Generation stddev giving half stable, half unstable stacks of `n_blocks`.
pub fn calibrate_stddev(n_blocks: usize) -> Result<f64, SceneError> {
    calibrate_stddev_with(n_blocks, CALIBRATION_SCENES, CALIBRATION_SEED)
}

/// Bisection on the generation stddev. With shared draws, the stable
/// fraction is a non-increasing step function of the stddev, so the
/// bisection converges onto its 0.5 crossing.
pub fn calibrate_stddev_with(n_blocks: usize, n_scenes: usize, seed: u64) -> Result<f64, SceneError> {
    if n_blocks < 2 {
        return Err(SceneError::InvalidParams(format!("n_blocks must be >= 2, got {n_blocks}")));
    }
    if n_scenes == 0 {
        return Err(SceneError::InvalidParams("n_scenes must be positive".into()));
    }
    let p = |s: f64| stable_fraction(n_blocks, s, n_scenes, seed);
    let (mut lo, mut hi) = BRACKET;
    if p(lo) < 0.5 || p(hi) > 0.5 {
        return Err(SceneError::CalibrationBracket { lo, hi });
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if p(mid) >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stddev used when generating stacks of `n_blocks`: the reference 0.29 m for
/// four blocks, a cached calibration for every other count.
pub fn calibrated_stddev(n_blocks: usize) -> Result<f64, SceneError> {
    if n_blocks == 4 {
        return Ok(FOUR_BLOCK_STDDEV);
    }
    static CACHE: OnceLock<Mutex<BTreeMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(&s) = cache.lock().unwrap().get(&n_blocks) {
        return Ok(s);
    }
    let s = calibrate_stddev(n_blocks)?;
    cache.lock().unwrap().insert(n_blocks, s);
    Ok(s)
}
