use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::render::{gaussian_blur, Camera, Image, RenderConfig, Renderer};
use crate::scene::{calibrated_stddev, SceneState};

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub steps: usize,
    pub burn_in: usize,
    /// Per-axis stddev of the single-block random walk, meters.
    pub proposal_stddev_xy: f64,
    pub pixel_noise_stddev: f64,
    pub blur_width: f64,
    pub infer_block_count: bool,
    /// Probability that a step attempts a birth or death instead of a walk.
    pub block_count_move_prob: f64,
    /// Block count used when the count is not inferred.
    pub n_blocks: usize,
    pub min_blocks: usize,
    pub max_blocks: usize,
    /// Stddev of the root block's horizontal prior around the origin.
    pub root_prior_stddev: f64,
    pub render: RenderConfig,
    pub seed: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            burn_in: 1000,
            proposal_stddev_xy: 0.1,
            pixel_noise_stddev: 0.1,
            blur_width: 2.0,
            infer_block_count: false,
            block_count_move_prob: 0.1,
            n_blocks: 4,
            min_blocks: 2,
            max_blocks: 6,
            root_prior_stddev: 1.0,
            render: RenderConfig::with_resolution(64),
            seed: 0,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<(), VisionError> {
        let bad = |m: &str| Err(VisionError::InvalidConfig(m.to_string()));
        if self.steps <= self.burn_in {
            return bad("steps must exceed burn_in");
        }
        if !(0.0..=1.0).contains(&self.block_count_move_prob) {
            return bad("block_count_move_prob must lie in [0, 1]");
        }
        if !(self.proposal_stddev_xy > 0.0 && self.pixel_noise_stddev > 0.0 && self.blur_width > 0.0) {
            return bad("proposal, pixel-noise and blur widths must be positive");
        }
        if !(self.root_prior_stddev > 0.0) {
            return bad("root_prior_stddev must be positive");
        }
        if self.min_blocks < 2 || self.min_blocks > self.max_blocks {
            return bad("block count range must satisfy 2 <= min <= max");
        }
        if !(self.min_blocks..=self.max_blocks).contains(&self.n_blocks) {
            return bad("n_blocks outside the block count range");
        }
        self.render.validate().map_err(|e| VisionError::InvalidConfig(e.to_string()))
    }
}

/// Three observed views with their known cameras, pre-blurred and paired
/// with renderers whose ground layers are cached.
#[derive(Debug, Clone)]
pub struct Observation {
    renderers: Vec<Renderer>,
    blurred: Vec<Image>,
    raw: Vec<Image>,
    pixel_noise_stddev: f64,
    blur_width: f64,
}

impl Observation {
    pub fn new(images: &[Image; 3], cameras: &[Camera; 3], config: &MhConfig) -> Result<Self, VisionError> {
        config.validate()?;
        let res = config.render.resolution;
        if let Some(img) = images.iter().find(|i| i.width() != res || i.height() != res) {
            return Err(VisionError::Resolution { expected: res, width: img.width(), height: img.height() });
        }
        Ok(Self {
            renderers: cameras.iter().map(|c| Renderer::new(c, &config.render)).collect(),
            blurred: images.iter().map(|i| gaussian_blur(i, config.blur_width)).collect(),
            raw: images.to_vec(),
            pixel_noise_stddev: config.pixel_noise_stddev,
            blur_width: config.blur_width,
        })
    }

    pub fn renderers(&self) -> &[Renderer] {
        &self.renderers
    }

    pub fn images(&self) -> &[Image] {
        &self.raw
    }

    /// Gaussian pixel-noise log density of the blurred observations given
    /// the blurred renders of `hypothesis`.
    pub fn log_likelihood(&self, hypothesis: &SceneState) -> f64 {
        let s2 = self.pixel_noise_stddev * self.pixel_noise_stddev;
        let log_norm = -0.5 * (2.0 * PI * s2).ln();
        let mut total = 0.0;
        for (renderer, observed) in self.renderers.iter().zip(&self.blurred) {
            let rendered = gaussian_blur(&renderer.render(hypothesis), self.blur_width);
            let sq: f64 = rendered.pixels().iter().zip(observed.pixels()).map(|(a, b)| (a - b) * (a - b)).sum();
            total += observed.pixels().len() as f64 * log_norm - 0.5 * sq / s2;
        }
        total
    }
}

/// Convenience wrapper building an [`Observation`] for a single evaluation.
pub fn log_likelihood(
    hypothesis: &SceneState,
    observed: &[Image; 3],
    cameras: &[Camera; 3],
    config: &MhConfig,
) -> Result<f64, VisionError> {
    Ok(Observation::new(observed, cameras, config)?.log_likelihood(hypothesis))
}

fn log_normal(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// Log prior: uniform block count (when inferred), Gaussian root position,
/// and Gaussian per-level offsets at the calibrated stddev for the count.
pub fn log_prior(scene: &SceneState, config: &MhConfig) -> Result<f64, VisionError> {
    let n = scene.len();
    let in_range = if config.infer_block_count {
        (config.min_blocks..=config.max_blocks).contains(&n)
    } else {
        n == config.n_blocks
    };
    if !in_range {
        return Ok(f64::NEG_INFINITY);
    }
    let mut lp = if config.infer_block_count {
        -((config.max_blocks - config.min_blocks + 1) as f64).ln()
    } else {
        0.0
    };
    let sigma = calibrated_stddev(n)?;
    let root = scene.blocks[0].horizontal();
    lp += log_normal(root.x, config.root_prior_stddev) + log_normal(root.y, config.root_prior_stddev);
    for pair in scene.blocks.windows(2) {
        let d = pair[1].horizontal() - pair[0].horizontal();
        lp += log_normal(d.x, sigma) + log_normal(d.y, sigma);
    }
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Walk,
    Birth,
    Death,
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    /// `None` when the move would leave the allowed block-count range.
    pub state: Option<SceneState>,
    /// log q(current | proposed) - log q(proposed | current).
    pub log_ratio: f64,
}

fn horizontals(scene: &SceneState) -> Vec<Vector2<f64>> {
    scene.blocks.iter().map(|b| b.horizontal()).collect()
}

/// Draws one proposal.
///
/// A walk shifts one uniformly chosen block. A birth puts a new top block
/// at the current top's position plus Gaussian noise u; its death
/// counterpart removes the top block. The births and deaths are chosen with
/// equal probability, so the ratio reduces to the density of u:
/// -log q(u) for a birth, +log q(u) for a death.
pub fn propose<R: Rng + ?Sized>(current: &SceneState, config: &MhConfig, rng: &mut R) -> Proposal {
    let sd = config.proposal_stddev_xy;
    let mut xy = horizontals(current);
    let count_move = config.infer_block_count && rng.gen::<f64>() < config.block_count_move_prob;
    if !count_move {
        let i = rng.gen_range(0..xy.len());
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        xy[i] += Vector2::new(dx, dy) * sd;
        return Proposal { kind: MoveKind::Walk, state: Some(SceneState::stacked(&xy)), log_ratio: 0.0 };
    }
    let log_q = |u: Vector2<f64>| log_normal(u.x, sd) + log_normal(u.y, sd);
    if rng.gen::<bool>() {
        if xy.len() >= config.max_blocks {
            return Proposal { kind: MoveKind::Birth, state: None, log_ratio: 0.0 };
        }
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        let u = Vector2::new(dx, dy) * sd;
        let top = *xy.last().expect("scenes are non-empty");
        xy.push(top + u);
        Proposal { kind: MoveKind::Birth, state: Some(SceneState::stacked(&xy)), log_ratio: -log_q(u) }
    } else {
        if xy.len() <= config.min_blocks {
            return Proposal { kind: MoveKind::Death, state: None, log_ratio: 0.0 };
        }
        let removed = xy.pop().expect("scenes are non-empty");
        let u = removed - xy[xy.len() - 1];
        Proposal { kind: MoveKind::Death, state: Some(SceneState::stacked(&xy)), log_ratio: log_q(u) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render_triplet, sample_camera, triplet_cameras, CameraDistribution};
    use crate::scene::{generate_scene, GenParams, FOUR_BLOCK_STDDEV};
    use crate::seed::rng_from_seed;

    fn setup(seed: u64) -> (SceneState, [Image; 3], [Camera; 3], MhConfig) {
        let scene = generate_scene(&GenParams::new(4, FOUR_BLOCK_STDDEV, seed).unwrap());
        let cam = sample_camera(&scene, &CameraDistribution::default(), seed).unwrap();
        let cfg = MhConfig::default();
        (scene.clone(), render_triplet(&scene, &cam, &cfg.render), triplet_cameras(&cam), cfg)
    }

    #[test]
    fn truth_maximizes_likelihood() {
        let (scene, images, cams, cfg) = setup(1);
        let obs = Observation::new(&images, &cams, &cfg).unwrap();
        let truth = obs.log_likelihood(&scene);
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let other = propose(&scene, &cfg, &mut rng).state.unwrap();
            assert!(obs.log_likelihood(&other) <= truth);
        }
        let shifted = scene.translated(Vector2::new(1.0, 0.0));
        assert!(obs.log_likelihood(&shifted) < truth);
        assert_eq!(obs.log_likelihood(&shifted), obs.log_likelihood(&shifted));
        // noiseless truth leaves only the normalizing constant
        let n = 3.0 * 64.0 * 64.0;
        let expected = -0.5 * n * (2.0 * PI * 0.01f64).ln();
        assert!((truth - expected).abs() < 1e-6 * expected.abs());
    }

    #[test]
    fn free_function_agrees_with_cached_observation() {
        let (scene, images, cams, cfg) = setup(2);
        let obs = Observation::new(&images, &cams, &cfg).unwrap();
        let shifted = scene.translated(Vector2::new(0.3, -0.2));
        assert_eq!(log_likelihood(&shifted, &images, &cams, &cfg).unwrap(), obs.log_likelihood(&shifted));
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let (_, images, cams, cfg) = setup(3);
        let big = MhConfig { render: RenderConfig::with_resolution(128), ..cfg };
        assert!(matches!(Observation::new(&images, &cams, &big), Err(VisionError::Resolution { .. })));
    }

    #[test]
    fn prior_matches_generative_density() {
        let cfg = MhConfig::default();
        let sigma = calibrated_stddev(4).unwrap();
        let xy = [Vector2::new(0.1, 0.0), Vector2::new(0.3, -0.1), Vector2::new(0.2, 0.0), Vector2::new(0.0, 0.2)];
        let lp = log_prior(&SceneState::stacked(&xy), &cfg).unwrap();
        let mut expected = log_normal(0.1, 1.0) + log_normal(0.0, 1.0);
        for w in xy.windows(2) {
            expected += log_normal(w[1].x - w[0].x, sigma) + log_normal(w[1].y - w[0].y, sigma);
        }
        assert!((lp - expected).abs() < 1e-12);
        assert_eq!(log_prior(&SceneState::aligned(3, Vector2::zeros()), &cfg).unwrap(), f64::NEG_INFINITY);
        let counted = MhConfig { infer_block_count: true, ..cfg };
        let with_count = log_prior(&SceneState::stacked(&xy), &counted).unwrap();
        assert!((with_count - (expected - 5f64.ln())).abs() < 1e-12);
        assert_eq!(log_prior(&SceneState::aligned(7, Vector2::zeros()), &counted).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn walk_only_when_count_moves_disabled() {
        let cfg = MhConfig { infer_block_count: true, block_count_move_prob: 0.0, ..MhConfig::default() };
        let s = SceneState::aligned(4, Vector2::zeros());
        let mut rng = rng_from_seed(5);
        for _ in 0..1000 {
            let p = propose(&s, &cfg, &mut rng);
            assert_eq!((p.kind, p.log_ratio), (MoveKind::Walk, 0.0));
            let next = p.state.unwrap();
            let moved = s.blocks.iter().zip(&next.blocks).filter(|(a, b)| a.center != b.center).count();
            assert_eq!(moved, 1);
        }
    }

    #[test]
    fn birth_then_death_restores_state() {
        let cfg = MhConfig { infer_block_count: true, block_count_move_prob: 1.0, ..MhConfig::default() };
        let s = SceneState::stacked(&[Vector2::new(0.0, 0.0), Vector2::new(0.2, 0.1), Vector2::new(0.1, 0.3)]);
        let mut rng = rng_from_seed(6);
        let birth = loop {
            let p = propose(&s, &cfg, &mut rng);
            if p.kind == MoveKind::Birth {
                break p;
            }
        };
        let grown = birth.state.unwrap();
        let death = loop {
            let p = propose(&grown, &cfg, &mut rng);
            if p.kind == MoveKind::Death {
                break p;
            }
        };
        assert_eq!(death.state.unwrap(), s);
        assert!((birth.log_ratio + death.log_ratio).abs() < 1e-12);
    }

    #[test]
    fn count_range_is_enforced() {
        let cfg = MhConfig { infer_block_count: true, block_count_move_prob: 1.0, ..MhConfig::default() };
        let mut rng = rng_from_seed(7);
        for _ in 0..200 {
            let p = propose(&SceneState::aligned(2, Vector2::zeros()), &cfg, &mut rng);
            assert!(p.kind != MoveKind::Death || p.state.is_none());
            let p = propose(&SceneState::aligned(6, Vector2::zeros()), &cfg, &mut rng);
            assert!(p.kind != MoveKind::Birth || p.state.is_none());
        }
    }

    #[test]
    fn move_mix_matches_configuration() {
        let cfg = MhConfig { infer_block_count: true, block_count_move_prob: 0.3, ..MhConfig::default() };
        let s = SceneState::aligned(4, Vector2::zeros());
        let mut rng = rng_from_seed(8);
        let n = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(propose(&s, &cfg, &mut rng).kind).or_insert(0usize) += 1;
        }
        let frac = |k| counts.get(&k).copied().unwrap_or(0) as f64 / n as f64;
        assert!((frac(MoveKind::Walk) - 0.7).abs() < 0.02);
        assert!((frac(MoveKind::Birth) - 0.15).abs() < 0.02);
        assert!((frac(MoveKind::Death) - 0.15).abs() < 0.02);
    }

    #[test]
    fn config_validation() {
        assert!(MhConfig::default().validate().is_ok());
        assert!(MhConfig { burn_in: 5000, ..MhConfig::default() }.validate().is_err());
        assert!(MhConfig { block_count_move_prob: 1.5, ..MhConfig::default() }.validate().is_err());
        assert!(MhConfig { n_blocks: 7, ..MhConfig::default() }.validate().is_err());
    }
}
