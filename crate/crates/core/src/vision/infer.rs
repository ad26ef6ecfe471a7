use std::collections::BTreeMap;

use log::warn;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{log_prior, metropolis_hastings, propose, MhConfig, Observation, VisionError};
use crate::render::{Camera, Image};
use crate::scene::SceneState;
use crate::seed::rng_from_seed;

/// Gray-level difference from the empty-scene render that marks a pixel as
/// part of the silhouette.
const SILHOUETTE_THRESHOLD: f64 = 0.05;

/// Post-burn-in samples of the scene posterior.
#[derive(Debug, Clone)]
pub struct ScenePosterior {
    pub samples: Vec<(SceneState, f64)>,
    pub acceptance_rate: f64,
    /// Highest-posterior state visited by the chain.
    pub map: (SceneState, f64),
}

impl ScenePosterior {
    pub fn map_state(&self) -> &SceneState {
        &self.map.0
    }

    /// Every `every`-th retained sample.
    pub fn thinned(&self, every: usize) -> Vec<SceneState> {
        self.samples.iter().step_by(every.max(1)).map(|s| s.0.clone()).collect()
    }

    /// Most frequent block count among the samples (smallest on ties).
    pub fn block_count_mode(&self) -> usize {
        let mut counts = BTreeMap::new();
        for (s, _) in &self.samples {
            *counts.entry(s.len()).or_insert(0usize) += 1;
        }
        counts.iter().fold((0, 0), |best, (&n, &c)| if c > best.1 { (n, c) } else { best }).0
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.samples
            .iter()
            .enumerate()
            .map(|(index, (s, lp))| PosteriorLine::new(index, s, *lp).to_line())
            .collect()
    }
}

/// One posterior sample as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorLine {
    pub index: usize,
    pub n_blocks: usize,
    pub centers: Vec<[f64; 3]>,
    pub log_posterior: f64,
}

impl PosteriorLine {
    pub fn new(index: usize, scene: &SceneState, log_posterior: f64) -> Self {
        Self {
            index,
            n_blocks: scene.len(),
            centers: scene.blocks.iter().map(|b| [b.center.x, b.center.y, b.center.z]).collect(),
            log_posterior,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn parse_line(line: &str) -> Result<Self, VisionError> {
        let parsed: Self = serde_json::from_str(line.trim()).map_err(|e| VisionError::Record(e.to_string()))?;
        if parsed.n_blocks != parsed.centers.len() || parsed.n_blocks == 0 {
            return Err(VisionError::Record("n_blocks does not match centers".into()));
        }
        if parsed.centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(VisionError::Record("non-finite center".into()));
        }
        Ok(parsed)
    }

    /// The sample as a stacked scene (heights re-derived from levels).
    pub fn scene(&self) -> SceneState {
        let xy: Vec<Vector2<f64>> = self.centers.iter().map(|c| Vector2::new(c[0], c[1])).collect();
        SceneState::stacked(&xy)
    }
}

/// Least-squares ground-plane intersection of the rays through each view's
/// silhouette centroid; the origin when fewer than two views see anything.
pub fn silhouette_center(observation: &Observation) -> Vector2<f64> {
    let empty = SceneState::new(Vec::new());
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    let mut views = 0;
    for (renderer, image) in observation.renderers().iter().zip(observation.images()) {
        let background = renderer.render(&empty);
        let n = image.width();
        let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
        for (i, (p, q)) in image.pixels().iter().zip(background.pixels()).enumerate() {
            if (p - q).abs() > SILHOUETTE_THRESHOLD {
                sx += (i % n) as f64 + 0.5;
                sy += (i / n) as f64 + 0.5;
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let scale = 2.0 / n as f64;
        let (u, v) = (sx / count as f64 * scale - 1.0, 1.0 - sy / count as f64 * scale);
        let view = renderer.camera().basis();
        let dir = view.ray(u, v).xy();
        if dir.norm() < 1e-9 {
            continue;
        }
        let d = dir.normalize();
        let proj = Matrix2::identity() - d * d.transpose();
        a += proj;
        b += proj * view.eye.xy();
        views += 1;
    }
    if views < 2 {
        return Vector2::zeros();
    }
    a.try_inverse().map_or(Vector2::zeros(), |inv| inv * b)
}

/// Initial state: an aligned stack over the silhouette center.
pub fn initial_state(observation: &Observation, config: &MhConfig) -> SceneState {
    SceneState::aligned(config.n_blocks, silhouette_center(observation))
}

/// Runs the sampler from `init` against an arbitrary log-likelihood.
pub fn infer_with_likelihood(
    init: SceneState,
    config: &MhConfig,
    mut log_likelihood: impl FnMut(&SceneState) -> f64,
) -> Result<ScenePosterior, VisionError> {
    config.validate()?;
    // fail early on counts the prior cannot evaluate
    for n in config.min_blocks..=config.max_blocks {
        crate::scene::calibrated_stddev(n)?;
    }
    let mut rng = rng_from_seed(config.seed);
    let chain = metropolis_hastings(
        init,
        config.steps,
        config.burn_in,
        &mut rng,
        |s| {
            let lp = log_prior(s, config).unwrap_or(f64::NEG_INFINITY);
            if lp == f64::NEG_INFINITY {
                lp
            } else {
                lp + log_likelihood(s)
            }
        },
        |s, r| {
            let p = propose(s, config, r);
            p.state.map(|state| (state, p.log_ratio))
        },
    );
    let acceptance_rate = chain.acceptance_rate();
    if !(0.05..=0.95).contains(&acceptance_rate) {
        warn!("MH acceptance rate {acceptance_rate:.3} outside [0.05, 0.95]; proposals may be poorly tuned");
    }
    if chain.samples.is_empty() {
        return Err(VisionError::EmptyPosterior);
    }
    Ok(ScenePosterior { samples: chain.samples, acceptance_rate, map: chain.best })
}

/// Posterior over scenes given three views from known cameras.
pub fn infer_scene(observed: &[Image; 3], cameras: &[Camera; 3], config: &MhConfig) -> Result<ScenePosterior, VisionError> {
    let observation = Observation::new(observed, cameras, config)?;
    let init = initial_state(&observation, config);
    infer_with_likelihood(init, config, |s| observation.log_likelihood(s))
}
