//! The intuitive physics engine: a stability judgment from an ensemble of
//! noisy, perturbed simulations of an estimated scene.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate_scene, PerturbationSchedule, SimConfig, SimError, SimOutcome};
use crate::scene::SceneState;
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpeParams {
    /// Per-axis stddev of the horizontal state noise, meters.
    pub sigma: f64,
    /// Perturbation magnitude, Newtons.
    pub phi: f64,
    pub n_sims: usize,
    pub force_per_block: f64,
    pub decision_threshold: f64,
    pub moved_threshold: f64,
}

impl Default for IpeParams {
    fn default() -> Self {
        Self { sigma: 0.1, phi: 40.0, n_sims: 20, force_per_block: 10.0, decision_threshold: 0.5, moved_threshold: 0.2 }
    }
}

impl IpeParams {
    pub fn with_noise(sigma: f64, phi: f64) -> Self {
        Self { sigma, phi, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IpeError> {
        let bad = |m: &str| Err(IpeError::InvalidParams(m.to_string()));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be >= 0");
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return bad("phi must be >= 0");
        }
        if self.n_sims == 0 {
            return bad("n_sims must be >= 1");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie in (0, 1)");
        }
        if !(self.moved_threshold >= 0.0) {
            return bad("moved_threshold must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IpeError {
    #[error("invalid IPE parameters: {0}")]
    InvalidParams(String),
    #[error("posterior sample set is empty")]
    NoSamples,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// What the ensemble simulates: one scene estimate, or posterior samples of
/// which each simulation draws one uniformly.
#[derive(Debug, Clone, Copy)]
pub enum SceneSource<'a> {
    State(&'a SceneState),
    Samples(&'a [SceneState]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpePrediction {
    pub p_fall: f64,
    /// Mean fraction of blocks that moved more than the moved threshold.
    pub graded_response: f64,
    pub outcomes: Vec<SimOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityLabel {
    Stable,
    Unstable,
}

impl StabilityLabel {
    pub fn from_stable(stable: bool) -> Self {
        if stable {
            Self::Stable
        } else {
            Self::Unstable
        }
    }
}

impl fmt::Display for StabilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
        })
    }
}

impl FromStr for StabilityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(Self::Stable),
            "unstable" => Ok(Self::Unstable),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Seed of the `k`-th ensemble member. Independent of sigma and phi, so
/// different noise settings reuse the same underlying draws.
pub fn member_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, stream::SIM, k as u64)
}

/// Runs the noisy simulation ensemble.
pub fn ipe_predict(
    source: SceneSource<'_>,
    params: &IpeParams,
    sim_config: &SimConfig,
    seed: u64,
) -> Result<IpePrediction, IpeError> {
    params.validate()?;
    sim_config.validate()?;
    if let SceneSource::Samples(s) = source {
        if s.is_empty() {
            return Err(IpeError::NoSamples);
        }
    }
    let outcomes = (0..params.n_sims)
        .into_par_iter()
        .map(|k| {
            let sub = member_seed(seed, k);
            let scene = match source {
                SceneSource::State(s) => s,
                SceneSource::Samples(samples) => {
                    &samples[rng_from_seed(derive_seed(sub, stream::SCENE, 0)).gen_range(0..samples.len())]
                }
            };
            let perturbation =
                PerturbationSchedule::random(params.phi, &mut rng_from_seed(derive_seed(sub, stream::PERTURB, 0)));
            simulate_scene(scene, sim_config, &perturbation, params.sigma, sub)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = outcomes.len() as f64;
    let p_fall = outcomes.iter().filter(|o| o.fell).count() as f64 / n;
    let graded_response = outcomes
        .iter()
        .map(|o| o.blocks_moved(params.moved_threshold) as f64 / o.per_block_displacement.len() as f64)
        .sum::<f64>()
        / n;
    Ok(IpePrediction { p_fall, graded_response, outcomes })
}

/// Unstable when p_fall reaches the decision threshold (ties count as unstable).
pub fn ipe_classify(pred: &IpePrediction, params: &IpeParams) -> StabilityLabel {
    if pred.p_fall >= params.decision_threshold {
        StabilityLabel::Unstable
    } else {
        StabilityLabel::Stable
    }
}

/// Perturbation magnitude for a stack of `n_blocks`.
pub fn scale_phi(n_blocks: usize, params: &IpeParams) -> f64 {
    params.force_per_block * n_blocks as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("bad prediction record: {0}")]
pub struct RecordParseError(pub String);

/// One prediction as a tab-separated line.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub sigma: f64,
    pub phi: f64,
    pub p_fall: f64,
    pub graded_response: f64,
    pub label: StabilityLabel,
}

impl PredictionRecord {
    pub const HEADER: &'static str = "scene_id\tsigma\tphi\tp_fall\tgraded_response\tlabel";

    pub fn new(scene_id: impl Into<String>, params: &IpeParams, pred: &IpePrediction) -> Self {
        Self {
            scene_id: scene_id.into(),
            sigma: params.sigma,
            phi: params.phi,
            p_fall: pred.p_fall,
            graded_response: pred.graded_response,
            label: ipe_classify(pred, params),
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.scene_id, self.sigma, self.phi, self.p_fall, self.graded_response, self.label
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, RecordParseError> {
        let err = |m: String| RecordParseError(m);
        let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split('\t').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        if fields[0].is_empty() {
            return Err(err("empty scene id".into()));
        }
        let num = |i: usize, name: &str| -> Result<f64, RecordParseError> {
            let v: f64 = fields[i].parse().map_err(|_| err(format!("{name} is not a number: {:?}", fields[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("{name} is not finite")))
            }
        };
        let record = Self {
            scene_id: fields[0].to_string(),
            sigma: num(1, "sigma")?,
            phi: num(2, "phi")?,
            p_fall: num(3, "p_fall")?,
            graded_response: num(4, "graded_response")?,
            label: fields[5].parse().map_err(err)?,
        };
        if !(0.0..=1.0).contains(&record.p_fall) || !(0.0..=1.0).contains(&record.graded_response) {
            return Err(err("p_fall and graded_response must lie in [0, 1]".into()));
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector2;
    use proptest::prelude::*;

    use super::*;
    use crate::scene::{analytic_stability, generate_scene, GenParams, FOUR_BLOCK_STDDEV};

    fn scene(seed: u64) -> SceneState {
        generate_scene(&GenParams::new(4, FOUR_BLOCK_STDDEV, seed).unwrap())
    }

    #[test]
    fn aligned_stack_never_falls_without_noise() {
        let s = SceneState::aligned(4, Vector2::zeros());
        let pred = ipe_predict(SceneSource::State(&s), &IpeParams::with_noise(0.0, 0.0), &SimConfig::default(), 1).unwrap();
        assert_eq!(pred.p_fall, 0.0);
        assert_eq!(pred.graded_response, 0.0);
        assert_eq!(pred.outcomes.len(), 20);
        assert_eq!(ipe_classify(&pred, &IpeParams::default()), StabilityLabel::Stable);
    }

    #[test]
    fn classification_thresholds() {
        let p = IpeParams::default();
        let pred = |p_fall| IpePrediction { p_fall, graded_response: 0.0, outcomes: vec![] };
        assert_eq!(ipe_classify(&pred(0.0), &p), StabilityLabel::Stable);
        assert_eq!(ipe_classify(&pred(1.0), &p), StabilityLabel::Unstable);
        assert_eq!(ipe_classify(&pred(10.0 / 20.0), &p), StabilityLabel::Unstable);
        assert_eq!(ipe_classify(&pred(9.0 / 20.0), &p), StabilityLabel::Stable);
    }

    #[test]
    fn phi_scales_with_block_count() {
        let p = IpeParams::default();
        assert_eq!(scale_phi(4, &p), 40.0);
        assert_eq!(scale_phi(3, &p), 30.0);
        assert_eq!(scale_phi(5, &p), 50.0);
    }

    #[test]
    fn prediction_invariants_and_determinism() {
        let s = scene(3);
        let p = IpeParams::default();
        let a = ipe_predict(SceneSource::State(&s), &p, &SimConfig::default(), 9).unwrap();
        let b = ipe_predict(SceneSource::State(&s), &p, &SimConfig::default(), 9).unwrap();
        assert_eq!(a, b);
        let falls = a.outcomes.iter().filter(|o| o.fell).count() as f64;
        assert_eq!(a.p_fall, falls / 20.0);
        let graded = a.outcomes.iter().map(|o| o.blocks_moved(0.2) as f64 / 4.0).sum::<f64>() / 20.0;
        assert!((a.graded_response - graded).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&a.graded_response));
    }

    #[test]
    fn members_use_fresh_noise() {
        let s = scene(4);
        let pred = ipe_predict(SceneSource::State(&s), &IpeParams::with_noise(0.1, 0.0), &SimConfig::default(), 2).unwrap();
        let drops: std::collections::HashSet<u64> = pred.outcomes.iter().map(|o| o.top_block_z_drop.to_bits()).collect();
        assert!(drops.len() > 10);
    }

    #[test]
    fn sample_mode_draws_from_the_posterior_set() {
        let stable = SceneState::aligned(4, Vector2::zeros());
        let toppling = SceneState::stacked(&[Vector2::zeros(), Vector2::new(0.9, 0.0)]);
        let samples = vec![stable, toppling];
        let pred =
            ipe_predict(SceneSource::Samples(&samples), &IpeParams::with_noise(0.0, 0.0), &SimConfig::default(), 5).unwrap();
        let two_block = pred.outcomes.iter().filter(|o| o.per_block_displacement.len() == 2).count();
        assert!(two_block > 2 && two_block < 18, "{two_block}");
        assert_eq!(pred.p_fall, two_block as f64 / 20.0);
        assert!(matches!(
            ipe_predict(SceneSource::Samples(&[]), &IpeParams::default(), &SimConfig::default(), 5),
            Err(IpeError::NoSamples)
        ));
    }

    #[test]
    fn agrees_with_oracle_without_noise() {
        let p = IpeParams { n_sims: 1, ..IpeParams::with_noise(0.0, 0.0) };
        let n = 1000;
        let correct = (0..n)
            .filter(|&i| {
                let s = scene(derive_seed(12, stream::TEST, i));
                let truth = StabilityLabel::from_stable(analytic_stability(&s).unwrap().stable);
                let pred = ipe_predict(SceneSource::State(&s), &p, &SimConfig::default(), i).unwrap();
                ipe_classify(&pred, &p) == truth
            })
            .count();
        assert!(correct as f64 / n as f64 >= 0.95, "{correct}/{n}");
    }

    #[test]
    fn fall_probability_grows_with_noise_on_stable_scenes() {
        let stable: Vec<SceneState> = (0..200)
            .map(|i| scene(derive_seed(13, stream::TEST, i)))
            .filter(|s| analytic_stability(s).unwrap().stable)
            .take(40)
            .collect();
        let mean_p = |sigma: f64, phi: f64| {
            let p = IpeParams::with_noise(sigma, phi);
            stable
                .iter()
                .enumerate()
                .map(|(i, s)| ipe_predict(SceneSource::State(s), &p, &SimConfig::default(), i as u64).unwrap().p_fall)
                .sum::<f64>()
                / stable.len() as f64
        };
        let by_sigma: Vec<f64> = [0.0, 0.05, 0.1, 0.15, 0.2].iter().map(|&s| mean_p(s, 40.0)).collect();
        assert!(by_sigma.windows(2).all(|w| w[1] >= w[0]), "{by_sigma:?}");
        let by_phi: Vec<f64> = [0.0, 35.0, 40.0, 45.0, 50.0].iter().map(|&f| mean_p(0.1, f)).collect();
        assert!(by_phi.windows(2).all(|w| w[1] >= w[0]), "{by_phi:?}");
    }

    #[test]
    fn invalid_params_rejected() {
        let s = scene(1);
        for p in [
            IpeParams { n_sims: 0, ..IpeParams::default() },
            IpeParams { sigma: -0.1, ..IpeParams::default() },
            IpeParams { decision_threshold: 1.0, ..IpeParams::default() },
        ] {
            assert!(matches!(
                ipe_predict(SceneSource::State(&s), &p, &SimConfig::default(), 1),
                Err(IpeError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn record_line_shape() {
        let r = PredictionRecord {
            scene_id: "test-00007".into(),
            sigma: 0.1,
            phi: 40.0,
            p_fall: 0.35,
            graded_response: 0.125,
            label: StabilityLabel::Stable,
        };
        assert_eq!(r.to_line(), "test-00007\t0.1\t40\t0.35\t0.125\tstable");
        assert_eq!(PredictionRecord::parse_line(&r.to_line()).unwrap(), r);
    }

    #[test]
    fn malformed_records_rejected() {
        for bad in [
            "",
            "a\t0.1\t40\t0.5\t0.5",
            "a\t0.1\t40\t0.5\t0.5\tmaybe",
            "a\tx\t40\t0.5\t0.5\tstable",
            "a\t0.1\t40\t1.5\t0.5\tstable",
            "a\t0.1\tNaN\t0.5\t0.5\tstable",
            "\t0.1\t40\t0.5\t0.5\tstable",
        ] {
            assert!(PredictionRecord::parse_line(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn record_round_trip(id in "[a-z0-9_-]{1,12}", sigma in 0.0f64..1.0, phi in 0.0f64..100.0,
                             p in 0.0f64..=1.0, g in 0.0f64..=1.0, unstable: bool) {
            let r = PredictionRecord {
                scene_id: id, sigma, phi, p_fall: p, graded_response: g,
                label: StabilityLabel::from_stable(!unstable),
            };
            prop_assert_eq!(PredictionRecord::parse_line(&r.to_line()).unwrap(), r);
        }
    }
}
