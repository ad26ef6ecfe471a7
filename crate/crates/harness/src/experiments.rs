//! Experiment pipelines. Each one builds a list of labeled trial scenes, an
//! IPE setting per condition, evaluates every (condition, scene) pair and
//! aggregates the predictions into a [`ResultTable`].
//!
//! Output directory layout:
//!
//! - `scenes.jsonl`: trial scenes in trial order
//! - `truth.tsv`: scene id, scene line, group and true label
//! - `predictions.tsv`: one prediction record per (condition, scene)
//! - `results.tsv`: the aggregated table

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use blocksim_core::dynamics::SimConfig;
use blocksim_core::ipe::{ipe_predict, scale_phi, IpeParams, PredictionRecord, SceneSource, StabilityLabel};
use blocksim_core::render::{render_triplet, sample_camera, triplet_cameras, CameraDistribution};
use blocksim_core::scene::{
    calibrated_stddev, generate_boundary_scene, generate_scene, BoundaryParams, GenParams, SceneRecord, SceneState,
};
use blocksim_core::seed::{derive_seed, stream};
use blocksim_core::vision::{infer_scene, MhConfig};
use log::info;
use rayon::prelude::*;

use crate::metrics::accuracy;
use crate::table::{ResultRow, ResultTable};
use crate::{boundary_scene_seed, create_dir, test_scene_seed, write_file, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    Exp1,
    Exp2Data,
    Exp3,
    Exp4,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2Data => "exp2-data",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exp1" => Ok(Self::Exp1),
            "exp2-data" => Ok(Self::Exp2Data),
            "exp3" => Ok(Self::Exp3),
            "exp4" => Ok(Self::Exp4),
            _ => Err(format!("unknown experiment {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub seed: u64,
    /// Scenes per block count (exp1, exp4) or per level (exp3).
    pub n_scenes: usize,
    pub sigmas: Vec<f64>,
    pub phis: Vec<f64>,
    pub block_counts: Vec<usize>,
    pub levels: Vec<u32>,
    /// Ensemble settings; sigma and phi are overridden per condition.
    pub ipe: IpeParams,
    pub sim: SimConfig,
    /// Estimate scenes by inference from rendered views instead of using
    /// the true states.
    pub vision: bool,
    pub mh: MhConfig,
    pub cameras: CameraDistribution,
    /// Keep every `posterior_thin`-th posterior sample for the ensemble.
    pub posterior_thin: usize,
    pub boundary: BoundaryParams,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    fn base(id: ExperimentId, seed: u64) -> Self {
        Self {
            id,
            seed,
            n_scenes: 1000,
            sigmas: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            phis: vec![0.0, 35.0, 40.0, 45.0, 50.0],
            block_counts: vec![4],
            levels: vec![1, 2, 3, 4],
            ipe: IpeParams::default(),
            sim: SimConfig::default(),
            vision: false,
            mh: MhConfig::default(),
            cameras: CameraDistribution::default(),
            posterior_thin: 100,
            boundary: BoundaryParams::default(),
            out_dir: None,
        }
    }

    /// Noise grid on 4-block stacks.
    pub fn exp1(seed: u64) -> Self {
        Self::base(ExperimentId::Exp1, seed)
    }

    /// Balanced stacks at each visual-instability level, restricted viewpoints.
    pub fn exp3(seed: u64) -> Self {
        Self { n_scenes: 100, cameras: CameraDistribution::restricted(), ..Self::base(ExperimentId::Exp3, seed) }
    }

    /// Transfer across block counts with block-count inference on the vision path.
    pub fn exp4(seed: u64) -> Self {
        Self { n_scenes: 200, block_counts: vec![3, 4, 5], ..Self::base(ExperimentId::Exp4, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.n_scenes == 0 {
            return bad("n_scenes must be > 0");
        }
        let grids_empty = match self.id {
            ExperimentId::Exp1 => self.sigmas.is_empty() || self.phis.is_empty(),
            ExperimentId::Exp3 => self.levels.is_empty(),
            ExperimentId::Exp4 => self.block_counts.is_empty(),
            ExperimentId::Exp2Data => return bad("exp2-data is produced by gen-dataset"),
        };
        if grids_empty {
            return bad("condition grids must be non-empty");
        }
        if self.posterior_thin == 0 {
            return bad("posterior_thin must be > 0");
        }
        for &sigma in &self.sigmas {
            IpeParams { sigma, ..self.ipe }.validate()?;
        }
        for &phi in &self.phis {
            IpeParams { phi, ..self.ipe }.validate()?;
        }
        self.ipe.validate()?;
        self.sim.validate()?;
        if self.vision {
            self.mh.validate()?;
        }
        Ok(())
    }
}

/// A labeled scene under evaluation.
#[derive(Debug, Clone)]
pub struct Trial {
    pub id: String,
    pub group: String,
    pub seed: u64,
    pub scene: SceneState,
    pub record: SceneRecord,
}

impl Trial {
    fn new(id: String, group: String, seed: u64, scene: SceneState) -> Result<Self> {
        let record = SceneRecord::from_scene(seed, &scene)?;
        Ok(Self { id, group, seed, scene, record })
    }

    pub fn truth(&self) -> StabilityLabel {
        StabilityLabel::from_stable(self.record.stable)
    }
}

struct Condition {
    name: String,
    params: IpeParams,
    trials: Range<usize>,
}

fn condition_name(group: &str, params: &IpeParams) -> String {
    format!("{group} sigma={} phi={}", params.sigma, params.phi)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub trials: Vec<Trial>,
    /// Condition-major, scene-id order within a condition.
    pub predictions: Vec<PredictionRecord>,
}

fn stacked_trials(config: &ExperimentConfig, n_blocks: usize) -> Result<Vec<Trial>> {
    let stddev = calibrated_stddev(n_blocks)?;
    (0..config.n_scenes)
        .into_par_iter()
        .map(|i| {
            let seed = test_scene_seed(config.seed, n_blocks, i);
            let scene = generate_scene(&GenParams::new(n_blocks, stddev, seed)?);
            Trial::new(format!("n{n_blocks}-{i:06}"), format!("n_blocks={n_blocks}"), seed, scene)
        })
        .collect()
}

/// Scene estimates handed to the ensemble: the true state, or thinned
/// posterior samples inferred from three rendered views.
fn perceive(trial: &Trial, config: &ExperimentConfig, infer_count: bool) -> Result<Vec<SceneState>> {
    if !config.vision {
        return Ok(vec![trial.scene.clone()]);
    }
    let camera = sample_camera(&trial.scene, &config.cameras, derive_seed(trial.seed, stream::CAMERA, 0))?;
    let images = render_triplet(&trial.scene, &camera, &config.mh.render);
    let mh = MhConfig {
        seed: derive_seed(trial.seed, stream::MH, 0),
        infer_block_count: infer_count,
        n_blocks: if infer_count { config.mh.n_blocks } else { trial.scene.len() },
        ..config.mh.clone()
    };
    let posterior = infer_scene(&images, &triplet_cameras(&camera), &mh)?;
    Ok(posterior.thinned(config.posterior_thin))
}

fn evaluate(
    config: &ExperimentConfig,
    trials: Vec<Trial>,
    conditions: &[Condition],
    infer_count: bool,
) -> Result<ExperimentOutput> {
    let estimates: Vec<Vec<SceneState>> = trials
        .par_iter()
        .map(|t| perceive(t, config, infer_count).map_err(|e| e.in_scene(&t.id)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> =
        conditions.iter().enumerate().flat_map(|(c, cond)| cond.trials.clone().map(move |t| (c, t))).collect();
    let predictions = jobs
        .par_iter()
        .map(|&(c, t)| {
            let trial = &trials[t];
            let params = &conditions[c].params;
            let source = match estimates[t].as_slice() {
                [one] => SceneSource::State(one),
                many => SceneSource::Samples(many),
            };
            let pred = ipe_predict(source, params, &config.sim, trial.seed)
                .map_err(|e| HarnessError::from(e).in_scene(&trial.id))?;
            Ok(PredictionRecord::new(&trial.id, params, &pred))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(conditions.len());
    let mut offset = 0;
    for cond in conditions {
        let n = cond.trials.len();
        let preds = &predictions[offset..offset + n];
        let truths: Vec<StabilityLabel> = trials[cond.trials.clone()].iter().map(Trial::truth).collect();
        rows.push(aggregate(&cond.name, preds, &truths)?);
        info!("{}: accuracy {:.3}", cond.name, rows.last().map_or(0.0, |r: &ResultRow| r.accuracy));
        offset += n;
    }
    let output = ExperimentOutput { table: ResultTable { rows }, trials, predictions };
    if let Some(dir) = &config.out_dir {
        write_output(&output, dir)?;
    }
    Ok(output)
}

fn aggregate(condition: &str, preds: &[PredictionRecord], truths: &[StabilityLabel]) -> Result<ResultRow> {
    let labels: Vec<StabilityLabel> = preds.iter().map(|p| p.label).collect();
    let acc = accuracy(&labels, truths)?;
    let n = preds.len() as f64;
    let mean_p_fall = preds.iter().map(|p| p.p_fall).sum::<f64>() / n;
    let mean_graded = preds.iter().map(|p| p.graded_response).sum::<f64>() / n;
    Ok(ResultRow::new(condition, &acc, mean_p_fall, mean_graded))
}

const TRUTH_HEADER: &str = "scene_id\tscene_line\tgroup\tlabel";

fn write_output(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut scenes = String::new();
    let mut truth = format!("{TRUTH_HEADER}\n");
    for (line, t) in output.trials.iter().enumerate() {
        scenes.push_str(&t.record.to_line());
        scenes.push('\n');
        truth.push_str(&format!("{}\t{line}\t{}\t{}\n", t.id, t.group, t.truth()));
    }
    let mut preds = format!("{}\n", PredictionRecord::HEADER);
    for p in &output.predictions {
        preds.push_str(&p.to_line());
        preds.push('\n');
    }
    write_file(&dir.join("scenes.jsonl"), scenes)?;
    write_file(&dir.join("truth.tsv"), truth)?;
    write_file(&dir.join("predictions.tsv"), preds)?;
    write_file(&dir.join("results.tsv"), output.table.to_tsv())
}

/// Recomputes the result table of an output directory from its truth and
/// prediction files alone.
pub fn audit(dir: &Path) -> Result<ResultTable> {
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))
    };
    let parse_err = |path: &str, line: usize, reason: String| HarnessError::Parse { path: path.into(), line, reason };

    let truth_text = read("truth.tsv")?;
    let mut truth_lines = truth_text.lines();
    if truth_lines.next() != Some(TRUTH_HEADER) {
        return Err(parse_err("truth.tsv", 1, "missing header".into()));
    }
    let mut truths = HashMap::new();
    for (i, line) in truth_lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        let label = (f.len() == 4).then(|| f[3].parse::<StabilityLabel>().ok()).flatten();
        let label = label.ok_or_else(|| parse_err("truth.tsv", i + 2, "malformed row".into()))?;
        truths.insert(f[0].to_string(), (f[2].to_string(), label));
    }

    let pred_text = read("predictions.tsv")?;
    let mut pred_lines = pred_text.lines();
    if pred_lines.next() != Some(PredictionRecord::HEADER) {
        return Err(parse_err("predictions.tsv", 1, "missing header".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<PredictionRecord>, Vec<StabilityLabel>)> = HashMap::new();
    for (i, line) in pred_lines.enumerate() {
        let rec = PredictionRecord::parse_line(line)?;
        let (group, label) = truths
            .get(&rec.scene_id)
            .ok_or_else(|| parse_err("predictions.tsv", i + 2, format!("unknown scene {}", rec.scene_id)))?;
        let name = condition_name(group, &IpeParams { sigma: rec.sigma, phi: rec.phi, ..IpeParams::default() });
        let entry = groups.entry(name.clone()).or_insert_with(|| {
            order.push(name);
            (Vec::new(), Vec::new())
        });
        entry.0.push(rec);
        entry.1.push(*label);
    }
    let rows = order
        .iter()
        .map(|name| {
            let (preds, truths) = &groups[name];
            aggregate(name, preds, truths)
        })
        .collect::<Result<_>>()?;
    Ok(ResultTable { rows })
}

/// Accuracy over the sigma x phi grid on 4-block stacks. Row order is
/// sigma-major.
pub fn run_exp1(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let trials = stacked_trials(config, 4)?;
    let all = 0..trials.len();
    let conditions: Vec<Condition> = config
        .sigmas
        .iter()
        .flat_map(|&sigma| config.phis.iter().map(move |&phi| (sigma, phi)))
        .map(|(sigma, phi)| {
            let params = IpeParams { sigma, phi, ..config.ipe };
            Condition { name: condition_name("n_blocks=4", &params), params, trials: all.clone() }
        })
        .collect();
    evaluate(config, trials, &conditions, false)
}

/// Balanced stacks binned by visual-instability level, judged at the
/// configured sigma and phi.
pub fn run_exp3(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut trials = Vec::new();
    let mut conditions = Vec::new();
    for &level in &config.levels {
        let start = trials.len();
        let batch = (0..config.n_scenes)
            .into_par_iter()
            .map(|i| {
                let id = format!("level{level}-{i:06}");
                let seed = boundary_scene_seed(config.seed, level, i);
                let scene = generate_boundary_scene(level, true, seed, &config.boundary)
                    .map_err(|e| HarnessError::from(e).in_scene(&id))?;
                Trial::new(id, format!("level={level}"), seed, scene)
            })
            .collect::<Result<Vec<_>>>()?;
        trials.extend(batch);
        let group = format!("level={level}");
        conditions.push(Condition {
            name: condition_name(&group, &config.ipe),
            params: config.ipe,
            trials: start..trials.len(),
        });
    }
    evaluate(config, trials, &conditions, false)
}

/// Stacks of each block count, each judged with the perturbation scaled by
/// its block count. The vision path also infers the block count.
pub fn run_exp4(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut trials = Vec::new();
    let mut conditions = Vec::new();
    for &n in &config.block_counts {
        let start = trials.len();
        trials.extend(stacked_trials(config, n)?);
        let params = IpeParams { phi: scale_phi(n, &config.ipe), ..config.ipe };
        conditions.push(Condition {
            name: condition_name(&format!("n_blocks={n}"), &params),
            params,
            trials: start..trials.len(),
        });
    }
    evaluate(config, trials, &conditions, true)
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match config.id {
        ExperimentId::Exp1 => run_exp1(config),
        ExperimentId::Exp3 => run_exp3(config),
        ExperimentId::Exp4 => run_exp4(config),
        ExperimentId::Exp2Data => Err(HarnessError::Config("exp2-data is produced by gen-dataset".into())),
    }
}
