//! Rendered image datasets for the convolutional baseline.
//!
//! Layout of an output directory:
//!
//! - `scenes.jsonl`: one scene record per line
//! - `cameras.jsonl`: the camera of each scene, same line order
//! - `images/<scene_id>.pgm`: one binary graymap per scene
//! - `index.tsv`: image path, scene id, scene line, split, block count, label

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use blocksim_core::ipe::StabilityLabel;
use blocksim_core::render::{render_scene, sample_camera, CameraDistribution, RenderConfig};
use blocksim_core::scene::{calibrated_stddev, generate_scene, GenParams, SceneRecord};
use blocksim_core::seed::{derive_seed, stream};
use rayon::prelude::*;

use crate::{create_dir, test_scene_seed, train_scene_seed, write_file, HarnessError, Result};

/// Scenes rendered per parallel batch; bounds memory on large datasets.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_blocks: usize,
    pub resolution: usize,
    pub seed: u64,
    pub cameras: CameraDistribution,
}

impl DatasetConfig {
    pub fn new(n_train: usize, n_test: usize, n_blocks: usize, resolution: usize, seed: u64) -> Self {
        Self { n_train, n_test, n_blocks, resolution, seed, cameras: CameraDistribution::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train + self.n_test == 0 {
            return Err(HarnessError::Config("dataset needs at least one scene".into()));
        }
        RenderConfig::with_resolution(self.resolution).validate()?;
        GenParams::new(self.n_blocks, 0.0, 0)?;
        Ok(())
    }
}

/// One row of `index.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    /// Image path relative to the dataset directory.
    pub image: String,
    pub scene_id: String,
    /// Zero-based line of the scene in `scenes.jsonl`.
    pub scene_line: usize,
    pub split: Split,
    pub n_blocks: usize,
    pub label: StabilityLabel,
}

impl IndexEntry {
    pub const HEADER: &'static str = "image\tscene_id\tscene_line\tsplit\tn_blocks\tlabel";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.image, self.scene_id, self.scene_line, self.split, self.n_blocks, self.label
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.trim_end_matches(['\n', '\r']).split('\t').collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        if f[0].is_empty() || f[1].is_empty() {
            return Err("empty image path or scene id".into());
        }
        Ok(Self {
            image: f[0].to_string(),
            scene_id: f[1].to_string(),
            scene_line: f[2].parse().map_err(|_| format!("bad scene_line {:?}", f[2]))?,
            split: f[3].parse()?,
            n_blocks: f[4].parse().map_err(|_| format!("bad n_blocks {:?}", f[4]))?,
            label: f[5].parse().map_err(|_| format!("bad label {:?}", f[5]))?,
        })
    }
}

/// Parses a whole index file, header included.
pub fn parse_index(text: &str) -> Result<Vec<IndexEntry>> {
    let err = |line: usize, reason: String| HarnessError::Parse { path: "index.tsv".into(), line, reason };
    let mut lines = text.lines();
    if lines.next() != Some(IndexEntry::HEADER) {
        return Err(err(1, "missing header".into()));
    }
    lines.enumerate().map(|(i, l)| IndexEntry::parse_line(l).map_err(|r| err(i + 2, r))).collect()
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>> {
    let path = dir.join("index.tsv");
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    parse_index(&text)
}

/// Files written so far; removed again if generation fails.
struct Created {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Created {
    fn dir(&mut self, path: PathBuf) -> Result<()> {
        if !path.exists() {
            create_dir(&path)?;
            self.dirs.push(path);
        }
        Ok(())
    }

    fn file(&mut self, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
        self.files.push(path.clone());
        write_file(&path, contents)
    }

    fn remove(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

/// Summary of an emitted dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub entries: Vec<IndexEntry>,
    pub stable_fraction: f64,
}

/// Generates, renders and labels `n_train + n_test` scenes into `out_dir`.
/// Train and test scenes come from disjoint seed namespaces. On failure every
/// file written by this call is removed.
pub fn gen_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<DatasetSummary> {
    config.validate()?;
    let mut created = Created { files: Vec::new(), dirs: Vec::new() };
    match emit(config, out_dir, &mut created) {
        Ok(summary) => Ok(summary),
        Err(e) => {
            created.remove();
            Err(e)
        }
    }
}

fn emit(config: &DatasetConfig, out_dir: &Path, created: &mut Created) -> Result<DatasetSummary> {
    created.dir(out_dir.to_path_buf())?;
    created.dir(out_dir.join("images"))?;
    let stddev = calibrated_stddev(config.n_blocks)?;
    let render = RenderConfig::with_resolution(config.resolution);
    let jobs: Vec<(Split, usize)> = (0..config.n_train)
        .map(|i| (Split::Train, i))
        .chain((0..config.n_test).map(|i| (Split::Test, i)))
        .collect();

    let mut scenes = String::new();
    let mut cameras = String::new();
    let mut entries = Vec::with_capacity(jobs.len());
    for batch in jobs.chunks(BATCH) {
        let rendered = batch
            .par_iter()
            .map(|&(split, i)| {
                let id = format!("{split}-{i:06}");
                let seed = match split {
                    Split::Train => train_scene_seed(config.seed, config.n_blocks, i),
                    Split::Test => test_scene_seed(config.seed, config.n_blocks, i),
                };
                let scene = generate_scene(&GenParams::new(config.n_blocks, stddev, seed)?);
                let record = SceneRecord::from_scene(seed, &scene)?;
                let camera = sample_camera(&scene, &config.cameras, derive_seed(seed, stream::CAMERA, 0))
                    .map_err(|e| HarnessError::from(e).in_scene(&id))?;
                let pgm = render_scene(&scene, &camera, &render).to_pgm();
                let camera_line = serde_json::to_string(&camera).expect("camera serializes");
                Ok((split, id, record, camera_line, pgm))
            })
            .collect::<Result<Vec<_>>>()?;
        for (split, id, record, camera_line, pgm) in rendered {
            let image = format!("images/{id}.pgm");
            created.file(out_dir.join(&image), pgm)?;
            scenes.push_str(&record.to_line());
            scenes.push('\n');
            cameras.push_str(&camera_line);
            cameras.push('\n');
            entries.push(IndexEntry {
                image,
                scene_id: id,
                scene_line: entries.len(),
                split,
                n_blocks: config.n_blocks,
                label: StabilityLabel::from_stable(record.stable),
            });
        }
    }
    let mut index = format!("{}\n", IndexEntry::HEADER);
    for e in &entries {
        index.push_str(&e.to_line());
        index.push('\n');
    }
    created.file(out_dir.join("scenes.jsonl"), scenes)?;
    created.file(out_dir.join("cameras.jsonl"), cameras)?;
    created.file(out_dir.join("index.tsv"), index)?;
    let stable = entries.iter().filter(|e| e.label == StabilityLabel::Stable).count();
    Ok(DatasetSummary { stable_fraction: stable as f64 / entries.len() as f64, entries })
}
