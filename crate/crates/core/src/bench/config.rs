use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::augment::AugmentPolicy;
use crate::ingest::SynthSceneConfig;
use crate::raster::VoxelizationConfig;
use crate::segmentor::SegmentorConfig;
use crate::sparse::{Dataflow, ExecMode};
use crate::tta::TtaConfig;
use crate::{Error, Result};

/// Complete run configuration, read from TOML. Relative paths in the
/// `dataset` section resolve against the config file's directory; the
/// checkpoint path resolves against `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Drives model initialisation, augmentation and workload features;
    /// overrides `segmentor.seed`.
    pub seed: u64,
    pub threads: ExecMode,
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub segmentor: SegmentorConfig,
    /// Training augmentation; absent means none.
    pub augment: Option<AugmentPolicy>,
    pub tta: TtaConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: ExecMode::Serial,
            out_dir: PathBuf::from("runs"),
            dataset: DatasetConfig::default(),
            segmentor: SegmentorConfig::default(),
            augment: None,
            tta: TtaConfig::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            bench: BenchSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Train scene `i` uses seed `scene.seed + i`; held-out scene `j` uses
    /// `scene.seed + train_scenes + j`.
    Synthetic {
        #[serde(default)]
        scene: SynthSceneConfig,
        #[serde(default = "default_train_scenes")]
        train_scenes: usize,
        #[serde(default = "default_eval_scenes")]
        eval_scenes: usize,
    },
    /// SemanticKITTI-layout directory.
    Kitti {
        root: PathBuf,
        remap: PathBuf,
        train_sequences: Vec<String>,
        eval_sequences: Vec<String>,
        /// Per-sequence cap on the number of scans loaded.
        #[serde(default)]
        max_scans: Option<usize>,
    },
}

fn default_train_scenes() -> usize {
    4
}

fn default_eval_scenes() -> usize {
    2
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            scene: SynthSceneConfig::default(),
            train_scenes: default_train_scenes(),
            eval_scenes: default_eval_scenes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    /// Relative to `out_dir`.
    pub checkpoint: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 200,
            batch_size: 1,
            checkpoint: PathBuf::from("model.ckpt"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Defaults to the training checkpoint.
    pub checkpoint: Option<PathBuf>,
    /// Use the `[tta]` variants instead of a single forward pass.
    pub use_tta: bool,
}

/// `"auto"` or an explicit list of dataflow names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataflowSelection {
    Auto,
    List(Vec<Dataflow>),
}

impl Serialize for DataflowSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DataflowSelection::Auto => s.serialize_str("auto"),
            DataflowSelection::List(l) => l.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for DataflowSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            List(Vec<Dataflow>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(n) if n == "auto" => Ok(DataflowSelection::Auto),
            Raw::Name(n) => n
                .parse()
                .map(|f| DataflowSelection::List(vec![f]))
                .map_err(serde::de::Error::custom),
            Raw::List(l) => Ok(DataflowSelection::List(l)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub dataflows: DataflowSelection,
    pub repeats: usize,
    pub kernel_size: u32,
    pub stride: u32,
    pub submanifold: bool,
    pub c_in: usize,
    pub c_out: usize,
    /// Workload voxelization; defaults to the segmentor's.
    pub voxel: Option<VoxelizationConfig>,
    /// Training steps timed for the steps-per-second figure.
    pub train_steps: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            dataflows: DataflowSelection::List(Dataflow::ALL.to_vec()),
            repeats: 5,
            kernel_size: 3,
            stride: 1,
            submanifold: true,
            c_in: 16,
            c_out: 16,
            voxel: None,
            train_steps: 3,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file and resolves its relative dataset paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DatasetConfig::Kitti { root, remap, .. } = &mut cfg.dataset {
            *root = base.join(&*root);
            *remap = base.join(&*remap);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    /// The segmentor config with the run seed and thread mode applied.
    pub fn segmentor_config(&self) -> SegmentorConfig {
        SegmentorConfig {
            seed: self.seed,
            exec: self.threads,
            ..self.segmentor.clone()
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join(&self.train.checkpoint)
    }

    pub fn eval_checkpoint_path(&self) -> PathBuf {
        match &self.eval.checkpoint {
            Some(p) => self.out_dir.join(p),
            None => self.checkpoint_path(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentor_config().validate()?;
        if let Some(p) = &self.augment {
            p.validate()?;
        }
        self.tta.validate()?;
        if self.bench.repeats < 1 {
            return Err(Error::Config("bench.repeats must be at least 1".into()));
        }
        if self.train.batch_size < 1 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if let Some(v) = &self.bench.voxel {
            v.validate()?;
        }
        match &self.dataset {
            DatasetConfig::Synthetic { train_scenes, .. } if *train_scenes == 0 => {
                Err(Error::Config("dataset.train_scenes must be at least 1".into()))
            }
            DatasetConfig::Kitti { root, remap, .. } => {
                for p in [root, remap] {
                    if !p.exists() {
                        return Err(Error::Config(format!("{} does not exist", p.display())));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
