//! Run configuration: a TOML file, then command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ctxrec::eval::CvConfig;
use ctxrec::models::{ModelKind, ModelSpec};
use ctxrec::RatingScale;
use serde::Deserialize;

use crate::Failure;

/// Hyperparameters that may be set globally in `[train]` or per model in
/// `[model.<name>]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub rank: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub init_spread: Option<f64>,
    pub seed: Option<u64>,
    pub lcs_rank: Option<usize>,
    pub alpha: Option<f64>,
    pub prefilter_floor: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, spec: &mut ModelSpec) {
        let t = &mut spec.train;
        set(&mut t.rank, self.rank);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.lambda, self.lambda);
        set(&mut t.epochs, self.epochs);
        set(&mut t.init_spread, self.init_spread);
        set(&mut t.seed, self.seed);
        set(&mut spec.lcs_rank, self.lcs_rank);
        set(&mut spec.alpha, self.alpha);
        set(&mut spec.prefilter_floor, self.prefilter_floor);
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub top_n: Option<usize>,
    pub relevance_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default)]
    pub targets: Vec<String>,
    pub k: Option<usize>,
    /// Saved models to explain instead of training from `dataset`.
    #[serde(default)]
    pub model_files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// `[min, max]` rating scale; defaults to 1..5.
    pub scale: Option<[f64; 2]>,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub model: BTreeMap<String, TrainOverrides>,
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dataset.as_mut().map(resolve);
        cfg.out.as_mut().map(resolve);
        cfg.explain.model_files.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn scale(&self) -> Result<RatingScale, Failure> {
        match self.scale {
            None => Ok(RatingScale::default()),
            Some([min, max]) if min < max && min.is_finite() && max.is_finite() => Ok(RatingScale { min, max }),
            Some([min, max]) => Err(Failure::config(format!("invalid rating scale [{min}, {max}]"))),
        }
    }

    pub fn dataset(&self) -> Result<&Path, Failure> {
        let p = self
            .dataset
            .as_deref()
            .ok_or_else(|| Failure::config("no dataset given (positional argument, --data or `dataset` in the config)"))?;
        if !p.is_file() {
            return Err(Failure::config(format!("dataset {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Model specs in the listed order, with `[train]` and then
    /// `[model.<name>]` overrides applied. Fails before any training on an
    /// unknown or repeated name.
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>, Failure> {
        if self.models.is_empty() {
            return Err(Failure::config("no models selected"));
        }
        for name in self.model.keys() {
            name.parse::<ModelKind>().map_err(|e| Failure::config(format!("[model.{name}]: {e}")))?;
        }
        let mut specs: Vec<ModelSpec> = Vec::new();
        for name in &self.models {
            let kind: ModelKind = name.parse().map_err(|e| Failure::config(format!("{e}")))?;
            if specs.iter().any(|s| s.kind == kind) {
                return Err(Failure::config(format!("model {name} listed twice")));
            }
            let mut spec = ModelSpec::new(kind);
            if let Some(seed) = self.seed {
                spec.train.seed = seed;
            }
            self.train.apply(&mut spec);
            if let Some(o) = self.model.get(name) {
                o.apply(&mut spec);
            }
            validate_spec(&spec)?;
            specs.push(spec);
        }
        Ok(specs)
    }

    pub fn cv_config(&self) -> Result<CvConfig, Failure> {
        let mut cv = CvConfig::default();
        set(&mut cv.seed, self.seed);
        set(&mut cv.k, self.cv.k);
        set(&mut cv.seed, self.cv.seed);
        set(&mut cv.top_n, self.cv.top_n);
        set(&mut cv.relevance_threshold, self.cv.relevance_threshold);
        set(&mut cv.jobs, self.jobs);
        if cv.k < 2 {
            return Err(Failure::config("cv.k must be at least 2"));
        }
        if cv.top_n == 0 {
            return Err(Failure::config("cv.top_n must be at least 1"));
        }
        if cv.jobs == 0 {
            return Err(Failure::config("jobs must be at least 1"));
        }
        if !cv.relevance_threshold.is_finite() {
            return Err(Failure::config("cv.relevance_threshold must be finite"));
        }
        Ok(cv)
    }

    /// Command-line seed wins over every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.cv.seed = None;
        self.train.seed = None;
        for o in self.model.values_mut() {
            o.seed = None;
        }
    }
}

fn validate_spec(spec: &ModelSpec) -> Result<(), Failure> {
    let name = spec.kind.name();
    spec.train
        .validate()
        .map_err(|e| Failure::config(format!("model {name}: {e}")))?;
    if spec.lcs_rank == 0 {
        return Err(Failure::config(format!("model {name}: lcs_rank must be at least 1")));
    }
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(Failure::config(format!("model {name}: alpha must be positive")));
    }
    Ok(())
}
