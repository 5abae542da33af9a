//! Registry of trainable model kinds and a common trained-model handle.

use std::fmt;
use std::str::FromStr;

use crate::cp::{cp_train, CpModel};
use crate::deviation::{dev_train, DeviationModel, Granularity};
use crate::error::{Error, Result};
use crate::eval::{PrefilterModel, DEFAULT_PREFILTER_FLOOR};
use crate::mf::{mf_train, MfParams, TrainConfig};
use crate::similarity::{sim_train, BackendConfig, BackendKind, SimilarityModel};
use crate::{ContextSimilarity, ContextSituation, Dataset, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Mf,
    DevGlobal,
    DevUser,
    DevItem,
    SimIcs,
    SimLcs,
    SimMcs,
    Cp,
    Prefilter,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Mf,
        ModelKind::DevGlobal,
        ModelKind::DevUser,
        ModelKind::DevItem,
        ModelKind::SimIcs,
        ModelKind::SimLcs,
        ModelKind::SimMcs,
        ModelKind::Cp,
        ModelKind::Prefilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::DevGlobal => "dev-global",
            ModelKind::DevUser => "dev-user",
            ModelKind::DevItem => "dev-item",
            ModelKind::SimIcs => "sim-ics",
            ModelKind::SimLcs => "sim-lcs",
            ModelKind::SimMcs => "sim-mcs",
            ModelKind::Cp => "cp",
            ModelKind::Prefilter => "prefilter",
        }
    }

    pub fn has_similarity(self) -> bool {
        matches!(
            self,
            ModelKind::SimIcs | ModelKind::SimLcs | ModelKind::SimMcs | ModelKind::Cp
        )
    }

    pub fn has_deviations(self) -> bool {
        matches!(self, ModelKind::DevGlobal | ModelKind::DevUser | ModelKind::DevItem)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown model {s:?} (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// A model kind with everything needed to train it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub lcs_rank: usize,
    pub alpha: f64,
    pub prefilter_floor: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            train: TrainConfig::default(),
            lcs_rank: BackendConfig::DEFAULT_LCS_RANK,
            alpha: BackendConfig::DEFAULT_MCS_ALPHA,
            prefilter_floor: DEFAULT_PREFILTER_FLOOR,
        }
    }

    pub fn with_train(mut self, train: TrainConfig) -> Self {
        self.train = train;
        self
    }

    pub fn train(&self, data: &Dataset) -> Result<TrainedModel> {
        let cfg = &self.train;
        Ok(match self.kind {
            ModelKind::Mf => TrainedModel::Mf(mf_train(data, cfg)?),
            ModelKind::DevGlobal => TrainedModel::Deviation(dev_train(data, cfg, Granularity::Global)?),
            ModelKind::DevUser => TrainedModel::Deviation(dev_train(data, cfg, Granularity::PerUser)?),
            ModelKind::DevItem => TrainedModel::Deviation(dev_train(data, cfg, Granularity::PerItem)?),
            ModelKind::SimIcs => TrainedModel::Similarity(sim_train(data, cfg, BackendConfig::Ics)?),
            ModelKind::SimLcs => TrainedModel::Similarity(sim_train(
                data,
                cfg,
                BackendConfig::Lcs { rank: self.lcs_rank },
            )?),
            ModelKind::SimMcs => TrainedModel::Similarity(sim_train(
                data,
                cfg,
                BackendConfig::Mcs { alpha: self.alpha },
            )?),
            ModelKind::Cp => TrainedModel::Cp(cp_train(data, cfg)?),
            ModelKind::Prefilter => TrainedModel::Prefilter(PrefilterModel::train(data, cfg, self.prefilter_floor)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Mf(MfParams),
    Deviation(DeviationModel),
    Similarity(SimilarityModel),
    Cp(CpModel),
    Prefilter(PrefilterModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Mf(_) => ModelKind::Mf,
            TrainedModel::Deviation(m) => match m.granularity() {
                Granularity::Global => ModelKind::DevGlobal,
                Granularity::PerUser => ModelKind::DevUser,
                Granularity::PerItem => ModelKind::DevItem,
            },
            TrainedModel::Similarity(m) => match m.kind() {
                BackendKind::Ics => ModelKind::SimIcs,
                BackendKind::Lcs => ModelKind::SimLcs,
                BackendKind::Mcs => ModelKind::SimMcs,
            },
            TrainedModel::Cp(_) => ModelKind::Cp,
            TrainedModel::Prefilter(_) => ModelKind::Prefilter,
        }
    }

    /// The learned context similarity, for models that have one.
    pub fn similarity(&self) -> Option<&dyn ContextSimilarity> {
        match self {
            TrainedModel::Similarity(m) => Some(m),
            TrainedModel::Cp(m) => Some(m),
            _ => None,
        }
    }

    pub fn deviations(&self) -> Option<&DeviationModel> {
        match self {
            TrainedModel::Deviation(m) => Some(m),
            _ => None,
        }
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        match self {
            TrainedModel::Mf(m) => m.predict(user, item),
            TrainedModel::Deviation(m) => m.predict(user, item, context),
            TrainedModel::Similarity(m) => m.predict(user, item, context),
            TrainedModel::Cp(m) => m.predict(user, item, context),
            TrainedModel::Prefilter(m) => m.predict(user, item, context),
        }
    }
}
