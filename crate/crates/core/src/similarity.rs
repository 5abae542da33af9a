//! Similarity-based contextual modeling.
//!
//! `F(u, t, c) = P(u, t) * Sim(c0, c)` where `c0` is the all-`na` situation.
//! Three similarity backends are supported:
//!
//! * **ICS**: one symmetric condition-pair table per dimension;
//!   `Sim(a, b) = prod_i sim_i(a_i, b_i)`.
//! * **LCS**: a latent vector per condition; per-dimension similarity is the
//!   dot product clamped to `[0, 1]`, multiplied across dimensions.
//! * **MCS**: a coordinate per condition on its dimension's axis; situations
//!   are points and `Sim(a, b) = exp(-alpha * ||a - b||)`.
//!
//! Training only ever observes `Sim(c0, c)`, so ICS learns the entries
//! `sim_i(na, x)` directly. After each epoch the remaining pairs are filled
//! in from the anchored entries as `min(s_a, s_b) / max(s_a, s_b)`: the
//! multiplicative counterpart of recovering pairwise deviations as
//! differences.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ConditionLayout, ContextSchema, ContextSituation, ContextualRating, Dataset};
use crate::error::{Error, Result};
use crate::mf::{dot, init_base, require_nonempty, MfParams, TrainConfig};
use crate::sgd::{self, ParamClass, SgdObjective};
use crate::{ContextSimilarity, Predictor};

/// Backend choice plus its own hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackendConfig {
    Ics,
    Lcs { rank: usize },
    Mcs { alpha: f64 },
}

impl BackendConfig {
    pub const DEFAULT_LCS_RANK: usize = 5;
    pub const DEFAULT_MCS_ALPHA: f64 = 1.0;

    pub fn lcs() -> Self {
        BackendConfig::Lcs {
            rank: Self::DEFAULT_LCS_RANK,
        }
    }

    pub fn mcs() -> Self {
        BackendConfig::Mcs {
            alpha: Self::DEFAULT_MCS_ALPHA,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BackendConfig::Lcs { rank: 0 } => {
                Err(Error::InvalidArgument("LCS rank must be at least 1".into()))
            }
            BackendConfig::Mcs { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidArgument("MCS alpha must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Ics,
    Lcs,
    Mcs,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Ics => "ics",
            BackendKind::Lcs => "lcs",
            BackendKind::Mcs => "mcs",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ics" => Ok(BackendKind::Ics),
            "lcs" => Ok(BackendKind::Lcs),
            "mcs" => Ok(BackendKind::Mcs),
            _ => Err(Error::InvalidArgument(format!("unknown similarity backend {s:?}"))),
        }
    }
}

/// Per-dimension symmetric similarity tables with unit diagonal.
///
/// Only off-diagonal entries `a < b` are stored, which makes symmetry and
/// self-similarity hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IcsParams {
    sizes: Vec<usize>,
    starts: Vec<usize>,
    entries: Vec<f64>,
    /// Per dimension, per condition: seen in training.
    observed: Vec<Vec<bool>>,
}

impl IcsParams {
    /// All entries 1; no condition marked observed.
    pub fn ones(schema: &ContextSchema) -> Self {
        let sizes: Vec<usize> = schema.dimensions().iter().map(|d| d.len()).collect();
        Self::from_sizes(sizes)
    }

    pub(crate) fn from_sizes(sizes: Vec<usize>) -> Self {
        let mut starts = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in &sizes {
            starts.push(total);
            total += n * n.saturating_sub(1) / 2;
        }
        let observed = sizes.iter().map(|&n| vec![false; n]).collect();
        IcsParams {
            sizes,
            starts,
            entries: vec![1.0; total],
            observed,
        }
    }

    fn pair_index(&self, dim: usize, a: u32, b: u32) -> usize {
        let (lo, hi) = if a < b { (a as usize, b as usize) } else { (b as usize, a as usize) };
        let n = self.sizes[dim];
        self.starts[dim] + lo * (2 * n - lo - 1) / 2 + (hi - lo - 1)
    }

    pub fn entry(&self, dim: usize, a: u32, b: u32) -> f64 {
        if a == b {
            1.0
        } else {
            self.entries[self.pair_index(dim, a, b)]
        }
    }

    /// Sets `sim_i(a, b)` (and its mirror), clamped to `[0, 1]`.
    pub fn set_entry(&mut self, dim: usize, a: u32, b: u32, value: f64) -> Result<()> {
        if dim >= self.sizes.len() || a.max(b) as usize >= self.sizes[dim] {
            return Err(Error::InvalidArgument(format!("no pair ({a}, {b}) in dimension {dim}")));
        }
        if a == b {
            return Err(Error::InvalidArgument("self-similarity is fixed at 1".into()));
        }
        let i = self.pair_index(dim, a, b);
        self.entries[i] = value.clamp(0.0, 1.0);
        Ok(())
    }

    /// `na` is always observed and is not recorded.
    pub fn mark_observed(&mut self, dim: usize, cond: u32) {
        if cond != 0 {
            self.observed[dim][cond as usize] = true;
        }
    }

    pub fn is_observed(&self, dim: usize, cond: u32) -> bool {
        cond == 0 || self.observed[dim][cond as usize]
    }

    pub fn dimension_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn condition_count(&self, dim: usize) -> usize {
        self.sizes[dim]
    }

    /// Rebuilds every non-`na` pair from the anchored entries.
    pub fn derive_pairs(&mut self) {
        for dim in 0..self.sizes.len() {
            let n = self.sizes[dim] as u32;
            for a in 1..n {
                for b in (a + 1)..n {
                    let (sa, sb) = (self.entry(dim, 0, a), self.entry(dim, 0, b));
                    let (lo, hi) = (sa.min(sb), sa.max(sb));
                    let v = if hi == 0.0 { 1.0 } else { lo / hi };
                    let i = self.pair_index(dim, a, b);
                    self.entries[i] = v;
                }
            }
        }
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

}

/// Per-condition latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LcsParams {
    rank: usize,
    layout: ConditionLayout,
    vectors: Vec<f64>,
}

impl LcsParams {
    pub fn zeros(schema: &ContextSchema, rank: usize) -> Self {
        let layout = ConditionLayout::new(schema);
        Self::from_layout(layout, rank)
    }

    pub(crate) fn from_layout(layout: ConditionLayout, rank: usize) -> Self {
        let vectors = vec![0.0; layout.total() * rank];
        LcsParams { rank, layout, vectors }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vector(&self, dim: usize, cond: u32) -> &[f64] {
        let s = self.layout.index(dim, cond) * self.rank;
        &self.vectors[s..s + self.rank]
    }

    pub fn vector_mut(&mut self, dim: usize, cond: u32) -> &mut [f64] {
        let s = self.layout.index(dim, cond) * self.rank;
        &mut self.vectors[s..s + self.rank]
    }

    /// Clamped dot product of two conditions of one dimension.
    pub fn pair_similarity(&self, dim: usize, a: u32, b: u32) -> f64 {
        dot(self.vector(dim, a), self.vector(dim, b)).clamp(0.0, 1.0)
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.vectors
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.vectors
    }
}

/// One coordinate per condition, one axis per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct McsParams {
    alpha: f64,
    layout: ConditionLayout,
    coords: Vec<f64>,
}

impl McsParams {
    pub fn zeros(schema: &ContextSchema, alpha: f64) -> Self {
        Self::from_layout(ConditionLayout::new(schema), alpha)
    }

    pub(crate) fn from_layout(layout: ConditionLayout, alpha: f64) -> Self {
        let coords = vec![0.0; layout.total()];
        McsParams { alpha, layout, coords }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn coordinate(&self, dim: usize, cond: u32) -> f64 {
        self.coords[self.layout.index(dim, cond)]
    }

    pub fn set_coordinate(&mut self, dim: usize, cond: u32, value: f64) {
        let i = self.layout.index(dim, cond);
        self.coords[i] = value;
    }

    /// Euclidean distance between the points of two situations.
    pub fn distance(&self, a: &ContextSituation, b: &ContextSituation) -> f64 {
        a.0.iter()
            .zip(&b.0)
            .enumerate()
            .map(|(d, (&x, &y))| (self.coordinate(d, x) - self.coordinate(d, y)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn similarity(&self, a: &ContextSituation, b: &ContextSituation) -> f64 {
        (-self.alpha * self.distance(a, b)).exp()
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Ics(IcsParams),
    Lcs(LcsParams),
    Mcs(McsParams),
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Ics(_) => BackendKind::Ics,
            Backend::Lcs(_) => BackendKind::Lcs,
            Backend::Mcs(_) => BackendKind::Mcs,
        }
    }

    fn raw(&self) -> &[f64] {
        match self {
            Backend::Ics(p) => p.raw(),
            Backend::Lcs(p) => p.raw(),
            Backend::Mcs(p) => p.raw(),
        }
    }

    fn raw_mut(&mut self) -> &mut [f64] {
        match self {
            Backend::Ics(p) => p.raw_mut(),
            Backend::Lcs(p) => p.raw_mut(),
            Backend::Mcs(p) => p.raw_mut(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    base: MfParams,
    backend: Backend,
}

impl SimilarityModel {
    pub fn new(base: MfParams, backend: Backend) -> Self {
        SimilarityModel { base, backend }
    }

    pub fn base(&self) -> &MfParams {
        &self.base
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut Backend {
        &mut self.backend
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    /// `Sim(c0, c)`. Never fails: ICS entries for conditions unseen in
    /// training keep their neutral initial value of 1.
    pub fn anchored_similarity(&self, context: &ContextSituation) -> f64 {
        match &self.backend {
            Backend::Ics(p) => context
                .0
                .iter()
                .enumerate()
                .map(|(d, &c)| p.entry(d, 0, c))
                .product(),
            Backend::Lcs(p) => context
                .0
                .iter()
                .enumerate()
                .map(|(d, &c)| p.pair_similarity(d, 0, c))
                .product(),
            Backend::Mcs(p) => {
                if context.is_anchor() {
                    1.0
                } else {
                    p.similarity(&ContextSituation::anchor(context.len()), context)
                }
            }
        }
    }

    /// `Sim(a, b)`. For ICS, comparing a condition never seen in training
    /// against a different one is an error; LCS and MCS fall back on the
    /// parameters' initial values.
    pub fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> Result<f64> {
        match &self.backend {
            Backend::Ics(p) => {
                let mut s = 1.0;
                for (d, (&x, &y)) in a.0.iter().zip(&b.0).enumerate() {
                    if x == y {
                        continue;
                    }
                    for c in [x, y] {
                        if !p.is_observed(d, c) {
                            return Err(Error::MissingEntry(format!(
                                "condition {c} of dimension {d} was not seen in training"
                            )));
                        }
                    }
                    s *= p.entry(d, x, y);
                }
                Ok(s)
            }
            Backend::Lcs(p) => Ok(a
                .0
                .iter()
                .zip(&b.0)
                .enumerate()
                .map(|(d, (&x, &y))| p.pair_similarity(d, x, y))
                .product()),
            Backend::Mcs(p) => Ok(p.similarity(a, b)),
        }
    }

    pub fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        self.base.predict(user, item) * self.anchored_similarity(context)
    }

    /// Gradient of `Sim(c0, c)` with respect to backend parameters, as
    /// `(backend index, dSim/dtheta)` pairs.
    fn similarity_gradient(&self, context: &ContextSituation, out: &mut Vec<(usize, f64)>) {
        match &self.backend {
            Backend::Ics(p) => {
                let factors: Vec<f64> = context.0.iter().enumerate().map(|(d, &c)| p.entry(d, 0, c)).collect();
                for (d, &c) in context.0.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    // Entries are kept in [0, 1] by projection after the step.
                    out.push((p.pair_index(d, 0, c), product_except(&factors, d)));
                }
            }
            Backend::Lcs(p) => {
                let raw: Vec<f64> = context
                    .0
                    .iter()
                    .enumerate()
                    .map(|(d, &c)| dot(p.vector(d, 0), p.vector(d, c)))
                    .collect();
                let factors: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                let g = p.rank;
                for (d, &c) in context.0.iter().enumerate() {
                    if raw[d] <= 0.0 || raw[d] >= 1.0 {
                        continue;
                    }
                    let rest = product_except(&factors, d);
                    let na = p.layout.index(d, 0) * g;
                    if c == 0 {
                        for f in 0..g {
                            out.push((na + f, rest * 2.0 * p.vectors[na + f]));
                        }
                    } else {
                        let cv = p.layout.index(d, c) * g;
                        for f in 0..g {
                            out.push((na + f, rest * p.vectors[cv + f]));
                            out.push((cv + f, rest * p.vectors[na + f]));
                        }
                    }
                }
            }
            Backend::Mcs(p) => {
                let anchor = ContextSituation::anchor(context.len());
                let dist = p.distance(&anchor, context);
                if dist <= f64::MIN_POSITIVE {
                    return;
                }
                let sim = (-p.alpha * dist).exp();
                for (d, &c) in context.0.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    let (ic, ina) = (p.layout.index(d, c), p.layout.index(d, 0));
                    let delta = p.coords[ic] - p.coords[ina];
                    let g = -p.alpha * sim * delta / dist;
                    out.push((ic, g));
                    out.push((ina, -g));
                }
            }
        }
    }

    fn backend_touched(&self, context: &ContextSituation, out: &mut Vec<usize>) {
        match &self.backend {
            Backend::Ics(p) => {
                for (d, &c) in context.0.iter().enumerate() {
                    if c != 0 {
                        out.push(p.pair_index(d, 0, c));
                    }
                }
            }
            Backend::Lcs(p) => {
                for (d, &c) in context.0.iter().enumerate() {
                    let na = p.layout.index(d, 0) * p.rank;
                    out.extend(na..na + p.rank);
                    if c != 0 {
                        let cv = p.layout.index(d, c) * p.rank;
                        out.extend(cv..cv + p.rank);
                    }
                }
            }
            Backend::Mcs(p) => {
                for (d, &c) in context.0.iter().enumerate() {
                    if c != 0 {
                        out.push(p.layout.index(d, c));
                        out.push(p.layout.index(d, 0));
                    }
                }
            }
        }
    }
}

fn product_except(factors: &[f64], skip: usize) -> f64 {
    factors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, v)| v)
        .product()
}

impl Predictor for SimilarityModel {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        SimilarityModel::predict(self, user, item, context)
    }
}

impl ContextSimilarity for SimilarityModel {
    fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> Result<f64> {
        SimilarityModel::context_similarity(self, a, b)
    }
}

impl SgdObjective for SimilarityModel {
    fn param_count(&self) -> usize {
        self.base.len() + self.backend.raw().len()
    }

    fn param(&self, index: usize) -> f64 {
        let n = self.base.len();
        if index < n {
            self.base.raw()[index]
        } else {
            self.backend.raw()[index - n]
        }
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        let n = self.base.len();
        if index < n {
            &mut self.base.raw_mut()[index]
        } else {
            &mut self.backend.raw_mut()[index - n]
        }
    }

    fn param_class(&self, index: usize) -> ParamClass {
        if index < self.base.len() {
            return self.base.class_of(index);
        }
        match self.backend {
            Backend::Ics(_) => ParamClass::IcsEntry,
            Backend::Lcs(_) => ParamClass::LcsVector,
            Backend::Mcs(_) => ParamClass::McsCoordinate,
        }
    }

    fn example_prediction(&self, r: &ContextualRating) -> f64 {
        self.predict(r.user, r.item, &r.context)
    }

    fn example_gradient(&self, r: &ContextualRating, lambda: f64, out: &mut Vec<(usize, f64)>) {
        let p = self.base.predict(r.user, r.item);
        let sim = self.anchored_similarity(&r.context);
        let e = r.rating - p * sim;
        self.base.push_gradient(r.user, r.item, e, sim, lambda, 0, out);

        let n = self.base.len();
        let start = out.len();
        self.similarity_gradient(&r.context, out);
        for entry in &mut out[start..] {
            entry.1 *= -e * p;
            entry.0 += n;
        }
        let mut touched = Vec::new();
        self.backend_touched(&r.context, &mut touched);
        touched.sort_unstable();
        touched.dedup();
        let raw = self.backend.raw();
        out.extend(touched.into_iter().map(|k| (n + k, lambda * raw[k])));
    }

    fn touched_params(&self, r: &ContextualRating, out: &mut Vec<usize>) {
        self.base.push_touched(r.user, r.item, 0, out);
        let n = self.base.len();
        let start = out.len();
        self.backend_touched(&r.context, out);
        for k in &mut out[start..] {
            *k += n;
        }
    }

    fn project_touched(&mut self, grad: &[(usize, f64)]) {
        let n = self.base.len();
        if let Backend::Ics(p) = &mut self.backend {
            for &(k, _) in grad {
                if k >= n {
                    let v = &mut p.entries[k - n];
                    *v = v.clamp(0.0, 1.0);
                }
            }
        }
    }

    fn end_epoch(&mut self) {
        if let Backend::Ics(p) = &mut self.backend {
            p.derive_pairs();
        }
    }
}

fn init_backend(train: &Dataset, cfg: &TrainConfig, backend: BackendConfig, rng: &mut ChaCha8Rng) -> Backend {
    let s = cfg.init_spread;
    match backend {
        BackendConfig::Ics => {
            let mut p = IcsParams::ones(&train.schema);
            for r in &train.ratings {
                for (d, &c) in r.context.0.iter().enumerate() {
                    p.mark_observed(d, c);
                }
            }
            Backend::Ics(p)
        }
        BackendConfig::Lcs { rank } => {
            let mut p = LcsParams::zeros(&train.schema, rank);
            // Initial per-dimension dot products sit just inside the clamp
            // range so every pair starts with a live gradient.
            let level = (LCS_INITIAL_DOT / rank as f64).sqrt();
            for v in p.raw_mut() {
                *v = level + rng.gen_range(-s..=s);
            }
            Backend::Lcs(p)
        }
        BackendConfig::Mcs { alpha } => {
            let mut p = McsParams::zeros(&train.schema, alpha);
            for v in p.raw_mut() {
                *v = rng.gen_range(-s..=s);
            }
            Backend::Mcs(p)
        }
    }
}

const LCS_INITIAL_DOT: f64 = 0.95;

/// Jointly trains the base factorization and the similarity backend.
pub fn sim_train(train: &Dataset, cfg: &TrainConfig, backend: BackendConfig) -> Result<SimilarityModel> {
    cfg.validate()?;
    backend.validate()?;
    require_nonempty(train)?;
    let mut rng = cfg.rng();
    let base = init_base(train, cfg, &mut rng);
    let backend = init_backend(train, cfg, backend, &mut rng);
    let mut model = SimilarityModel::new(base, backend);
    sgd::fit(
        &mut model,
        train,
        cfg.learning_rate,
        cfg.lambda,
        cfg.epochs,
        &mut rng,
        None,
    );
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Vocabulary;
    use crate::sgd::check_example_gradient;
    use proptest::prelude::{any, proptest};
    use proptest::{prop_assert, prop_assert_eq};
    use rand::SeedableRng;

    fn schema() -> ContextSchema {
        ContextSchema::with_conditions(&[
            ("Time", vec!["weekend", "weekday"]),
            ("Location", vec!["home", "cinema"]),
            ("Companion", vec!["alone", "family", "kids"]),
        ])
        .unwrap()
    }

    fn base(mu: f64) -> MfParams {
        MfParams::zeros(mu, 2, 2, 2)
    }

    #[test]
    fn ics_table_invariants() {
        let mut p = IcsParams::ones(&schema());
        p.set_entry(2, 1, 3, 0.4).unwrap();
        assert_eq!(p.entry(2, 3, 1), 0.4);
        assert_eq!(p.entry(2, 2, 2), 1.0);
        p.set_entry(0, 0, 1, 7.0).unwrap();
        assert_eq!(p.entry(0, 1, 0), 1.0);
        assert!(p.set_entry(0, 1, 1, 0.5).is_err());
        assert!(p.set_entry(0, 0, 9, 0.5).is_err());
    }

    #[test]
    fn identical_contexts_are_fully_similar() {
        let s = schema();
        let c = ContextSituation(vec![2, 1, 3]);
        let mut ics = IcsParams::ones(&s);
        ics.set_entry(0, 0, 2, 0.3).unwrap();
        let m = SimilarityModel::new(base(3.0), Backend::Ics(ics));
        assert_eq!(m.context_similarity(&c, &c).unwrap(), 1.0);

        let mut mcs = McsParams::zeros(&s, 1.0);
        mcs.set_coordinate(0, 2, 0.7);
        let m = SimilarityModel::new(base(3.0), Backend::Mcs(mcs));
        assert_eq!(m.context_similarity(&c, &c).unwrap(), 1.0);
    }

    #[test]
    fn ics_product_of_dimension_sims() {
        let s = schema();
        let mut ics = IcsParams::ones(&s);
        for d in 0..3 {
            for c in 1..s.dimension(d).len() as u32 {
                ics.mark_observed(d, c);
            }
        }
        ics.set_entry(0, 0, 2, 0.5).unwrap();
        ics.set_entry(1, 0, 2, 0.1).unwrap();
        let m = SimilarityModel::new(base(4.0), Backend::Ics(ics));
        let c2 = ContextSituation(vec![2, 2, 0]);
        let sim = m.context_similarity(&s.anchor(), &c2).unwrap();
        assert!((sim - 0.05).abs() < 1e-15);
        assert!((m.predict(0, 0, &c2) - 4.0 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn ics_unseen_condition_is_missing() {
        let s = schema();
        let mut ics = IcsParams::ones(&s);
        ics.mark_observed(0, 1);
        let m = SimilarityModel::new(base(4.0), Backend::Ics(ics));
        let a = ContextSituation(vec![1, 0, 0]);
        let b = ContextSituation(vec![2, 0, 0]);
        assert!(matches!(m.context_similarity(&a, &b), Err(Error::MissingEntry(_))));
        assert!(m.context_similarity(&a, &s.anchor()).is_ok());
        // the predictor path uses the neutral value instead
        assert_eq!(m.anchored_similarity(&b), 1.0);
    }

    #[test]
    fn mcs_three_four_five() {
        let s = schema();
        let mut mcs = McsParams::zeros(&s, 1.0);
        mcs.set_coordinate(0, 1, 3.0);
        mcs.set_coordinate(1, 2, 4.0);
        let m = SimilarityModel::new(base(3.0), Backend::Mcs(mcs));
        let c = ContextSituation(vec![1, 2, 0]);
        let sim = m.context_similarity(&s.anchor(), &c).unwrap();
        assert!((sim - (-5.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn predict_is_base_times_similarity() {
        let s = schema();
        let mut ics = IcsParams::ones(&s);
        ics.set_entry(2, 0, 1, 0.5).unwrap();
        let m = SimilarityModel::new(base(4.0), Backend::Ics(ics));
        assert_eq!(m.predict(0, 0, &ContextSituation(vec![0, 0, 1])), 2.0);
        assert_eq!(m.predict(0, 0, &ContextSituation(vec![0, 0, 2])), 4.0);
    }

    #[test]
    fn mcs_anchor_is_exactly_base() {
        let s = schema();
        let mut mcs = McsParams::zeros(&s, 2.0);
        mcs.set_coordinate(0, 0, 0.3);
        mcs.set_coordinate(1, 0, -0.2);
        let m = SimilarityModel::new(base(3.7), Backend::Mcs(mcs));
        assert_eq!(m.predict(1, 1, &s.anchor()), 3.7);
    }

    #[test]
    fn derived_pairs_follow_anchored_ratio() {
        let s = schema();
        let mut ics = IcsParams::ones(&s);
        ics.set_entry(2, 0, 1, 0.8).unwrap();
        ics.set_entry(2, 0, 2, 0.4).unwrap();
        ics.set_entry(2, 0, 3, 0.0).unwrap();
        ics.derive_pairs();
        assert!((ics.entry(2, 1, 2) - 0.5).abs() < 1e-15);
        assert_eq!(ics.entry(2, 2, 3), 0.0);
        assert_eq!(ics.entry(0, 1, 2), 1.0);
    }

    fn dataset(ratings: Vec<ContextualRating>, users: usize, items: usize) -> Dataset {
        Dataset {
            schema: schema(),
            users: (0..users).map(|u| format!("u{u}")).collect::<Vocabulary>(),
            items: (0..items).map(|t| format!("t{t}")).collect::<Vocabulary>(),
            ratings,
            scale: Default::default(),
        }
    }

    #[test]
    fn anchor_only_data_keeps_ics_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ratings = (0..300)
            .map(|_| ContextualRating {
                user: rng.gen_range(0..4),
                item: rng.gen_range(0..4),
                rating: rng.gen_range(1..=5) as f64,
                context: ContextSituation(vec![0, 0, 0]),
            })
            .collect();
        let d = dataset(ratings, 4, 4);
        let m = sim_train(&d, &TrainConfig { epochs: 30, ..Default::default() }, BackendConfig::Ics).unwrap();
        match m.backend() {
            Backend::Ics(p) => assert!(p.raw().iter().all(|&v| v == 1.0)),
            _ => unreachable!(),
        }
        for u in 0..4 {
            for t in 0..4 {
                assert_eq!(m.predict(u, t, &d.schema.anchor()), m.base().predict(u, t));
            }
        }
    }

    #[test]
    fn mcs_identical_conditions_stay_together() {
        // Companion "family" and "kids" behave identically.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ratings = (0..3000)
            .map(|_| {
                let comp = rng.gen_range(0..4u32);
                let factor = match comp {
                    0 | 1 => 1.0,
                    _ => 0.7,
                };
                let t = rng.gen_range(0..4u32);
                ContextualRating {
                    user: rng.gen_range(0..4),
                    item: t,
                    rating: (3.0 + 0.3 * t as f64) * factor,
                    context: ContextSituation(vec![0, 0, comp]),
                }
            })
            .collect();
        let d = dataset(ratings, 4, 4);
        let cfg = TrainConfig { epochs: 60, ..Default::default() };
        let m = sim_train(&d, &cfg, BackendConfig::mcs()).unwrap();
        let Backend::Mcs(p) = m.backend() else { unreachable!() };
        let (x2, x3) = (p.coordinate(2, 2), p.coordinate(2, 3));
        assert!((x2 - x3).abs() < 0.1, "{x2} {x3}");
        let x_na = p.coordinate(2, 0);
        assert!((x2 - x_na).abs() > 0.2);
    }

    #[test]
    fn training_deterministic_and_ics_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ratings = (0..400)
            .map(|_| ContextualRating {
                user: rng.gen_range(0..5),
                item: rng.gen_range(0..5),
                rating: rng.gen_range(1..=5) as f64,
                context: ContextSituation(vec![rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..4)]),
            })
            .collect();
        let d = dataset(ratings, 5, 5);
        let cfg = TrainConfig { epochs: 10, learning_rate: 0.05, ..Default::default() };
        for b in [BackendConfig::Ics, BackendConfig::lcs(), BackendConfig::mcs()] {
            let m1 = sim_train(&d, &cfg, b).unwrap();
            assert_eq!(m1, sim_train(&d, &cfg, b).unwrap());
        }
        let m = sim_train(&d, &cfg, BackendConfig::Ics).unwrap();
        let Backend::Ics(p) = m.backend() else { unreachable!() };
        for dim in 0..3 {
            let n = p.condition_count(dim) as u32;
            for a in 0..n {
                assert_eq!(p.entry(dim, a, a), 1.0);
                for b in 0..n {
                    let v = p.entry(dim, a, b);
                    assert_eq!(v, p.entry(dim, b, a));
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    fn random_model(kind: BackendKind, rng: &mut ChaCha8Rng) -> SimilarityModel {
        let s = schema();
        let mut b = MfParams::zeros(3.0, 3, 3, 2);
        for v in b.raw_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let backend = match kind {
            BackendKind::Ics => {
                let mut p = IcsParams::ones(&s);
                for v in p.raw_mut() {
                    *v = rng.gen_range(0.2..0.9);
                }
                Backend::Ics(p)
            }
            BackendKind::Lcs => {
                let mut p = LcsParams::zeros(&s, 3);
                for v in p.raw_mut() {
                    *v = rng.gen_range(0.3..0.5);
                }
                Backend::Lcs(p)
            }
            BackendKind::Mcs => {
                let mut p = McsParams::zeros(&s, 1.3);
                for v in p.raw_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                Backend::Mcs(p)
            }
        };
        SimilarityModel::new(b, backend)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [BackendKind::Ics, BackendKind::Lcs, BackendKind::Mcs] {
            for trial in 0..5 {
                let mut m = random_model(kind, &mut rng);
                let r = ContextualRating {
                    user: rng.gen_range(0..3),
                    item: rng.gen_range(0..3),
                    rating: 4.0,
                    context: ContextSituation(vec![rng.gen_range(0..3), rng.gen_range(1..3), rng.gen_range(0..4)]),
                };
                let checks = check_example_gradient(&mut m, &r, 0.03, 1e-6);
                assert!(checks.len() > 2 * 2 + 2);
                for c in checks {
                    assert!(c.relative_error(1e-8) < 1e-5, "{kind} trial {trial}: {c:?}");
                }
            }
        }
    }

    #[test]
    fn multiplicative_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_model(BackendKind::Lcs, &mut rng);
        let c = ContextSituation(vec![1, 2, 3]);
        let ratio = m.predict(0, 0, &c) / m.base().predict(0, 0);
        for u in 0..3 {
            for t in 0..3 {
                let r = m.predict(u, t, &c) / m.base().predict(u, t);
                assert!((r - ratio).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn mcs_and_lcs_symmetric(seed in any::<u64>(), a in proptest::collection::vec(0u32..3, 3), b in proptest::collection::vec(0u32..3, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for kind in [BackendKind::Lcs, BackendKind::Mcs] {
                let m = random_model(kind, &mut rng);
                let (a, b) = (ContextSituation(a.clone()), ContextSituation(b.clone()));
                let ab = m.context_similarity(&a, &b).unwrap();
                let ba = m.context_similarity(&b, &a).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
        }
    }
}
