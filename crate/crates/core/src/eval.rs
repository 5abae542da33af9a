//! Cross-validated top-N evaluation and the exact-context pre-filter baseline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Mutex;

use crate::data::{fold_indices, ContextSituation, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{ndcg_at_n, precision_recall_at_n, RankedList};
use crate::mf::{mf_train, MfParams, TrainConfig};
use crate::models::{ModelSpec, TrainedModel};
use crate::Predictor;

/// Minimum exact-match ratings before the pre-filter trusts a local model.
pub const DEFAULT_PREFILTER_FLOOR: usize = 30;

/// Scores `candidates` at `(user, context)` and keeps the best `n`.
pub fn recommend_topn<P: Predictor + ?Sized>(
    model: &P,
    user: u32,
    context: &ContextSituation,
    candidates: &[u32],
    n: usize,
) -> RankedList {
    let scored = candidates
        .iter()
        .map(|&t| (t, model.predict(user, t, context)))
        .collect();
    RankedList::from_scores(scored, n)
}

/// How the pre-filter served a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefilterOutcome {
    /// Ratings whose context equals the query exactly.
    pub matching: usize,
    /// True when `matching` was below the floor and the global model was used.
    pub fallback: bool,
}

fn exact_matches(train: &Dataset, context: &ContextSituation) -> Dataset {
    train.filter(|r| &r.context == context)
}

fn prefilter_fit(
    train: &Dataset,
    context: &ContextSituation,
    cfg: &TrainConfig,
    floor: usize,
) -> Result<(Option<MfParams>, PrefilterOutcome)> {
    let local = exact_matches(train, context);
    let matching = local.len();
    if matching < floor || local.is_empty() {
        return Ok((None, PrefilterOutcome { matching, fallback: true }));
    }
    Ok((Some(mf_train(&local, cfg)?), PrefilterOutcome { matching, fallback: false }))
}

/// One-off pre-filter recommendation: MF on the exact-context ratings, or
/// MF on all of `train` when fewer than `floor` ratings match.
///
/// This is a simplified exact-match stand-in, not a full splitting approach.
pub fn exact_prefilter_baseline(
    train: &Dataset,
    user: u32,
    context: &ContextSituation,
    candidates: &[u32],
    n: usize,
    cfg: &TrainConfig,
    floor: usize,
) -> Result<(RankedList, PrefilterOutcome)> {
    let (local, outcome) = prefilter_fit(train, context, cfg, floor)?;
    let model = match local {
        Some(m) => m,
        None => mf_train(train, cfg)?,
    };
    Ok((recommend_topn(&model, user, context, candidates, n), outcome))
}

/// Pre-filter models for every training context that clears the floor,
/// plus a global fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefilterModel {
    floor: usize,
    global: MfParams,
    local: BTreeMap<ContextSituation, MfParams>,
}

impl PrefilterModel {
    pub fn train(train: &Dataset, cfg: &TrainConfig, floor: usize) -> Result<Self> {
        let global = mf_train(train, cfg)?;
        let mut counts: BTreeMap<&ContextSituation, usize> = BTreeMap::new();
        for r in &train.ratings {
            *counts.entry(&r.context).or_default() += 1;
        }
        let mut local = BTreeMap::new();
        for (ctx, n) in counts {
            if n >= floor.max(1) {
                local.insert(ctx.clone(), mf_train(&exact_matches(train, ctx), cfg)?);
            }
        }
        Ok(PrefilterModel { floor, global, local })
    }

    pub(crate) fn from_parts(floor: usize, global: MfParams, local: BTreeMap<ContextSituation, MfParams>) -> Self {
        PrefilterModel { floor, global, local }
    }

    pub fn floor(&self) -> usize {
        self.floor
    }

    pub fn global(&self) -> &MfParams {
        &self.global
    }

    pub fn local_models(&self) -> &BTreeMap<ContextSituation, MfParams> {
        &self.local
    }

    pub fn uses_fallback(&self, context: &ContextSituation) -> bool {
        !self.local.contains_key(context)
    }

    pub fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        self.local.get(context).unwrap_or(&self.global).predict(user, item)
    }
}

impl Predictor for PrefilterModel {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        PrefilterModel::predict(self, user, item, context)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub top_n: usize,
    pub relevance_threshold: f64,
    /// Folds evaluated concurrently; 1 keeps everything on the calling thread.
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 42,
            top_n: 10,
            relevance_threshold: 4.0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

impl Metrics {
    fn mean(all: &[Metrics]) -> Option<Metrics> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        Some(Metrics {
            precision: all.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
            ndcg: all.iter().map(|m| m.ndcg).sum::<f64>() / n,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    /// Test (user, context) pairs with at least one relevant item.
    pub pairs: usize,
    /// `None` when the fold had no qualifying pairs and was skipped.
    pub metrics: Option<Metrics>,
    /// Pairs served by the pre-filter's global fallback (pre-filter only).
    pub fallbacks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub model: String,
    pub folds: Vec<FoldResult>,
}

impl ModelReport {
    /// Unweighted mean over the folds that were not skipped.
    pub fn aggregate(&self) -> Option<Metrics> {
        let m: Vec<Metrics> = self.folds.iter().filter_map(|f| f.metrics).collect();
        Metrics::mean(&m)
    }

    pub fn skipped_folds(&self) -> Vec<usize> {
        self.folds.iter().filter(|f| f.metrics.is_none()).map(|f| f.fold).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub top_n: usize,
    pub relevance_threshold: f64,
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }

    /// `model,fold,metric,value` rows. Folds are numbered from 1; the
    /// aggregate uses fold `mean`. A skipped fold emits one `skipped` row.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["model", "fold", "metric", "value"])?;
        let n = self.top_n;
        let names = [format!("precision@{n}"), format!("recall@{n}"), format!("ndcg@{n}")];
        let emit = |w: &mut csv::Writer<W>, model: &str, fold: &str, m: &Metrics| -> Result<()> {
            for (name, v) in names.iter().zip([m.precision, m.recall, m.ndcg]) {
                w.write_record([model, fold, name, &v.to_string()])?;
            }
            Ok(())
        };
        for mr in &self.models {
            for f in &mr.folds {
                let fold = (f.fold + 1).to_string();
                match &f.metrics {
                    Some(m) => emit(&mut w, &mr.model, &fold, m)?,
                    None => w.write_record([mr.model.as_str(), &fold, "skipped", "1"])?,
                }
                if let Some(fb) = f.fallbacks {
                    w.write_record([mr.model.as_str(), &fold, "fallbacks", &fb.to_string()])?;
                }
            }
            if let Some(m) = mr.aggregate() {
                emit(&mut w, &mr.model, "mean", &m)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text table of per-fold and mean metrics.
    pub fn to_table(&self) -> String {
        let n = self.top_n;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}-fold CV, top-{n}, relevant if rating >= {}",
            self.k, self.relevance_threshold
        );
        let head = vec![
            "model".to_string(),
            "fold".into(),
            "pairs".into(),
            format!("P@{n}"),
            format!("R@{n}"),
            format!("NDCG@{n}"),
            "note".into(),
        ];
        let mut rows = vec![head];
        let fmt = |m: &Option<Metrics>| match m {
            Some(m) => [m.precision, m.recall, m.ndcg].map(|v| format!("{v:.4}")),
            None => ["-".to_string(), "-".into(), "-".into()],
        };
        for mr in &self.models {
            for f in &mr.folds {
                let [p, r, g] = fmt(&f.metrics);
                let mut notes = Vec::new();
                if f.metrics.is_none() {
                    notes.push("skipped: no qualifying pairs".to_string());
                }
                if let Some(fb) = f.fallbacks {
                    notes.push(format!("fallback pairs: {fb}"));
                }
                let note = notes.join("; ");
                rows.push(vec![mr.model.clone(), (f.fold + 1).to_string(), f.pairs.to_string(), p, r, g, note]);
            }
            let [p, r, g] = fmt(&mr.aggregate());
            let pairs: usize = mr.folds.iter().map(|f| f.pairs).sum();
            rows.push(vec![mr.model.clone(), "mean".into(), pairs.to_string(), p, r, g, String::new()]);
        }
        s.push_str(&align(&rows));
        s
    }
}

/// Left-aligns the first column and right-aligns the rest, except a trailing
/// free-text column.
pub(crate) fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|v| v.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, v) in r.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - v.chars().count();
            if c == 0 || c + 1 == cols {
                line.push_str(v);
                line.extend(std::iter::repeat_n(' ', pad));
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(v);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// A test (user, context) query with its relevant items and its candidates.
struct Query {
    user: u32,
    context: ContextSituation,
    relevant: HashSet<u32>,
    candidates: Vec<u32>,
}

fn build_queries(train: &Dataset, test: &Dataset, threshold: f64) -> Vec<Query> {
    let mut rated: HashMap<(u32, &ContextSituation), HashSet<u32>> = HashMap::new();
    for r in &train.ratings {
        rated.entry((r.user, &r.context)).or_default().insert(r.item);
    }
    let mut relevant: BTreeMap<(u32, &ContextSituation), HashSet<u32>> = BTreeMap::new();
    for r in &test.ratings {
        let e = relevant.entry((r.user, &r.context)).or_default();
        if r.rating >= threshold {
            e.insert(r.item);
        }
    }
    let all_items = test.items.len() as u32;
    relevant
        .into_iter()
        .filter(|(_, rel)| !rel.is_empty())
        .map(|((user, context), rel)| {
            let seen = rated.get(&(user, context));
            let candidates = (0..all_items)
                .filter(|t| seen.is_none_or(|s| !s.contains(t)))
                .collect();
            Query {
                user,
                context: context.clone(),
                relevant: rel,
                candidates,
            }
        })
        .collect()
}

fn score_fold(model: &TrainedModel, queries: &[Query], top_n: usize) -> Option<Metrics> {
    let per_query: Vec<Metrics> = queries
        .iter()
        .map(|q| {
            let ranked = recommend_topn(model, q.user, &q.context, &q.candidates, top_n);
            let (precision, recall) = precision_recall_at_n(&ranked, &q.relevant);
            Metrics {
                precision,
                recall,
                ndcg: ndcg_at_n(&ranked, &q.relevant),
            }
        })
        .collect();
    Metrics::mean(&per_query)
}

fn run_fold(
    fold: usize,
    train: &Dataset,
    test: &Dataset,
    specs: &[ModelSpec],
    cfg: &CvConfig,
) -> Result<Vec<FoldResult>> {
    let queries = build_queries(train, test, cfg.relevance_threshold);
    specs
        .iter()
        .map(|spec| {
            if queries.is_empty() {
                return Ok(FoldResult { fold, pairs: 0, metrics: None, fallbacks: None });
            }
            let model = spec.train(train)?;
            let fallbacks = match &model {
                TrainedModel::Prefilter(p) => Some(queries.iter().filter(|q| p.uses_fallback(&q.context)).count()),
                _ => None,
            };
            Ok(FoldResult {
                fold,
                pairs: queries.len(),
                metrics: score_fold(&model, &queries, cfg.top_n),
                fallbacks,
            })
        })
        .collect()
}

/// Trains every spec on each training split and scores top-N lists for the
/// test (user, context) pairs that have at least one relevant item.
///
/// Candidates are all items except those the user rated in that context in
/// the training split. Results are identical for any `jobs` value.
pub fn run_cv_experiment(dataset: &Dataset, specs: &[ModelSpec], cfg: &CvConfig) -> Result<EvalReport> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }
    if cfg.top_n == 0 {
        return Err(Error::InvalidArgument("top-N cutoff must be at least 1".into()));
    }
    let folds = fold_indices(dataset.len(), cfg.k, cfg.seed)?;
    let split = |i: usize| {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (dataset.subset(&train), dataset.subset(&folds[i]))
    };

    let mut per_fold: Vec<Option<Result<Vec<FoldResult>>>> = (0..cfg.k).map(|_| None).collect();
    if cfg.jobs <= 1 {
        for (i, slot) in per_fold.iter_mut().enumerate() {
            let (train, test) = split(i);
            *slot = Some(run_fold(i, &train, &test, specs, cfg));
        }
    } else {
        let next = Mutex::new(0usize);
        let results = Mutex::new(&mut per_fold);
        std::thread::scope(|s| {
            for _ in 0..cfg.jobs.min(cfg.k) {
                s.spawn(|| loop {
                    let i = {
                        let mut n = next.lock().unwrap();
                        let i = *n;
                        *n += 1;
                        i
                    };
                    if i >= cfg.k {
                        break;
                    }
                    let (train, test) = split(i);
                    let r = run_fold(i, &train, &test, specs, cfg);
                    results.lock().unwrap()[i] = Some(r);
                });
            }
        });
    }

    let mut models: Vec<ModelReport> = specs
        .iter()
        .map(|s| ModelReport {
            model: s.kind.name().to_string(),
            folds: Vec::with_capacity(cfg.k),
        })
        .collect();
    for slot in per_fold {
        let fold = slot.expect("every fold is evaluated")?;
        for (m, r) in models.iter_mut().zip(fold) {
            m.folds.push(r);
        }
    }
    Ok(EvalReport {
        k: cfg.k,
        top_n: cfg.top_n,
        relevance_threshold: cfg.relevance_threshold,
        models,
    })
}
