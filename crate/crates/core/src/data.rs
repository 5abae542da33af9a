//! Contextual rating datasets: schema, interning, CSV ingestion and k-fold splits.
//!
//! The on-disk format is a flat CSV with a header row
//! `user,item,rating,<dim1>,...,<dimN>`, one column per context dimension.
//! Context cells hold a condition label, `na`, or nothing (same as `na`).
//! Lines starting with `#` are comments.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The reserved "not available" condition. Always index 0 of every dimension.
pub const NA: &str = "na";

/// Insertion-ordered string interner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl FromIterator<String> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = Vocabulary::new();
        for label in iter {
            v.intern(&label);
        }
        v
    }
}

/// One context dimension and its condition vocabulary (`na` first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    name: String,
    conditions: Vocabulary,
}

impl Dimension {
    fn new(name: &str) -> Self {
        let mut conditions = Vocabulary::new();
        conditions.intern(NA);
        Dimension {
            name: name.to_owned(),
            conditions,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Condition labels, `na` at index 0.
    pub fn conditions(&self) -> &[String] {
        self.conditions.labels()
    }

    /// Number of conditions including `na`.
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn condition(&self, label: &str) -> Option<u32> {
        self.conditions.get(&fold_condition(label))
    }

    pub fn condition_label(&self, index: u32) -> Option<&str> {
        self.conditions.label(index)
    }
}

/// Condition labels are trimmed and case-folded; empty means `na`.
fn fold_condition(label: &str) -> String {
    let folded = label.trim().to_lowercase();
    if folded.is_empty() {
        NA.to_owned()
    } else {
        folded
    }
}

/// Ordered context dimensions with their condition vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextSchema {
    dimensions: Vec<Dimension>,
}

impl ContextSchema {
    /// Builds a schema with only `na` in every dimension.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut dimensions = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let name = name.as_ref().trim();
            if name.is_empty() {
                return Err(Error::format(None, format!("dimension {} has an empty name", i + 1)));
            }
            if let Some(prev) = seen.insert(name.to_lowercase(), i) {
                return Err(Error::format(
                    None,
                    format!(
                        "duplicate dimension name {name:?} (columns {} and {})",
                        prev + 4,
                        i + 4
                    ),
                ));
            }
            dimensions.push(Dimension::new(name));
        }
        Ok(ContextSchema { dimensions })
    }

    /// Builds a schema from `(name, conditions)` pairs. `na` is added in front
    /// of each condition list when absent.
    pub fn with_conditions<S: AsRef<str>>(dims: &[(S, Vec<S>)]) -> Result<Self> {
        let names: Vec<&str> = dims.iter().map(|(n, _)| n.as_ref()).collect();
        let mut schema = ContextSchema::new(&names)?;
        for (i, (_, conds)) in dims.iter().enumerate() {
            for c in conds {
                schema.intern_condition(i, c.as_ref());
            }
        }
        Ok(schema)
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, i: usize) -> &Dimension {
        &self.dimensions[i]
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    /// Index of a dimension by case-insensitive name.
    pub fn dimension_index(&self, name: &str) -> Option<usize> {
        let name = name.trim().to_lowercase();
        self.dimensions
            .iter()
            .position(|d| d.name.to_lowercase() == name)
    }

    /// Total number of non-`na` conditions across dimensions.
    pub fn condition_count(&self) -> usize {
        self.dimensions.iter().map(|d| d.len() - 1).sum()
    }

    pub fn intern_condition(&mut self, dim: usize, label: &str) -> u32 {
        self.dimensions[dim].conditions.intern(&fold_condition(label))
    }

    /// The all-`na` situation.
    pub fn anchor(&self) -> ContextSituation {
        ContextSituation(vec![0; self.len()])
    }

    pub fn validate(&self, situation: &ContextSituation) -> Result<()> {
        if situation.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "context has {} slots, schema has {} dimensions",
                situation.len(),
                self.len()
            )));
        }
        for (i, (&c, d)) in situation.0.iter().zip(&self.dimensions).enumerate() {
            if c as usize >= d.len() {
                return Err(Error::InvalidArgument(format!(
                    "condition index {c} out of range for dimension {i} ({})",
                    d.name
                )));
            }
        }
        Ok(())
    }

    /// Builds a situation from `dimension=condition` pairs; unlisted
    /// dimensions are `na`.
    pub fn situation_from_pairs<S: AsRef<str>>(&self, pairs: &[(S, S)]) -> Result<ContextSituation> {
        let mut slots = vec![0u32; self.len()];
        for (dim, cond) in pairs {
            let (dim, cond) = (dim.as_ref(), cond.as_ref());
            let i = self.dimension_index(dim).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown dimension in `{dim}={cond}`"))
            })?;
            slots[i] = self.dimensions[i].condition(cond).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown condition in `{dim}={cond}`"))
            })?;
        }
        Ok(ContextSituation(slots))
    }

    /// Parses `dim=cond;dim=cond` (also accepts `,` or `:` as separators
    /// between pairs and `:` between a dimension and its condition).
    pub fn parse_situation(&self, text: &str) -> Result<ContextSituation> {
        let mut pairs = Vec::new();
        for part in text.split([';', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            let (d, c) = part
                .split_once('=')
                .or_else(|| part.split_once(':'))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("expected `dimension=condition`, got `{part}`"))
                })?;
            pairs.push((d.trim(), c.trim()));
        }
        self.situation_from_pairs(&pairs)
    }

    /// Human-readable `dim: cond` list of the non-`na` slots.
    pub fn describe(&self, situation: &ContextSituation) -> String {
        let parts: Vec<String> = situation
            .0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| {
                let d = &self.dimensions[i];
                format!("{}: {}", d.name, d.condition_label(c).unwrap_or("?"))
            })
            .collect();
        if parts.is_empty() {
            NA.to_owned()
        } else {
            parts.join("; ")
        }
    }
}

/// Flat indexing of every (dimension, condition) pair of a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConditionLayout {
    sizes: Vec<usize>,
    starts: Vec<usize>,
    total: usize,
}

impl ConditionLayout {
    pub(crate) fn new(schema: &ContextSchema) -> Self {
        Self::from_sizes(schema.dimensions().iter().map(|d| d.len()).collect())
    }

    pub(crate) fn from_sizes(sizes: Vec<usize>) -> Self {
        let mut starts = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in &sizes {
            starts.push(total);
            total += n;
        }
        ConditionLayout { sizes, starts, total }
    }

    pub(crate) fn index(&self, dim: usize, cond: u32) -> usize {
        self.starts[dim] + cond as usize
    }

    pub(crate) fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub(crate) fn size(&self, dim: usize) -> usize {
        self.sizes[dim]
    }

    pub(crate) fn total(&self) -> usize {
        self.total
    }
}

/// One condition index per dimension; 0 is `na`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextSituation(pub Vec<u32>);

impl ContextSituation {
    pub fn new(conditions: Vec<u32>) -> Self {
        ContextSituation(conditions)
    }

    pub fn anchor(dimensions: usize) -> Self {
        ContextSituation(vec![0; dimensions])
    }

    pub fn is_anchor(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn conditions(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for ContextSituation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualRating {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
    pub context: ContextSituation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 1.0, max: 5.0 }
    }
}

impl RatingScale {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.min && r <= self.max
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub scale: RatingScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: ContextSchema,
    pub users: Vocabulary,
    pub items: Vocabulary,
    pub ratings: Vec<ContextualRating>,
    pub scale: RatingScale,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn mean_rating(&self) -> f64 {
        if self.ratings.is_empty() {
            return 0.0;
        }
        self.ratings.iter().map(|r| r.rating).sum::<f64>() / self.ratings.len() as f64
    }

    /// Same schema and vocabularies, ratings at `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            users: self.users.clone(),
            items: self.items.clone(),
            ratings: indices.iter().map(|&i| self.ratings[i].clone()).collect(),
            scale: self.scale,
        }
    }

    /// Same schema and vocabularies, ratings matching `keep` in order.
    pub fn filter(&self, mut keep: impl FnMut(&ContextualRating) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            users: self.users.clone(),
            items: self.items.clone(),
            ratings: self.ratings.iter().filter(|r| keep(r)).cloned().collect(),
            scale: self.scale,
        }
    }

    /// Ratings per user (indexed by interned id).
    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.users.len()];
        for r in &self.ratings {
            counts[r.user as usize] += 1;
        }
        counts
    }

    /// Fraction of the user x item grid that carries at least one rating.
    pub fn density(&self) -> f64 {
        let cells = self.users.len() * self.items.len();
        if cells == 0 {
            return 0.0;
        }
        let mut pairs: Vec<(u32, u32)> = self.ratings.iter().map(|r| (r.user, r.item)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs.len() as f64 / cells as f64
    }
}

const HEADER_PREFIX: [&str; 3] = ["user", "item", "rating"];

/// Reads a contextual rating CSV.
pub fn parse_dataset<R: Read>(source: R, options: &ParseOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::format(Some(1), "missing header row")),
    };
    let header_line = header.position().map(|p| p.line());
    if header.len() < 3
        || !header
            .iter()
            .zip(HEADER_PREFIX)
            .all(|(got, want)| got.eq_ignore_ascii_case(want))
    {
        return Err(Error::format(
            header_line,
            "header must start with `user,item,rating`",
        ));
    }
    let dim_names: Vec<&str> = header.iter().skip(3).collect();
    let mut schema = ContextSchema::new(&dim_names).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(header_line, message),
        other => other,
    })?;
    let width = header.len();

    let mut users = Vocabulary::new();
    let mut items = Vocabulary::new();
    let mut ratings = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        if rec.len() != width {
            return Err(Error::format(
                line,
                format!("expected {width} columns, found {}", rec.len()),
            ));
        }
        let rating: f64 = rec[2]
            .parse()
            .map_err(|_| Error::value(line, format!("rating {:?} is not a number", &rec[2])))?;
        if !rating.is_finite() || !options.scale.contains(rating) {
            return Err(Error::value(
                line,
                format!(
                    "rating {rating} outside scale [{}, {}]",
                    options.scale.min, options.scale.max
                ),
            ));
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::value(line, "empty user or item id"));
        }
        let user = users.intern(&rec[0]);
        let item = items.intern(&rec[1]);
        let context = (0..schema.len())
            .map(|d| schema.intern_condition(d, &rec[3 + d]))
            .collect();
        ratings.push(ContextualRating {
            user,
            item,
            rating,
            context: ContextSituation(context),
        });
    }

    Ok(Dataset {
        schema,
        users,
        items,
        ratings,
        scale: options.scale,
    })
}

/// Writes `dataset` in the format accepted by [`parse_dataset`].
pub fn write_dataset<W: Write>(dataset: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = HEADER_PREFIX.to_vec();
    header.extend(dataset.schema.dimensions().iter().map(|d| d.name()));
    w.write_record(&header)?;
    for r in &dataset.ratings {
        let mut row = Vec::with_capacity(header.len());
        row.push(dataset.users.label(r.user).unwrap_or_default().to_owned());
        row.push(dataset.items.label(r.item).unwrap_or_default().to_owned());
        row.push(format!("{}", r.rating));
        for (d, &c) in r.context.0.iter().enumerate() {
            let label = dataset.schema.dimension(d).condition_label(c).unwrap_or(NA);
            row.push(label.to_owned());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Test-fold rating indices, each fold sorted ascending.
pub fn fold_indices(len: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if len == 0 {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    if k > len {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the rating count {len}"
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (len / k, len % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Deterministic k-fold split into `(train, test)` pairs.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let folds = fold_indices(dataset.len(), k, seed)?;
    let mut fold_of = vec![0usize; dataset.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            fold_of[i] = f;
        }
    }
    Ok(folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] != f).collect();
            (dataset.subset(&train), dataset.subset(test))
        })
        .collect())
}
