//! Reading contextual effects back out of trained models.

use std::collections::BTreeMap;
use std::io::Write;

use crate::data::{ContextSchema, ContextSituation, Dataset};
use crate::deviation::{DeviationModel, Granularity};
use crate::error::{Error, Result};
use crate::eval::align;
use crate::ContextSimilarity;

/// Distinct situations observed in a dataset, with occurrence counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextCatalog {
    entries: BTreeMap<ContextSituation, usize>,
}

impl ContextCatalog {
    pub fn from_dataset(data: &Dataset) -> Self {
        let mut entries = BTreeMap::new();
        for r in &data.ratings {
            *entries.entry(r.context.clone()).or_insert(0) += 1;
        }
        ContextCatalog { entries }
    }

    /// Zero counts are dropped.
    pub fn from_counts(counts: impl IntoIterator<Item = (ContextSituation, usize)>) -> Self {
        let mut entries = BTreeMap::new();
        for (c, n) in counts {
            if n > 0 {
                *entries.entry(c).or_insert(0) += n;
            }
        }
        ContextCatalog { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, situation: &ContextSituation) -> usize {
        self.entries.get(situation).copied().unwrap_or(0)
    }

    /// Situations in ascending order with their counts.
    pub fn iter(&self) -> impl Iterator<Item = (&ContextSituation, usize)> {
        self.entries.iter().map(|(c, &n)| (c, n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarContext {
    pub situation: ContextSituation,
    pub similarity: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarContextsReport {
    pub model: String,
    pub target: ContextSituation,
    pub rows: Vec<SimilarContext>,
}

/// Ranks every catalog situation other than `target` by learned similarity
/// to it and keeps the best `k`. Ties go to the better-supported situation,
/// then to the smaller situation in index order.
pub fn top_similar_contexts(
    model: &dyn ContextSimilarity,
    model_name: &str,
    catalog: &ContextCatalog,
    target: &ContextSituation,
    k: usize,
) -> Result<SimilarContextsReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(catalog.len());
    for (c, n) in catalog.iter() {
        if c == target {
            continue;
        }
        rows.push(SimilarContext {
            situation: c.clone(),
            similarity: model.context_similarity(target, c)?,
            support: n,
        });
    }
    rows.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(b.support.cmp(&a.support))
            .then(a.situation.cmp(&b.situation))
    });
    rows.truncate(k);
    Ok(SimilarContextsReport {
        model: model_name.to_string(),
        target: target.clone(),
        rows,
    })
}

/// Several reports under one `model,target,rank,context,similarity,support`
/// header, in the order given, each labelled through its own schema.
pub fn write_similar_contexts_csv<'a, W: Write>(
    reports: impl IntoIterator<Item = (&'a SimilarContextsReport, &'a ContextSchema)>,
    sink: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["model", "target", "rank", "context", "similarity", "support"])?;
    for (report, schema) in reports {
        let target = schema.describe(&report.target);
        for (i, r) in report.rows.iter().enumerate() {
            w.write_record([
                report.model.as_str(),
                &target,
                &(i + 1).to_string(),
                &schema.describe(&r.situation),
                &r.similarity.to_string(),
                &r.support.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl SimilarContextsReport {
    /// `model,target,rank,context,similarity,support`.
    pub fn write_csv<W: Write>(&self, schema: &ContextSchema, sink: W) -> Result<()> {
        write_similar_contexts_csv([(self, schema)], sink)
    }

    pub fn to_table(&self, schema: &ContextSchema) -> String {
        let mut rows = vec![vec![
            "rank".to_string(),
            "similarity".into(),
            "support".into(),
            "context".into(),
        ]];
        for (i, r) in self.rows.iter().enumerate() {
            rows.push(vec![
                (i + 1).to_string(),
                format!("{:.4}", r.similarity),
                r.support.to_string(),
                schema.describe(&r.situation),
            ]);
        }
        format!(
            "{}: contexts most similar to [{}]\n{}",
            self.model,
            schema.describe(&self.target),
            align(&rows)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationRow {
    pub dimension: usize,
    pub condition: u32,
    /// User or item id for per-entity rows; `None` for the shared value.
    pub entity: Option<u32>,
    pub deviation: f64,
    /// Training ratings carrying this condition (and entity, if any).
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub granularity: Granularity,
    pub rows: Vec<DeviationRow>,
}

/// Every learned deviation with its training support.
///
/// Shared rows cover every condition. For per-user and per-item models,
/// entity rows are added where the entity was seen with the condition;
/// elsewhere the effective deviation equals the shared row. Rows are grouped
/// by dimension and sorted by absolute deviation, largest first.
pub fn deviation_report(model: &DeviationModel, train: &Dataset) -> DeviationReport {
    let dims = model.dimension_count();
    let granularity = model.granularity();
    let mut global_support: Vec<Vec<usize>> = (0..dims).map(|d| vec![0; model.condition_count(d)]).collect();
    let mut entity_support: BTreeMap<(usize, u32, u32), usize> = BTreeMap::new();
    for r in &train.ratings {
        for (d, &c) in r.context.0.iter().enumerate().take(dims) {
            if let Some(n) = global_support[d].get_mut(c as usize) {
                *n += 1;
            }
            let entity = match granularity {
                Granularity::Global => continue,
                Granularity::PerUser => r.user,
                Granularity::PerItem => r.item,
            };
            if c != 0 && (entity as usize) < model.entity_count() {
                *entity_support.entry((d, c, entity)).or_default() += 1;
            }
        }
    }

    let mut rows = Vec::new();
    for (d, support) in global_support.iter().enumerate() {
        let start = rows.len();
        for (c, &n) in support.iter().enumerate() {
            rows.push(DeviationRow {
                dimension: d,
                condition: c as u32,
                entity: None,
                deviation: model.global_deviation(d, c as u32),
                support: n,
            });
        }
        for (&(_, c, e), &n) in entity_support.range((d, 0, 0)..(d + 1, 0, 0)) {
            rows.push(DeviationRow {
                dimension: d,
                condition: c,
                entity: Some(e),
                deviation: model.deviation(d, c, Some(e)),
                support: n,
            });
        }
        rows[start..].sort_by(|a, b| {
            b.deviation
                .abs()
                .total_cmp(&a.deviation.abs())
                .then(a.condition.cmp(&b.condition))
                .then(a.entity.cmp(&b.entity))
        });
    }
    DeviationReport { granularity, rows }
}

impl DeviationReport {
    fn entity_label<'a>(&self, data: &'a Dataset, row: &DeviationRow) -> &'a str {
        let vocab = match self.granularity {
            Granularity::PerItem => &data.items,
            _ => &data.users,
        };
        row.entity.and_then(|e| vocab.label(e)).unwrap_or("")
    }

    fn labels<'a>(schema: &'a ContextSchema, row: &DeviationRow) -> (&'a str, &'a str) {
        let dim = schema.dimension(row.dimension);
        (dim.name(), dim.condition_label(row.condition).unwrap_or("?"))
    }

    /// `dimension,condition,entity,deviation,support`; `data` supplies labels.
    pub fn write_csv<W: Write>(&self, data: &Dataset, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["dimension", "condition", "entity", "deviation", "support"])?;
        for r in &self.rows {
            let (d, c) = Self::labels(&data.schema, r);
            w.write_record([d, c, self.entity_label(data, r), &r.deviation.to_string(), &r.support.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self, data: &Dataset) -> String {
        let mut rows = vec![vec![
            "dimension".to_string(),
            "condition".into(),
            "deviation".into(),
            "support".into(),
            "entity".into(),
        ]];
        for r in &self.rows {
            let (d, c) = Self::labels(&data.schema, r);
            rows.push(vec![
                d.to_string(),
                c.to_string(),
                format!("{:+.4}", r.deviation),
                r.support.to_string(),
                self.entity_label(data, r).to_string(),
            ]);
        }
        format!("deviations ({})\n{}", self.granularity, align(&rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_dataset, ParseOptions};
    use crate::mf::MfParams;
    use crate::similarity::{Backend, McsParams, SimilarityModel};

    fn sit(v: &[u32]) -> ContextSituation {
        ContextSituation(v.to_vec())
    }

    /// Similarity from a fixed closure, for ranking tests.
    struct Fixed<F>(F);

    impl<F: Fn(&ContextSituation, &ContextSituation) -> f64> ContextSimilarity for Fixed<F> {
        fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> Result<f64> {
            Ok((self.0)(a, b))
        }
    }

    #[test]
    fn catalog_counts() {
        let d = parse_dataset(
            "user,item,rating,T\nu,a,1,x\nu,b,2,x\nv,a,3,na\n".as_bytes(),
            &ParseOptions::default(),
        )
        .unwrap();
        let c = ContextCatalog::from_dataset(&d);
        assert_eq!(c.len(), 2);
        assert_eq!(c.count(&sit(&[1])), 2);
        assert_eq!(c.count(&sit(&[0])), 1);
        assert_eq!(c.count(&sit(&[5])), 0);
    }

    #[test]
    fn mcs_colocated_neighbour_ranks_first() {
        let schema = ContextSchema::with_conditions(&[
            ("A", vec!["x", "y"]),
            ("B", vec!["p", "q"]),
        ])
        .unwrap();
        let mut mcs = McsParams::zeros(&schema, 1.0);
        mcs.set_coordinate(0, 1, 3.0);
        mcs.set_coordinate(0, 2, -2.0);
        mcs.set_coordinate(1, 1, 0.0); // p sits on na
        mcs.set_coordinate(1, 2, 1.5);
        let model = SimilarityModel::new(MfParams::zeros(3.0, 1, 1, 1), Backend::Mcs(mcs));
        let catalog = ContextCatalog::from_counts([
            (sit(&[1, 1]), 3),
            (sit(&[1, 0]), 1),
            (sit(&[2, 1]), 9),
            (sit(&[1, 2]), 4),
        ]);
        let r = top_similar_contexts(&model, "sim-mcs", &catalog, &sit(&[1, 1]), 5).unwrap();
        assert_eq!(r.rows.len(), 3, "target excluded, k truncates to catalog");
        assert_eq!(r.rows[0].situation, sit(&[1, 0]));
        assert_eq!(r.rows[0].similarity, 1.0);
        assert!(r.rows.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    }

    #[test]
    fn ties_prefer_support_then_order() {
        let m = Fixed(|_: &ContextSituation, _: &ContextSituation| 0.5);
        let catalog = ContextCatalog::from_counts([(sit(&[2]), 1), (sit(&[1]), 1), (sit(&[3]), 7)]);
        let r = top_similar_contexts(&m, "m", &catalog, &sit(&[0]), 3).unwrap();
        let order: Vec<_> = r.rows.iter().map(|r| r.situation.clone()).collect();
        assert_eq!(order, [sit(&[3]), sit(&[1]), sit(&[2])]);
    }

    #[test]
    fn bounds() {
        let m = Fixed(|_: &ContextSituation, _: &ContextSituation| 1.0);
        let empty = ContextCatalog::default();
        assert!(top_similar_contexts(&m, "m", &empty, &sit(&[0]), 0).is_err());
        assert!(top_similar_contexts(&m, "m", &empty, &sit(&[0]), 3).unwrap().rows.is_empty());
    }

    #[test]
    fn deviation_report_support_and_order() {
        let d = parse_dataset(
            "user,item,rating,Time,Loc\nu,a,1,weekday,home\nu,b,2,weekday,na\nv,a,3,na,home\nv,b,3,weekend,na\n"
                .as_bytes(),
            &ParseOptions::default(),
        )
        .unwrap();
        let mut m = DeviationModel::new(MfParams::zeros(2.0, 2, 2, 1), &d.schema, Granularity::PerUser);
        let weekday = d.schema.dimension(0).condition("weekday").unwrap();
        let weekend = d.schema.dimension(0).condition("weekend").unwrap();
        m.set_global_deviation(0, weekday, 0.5).unwrap();
        m.set_global_deviation(0, weekend, -0.7).unwrap();
        m.set_offset(0, weekday, 0, 0.25).unwrap();
        let report = deviation_report(&m, &d);
        let time: Vec<&DeviationRow> = report.rows.iter().filter(|r| r.dimension == 0).collect();
        assert_eq!((time[0].condition, time[0].entity, time[0].deviation), (weekday, Some(0), 0.75));
        assert_eq!(time[0].support, 2);
        assert_eq!((time[1].condition, time[1].entity, time[1].support), (weekend, None, 1));
        assert_eq!((time[2].condition, time[2].entity, time[2].deviation), (weekend, Some(1), -0.7));
        assert_eq!((time[3].condition, time[3].entity, time[3].support), (weekday, None, 2));
        let na = report.rows.iter().find(|r| r.dimension == 1 && r.condition == 0).unwrap();
        assert_eq!((na.deviation, na.support), (0.0, 2));
        let mut csv = Vec::new();
        report.write_csv(&d, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.contains("Time,weekday,u,0.75,2"), "{text}");
        assert!(report.to_table(&d).contains("-0.7000"));
    }
}
