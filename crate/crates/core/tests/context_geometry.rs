use ctxrec::cp::cp_train;
use ctxrec::explain::{top_similar_contexts, ContextCatalog};
use ctxrec::similarity::{Backend, IcsParams, McsParams, SimilarityModel};
use ctxrec::synth::{planted_cp, sts_like, PlantedCpConfig, ShapeConfig};
use ctxrec::{ContextSchema, ContextSituation, MfParams, TrainConfig};
use proptest::prelude::*;

fn schema() -> ContextSchema {
    ContextSchema::with_conditions(&[
        ("a", vec!["a1", "a2", "a3"]),
        ("b", vec!["b1", "b2"]),
        ("c", vec!["c1", "c2", "c3", "c4"]),
    ])
    .unwrap()
}

fn situation() -> impl Strategy<Value = ContextSituation> {
    (0u32..4, 0u32..3, 0u32..5).prop_map(|(a, b, c)| ContextSituation(vec![a, b, c]))
}

fn mcs(coords: &[f64], alpha: f64) -> McsParams {
    let s = schema();
    let mut p = McsParams::zeros(&s, alpha);
    let mut k = 0;
    for d in 0..s.len() {
        for c in 0..s.dimension(d).len() as u32 {
            p.set_coordinate(d, c, coords[k]);
            k += 1;
        }
    }
    p
}

const COORDS: usize = 4 + 3 + 5;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mcs_is_a_metric_similarity(
        coords in proptest::collection::vec(-3.0f64..3.0, COORDS),
        alpha in 0.1f64..4.0,
        x in situation(),
        y in situation(),
        z in situation(),
    ) {
        let p = mcs(&coords, alpha);
        let sxy = p.similarity(&x, &y);
        prop_assert_eq!(sxy, p.similarity(&y, &x));
        prop_assert_eq!(sxy == 1.0, p.distance(&x, &y) == 0.0);
        let d = |u: &ContextSituation, v: &ContextSituation| -p.similarity(u, v).ln() / alpha;
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    }
}

proptest! {
    #[test]
    fn alpha_preserves_retrieval_order(
        coords in proptest::collection::vec(-3.0f64..3.0, COORDS),
        target in situation(),
        catalog in proptest::collection::vec((situation(), 1usize..5), 1..30),
    ) {
        let catalog = ContextCatalog::from_counts(catalog);
        let order = |alpha: f64| {
            let m = SimilarityModel::new(MfParams::zeros(3.0, 1, 1, 1), Backend::Mcs(mcs(&coords, alpha)));
            top_similar_contexts(&m, "sim-mcs", &catalog, &target, 100)
                .unwrap()
                .rows
                .into_iter()
                .map(|r| r.situation)
                .collect::<Vec<_>>()
        };
        let base = order(1.0);
        prop_assert_eq!(&base, &order(0.25));
        prop_assert_eq!(&base, &order(3.5));
    }
}

#[test]
fn duplicated_cp_conditions_are_similar() {
    let plant = planted_cp(&PlantedCpConfig {
        duplicate_condition: true,
        ..PlantedCpConfig::default()
    });
    let cfg = TrainConfig {
        rank: 2,
        learning_rate: 0.02,
        lambda: 0.0,
        epochs: 300,
        init_spread: 0.3,
        ..TrainConfig::default()
    };
    let m = cp_train(&plant.dataset, &cfg).unwrap();
    let one = ContextSituation(vec![1, 0]);
    let two = ContextSituation(vec![2, 0]);
    let s = m.context_similarity(&one, &two);
    assert!(s > 0.95, "similarity {s}");
}

/// A hand-planted ICS table in which `temperature=cold` is far from every
/// other temperature condition should retrieve cold situations first.
#[test]
fn planted_cold_dominates_retrieval() {
    let data = sts_like(&ShapeConfig::sts(42));
    let s = &data.schema;
    let temp = s.dimension_index("temperature").unwrap();
    let cold = s.dimension(temp).condition("cold").unwrap();

    let mut ics = IcsParams::ones(s);
    for d in 0..s.len() {
        let n = s.dimension(d).len() as u32;
        for a in 0..n {
            ics.mark_observed(d, a);
            for b in (a + 1)..n {
                let v = if d == temp && (a == cold || b == cold) { 0.2 } else { 0.9 };
                ics.set_entry(d, a, b, v).unwrap();
            }
        }
    }
    let model = SimilarityModel::new(MfParams::zeros(3.0, 1, 1, 1), Backend::Ics(ics));
    let catalog = ContextCatalog::from_dataset(&data);
    let target = s.situation_from_pairs(&[("temperature", "cold")]).unwrap();
    let report = top_similar_contexts(&model, "sim-ics", &catalog, &target, 5).unwrap();
    assert_eq!(report.rows.len(), 5);
    for row in &report.rows {
        assert_eq!(row.situation.0[temp], cold, "{}", s.describe(&row.situation));
    }
}
