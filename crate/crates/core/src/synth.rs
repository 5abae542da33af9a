//! Seeded synthetic datasets with planted contextual structure.
//!
//! Users are labelled `u0, u1, ...` and items `i0, i1, ...`. Every user and
//! item appears at least once when the rating count allows it.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cp::CpModel;
use crate::data::{ContextSchema, ContextSituation, ContextualRating, Dataset, RatingScale, Vocabulary};
use crate::error::Result;

/// Base predictor shared by the generators: `mu + b_u + b_t + p_u . q_t`.
struct PlantedBase {
    mu: f64,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    user_factors: Vec<[f64; 2]>,
    item_factors: Vec<[f64; 2]>,
}

impl PlantedBase {
    fn new(rng: &mut ChaCha8Rng, users: usize, items: usize, mu: f64, bias: f64, factor: f64) -> Self {
        let mut uniform = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-s..=s)).collect() };
        let user_bias = uniform(users, bias);
        let item_bias = uniform(items, bias);
        let uf = uniform(2 * users, factor);
        let itf = uniform(2 * items, factor);
        PlantedBase {
            mu,
            user_bias,
            item_bias,
            user_factors: uf.chunks(2).map(|c| [c[0], c[1]]).collect(),
            item_factors: itf.chunks(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    fn predict(&self, u: usize, t: usize) -> f64 {
        let (p, q) = (self.user_factors[u], self.item_factors[t]);
        self.mu + self.user_bias[u] + self.item_bias[t] + p[0] * q[0] + p[1] * q[1]
    }
}

fn vocab(prefix: &str, n: usize) -> Vocabulary {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn dataset(schema: ContextSchema, users: usize, items: usize, ratings: Vec<ContextualRating>) -> Dataset {
    Dataset {
        schema,
        users: vocab("u", users),
        items: vocab("i", items),
        ratings,
        scale: RatingScale::default(),
    }
}

/// The `i`-th (user, item) pair: round-robin until every id is covered, then
/// uniform.
fn pick_pair(rng: &mut ChaCha8Rng, i: usize, users: usize, items: usize) -> (usize, usize) {
    let u = if i < users { i } else { rng.gen_range(0..users) };
    let t = if i < items { i } else { rng.gen_range(0..items) };
    (u, t)
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn generic_schema(dims: usize, conditions: usize) -> ContextSchema {
    let spec: Vec<(String, Vec<String>)> = (0..dims)
        .map(|d| (format!("d{d}"), (1..=conditions).map(|c| format!("c{c}")).collect()))
        .collect();
    ContextSchema::with_conditions(&spec).expect("generated names are unique")
}

fn uniform_context(rng: &mut ChaCha8Rng, dims: usize, conditions: usize) -> ContextSituation {
    ContextSituation((0..dims).map(|_| rng.gen_range(0..=conditions as u32)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub users: usize,
    pub items: usize,
    pub dimensions: usize,
    /// Non-`na` conditions per dimension.
    pub conditions: usize,
    pub ratings: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            users: 200,
            items: 100,
            dimensions: 3,
            conditions: 3,
            ratings: 10_000,
            noise: 0.05,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDeviation {
    pub dataset: Dataset,
    /// `[dimension][condition]`, `na` first and always 0.
    pub deviations: Vec<Vec<f64>>,
}

/// Ratings `P(u, t) + sum_i Dev(i, c_i) + noise` with one global deviation
/// per condition. Conditions are drawn uniformly per dimension, `na`
/// included.
///
/// The base is dominated by the user x item interaction, so ranking quality
/// hinges on how cleanly a model separates `P` from the contextual shift.
pub fn planted_deviation(cfg: &PlantedConfig) -> PlantedDeviation {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schema = generic_schema(cfg.dimensions, cfg.conditions);
    let base = PlantedBase::new(&mut rng, cfg.users, cfg.items, 3.0, 0.1, 0.9);
    let deviations: Vec<Vec<f64>> = (0..cfg.dimensions)
        .map(|_| {
            std::iter::once(0.0)
                .chain((0..cfg.conditions).map(|_| rng.gen_range(-0.7..=0.7)))
                .collect()
        })
        .collect();
    let scale = RatingScale::default();
    let ratings = (0..cfg.ratings)
        .map(|i| {
            let (u, t) = pick_pair(&mut rng, i, cfg.users, cfg.items);
            let context = uniform_context(&mut rng, cfg.dimensions, cfg.conditions);
            let shift: f64 = context.0.iter().enumerate().map(|(d, &c)| deviations[d][c as usize]).sum();
            let rating = scale.clamp(base.predict(u, t) + shift + gaussian(&mut rng, cfg.noise));
            ContextualRating { user: u as u32, item: t as u32, rating, context }
        })
        .collect();
    PlantedDeviation {
        dataset: dataset(schema, cfg.users, cfg.items, ratings),
        deviations,
    }
}

impl PlantedDeviation {
    /// `dimension,condition,deviation`.
    pub fn write_truth_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["dimension", "condition", "deviation"])?;
        for (d, devs) in self.deviations.iter().enumerate() {
            let dim = self.dataset.schema.dimension(d);
            for (c, v) in devs.iter().enumerate() {
                w.write_record([dim.name(), dim.condition_label(c as u32).unwrap_or_default(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedSimilarity {
    pub dataset: Dataset,
    /// `[dimension][condition]`: the planted `sim_i(na, condition)`.
    pub anchored: Vec<Vec<f64>>,
}

/// Ratio between consecutive planted similarity levels.
pub const PLANTED_SIMILARITY_STEP: f64 = 0.92;

/// Ratings `P(u, t) * Sim(c0, c) + noise` under planted per-dimension tables.
/// Contexts are drawn as in [`planted_deviation`]; the base is bias-heavy so
/// that enough ratings clear the relevance threshold.
///
/// Within each dimension the conditions get `sim(na, x) = STEP^k` for a
/// shuffled `k = 1..=conditions`, and non-`na` pairs follow the ratio rule
/// `sim(a, b) = min(s_a, s_b) / max(s_a, s_b)`. Situation similarity is then
/// `STEP^(L1 distance between level vectors)`, so nearest neighbours are
/// separated from the runner-up by a full factor of `STEP`.
pub fn planted_similarity(cfg: &PlantedConfig) -> PlantedSimilarity {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schema = generic_schema(cfg.dimensions, cfg.conditions);
    let base = PlantedBase::new(&mut rng, cfg.users, cfg.items, 4.0, 0.3, 0.3);
    let anchored: Vec<Vec<f64>> = (0..cfg.dimensions)
        .map(|_| {
            let mut levels: Vec<i32> = (1..=cfg.conditions as i32).collect();
            levels.shuffle(&mut rng);
            std::iter::once(1.0)
                .chain(levels.into_iter().map(|k| PLANTED_SIMILARITY_STEP.powi(k)))
                .collect()
        })
        .collect();
    let truth = PlantedSimilarity {
        dataset: dataset(schema, cfg.users, cfg.items, Vec::new()),
        anchored,
    };
    let scale = RatingScale::default();
    let ratings = (0..cfg.ratings)
        .map(|i| {
            let (u, t) = pick_pair(&mut rng, i, cfg.users, cfg.items);
            let context = uniform_context(&mut rng, cfg.dimensions, cfg.conditions);
            let sim = truth.anchored_similarity(&context);
            let rating = scale.clamp(base.predict(u, t) * sim + gaussian(&mut rng, cfg.noise));
            ContextualRating { user: u as u32, item: t as u32, rating, context }
        })
        .collect();
    PlantedSimilarity {
        dataset: Dataset { ratings, ..truth.dataset },
        anchored: truth.anchored,
    }
}

impl PlantedSimilarity {
    pub fn anchored_similarity(&self, context: &ContextSituation) -> f64 {
        context.0.iter().enumerate().map(|(d, &c)| self.anchored[d][c as usize]).product()
    }

    /// Planted `Sim(a, b)` under the ratio rule.
    pub fn similarity(&self, a: &ContextSituation, b: &ContextSituation) -> f64 {
        a.0.iter()
            .zip(&b.0)
            .enumerate()
            .map(|(d, (&x, &y))| {
                let (sx, sy) = (self.anchored[d][x as usize], self.anchored[d][y as usize]);
                sx.min(sy) / sx.max(sy)
            })
            .product()
    }

    /// `dimension,condition,similarity_to_na`.
    pub fn write_truth_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["dimension", "condition", "similarity_to_na"])?;
        for (d, sims) in self.anchored.iter().enumerate() {
            let dim = self.dataset.schema.dimension(d);
            for (c, v) in sims.iter().enumerate() {
                w.write_record([dim.name(), dim.condition_label(c as u32).unwrap_or_default(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCpConfig {
    pub users: usize,
    pub items: usize,
    /// Conditions per dimension, `na` included.
    pub dimension_sizes: Vec<usize>,
    pub rank: usize,
    pub noise: f64,
    /// Make condition 2 of the first dimension a copy of condition 1.
    pub duplicate_condition: bool,
    pub seed: u64,
}

impl Default for PlantedCpConfig {
    fn default() -> Self {
        PlantedCpConfig {
            users: 20,
            items: 20,
            dimension_sizes: vec![4, 3],
            rank: 2,
            noise: 0.0,
            duplicate_condition: false,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCp {
    /// One rating for every (user, item, situation) cell.
    pub dataset: Dataset,
    pub model: CpModel,
}

/// A dense tensor drawn from a planted CP model with mean 3.
pub fn planted_cp(cfg: &PlantedCpConfig) -> PlantedCp {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec: Vec<(String, Vec<String>)> = cfg
        .dimension_sizes
        .iter()
        .enumerate()
        .map(|(d, &n)| (format!("d{d}"), (1..n).map(|c| format!("c{c}")).collect()))
        .collect();
    let schema = ContextSchema::with_conditions(&spec).expect("generated names are unique");
    let mut model = CpModel::zeros(3.0, cfg.users, cfg.items, &schema, cfg.rank);
    for u in 0..cfg.users as u32 {
        model.user_vector_mut(u).iter_mut().for_each(|v| *v = rng.gen_range(-0.9..=0.9));
    }
    for t in 0..cfg.items as u32 {
        model.item_vector_mut(t).iter_mut().for_each(|v| *v = rng.gen_range(-0.9..=0.9));
    }
    for (d, &n) in cfg.dimension_sizes.iter().enumerate() {
        for c in 0..n as u32 {
            model.condition_vector_mut(d, c).iter_mut().for_each(|v| *v = rng.gen_range(0.5..=1.1));
        }
    }
    if cfg.duplicate_condition && cfg.dimension_sizes.first().is_some_and(|&n| n > 2) {
        let copy = model.condition_vector(0, 1).to_vec();
        model.condition_vector_mut(0, 2).copy_from_slice(&copy);
    }

    let mut situations = vec![ContextSituation(Vec::new())];
    for &n in &cfg.dimension_sizes {
        situations = situations
            .into_iter()
            .flat_map(|s| {
                (0..n as u32).map(move |c| {
                    let mut v = s.0.clone();
                    v.push(c);
                    ContextSituation(v)
                })
            })
            .collect();
    }
    let scale = RatingScale::default();
    let mut ratings = Vec::with_capacity(cfg.users * cfg.items * situations.len());
    for u in 0..cfg.users as u32 {
        for t in 0..cfg.items as u32 {
            for s in &situations {
                let rating = scale.clamp(model.predict(u, t, s) + gaussian(&mut rng, cfg.noise));
                ratings.push(ContextualRating { user: u, item: t, rating, context: s.clone() });
            }
        }
    }
    PlantedCp {
        dataset: dataset(schema, cfg.users, cfg.items, ratings),
        model,
    }
}

/// Dimension names and condition labels for the STS-shaped generator.
const STS_SCHEMA: [(&str, &[&str]); 14] = [
    ("distance", &["near by", "far away", "walking distance"]),
    ("time_available", &["half day", "one day", "more than a day"]),
    ("temperature", &["burning", "hot", "warm", "cold"]),
    ("crowdedness", &["crowded", "not crowded", "empty"]),
    ("knowledge_of_surroundings", &["new to city", "returning visitor", "citizen of the city", "tourist"]),
    ("season", &["spring", "summer", "autumn", "winter"]),
    ("budget", &["budget traveler", "price for quality", "high spender", "moderate"]),
    ("daytime", &["morning", "noon", "afternoon", "night"]),
    ("weather", &["sunny", "cloudy", "clear sky", "rainy"]),
    ("companion", &["alone", "with friends", "with family", "with girlfriend"]),
    ("mood", &["happy", "sad", "active", "lazy"]),
    ("weekday", &["weekday", "weekend", "holiday", "working day"]),
    ("travelgoal", &["visiting friends", "business", "religion", "health care"]),
    ("transport", &["no transportation", "a bicycle", "a car", "public transport"]),
];

/// Dimension names and condition labels for the in-car-music-shaped generator.
const INCAR_SCHEMA: [(&str, &[&str]); 8] = [
    ("drivingstyle", &["relaxed driving", "sport driving"]),
    ("landscape", &["coast line", "country side", "mountains", "urban"]),
    ("mood", &["active", "happy", "lazy", "sad"]),
    ("naturalphenomena", &["afternoon", "day time", "morning", "night"]),
    ("roadtype", &["city", "highway", "serpentine"]),
    ("sleepiness", &["awake", "sleepy"]),
    ("trafficconditions", &["free road", "lots of cars", "traffic jam"]),
    ("weather", &["cloudy", "rainy", "snowing", "sunny"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeConfig {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    /// Inclusive range of non-`na` dimensions per rating.
    pub active_dimensions: (usize, usize),
    pub seed: u64,
}

impl ShapeConfig {
    /// 325 users, 249 items, 2354 ratings over 14 dimensions and 53 conditions.
    pub fn sts(seed: u64) -> Self {
        ShapeConfig {
            users: 325,
            items: 249,
            ratings: 2354,
            active_dimensions: (1, 3),
            seed,
        }
    }

    /// 42 users, 139 items, 3251 ratings, one condition from 8 dimensions
    /// (26 conditions) per rating.
    pub fn incar(seed: u64) -> Self {
        ShapeConfig {
            users: 42,
            items: 139,
            ratings: 3251,
            active_dimensions: (1, 1),
            seed,
        }
    }
}

fn shaped(schema_spec: &[(&str, &[&str])], cfg: &ShapeConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec: Vec<(&str, Vec<&str>)> = schema_spec.iter().map(|(n, c)| (*n, c.to_vec())).collect();
    let schema = ContextSchema::with_conditions(&spec).expect("static schema is valid");
    let base = PlantedBase::new(&mut rng, cfg.users, cfg.items, 3.5, 0.5, 0.6);
    let deviations: Vec<Vec<f64>> = schema
        .dimensions()
        .iter()
        .map(|d| std::iter::once(0.0).chain((1..d.len()).map(|_| rng.gen_range(-0.6..=0.6))).collect())
        .collect();
    // Every condition is used at least once, in schema order, first.
    let all_conditions: Vec<(usize, u32)> = schema
        .dimensions()
        .iter()
        .enumerate()
        .flat_map(|(d, dim)| (1..dim.len() as u32).map(move |c| (d, c)))
        .collect();
    let dims = schema.len();
    let (lo, hi) = cfg.active_dimensions;
    let scale = RatingScale::default();
    let ratings = (0..cfg.ratings)
        .map(|i| {
            let (u, t) = pick_pair(&mut rng, i, cfg.users, cfg.items);
            let mut context = schema.anchor();
            let active = rng.gen_range(lo..=hi);
            let mut order: Vec<usize> = (0..dims).collect();
            order.shuffle(&mut rng);
            for &d in &order[..active] {
                context.0[d] = rng.gen_range(1..schema.dimension(d).len() as u32);
            }
            if let Some(&(d, c)) = all_conditions.get(i) {
                if active == 1 {
                    context = schema.anchor();
                }
                context.0[d] = c;
            }
            let shift: f64 = context.0.iter().enumerate().map(|(d, &c)| deviations[d][c as usize]).sum();
            let raw = base.predict(u, t) + shift + gaussian(&mut rng, 0.5);
            ContextualRating {
                user: u as u32,
                item: t as u32,
                rating: scale.clamp(raw.round()),
                context,
            }
        })
        .collect();
    dataset(schema, cfg.users, cfg.items, ratings)
}

/// Integer ratings shaped like a travel-recommendation dataset.
pub fn sts_like(cfg: &ShapeConfig) -> Dataset {
    shaped(&STS_SCHEMA, cfg)
}

/// Integer ratings shaped like an in-car music dataset.
pub fn incar_like(cfg: &ShapeConfig) -> Dataset {
    shaped(&INCAR_SCHEMA, cfg)
}
