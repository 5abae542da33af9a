//! Browser playground: trains small contextual models on planted synthetic
//! data and hands the results to JavaScript as JSON.
//!
//! The JSON builders are ordinary Rust functions so they can be tested
//! natively; the `#[wasm_bindgen]` layer only forwards to them.

use ctxrec::deviation::{dev_train, Granularity};
use ctxrec::explain::{top_similar_contexts, ContextCatalog};
use ctxrec::similarity::{sim_train, Backend, BackendConfig, SimilarityModel};
use ctxrec::synth::{planted_deviation, planted_similarity, PlantedConfig, PlantedDeviation, PlantedSimilarity};
use ctxrec::{ContextSchema, Dataset, TrainConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct DeviationRow {
    pub dimension: String,
    pub condition: String,
    pub planted: f64,
    pub learned: f64,
    pub support: usize,
}

#[derive(Debug, Serialize)]
pub struct Coordinate {
    pub dimension: String,
    pub condition: String,
    pub position: f64,
}

#[derive(Debug, Serialize)]
pub struct Neighbour {
    pub rank: usize,
    pub context: String,
    pub learned: f64,
    pub planted: f64,
    pub support: usize,
}

fn train_config(epochs: u32) -> TrainConfig {
    TrainConfig {
        epochs: epochs.max(1) as usize,
        ..TrainConfig::default()
    }
}

fn condition_support(data: &Dataset) -> Vec<Vec<usize>> {
    let mut counts: Vec<Vec<usize>> = data.schema.dimensions().iter().map(|d| vec![0; d.len()]).collect();
    for r in &data.ratings {
        for (d, &c) in r.context.0.iter().enumerate() {
            counts[d][c as usize] += 1;
        }
    }
    counts
}

/// Planted against learned global deviations, `na` rows included.
pub fn deviation_rows(plant: &PlantedDeviation, epochs: u32) -> Result<Vec<DeviationRow>, String> {
    let data = &plant.dataset;
    let model = dev_train(data, &train_config(epochs), Granularity::Global).map_err(|e| e.to_string())?;
    let support = condition_support(data);
    let mut rows = Vec::new();
    for (d, dim) in data.schema.dimensions().iter().enumerate() {
        for c in 0..dim.len() as u32 {
            rows.push(DeviationRow {
                dimension: dim.name().to_string(),
                condition: dim.condition_label(c).unwrap_or_default().to_string(),
                planted: plant.deviations[d][c as usize],
                learned: model.global_deviation(d, c),
                support: support[d][c as usize],
            });
        }
    }
    Ok(rows)
}

/// Learned MCS axis positions, one entry per condition.
pub fn mcs_coordinates(model: &SimilarityModel, schema: &ContextSchema) -> Vec<Coordinate> {
    let Backend::Mcs(p) = model.backend() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (d, dim) in schema.dimensions().iter().enumerate() {
        for c in 0..dim.len() as u32 {
            out.push(Coordinate {
                dimension: dim.name().to_string(),
                condition: dim.condition_label(c).unwrap_or_default().to_string(),
                position: p.coordinate(d, c),
            });
        }
    }
    out
}

/// Top-k observed situations by learned similarity to `target`, with the
/// planted similarity alongside.
pub fn neighbours(
    model: &SimilarityModel,
    plant: &PlantedSimilarity,
    target: &str,
    k: usize,
) -> Result<Vec<Neighbour>, String> {
    let data = &plant.dataset;
    let target = data.schema.parse_situation(target).map_err(|e| e.to_string())?;
    let catalog = ContextCatalog::from_dataset(data);
    let report = top_similar_contexts(model, "sim-ics", &catalog, &target, k).map_err(|e| e.to_string())?;
    Ok(report
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| Neighbour {
            rank: i + 1,
            context: data.schema.describe(&r.situation),
            learned: r.similarity,
            planted: plant.similarity(&target, &r.situation),
            support: r.support,
        })
        .collect())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain structs serialize")
}

/// Planted datasets for one seed, with similarity models trained on demand.
#[wasm_bindgen]
pub struct Playground {
    deviation: PlantedDeviation,
    similarity: PlantedSimilarity,
    ics: Option<(u32, SimilarityModel)>,
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Playground {
        let cfg = PlantedConfig {
            seed: seed as u64,
            ..PlantedConfig::default()
        };
        Playground {
            deviation: planted_deviation(&cfg),
            similarity: planted_similarity(&cfg),
            ics: None,
        }
    }

    /// `[[dimension, [condition, ...]], ...]` for building target pickers.
    pub fn schema(&self) -> String {
        let dims: Vec<(String, Vec<String>)> = self
            .similarity
            .dataset
            .schema
            .dimensions()
            .iter()
            .map(|d| (d.name().to_string(), d.conditions().to_vec()))
            .collect();
        json(&dims)
    }

    /// Trains a global deviation model and returns planted vs learned rows.
    pub fn deviations(&self, epochs: u32) -> Result<String, JsError> {
        deviation_rows(&self.deviation, epochs)
            .map(|rows| json(&rows))
            .map_err(|e| JsError::new(&e))
    }

    /// Trains MCS on the planted-similarity data and returns each
    /// condition's position on its dimension's axis.
    pub fn mcs_map(&self, alpha: f64, epochs: u32) -> Result<String, JsError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(JsError::new("alpha must be positive"));
        }
        let data = &self.similarity.dataset;
        let model = sim_train(data, &train_config(epochs), BackendConfig::Mcs { alpha })
            .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(json(&mcs_coordinates(&model, &data.schema)))
    }

    /// Most similar observed situations to `target` (`dim=cond;...`) under
    /// an ICS model, cached per epoch count.
    pub fn similar_contexts(&mut self, target: &str, k: u32, epochs: u32) -> Result<String, JsError> {
        if !matches!(&self.ics, Some((e, _)) if *e == epochs) {
            let model = sim_train(&self.similarity.dataset, &train_config(epochs), BackendConfig::Ics)
                .map_err(|e| JsError::new(&e.to_string()))?;
            self.ics = Some((epochs, model));
        }
        let (_, model) = self.ics.as_ref().expect("trained above");
        neighbours(model, &self.similarity, target, k as usize)
            .map(|rows| json(&rows))
            .map_err(|e| JsError::new(&e))
    }
}
