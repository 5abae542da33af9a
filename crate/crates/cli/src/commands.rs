use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ctxrec::eval::run_cv_experiment;
use ctxrec::explain::{deviation_report, top_similar_contexts, write_similar_contexts_csv, ContextCatalog};
use ctxrec::models::TrainedModel;
use ctxrec::persist::{read_model, write_model, SavedModel};
use ctxrec::synth::{
    incar_like, planted_cp, planted_deviation, planted_similarity, sts_like, PlantedConfig, PlantedCpConfig,
    ShapeConfig,
};
use ctxrec::{parse_dataset, write_dataset, ContextSituation, Dataset, ParseOptions};

use crate::config::RunConfig;
use crate::{Failure, SynthKind};

const DEFAULT_EXPLAIN_K: usize = 5;

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let path = cfg.dataset()?;
    let file = File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let options = ParseOptions { scale: cfg.scale()? };
    parse_dataset(BufReader::new(file), &options).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn wrote(path: &Path) {
    eprintln!("wrote {}", path.display());
}

pub fn inspect(cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_dataset(cfg)?;
    let mut out = String::new();
    let conditions = data.schema.condition_count();
    let lines = [
        ("users", data.users.len().to_string()),
        ("items", data.items.len().to_string()),
        ("ratings", data.len().to_string()),
        ("density", format!("{:.6}", data.density())),
        ("mean rating", format!("{:.4}", data.mean_rating())),
        ("dimensions", data.schema.len().to_string()),
        ("conditions", format!("{conditions} (excluding na)")),
    ];
    for (k, v) in lines {
        out.push_str(&format!("{k:<12} {v}\n"));
    }
    if !data.schema.is_empty() {
        let mut usage = vec![0usize; data.schema.len()];
        for r in &data.ratings {
            for (d, &c) in r.context.0.iter().enumerate() {
                if c != 0 {
                    usage[d] += 1;
                }
            }
        }
        let width = data.schema.dimensions().iter().map(|d| d.name().len()).max().unwrap_or(0).max(9);
        out.push_str(&format!("\n{:<width$}  {:>10}  {:>8}\n", "dimension", "conditions", "non-na"));
        for (d, dim) in data.schema.dimensions().iter().enumerate() {
            out.push_str(&format!("{:<width$}  {:>10}  {:>8}\n", dim.name(), dim.len() - 1, usage[d]));
        }
    }
    print!("{out}");
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let specs = cfg.model_specs()?;
    let data = load_dataset(cfg)?;
    let dir = out_dir(cfg)?;
    for spec in &specs {
        let model = spec.train(&data)?;
        let path = dir.join(format!("{}.model", spec.kind));
        save(&path, &data, model)?;
        wrote(&path);
    }
    Ok(())
}

fn save(path: &Path, data: &Dataset, model: TrainedModel) -> Result<(), Failure> {
    let saved = SavedModel {
        schema: data.schema.clone(),
        users: data.users.clone(),
        items: data.items.clone(),
        model,
    };
    let mut w = create(path)?;
    write_model(&saved, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<(), Failure> {
    let specs = cfg.model_specs()?;
    let cv = cfg.cv_config()?;
    let data = load_dataset(cfg)?;
    let report = run_cv_experiment(&data, &specs, &cv)?;
    let dir = out_dir(cfg)?;

    let csv_path = dir.join("eval.csv");
    let mut w = create(&csv_path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let table = report.to_table();
    let txt_path = dir.join("eval.txt");
    write_text(&txt_path, &table)?;
    print!("{table}");
    wrote(&csv_path);
    wrote(&txt_path);
    Ok(())
}

/// A model to explain, with the data expressed in its own index space.
struct Subject {
    name: String,
    model: TrainedModel,
    data: Dataset,
    targets: Vec<ContextSituation>,
}

fn parse_targets(texts: &[String], data: &Dataset) -> Result<Vec<ContextSituation>, Failure> {
    texts
        .iter()
        .map(|t| {
            data.schema
                .parse_situation(t)
                .map_err(|e| Failure::config(format!("target `{t}`: {e}")))
        })
        .collect()
}

/// Re-indexes `data` against a saved model's vocabularies, dropping rows
/// whose user, item or conditions the model does not know.
fn align_to(saved: &SavedModel, data: &Dataset) -> Dataset {
    if saved.schema == data.schema && saved.users == data.users && saved.items == data.items {
        return data.clone();
    }
    let ratings = data
        .ratings
        .iter()
        .filter_map(|r| {
            let user = saved.users.get(data.users.label(r.user)?)?;
            let item = saved.items.get(data.items.label(r.item)?)?;
            let context = saved.translate_situation(&data.schema, &r.context).ok()?;
            Some(ctxrec::ContextualRating { user, item, rating: r.rating, context })
        })
        .collect();
    Dataset {
        schema: saved.schema.clone(),
        users: saved.users.clone(),
        items: saved.items.clone(),
        ratings,
        scale: data.scale,
    }
}

pub fn explain(cfg: &RunConfig) -> Result<(), Failure> {
    let k = cfg.explain.k.unwrap_or(DEFAULT_EXPLAIN_K);
    if k == 0 {
        return Err(Failure::config("explain k must be at least 1"));
    }
    if cfg.explain.targets.is_empty() {
        return Err(Failure::config("no explain targets (use --target or explain.targets)"));
    }
    let data = load_dataset(cfg)?;

    let subjects = if cfg.explain.model_files.is_empty() {
        let specs = cfg.model_specs()?;
        let targets = parse_targets(&cfg.explain.targets, &data)?;
        let mut subjects = Vec::with_capacity(specs.len());
        for spec in &specs {
            subjects.push(Subject {
                name: spec.kind.to_string(),
                model: spec.train(&data)?,
                data: data.clone(),
                targets: targets.clone(),
            });
        }
        subjects
    } else {
        let mut subjects = Vec::new();
        for path in &cfg.explain.model_files {
            let file = File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let saved = read_model(BufReader::new(file))
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let aligned = align_to(&saved, &data);
            let targets = parse_targets(&cfg.explain.targets, &aligned)?;
            subjects.push(Subject {
                name: saved.model.kind().to_string(),
                model: saved.model,
                data: aligned,
                targets,
            });
        }
        subjects
    };

    let dir = out_dir(cfg)?;
    let mut text = String::new();
    let mut similar = Vec::new();
    for s in &subjects {
        let schema = &s.data.schema;
        if let Some(sim) = s.model.similarity() {
            let catalog = ContextCatalog::from_dataset(&s.data);
            for target in &s.targets {
                let report = top_similar_contexts(sim, &s.name, &catalog, target, k)?;
                text.push_str(&report.to_table(schema));
                text.push('\n');
                similar.push((report, schema.clone()));
            }
        }
        if let Some(dev) = s.model.deviations() {
            let report = deviation_report(dev, &s.data);
            text.push_str(&format!("{}: ", s.name));
            text.push_str(&report.to_table(&s.data));
            text.push('\n');
            let path = dir.join(format!("deviations-{}.csv", s.name));
            let mut w = create(&path)?;
            report.write_csv(&s.data, &mut w)?;
            w.flush()?;
            wrote(&path);
        }
        if s.model.similarity().is_none() && s.model.deviations().is_none() {
            text.push_str(&format!("{}: no contextual structure to explain\n\n", s.name));
        }
    }

    if !similar.is_empty() {
        let path = dir.join("similar_contexts.csv");
        let mut w = create(&path)?;
        write_similar_contexts_csv(similar.iter().map(|(r, s)| (r, s)), &mut w)?;
        w.flush()?;
        wrote(&path);
    }
    let txt = dir.join("explain.txt");
    write_text(&txt, &text)?;
    print!("{text}");
    wrote(&txt);
    Ok(())
}

pub fn synth(cfg: &RunConfig, kind: SynthKind) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let write_data = |name: &str, data: &Dataset| -> Result<(), Failure> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        write_dataset(data, &mut w)?;
        w.flush()?;
        wrote(&path);
        Ok(())
    };
    match kind {
        SynthKind::Deviation | SynthKind::Similarity => {
            let mut pc = PlantedConfig::default();
            if let Some(s) = cfg.seed {
                pc.seed = s;
            }
            let (stem, data, truth) = if kind == SynthKind::Deviation {
                let p = planted_deviation(&pc);
                let mut truth = Vec::new();
                p.write_truth_csv(&mut truth)?;
                ("planted-deviation", p.dataset, truth)
            } else {
                let p = planted_similarity(&pc);
                let mut truth = Vec::new();
                p.write_truth_csv(&mut truth)?;
                ("planted-similarity", p.dataset, truth)
            };
            write_data(&format!("{stem}.csv"), &data)?;
            let path = dir.join(format!("{stem}-truth.csv"));
            let mut w = create(&path)?;
            w.write_all(&truth)?;
            w.flush()?;
            wrote(&path);
        }
        SynthKind::Cp => {
            let mut pc = PlantedCpConfig::default();
            if let Some(s) = cfg.seed {
                pc.seed = s;
            }
            let p = planted_cp(&pc);
            write_data("planted-cp.csv", &p.dataset)?;
            let path = dir.join("planted-cp-truth.model");
            save(&path, &p.dataset, TrainedModel::Cp(p.model))?;
            wrote(&path);
        }
        SynthKind::Sts | SynthKind::Incar => {
            let seed = cfg.seed.unwrap_or(42);
            if kind == SynthKind::Sts {
                write_data("sts-like.csv", &sts_like(&ShapeConfig::sts(seed)))?;
            } else {
                write_data("incar-like.csv", &incar_like(&ShapeConfig::incar(seed)))?;
            }
        }
    }
    Ok(())
}
