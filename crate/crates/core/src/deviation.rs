//! Deviation-based contextual modeling.
//!
//! `F(u, t, c) = P(u, t) + sum_i Dev(i, c_i)`, where each deviation is the
//! rating shift from `na` to the active condition of dimension `i`.
//! `Dev(i, na)` is pinned at zero, so the all-`na` situation reproduces the
//! base predictor exactly.
//!
//! The per-user and per-item variants learn a global table jointly with
//! entity-specific offsets: `Dev(i, c, u) = global(i, c) + offset(i, c, u)`.
//! Offsets never touched by training stay at zero, so unseen
//! (condition, entity) pairs fall back to the global value.

use std::fmt;
use std::str::FromStr;

use crate::data::{ContextSchema, ContextSituation, ContextualRating, Dataset};
use crate::error::{Error, Result};
use crate::mf::{init_base, require_nonempty, MfParams, TrainConfig};
use crate::sgd::{self, ParamClass, SgdObjective};
use crate::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Global,
    PerUser,
    PerItem,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Global => "global",
            Granularity::PerUser => "per-user",
            Granularity::PerItem => "per-item",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Granularity::Global),
            "per-user" | "user" => Ok(Granularity::PerUser),
            "per-item" | "item" => Ok(Granularity::PerItem),
            _ => Err(Error::InvalidArgument(format!("unknown granularity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationModel {
    base: MfParams,
    granularity: Granularity,
    /// Condition counts (including `na`) per dimension.
    dim_sizes: Vec<usize>,
    dim_starts: Vec<usize>,
    conditions: usize,
    entities: usize,
    /// `[global table | offsets]`; offsets are row-major by global index,
    /// then entity.
    dev: Vec<f64>,
}

impl DeviationModel {
    /// All deviations zero. `entities` is ignored for [`Granularity::Global`].
    pub fn new(base: MfParams, schema: &ContextSchema, granularity: Granularity) -> Self {
        let dim_sizes: Vec<usize> = schema.dimensions().iter().map(|d| d.len()).collect();
        let mut dim_starts = Vec::with_capacity(dim_sizes.len());
        let mut conditions = 0;
        for &n in &dim_sizes {
            dim_starts.push(conditions);
            conditions += n;
        }
        let entities = match granularity {
            Granularity::Global => 0,
            Granularity::PerUser => base.user_count(),
            Granularity::PerItem => base.item_count(),
        };
        DeviationModel {
            base,
            granularity,
            dim_sizes,
            dim_starts,
            conditions,
            entities,
            dev: vec![0.0; conditions * (1 + entities)],
        }
    }

    pub fn base(&self) -> &MfParams {
        &self.base
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn dimension_count(&self) -> usize {
        self.dim_sizes.len()
    }

    pub fn condition_count(&self, dim: usize) -> usize {
        self.dim_sizes[dim]
    }

    /// Number of users (per-user) or items (per-item) with offsets.
    pub fn entity_count(&self) -> usize {
        self.entities
    }

    fn global_index(&self, dim: usize, cond: u32) -> usize {
        self.dim_starts[dim] + cond as usize
    }

    fn offset_index(&self, dim: usize, cond: u32, entity: u32) -> usize {
        self.conditions + self.global_index(dim, cond) * self.entities + entity as usize
    }

    fn entity_of(&self, user: u32, item: u32) -> Option<u32> {
        let e = match self.granularity {
            Granularity::Global => return None,
            Granularity::PerUser => user,
            Granularity::PerItem => item,
        };
        ((e as usize) < self.entities).then_some(e)
    }

    pub fn global_deviation(&self, dim: usize, cond: u32) -> f64 {
        self.dev[self.global_index(dim, cond)]
    }

    /// Entity-specific offset from the global deviation (0 for global models).
    pub fn offset(&self, dim: usize, cond: u32, entity: u32) -> f64 {
        if self.entities == 0 || entity as usize >= self.entities {
            return 0.0;
        }
        self.dev[self.offset_index(dim, cond, entity)]
    }

    /// Effective deviation for `entity` (a user or item id, depending on the
    /// granularity); `None` or an unknown entity gives the global value.
    pub fn deviation(&self, dim: usize, cond: u32, entity: Option<u32>) -> f64 {
        self.global_deviation(dim, cond) + entity.map_or(0.0, |e| self.offset(dim, cond, e))
    }

    pub fn set_global_deviation(&mut self, dim: usize, cond: u32, value: f64) -> Result<()> {
        self.check_settable(dim, cond)?;
        let i = self.global_index(dim, cond);
        self.dev[i] = value;
        Ok(())
    }

    pub fn set_offset(&mut self, dim: usize, cond: u32, entity: u32, value: f64) -> Result<()> {
        self.check_settable(dim, cond)?;
        if entity as usize >= self.entities {
            return Err(Error::InvalidArgument(format!(
                "entity {entity} out of range for {} deviations",
                self.granularity
            )));
        }
        let i = self.offset_index(dim, cond, entity);
        self.dev[i] = value;
        Ok(())
    }

    fn check_settable(&self, dim: usize, cond: u32) -> Result<()> {
        if dim >= self.dim_sizes.len() || cond as usize >= self.dim_sizes[dim] {
            return Err(Error::InvalidArgument(format!("no condition {cond} in dimension {dim}")));
        }
        if cond == 0 {
            return Err(Error::InvalidArgument("the na deviation is pinned at 0".into()));
        }
        Ok(())
    }

    /// `sum_i Dev(i, c_i)` for the given user and item.
    pub fn contextual_shift(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        let entity = self.entity_of(user, item);
        let mut shift = 0.0;
        for (dim, &cond) in context.0.iter().enumerate() {
            if cond != 0 {
                shift += self.global_deviation(dim, cond);
                if let Some(e) = entity {
                    shift += self.dev[self.offset_index(dim, cond, e)];
                }
            }
        }
        shift
    }

    pub fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        self.base.predict(user, item) + self.contextual_shift(user, item, context)
    }
}

impl Predictor for DeviationModel {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        DeviationModel::predict(self, user, item, context)
    }
}

impl SgdObjective for DeviationModel {
    fn param_count(&self) -> usize {
        self.base.len() + self.dev.len()
    }

    fn param(&self, index: usize) -> f64 {
        let n = self.base.len();
        if index < n {
            self.base.raw()[index]
        } else {
            self.dev[index - n]
        }
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        let n = self.base.len();
        if index < n {
            &mut self.base.raw_mut()[index]
        } else {
            &mut self.dev[index - n]
        }
    }

    fn param_class(&self, index: usize) -> ParamClass {
        if index < self.base.len() {
            self.base.class_of(index)
        } else {
            ParamClass::Deviation
        }
    }

    fn example_prediction(&self, r: &ContextualRating) -> f64 {
        self.predict(r.user, r.item, &r.context)
    }

    fn example_gradient(&self, r: &ContextualRating, lambda: f64, out: &mut Vec<(usize, f64)>) {
        let e = r.rating - self.predict(r.user, r.item, &r.context);
        self.base.push_gradient(r.user, r.item, e, 1.0, lambda, 0, out);
        let n = self.base.len();
        let entity = self.entity_of(r.user, r.item);
        for (dim, &cond) in r.context.0.iter().enumerate() {
            if cond == 0 {
                continue;
            }
            let g = self.global_index(dim, cond);
            out.push((n + g, -e + lambda * self.dev[g]));
            if let Some(ent) = entity {
                let o = self.offset_index(dim, cond, ent);
                out.push((n + o, -e + lambda * self.dev[o]));
            }
        }
    }

    fn touched_params(&self, r: &ContextualRating, out: &mut Vec<usize>) {
        self.base.push_touched(r.user, r.item, 0, out);
        let n = self.base.len();
        let entity = self.entity_of(r.user, r.item);
        for (dim, &cond) in r.context.0.iter().enumerate() {
            if cond == 0 {
                continue;
            }
            out.push(n + self.global_index(dim, cond));
            if let Some(ent) = entity {
                out.push(n + self.offset_index(dim, cond, ent));
            }
        }
    }
}

/// Jointly trains the base factorization and the deviation tables.
pub fn dev_train(train: &Dataset, cfg: &TrainConfig, granularity: Granularity) -> Result<DeviationModel> {
    cfg.validate()?;
    require_nonempty(train)?;
    let mut rng = cfg.rng();
    let base = init_base(train, cfg, &mut rng);
    let mut model = DeviationModel::new(base, &train.schema, granularity);
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
