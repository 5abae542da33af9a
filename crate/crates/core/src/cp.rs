//! CP tensor factorization over user x item x one mode per context dimension.
//!
//! `F(u, t, c) = mu + sum_f a_u[f] * b_t[f] * prod_i g_{i, c_i}[f]`
//!
//! Every condition, `na` included, owns a rank-R vector. Context similarity
//! is read off those vectors with a clamped cosine per dimension.

use rand::Rng;

use crate::data::{ConditionLayout, ContextSchema, ContextSituation, ContextualRating, Dataset};
use crate::error::Result;
use crate::mf::{dot, require_nonempty, TrainConfig};
use crate::sgd::{self, ParamClass, SgdObjective};
use crate::{ContextSimilarity, Predictor};

#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    rank: usize,
    mu: f64,
    users: usize,
    items: usize,
    layout: ConditionLayout,
    /// `[user vectors | item vectors | condition vectors]`, each row-major.
    theta: Vec<f64>,
}

impl CpModel {
    pub fn zeros(mu: f64, users: usize, items: usize, schema: &ContextSchema, rank: usize) -> Self {
        Self::from_layout(mu, users, items, ConditionLayout::new(schema), rank)
    }

    pub(crate) fn from_layout(mu: f64, users: usize, items: usize, layout: ConditionLayout, rank: usize) -> Self {
        let len = (users + items + layout.total()) * rank;
        CpModel {
            rank,
            mu,
            users,
            items,
            layout,
            theta: vec![0.0; len],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn user_count(&self) -> usize {
        self.users
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    pub fn dimension_count(&self) -> usize {
        self.layout.dims()
    }

    pub fn condition_count(&self, dim: usize) -> usize {
        self.layout.size(dim)
    }

    fn user_start(&self, u: usize) -> usize {
        u * self.rank
    }

    fn item_start(&self, t: usize) -> usize {
        (self.users + t) * self.rank
    }

    fn cond_start(&self, dim: usize, cond: u32) -> usize {
        (self.users + self.items + self.layout.index(dim, cond)) * self.rank
    }

    pub fn user_vector(&self, u: u32) -> &[f64] {
        let s = self.user_start(u as usize);
        &self.theta[s..s + self.rank]
    }

    pub fn item_vector(&self, t: u32) -> &[f64] {
        let s = self.item_start(t as usize);
        &self.theta[s..s + self.rank]
    }

    pub fn condition_vector(&self, dim: usize, cond: u32) -> &[f64] {
        let s = self.cond_start(dim, cond);
        &self.theta[s..s + self.rank]
    }

    pub fn user_vector_mut(&mut self, u: u32) -> &mut [f64] {
        let s = self.user_start(u as usize);
        &mut self.theta[s..s + self.rank]
    }

    pub fn item_vector_mut(&mut self, t: u32) -> &mut [f64] {
        let s = self.item_start(t as usize);
        &mut self.theta[s..s + self.rank]
    }

    pub fn condition_vector_mut(&mut self, dim: usize, cond: u32) -> &mut [f64] {
        let s = self.cond_start(dim, cond);
        &mut self.theta[s..s + self.rank]
    }

    fn knows(&self, user: u32, item: u32) -> bool {
        (user as usize) < self.users && (item as usize) < self.items
    }

    /// Per-rank-component product of the active condition vectors.
    fn context_products(&self, context: &ContextSituation) -> Vec<f64> {
        let mut prod = vec![1.0; self.rank];
        for (d, &c) in context.0.iter().enumerate() {
            for (p, g) in prod.iter_mut().zip(self.condition_vector(d, c)) {
                *p *= g;
            }
        }
        prod
    }

    /// `mu` for unknown users or items.
    pub fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        if !self.knows(user, item) {
            return self.mu;
        }
        let a = self.user_vector(user);
        let b = self.item_vector(item);
        let g = self.context_products(context);
        self.mu + (0..self.rank).map(|f| a[f] * b[f] * g[f]).sum::<f64>()
    }

    /// Similarity of two situations from the learned condition vectors:
    /// product over dimensions of the cosine clamped to `[0, 1]`. A zero
    /// vector in any compared slot makes that dimension contribute 0.
    pub fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> f64 {
        a.0.iter()
            .zip(&b.0)
            .enumerate()
            .map(|(d, (&x, &y))| {
                let (vx, vy) = (self.condition_vector(d, x), self.condition_vector(d, y));
                let (nx, ny) = (dot(vx, vx).sqrt(), dot(vy, vy).sqrt());
                if nx == 0.0 || ny == 0.0 {
                    0.0
                } else if x == y {
                    1.0
                } else {
                    (dot(vx, vy) / (nx * ny)).clamp(0.0, 1.0)
                }
            })
            .product()
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }
}

impl Predictor for CpModel {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64 {
        CpModel::predict(self, user, item, context)
    }
}

impl ContextSimilarity for CpModel {
    fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> Result<f64> {
        Ok(CpModel::context_similarity(self, a, b))
    }
}

impl SgdObjective for CpModel {
    fn param_count(&self) -> usize {
        self.theta.len()
    }

    fn param(&self, index: usize) -> f64 {
        self.theta[index]
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        &mut self.theta[index]
    }

    fn param_class(&self, index: usize) -> ParamClass {
        let row = index / self.rank;
        if row < self.users {
            ParamClass::CpUser
        } else if row < self.users + self.items {
            ParamClass::CpItem
        } else {
            ParamClass::CpCondition
        }
    }

    fn example_prediction(&self, r: &ContextualRating) -> f64 {
        self.predict(r.user, r.item, &r.context)
    }

    fn example_gradient(&self, r: &ContextualRating, lambda: f64, out: &mut Vec<(usize, f64)>) {
        if !self.knows(r.user, r.item) {
            return;
        }
        let e = r.rating - self.predict(r.user, r.item, &r.context);
        let rank = self.rank;
        let (us, is) = (self.user_start(r.user as usize), self.item_start(r.item as usize));
        let g = self.context_products(&r.context);
        for f in 0..rank {
            let (a, b) = (self.theta[us + f], self.theta[is + f]);
            out.push((us + f, -e * b * g[f] + lambda * a));
            out.push((is + f, -e * a * g[f] + lambda * b));
        }
        let dims = r.context.len();
        for (d, &c) in r.context.0.iter().enumerate() {
            let cs = self.cond_start(d, c);
            for f in 0..rank {
                let mut rest = self.theta[us + f] * self.theta[is + f];
                for (j, &cj) in r.context.0.iter().enumerate().take(dims) {
                    if j != d {
                        rest *= self.theta[self.cond_start(j, cj) + f];
                    }
                }
                out.push((cs + f, -e * rest + lambda * self.theta[cs + f]));
            }
        }
    }

    fn touched_params(&self, r: &ContextualRating, out: &mut Vec<usize>) {
        if !self.knows(r.user, r.item) {
            return;
        }
        let rank = self.rank;
        let (us, is) = (self.user_start(r.user as usize), self.item_start(r.item as usize));
        out.extend(us..us + rank);
        out.extend(is..is + rank);
        for (d, &c) in r.context.0.iter().enumerate() {
            let cs = self.cond_start(d, c);
            out.extend(cs..cs + rank);
        }
    }
}

/// SGD fit of the CP model. `cfg.rank` is the CP rank.
pub fn cp_train(train: &Dataset, cfg: &TrainConfig) -> Result<CpModel> {
    cfg.validate()?;
    require_nonempty(train)?;
    let mut rng = cfg.rng();
    let mut model = CpModel::zeros(
        train.mean_rating(),
        train.users.len(),
        train.items.len(),
        &train.schema,
        cfg.rank,
    );
    let s = cfg.init_spread;
    for v in model.raw_mut() {
        *v = rng.gen_range(-s..=s);
    }
    for d in 0..train.schema.len() {
        model.condition_vector_mut(d, 0).fill(1.0);
    }
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
