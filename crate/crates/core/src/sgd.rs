//! Shared stochastic-gradient machinery.
//!
//! Every trainable model exposes its parameters as one flat, indexable space
//! and reports a sparse per-example gradient of
//!
//! ```text
//! L(r) = 1/2 (r - r_hat)^2 + lambda/2 * sum(theta_k^2 for theta_k touched by r)
//! ```
//!
//! The training loop and the finite-difference checks both go through the
//! same [`SgdObjective`] methods.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{ContextualRating, Dataset};

/// Coarse parameter families, used to report gradient checks per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamClass {
    UserBias,
    ItemBias,
    UserFactor,
    ItemFactor,
    Deviation,
    IcsEntry,
    LcsVector,
    McsCoordinate,
    CpUser,
    CpItem,
    CpCondition,
}

pub trait SgdObjective {
    fn param_count(&self) -> usize;
    fn param(&self, index: usize) -> f64;
    fn param_mut(&mut self, index: usize) -> &mut f64;
    fn param_class(&self, index: usize) -> ParamClass;

    fn example_prediction(&self, r: &ContextualRating) -> f64;

    /// Appends `(index, dL/dtheta)` pairs for one example. Indices may repeat;
    /// repeated entries are summed.
    fn example_gradient(&self, r: &ContextualRating, lambda: f64, out: &mut Vec<(usize, f64)>);

    /// Indices whose squares enter the L2 term of [`SgdObjective::example_loss`].
    fn touched_params(&self, r: &ContextualRating, out: &mut Vec<usize>);

    /// Called after every applied update with the gradient just used.
    fn project_touched(&mut self, _grad: &[(usize, f64)]) {}

    /// Called once per completed epoch.
    fn end_epoch(&mut self) {}

    fn example_loss(&self, r: &ContextualRating, lambda: f64) -> f64 {
        let e = r.rating - self.example_prediction(r);
        let mut touched = Vec::new();
        self.touched_params(r, &mut touched);
        touched.sort_unstable();
        touched.dedup();
        let reg: f64 = touched.iter().map(|&k| self.param(k).powi(2)).sum();
        0.5 * e * e + 0.5 * lambda * reg
    }
}

/// Mean per-example objective over a dataset.
pub fn mean_loss<M: SgdObjective + ?Sized>(model: &M, data: &Dataset, lambda: f64) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.ratings
        .iter()
        .map(|r| model.example_loss(r, lambda))
        .sum::<f64>()
        / data.len() as f64
}

/// Runs `epochs` shuffled passes of plain SGD. `monitor`, when given, is
/// called with the epoch index and the mean objective after each epoch.
pub fn fit<M: SgdObjective + ?Sized>(
    model: &mut M,
    data: &Dataset,
    learning_rate: f64,
    lambda: f64,
    epochs: usize,
    rng: &mut ChaCha8Rng,
    mut monitor: Option<&mut dyn FnMut(usize, f64)>,
) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = Vec::with_capacity(64);
    for epoch in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let r = &data.ratings[i];
            grad.clear();
            model.example_gradient(r, lambda, &mut grad);
            for &(k, g) in &grad {
                *model.param_mut(k) -= learning_rate * g;
            }
            model.project_touched(&grad);
        }
        model.end_epoch();
        if let Some(m) = monitor.as_mut() {
            m(epoch, mean_loss(model, data, lambda));
        }
    }
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub class: ParamClass,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientCheck {
    /// `|a - n| / max(|a|, |n|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Checks every touched parameter of one example against a central
/// difference of [`SgdObjective::example_loss`].
pub fn check_example_gradient<M: SgdObjective + ?Sized>(
    model: &mut M,
    r: &ContextualRating,
    lambda: f64,
    step: f64,
) -> Vec<GradientCheck> {
    let mut grad = Vec::new();
    model.example_gradient(r, lambda, &mut grad);
    let mut dense: Vec<(usize, f64)> = Vec::new();
    grad.sort_by_key(|&(k, _)| k);
    for (k, g) in grad {
        match dense.last_mut() {
            Some((last, acc)) if *last == k => *acc += g,
            _ => dense.push((k, g)),
        }
    }
    let mut touched = Vec::new();
    model.touched_params(r, &mut touched);
    for k in touched {
        if dense.binary_search_by_key(&k, |&(i, _)| i).is_err() {
            let pos = dense.partition_point(|&(i, _)| i < k);
            dense.insert(pos, (k, 0.0));
        }
    }
    dense
        .into_iter()
        .map(|(k, analytic)| {
            let orig = model.param(k);
            *model.param_mut(k) = orig + step;
            let up = model.example_loss(r, lambda);
            *model.param_mut(k) = orig - step;
            let down = model.example_loss(r, lambda);
            *model.param_mut(k) = orig;
            GradientCheck {
                class: model.param_class(k),
                index: k,
                analytic,
                numeric: (up - down) / (2.0 * step),
            }
        })
        .collect()
}
