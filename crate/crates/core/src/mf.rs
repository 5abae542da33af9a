//! Biased matrix factorization, the context-free predictor `P(u, t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ContextSituation, ContextualRating, Dataset};
use crate::error::{Error, Result};
use crate::sgd::{self, ParamClass, SgdObjective};
use crate::Predictor;

/// SGD hyperparameters shared by every model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rank: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform factor initialization.
    pub init_spread: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rank: 10,
            learning_rate: 0.01,
            lambda: 0.02,
            epochs: 100,
            seed: 42,
            init_spread: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.rank == 0 {
            return bad("rank must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.init_spread > 0.0 && self.init_spread.is_finite()) {
            return bad("init spread must be positive");
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Global mean, user/item biases and rank-F factors.
///
/// Trainable parameters live in one flat vector laid out as
/// `[user biases | item biases | user factors | item factors]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    mu: f64,
    rank: usize,
    users: usize,
    items: usize,
    theta: Vec<f64>,
}

impl MfParams {
    /// All biases and factors zero.
    pub fn zeros(mu: f64, users: usize, items: usize, rank: usize) -> Self {
        MfParams {
            mu,
            rank,
            users,
            items,
            theta: vec![0.0; (users + items) * (1 + rank)],
        }
    }

    fn initialized(mu: f64, users: usize, items: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut m = MfParams::zeros(mu, users, items, cfg.rank);
        let start = users + items;
        for v in &mut m.theta[start..] {
            *v = rng.gen_range(-cfg.init_spread..=cfg.init_spread);
        }
        m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn user_count(&self) -> usize {
        self.users
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    pub fn set_mu(&mut self, mu: f64) {
        self.mu = mu;
    }

    pub(crate) fn user_bias_index(&self, u: usize) -> usize {
        u
    }

    pub(crate) fn item_bias_index(&self, t: usize) -> usize {
        self.users + t
    }

    pub(crate) fn user_factor_start(&self, u: usize) -> usize {
        self.users + self.items + u * self.rank
    }

    pub(crate) fn item_factor_start(&self, t: usize) -> usize {
        self.users + self.items + self.users * self.rank + t * self.rank
    }

    pub fn user_bias(&self, u: u32) -> f64 {
        self.theta[self.user_bias_index(u as usize)]
    }

    pub fn item_bias(&self, t: u32) -> f64 {
        self.theta[self.item_bias_index(t as usize)]
    }

    pub fn user_factors(&self, u: u32) -> &[f64] {
        let s = self.user_factor_start(u as usize);
        &self.theta[s..s + self.rank]
    }

    pub fn item_factors(&self, t: u32) -> &[f64] {
        let s = self.item_factor_start(t as usize);
        &self.theta[s..s + self.rank]
    }

    pub fn set_user_bias(&mut self, u: u32, v: f64) {
        let i = self.user_bias_index(u as usize);
        self.theta[i] = v;
    }

    pub fn set_item_bias(&mut self, t: u32, v: f64) {
        let i = self.item_bias_index(t as usize);
        self.theta[i] = v;
    }

    pub fn user_factors_mut(&mut self, u: u32) -> &mut [f64] {
        let s = self.user_factor_start(u as usize);
        &mut self.theta[s..s + self.rank]
    }

    pub fn item_factors_mut(&mut self, t: u32) -> &mut [f64] {
        let s = self.item_factor_start(t as usize);
        &mut self.theta[s..s + self.rank]
    }

    fn knows_user(&self, u: u32) -> bool {
        (u as usize) < self.users
    }

    fn knows_item(&self, t: u32) -> bool {
        (t as usize) < self.items
    }

    /// `mu + b_u + b_t + p_u . q_t`, unclamped. Unknown users or items drop
    /// their bias and the factor term.
    pub fn predict(&self, user: u32, item: u32) -> f64 {
        let mut p = self.mu;
        let (ku, kt) = (self.knows_user(user), self.knows_item(item));
        if ku {
            p += self.user_bias(user);
        }
        if kt {
            p += self.item_bias(item);
        }
        if ku && kt {
            p += dot(self.user_factors(user), self.item_factors(item));
        }
        p
    }

    /// Gradient of `1/2 e^2 + L2` with respect to the base parameters when the
    /// full prediction depends on `P(u, t)` with slope `dpred_dbase`.
    /// `offset` shifts indices into an enclosing parameter space.
    pub(crate) fn push_gradient(
        &self,
        user: u32,
        item: u32,
        residual: f64,
        dpred_dbase: f64,
        lambda: f64,
        offset: usize,
        out: &mut Vec<(usize, f64)>,
    ) {
        if !(self.knows_user(user) && self.knows_item(item)) {
            return;
        }
        let g = -residual * dpred_dbase;
        let bu = self.user_bias_index(user as usize);
        let bt = self.item_bias_index(item as usize);
        out.push((offset + bu, g + lambda * self.theta[bu]));
        out.push((offset + bt, g + lambda * self.theta[bt]));
        let ps = self.user_factor_start(user as usize);
        let qs = self.item_factor_start(item as usize);
        for f in 0..self.rank {
            let (p, q) = (self.theta[ps + f], self.theta[qs + f]);
            out.push((offset + ps + f, g * q + lambda * p));
            out.push((offset + qs + f, g * p + lambda * q));
        }
    }

    pub(crate) fn push_touched(&self, user: u32, item: u32, offset: usize, out: &mut Vec<usize>) {
        if !(self.knows_user(user) && self.knows_item(item)) {
            return;
        }
        out.push(offset + self.user_bias_index(user as usize));
        out.push(offset + self.item_bias_index(item as usize));
        let ps = self.user_factor_start(user as usize);
        let qs = self.item_factor_start(item as usize);
        out.extend((0..self.rank).map(|f| offset + ps + f));
        out.extend((0..self.rank).map(|f| offset + qs + f));
    }

    pub(crate) fn len(&self) -> usize {
        self.theta.len()
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub(crate) fn class_of(&self, k: usize) -> ParamClass {
        let (u, t) = (self.users, self.items);
        if k < u {
            ParamClass::UserBias
        } else if k < u + t {
            ParamClass::ItemBias
        } else if k < u + t + u * self.rank {
            ParamClass::UserFactor
        } else {
            ParamClass::ItemFactor
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Predictor for MfParams {
    fn predict(&self, user: u32, item: u32, _context: &ContextSituation) -> f64 {
        MfParams::predict(self, user, item)
    }
}

impl SgdObjective for MfParams {
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
        self.class_of(index)
    }

    fn example_prediction(&self, r: &ContextualRating) -> f64 {
        self.predict(r.user, r.item)
    }

    fn example_gradient(&self, r: &ContextualRating, lambda: f64, out: &mut Vec<(usize, f64)>) {
        let e = r.rating - self.predict(r.user, r.item);
        self.push_gradient(r.user, r.item, e, 1.0, lambda, 0, out);
    }

    fn touched_params(&self, r: &ContextualRating, out: &mut Vec<usize>) {
        self.push_touched(r.user, r.item, 0, out);
    }
}

pub(crate) fn require_nonempty(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        Err(Error::InvalidArgument("training data is empty".into()))
    } else {
        Ok(())
    }
}

/// Initial base parameters for any model trained on `train`. Consumes the
/// first draws of `rng`.
pub(crate) fn init_base(train: &Dataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> MfParams {
    MfParams::initialized(
        train.mean_rating(),
        train.users.len(),
        train.items.len(),
        cfg,
        rng,
    )
}

pub fn mf_train(train: &Dataset, cfg: &TrainConfig) -> Result<MfParams> {
    train_impl(train, cfg, None)
}

/// Like [`mf_train`], reporting the mean objective after every epoch.
pub fn mf_train_monitored(
    train: &Dataset,
    cfg: &TrainConfig,
    mut monitor: impl FnMut(usize, f64),
) -> Result<MfParams> {
    train_impl(train, cfg, Some(&mut monitor))
}

fn train_impl(
    train: &Dataset,
    cfg: &TrainConfig,
    monitor: Option<&mut dyn FnMut(usize, f64)>,
) -> Result<MfParams> {
    cfg.validate()?;
    require_nonempty(train)?;
    let mut rng = cfg.rng();
    let mut model = init_base(train, cfg, &mut rng);
    sgd::fit(
        &mut model,
        train,
        cfg.learning_rate,
        cfg.lambda,
        cfg.epochs,
        &mut rng,
        monitor,
    );
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ContextSchema, Vocabulary};
    use crate::sgd::check_example_gradient;

    fn dataset(rows: &[(u32, u32, f64)], users: usize, items: usize) -> Dataset {
        Dataset {
            schema: ContextSchema::default(),
            users: (0..users).map(|u| format!("u{u}")).collect::<Vocabulary>(),
            items: (0..items).map(|t| format!("t{t}")).collect::<Vocabulary>(),
            ratings: rows
                .iter()
                .map(|&(user, item, rating)| ContextualRating {
                    user,
                    item,
                    rating,
                    context: ContextSituation::anchor(0),
                })
                .collect(),
            scale: Default::default(),
        }
    }

    #[test]
    fn zero_model_predicts_mean() {
        let m = MfParams::zeros(3.5, 2, 2, 3);
        assert_eq!(m.predict(0, 1), 3.5);
    }

    #[test]
    fn hand_arithmetic() {
        let mut m = MfParams::zeros(3.0, 1, 1, 2);
        m.set_user_bias(0, 0.5);
        m.set_item_bias(0, -0.2);
        m.user_factors_mut(0).copy_from_slice(&[1.0, 0.0]);
        m.item_factors_mut(0).copy_from_slice(&[0.1, 9.0]);
        assert!((m.predict(0, 0) - 3.4).abs() < 1e-12);
    }

    #[test]
    fn unknown_user_falls_back() {
        let mut m = MfParams::zeros(3.0, 1, 1, 2);
        m.set_item_bias(0, 0.3);
        m.set_user_bias(0, 1.0);
        m.user_factors_mut(0).copy_from_slice(&[1.0, 1.0]);
        m.item_factors_mut(0).copy_from_slice(&[1.0, 1.0]);
        assert!((m.predict(7, 0) - 3.3).abs() < 1e-12);
        assert_eq!(m.predict(7, 9), 3.0);
    }

    #[test]
    fn single_rating_fit() {
        let d = dataset(&[(0, 0, 4.0)], 1, 1);
        let cfg = TrainConfig {
            lambda: 0.0,
            epochs: 500,
            ..Default::default()
        };
        let m = mf_train(&d, &cfg).unwrap();
        assert!((m.predict(0, 0) - 4.0).abs() < 1e-2);
    }

    #[test]
    fn constant_fit() {
        let rows: Vec<_> = (0..4).flat_map(|u| (0..5).map(move |t| (u, t, 3.0))).collect();
        let d = dataset(&rows, 4, 5);
        let cfg = TrainConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let m = mf_train(&d, &cfg).unwrap();
        for u in 0..4 {
            for t in 0..5 {
                assert!((m.predict(u, t) - 3.0).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn planted_rank_one_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (nu, nt) = (20, 15);
        let pu: Vec<f64> = (0..nu).map(|_| rng.gen_range(0.5..1.5)).collect();
        let qt: Vec<f64> = (0..nt).map(|_| rng.gen_range(0.5..1.5)).collect();
        let mut rows = Vec::new();
        for u in 0..nu {
            for t in 0..nt {
                if rng.gen_bool(0.7) {
                    rows.push((u as u32, t as u32, 1.5 + pu[u] * qt[t]));
                }
            }
        }
        let d = dataset(&rows, nu, nt);
        let cfg = TrainConfig {
            rank: 1,
            lambda: 0.0,
            epochs: 400,
            learning_rate: 0.02,
            init_spread: 0.1,
            ..Default::default()
        };
        let m = mf_train(&d, &cfg).unwrap();
        let mse: f64 = d
            .ratings
            .iter()
            .map(|r| (r.rating - m.predict(r.user, r.item)).powi(2))
            .sum::<f64>()
            / d.len() as f64;
        assert!(mse.sqrt() < 0.1, "rmse {}", mse.sqrt());
    }

    #[test]
    fn deterministic() {
        let rows = [(0, 0, 4.0), (1, 1, 2.0), (0, 1, 5.0), (1, 0, 1.0)];
        let d = dataset(&rows, 2, 2);
        let cfg = TrainConfig::default();
        assert_eq!(mf_train(&d, &cfg).unwrap(), mf_train(&d, &cfg).unwrap());
    }

    #[test]
    fn loss_stays_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<_> = (0..300)
            .map(|_| (rng.gen_range(0..10), rng.gen_range(0..10), rng.gen_range(1..=5) as f64))
            .collect();
        let d = dataset(&rows, 10, 10);
        let mut losses = Vec::new();
        mf_train_monitored(&d, &TrainConfig::default(), |_, l| losses.push(l)).unwrap();
        assert_eq!(losses.len(), 100);
        assert!(losses.iter().all(|l| l.is_finite()));
        assert!(losses.last().unwrap() < &losses[0]);
    }

    #[test]
    fn invalid_config() {
        let d = dataset(&[(0, 0, 4.0)], 1, 1);
        for cfg in [
            TrainConfig { rank: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { init_spread: 0.0, ..Default::default() },
        ] {
            assert!(mf_train(&d, &cfg).is_err());
        }
        assert!(mf_train(&dataset(&[], 1, 1), &TrainConfig::default()).is_err());
    }

    /// Least-squares biases with b_t0 pinned to 0, by Gaussian elimination.
    fn closed_form_biases(rows: &[(u32, u32, f64)], nu: usize, nt: usize, mu: f64) -> Vec<f64> {
        // unknowns: b_u[0..nu], b_t[1..nt]
        let n = nu + nt - 1;
        let col = |is_user: bool, k: usize| -> Option<usize> {
            if is_user {
                Some(k)
            } else if k == 0 {
                None
            } else {
                Some(nu + k - 1)
            }
        };
        let mut a = vec![vec![0.0; n + 1]; n];
        for &(u, t, r) in rows {
            let cols: Vec<usize> = [col(true, u as usize), col(false, t as usize)]
                .into_iter()
                .flatten()
                .collect();
            for &i in &cols {
                for &j in &cols {
                    a[i][j] += 1.0;
                }
                a[i][n] += r - mu;
            }
        }
        for p in 0..n {
            let piv = (p..n).max_by(|&x, &y| a[x][p].abs().total_cmp(&a[y][p].abs())).unwrap();
            a.swap(p, piv);
            for row in 0..n {
                if row != p {
                    let f = a[row][p] / a[p][p];
                    for c in p..=n {
                        a[row][c] -= f * a[p][c];
                    }
                }
            }
        }
        (0..n).map(|i| a[i][n] / a[i][i]).collect()
    }

    #[test]
    fn bias_only_matches_closed_form() {
        let rows = [
            (0, 0, 5.0),
            (0, 1, 3.0),
            (1, 0, 4.0),
            (1, 2, 1.0),
            (2, 1, 2.0),
            (2, 2, 2.0),
            (0, 2, 3.0),
        ];
        let d = dataset(&rows, 3, 3);
        let mu = d.mean_rating();
        let sol = closed_form_biases(&rows, 3, 3, mu);
        let bt = |t: usize| if t == 0 { 0.0 } else { sol[3 + t - 1] };

        let mut m = MfParams::zeros(mu, 3, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        sgd::fit(&mut m, &d, 0.005, 0.0, 4000, &mut rng, None);
        for u in 0..3 {
            for t in 0..3 {
                let expected = mu + sol[u] + bt(t);
                let got = m.predict(u as u32, t as u32);
                assert!((got - expected).abs() < 1e-2, "({u},{t}) {got} vs {expected}");
            }
        }
        assert!(m.user_factors(0).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = MfParams::zeros(3.0, 3, 4, 3);
        for v in m.raw_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
        let r = ContextualRating {
            user: 1,
            item: 2,
            rating: 4.5,
            context: ContextSituation::anchor(0),
        };
        let checks = check_example_gradient(&mut m, &r, 0.1, 1e-5);
        assert_eq!(checks.len(), 2 + 2 * 3);
        for c in checks {
            assert!(c.relative_error(1e-8) < 1e-5, "{c:?}");
        }
    }
}
