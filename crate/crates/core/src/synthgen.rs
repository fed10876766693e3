//! Synthetic pricing environments with known demand, used for every
//! simulation experiment.
//!
//! Each customer draws features `x ~ N(0, I_d)` and a single uniform `u`;
//! they would buy at price `p_j` iff `u <= demand(x, p_j)`. Because demand is
//! nonincreasing in price, this coupling yields monotone outcomes and a
//! well-defined valuation slot.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::demand::{clamp_prob, sigmoid, DemandModel};
use crate::densemat::dot;
use crate::error::{Error, Result};
use crate::ladder::{Dataset, ObservedRecord, PriceLadder, Propensities};
use crate::losses::valuation_loss_vector;
use crate::policy::{softmax, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `σ(w·x − |x_0 + x_1 + x_2| p − shift)`
    #[default]
    Base,
    /// `σ(w·x − 5 |x_0 x_1 x_2 x_3| p − shift)`
    #[serde(alias = "misspec1", alias = "misspec_i")]
    MisspecI,
    /// `σ(w·x − |x_0 x_1 + x_1 x_2 + x_2 x_3| p / 3 − shift)`
    #[serde(alias = "misspec2", alias = "misspec_ii")]
    MisspecII,
}

impl Variant {
    pub fn min_dim(self) -> usize {
        match self {
            Variant::Base => 3,
            Variant::MisspecI | Variant::MisspecII => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::MisspecI => "misspeci",
            Variant::MisspecII => "misspecii",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSurfaceSpec {
    pub variant: Variant,
    pub w: Vec<f64>,
    /// Subtracted from every logit; positive values suppress sales.
    pub logit_shift: f64,
}

impl DemandSurfaceSpec {
    pub fn new(variant: Variant, w: Vec<f64>, logit_shift: f64) -> Result<Self> {
        if w.len() < variant.min_dim() {
            return Err(Error::InvalidArgument(format!(
                "variant {} needs at least {} features, got {}",
                variant.name(),
                variant.min_dim(),
                w.len()
            )));
        }
        Ok(DemandSurfaceSpec { variant, w, logit_shift })
    }

    /// Draws `w ~ U[0, 1]^d`.
    pub fn sample<R: Rng + ?Sized>(variant: Variant, d: usize, logit_shift: f64, rng: &mut R) -> Result<Self> {
        let w = (0..d).map(|_| rng.random::<f64>()).collect();
        Self::new(variant, w, logit_shift)
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    /// Price sensitivity at `x`; never negative.
    pub fn slope(&self, x: &[f64]) -> f64 {
        match self.variant {
            Variant::Base => (x[0] + x[1] + x[2]).abs(),
            Variant::MisspecI => 5.0 * (x[0] * x[1] * x[2] * x[3]).abs(),
            Variant::MisspecII => (x[0] * x[1] + x[1] * x[2] + x[2] * x[3]).abs() / 3.0,
        }
    }

    pub fn logit(&self, x: &[f64], p: f64) -> f64 {
        dot(&self.w, x) - self.slope(x) * p - self.logit_shift
    }

    /// `ℙ(Y = 1 | x, p)` (unclamped).
    pub fn true_demand(&self, x: &[f64], p: f64) -> f64 {
        sigmoid(self.logit(x, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub d: usize,
    pub ladder: Vec<f64>,
    pub unit_cost: f64,
    pub lambda: f64,
    pub variant: Variant,
    pub logit_shift: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 1000,
            d: 10,
            ladder: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            unit_cost: 0.0,
            lambda: 5.0,
            variant: Variant::Base,
            logit_shift: 0.0,
            seed: 0,
        }
    }
}

/// One simulated customer with their full counterfactual outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    pub features: Vec<f64>,
    /// Sale probability at each ladder price.
    pub demand: Vec<f64>,
    /// `Y(p_j)` for every price.
    pub labels: Vec<bool>,
    /// Number of prices at which the customer buys (valuation slot).
    pub valuation: usize,
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub surface: DemandSurfaceSpec,
    pub ladder: PriceLadder,
    pub lambda: f64,
}

impl Environment {
    pub fn new(surface: DemandSurfaceSpec, ladder: PriceLadder, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {lambda} is not finite")));
        }
        Ok(Environment { surface, ladder, lambda })
    }

    /// Builds an environment from `cfg`, drawing fresh surface weights.
    pub fn sample<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Self> {
        let ladder = PriceLadder::new(cfg.ladder.clone(), cfg.unit_cost)?;
        let surface = DemandSurfaceSpec::sample(cfg.variant, cfg.d, cfg.logit_shift, rng)?;
        Environment::new(surface, ladder, cfg.lambda)
    }

    pub fn d(&self) -> usize {
        self.surface.d()
    }

    pub fn m(&self) -> usize {
        self.ladder.len()
    }

    pub fn demand_curve(&self, x: &[f64]) -> Vec<f64> {
        self.ladder.prices().iter().map(|p| self.surface.true_demand(x, *p)).collect()
    }

    /// `softmax(λ · demand(x, ·))`.
    pub fn logging_policy(&self, x: &[f64]) -> Result<Propensities> {
        let scores: Vec<f64> = self.demand_curve(x).into_iter().map(|g| self.lambda * g).collect();
        Propensities::new(softmax(&scores))
    }

    pub fn sample_features<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.d()).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Realizes a customer from features and their purchase uniform `u`.
    pub fn customer_from(&self, features: Vec<f64>, u: f64) -> Customer {
        let demand = self.demand_curve(&features);
        let labels: Vec<bool> = demand.iter().map(|g| u <= *g).collect();
        let valuation = labels.iter().filter(|y| **y).count();
        Customer {
            features,
            demand,
            labels,
            valuation,
        }
    }

    pub fn sample_customer<R: Rng + ?Sized>(&self, rng: &mut R) -> Customer {
        let x = self.sample_features(rng);
        let u = rng.random::<f64>();
        self.customer_from(x, u)
    }

    /// Logs one customer: a price drawn from the logging policy and the
    /// resulting sale indicator.
    pub fn log_customer<R: Rng + ?Sized>(&self, c: Customer, rng: &mut R) -> Result<(ObservedRecord, Propensities)> {
        let pi0 = self.logging_policy(&c.features)?;
        let j = draw_index(pi0.as_slice(), rng.random::<f64>());
        let record = ObservedRecord {
            sold: c.labels[j],
            price_index: j + 1,
            latent_valuation: Some(c.valuation),
            features: c.features,
        };
        Ok((record, pi0))
    }

    pub fn sample_record<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ObservedRecord, Propensities)> {
        let c = self.sample_customer(rng);
        self.log_customer(c, rng)
    }

    /// A logged dataset of `n` customers.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let mut records = Vec::with_capacity(n);
        let mut props = Vec::with_capacity(n);
        for _ in 0..n {
            let (r, p) = self.sample_record(rng)?;
            records.push(r);
            props.push(p);
        }
        Dataset::new(self.ladder.clone(), records, props)
    }

    /// Features and full counterfactual labels for `n` customers.
    pub fn full_information<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
        (0..n)
            .map(|_| {
                let c = self.sample_customer(rng);
                (c.features, c.labels)
            })
            .unzip()
    }

    /// Expected per-customer loss of `policy` averaged over `xs`, integrating
    /// out the purchase uniform exactly.
    pub fn exact_policy_value(&self, policy: &dyn Policy, xs: &[Vec<f64>]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for x in xs {
            let pi = policy.probs(x)?;
            let g = self.demand_curve(x);
            total -= (0..self.m()).map(|j| pi[j] * self.ladder.margin(j) * g[j]).sum::<f64>();
        }
        Ok(total / xs.len() as f64)
    }
}

impl DemandModel for Environment {
    fn ladder_size(&self) -> usize {
        self.m()
    }

    fn sale_probs(&self, x: &[f64]) -> Vec<f64> {
        self.demand_curve(x).into_iter().map(clamp_prob).collect()
    }
}

/// Inverse-CDF draw from a discrete distribution.
pub fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just under 1.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Realized mean loss `(1/n) Σ l_V(π(x_i), V_i)` using latent valuations.
pub fn true_policy_value(data: &Dataset, policy: &dyn Policy) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (row, rec) in data.records.iter().enumerate() {
        let v = rec.latent_valuation.ok_or(Error::MissingValuation { row })?;
        let l = valuation_loss_vector(&policy.probs(&rec.features)?, &data.ladder)?;
        total += l.values()[v];
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::PolicyDist;
    use crate::policy::FixedPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(variant: Variant, d: usize, shift: f64, seed: u64) -> Environment {
        let cfg = GenConfig {
            d,
            variant,
            logit_shift: shift,
            ..GenConfig::default()
        };
        Environment::sample(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn flat_surface_is_half() {
        let s = DemandSurfaceSpec::new(Variant::Base, vec![0.0; 3], 0.0).unwrap();
        let x = [1.0, -1.0, 0.0];
        for p in [1.0, 2.0, 5.0] {
            assert_eq!(s.true_demand(&x, p), 0.5);
        }
    }

    #[test]
    fn dimension_requirements() {
        assert!(DemandSurfaceSpec::new(Variant::Base, vec![0.5; 2], 0.0).is_err());
        assert!(DemandSurfaceSpec::new(Variant::MisspecI, vec![0.5; 3], 0.0).is_err());
        assert!(DemandSurfaceSpec::new(Variant::MisspecII, vec![0.5; 4], 0.0).is_ok());
    }

    #[test]
    fn large_shift_suppresses_sales() {
        let e = env(Variant::Base, 10, 10.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut low = 0;
        for _ in 0..1000 {
            let x = e.sample_features(&mut rng);
            if e.demand_curve(&x)[0] < 0.0067 {
                low += 1;
            }
        }
        assert!(low > 900, "{low}");
    }

    #[test]
    fn demand_is_monotone_in_price() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in [Variant::Base, Variant::MisspecI, Variant::MisspecII] {
            let e = env(variant, 6, 0.0, 4);
            for _ in 0..10_000 {
                let x = e.sample_features(&mut rng);
                let g = e.demand_curve(&x);
                assert!(g.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn logging_policy_examples() {
        let ladder = PriceLadder::integers(2).unwrap();
        let s = DemandSurfaceSpec::new(Variant::Base, vec![0.0; 3], 0.0).unwrap();
        let zero = Environment::new(s.clone(), ladder.clone(), 0.0).unwrap();
        assert_eq!(zero.logging_policy(&[0.3, 0.1, 2.0]).unwrap().as_slice(), &[0.5, 0.5]);
        let flat = Environment::new(s, ladder, 5.0).unwrap();
        assert!((flat.logging_policy(&[0.0; 3]).unwrap()[0] - 0.5).abs() < 1e-15);
        let p = softmax(&[5.0 * 0.8, 5.0 * 0.2]);
        assert!((p[0] - 0.9526).abs() < 1e-4 && (p[1] - 0.0474).abs() < 1e-4);
    }

    #[test]
    fn extreme_uniforms() {
        let e = env(Variant::Base, 5, 0.0, 5);
        let x = vec![0.1, 0.2, -0.3, 0.4, 0.5];
        let all = e.customer_from(x.clone(), 0.0);
        assert_eq!(all.valuation, 5);
        let none = e.customer_from(x, 1.0);
        assert_eq!(none.valuation, 0);
    }

    #[test]
    fn records_are_consistent() {
        let e = env(Variant::Base, 10, 0.0, 6);
        let data = e.generate(2000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        for r in &data.records {
            let v = r.latent_valuation.unwrap();
            assert_eq!(r.sold, r.price_index <= v);
        }
        assert!(crate::ladder::validate(&data).consistency_flags.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let e = env(Variant::MisspecII, 10, 0.0, 8);
        let a = e.generate(50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = e.generate(50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.propensities, b.propensities);
    }

    #[test]
    fn sale_frequency_matches_demand() {
        let e = env(Variant::Base, 4, 0.0, 10);
        let x = vec![0.3, -0.2, 0.1, 0.9];
        let g = e.demand_curve(&x)[2];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let sold = (0..n).filter(|_| e.customer_from(x.clone(), rng.random()).labels[2]).count();
        let freq = sold as f64 / n as f64;
        let se = (g * (1.0 - g) / n as f64).sqrt();
        assert!((freq - g).abs() <= 4.0 * se);
    }

    #[test]
    fn low_price_policy_value() {
        let e = env(Variant::Base, 10, 0.0, 12);
        let data = e.generate(500, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let policy = FixedPolicy::new(PolicyDist::deterministic(0, 5).unwrap());
        let v = true_policy_value(&data, &policy).unwrap();
        let direct = -(data.records.iter().filter(|r| r.latent_valuation.unwrap() >= 1).count() as f64) / 500.0;
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn no_sales_regime_value_is_near_zero() {
        let e = env(Variant::Base, 10, 10.0, 14);
        let data = e.generate(2000, &mut ChaCha8Rng::seed_from_u64(15)).unwrap();
        let policy = FixedPolicy::new(PolicyDist::new(vec![0.2; 5]).unwrap());
        assert!(true_policy_value(&data, &policy).unwrap().abs() < 0.02);
    }

    #[test]
    fn realized_value_matches_exact_expectation() {
        let e = env(Variant::Base, 10, 0.0, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let customers: Vec<Customer> = (0..n).map(|_| e.sample_customer(&mut rng)).collect();
        let policy = FixedPolicy::new(PolicyDist::new(vec![0.1, 0.2, 0.3, 0.2, 0.2]).unwrap());
        let xs: Vec<Vec<f64>> = customers.iter().map(|c| c.features.clone()).collect();
        let exact = e.exact_policy_value(&policy, &xs).unwrap();
        let l = valuation_loss_vector(&policy.probs(&[]).unwrap(), &e.ladder).unwrap();
        let losses: Vec<f64> = customers.iter().map(|c| l.values()[c.valuation]).collect();
        let mean = losses.iter().sum::<f64>() / n as f64;
        let var = losses.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() <= 3.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn missing_valuation_is_an_error() {
        let e = env(Variant::Base, 3, 0.0, 18);
        let mut data = e.generate(3, &mut ChaCha8Rng::seed_from_u64(19)).unwrap();
        data.records[1].latent_valuation = None;
        let policy = FixedPolicy::new(PolicyDist::new(vec![0.2; 5]).unwrap());
        assert!(matches!(true_policy_value(&data, &policy), Err(Error::MissingValuation { row: 1 })));
    }
}
