//! Component-wise random-walk Metropolis-Hastings.
//!
//! Every parameter has a uniform prior on an interval and is proposed on an
//! unconstrained scale (logit, log or identity). The sampler adds the
//! log-Jacobian of the inverse transform so the chain targets the posterior
//! on the original scale.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};

/// Scale on which a parameter is proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// `x = lo + (hi - lo) * logistic(z)`.
    Logit,
    /// `x = exp(z)`; requires `lo == 0`.
    Log,
    Identity,
}

/// A named parameter with a uniform prior on `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub transform: Transform,
}

impl ParamSpec {
    pub fn unit(name: impl Into<String>) -> Self {
        Self { name: name.into(), lo: 0.0, hi: 1.0, transform: Transform::Logit }
    }

    pub fn positive(name: impl Into<String>, hi: f64) -> Self {
        Self { name: name.into(), lo: 0.0, hi, transform: Transform::Log }
    }

    pub fn interval(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), lo, hi, transform: Transform::Identity }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    fn to_free(&self, x: f64) -> f64 {
        match self.transform {
            Transform::Logit => {
                let u = (x - self.lo) / (self.hi - self.lo);
                (u / (1.0 - u)).ln()
            }
            Transform::Log => x.ln(),
            Transform::Identity => x,
        }
    }

    fn from_free(&self, z: f64) -> f64 {
        match self.transform {
            Transform::Logit => self.lo + (self.hi - self.lo) / (1.0 + (-z).exp()),
            Transform::Log => z.exp(),
            Transform::Identity => z,
        }
    }

    /// `ln |dx/dz|` up to a constant.
    fn ln_jacobian(&self, x: f64) -> f64 {
        match self.transform {
            Transform::Logit => (x - self.lo).ln() + (self.hi - x).ln(),
            Transform::Log => x.ln(),
            Transform::Identity => 0.0,
        }
    }

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.lo + (self.hi - self.lo) * rng.random::<f64>();
            if self.contains(x) {
                return x;
            }
        }
    }
}

/// Unnormalized log posterior over a fixed parameter vector.
///
/// Priors are uniform on each [`ParamSpec`] interval; implementations
/// return the log likelihood and need not check bounds.
pub trait Target: Sync {
    fn params(&self) -> &[ParamSpec];

    fn log_density(&self, x: &[f64]) -> f64;

    /// The terms of [`Target::log_density`] that depend on parameter
    /// `index`. Overriding this lets a factorized model skip unrelated data
    /// blocks during single-component updates.
    fn local_log_density(&self, x: &[f64], index: usize) -> f64 {
        let _ = index;
        self.log_density(x)
    }
}

/// Proposal scale per transform family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub logit: f64,
    pub log: f64,
    pub identity: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self { logit: 0.25, log: 0.25, identity: 0.25 }
    }
}

impl StepSizes {
    fn for_transform(&self, t: Transform) -> f64 {
        match t {
            Transform::Logit => self.logit,
            Transform::Log => self.log,
            Transform::Identity => self.identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Total iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub steps: StepSizes,
    /// Tune step sizes during burn-in toward acceptance in [0.2, 0.5].
    pub adapt: bool,
    /// Keep every `thin`-th retained iteration.
    pub thin: usize,
}

impl McmcConfig {
    pub fn new(iterations: usize, burn_in: usize, chains: usize, seed: u64) -> Result<Self> {
        let cfg = Self { iterations, burn_in, chains, seed, steps: StepSizes::default(), adapt: true, thin: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be >= 1".into()));
        }
        for s in [self.steps.logit, self.steps.log, self.steps.identity] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("step size must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Row-major: `draws[t * n_params + j]`.
    pub draws: Vec<f64>,
    /// Post-burn-in acceptance rate per parameter.
    pub acceptance: Vec<f64>,
    /// Step sizes after adaptation, on the free scale.
    pub step_sizes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub params: Vec<ParamSpec>,
    pub chains: Vec<Chain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub draws: usize,
    pub acceptance: BTreeMap<String, f64>,
    pub means: BTreeMap<String, f64>,
    pub step_sizes: BTreeMap<String, f64>,
}

impl PosteriorSamples {
    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.draws.len() / self.n_params().max(1))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Pooled draws of one parameter across chains.
    pub fn draws(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| Error::Input(format!("no parameter named '{name}' in samples")))?;
        let n = self.n_params();
        Ok(self.chains.iter().flat_map(|c| c.draws.iter().skip(j).step_by(n).copied()).collect())
    }

    /// Every pooled draw as a full parameter vector.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let n = self.n_params();
        self.chains.iter().flat_map(move |c| c.draws.chunks_exact(n))
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum::<usize>() / self.n_params().max(1)
    }

    pub fn diagnostics(&self) -> Vec<ChainDiagnostics> {
        let n = self.n_params();
        self.chains
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let t = c.draws.len() / n.max(1);
                let mut acceptance = BTreeMap::new();
                let mut means = BTreeMap::new();
                let mut step_sizes = BTreeMap::new();
                for (j, p) in self.params.iter().enumerate() {
                    let sum: f64 = c.draws.iter().skip(j).step_by(n).sum();
                    acceptance.insert(p.name.clone(), c.acceptance[j]);
                    means.insert(p.name.clone(), sum / t.max(1) as f64);
                    step_sizes.insert(p.name.clone(), c.step_sizes[j]);
                }
                ChainDiagnostics { chain: ci, draws: t, acceptance, means, step_sizes }
            })
            .collect()
    }

    /// Long-format CSV: `chain,iteration,parameter,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["chain", "iteration", "parameter", "value"]).map_err(csv_error)?;
        let n = self.n_params();
        for (ci, c) in self.chains.iter().enumerate() {
            for (t, row) in c.draws.chunks_exact(n).enumerate() {
                for (p, v) in self.params.iter().zip(row) {
                    w.write_record([ci.to_string(), t.to_string(), p.name.clone(), format!("{v:?}")])
                        .map_err(csv_error)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

const MAX_INIT_TRIES: usize = 100;
const ADAPT_BATCH: usize = 50;

/// Run `cfg.chains` independent chains in parallel.
pub fn sample<T: Target>(target: &T, cfg: &McmcConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let params = target.params();
    if params.is_empty() {
        return Err(Error::Config("model has no parameters".into()));
    }
    for p in params {
        let ok = p.lo < p.hi && p.lo.is_finite() && p.hi.is_finite() && (p.transform != Transform::Log || p.lo == 0.0);
        if !ok {
            return Err(Error::Config(format!("bad bounds for parameter '{}'", p.name)));
        }
    }
    let results: Vec<Result<Chain>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| scope.spawn(move || run_chain(target, cfg, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("sampler thread panicked".into()))))
            .collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples { params: params.to_vec(), chains })
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn run_chain<T: Target>(target: &T, cfg: &McmcConfig, chain: usize) -> Result<Chain> {
    let params = target.params();
    let n = params.len();
    let mut rng = chain_rng(cfg.seed, chain);

    let mut x = vec![0.0; n];
    let mut found = false;
    for _ in 0..MAX_INIT_TRIES {
        for (xi, p) in x.iter_mut().zip(params) {
            *xi = p.sample_prior(&mut rng);
        }
        if target.log_density(&x).is_finite() {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::Numerical(format!(
            "no starting point with finite density after {MAX_INIT_TRIES} draws from the priors"
        )));
    }

    let mut steps: Vec<f64> = params.iter().map(|p| cfg.steps.for_transform(p.transform)).collect();
    let mut batch_accepts = vec![0usize; n];
    let mut accepts = vec![0usize; n];
    let retained = (cfg.iterations - cfg.burn_in).div_ceil(cfg.thin);
    let mut draws = Vec::with_capacity(retained * n);

    for it in 0..cfg.iterations {
        for j in 0..n {
            let p = &params[j];
            let current = x[j];
            let lp_current = target.local_log_density(&x, j) + p.ln_jacobian(current);
            let z: f64 = rng.sample(StandardNormal);
            let proposal = p.from_free(p.to_free(current) + steps[j] * z);
            let u: f64 = rng.random();
            if !p.contains(proposal) {
                continue;
            }
            x[j] = proposal;
            let lp_proposal = target.local_log_density(&x, j) + p.ln_jacobian(proposal);
            if lp_proposal.is_finite() && u.ln() < lp_proposal - lp_current {
                if it < cfg.burn_in {
                    batch_accepts[j] += 1;
                } else {
                    accepts[j] += 1;
                }
            } else {
                x[j] = current;
            }
        }
        if it < cfg.burn_in && cfg.adapt && (it + 1) % ADAPT_BATCH == 0 {
            for j in 0..n {
                let rate = batch_accepts[j] as f64 / ADAPT_BATCH as f64;
                if rate < 0.2 {
                    steps[j] *= 0.8;
                } else if rate > 0.5 {
                    steps[j] *= 1.25;
                }
                batch_accepts[j] = 0;
            }
        }
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            draws.extend_from_slice(&x);
        }
    }
    if !target.log_density(&x).is_finite() {
        return Err(Error::Numerical("chain ended at a state with non-finite density".into()));
    }
    let kept = (cfg.iterations - cfg.burn_in) as f64;
    Ok(Chain { draws, acceptance: accepts.iter().map(|a| *a as f64 / kept).collect(), step_sizes: steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct BetaBernoulli {
        params: Vec<ParamSpec>,
        successes: f64,
        failures: f64,
    }

    impl Target for BetaBernoulli {
        fn params(&self) -> &[ParamSpec] {
            &self.params
        }

        fn log_density(&self, x: &[f64]) -> f64 {
            self.successes * x[0].ln() + self.failures * (1.0 - x[0]).ln()
        }
    }

    struct Gaussian {
        params: Vec<ParamSpec>,
    }

    impl Target for Gaussian {
        fn params(&self) -> &[ParamSpec] {
            &self.params
        }

        fn log_density(&self, x: &[f64]) -> f64 {
            -0.5 * ((x[0] - 1.0) / 0.5).powi(2) - 0.5 * ((x[1] - 3.0) / 0.2).powi(2)
        }
    }

    #[test]
    fn beta_bernoulli_posterior_mean() {
        let target = BetaBernoulli { params: vec![ParamSpec::unit("p")], successes: 7.0, failures: 3.0 };
        let cfg = McmcConfig::new(50_000, 5_000, 1, 11).unwrap();
        let s = sample(&target, &cfg).unwrap();
        let d = s.draws("p").unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        // Beta(8, 4) posterior under a uniform prior
        assert!((mean - 8.0 / 12.0).abs() < 0.01, "{mean}");
        let acc = s.chains[0].acceptance[0];
        assert!((0.15..=0.6).contains(&acc), "{acc}");
    }

    #[test]
    fn log_transform_targets_original_scale() {
        let target = Gaussian { params: vec![ParamSpec::positive("a", 10.0), ParamSpec::interval("b", -10.0, 10.0)] };
        let cfg = McmcConfig::new(40_000, 4_000, 2, 5).unwrap();
        let s = sample(&target, &cfg).unwrap();
        // the first coordinate is N(1, 0.5) truncated to (0, 10)
        let phi2 = (-2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let truncated_mean = 1.0 + 0.5 * phi2 / 0.977_249_868_051_820_8;
        for (name, truth) in [("a", truncated_mean), ("b", 3.0)] {
            let d = s.draws(name).unwrap();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            assert!((mean - truth).abs() < 0.02, "{name}: {mean} vs {truth}");
        }
    }

    #[test]
    fn seeds_are_deterministic_and_chains_differ() {
        let target = BetaBernoulli { params: vec![ParamSpec::unit("p")], successes: 2.0, failures: 5.0 };
        let cfg = McmcConfig::new(2_000, 500, 3, 99).unwrap();
        let a = sample(&target, &cfg).unwrap();
        let b = sample(&target, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chains[0].draws, a.chains[1].draws);
        let mut other = cfg.clone();
        other.seed = 100;
        assert_ne!(sample(&target, &other).unwrap().chains[0].draws, a.chains[0].draws);
    }

    #[test]
    fn draws_stay_inside_bounds() {
        let target = BetaBernoulli { params: vec![ParamSpec::positive("p", 1.0)], successes: 40.0, failures: 0.0 };
        let cfg = McmcConfig::new(5_000, 500, 2, 3).unwrap();
        let s = sample(&target, &cfg).unwrap();
        assert!(s.draws("p").unwrap().iter().all(|p| *p > 0.0 && *p < 1.0));
        assert_eq!(s.total_draws(), 9_000);
    }

    #[test]
    fn impossible_start_is_an_error() {
        struct Nowhere(Vec<ParamSpec>);
        impl Target for Nowhere {
            fn params(&self) -> &[ParamSpec] {
                &self.0
            }
            fn log_density(&self, _: &[f64]) -> f64 {
                f64::NEG_INFINITY
            }
        }
        let cfg = McmcConfig::new(100, 10, 1, 0).unwrap();
        assert!(matches!(sample(&Nowhere(vec![ParamSpec::unit("p")]), &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn config_validation() {
        assert!(McmcConfig::new(100, 100, 1, 0).is_err());
        assert!(McmcConfig::new(100, 10, 0, 0).is_err());
    }

    #[test]
    fn csv_export_is_long_format() {
        let target = BetaBernoulli { params: vec![ParamSpec::unit("p")], successes: 1.0, failures: 1.0 };
        let cfg = McmcConfig::new(20, 10, 2, 0).unwrap();
        let s = sample(&target, &cfg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("chain,iteration,parameter,value\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 10);
        let diag = s.diagnostics();
        assert_eq!(diag.len(), 2);
        assert_eq!(diag[1].draws, 10);
    }
}
