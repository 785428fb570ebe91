//! Distribution primitives and the grid discretization layer.
//!
//! Every prior and posterior in the crate is a [`GridDistribution`]: a finite
//! set of ordered support points with normalized masses. Continuous families
//! (Beta in mean/concentration form, log-normal rates, two-component mixtures)
//! are evaluated at grid points and renormalized.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Beta distribution in mean (`gamma`) / concentration (`xi`) form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub gamma: f64,
    pub xi: f64,
}

impl BetaParams {
    pub fn new(gamma: f64, xi: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Parameter(format!("beta mean must lie in (0,1), got {gamma}")));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Parameter(format!("beta concentration must be > 0, got {xi}")));
        }
        Ok(Self { gamma, xi })
    }

    /// The fixed "transient" component, Beta(1, 99).
    pub const fn transient() -> Self {
        Self { gamma: 0.01, xi: 100.0 }
    }

    pub fn uniform() -> Self {
        Self { gamma: 0.5, xi: 2.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.gamma * self.xi
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.gamma) * self.xi
    }

    pub fn mean(&self) -> f64 {
        self.gamma
    }

    /// Log normalizing constant, ln B(alpha, beta).
    pub fn ln_norm(&self) -> f64 {
        ln_beta(self.alpha(), self.beta())
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        check_open_unit(x)?;
        Ok(self.ln_pdf_unchecked(x.ln(), (1.0 - x).ln()))
    }

    /// Log density from precomputed `ln x` and `ln (1 - x)`.
    #[inline]
    pub fn ln_pdf_unchecked(&self, ln_x: f64, ln_1mx: f64) -> f64 {
        (self.alpha() - 1.0) * ln_x + (self.beta() - 1.0) * ln_1mx - self.ln_norm()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Parameters are validated at construction, so Beta::new cannot fail.
        Beta::new(self.alpha(), self.beta())
            .expect("validated beta parameters")
            .sample(rng)
    }

    pub fn discretize(&self, spec: &GridSpec) -> Result<GridDistribution> {
        discretize_unit_ln(|x| self.ln_pdf_unchecked(x.ln(), (1.0 - x).ln()), spec)
    }
}

/// Density of Beta(alpha = gamma * xi, beta = (1 - gamma) * xi) at `x`.
pub fn beta_pdf(x: f64, params: &BetaParams) -> Result<f64> {
    params.pdf(x)
}

fn check_open_unit(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta density undefined at {x}; value must lie in (0,1)")))
    }
}

/// Two-component prevalence prior: a fitted "stable" Beta and the fixed
/// transient Beta(1, 99) concentrated near zero, mixed with weight `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMixturePrior {
    pub phi: f64,
    pub stable: BetaParams,
}

impl BetaMixturePrior {
    pub fn new(phi: f64, stable: BetaParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::Parameter(format!("mixture weight must lie in [0,1], got {phi}")));
        }
        Ok(Self { phi, stable })
    }

    pub fn transient(&self) -> BetaParams {
        BetaParams::transient()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        let stable = self.stable.pdf(x)?;
        let transient = BetaParams::transient().pdf(x)?;
        Ok(self.phi * stable + (1.0 - self.phi) * transient)
    }

    /// Log density, computed stably in log space.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        check_open_unit(x)?;
        let (lx, l1x) = (x.ln(), (1.0 - x).ln());
        Ok(self.ln_pdf_unchecked(lx, l1x, BetaParams::transient().ln_pdf_unchecked(lx, l1x)))
    }

    #[inline]
    pub(crate) fn ln_pdf_unchecked(&self, ln_x: f64, ln_1mx: f64, ln_transient: f64) -> f64 {
        let a = if self.phi > 0.0 {
            self.phi.ln() + self.stable.ln_pdf_unchecked(ln_x, ln_1mx)
        } else {
            f64::NEG_INFINITY
        };
        let b = if self.phi < 1.0 {
            (1.0 - self.phi).ln() + ln_transient
        } else {
            f64::NEG_INFINITY
        };
        log_add_exp(a, b)
    }

    pub fn mean(&self) -> f64 {
        self.phi * self.stable.gamma + (1.0 - self.phi) * BetaParams::transient().gamma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.phi {
            self.stable.sample(rng)
        } else {
            BetaParams::transient().sample(rng)
        }
    }

    pub fn discretize(&self, spec: &GridSpec) -> Result<GridDistribution> {
        let transient = BetaParams::transient();
        discretize_unit_ln(
            |x| {
                let (lx, l1x) = (x.ln(), (1.0 - x).ln());
                self.ln_pdf_unchecked(lx, l1x, transient.ln_pdf_unchecked(lx, l1x))
            },
            spec,
        )
    }
}

/// `phi * stable(x) + (1 - phi) * transient(x)`.
pub fn mixture_pdf(x: f64, prior: &BetaMixturePrior) -> Result<f64> {
    prior.pdf(x)
}

/// Rate prior: with probability `phi` the log-rate is Gaussian(mu, sigma),
/// otherwise the rate sits at `floor_rate` events/year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMixturePrior {
    pub phi: f64,
    pub mu: f64,
    pub sigma: f64,
    pub floor_rate: f64,
}

pub const DEFAULT_FLOOR_RATE: f64 = 0.01;

impl RateMixturePrior {
    pub fn new(phi: f64, mu: f64, sigma: f64) -> Result<Self> {
        Self::with_floor(phi, mu, sigma, DEFAULT_FLOOR_RATE)
    }

    pub fn with_floor(phi: f64, mu: f64, sigma: f64, floor_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::Parameter(format!("mixture weight must lie in [0,1], got {phi}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Parameter(format!("log-rate sd must be > 0, got {sigma}")));
        }
        if !mu.is_finite() {
            return Err(Error::Parameter(format!("log-rate mean must be finite, got {mu}")));
        }
        if !(floor_rate > 0.0) {
            return Err(Error::Parameter(format!("floor rate must be > 0, got {floor_rate}")));
        }
        Ok(Self { phi, mu, sigma, floor_rate })
    }

    pub fn discretize(&self, spec: &GridSpec) -> Result<GridDistribution> {
        discretize_rate(self, spec)
    }
}

/// Which scale a grid lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Prevalence in [0, 1].
    Unit,
    /// Rate in events/year.
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GridKind {
    UnitInterval,
    LogRate { rate_lo: f64, rate_hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub bins: usize,
}

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_RATE_LO: f64 = 0.01;
pub const DEFAULT_RATE_HI: f64 = 1000.0;

impl Default for GridSpec {
    fn default() -> Self {
        Self::unit(DEFAULT_BINS)
    }
}

impl GridSpec {
    pub fn unit(bins: usize) -> Self {
        Self { kind: GridKind::UnitInterval, bins }
    }

    pub fn log_rate(bins: usize, rate_lo: f64, rate_hi: f64) -> Self {
        Self { kind: GridKind::LogRate { rate_lo, rate_hi }, bins }
    }

    pub fn default_rate() -> Self {
        Self::log_rate(DEFAULT_BINS, DEFAULT_RATE_LO, DEFAULT_RATE_HI)
    }

    pub fn scale(&self) -> Scale {
        match self.kind {
            GridKind::UnitInterval => Scale::Unit,
            GridKind::LogRate { .. } => Scale::Rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GridKind::UnitInterval if self.bins == 0 => {
                Err(Error::Config("grid needs at least one bin".into()))
            }
            GridKind::LogRate { rate_lo, rate_hi } => {
                if self.bins < 2 {
                    return Err(Error::Config("rate grid needs at least two points".into()));
                }
                if !(rate_lo > 0.0 && rate_hi > rate_lo && rate_hi.is_finite()) {
                    return Err(Error::Config(format!(
                        "rate grid bounds must satisfy 0 < lo < hi, got [{rate_lo}, {rate_hi}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Grid points: bin midpoints `(i + 0.5) / K` on the unit interval, or
    /// geometrically spaced rates from `rate_lo` to `rate_hi`.
    pub fn points(&self) -> Vec<f64> {
        let k = self.bins;
        match self.kind {
            GridKind::UnitInterval => (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect(),
            GridKind::LogRate { rate_lo, rate_hi } => {
                let step = (rate_hi / rate_lo).ln() / (k - 1) as f64;
                (0..k)
                    .map(|i| {
                        if i == k - 1 {
                            rate_hi
                        } else {
                            rate_lo * (step * i as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    /// Spacing between neighbouring points: `1/K` on the unit interval, the
    /// log step on rate grids.
    pub fn bin_width(&self) -> f64 {
        match self.kind {
            GridKind::UnitInterval => 1.0 / self.bins as f64,
            GridKind::LogRate { rate_lo, rate_hi } => (rate_hi / rate_lo).ln() / (self.bins - 1) as f64,
        }
    }
}

/// A discrete distribution over an ordered support grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution {
    scale: Scale,
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl GridDistribution {
    /// Build from explicit support and (unnormalized) weights.
    pub fn from_weights(scale: Scale, support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::Input(format!(
                "support ({}) and mass ({}) must be non-empty and of equal length",
                support.len(),
                weights.len()
            )));
        }
        if support.iter().any(|s| !s.is_finite()) || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("support must be finite and strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Input("masses must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePrior("all weights are zero".into()));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { scale, support, mass })
    }

    /// Uniform distribution over the grid points of `spec`.
    pub fn uniform(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Self::from_weights(spec.scale(), spec.points(), vec![1.0; spec.bins])
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(self)
    }

    /// Same support, new weights (renormalized).
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        Self::from_weights(self.scale, self.support.clone(), weights)
    }

    /// Index of the support point nearest `x`; exact ties go to the lower
    /// point. Rate grids measure distance in log space.
    pub fn nearest_index(&self, x: f64) -> usize {
        nearest_index(&self.support, self.scale, x)
    }

    /// Pointwise mixture `w * self + (1 - w) * other` over a shared support.
    pub fn mix(&self, other: &GridDistribution, w: f64) -> Result<Self> {
        if self.support != other.support || self.scale != other.scale {
            return Err(Error::Input("cannot mix distributions on different grids".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Parameter(format!("mixture weight must lie in [0,1], got {w}")));
        }
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        Ok(Self { scale: self.scale, support: self.support.clone(), mass })
    }

    /// Equal-weight mixture of several distributions on one grid.
    pub fn equal_mixture(parts: &[GridDistribution]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("nothing to mix".into()))?;
        let n = parts.len() as f64;
        let mut mass = vec![0.0; first.len()];
        for part in parts {
            if part.support != first.support || part.scale != first.scale {
                return Err(Error::Input("cannot mix distributions on different grids".into()));
            }
            for (m, p) in mass.iter_mut().zip(&part.mass) {
                *m += p / n;
            }
        }
        Ok(Self { scale: first.scale, support: first.support.clone(), mass })
    }

    /// Total variation distance to another distribution on the same grid.
    pub fn total_variation(&self, other: &GridDistribution) -> Result<f64> {
        if self.support.len() != other.support.len() {
            return Err(Error::Input("distributions live on different grids".into()));
        }
        Ok(0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

pub(crate) fn nearest_index(support: &[f64], scale: Scale, x: f64) -> usize {
    let key = |v: f64| match scale {
        Scale::Unit => v,
        Scale::Rate => v.max(f64::MIN_POSITIVE).ln(),
    };
    let target = key(x);
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, s) in support.iter().enumerate() {
        let d = (key(*s) - target).abs();
        // ties within rounding noise keep the lower index
        if d < best_dist - 1e-12 {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Discretize a unit-interval density by evaluating it at bin midpoints.
pub fn discretize_unit<F: Fn(f64) -> f64>(density: F, spec: &GridSpec) -> Result<GridDistribution> {
    require_unit(spec)?;
    let support = spec.points();
    let weights: Vec<f64> = support.iter().map(|&x| density(x)).collect();
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::Numerical("density returned a negative or NaN value".into()));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::DegeneratePrior("density is zero at every grid point".into()));
    }
    GridDistribution::from_weights(Scale::Unit, support, weights)
}

/// Like [`discretize_unit`] but takes a log density, normalizing with the
/// max subtracted so sharply peaked densities do not overflow.
pub fn discretize_unit_ln<F: Fn(f64) -> f64>(ln_density: F, spec: &GridSpec) -> Result<GridDistribution> {
    require_unit(spec)?;
    let support = spec.points();
    let ln_w: Vec<f64> = support.iter().map(|&x| ln_density(x)).collect();
    GridDistribution::from_weights(Scale::Unit, support, exp_normalize(&ln_w)?)
}

fn require_unit(spec: &GridSpec) -> Result<()> {
    spec.validate()?;
    match spec.kind {
        GridKind::UnitInterval => Ok(()),
        _ => Err(Error::Config("expected a unit-interval grid".into())),
    }
}

/// Discretize the rate mixture on a log-rate grid. The floor component is
/// lumped onto the grid point nearest `floor_rate`.
pub fn discretize_rate(prior: &RateMixturePrior, spec: &GridSpec) -> Result<GridDistribution> {
    spec.validate()?;
    let GridKind::LogRate { rate_lo, .. } = spec.kind else {
        return Err(Error::Config("expected a log-rate grid".into()));
    };
    if !(prior.sigma > 0.0) {
        return Err(Error::Parameter(format!("log-rate sd must be > 0, got {}", prior.sigma)));
    }
    if prior.floor_rate < rate_lo * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "floor rate {} lies below the grid minimum {rate_lo}",
            prior.floor_rate
        )));
    }
    let support = spec.points();
    let ln_w: Vec<f64> = support
        .iter()
        .map(|r| {
            let z = (r.ln() - prior.mu) / prior.sigma;
            -0.5 * z * z
        })
        .collect();
    let lognormal = exp_normalize(&ln_w)?;
    let floor = nearest_index(&support, Scale::Rate, prior.floor_rate);
    let mut weights: Vec<f64> = lognormal.iter().map(|w| prior.phi * w).collect();
    weights[floor] += 1.0 - prior.phi;
    GridDistribution::from_weights(Scale::Rate, support, weights)
}

/// All mass on the grid point nearest `p0` (ties go to the lower point;
/// values outside the grid clamp to its ends).
pub fn point_mass(p0: f64, spec: &GridSpec) -> Result<GridDistribution> {
    spec.validate()?;
    let support = spec.points();
    let idx = nearest_index(&support, spec.scale(), p0);
    let mut weights = vec![0.0; support.len()];
    weights[idx] = 1.0;
    GridDistribution::from_weights(spec.scale(), support, weights)
}

pub fn mean(d: &GridDistribution) -> f64 {
    d.support.iter().zip(&d.mass).map(|(s, m)| s * m).sum()
}

/// Exponentiate log weights after subtracting their maximum.
pub(crate) fn exp_normalize(ln_w: &[f64]) -> Result<Vec<f64>> {
    if ln_w.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("log density returned NaN".into()));
    }
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegeneratePrior("density is zero at every grid point".into()));
    }
    if max == f64::INFINITY {
        return Err(Error::Numerical("density is infinite at a grid point".into()));
    }
    let w: Vec<f64> = ln_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
