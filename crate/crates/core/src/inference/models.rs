//! Likelihoods for prior fitting and the joint prior/referent/endorsement
//! model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::squared_correlation;
use crate::error::{Error, Result};
use crate::numerics::{exp_normalize, BetaParams, GridDistribution, GridSpec, RateMixturePrior, DEFAULT_FLOOR_RATE};
use crate::pragmatics::{fixed_cores, generalization_log_ratios, snap_referent, speaker_probability};
use crate::priors::{clamp_percent, clamp_proportion};
use crate::semantics::threshold_prior_for;

use super::mcmc::{sample, McmcConfig, ParamSpec, PosteriorSamples, Target};
use super::summary::{map_and_hpd, MapHpd};

pub const MIN_PRIOR_RESPONSES: usize = 5;
pub const XI_MAX: f64 = 100.0;
pub const LAMBDA_MAX: f64 = 5.0;
pub const MU_RANGE: (f64, f64) = (-5.0, 10.0);
pub const SIGMA_MAX: f64 = 5.0;

/// Keeps the Binomial likelihood finite when a prediction saturates.
const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Uncertain,
    Fixed,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uncertain" => Ok(ModelKind::Uncertain),
            "fixed" => Ok(ModelKind::Fixed),
            other => Err(Error::Input(format!("unknown model '{other}' (expected uncertain or fixed)"))),
        }
    }
}

/// `ln x`, `ln(1-x)` and the transient log density at a set of points.
#[derive(Debug, Clone, Default)]
struct UnitLogs {
    ln_x: Vec<f64>,
    ln_1mx: Vec<f64>,
    ln_transient: Vec<f64>,
}

impl UnitLogs {
    fn new(xs: impl IntoIterator<Item = f64>) -> Self {
        let transient = BetaParams::transient();
        let mut out = Self::default();
        for x in xs {
            let (a, b) = (x.ln(), (1.0 - x).ln());
            out.ln_x.push(a);
            out.ln_1mx.push(b);
            out.ln_transient.push(transient.ln_pdf_unchecked(a, b));
        }
        out
    }

    fn len(&self) -> usize {
        self.ln_x.len()
    }

    /// Log density of `phi * Beta(gamma, xi) + (1 - phi) * Beta(1, 99)` at point `i`.
    #[inline]
    fn mixture(&self, i: usize, phi: f64, stable: &Stable) -> f64 {
        let a = phi.ln() + stable.ln_pdf(self.ln_x[i], self.ln_1mx[i]);
        let b = (1.0 - phi).ln() + self.ln_transient[i];
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + ((a - m).exp() + (b - m).exp()).ln()
    }

    fn mixture_sum(&self, phi: f64, stable: &Stable) -> f64 {
        (0..self.len()).map(|i| self.mixture(i, phi, stable)).sum()
    }

    fn beta_sum(&self, stable: &Stable) -> f64 {
        (0..self.len()).map(|i| stable.ln_pdf(self.ln_x[i], self.ln_1mx[i])).sum()
    }
}

/// Beta log density with its normalizer computed once.
struct Stable {
    am1: f64,
    bm1: f64,
    ln_norm: f64,
}

impl Stable {
    fn new(gamma: f64, xi: f64) -> Self {
        let p = BetaParams { gamma, xi };
        Self { am1: p.alpha() - 1.0, bm1: p.beta() - 1.0, ln_norm: p.ln_norm() }
    }

    #[inline]
    fn ln_pdf(&self, ln_x: f64, ln_1mx: f64) -> f64 {
        self.am1 * ln_x + self.bm1 * ln_1mx - self.ln_norm
    }
}

fn check_percent_responses(responses_pct: &[f64], min: usize) -> Result<()> {
    if responses_pct.len() < min {
        return Err(Error::Input(format!("need at least {min} responses, got {}", responses_pct.len())));
    }
    if let Some(r) = responses_pct.iter().find(|r| !(0.0..=100.0).contains(*r)) {
        return Err(Error::Input(format!("response {r} outside [0,100]")));
    }
    Ok(())
}

/// Mixture-of-Betas likelihood for one property's percent responses.
pub struct BetaMixtureTarget {
    params: Vec<ParamSpec>,
    logs: UnitLogs,
}

impl BetaMixtureTarget {
    pub fn new(responses_pct: &[f64]) -> Result<Self> {
        check_percent_responses(responses_pct, MIN_PRIOR_RESPONSES)?;
        Ok(Self {
            params: vec![ParamSpec::unit("phi"), ParamSpec::unit("gamma"), ParamSpec::positive("xi", XI_MAX)],
            logs: UnitLogs::new(responses_pct.iter().map(|r| clamp_percent(*r))),
        })
    }
}

impl Target for BetaMixtureTarget {
    fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.logs.mixture_sum(x[0], &Stable::new(x[1], x[2]))
    }
}

/// Single-Beta likelihood, used for referent prevalence and as the
/// comparison fit for priors.
pub struct SingleBetaTarget {
    params: Vec<ParamSpec>,
    logs: UnitLogs,
}

impl SingleBetaTarget {
    pub fn new(responses_pct: &[f64]) -> Result<Self> {
        check_percent_responses(responses_pct, 1)?;
        Ok(Self {
            params: vec![ParamSpec::unit("gamma"), ParamSpec::positive("xi", XI_MAX)],
            logs: UnitLogs::new(responses_pct.iter().map(|r| clamp_percent(*r))),
        })
    }
}

impl Target for SingleBetaTarget {
    fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.logs.beta_sum(&Stable::new(x[0], x[1]))
    }
}

/// Posterior over `(phi, gamma, xi)` for one property's prior responses.
pub fn fit_beta_mixture(responses_pct: &[f64], cfg: &McmcConfig) -> Result<PosteriorSamples> {
    sample(&BetaMixtureTarget::new(responses_pct)?, cfg)
}

/// Posterior over `(gamma, xi)` of a single Beta.
pub fn fit_single_beta(responses_pct: &[f64], cfg: &McmcConfig) -> Result<PosteriorSamples> {
    sample(&SingleBetaTarget::new(responses_pct)?, cfg)
}

/// Prior elicitation data for one property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorData {
    /// Percent responses fit by the Beta mixture.
    Mixture(Vec<f64>),
    /// Habitual two-question data: Q1 proportions and Q2 rates (events/year).
    Habitual { q1: Vec<f64>, q2: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyBlock {
    pub name: String,
    pub prior: PriorData,
}

/// Referent-prevalence responses for one (category, property) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferentBlock {
    pub category: String,
    pub property: String,
    pub responses_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferentSource {
    /// The fitted referent Beta of `(category, item property)`.
    Elicited(String),
    /// A known prevalence or rate.
    Given(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndorsementItem {
    pub id: String,
    pub property: String,
    pub referent: ReferentSource,
    pub n_agree: u64,
    pub n_total: u64,
}

impl EndorsementItem {
    pub fn proportion(&self) -> f64 {
        self.n_agree as f64 / self.n_total as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JointData {
    pub properties: Vec<PropertyBlock>,
    pub referents: Vec<ReferentBlock>,
    pub items: Vec<EndorsementItem>,
}

pub fn prior_param(property: &str, field: &str) -> String {
    format!("prior.{property}.{field}")
}

pub fn referent_param(category: &str, property: &str, field: &str) -> String {
    format!("referent.{category}.{property}.{field}")
}

#[derive(Debug, Clone, Copy)]
enum Owner {
    Property(usize),
    Referent(usize),
    Global,
}

#[derive(Debug, Clone)]
enum CompiledPrior {
    Mixture { logs: UnitLogs, phi: usize, gamma: usize, xi: usize },
    Habitual { q1: UnitLogs, log_rates: Vec<f64>, gamma: usize, xi: usize, mu: usize, sigma: usize },
}

#[derive(Debug, Clone)]
struct CompiledReferent {
    logs: UnitLogs,
    gamma: usize,
    xi: usize,
}

#[derive(Debug, Clone, Copy)]
enum CompiledSource {
    Referent(usize),
    Point(usize),
}

#[derive(Debug, Clone, Copy)]
struct CompiledItem {
    property: usize,
    source: CompiledSource,
    k: f64,
    n: f64,
}

#[derive(Debug, Clone)]
struct Grid {
    support: Vec<f64>,
    below: Vec<f64>,
}

/// Joint posterior over prior, referent and speaker parameters.
#[derive(Debug, Clone)]
pub struct JointModel {
    model: ModelKind,
    params: Vec<ParamSpec>,
    owners: Vec<Owner>,
    priors: Vec<CompiledPrior>,
    referents: Vec<CompiledReferent>,
    items: Vec<CompiledItem>,
    items_by_property: Vec<Vec<usize>>,
    items_by_referent: Vec<Vec<usize>>,
    unit: Grid,
    unit_logs: UnitLogs,
    rate: Grid,
    rate_spec: GridSpec,
    lambda: Option<usize>,
    theta_unit: Option<usize>,
    theta_rate: Option<usize>,
    noise: Option<usize>,
    property_names: Vec<String>,
    item_ids: Vec<String>,
}

impl JointModel {
    pub fn new(data: &JointData, model: ModelKind, bins: usize) -> Result<Self> {
        let unit_spec = GridSpec::unit(bins);
        let rate_spec = GridSpec::log_rate(bins, crate::numerics::DEFAULT_RATE_LO, crate::numerics::DEFAULT_RATE_HI);
        unit_spec.validate()?;
        let grid = |spec: &GridSpec| -> Result<Grid> {
            let support = spec.points();
            let theta = threshold_prior_for(spec)?;
            let below = support.iter().map(|p| theta.prob_below(*p)).collect();
            Ok(Grid { support, below })
        };
        let unit = grid(&unit_spec)?;
        let rate = grid(&rate_spec)?;
        let unit_logs = UnitLogs::new(unit.support.iter().copied());

        let mut params = Vec::new();
        let mut owners = Vec::new();
        let mut push = |spec: ParamSpec, owner: Owner| {
            params.push(spec);
            owners.push(owner);
            params.len() - 1
        };

        let mut priors = Vec::new();
        let mut property_names = Vec::new();
        for (f, block) in data.properties.iter().enumerate() {
            if property_names.contains(&block.name) {
                return Err(Error::Config(format!("property '{}' listed twice", block.name)));
            }
            property_names.push(block.name.clone());
            let own = Owner::Property(f);
            let name = &block.name;
            priors.push(match &block.prior {
                PriorData::Mixture(responses) => {
                    check_percent_responses(responses, 1)?;
                    CompiledPrior::Mixture {
                        logs: UnitLogs::new(responses.iter().map(|r| clamp_percent(*r))),
                        phi: push(ParamSpec::unit(prior_param(name, "phi")), own),
                        gamma: push(ParamSpec::unit(prior_param(name, "gamma")), own),
                        xi: push(ParamSpec::positive(prior_param(name, "xi"), XI_MAX), own),
                    }
                }
                PriorData::Habitual { q1, q2 } => {
                    if q1.is_empty() || q2.is_empty() {
                        return Err(Error::Input(format!("habitual property '{name}' needs both Q1 and Q2 data")));
                    }
                    if q1.iter().any(|p| !(0.0..=1.0).contains(p)) || q2.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                        return Err(Error::Input(format!("habitual data for '{name}' out of range")));
                    }
                    CompiledPrior::Habitual {
                        q1: UnitLogs::new(q1.iter().map(|p| clamp_proportion(*p))),
                        log_rates: q2.iter().map(|r| r.max(DEFAULT_FLOOR_RATE).ln()).collect(),
                        gamma: push(ParamSpec::unit(prior_param(name, "q1_gamma")), own),
                        xi: push(ParamSpec::positive(prior_param(name, "q1_xi"), XI_MAX), own),
                        mu: push(ParamSpec::interval(prior_param(name, "mu"), MU_RANGE.0, MU_RANGE.1), own),
                        sigma: push(ParamSpec::positive(prior_param(name, "sigma"), SIGMA_MAX), own),
                    }
                }
            });
        }
        let property_index = |name: &str| -> Result<usize> {
            property_names
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::Config(format!("no prior data for property '{name}'")))
        };

        let mut referents = Vec::new();
        let mut referent_keys: Vec<(String, usize)> = Vec::new();
        for (r, block) in data.referents.iter().enumerate() {
            let f = property_index(&block.property)?;
            if matches!(priors[f], CompiledPrior::Habitual { .. }) {
                return Err(Error::Config(format!(
                    "elicited referents are only supported for prevalence properties, not '{}'",
                    block.property
                )));
            }
            if referent_keys.contains(&(block.category.clone(), f)) {
                return Err(Error::Config(format!("referent ({}, {}) listed twice", block.category, block.property)));
            }
            check_percent_responses(&block.responses_pct, 1)?;
            referent_keys.push((block.category.clone(), f));
            let own = Owner::Referent(r);
            referents.push(CompiledReferent {
                logs: UnitLogs::new(block.responses_pct.iter().map(|x| clamp_percent(*x))),
                gamma: push(ParamSpec::unit(referent_param(&block.category, &block.property, "gamma")), own),
                xi: push(ParamSpec::positive(referent_param(&block.category, &block.property, "xi"), XI_MAX), own),
            });
        }

        let mut items = Vec::new();
        let mut items_by_property = vec![Vec::new(); priors.len()];
        let mut items_by_referent = vec![Vec::new(); referents.len()];
        let mut item_ids = Vec::new();
        let unit_uniform = GridDistribution::uniform(&unit_spec)?;
        let rate_uniform = GridDistribution::uniform(&rate_spec)?;
        for (i, item) in data.items.iter().enumerate() {
            if item.n_total == 0 || item.n_agree > item.n_total {
                return Err(Error::Input(format!(
                    "item '{}': need 0 <= agree <= total and total > 0",
                    item.id
                )));
            }
            let f = property_index(&item.property)
                .map_err(|_| Error::Config(format!("item '{}' refers to unknown property '{}'", item.id, item.property)))?;
            let is_rate = matches!(priors[f], CompiledPrior::Habitual { .. });
            let source = match &item.referent {
                ReferentSource::Elicited(category) => {
                    let r = referent_keys.iter().position(|(c, g)| c == category && *g == f).ok_or_else(|| {
                        Error::Config(format!(
                            "item '{}' has no referent data for ({category}, {})",
                            item.id, item.property
                        ))
                    })?;
                    items_by_referent[r].push(i);
                    CompiledSource::Referent(r)
                }
                ReferentSource::Given(v) => {
                    let grid = if is_rate { &rate_uniform } else { &unit_uniform };
                    CompiledSource::Point(snap_referent(grid, *v)?)
                }
            };
            items_by_property[f].push(i);
            item_ids.push(item.id.clone());
            items.push(CompiledItem { property: f, source, k: item.n_agree as f64, n: item.n_total as f64 });
        }

        let has_items = !items.is_empty();
        let unit_items = items.iter().any(|it| matches!(priors[it.property], CompiledPrior::Mixture { .. }));
        let rate_items = items.iter().any(|it| matches!(priors[it.property], CompiledPrior::Habitual { .. }));
        let lambda = has_items.then(|| push(ParamSpec::positive("lambda", LAMBDA_MAX), Owner::Global));
        let fixed = model == ModelKind::Fixed;
        let theta_unit = (fixed && unit_items).then(|| push(ParamSpec::unit("theta_star"), Owner::Global));
        let theta_rate = (fixed && rate_items).then(|| {
            push(
                ParamSpec::interval("theta_star_log_rate", rate_spec.points()[0].ln(), crate::numerics::DEFAULT_RATE_HI.ln()),
                Owner::Global,
            )
        });
        let noise = (fixed && has_items).then(|| push(ParamSpec::unit("noise"), Owner::Global));

        if params.is_empty() {
            return Err(Error::Config("joint model has no data".into()));
        }
        Ok(Self {
            model,
            params,
            owners,
            priors,
            referents,
            items,
            items_by_property,
            items_by_referent,
            unit,
            unit_logs,
            rate,
            rate_spec,
            lambda,
            theta_unit,
            theta_rate,
            noise,
            property_names,
            item_ids,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn property_names(&self) -> &[String] {
        &self.property_names
    }

    fn prior_block(&self, x: &[f64], f: usize) -> f64 {
        match &self.priors[f] {
            CompiledPrior::Mixture { logs, phi, gamma, xi } => logs.mixture_sum(x[*phi], &Stable::new(x[*gamma], x[*xi])),
            CompiledPrior::Habitual { q1, log_rates, gamma, xi, mu, sigma } => {
                let (m, s) = (x[*mu], x[*sigma]);
                let q2: f64 = log_rates.iter().map(|l| -s.ln() - 0.5 * ((l - m) / s).powi(2)).sum();
                q1.beta_sum(&Stable::new(x[*gamma], x[*xi])) + q2
            }
        }
    }

    fn referent_block(&self, x: &[f64], r: usize) -> f64 {
        let c = &self.referents[r];
        c.logs.beta_sum(&Stable::new(x[c.gamma], x[c.xi]))
    }

    /// Discretized prior mass of property `f` at `x`.
    fn prior_mass(&self, x: &[f64], f: usize) -> Option<Vec<f64>> {
        match &self.priors[f] {
            CompiledPrior::Mixture { phi, gamma, xi, .. } => {
                let stable = Stable::new(x[*gamma], x[*xi]);
                let ln_w: Vec<f64> = (0..self.unit_logs.len()).map(|i| self.unit_logs.mixture(i, x[*phi], &stable)).collect();
                exp_normalize(&ln_w).ok()
            }
            CompiledPrior::Habitual { gamma, mu, sigma, .. } => RateMixturePrior::new(x[*gamma], x[*mu], x[*sigma])
                .and_then(|p| p.discretize(&self.rate_spec))
                .ok()
                .map(|d| d.mass().to_vec()),
        }
    }

    /// Endorsement probability at every grid point for property `f`.
    fn endorsement_curve(&self, x: &[f64], f: usize, mass: &[f64]) -> Vec<f64> {
        let lambda = self.lambda.map_or(0.0, |j| x[j]);
        let is_rate = matches!(self.priors[f], CompiledPrior::Habitual { .. });
        let grid = if is_rate { &self.rate } else { &self.unit };
        match self.model {
            ModelKind::Uncertain => generalization_log_ratios(mass, &grid.below)
                .into_iter()
                .map(|lr| speaker_probability(lambda, lr))
                .collect(),
            ModelKind::Fixed => {
                let theta = if is_rate {
                    self.theta_rate.map_or(0.0, |j| x[j].exp())
                } else {
                    self.theta_unit.map_or(0.0, |j| x[j])
                };
                let noise = self.noise.map_or(0.0, |j| x[j]);
                fixed_cores(&grid.support, mass, theta, lambda)
                    .into_iter()
                    .map(|c| (1.0 - noise) * c + 0.5 * noise)
                    .collect()
            }
        }
    }

    fn item_probability(&self, x: &[f64], item: &CompiledItem, curve: &[f64]) -> f64 {
        match item.source {
            CompiledSource::Point(i) => curve[i],
            CompiledSource::Referent(r) => {
                let c = &self.referents[r];
                let stable = Stable::new(x[c.gamma], x[c.xi]);
                let ln_w: Vec<f64> = (0..self.unit_logs.len())
                    .map(|i| stable.ln_pdf(self.unit_logs.ln_x[i], self.unit_logs.ln_1mx[i]))
                    .collect();
                match exp_normalize(&ln_w) {
                    Ok(w) => w.iter().zip(curve).map(|(a, b)| a * b).sum(),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    fn items_log_lik(&self, x: &[f64], f: usize, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return 0.0;
        }
        let Some(mass) = self.prior_mass(x, f) else {
            return f64::NEG_INFINITY;
        };
        let curve = self.endorsement_curve(x, f, &mass);
        let mut total = 0.0;
        for &i in subset {
            let item = &self.items[i];
            let s = self.item_probability(x, item, &curve);
            if !s.is_finite() {
                return f64::NEG_INFINITY;
            }
            let s = s.clamp(PROB_EPS, 1.0 - PROB_EPS);
            total += item.k * s.ln() + (item.n - item.k) * (1.0 - s).ln();
        }
        total
    }

    /// Predicted endorsement probability of every item at `x`.
    pub fn item_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![f64::NAN; self.items.len()];
        for (f, subset) in self.items_by_property.iter().enumerate() {
            if subset.is_empty() {
                continue;
            }
            let mass = self.prior_mass(x, f).ok_or_else(|| Error::Numerical("degenerate prior".into()))?;
            let curve = self.endorsement_curve(x, f, &mass);
            for &i in subset {
                out[i] = self.item_probability(x, &self.items[i], &curve);
            }
        }
        if out.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numerical("non-finite endorsement prediction".into()));
        }
        Ok(out)
    }
}

impl Target for JointModel {
    fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for f in 0..self.priors.len() {
            total += self.prior_block(x, f) + self.items_log_lik(x, f, &self.items_by_property[f]);
        }
        for r in 0..self.referents.len() {
            total += self.referent_block(x, r);
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    fn local_log_density(&self, x: &[f64], index: usize) -> f64 {
        let total = match self.owners[index] {
            Owner::Property(f) => self.prior_block(x, f) + self.items_log_lik(x, f, &self.items_by_property[f]),
            Owner::Referent(r) => {
                let subset = &self.items_by_referent[r];
                let lik = match subset.first() {
                    Some(&i) => self.items_log_lik(x, self.items[i].property, subset),
                    None => 0.0,
                };
                self.referent_block(x, r) + lik
            }
            Owner::Global => (0..self.priors.len())
                .map(|f| self.items_log_lik(x, f, &self.items_by_property[f]))
                .sum(),
        };
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

/// Fit the joint model.
pub fn fit_joint(data: &JointData, model: ModelKind, bins: usize, cfg: &McmcConfig) -> Result<(JointModel, PosteriorSamples)> {
    let m = JointModel::new(data, model, bins)?;
    let s = sample(&m, cfg)?;
    Ok((m, s))
}

/// Prefix every parameter name with `prefix.`.
pub fn rename_samples(mut samples: PosteriorSamples, rename: impl Fn(&str) -> String) -> PosteriorSamples {
    for p in &mut samples.params {
        p.name = rename(&p.name);
    }
    samples
}

/// MAP estimate of every parameter.
pub fn map_estimates(samples: &PosteriorSamples) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in &samples.params {
        out.insert(p.name.clone(), map_and_hpd(&samples.draws(&p.name)?, 0.95)?.map);
    }
    Ok(out)
}

/// MAP and 95% HPD of every parameter.
pub fn summarize(samples: &PosteriorSamples) -> Result<BTreeMap<String, MapHpd>> {
    let mut out = BTreeMap::new();
    for p in &samples.params {
        out.insert(p.name.clone(), map_and_hpd(&samples.draws(&p.name)?, 0.95)?);
    }
    Ok(out)
}

/// Fit every prior and referent block on its own, returning MAP estimates
/// under the joint model's parameter names.
pub fn fit_isolated(data: &JointData, bins: usize, cfg: &McmcConfig) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for block in &data.properties {
        let only = JointData { properties: vec![block.clone()], referents: vec![], items: vec![] };
        let (_, s) = fit_joint(&only, ModelKind::Uncertain, bins, cfg)?;
        out.extend(map_estimates(&s)?);
    }
    for block in &data.referents {
        let s = fit_single_beta(&block.responses_pct, cfg)?;
        let s = rename_samples(s, |n| referent_param(&block.category, &block.property, n));
        out.extend(map_estimates(&s)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionPair {
    pub parameter: String,
    pub isolated: f64,
    pub joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub pairs: Vec<DistortionPair>,
    pub r2: f64,
    pub r2_prior: Option<f64>,
    pub r2_referent: Option<f64>,
    pub max_abs_deviation: f64,
}

/// Compare isolated and joint MAP estimates of the prior and referent
/// parameters. Speaker parameters present only in the joint fit are skipped.
pub fn distortion_check(isolated: &BTreeMap<String, f64>, joint: &BTreeMap<String, f64>) -> Result<DistortionReport> {
    let is_block = |name: &str| name.starts_with("prior.") || name.starts_with("referent.");
    let mut pairs = Vec::new();
    for (name, iso) in isolated {
        let j = joint
            .get(name)
            .ok_or_else(|| Error::Input(format!("parameter '{name}' missing from the joint fit")))?;
        pairs.push(DistortionPair { parameter: name.clone(), isolated: *iso, joint: *j });
    }
    if let Some(extra) = joint.keys().find(|k| is_block(k) && !isolated.contains_key(*k)) {
        return Err(Error::Input(format!("parameter '{extra}' missing from the isolated fits")));
    }
    if pairs.len() < 2 {
        return Err(Error::Input("distortion check needs at least two parameters".into()));
    }
    let r2_of = |filter: &dyn Fn(&str) -> bool| -> Option<f64> {
        let (a, b): (Vec<f64>, Vec<f64>) =
            pairs.iter().filter(|p| filter(&p.parameter)).map(|p| (p.isolated, p.joint)).unzip();
        if a.len() < 2 {
            return None;
        }
        if a == b {
            return Some(1.0);
        }
        squared_correlation(&a, &b).ok()
    };
    let r2 = r2_of(&|_| true).ok_or_else(|| Error::Numerical("r² undefined: MAP estimates have zero variance".into()))?;
    Ok(DistortionReport {
        r2,
        r2_prior: r2_of(&|n| n.starts_with("prior.")),
        r2_referent: r2_of(&|n| n.starts_with("referent.")),
        max_abs_deviation: pairs.iter().map(|p| (p.isolated - p.joint).abs()).fold(0.0, f64::max),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPrediction {
    pub id: String,
    pub human: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Posterior predictive endorsement per item, using up to `max_draws`
/// evenly spaced draws.
pub fn predict_items(model: &JointModel, data: &JointData, samples: &PosteriorSamples, max_draws: usize) -> Result<Vec<ItemPrediction>> {
    let rows: Vec<&[f64]> = samples.rows().collect();
    if rows.is_empty() {
        return Err(Error::Input("no posterior draws".into()));
    }
    let stride = rows.len().div_ceil(max_draws.max(1));
    let mut per_item: Vec<Vec<f64>> = vec![Vec::new(); model.items.len()];
    for row in rows.iter().step_by(stride) {
        for (i, s) in model.item_predictions(row)?.into_iter().enumerate() {
            per_item[i].push(s);
        }
    }
    Ok(data
        .items
        .iter()
        .zip(per_item)
        .map(|(item, mut d)| {
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            d.sort_by(f64::total_cmp);
            let q = |p: f64| d[((p * (d.len() - 1) as f64).round() as usize).min(d.len() - 1)];
            ItemPrediction { id: item.id.clone(), human: item.proportion(), mean, lo: q(0.025), hi: q(0.975) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BetaMixturePrior;
    use crate::pragmatics::{endorse, endorse_fixed, FixedThresholdParams, SpeakerConfig, SpeakerVariant};
    use crate::semantics::threshold_prior_for;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mixture_responses(phi: f64, gamma: f64, xi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = BetaMixturePrior::new(phi, BetaParams::new(gamma, xi).unwrap()).unwrap();
        (0..n).map(|_| 100.0 * prior.sample(&mut rng)).collect()
    }

    #[test]
    fn mixture_target_matches_direct_density() {
        let responses = [0.0, 12.0, 50.0, 88.0, 100.0, 33.0];
        let t = BetaMixtureTarget::new(&responses).unwrap();
        let prior = BetaMixturePrior::new(0.4, BetaParams::new(0.7, 9.0).unwrap()).unwrap();
        let direct: f64 = responses.iter().map(|r| prior.pdf(clamp_percent(*r)).unwrap().ln()).sum();
        assert!((t.log_density(&[0.4, 0.7, 9.0]) - direct).abs() < 1e-9);
    }

    #[test]
    fn too_few_prior_responses() {
        let cfg = McmcConfig::new(100, 10, 1, 0).unwrap();
        assert!(matches!(fit_beta_mixture(&[10.0, 20.0], &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn all_fifty_percent_concentrates() {
        let cfg = McmcConfig::new(6_000, 2_000, 2, 1).unwrap();
        let s = fit_beta_mixture(&[50.0; 40], &cfg).unwrap();
        let est = map_estimates(&s).unwrap();
        assert!((est["gamma"] - 0.5).abs() < 0.05, "{est:?}");
        assert!(est["phi"] > 0.9, "{est:?}");
    }

    fn synthetic_items() -> JointData {
        JointData {
            properties: vec![PropertyBlock { name: "f".into(), prior: PriorData::Mixture(mixture_responses(0.5, 0.7, 10.0, 40, 3)) }],
            referents: vec![ReferentBlock { category: "k".into(), property: "f".into(), responses_pct: vec![60.0, 70.0, 80.0] }],
            items: vec![
                EndorsementItem { id: "a".into(), property: "f".into(), referent: ReferentSource::Elicited("k".into()), n_agree: 30, n_total: 40 },
                EndorsementItem { id: "b".into(), property: "f".into(), referent: ReferentSource::Given(0.3), n_agree: 10, n_total: 40 },
            ],
        }
    }

    #[test]
    fn joint_item_predictions_match_pragmatics() {
        let data = synthetic_items();
        for model in [ModelKind::Uncertain, ModelKind::Fixed] {
            let m = JointModel::new(&data, model, 100).unwrap();
            let names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
            let mut x = vec![0.0; names.len()];
            let set = |x: &mut Vec<f64>, n: &str, v: f64| x[names.iter().position(|p| *p == n).unwrap()] = v;
            set(&mut x, "prior.f.phi", 0.4);
            set(&mut x, "prior.f.gamma", 0.6);
            set(&mut x, "prior.f.xi", 12.0);
            set(&mut x, "referent.k.f.gamma", 0.75);
            set(&mut x, "referent.k.f.xi", 20.0);
            set(&mut x, "lambda", 2.0);
            if model == ModelKind::Fixed {
                set(&mut x, "theta_star", 0.35);
                set(&mut x, "noise", 0.2);
            }
            let spec = GridSpec::unit(100);
            let prior = BetaMixturePrior::new(0.4, BetaParams::new(0.6, 12.0).unwrap()).unwrap().discretize(&spec).unwrap();
            let referent = BetaParams::new(0.75, 20.0).unwrap().discretize(&spec).unwrap();
            let theta = threshold_prior_for(&spec).unwrap();
            let cfg = SpeakerConfig::with_variant(2.0, SpeakerVariant::Expectation).unwrap();
            let preds = m.item_predictions(&x).unwrap();
            let (a, b) = match model {
                ModelKind::Uncertain => {
                    // item a: the expectation over the referent of the point speaker
                    let point: Vec<f64> = prior
                        .support()
                        .iter()
                        .map(|p| endorse(*p, &prior, &theta, &cfg).unwrap())
                        .collect();
                    let a: f64 = referent.mass().iter().zip(&point).map(|(w, s)| w * s).sum();
                    (a, endorse(0.3, &prior, &theta, &cfg).unwrap())
                }
                ModelKind::Fixed => {
                    let params = FixedThresholdParams::new(0.35, 0.2).unwrap();
                    let point: Vec<f64> = prior
                        .support()
                        .iter()
                        .map(|p| endorse_fixed(*p, &prior, &params, &cfg).unwrap())
                        .collect();
                    let a: f64 = referent.mass().iter().zip(&point).map(|(w, s)| w * s).sum();
                    (a, endorse_fixed(0.3, &prior, &params, &cfg).unwrap())
                }
            };
            assert!((preds[0] - a).abs() < 1e-9, "{model:?} {} {a}", preds[0]);
            assert!((preds[1] - b).abs() < 1e-9, "{model:?} {} {b}", preds[1]);
        }
    }

    #[test]
    fn local_density_differences_match_full() {
        let data = synthetic_items();
        let m = JointModel::new(&data, ModelKind::Uncertain, 50).unwrap();
        let x0: Vec<f64> = m.params().iter().map(|p| if p.hi > 1.0 { 3.0 } else { 0.5 }).collect();
        for j in 0..x0.len() {
            let mut x1 = x0.clone();
            x1[j] = if m.params()[j].hi > 1.0 { 4.0 } else { 0.6 };
            let full = m.log_density(&x1) - m.log_density(&x0);
            let local = m.local_log_density(&x1, j) - m.local_log_density(&x0, j);
            assert!((full - local).abs() < 1e-8, "{}: {full} vs {local}", m.params()[j].name);
        }
    }

    #[test]
    fn unmapped_items_are_config_errors() {
        let mut data = synthetic_items();
        data.items[0].property = "g".into();
        assert!(matches!(JointModel::new(&data, ModelKind::Uncertain, 100), Err(Error::Config(_))));
        let mut data = synthetic_items();
        data.items[0].referent = ReferentSource::Elicited("nobody".into());
        assert!(matches!(JointModel::new(&data, ModelKind::Uncertain, 100), Err(Error::Config(_))));
    }

    #[test]
    fn no_items_means_no_speaker_parameters() {
        let mut data = synthetic_items();
        data.items.clear();
        let m = JointModel::new(&data, ModelKind::Fixed, 100).unwrap();
        assert!(m.params().iter().all(|p| p.name.starts_with("prior.") || p.name.starts_with("referent.")));
    }

    #[test]
    fn joint_without_items_equals_isolated_fit() {
        let responses = mixture_responses(0.6, 0.4, 20.0, 60, 7);
        let cfg = McmcConfig::new(3_000, 1_000, 2, 21).unwrap();
        let iso = fit_beta_mixture(&responses, &cfg).unwrap();
        let data = JointData {
            properties: vec![PropertyBlock { name: "f".into(), prior: PriorData::Mixture(responses) }],
            ..Default::default()
        };
        let (_, joint) = fit_joint(&data, ModelKind::Uncertain, 100, &cfg).unwrap();
        for (a, b) in iso.chains.iter().zip(&joint.chains) {
            assert_eq!(a.draws, b.draws);
        }
    }

    #[test]
    fn distortion_identity_and_mismatch() {
        let est: BTreeMap<String, f64> =
            [("prior.f.phi", 0.3), ("prior.f.gamma", 0.6), ("referent.k.f.gamma", 0.8)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let mut joint = est.clone();
        joint.insert("lambda".into(), 2.0);
        let r = distortion_check(&est, &joint).unwrap();
        assert_eq!(r.r2, 1.0);
        assert_eq!(r.max_abs_deviation, 0.0);
        let mut missing = joint.clone();
        missing.remove("prior.f.phi");
        assert!(distortion_check(&est, &missing).is_err());
        let mut extra = joint;
        extra.insert("prior.g.phi".into(), 0.1);
        assert!(distortion_check(&est, &extra).is_err());
    }

    #[test]
    fn habitual_block_likelihood() {
        let data = JointData {
            properties: vec![PropertyBlock {
                name: "runs".into(),
                prior: PriorData::Habitual { q1: vec![0.3, 0.4, 0.5], q2: vec![10.0, 20.0, 40.0] },
            }],
            referents: vec![],
            items: vec![EndorsementItem { id: "r".into(), property: "runs".into(), referent: ReferentSource::Given(12.0), n_agree: 5, n_total: 10 }],
        };
        let m = JointModel::new(&data, ModelKind::Uncertain, 100).unwrap();
        // q1_gamma, q1_xi, mu, sigma, lambda
        let x = [0.4, 20.0, 3.0, 0.7, 1.5];
        let q1 = BetaParams::new(0.4, 20.0).unwrap();
        let mut direct: f64 = [0.3f64, 0.4, 0.5].iter().map(|p| q1.ln_pdf(*p).unwrap()).sum();
        direct += [10.0f64, 20.0, 40.0].iter().map(|r| -(0.7f64).ln() - 0.5 * ((r.ln() - 3.0) / 0.7).powi(2)).sum::<f64>();
        let prior = RateMixturePrior::new(0.4, 3.0, 0.7).unwrap().discretize(&GridSpec::default_rate()).unwrap();
        let theta = threshold_prior_for(&GridSpec::default_rate()).unwrap();
        let s = endorse(12.0, &prior, &theta, &SpeakerConfig::new(1.5).unwrap()).unwrap();
        direct += 5.0 * s.ln() + 5.0 * (1.0 - s).ln();
        assert!((m.log_density(&x) - direct).abs() < 1e-9);
    }
}
