//! Synthetic data generators for every model.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{EndorsementItem, JointData, ModelKind, PriorData, PropertyBlock, ReferentBlock, ReferentSource};
use crate::numerics::{BetaMixturePrior, BetaParams, GridDistribution, GridSpec};
use crate::pragmatics::{endorse, endorse_fixed, FixedThresholdParams, SpeakerConfig};
use crate::priors::{ElicitationRow, ElicitationTable, CategorySource};
use crate::semantics::threshold_prior_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProperty {
    pub name: String,
    pub prior: BetaMixturePrior,
    /// Target category and its referent-prevalence Beta.
    pub category: String,
    pub referent: BetaParams,
}

/// Generating parameters for a synthetic joint dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticJointSpec {
    pub properties: Vec<SyntheticProperty>,
    pub prior_responses: usize,
    pub referent_responses: usize,
    pub endorsement_trials: u64,
    pub lambda: f64,
    pub model: ModelKind,
    pub fixed: Option<FixedThresholdParams>,
    pub bins: usize,
}

impl SyntheticJointSpec {
    /// Five properties spanning rare, common, bimodal and near-universal
    /// priors, each with one target category.
    pub fn five_items(lambda: f64) -> Result<Self> {
        let p = |name: &str, phi: f64, g: f64, xi: f64, category: &str, rg: f64, rxi: f64| -> Result<SyntheticProperty> {
            Ok(SyntheticProperty {
                name: name.into(),
                prior: BetaMixturePrior::new(phi, BetaParams::new(g, xi)?)?,
                category: category.into(),
                referent: BetaParams::new(rg, rxi)?,
            })
        };
        Ok(Self {
            properties: vec![
                p("f1", 0.3, 0.9, 20.0, "k1", 0.9, 30.0)?,
                p("f2", 0.3, 0.9, 20.0, "k2", 0.1, 30.0)?,
                p("f3", 0.1, 0.1, 20.0, "k3", 0.15, 30.0)?,
                p("f4", 0.5, 0.5, 30.0, "k4", 0.5, 30.0)?,
                p("f5", 0.9, 0.7, 10.0, "k5", 0.6, 30.0)?,
            ],
            prior_responses: 60,
            referent_responses: 40,
            endorsement_trials: 100,
            lambda,
            model: ModelKind::Uncertain,
            fixed: None,
            bins: 100,
        })
    }
}

/// True endorsement probability for a property given its prior and
/// referent distribution, averaging the point speaker over the referent.
pub fn true_endorsement(
    prior: &GridDistribution,
    referent: &GridDistribution,
    lambda: f64,
    model: ModelKind,
    fixed: Option<&FixedThresholdParams>,
    spec: &GridSpec,
) -> Result<f64> {
    let cfg = SpeakerConfig::new(lambda)?;
    let theta = threshold_prior_for(spec)?;
    let mut s = 0.0;
    for (p, w) in referent.support().iter().zip(referent.mass()) {
        if *w == 0.0 {
            continue;
        }
        let e = match model {
            ModelKind::Uncertain => endorse(*p, prior, &theta, &cfg)?,
            ModelKind::Fixed => {
                let params = fixed.ok_or_else(|| Error::Config("fixed model needs a threshold and noise".into()))?;
                endorse_fixed(*p, prior, params, &cfg)?
            }
        };
        s += w * e;
    }
    Ok(s)
}

pub fn prior_responses<R: Rng + ?Sized>(prior: &BetaMixturePrior, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| 100.0 * prior.sample(rng)).collect()
}

/// Draw prior, referent and endorsement data from the generating model.
pub fn simulate_joint<R: Rng + ?Sized>(spec: &SyntheticJointSpec, rng: &mut R) -> Result<JointData> {
    let grid = GridSpec::unit(spec.bins);
    let mut data = JointData::default();
    for prop in &spec.properties {
        data.properties.push(PropertyBlock {
            name: prop.name.clone(),
            prior: PriorData::Mixture(prior_responses(&prop.prior, spec.prior_responses, rng)),
        });
        data.referents.push(ReferentBlock {
            category: prop.category.clone(),
            property: prop.name.clone(),
            responses_pct: (0..spec.referent_responses).map(|_| 100.0 * prop.referent.sample(rng)).collect(),
        });
        let s = true_endorsement(
            &prop.prior.discretize(&grid)?,
            &prop.referent.discretize(&grid)?,
            spec.lambda,
            spec.model,
            spec.fixed.as_ref(),
            &grid,
        )?;
        let k = Binomial::new(spec.endorsement_trials, s.clamp(0.0, 1.0))
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(rng);
        data.items.push(EndorsementItem {
            id: format!("{}:{}", prop.category, prop.name),
            property: prop.name.clone(),
            referent: ReferentSource::Elicited(prop.category.clone()),
            n_agree: k,
            n_total: spec.endorsement_trials,
        });
    }
    Ok(data)
}

/// Synthetic elicitation table for one property: `n` participants each
/// rating `categories` categories drawn from the prior.
pub fn simulate_elicitation<R: Rng + ?Sized>(
    property: &str,
    prior: &BetaMixturePrior,
    participants: usize,
    categories: usize,
    rng: &mut R,
) -> ElicitationTable {
    let mut rows = Vec::with_capacity(participants * categories);
    let prevalences: Vec<f64> = (0..categories).map(|_| prior.sample(rng)).collect();
    for pid in 0..participants {
        for (k, p) in prevalences.iter().enumerate() {
            // participants report the category prevalence with Beta noise
            let noisy = BetaParams::new(p.clamp(0.005, 0.995), 50.0).map_or(*p, |b| b.sample(rng));
            rows.push(ElicitationRow {
                participant_id: format!("p{pid}"),
                property: property.to_string(),
                category: format!("k{k}"),
                category_source: CategorySource::Supplied,
                response_pct: (100.0 * noisy).clamp(0.0, 100.0),
            });
        }
    }
    ElicitationTable { rows }
}

/// A synthetic endorsement item for model comparison: a heterogeneous prior
/// and a point referent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonItem {
    pub prior: BetaMixturePrior,
    pub referent: f64,
}

/// Priors spanning rare, bimodal, common and near-universal properties,
/// each crossed with several referent prevalences.
pub fn heterogeneous_items() -> Result<Vec<ComparisonItem>> {
    let shapes = [
        (0.3, 0.9, 20.0),
        (0.1, 0.1, 20.0),
        (0.5, 0.5, 50.0),
        (1.0, 0.5, 10.0),
        (0.8, 0.3, 5.0),
        (1.0, 0.9, 40.0),
        (0.2, 0.6, 8.0),
    ];
    let referents = [0.05, 0.2, 0.45, 0.7, 0.95];
    let mut out = Vec::new();
    for (phi, g, xi) in shapes {
        let prior = BetaMixturePrior::new(phi, BetaParams::new(g, xi)?)?;
        for r in referents {
            out.push(ComparisonItem { prior, referent: r });
        }
    }
    Ok(out)
}

/// Endorsement proportions generated by the uncertain model, with
/// Binomial sampling noise from `trials` responses per item.
pub fn simulate_endorsements<R: Rng + ?Sized>(
    items: &[ComparisonItem],
    lambda: f64,
    trials: u64,
    spec: &GridSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let theta = threshold_prior_for(spec)?;
    let cfg = SpeakerConfig::new(lambda)?;
    items
        .iter()
        .map(|it| {
            let s = endorse(it.referent, &it.prior.discretize(spec)?, &theta, &cfg)?;
            let k = Binomial::new(trials, s).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
            Ok(k as f64 / trials as f64)
        })
        .collect()
}
