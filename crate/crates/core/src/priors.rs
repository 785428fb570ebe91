//! Property-level prevalence priors built from elicitation data.
//!
//! Covers the generic and causal elicitation tables (fit downstream as Beta
//! mixtures), the two-question habitual elicitation that yields a rate
//! mixture, and category worlds from which prevalence priors and cue
//! validities are both derived.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};
use crate::numerics::{point_mass, BetaParams, GridDistribution, GridSpec, RateMixturePrior, Scale, DEFAULT_FLOOR_RATE};

/// Percent responses are clamped into this range before Beta likelihoods.
pub const PERCENT_FLOOR: f64 = 1.0;
pub const PERCENT_CEIL: f64 = 99.0;

/// Smallest log-rate sd returned by the closed-form fit.
pub const SIGMA_FLOOR: f64 = 0.05;

/// Map a percent response onto (0,1), clamping 0 to 1% and 100 to 99%.
pub fn clamp_percent(pct: f64) -> f64 {
    pct.clamp(PERCENT_FLOOR, PERCENT_CEIL) / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CategorySource {
    #[default]
    Supplied,
    FreeProduced,
}

impl FromStr for CategorySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "supplied" | "" => Ok(CategorySource::Supplied),
            "free-produced" | "free" | "freeproduced" => Ok(CategorySource::FreeProduced),
            other => Err(Error::Input(format!("unknown category source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationRow {
    pub participant_id: String,
    pub property: String,
    pub category: String,
    pub category_source: CategorySource,
    pub response_pct: f64,
}

#[derive(Debug, Deserialize)]
struct RawElicitationRow {
    participant_id: String,
    property: String,
    category: String,
    #[serde(default)]
    category_source: String,
    response_pct: f64,
}

/// Prevalence elicitation responses: one percent judgment per
/// (participant, property, category).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElicitationTable {
    pub rows: Vec<ElicitationRow>,
}

impl ElicitationTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<RawElicitationRow>().enumerate() {
            let raw = rec.map_err(csv_error)?;
            let line = i as u64 + 2;
            if raw.property.is_empty() {
                return Err(Error::Parse { line, message: "empty property".into() });
            }
            if raw.category.is_empty() {
                return Err(Error::Parse { line, message: "empty category".into() });
            }
            if !(0.0..=100.0).contains(&raw.response_pct) {
                return Err(Error::Parse {
                    line,
                    message: format!("response {} outside [0,100]", raw.response_pct),
                });
            }
            let category_source = raw
                .category_source
                .parse()
                .map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
            rows.push(ElicitationRow {
                participant_id: raw.participant_id,
                property: raw.property,
                category: raw.category,
                category_source,
                response_pct: raw.response_pct,
            });
        }
        Ok(Self { rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["participant_id", "property", "category", "category_source", "response_pct"])
            .map_err(csv_error)?;
        for r in &self.rows {
            let source = match r.category_source {
                CategorySource::Supplied => "supplied",
                CategorySource::FreeProduced => "free-produced",
            };
            w.write_record([
                r.participant_id.as_str(),
                r.property.as_str(),
                r.category.as_str(),
                source,
                &r.response_pct.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Distinct properties in first-appearance order.
    pub fn properties(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.property) {
                seen.push(r.property.clone());
            }
        }
        seen
    }

    /// Every response for a property, across categories (the prior data).
    pub fn responses_for_property(&self, property: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.property == property).map(|r| r.response_pct).collect()
    }

    /// Responses for one (category, property) pair (the referent data).
    pub fn referent_responses(&self, category: &str, property: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.property == property && r.category == category)
            .map(|r| r.response_pct)
            .collect()
    }
}

/// Reporting periods for the habitual frequency question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interval {
    Week,
    TwoWeeks,
    Month,
    TwoMonths,
    SixMonths,
    Year,
    TwoYears,
    FiveYears,
}

impl Interval {
    /// Events/year per event in the interval, as an exact ratio
    /// `numerator / denominator`.
    fn per_year(&self) -> (f64, f64) {
        match self {
            Interval::Week => (52.18, 1.0),
            Interval::TwoWeeks => (52.18, 2.0),
            Interval::Month => (12.0, 1.0),
            Interval::TwoMonths => (12.0, 2.0),
            Interval::SixMonths => (2.0, 1.0),
            Interval::Year => (1.0, 1.0),
            Interval::TwoYears => (1.0, 2.0),
            Interval::FiveYears => (1.0, 5.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Interval::Week => "week",
            Interval::TwoWeeks => "2 weeks",
            Interval::Month => "month",
            Interval::TwoMonths => "2 months",
            Interval::SixMonths => "6 months",
            Interval::Year => "year",
            Interval::TwoYears => "2 years",
            Interval::FiveYears => "5 years",
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let key = key.strip_suffix('s').unwrap_or(&key);
        Ok(match key {
            "week" | "1week" => Interval::Week,
            "2week" => Interval::TwoWeeks,
            "month" | "1month" => Interval::Month,
            "2month" => Interval::TwoMonths,
            "6month" => Interval::SixMonths,
            "year" | "1year" => Interval::Year,
            "2year" => Interval::TwoYears,
            "5year" => Interval::FiveYears,
            _ => return Err(Error::Input(format!("unknown interval '{s}'"))),
        })
    }
}

/// Convert "`times` times in `interval`" to events/year.
pub fn rate_from_frequency(times: f64, interval: Interval) -> Result<f64> {
    if !(times >= 0.0 && times.is_finite()) {
        return Err(Error::Input(format!("frequency count must be >= 0, got {times}")));
    }
    let (num, den) = interval.per_year();
    Ok(times * num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HabitualQ1Row {
    pub participant_id: String,
    pub action: String,
    pub gender: String,
    pub numerator: f64,
    pub denominator: f64,
}

impl HabitualQ1Row {
    pub fn proportion(&self) -> f64 {
        self.numerator / self.denominator
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HabitualQ2Row {
    pub participant_id: String,
    pub action: String,
    pub gender: String,
    pub times: f64,
    pub interval: Interval,
}

impl HabitualQ2Row {
    pub fn rate(&self) -> f64 {
        // validated on ingestion
        rate_from_frequency(self.times, self.interval).unwrap_or(0.0)
    }
}

#[derive(Debug, Deserialize)]
struct RawQ2Row {
    participant_id: String,
    action: String,
    gender: String,
    times: f64,
    interval: String,
}

const DENOMINATORS: [f64; 5] = [1e3, 1e4, 1e5, 1e6, 1e7];

/// Two-question habitual elicitation: how many people have ever done the
/// action (Q1) and how often those who have do it (Q2).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HabitualElicitationTable {
    pub q1: Vec<HabitualQ1Row>,
    pub q2: Vec<HabitualQ2Row>,
}

impl HabitualElicitationTable {
    pub fn from_readers<R1: Read, R2: Read>(q1: R1, q2: R2) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(q1);
        let mut q1_rows = Vec::new();
        for (i, rec) in rdr.deserialize::<HabitualQ1Row>().enumerate() {
            let row = rec.map_err(csv_error)?;
            let line = i as u64 + 2;
            if row.action.is_empty() {
                return Err(Error::Parse { line, message: "empty action".into() });
            }
            if !DENOMINATORS.contains(&row.denominator) {
                return Err(Error::Parse {
                    line,
                    message: format!("denominator {} not one of 1e3..1e7", row.denominator),
                });
            }
            if !(row.numerator >= 0.0 && row.numerator <= row.denominator) {
                return Err(Error::Parse {
                    line,
                    message: format!("numerator {} outside [0, {}]", row.numerator, row.denominator),
                });
            }
            q1_rows.push(row);
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(q2);
        let mut q2_rows = Vec::new();
        for (i, rec) in rdr.deserialize::<RawQ2Row>().enumerate() {
            let raw = rec.map_err(csv_error)?;
            let line = i as u64 + 2;
            if raw.action.is_empty() {
                return Err(Error::Parse { line, message: "empty action".into() });
            }
            if !(raw.times >= 0.0) {
                return Err(Error::Parse { line, message: format!("negative count {}", raw.times) });
            }
            let interval = raw
                .interval
                .parse()
                .map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
            q2_rows.push(HabitualQ2Row {
                participant_id: raw.participant_id,
                action: raw.action,
                gender: raw.gender,
                times: raw.times,
                interval,
            });
        }
        Ok(Self { q1: q1_rows, q2: q2_rows })
    }

    pub fn from_paths(q1: &Path, q2: &Path) -> Result<Self> {
        Self::from_readers(std::fs::File::open(q1)?, std::fs::File::open(q2)?)
    }

    pub fn actions(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for a in self.q1.iter().map(|r| &r.action).chain(self.q2.iter().map(|r| &r.action)) {
            if !seen.contains(a) {
                seen.push(a.clone());
            }
        }
        seen
    }

    pub fn genders(&self, action: &str) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for g in self
            .q1
            .iter()
            .filter(|r| r.action == action)
            .map(|r| &r.gender)
            .chain(self.q2.iter().filter(|r| r.action == action).map(|r| &r.gender))
        {
            if !seen.contains(g) {
                seen.push(g.clone());
            }
        }
        seen
    }

    pub fn q1_proportions(&self, action: &str, gender: &str) -> Vec<f64> {
        self.q1
            .iter()
            .filter(|r| r.action == action && r.gender == gender)
            .map(HabitualQ1Row::proportion)
            .collect()
    }

    pub fn q2_rates(&self, action: &str, gender: &str) -> Vec<f64> {
        self.q2
            .iter()
            .filter(|r| r.action == action && r.gender == gender)
            .map(HabitualQ2Row::rate)
            .collect()
    }
}

/// Proportions are kept strictly inside (0,1) for Beta likelihoods.
pub(crate) const PROPORTION_EPS: f64 = 1e-7;

pub fn clamp_proportion(p: f64) -> f64 {
    p.clamp(PROPORTION_EPS, 1.0 - PROPORTION_EPS)
}

/// Method-of-moments Beta fit to proportions. The concentration is capped
/// at `1e4` when the sample has (near) zero variance.
pub fn fit_proportion_beta(proportions: &[f64]) -> Result<BetaParams> {
    if proportions.is_empty() {
        return Err(Error::Input("no proportions to fit".into()));
    }
    if proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Input("proportions must lie in [0,1]".into()));
    }
    let xs: Vec<f64> = proportions.iter().map(|p| clamp_proportion(*p)).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let max_xi = 1e4;
    let xi = if var > 0.0 { (mean * (1.0 - mean) / var - 1.0).clamp(1e-3, max_xi) } else { max_xi };
    BetaParams::new(mean, xi)
}

/// Gaussian fit to log rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
}

/// Maximum-likelihood Gaussian on log rates. Rates below the floor rate are
/// raised to it before taking logs; sigma is floored at [`SIGMA_FLOOR`].
pub fn fit_log_rates(rates: &[f64]) -> Result<LogNormalFit> {
    if rates.len() < 2 {
        return Err(Error::Input(format!("need at least 2 rates to fit a log-normal, got {}", rates.len())));
    }
    if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::Input("rates must be finite and >= 0".into()));
    }
    let logs: Vec<f64> = rates.iter().map(|r| r.max(DEFAULT_FLOOR_RATE).ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LogNormalFit { mu, sigma: sigma.max(SIGMA_FLOOR) })
}

/// Rate prior from the two habitual questions: the mixture weight is the
/// mean of the Q1 Beta and the log-rate Gaussian comes from Q2.
pub fn habitual_prior(q1: &BetaParams, q2: &LogNormalFit) -> Result<RateMixturePrior> {
    RateMixturePrior::new(q1.mean(), q2.mu, q2.sigma)
}

/// Closed-form habitual prior for one action, combining genders as an
/// equal-weight mixture on the rate grid.
pub fn habitual_prior_for_action(
    table: &HabitualElicitationTable,
    action: &str,
    spec: &GridSpec,
) -> Result<(Vec<(String, RateMixturePrior)>, GridDistribution)> {
    let genders = table.genders(action);
    if genders.is_empty() {
        return Err(Error::Input(format!("no responses for action '{action}'")));
    }
    let mut parts = Vec::new();
    let mut grids = Vec::new();
    for g in genders {
        let q1 = fit_proportion_beta(&table.q1_proportions(action, &g))?;
        let q2 = fit_log_rates(&table.q2_rates(action, &g))?;
        let prior = habitual_prior(&q1, &q2)?;
        grids.push(prior.discretize(spec)?);
        parts.push((g, prior));
    }
    Ok((parts, GridDistribution::equal_mixture(&grids)?))
}

/// Categories with prior probabilities and per-feature prevalences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryWorld {
    pub categories: Vec<String>,
    pub prior_probs: Vec<f64>,
    pub features: Vec<String>,
    /// `prevalence[k][f]` = P(feature f | category k).
    pub prevalence: Vec<Vec<f64>>,
}

impl CategoryWorld {
    pub fn new(
        categories: Vec<String>,
        prior_probs: Vec<f64>,
        features: Vec<String>,
        prevalence: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if categories.is_empty() || categories.len() != prior_probs.len() || categories.len() != prevalence.len() {
            return Err(Error::Input("category world tables have mismatched lengths".into()));
        }
        if prior_probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Input("category probabilities must be >= 0".into()));
        }
        let total: f64 = prior_probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Input(format!("category probabilities sum to {total}, not 1")));
        }
        for row in &prevalence {
            if row.len() != features.len() {
                return Err(Error::Input("prevalence row length does not match features".into()));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Input("prevalences must lie in [0,1]".into()));
            }
        }
        Ok(Self { categories, prior_probs, features, prevalence })
    }

    /// CSV with header `category,prior_prob,<feature>...`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        if header.len() < 3 || &header[0] != "category" || &header[1] != "prior_prob" {
            return Err(Error::Parse {
                line: 1,
                message: "header must be category,prior_prob,<feature>...".into(),
            });
        }
        let features: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut categories = Vec::new();
        let mut prior_probs = Vec::new();
        let mut prevalence = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let line = i as u64 + 2;
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse { line, message: format!("'{s}' is not a number") })
            };
            categories.push(rec[0].to_string());
            prior_probs.push(num(&rec[1])?);
            prevalence.push(rec.iter().skip(2).map(num).collect::<Result<Vec<_>>>()?);
        }
        Self::new(categories, prior_probs, features, prevalence)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn feature_index(&self, feature: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f == feature)
            .ok_or_else(|| Error::Input(format!("unknown feature '{feature}'")))
    }

    pub fn category_index(&self, category: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == category)
            .ok_or_else(|| Error::Input(format!("unknown category '{category}'")))
    }

    /// Marginal prevalence `Z = sum_k P(f|k) P(k)`.
    pub fn normalizer(&self, feature: &str) -> Result<f64> {
        let f = self.feature_index(feature)?;
        Ok(self.prevalence.iter().zip(&self.prior_probs).map(|(row, pk)| row[f] * pk).sum())
    }
}

/// P(category | feature) by Bayes' rule over the world's categories.
pub fn cue_validity(world: &CategoryWorld, feature: &str, category: &str) -> Result<f64> {
    let f = world.feature_index(feature)?;
    let k = world.category_index(category)?;
    let z = world.normalizer(feature)?;
    if !(z > 0.0) {
        return Err(Error::Numerical(format!("undefined cue validity: '{feature}' is absent from every category")));
    }
    Ok(world.prevalence[k][f] * world.prior_probs[k] / z)
}

/// Prevalence prior induced by a world: each category contributes its
/// prior probability at the grid point nearest its prevalence.
pub fn prevalence_prior_from_world(world: &CategoryWorld, feature: &str, spec: &GridSpec) -> Result<GridDistribution> {
    let f = world.feature_index(feature)?;
    let support = spec.points();
    let mut weights = vec![0.0; support.len()];
    for (row, pk) in world.prevalence.iter().zip(&world.prior_probs) {
        let pm = point_mass(row[f], spec)?;
        let idx = pm.mass().iter().position(|m| *m == 1.0).unwrap_or(0);
        weights[idx] += pk;
    }
    GridDistribution::from_weights(Scale::Unit, support, weights)
}

/// Cue validity of every (feature, category) pair with the normalizer for
/// each feature; `None` where the feature is absent from every category.
pub fn cue_validity_table(world: &CategoryWorld) -> Vec<(String, String, Option<f64>, f64)> {
    let mut out = Vec::new();
    for feature in &world.features {
        let z = world.normalizer(feature).unwrap_or(0.0);
        for category in &world.categories {
            let cv = cue_validity(world, feature, category).ok();
            out.push((feature.clone(), category.clone(), cv, z));
        }
    }
    out
}

/// Convert causal slider responses (successes out of 100) into percent
/// responses for the same mixture fit used for generic priors.
pub fn causal_prior_from_sliders(successes: &[f64]) -> Result<Vec<f64>> {
    if successes.is_empty() {
        return Err(Error::Input("no slider responses".into()));
    }
    successes
        .iter()
        .map(|s| {
            if (0.0..=100.0).contains(s) {
                Ok(*s)
            } else {
                Err(Error::Input(format!("slider response {s} outside [0,100]")))
            }
        })
        .collect()
}

/// Group percent responses by property.
pub fn responses_by_property(table: &ElicitationTable) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        out.entry(r.property.clone()).or_default().push(r.response_pct);
    }
    out
}
