//! Named schematic priors and referents for the worked examples, the
//! conjunction demo, and the causal and habitual fixture checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BetaMixturePrior, BetaParams, GridDistribution, GridSpec, RateMixturePrior};
use crate::pragmatics::JointPrevalencePrior;

/// Speaker rationality used for the worked examples.
pub const WORKED_EXAMPLE_LAMBDA: f64 = 2.0;

/// A hand-set prevalence prior: `phi` weight on Beta(`gamma`, `xi`), the
/// rest on the transient component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceFixture {
    pub name: &'static str,
    pub phi: f64,
    pub gamma: f64,
    pub xi: f64,
}

impl PrevalenceFixture {
    pub fn prior(&self) -> Result<BetaMixturePrior> {
        BetaMixturePrior::new(self.phi, BetaParams::new(self.gamma, self.xi)?)
    }

    pub fn grid(&self, spec: &GridSpec) -> Result<GridDistribution> {
        self.prior()?.discretize(spec)
    }
}

pub const PREVALENCE_FIXTURES: [PrevalenceFixture; 7] = [
    PrevalenceFixture { name: "has wings", phi: 0.3, gamma: 0.95, xi: 30.0 },
    PrevalenceFixture { name: "has spots", phi: 0.3, gamma: 0.9, xi: 20.0 },
    PrevalenceFixture { name: "carries malaria", phi: 0.1, gamma: 0.05, xi: 20.0 },
    PrevalenceFixture { name: "lays eggs", phi: 0.5, gamma: 0.5, xi: 50.0 },
    PrevalenceFixture { name: "is female", phi: 1.0, gamma: 0.5, xi: 100.0 },
    PrevalenceFixture { name: "doesn't eat people", phi: 1.0, gamma: 0.985, xi: 100.0 },
    PrevalenceFixture { name: "is full-grown", phi: 1.0, gamma: 0.9, xi: 30.0 },
];

/// One row of the worked-example table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub row: usize,
    pub sentence: &'static str,
    pub prior: &'static str,
    pub referent: f64,
    /// Whether the sentence is intuitively true.
    pub intuitive: Option<bool>,
}

pub const WORKED_EXAMPLES: [WorkedExample; 6] = [
    WorkedExample { row: 1, sentence: "Dogs bark", prior: "has wings", referent: 0.95, intuitive: Some(true) },
    WorkedExample { row: 2, sentence: "Kangaroos have spots", prior: "has spots", referent: 0.05, intuitive: Some(false) },
    WorkedExample { row: 3, sentence: "Robins lay eggs", prior: "lays eggs", referent: 0.5, intuitive: Some(true) },
    WorkedExample { row: 4, sentence: "Robins are female", prior: "is female", referent: 0.5, intuitive: None },
    WorkedExample { row: 5, sentence: "Mosquitos carry malaria", prior: "carries malaria", referent: 0.05, intuitive: Some(true) },
    WorkedExample { row: 6, sentence: "Sharks don't eat people", prior: "doesn't eat people", referent: 0.95, intuitive: Some(false) },
];

/// Causal-power prior conditions: a single mode (common) or a mode plus
/// many causes that rarely work (rare), with strong or weak efficacy.
pub const CAUSAL_FIXTURES: [PrevalenceFixture; 4] = [
    PrevalenceFixture { name: "common strong", phi: 1.0, gamma: 0.98, xi: 50.0 },
    PrevalenceFixture { name: "common weak", phi: 1.0, gamma: 0.2, xi: 30.0 },
    PrevalenceFixture { name: "rare strong", phi: 0.5, gamma: 0.98, xi: 50.0 },
    PrevalenceFixture { name: "rare weak", phi: 0.5, gamma: 0.2, xi: 30.0 },
];

/// Hand-set habitual rate prior: share of people who ever do the action and
/// the log-rate distribution among those who do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HabitualFixture {
    pub name: &'static str,
    pub phi: f64,
    /// Median rate among doers, events/year.
    pub median_rate: f64,
    pub sigma: f64,
}

impl HabitualFixture {
    pub fn prior(&self) -> Result<RateMixturePrior> {
        RateMixturePrior::new(self.phi, self.median_rate.ln(), self.sigma)
    }

    pub fn grid(&self, spec: &GridSpec) -> Result<GridDistribution> {
        self.prior()?.discretize(spec)
    }
}

pub const HABITUAL_FIXTURES: [HabitualFixture; 4] = [
    HabitualFixture { name: "climbs mountains", phi: 0.1, median_rate: 1.0, sigma: 1.0 },
    HabitualFixture { name: "hikes", phi: 0.6, median_rate: 6.0, sigma: 1.0 },
    HabitualFixture { name: "runs", phi: 0.7, median_rate: 50.0, sigma: 1.0 },
    HabitualFixture { name: "handles the mail from Antarctica", phi: 0.01, median_rate: 2.0, sigma: 1.0 },
];

/// Lookup over all fixtures by name.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureLibrary;

impl FixtureLibrary {
    pub fn prevalence(&self, name: &str) -> Result<PrevalenceFixture> {
        PREVALENCE_FIXTURES
            .iter()
            .chain(CAUSAL_FIXTURES.iter())
            .find(|f| f.name.eq_ignore_ascii_case(name.trim()))
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown prevalence fixture '{name}'")))
    }

    pub fn habitual(&self, name: &str) -> Result<HabitualFixture> {
        HABITUAL_FIXTURES
            .iter()
            .find(|f| f.name.eq_ignore_ascii_case(name.trim()))
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown habitual fixture '{name}'")))
    }

    /// Grid prior for any fixture name; habitual fixtures use `rate_spec`.
    pub fn grid(&self, name: &str, unit_spec: &GridSpec, rate_spec: &GridSpec) -> Result<GridDistribution> {
        match self.prevalence(name) {
            Ok(f) => f.grid(unit_spec),
            Err(_) => self.habitual(name)?.grid(rate_spec),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        PREVALENCE_FIXTURES
            .iter()
            .chain(CAUSAL_FIXTURES.iter())
            .map(|f| f.name)
            .chain(HABITUAL_FIXTURES.iter().map(|f| f.name))
            .collect()
    }

    pub fn worked_examples(&self) -> &'static [WorkedExample] {
        &WORKED_EXAMPLES
    }

    /// Two unimodal prevalence priors ("lives in Africa", "lives in Asia")
    /// combined under the constraint that no individual has both features.
    pub fn conjunction_prior(&self, spec: &GridSpec) -> Result<JointPrevalencePrior> {
        let a = BetaParams::new(0.45, 6.0)?;
        let b = BetaParams::new(0.45, 6.0)?;
        JointPrevalencePrior::restricted_product(|x| a.pdf(x).unwrap_or(0.0), |x| b.pdf(x).unwrap_or(0.0), spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pragmatics::{endorse, interpret_conjunction, ConjunctionStage, SpeakerConfig};
    use crate::semantics::threshold_prior_for;

    #[test]
    fn every_fixture_is_a_valid_grid() {
        let lib = FixtureLibrary;
        let unit = GridSpec::unit(100);
        let rate = GridSpec::default_rate();
        for name in lib.names() {
            let d = lib.grid(name, &unit, &rate).unwrap();
            assert!((d.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9, "{name}");
        }
        assert!(lib.prevalence("no such thing").is_err());
    }

    #[test]
    fn referents_follow_the_table() {
        let referents: Vec<f64> = WORKED_EXAMPLES.iter().map(|w| w.referent).collect();
        assert_eq!(referents, vec![0.95, 0.05, 0.5, 0.5, 0.05, 0.95]);
    }

    #[test]
    fn worked_example_orderings() {
        let lib = FixtureLibrary;
        let spec = GridSpec::unit(100);
        let theta = threshold_prior_for(&spec).unwrap();
        let cfg = SpeakerConfig::new(WORKED_EXAMPLE_LAMBDA).unwrap();
        let s: Vec<f64> = WORKED_EXAMPLES
            .iter()
            .map(|w| endorse(w.referent, &lib.prevalence(w.prior).unwrap().grid(&spec).unwrap(), &theta, &cfg).unwrap())
            .collect();
        assert!(s[0] > 0.7 && s[2] > 0.7 && s[4] > 0.7, "{s:?}");
        assert!(s[1] < 0.3, "{s:?}");
        assert!((0.4..=0.6).contains(&s[3]), "{s:?}");
        assert!((0.25..=0.5).contains(&s[5]), "{s:?}");
    }

    #[test]
    fn conjunction_fixture_is_non_monotone() {
        let spec = GridSpec::unit(50);
        let prior = FixtureLibrary.conjunction_prior(&spec).unwrap();
        let partial = interpret_conjunction(&prior, ConjunctionStage::Partial).unwrap();
        let full = interpret_conjunction(&prior, ConjunctionStage::Full).unwrap();
        assert!(partial.mean_a() > prior.mean_a());
        assert!(partial.mean_a() > full.mean_a());
    }
}
