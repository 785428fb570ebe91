//! Utterances, their truth conditions and the threshold prior.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{GridDistribution, GridKind, GridSpec, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Utterance {
    /// Bare generalization, true when `p > theta` for an uncertain `theta`.
    Generalization,
    /// The null alternative; always true.
    Silence,
    /// Quantifier with a known threshold ("some" = 0, "most" = 0.5).
    FixedQuantifier(f64),
    /// Two generalizations joined by "and", each with its own threshold.
    Conjunction,
}

impl Utterance {
    pub fn some() -> Self {
        Utterance::FixedQuantifier(0.0)
    }

    pub fn most() -> Self {
        Utterance::FixedQuantifier(0.5)
    }

    pub fn quantifier(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Input(format!("quantifier threshold must lie in [0,1], got {theta}")));
        }
        Ok(Utterance::FixedQuantifier(theta))
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utterance::Generalization => write!(f, "gen"),
            Utterance::Silence => write!(f, "silence"),
            Utterance::FixedQuantifier(t) if *t == 0.0 => write!(f, "some"),
            Utterance::FixedQuantifier(t) if *t == 0.5 => write!(f, "most"),
            Utterance::FixedQuantifier(t) => write!(f, "quant:{t}"),
            Utterance::Conjunction => write!(f, "gen+gen"),
        }
    }
}

impl FromStr for Utterance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gen" | "generic" | "generalization" => Ok(Utterance::Generalization),
            "silence" | "null" => Ok(Utterance::Silence),
            "some" => Ok(Utterance::some()),
            "most" => Ok(Utterance::most()),
            "gen+gen" | "conjunction" => Ok(Utterance::Conjunction),
            other => match other.strip_prefix("quant:") {
                Some(t) => {
                    let theta: f64 = t
                        .parse()
                        .map_err(|_| Error::Input(format!("bad quantifier threshold '{t}'")))?;
                    Utterance::quantifier(theta)
                }
                None => Err(Error::Input(format!("unknown utterance '{s}'"))),
            },
        }
    }
}

/// Truth value of `u` at prevalence `p` and threshold `theta`.
///
/// `theta` is ignored for silence and fixed quantifiers. A conjunction is
/// evaluated one conjunct at a time; see [`conjunction_meaning`].
pub fn literal_meaning(u: &Utterance, p: f64, theta: f64) -> bool {
    match u {
        Utterance::Generalization | Utterance::Conjunction => p > theta,
        Utterance::Silence => true,
        Utterance::FixedQuantifier(t) => p > *t,
    }
}

pub fn conjunction_meaning(p_a: f64, p_b: f64, theta_a: f64, theta_b: f64) -> bool {
    p_a > theta_a && p_b > theta_b
}

/// Uniform prior over generalization thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPrior {
    scale: Scale,
    support: Vec<f64>,
    mass: Vec<f64>,
    /// `cumulative[j]` = total mass of `support[..j]`.
    cumulative: Vec<f64>,
}

impl ThresholdPrior {
    fn uniform_over(scale: Scale, support: Vec<f64>) -> Self {
        let n = support.len();
        let mass = vec![1.0 / n as f64; n];
        let cumulative = (0..=n).map(|j| j as f64 / n as f64).collect();
        Self { scale, support, mass, cumulative }
    }

    /// Thresholds for an arbitrary support: zero followed by the midpoints
    /// between neighbouring unit-scale points, or zero followed by every rate
    /// point but the highest.
    pub fn for_distribution(d: &GridDistribution) -> Self {
        let s = d.support();
        let mut support = Vec::with_capacity(s.len());
        support.push(0.0);
        match d.scale() {
            Scale::Unit => support.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1]))),
            Scale::Rate => support.extend(s[..s.len() - 1].iter().copied().filter(|v| *v > 0.0)),
        }
        support.dedup();
        Self::uniform_over(d.scale(), support)
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

    /// P(theta < p).
    pub fn prob_below(&self, p: f64) -> f64 {
        let j = self.support.partition_point(|t| *t < p);
        self.cumulative[j]
    }
}

/// The uniform threshold prior for a grid: bin lower edges `{0, 1/K, ...,
/// (K-1)/K}` on unit grids; zero plus every grid point except the highest on
/// rate grids.
pub fn threshold_prior_for(grid: &GridSpec) -> Result<ThresholdPrior> {
    grid.validate()?;
    let k = grid.bins;
    let support = match grid.kind {
        GridKind::UnitInterval => (0..k).map(|i| i as f64 / k as f64).collect(),
        GridKind::LogRate { .. } => {
            let pts = grid.points();
            std::iter::once(0.0).chain(pts[..k - 1].iter().copied()).collect()
        }
    };
    Ok(ThresholdPrior::uniform_over(grid.scale(), support))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_meaning_examples() {
        assert!(literal_meaning(&Utterance::Generalization, 0.7, 0.5));
        assert!(literal_meaning(&Utterance::Silence, 0.0, 0.99));
        assert!(!literal_meaning(&Utterance::most(), 0.5, 0.1));
        assert!(literal_meaning(&Utterance::some(), 0.01, 0.9));
        assert!(!literal_meaning(&Utterance::some(), 0.0, 0.0));
    }

    #[test]
    fn threshold_prior_examples() {
        let t = threshold_prior_for(&GridSpec::unit(4)).unwrap();
        assert_eq!(t.support(), &[0.0, 0.25, 0.5, 0.75]);
        assert!(t.mass().iter().all(|m| *m == 0.25));

        for spec in [GridSpec::unit(37), GridSpec::default_rate()] {
            let t = threshold_prior_for(&spec).unwrap();
            assert_eq!(t.support()[0], 0.0);
            assert_eq!(t.support().len(), spec.bins);
        }

        let t = threshold_prior_for(&GridSpec::unit(100)).unwrap();
        assert!((t.prob_below(0.505) - 0.51).abs() < 1e-12);
    }

    #[test]
    fn rate_thresholds_shift_grid_down() {
        let spec = GridSpec::default_rate();
        let pts = spec.points();
        let t = threshold_prior_for(&spec).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert!((t.prob_below(*p) - (i + 1) as f64 / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_thresholds_match_exact_edges() {
        let spec = GridSpec::unit(100);
        let d = GridDistribution::uniform(&spec).unwrap();
        let exact = threshold_prior_for(&spec).unwrap();
        let derived = ThresholdPrior::for_distribution(&d);
        for p in d.support() {
            assert_eq!(exact.prob_below(*p), derived.prob_below(*p));
        }
    }

    #[test]
    fn exhaustive_grid_properties() {
        let spec = GridSpec::unit(100);
        let t = threshold_prior_for(&spec).unwrap();
        let pts = spec.points();
        for &theta in t.support() {
            for (i, &p) in pts.iter().enumerate() {
                assert!(literal_meaning(&Utterance::Silence, p, theta));
                if literal_meaning(&Utterance::Generalization, p, theta) {
                    assert!(pts[i..].iter().all(|&q| literal_meaning(&Utterance::Generalization, q, theta)));
                }
                assert_ne!(p, theta);
            }
        }
        for &p in &pts {
            assert!(t.support().iter().any(|&theta| p > theta));
        }
    }

    #[test]
    fn utterance_round_trip() {
        for s in ["gen", "silence", "some", "most", "gen+gen", "quant:0.3"] {
            let u: Utterance = s.parse().unwrap();
            assert_eq!(u.to_string(), s);
        }
        assert!("quant:1.5".parse::<Utterance>().is_err());
        assert!("sometimes".parse::<Utterance>().is_err());
    }
}
