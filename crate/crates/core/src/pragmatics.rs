//! Literal listener and endorsing speaker.
//!
//! The listener conditions a prevalence prior on the truth of an utterance,
//! integrating over an uncertain threshold. The speaker chooses between the
//! generalization and silence with a power (soft-max) rule over the
//! listener's posterior probability of the referent prevalence.
//!
//! For a grid point `p_i` the ratio of the generalization listener to the
//! silence listener (which is just the prior) is `P(theta < p_i) / Z` with
//! `Z = sum_j prior_j * P(theta < p_j)`. The prior mass at `p_i` cancels, so
//! endorsement is computed from that ratio directly:
//! `S = r^lambda / (r^lambda + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{GridDistribution, GridSpec, Scale};
use crate::semantics::{ThresholdPrior, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpeakerVariant {
    /// The speaker knows a single referent prevalence.
    #[default]
    Point,
    /// The speaker has a distribution over the referent prevalence and
    /// maximizes expected log informativity.
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerConfig {
    pub lambda: f64,
    pub variant: SpeakerVariant,
}

impl SpeakerConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_variant(lambda, SpeakerVariant::Point)
    }

    pub fn with_variant(lambda: f64, variant: SpeakerVariant) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("speaker rationality must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda, variant })
    }
}

/// Parameters of the lesioned speaker with a single known threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedThresholdParams {
    pub theta_star: f64,
    pub noise: f64,
}

impl FixedThresholdParams {
    pub fn new(theta_star: f64, noise: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::Parameter(format!("noise must lie in [0,1], got {noise}")));
        }
        if !theta_star.is_finite() {
            return Err(Error::Parameter("fixed threshold must be finite".into()));
        }
        Ok(Self { theta_star, noise })
    }
}

/// Listener posterior over prevalence after hearing `u`.
pub fn interpret(u: &Utterance, prior: &GridDistribution, theta_prior: &ThresholdPrior) -> Result<GridDistribution> {
    if prior.scale() != theta_prior.scale() {
        return Err(Error::Input("prior and threshold prior live on different scales".into()));
    }
    let weights: Vec<f64> = match u {
        Utterance::Silence => return Ok(prior.clone()),
        Utterance::Generalization => prior
            .support()
            .iter()
            .zip(prior.mass())
            .map(|(p, m)| m * theta_prior.prob_below(*p))
            .collect(),
        Utterance::FixedQuantifier(t) => prior
            .support()
            .iter()
            .zip(prior.mass())
            .map(|(p, m)| if *p > *t { *m } else { 0.0 })
            .collect(),
        Utterance::Conjunction => {
            return Err(Error::Input(
                "conjunctions are interpreted over a joint prior; use interpret_conjunction".into(),
            ))
        }
    };
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::VacuousUtterance(format!("'{u}' is false at every point of the prior's support")));
    }
    prior.reweighted(weights)
}

/// Logistic speaker choice given `ln(L_gen / L_sil)`.
#[inline]
pub(crate) fn speaker_probability(lambda: f64, log_ratio: f64) -> f64 {
    if lambda == 0.0 {
        return 0.5;
    }
    1.0 / (1.0 + (-lambda * log_ratio).exp())
}

/// `ln(L_gen(p_i) / prior(p_i))` at every grid point, given the prior masses
/// and `below[i] = P(theta < p_i)`.
pub(crate) fn generalization_log_ratios(mass: &[f64], below: &[f64]) -> Vec<f64> {
    let z: f64 = mass.iter().zip(below).map(|(m, c)| m * c).sum();
    let ln_z = z.ln();
    below.iter().map(|c| c.ln() - ln_z).collect()
}

/// Per-grid-point log ratio between the generalization listener and the
/// silence listener for a given prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Informativity {
    log_ratio: Vec<f64>,
}

impl Informativity {
    pub fn generalization(prior: &GridDistribution, theta_prior: &ThresholdPrior) -> Result<Self> {
        if prior.scale() != theta_prior.scale() {
            return Err(Error::Input("prior and threshold prior live on different scales".into()));
        }
        let below: Vec<f64> = prior.support().iter().map(|p| theta_prior.prob_below(*p)).collect();
        Ok(Self { log_ratio: generalization_log_ratios(prior.mass(), &below) })
    }

    pub fn log_ratio(&self) -> &[f64] {
        &self.log_ratio
    }

    pub fn endorse_at(&self, index: usize, lambda: f64) -> f64 {
        speaker_probability(lambda, self.log_ratio[index])
    }

    /// `exp(lambda * E ln L_gen) / (exp(lambda * E ln L_gen) + exp(lambda * E ln L_sil))`.
    pub fn endorse_expected(&self, referent: &[f64], lambda: f64) -> Result<f64> {
        if referent.len() != self.log_ratio.len() {
            return Err(Error::Input("referent and prior live on different grids".into()));
        }
        let mut expected = 0.0;
        for (w, lr) in referent.iter().zip(&self.log_ratio) {
            if *w > 0.0 {
                if !lr.is_finite() {
                    return Err(Error::Numerical(
                        "referent places mass where neither utterance has positive probability".into(),
                    ));
                }
                expected += w * lr;
            }
        }
        Ok(speaker_probability(lambda, expected))
    }
}

/// Index of the grid point a referent prevalence snaps to. The referent
/// must lie within one bin width of the grid (log width on rate grids; rates
/// at or below the lowest point snap to it).
pub fn snap_referent(prior: &GridDistribution, p: f64) -> Result<usize> {
    let s = prior.support();
    let idx = prior.nearest_index(p);
    match prior.scale() {
        Scale::Unit => {
            let width = if s.len() > 1 { s[1] - s[0] } else { 1.0 };
            if !(0.0..=1.0).contains(&p) || (s[idx] - p).abs() > width + 1e-12 {
                return Err(Error::Input(format!("referent prevalence {p} lies off the grid")));
            }
        }
        Scale::Rate => {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Input(format!("referent rate {p} must be finite and >= 0")));
            }
            if p > s[0] {
                let width = if s.len() > 1 { (s[1] / s[0]).ln() } else { f64::INFINITY };
                if (s[idx].ln() - p.ln()).abs() > width + 1e-12 {
                    return Err(Error::Input(format!("referent rate {p} lies off the grid")));
                }
            }
        }
    }
    Ok(idx)
}

/// Probability that the speaker endorses the generalization for referent
/// prevalence `p`.
pub fn endorse(p: f64, prior: &GridDistribution, theta_prior: &ThresholdPrior, cfg: &SpeakerConfig) -> Result<f64> {
    let idx = snap_referent(prior, p)?;
    Ok(Informativity::generalization(prior, theta_prior)?.endorse_at(idx, cfg.lambda))
}

/// Endorsement when the speaker's belief about the referent is a
/// distribution over the prior's grid.
pub fn endorse_expectation(
    referent: &GridDistribution,
    prior: &GridDistribution,
    theta_prior: &ThresholdPrior,
    cfg: &SpeakerConfig,
) -> Result<f64> {
    if referent.support() != prior.support() {
        return Err(Error::Input("referent and prior live on different grids".into()));
    }
    Informativity::generalization(prior, theta_prior)?.endorse_expected(referent.mass(), cfg.lambda)
}

/// Core (noise-free) endorsement of the fixed-threshold speaker at grid
/// index `idx`: zero when the generalization is literally false, otherwise
/// the power rule with ratio `1 / P(p > theta_star)`.
pub(crate) fn fixed_core(support: &[f64], mass: &[f64], idx: usize, theta_star: f64, lambda: f64) -> f64 {
    fixed_cores(support, mass, theta_star, lambda)[idx]
}

/// Noise-free fixed-threshold endorsement at every grid point.
pub(crate) fn fixed_cores(support: &[f64], mass: &[f64], theta_star: f64, lambda: f64) -> Vec<f64> {
    // mass ruled out by the fixed threshold
    let excluded: f64 = support
        .iter()
        .zip(mass)
        .filter(|(p, _)| **p <= theta_star)
        .map(|(_, m)| m)
        .sum();
    let above = if lambda == 0.0 || excluded == 0.0 {
        0.5
    } else {
        speaker_probability(lambda, -(-excluded).ln_1p())
    };
    support.iter().map(|p| if *p <= theta_star { 0.0 } else { above }).collect()
}

/// Endorsement of the lesioned speaker whose generalization has the fixed
/// truth condition `p > theta_star`, mixed with guessing at rate `noise`.
pub fn endorse_fixed(
    p: f64,
    prior: &GridDistribution,
    params: &FixedThresholdParams,
    cfg: &SpeakerConfig,
) -> Result<f64> {
    let idx = snap_referent(prior, p)?;
    let core = fixed_core(prior.support(), prior.mass(), idx, params.theta_star, cfg.lambda);
    Ok((1.0 - params.noise) * core + params.noise * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjunctionStage {
    /// Only the first conjunct has been heard.
    Partial,
    /// Both conjuncts have been heard.
    Full,
}

/// Joint prior over the prevalences of two features, row-major in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPrevalencePrior {
    support_a: Vec<f64>,
    support_b: Vec<f64>,
    mass: Vec<f64>,
}

impl JointPrevalencePrior {
    /// Validates that masses are non-negative, sum to one, and vanish
    /// wherever `p_a + p_b > 1`.
    pub fn new(support_a: Vec<f64>, support_b: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != support_a.len() * support_b.len() || mass.is_empty() {
            return Err(Error::Input("joint mass must have |A| * |B| entries".into()));
        }
        if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Input("joint masses must be finite and non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > crate::numerics::MASS_TOLERANCE {
            return Err(Error::Input(format!("joint masses sum to {total}, not 1")));
        }
        let nb = support_b.len();
        for (i, a) in support_a.iter().enumerate() {
            for (j, b) in support_b.iter().enumerate() {
                if a + b > 1.0 + 1e-12 && mass[i * nb + j] > 0.0 {
                    return Err(Error::Input(format!("joint prior puts mass on p_a + p_b = {} > 1", a + b)));
                }
            }
        }
        Ok(Self { support_a, support_b, mass })
    }

    /// Product of two unit-interval densities restricted to `p_a + p_b <= 1`.
    pub fn restricted_product<F, G>(density_a: F, density_b: G, spec: &GridSpec) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let pts = spec.points();
        let mut mass = Vec::with_capacity(pts.len() * pts.len());
        for a in &pts {
            for b in &pts {
                mass.push(if a + b <= 1.0 + 1e-12 { density_a(*a) * density_b(*b) } else { 0.0 });
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegeneratePrior("restricted product has no mass".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Self::new(pts.clone(), pts, mass)
    }

    /// All mass on the grid cell nearest `(p_a, p_b)`.
    pub fn point_mass(p_a: f64, p_b: f64, spec: &GridSpec) -> Result<Self> {
        let pts = spec.points();
        let ia = crate::numerics::nearest_index(&pts, Scale::Unit, p_a);
        let ib = crate::numerics::nearest_index(&pts, Scale::Unit, p_b);
        let mut mass = vec![0.0; pts.len() * pts.len()];
        mass[ia * pts.len() + ib] = 1.0;
        Self::new(pts.clone(), pts, mass)
    }

    pub fn support_a(&self) -> &[f64] {
        &self.support_a
    }

    pub fn support_b(&self) -> &[f64] {
        &self.support_b
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.support_b.len() + j]
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.mass.chunks(self.support_b.len()).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let nb = self.support_b.len();
        (0..nb).map(|j| self.mass.iter().skip(j).step_by(nb).sum()).collect()
    }

    pub fn mean_a(&self) -> f64 {
        self.marginal_a().iter().zip(&self.support_a).map(|(m, p)| m * p).sum()
    }

    pub fn mean_b(&self) -> f64 {
        self.marginal_b().iter().zip(&self.support_b).map(|(m, p)| m * p).sum()
    }
}

/// Listener posterior over `(p_a, p_b)` after the first conjunct
/// ([`ConjunctionStage::Partial`]) or the whole conjunction, with independent
/// uniform thresholds for each conjunct.
pub fn interpret_conjunction(prior: &JointPrevalencePrior, stage: ConjunctionStage) -> Result<JointPrevalencePrior> {
    let unit = |s: &[f64]| GridDistribution::from_weights(Scale::Unit, s.to_vec(), vec![1.0; s.len()]);
    let theta_a = ThresholdPrior::for_distribution(&unit(&prior.support_a)?);
    let theta_b = ThresholdPrior::for_distribution(&unit(&prior.support_b)?);
    let below_a: Vec<f64> = prior.support_a.iter().map(|p| theta_a.prob_below(*p)).collect();
    let below_b: Vec<f64> = match stage {
        ConjunctionStage::Partial => vec![1.0; prior.support_b.len()],
        ConjunctionStage::Full => prior.support_b.iter().map(|p| theta_b.prob_below(*p)).collect(),
    };
    let nb = prior.support_b.len();
    let mut mass: Vec<f64> = prior
        .mass
        .iter()
        .enumerate()
        .map(|(k, m)| m * below_a[k / nb] * below_b[k % nb])
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InconsistentPrior("conjunction has zero posterior mass".into()));
    }
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(JointPrevalencePrior {
        support_a: prior.support_a.clone(),
        support_b: prior.support_b.clone(),
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::threshold_prior_for;
    use crate::numerics::{discretize_unit, point_mass, BetaMixturePrior, BetaParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform(k: usize) -> (GridDistribution, ThresholdPrior) {
        let spec = GridSpec::unit(k);
        (GridDistribution::uniform(&spec).unwrap(), threshold_prior_for(&spec).unwrap())
    }

    #[test]
    fn silence_returns_prior() {
        let spec = GridSpec::unit(50);
        let prior = BetaParams::new(0.3, 5.0).unwrap().discretize(&spec).unwrap();
        let post = interpret(&Utterance::Silence, &prior, &threshold_prior_for(&spec).unwrap()).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn generalization_on_uniform_prior_is_linear() {
        let (prior, theta) = uniform(100);
        let post = interpret(&Utterance::Generalization, &prior, &theta).unwrap();
        let expected: Vec<f64> = (0..100).map(|i| (i + 1) as f64 / 5050.0).collect();
        for (m, e) in post.mass().iter().zip(&expected) {
            assert_abs_diff_eq!(*m, *e, epsilon = 1e-15);
        }
        assert!((post.mean() - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn generalization_on_point_mass_is_unchanged() {
        let spec = GridSpec::unit(100);
        let prior = point_mass(0.5, &spec).unwrap();
        let post = interpret(&Utterance::Generalization, &prior, &threshold_prior_for(&spec).unwrap()).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn fixed_quantifier_above_support_is_vacuous() {
        let (prior, theta) = uniform(10);
        assert!(matches!(
            interpret(&Utterance::FixedQuantifier(1.0), &prior, &theta),
            Err(Error::VacuousUtterance(_))
        ));
        let most = interpret(&Utterance::most(), &prior, &theta).unwrap();
        assert_eq!(most.mass()[..5].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn endorse_matches_continuum_formula() {
        let (prior, theta) = uniform(100);
        let cfg = SpeakerConfig::new(1.0).unwrap();
        let s = endorse(0.5, &prior, &theta, &cfg).unwrap();
        assert!((s - 0.5).abs() < 0.01, "{s}");
        let s = endorse(0.995, &prior, &theta, &cfg).unwrap();
        assert!((s - 2.0 * 0.995 / (2.0 * 0.995 + 1.0)).abs() < 0.01, "{s}");
    }

    #[test]
    fn endorse_point_prior_is_neutral() {
        let spec = GridSpec::unit(100);
        let theta = threshold_prior_for(&spec).unwrap();
        for (p0, lambda) in [(0.03, 0.7), (0.5, 4.9), (0.97, 2.0)] {
            let prior = point_mass(p0, &spec).unwrap();
            let cfg = SpeakerConfig::new(lambda).unwrap();
            assert_eq!(endorse(p0, &prior, &theta, &cfg).unwrap(), 0.5);
        }
    }

    #[test]
    fn endorse_rejects_off_grid() {
        let (prior, theta) = uniform(100);
        let cfg = SpeakerConfig::new(1.0).unwrap();
        assert!(matches!(endorse(1.2, &prior, &theta, &cfg), Err(Error::Input(_))));
        assert!(matches!(endorse(-0.1, &prior, &theta, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn expectation_speaker_examples() {
        let spec = GridSpec::unit(100);
        let (prior, theta) = uniform(100);
        let cfg = SpeakerConfig::with_variant(1.0, SpeakerVariant::Expectation).unwrap();
        for p0 in [0.05, 0.5, 0.93] {
            let referent = point_mass(p0, &spec).unwrap();
            assert_eq!(
                endorse_expectation(&referent, &prior, &theta, &cfg).unwrap(),
                endorse(p0, &prior, &theta, &cfg).unwrap()
            );
        }
        let s = endorse_expectation(&prior, &prior, &theta, &cfg).unwrap();
        let r = 2.0 / std::f64::consts::E;
        assert!((s - r / (r + 1.0)).abs() < 0.02, "{s}");

        let pm = point_mass(0.4, &spec).unwrap();
        assert_eq!(endorse_expectation(&pm, &pm, &theta, &cfg).unwrap(), 0.5);
        let flat = SpeakerConfig::with_variant(0.0, SpeakerVariant::Expectation).unwrap();
        assert_eq!(endorse_expectation(&prior, &prior, &theta, &flat).unwrap(), 0.5);
    }

    #[test]
    fn fixed_threshold_examples() {
        let (prior, _) = uniform(100);
        let cfg = SpeakerConfig::new(1.0).unwrap();
        let false_gen = FixedThresholdParams::new(0.6, 0.0).unwrap();
        assert_eq!(endorse_fixed(0.3, &prior, &false_gen, &cfg).unwrap(), 0.0);
        let noisy = FixedThresholdParams::new(0.6, 0.2).unwrap();
        assert_abs_diff_eq!(endorse_fixed(0.3, &prior, &noisy, &cfg).unwrap(), 0.1, epsilon = 1e-15);
        let everywhere = FixedThresholdParams::new(0.0, 0.0).unwrap();
        for p in [0.01, 0.4, 0.99] {
            assert_eq!(endorse_fixed(p, &prior, &everywhere, &cfg).unwrap(), 0.5);
        }
    }

    #[test]
    fn lambda_zero_is_uniform_speaker() {
        let spec = GridSpec::unit(100);
        let prior = BetaMixturePrior::new(0.4, BetaParams::new(0.8, 20.0).unwrap())
            .unwrap()
            .discretize(&spec)
            .unwrap();
        let theta = threshold_prior_for(&spec).unwrap();
        let cfg = SpeakerConfig::new(0.0).unwrap();
        for p in spec.points() {
            assert_eq!(endorse(p, &prior, &theta, &cfg).unwrap(), 0.5);
        }
    }

    fn simplex_uniform(k: usize) -> JointPrevalencePrior {
        JointPrevalencePrior::restricted_product(|_| 1.0, |_| 1.0, &GridSpec::unit(k)).unwrap()
    }

    #[test]
    fn conjunction_is_non_monotone() {
        let prior = simplex_uniform(100);
        let partial = interpret_conjunction(&prior, ConjunctionStage::Partial).unwrap();
        let full = interpret_conjunction(&prior, ConjunctionStage::Full).unwrap();
        assert!(partial.mean_a() > prior.mean_a());
        assert!(full.mean_a() < partial.mean_a());
        // continuum values: Dirichlet(1,1,1) -> 1/3, (2,1,1) -> 1/2, (2,2,1) -> 2/5
        assert!((prior.mean_a() - 1.0 / 3.0).abs() < 0.01);
        assert!((partial.mean_a() - 0.5).abs() < 0.01);
        assert!((full.mean_a() - 0.4).abs() < 0.01);
        let nb = full.support_b().len();
        for (k, m) in full.mass().iter().enumerate() {
            if full.support_a()[k / nb] + full.support_b()[k % nb] > 1.0 {
                assert_eq!(*m, 0.0);
            }
        }
    }

    #[test]
    fn conjunction_point_mass_is_fixed() {
        let prior = JointPrevalencePrior::point_mass(0.5, 0.5, &GridSpec::unit(100)).unwrap();
        for stage in [ConjunctionStage::Partial, ConjunctionStage::Full] {
            assert_eq!(interpret_conjunction(&prior, stage).unwrap(), prior);
        }
    }

    #[test]
    fn joint_prior_rejects_mass_beyond_simplex() {
        let pts = vec![0.25, 0.75];
        assert!(JointPrevalencePrior::new(pts.clone(), pts, vec![0.0, 0.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn endorsement_is_monotone(phi in 0.0..=1.0f64, gamma in 0.02..0.98f64, xi in 0.5..100.0f64, lambda in 0.0..5.0f64) {
            let spec = GridSpec::unit(100);
            let prior = BetaMixturePrior::new(phi, BetaParams::new(gamma, xi).unwrap()).unwrap().discretize(&spec).unwrap();
            let theta = threshold_prior_for(&spec).unwrap();
            let cfg = SpeakerConfig::new(lambda).unwrap();
            let s: Vec<f64> = spec.points().iter().map(|p| endorse(*p, &prior, &theta, &cfg).unwrap()).collect();
            for w in s.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }

        #[test]
        fn soft_semantics_limit(gamma in 0.05..0.95f64, xi in 1.0..30.0f64) {
            let spec = GridSpec::unit(1000);
            let density = |x: f64| BetaParams::new(gamma, xi).unwrap().pdf(x).unwrap();
            let prior = discretize_unit(density, &spec).unwrap();
            let theta = threshold_prior_for(&spec).unwrap();
            let post = interpret(&Utterance::Generalization, &prior, &theta).unwrap();
            let soft = discretize_unit(|x| x * density(x), &spec).unwrap();
            prop_assert!(post.total_variation(&soft).unwrap() < 0.01);
        }
    }
}
