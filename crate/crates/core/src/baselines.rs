//! Regression baselines, participant bootstrap and fit metrics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};

/// Ordinary least-squares fit with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// `"intercept"` followed by the predictor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl RegressionFit {
    /// Fitted values clamped to [0,1], for proportion targets.
    pub fn predictions(&self) -> Vec<f64> {
        self.fitted.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() + 1 != self.coefficients.len() {
            return Err(Error::Input("predictor row has the wrong length".into()));
        }
        Ok(self.coefficients[0] + row.iter().zip(&self.coefficients[1..]).map(|(x, b)| x * b).sum::<f64>())
    }
}

/// Least squares of `targets` on an intercept plus `predictors`.
pub fn fit_linear(targets: &[f64], predictors: &[(String, Vec<f64>)]) -> Result<RegressionFit> {
    let n = targets.len();
    if n < 2 {
        return Err(Error::Input(format!("regression needs at least 2 items, got {n}")));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::Input(format!("predictor '{name}' has {} values for {n} items", col.len())));
        }
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::Input(format!("predictor '{name}' is constant")));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("predictor '{name}' has non-finite values")));
        }
    }
    let p = predictors.len() + 1;
    if n < p {
        return Err(Error::Input(format!("{n} items cannot identify {p} coefficients")));
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { predictors[j - 1].1[i] });
    let y = DVector::from_column_slice(targets);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..p).any(|j| r[(j, j)].abs() <= 1e-10 * scale.max(1.0)) {
        return Err(Error::Input("design matrix is rank-deficient".into()));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let fitted = &x * &beta;
    let mut names = vec!["intercept".to_string()];
    names.extend(predictors.iter().map(|(n, _)| n.clone()));
    Ok(RegressionFit { names, coefficients: beta.iter().copied().collect(), fitted: fitted.iter().copied().collect() })
}

/// Log-scale predictor for rates; values below `floor` are raised to it.
pub fn log_predictor(values: &[f64], floor: f64) -> Vec<f64> {
    values.iter().map(|v| v.max(floor).ln()).collect()
}

/// Per-item percentile bands over bootstrap resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub lo: Vec<f64>,
    pub median: Vec<f64>,
    pub hi: Vec<f64>,
    pub resamples: usize,
}

/// Linear-interpolated percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Resample participants with replacement `n` times, refit with `fitter`
/// and collect its per-item predictions. Resample `b` draws from its own
/// random stream, so results do not depend on thread scheduling.
pub fn bootstrap_predictions<P, F>(participants: &[P], n: usize, seed: u64, fitter: F) -> Result<BootstrapResult>
where
    P: Sync,
    F: Fn(&[&P]) -> Result<Vec<f64>> + Sync,
{
    if participants.is_empty() {
        return Err(Error::Input("bootstrap needs at least one participant".into()));
    }
    if n == 0 {
        return Err(Error::Input("bootstrap needs at least one resample".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get()).min(n);
    let run = |b: usize| -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let draw: Vec<&P> = (0..participants.len())
            .map(|_| &participants[rng.random_range(0..participants.len())])
            .collect();
        fitter(&draw)
    };
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let run = &run;
        let handles: Vec<_> = (0..threads)
            .map(|t| scope.spawn(move || (t..n).step_by(threads).map(|b| (b, run(b))).collect::<Vec<_>>()))
            .collect();
        let mut all: Vec<(usize, Result<Vec<f64>>)> = handles
            .into_iter()
            .flat_map(|h| h.join().unwrap_or_else(|_| vec![(0, Err(Error::Numerical("bootstrap thread panicked".into())))]))
            .collect();
        all.sort_by_key(|(b, _)| *b);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let preds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let items = preds[0].len();
    if preds.iter().any(|p| p.len() != items) {
        return Err(Error::Numerical("bootstrap fits returned different item counts".into()));
    }
    let mut out = BootstrapResult { lo: vec![], median: vec![], hi: vec![], resamples: n };
    for i in 0..items {
        let mut col: Vec<f64> = preds.iter().map(|p| p[i]).collect();
        col.sort_by(f64::total_cmp);
        out.lo.push(percentile(&col, 0.025));
        out.median.push(percentile(&col, 0.5));
        out.hi.push(percentile(&col, 0.975));
    }
    Ok(out)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Input("need at least 2 values".into()));
    }
    Ok(())
}

/// Squared Pearson correlation.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Numerical("r² undefined: zero variance".into()));
    }
    Ok(sab * sab / (saa * sbb))
}

/// `(r², MSE)` of model predictions against human proportions.
pub fn r2_and_mse(predictions: &[f64], human: &[f64]) -> Result<(f64, f64)> {
    let r2 = squared_correlation(predictions, human)?;
    let mse = predictions.iter().zip(human).map(|(p, h)| (p - h).powi(2)).sum::<f64>() / predictions.len() as f64;
    Ok((r2, mse))
}

/// Rewrites labels that start with a given prefix to a canonical label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelNormalizer {
    pub prefixes: Vec<(String, String)>,
}

impl Default for LabelNormalizer {
    fn default() -> Self {
        let canon = "mosquito".to_string();
        Self {
            prefixes: ["mosqu", "mesqu", "misqu", "mosiq"].iter().map(|p| (p.to_string(), canon.clone())).collect(),
        }
    }
}

impl LabelNormalizer {
    pub fn empty() -> Self {
        Self { prefixes: vec![] }
    }

    /// Lowercase, drop whitespace, apply the prefix map, then singularize.
    pub fn normalize(&self, label: &str) -> String {
        let s: String = label.to_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
        for (prefix, canon) in &self.prefixes {
            if s.starts_with(prefix.as_str()) {
                return canon.clone();
            }
        }
        singularize(&s)
    }
}

fn singularize(s: &str) -> String {
    if let Some(stem) = s.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if s.ends_with(suffix) {
            return s[..s.len() - 2].to_string();
        }
    }
    if s.len() > 2 && s.ends_with('s') && !s.ends_with("ss") && !s.ends_with("us") {
        return s[..s.len() - 1].to_string();
    }
    s.to_string()
}

/// Share of free-production responses naming `target`; labels are compared
/// after normalization.
pub fn free_production_cue_validity(responses: &[String], target: &str, normalizer: &LabelNormalizer) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::Input("no free-production responses".into()));
    }
    let t = normalizer.normalize(target);
    let hits = responses.iter().filter(|r| normalizer.normalize(r) == t).count();
    Ok(hits as f64 / responses.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub item: String,
    pub human: f64,
    pub model: f64,
    pub lo: f64,
    pub hi: f64,
}

/// CSV with columns `item,human,model,lo,hi`.
pub fn write_prediction_table<W: Write>(rows: &[PredictionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assume, proptest};

    /// Solve the normal equations `(X'X) b = X'y` by Gauss-Jordan elimination.
    fn normal_equations(targets: &[f64], cols: &[Vec<f64>]) -> Vec<f64> {
        let n = targets.len();
        let p = cols.len() + 1;
        let x = |i: usize, j: usize| if j == 0 { 1.0 } else { cols[j - 1][i] };
        let mut a = vec![vec![0.0; p + 1]; p];
        for r in 0..p {
            for c in 0..p {
                a[r][c] = (0..n).map(|i| x(i, r) * x(i, c)).sum();
            }
            a[r][p] = (0..n).map(|i| x(i, r) * targets[i]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|i, j| a[*i][c].abs().total_cmp(&a[*j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=p {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p] / a[r][r]).collect()
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 30;
        let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.2 + 0.5 * cols[0][i] - 0.3 * cols[1][i] + 0.05 * rng.random::<f64>()).collect();
        let named: Vec<(String, Vec<f64>)> = cols.iter().enumerate().map(|(i, c)| (format!("x{i}"), c.clone())).collect();
        let fit = fit_linear(&y, &named).unwrap();
        let oracle = normal_equations(&y, &cols);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn ols_trivial_cases() {
        let x = vec![0.1, 0.4, 0.5, 0.9];
        let fit = fit_linear(&x, &[("p".into(), x.clone())]).unwrap();
        assert!((fit.coefficients[0]).abs() < 1e-12 && (fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert_eq!(r2_and_mse(&fit.fitted, &x).unwrap().0, 1.0);

        let fit = fit_linear(&[0.2, 0.8], &[("p".into(), vec![1.0, 3.0])]).unwrap();
        assert!((fit.fitted[0] - 0.2).abs() < 1e-12 && (fit.fitted[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ols_errors() {
        assert!(fit_linear(&[0.5], &[]).is_err());
        assert!(fit_linear(&[0.1, 0.2, 0.3], &[("c".into(), vec![1.0, 1.0, 1.0])]).is_err());
        let a = vec![0.1, 0.2, 0.3];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(fit_linear(&[0.3, 0.1, 0.9], &[("a".into(), a), ("b".into(), b)]), Err(Error::Input(_))));
    }

    #[test]
    fn predictions_are_clamped() {
        let fit = fit_linear(&[0.0, 1.0], &[("p".into(), vec![0.0, 1.0])]).unwrap();
        assert_eq!(fit.predict(&[2.0]).unwrap(), 2.0);
        let fit = RegressionFit { names: vec![], coefficients: vec![], fitted: vec![-0.2, 0.5, 1.3] };
        assert_eq!(fit.predictions(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn r2_and_mse_examples() {
        let h = [0.1, 0.4, 0.35, 0.8, 0.9];
        assert_eq!(r2_and_mse(&h, &h).unwrap(), (1.0, 0.0));
        let shifted: Vec<f64> = h.iter().map(|v| v + 0.1).collect();
        let (r2, mse) = r2_and_mse(&shifted, &h).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12 && (mse - 0.01).abs() < 1e-12);

        // hand computation
        let p = [0.2, 0.3, 0.5, 0.7, 0.8];
        let (mp, mh) = (0.5, 0.51);
        let sph: f64 = p.iter().zip(&h).map(|(a, b)| (a - mp) * (b - mh)).sum();
        let spp: f64 = p.iter().map(|a| (a - mp) * (a - mp)).sum();
        let shh: f64 = h.iter().map(|b| (b - mh) * (b - mh)).sum();
        let (r2, mse) = r2_and_mse(&p, &h).unwrap();
        assert!((r2 - sph * sph / (spp * shh)).abs() < 1e-15);
        assert!((mse - 0.0625 / 5.0).abs() < 1e-15, "{mse}");
        assert!(r2_and_mse(&[0.5, 0.5], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn bootstrap_examples() {
        let people: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let fitter = |draw: &[&f64]| Ok(vec![draw.iter().copied().sum::<f64>() / draw.len() as f64]);
        let one = bootstrap_predictions(&people, 1, 3, fitter).unwrap();
        assert_eq!(one.lo, one.hi);
        assert_eq!(one.lo, one.median);
        let a = bootstrap_predictions(&people, 200, 3, fitter).unwrap();
        let b = bootstrap_predictions(&people, 200, 3, fitter).unwrap();
        assert_eq!(a, b);
        assert!(a.lo[0] <= a.median[0] && a.median[0] <= a.hi[0]);
        assert!((a.median[0] - 0.475).abs() < 0.03);

        let same = vec![0.4; 500];
        let h = bootstrap_predictions(&same, 100, 1, fitter).unwrap();
        assert!((h.hi[0] - h.lo[0]).abs() < 1e-12);
    }

    #[test]
    fn free_production_examples() {
        let norm = LabelNormalizer::default();
        let ten = |k: usize| -> Vec<String> {
            (0..10).map(|i| if i < k { "Mosquitoes".to_string() } else { "flies".to_string() }).collect()
        };
        assert_eq!(free_production_cue_validity(&ten(10), "mosquito", &norm).unwrap(), 1.0);
        assert_eq!(free_production_cue_validity(&ten(0), "mosquito", &norm).unwrap(), 0.0);
        assert!((free_production_cue_validity(&ten(7), "mosquito", &norm).unwrap() - 0.7).abs() < 1e-15);
        assert!(free_production_cue_validity(&[], "x", &norm).is_err());
        assert_eq!(norm.normalize("Misquitos"), "mosquito");
        assert_eq!(norm.normalize("Flies"), "fly");
        assert_eq!(norm.normalize("Foxes"), "fox");
        assert_eq!(norm.normalize("Polar Bears"), "polarbear");
        assert_eq!(LabelNormalizer::empty().normalize("mosquitoes"), "mosquitoe");
    }

    proptest! {
        #[test]
        fn residuals_are_orthogonal(ys in prop::collection::vec(0.0..1.0f64, 8), xs in prop::collection::vec(0.0..1.0f64, 8)) {
            prop_assume!(xs.iter().any(|v| (v - xs[0]).abs() > 1e-3));
            let fit = fit_linear(&ys, &[("x".into(), xs.clone())]).unwrap();
            let resid: Vec<f64> = ys.iter().zip(&fit.fitted).map(|(y, f)| y - f).collect();
            prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8);
            prop_assert!(resid.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-8);
        }

        #[test]
        fn r2_is_affine_invariant(p in prop::collection::vec(0.0..1.0f64, 6), h in prop::collection::vec(0.0..1.0f64, 6), a in 0.5..3.0f64, b in 0.1..1.0f64) {
            let (r2, _) = r2_and_mse(&p, &h).unwrap();
            let q: Vec<f64> = p.iter().map(|v| a * v + b).collect();
            let (r2q, _) = r2_and_mse(&q, &h).unwrap();
            prop_assert!((r2 - r2q).abs() < 1e-9);
        }
    }
}
