//! Point estimates, credible intervals and predictive checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BetaMixturePrior, BetaParams};

use super::mcmc::PosteriorSamples;

pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapHpd {
    pub map: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MapHpd {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Histogram mode (square-root bin count) and the shortest interval holding
/// `mass` of the draws.
pub fn map_and_hpd(draws: &[f64], mass: f64) -> Result<MapHpd> {
    if draws.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::Input(format!(
            "need at least {MIN_SUMMARY_DRAWS} draws for MAP/HPD, got {}",
            draws.len()
        )));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::Input(format!("interval mass must lie in (0,1], got {mass}")));
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numerical("non-finite posterior draw".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);

    let map = if max == min {
        min
    } else {
        let bins = (n as f64).sqrt().ceil() as usize;
        let width = (max - min) / bins as f64;
        let mut counts = vec![0usize; bins];
        for d in &sorted {
            let b = (((d - min) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i);
        min + (best as f64 + 0.5) * width
    };

    let m = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (mut lo, mut hi) = (sorted[0], sorted[m - 1]);
    for i in 1..=n - m {
        if sorted[i + m - 1] - sorted[i] < hi - lo {
            lo = sorted[i];
            hi = sorted[i + m - 1];
        }
    }
    Ok(MapHpd { map, lo, hi })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("KS distance needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn prefixed(prefix: Option<&str>, name: &str) -> String {
    match prefix {
        Some(p) if !p.is_empty() => format!("{p}.{name}"),
        _ => name.to_string(),
    }
}

/// Forward-simulate responses in (0,1): draw a parameter vector, flip the
/// `phi` coin, then sample the chosen Beta component. Samples without a
/// `phi` parameter (single-Beta fits) always use the stable component.
pub fn posterior_predictive<R: Rng + ?Sized>(
    samples: &PosteriorSamples,
    n: usize,
    prefix: Option<&str>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let total = samples.total_draws();
    if total == 0 {
        return Err(Error::Input("posterior predictive needs at least one draw".into()));
    }
    let find = |name: &str| {
        let full = prefixed(prefix, name);
        samples.index_of(&full).ok_or_else(|| Error::Input(format!("samples have no parameter '{full}'")))
    };
    let gi = find("gamma")?;
    let xi = find("xi")?;
    let phi = samples.index_of(&prefixed(prefix, "phi"));
    let rows: Vec<&[f64]> = samples.rows().collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let row = rows[rng.random_range(0..total)];
        let stable = BetaParams::new(row[gi], row[xi])?;
        let w = phi.map_or(1.0, |k| row[k]);
        out.push(BetaMixturePrior::new(w, stable)?.sample(rng));
    }
    Ok(out)
}

/// Empirical CDF of `values` evaluated at `at`.
pub fn empirical_cdf(values: &[f64], at: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len().max(1) as f64;
    at.iter().map(|x| v.partition_point(|y| y <= x) as f64 / n).collect()
}
