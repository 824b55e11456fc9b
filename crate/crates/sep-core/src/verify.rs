//! Closing the loop: drive the diffusion with the solver's Brownian paths,
//! stop it at the computed time and test the stopped marginal against the
//! declared target law.
//!
//! The simulation reuses each path's store so that `A` is driven by the same
//! `B` that defined its stopping time; a fresh trajectory would still be
//! distributionally correct but a weaker test of the construction.

use rayon::prelude::*;

use crate::analysis::ZBounds;
use crate::error::{Result, SepError};
use crate::model::{CoefficientField, TargetLaw};
use crate::paths::PathStore;

/// Default number of Euler substeps on `[0, tau]` when simulating `A`.
pub const DEFAULT_SUBSTEPS: usize = 200;

/// Relative slack when checking stopping times against the a-priori interval;
/// absorbs the rounding of the clock's floating-point partial sums.
const TAU_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct TauStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Everything the embedding test produces.
#[derive(Debug, Clone)]
pub struct EmbeddingReport {
    pub y0: f64,
    pub tau_stats: TauStats,
    pub a_tau_samples: Vec<f64>,
    pub a_tau_histogram: Histogram,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    /// Present only when the target is declared normal.
    pub normality_p_value: Option<f64>,
    pub tau_bounds_respected: bool,
    pub tau_violations: Vec<usize>,
    /// Euler substeps used for the stopped-process simulation.
    pub substeps: usize,
}

/// Euler–Maruyama for `dA = mu dt + sigma dB` on `[0, tau]` with `n_sub`
/// uniform substeps, drawing `B` increments from the given store (reusing
/// stored points, bridging new ones). Returns `A` at `tau`.
pub fn simulate_sde(
    a0: f64,
    field: &CoefficientField,
    store: &mut PathStore,
    tau: f64,
    n_sub: usize,
) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SepError::Domain(format!(
            "stopping time must be positive and finite, got {tau}"
        )));
    }
    if n_sub == 0 {
        return Err(SepError::Domain("need at least one substep".into()));
    }
    let mut a = a0;
    let mut t_prev = 0.0;
    let mut b_prev = store.sample_at(0.0)?;
    for j in 1..=n_sub {
        let t_next = tau * (j as f64 / n_sub as f64);
        let b_next = store.sample_at(t_next)?;
        let sig = field.sigma(t_prev, a)?;
        a += field.mu(t_prev, a) * (t_next - t_prev) + sig * (b_next - b_prev);
        t_prev = t_next;
        b_prev = b_next;
    }
    Ok(a)
}

/// Two-sided Kolmogorov–Smirnov statistic `sup |F_emp − F|` against a given
/// CDF with the asymptotic Kolmogorov p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    assert!(!samples.is_empty(), "KS test needs samples");
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, kolmogorov_sf(n.sqrt() * d))
}

/// Survival function of the Kolmogorov distribution. Series terms are
/// truncated once below 1e-10.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Complementary series, fast for small arguments.
        let factor = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let q = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        let mut j = 1u32;
        loop {
            let term = (-(2.0 * j as f64 - 1.0).powi(2) * q).exp();
            cdf += term;
            if term < 1e-10 || j > 200 {
                break;
            }
            j += 1;
        }
        (1.0 - factor * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        let mut j = 1u32;
        loop {
            let term = (-2.0 * (j as f64 * lambda).powi(2)).exp();
            sf += sign * term;
            if term < 1e-10 || j > 200 {
                break;
            }
            sign = -sign;
            j += 1;
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// D'Agostino–Pearson K² omnibus normality test: combines the skewness and
/// kurtosis normal transforms; the p-value comes from the chi-square law with
/// two degrees of freedom.
pub fn dagostino_pearson(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 20 {
        return Err(SepError::SampleTooSmall(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(SepError::Domain("zero variance sample".into()));
    }
    let g1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2);

    // Skewness transform (D'Agostino 1970).
    let y = g1 * (((nf + 1.0) * (nf + 3.0)) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y = if y == 0.0 { 1.0 } else { y };
    let z1 = delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    // Kurtosis transform (Anscombe–Glynn 1983).
    let eb2 = 3.0 * (nf - 1.0) / (nf + 1.0);
    let vb2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let x = (b2 - eb2) / vb2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * ((6.0 * (nf + 3.0) * (nf + 5.0)) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let z2 = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    // chi-square survival with 2 degrees of freedom
    let p = (-0.5 * k2).exp();
    Ok((k2, p))
}

/// True iff every stopping time lies in `[tau_lo, tau_hi]` up to rounding
/// slack; violating path indices are listed.
pub fn check_tau_bounds(tau: &[f64], zb: &ZBounds) -> (bool, Vec<usize>) {
    let lo = zb.tau_lo * (1.0 - TAU_BOUND_SLACK);
    let hi = zb.tau_hi * (1.0 + TAU_BOUND_SLACK);
    let violations: Vec<usize> = tau
        .iter()
        .enumerate()
        .filter(|(_, &t)| !(t >= lo && t <= hi))
        .map(|(p, _)| p)
        .collect();
    (violations.is_empty(), violations)
}

/// Counts per half-open bin `[e_j, e_{j+1})`, last bin closed; samples outside
/// the edge range land in the boundary bins so counts always conserve the
/// sample size.
pub fn build_histogram(samples: &[f64], edges: &[f64]) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(SepError::Domain("histogram needs samples".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SepError::Domain(
            "histogram edges must be strictly increasing with at least two entries".into(),
        ));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let idx = if x < edges[0] {
            0
        } else if x >= edges[bins] {
            bins - 1
        } else {
            edges.partition_point(|&e| e <= x) - 1
        };
        counts[idx.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        bin_edges: edges.to_vec(),
        counts,
    })
}

/// Equally spaced edges covering `[lo, hi]`.
pub fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (0..=bins)
        .map(|j| lo + (hi - lo) * j as f64 / bins as f64)
        .collect()
}

/// Drive `A` from `y0` along every path, stop at each path's `tau` and test
/// the stopped sample against the target law.
pub fn run_verification(
    field: &CoefficientField,
    law: &TargetLaw,
    zb: &ZBounds,
    y0: f64,
    tau: &[f64],
    stores: &mut [PathStore],
    n_sub: usize,
    n_bins: usize,
) -> Result<EmbeddingReport> {
    if tau.len() != stores.len() || tau.is_empty() {
        return Err(SepError::Config(format!(
            "{} stopping times for {} stores",
            tau.len(),
            stores.len()
        )));
    }
    let mut a_tau = vec![0.0f64; tau.len()];
    a_tau
        .par_iter_mut()
        .zip(stores.par_iter_mut())
        .zip(tau.par_iter())
        .try_for_each(|((a, store), &t)| -> Result<()> {
            *a = simulate_sde(y0, field, store, t, n_sub)?;
            Ok(())
        })?;

    let (ks_statistic, ks_p_value) = ks_test(&a_tau, |x| law.cdf(x));
    let normality_p_value = match law.normal_std {
        Some(_) => Some(dagostino_pearson(&a_tau)?.1),
        None => None,
    };
    let (tau_ok, tau_violations) = check_tau_bounds(tau, zb);

    let tau_min = tau.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_max = tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tau_mean = tau.iter().sum::<f64>() / tau.len() as f64;
    let tau_hist = build_histogram(tau, &equal_width_edges(tau_min, tau_max, n_bins))?;

    let a_min = a_tau.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a_tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_hist = build_histogram(&a_tau, &equal_width_edges(a_min, a_max, n_bins))?;

    Ok(EmbeddingReport {
        y0,
        tau_stats: TauStats {
            min: tau_min,
            mean: tau_mean,
            max: tau_max,
            histogram: tau_hist,
        },
        a_tau_samples: a_tau,
        a_tau_histogram: a_hist,
        ks_statistic,
        ks_p_value,
        normality_p_value,
        tau_bounds_respected: tau_ok,
        tau_violations,
        substeps: n_sub,
    })
}
