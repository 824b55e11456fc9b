//! SDE coefficients and target distribution.
//!
//! A [`CoefficientField`] carries the drift `mu(t, a)`, the diffusion
//! `sigma(t, a)`, their four partials and the sup-norm record consumed by the
//! bound formulas. A [`TargetLaw`] carries the target distribution through its
//! CDF/quantile pair together with the derived transform `g = F^{-1} ∘ Φ`
//! mapping a standard normal variate to the target law.
//!
//! Norms are either declared in closed form (exact for the built-in families)
//! or estimated on a finite grid; estimated norms carry an explicit provenance
//! flag and every bound computed from them is advisory.

use std::sync::Arc;

use crate::error::{Result, SepError};
use crate::normal::{norm_cdf, norm_quantile};

/// Finite-difference step for the `g'` fallback.
const G_PRIME_FD_STEP: f64 = 1e-5;

pub type Coeff = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Where a norm record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormProvenance {
    /// Closed-form values declared by the model family (trusted).
    Declared,
    /// Grid-sampled sup/inf estimates; bounds derived from them are advisory.
    GridEstimated,
}

/// Which branch of the sign condition the coefficient pair satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignCase {
    /// `∂a sigma ≡ 0`.
    ASigmaZero,
    /// `∂a sigma ≥ 0` and `2 ∂t sigma · mu − sigma · ∂t mu ≥ 0`.
    CaseII,
    /// `∂a sigma ≤ 0` and `2 ∂t sigma · mu − sigma · ∂t mu ≤ 0`.
    CaseIII,
    Unknown,
}

/// Sup-norm record for the bound formulas, plus the scalar infimum of
/// `(sigma ∂a mu − 2 ∂a sigma · mu) / sigma^3` over the quarter-plane.
#[derive(Debug, Clone)]
pub struct NormSet {
    /// ‖sigma‖∞
    pub sigma_sup: f64,
    /// ‖mu / sigma²‖∞
    pub drift_ratio_sup: f64,
    /// ‖∂t mu / sigma²‖∞
    pub dt_mu_ratio_sup: f64,
    /// ‖∂a mu / sigma²‖∞
    pub da_mu_ratio_sup: f64,
    /// ‖∂t sigma / sigma‖∞
    pub dt_sigma_ratio_sup: f64,
    /// ‖∂a sigma / sigma‖∞
    pub da_sigma_ratio_sup: f64,
    /// inf over (t, a) of (sigma ∂a mu − 2 ∂a sigma mu) / sigma³
    pub inf_term: f64,
    pub provenance: NormProvenance,
    /// Grid point attaining the infimum, when grid-estimated.
    pub inf_term_witness: Option<(f64, f64)>,
    /// Smallest sigma value seen on the grid, when grid-estimated.
    pub sigma_inf: Option<f64>,
    pub sigma_inf_witness: Option<(f64, f64)>,
}

impl NormSet {
    pub fn all_sups_finite(&self) -> bool {
        [
            self.sigma_sup,
            self.drift_ratio_sup,
            self.dt_mu_ratio_sup,
            self.da_mu_ratio_sup,
            self.dt_sigma_ratio_sup,
            self.da_sigma_ratio_sup,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Drift, diffusion, their partials, the ellipticity floor and the norm record.
///
/// Immutable after construction; shared freely across workers.
#[derive(Clone)]
pub struct CoefficientField {
    mu: Coeff,
    sigma: Coeff,
    d_t_mu: Coeff,
    d_a_mu: Coeff,
    d_t_sigma: Coeff,
    d_a_sigma: Coeff,
    pub epsilon: f64,
    pub norms: Option<NormSet>,
    pub sign_case: SignCase,
    /// Declared `∂t mu = ∂t sigma ≡ 0`; enables the decoupled oracle.
    pub time_homogeneous: bool,
}

impl CoefficientField {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: Coeff,
        sigma: Coeff,
        d_t_mu: Coeff,
        d_a_mu: Coeff,
        d_t_sigma: Coeff,
        d_a_sigma: Coeff,
        epsilon: f64,
        sign_case: SignCase,
        time_homogeneous: bool,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(SepError::Config(format!(
                "ellipticity floor must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self {
            mu,
            sigma,
            d_t_mu,
            d_a_mu,
            d_t_sigma,
            d_a_sigma,
            epsilon,
            norms: None,
            sign_case,
            time_homogeneous,
        })
    }

    /// Brownian motion with constant drift `m` and unit diffusion.
    pub fn bm_drift(m: f64) -> Self {
        let mut field = Self::new(
            Arc::new(move |_, _| m),
            Arc::new(|_, _| 1.0),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| 0.0),
            1.0,
            SignCase::ASigmaZero,
            true,
        )
        .expect("constant coefficients are admissible");
        field.norms = Some(NormSet {
            sigma_sup: 1.0,
            drift_ratio_sup: m.abs(),
            dt_mu_ratio_sup: 0.0,
            da_mu_ratio_sup: 0.0,
            dt_sigma_ratio_sup: 0.0,
            da_sigma_ratio_sup: 0.0,
            inf_term: 0.0,
            provenance: NormProvenance::Declared,
            inf_term_witness: None,
            sigma_inf: None,
            sigma_inf_witness: None,
        });
        field
    }

    /// Diffusion value with the ellipticity floor enforced at every evaluation.
    pub fn sigma(&self, t: f64, a: f64) -> Result<f64> {
        let v = (self.sigma)(t, a);
        if !v.is_finite() {
            return Err(SepError::Evaluation {
                t,
                a,
                detail: format!("sigma evaluated to {v}"),
            });
        }
        if v < self.epsilon {
            return Err(SepError::Ellipticity {
                t,
                a,
                sigma: v,
                epsilon: self.epsilon,
            });
        }
        Ok(v)
    }

    pub fn mu(&self, t: f64, a: f64) -> f64 {
        (self.mu)(t, a)
    }

    pub fn d_t_mu(&self, t: f64, a: f64) -> f64 {
        (self.d_t_mu)(t, a)
    }

    pub fn d_a_mu(&self, t: f64, a: f64) -> f64 {
        (self.d_a_mu)(t, a)
    }

    pub fn d_t_sigma(&self, t: f64, a: f64) -> f64 {
        (self.d_t_sigma)(t, a)
    }

    pub fn d_a_sigma(&self, t: f64, a: f64) -> f64 {
        (self.d_a_sigma)(t, a)
    }

    /// Raw diffusion value without the ellipticity check (norm estimation).
    fn sigma_unchecked(&self, t: f64, a: f64) -> f64 {
        (self.sigma)(t, a)
    }
}

/// Target distribution with the derived quantile transform.
///
/// Immutable after construction; shared freely across workers.
#[derive(Clone)]
pub struct TargetLaw {
    pub cdf: RealFn,
    pub quantile: RealFn,
    pub g: RealFn,
    pub g_prime: RealFn,
    /// ‖g'‖∞
    pub g_prime_sup: f64,
    /// ‖1/g'‖∞; required for the lower Z bound.
    pub inv_g_prime_sup: Option<f64>,
    /// Standard deviation when the target is declared centred normal.
    pub normal_std: Option<f64>,
    /// True when `g_prime_sup` came from grid sampling rather than a closed form.
    pub g_prime_sup_estimated: bool,
}

impl TargetLaw {
    /// Centred normal target N(0, std²). Its transform is exactly `g(x) = std·x`.
    pub fn normal(std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() {
            return Err(SepError::Config(format!(
                "normal target needs positive std, got {std}"
            )));
        }
        Ok(Self {
            cdf: Arc::new(move |x| norm_cdf(x / std)),
            quantile: Arc::new(move |p| std * norm_quantile(p)),
            g: Arc::new(move |x| std * x),
            g_prime: Arc::new(move |_| std),
            g_prime_sup: std,
            inv_g_prime_sup: Some(1.0 / std),
            normal_std: Some(std),
            g_prime_sup_estimated: false,
        })
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        (self.g_prime)(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.quantile)(p)
    }
}

/// Ingredients for [`make_quantile_transform`]: the law before `g` is derived.
pub struct LawSpec {
    pub cdf: RealFn,
    pub quantile: RealFn,
    /// Analytic density of the target at the quantile, if known. When present
    /// `g'(x) = φ(x) / f(F^{-1}(Φ(x)))` is computed analytically.
    pub density: Option<RealFn>,
    /// Declared ‖g'‖∞; estimated over a wide grid when absent.
    pub g_prime_sup: Option<f64>,
    /// Declared ‖1/g'‖∞; only needed to form the lower Z bound.
    pub inv_g_prime_sup: Option<f64>,
    pub normal_std: Option<f64>,
}

/// Derive `g = F^{-1} ∘ Φ` and `g'` for a law given through CDF and quantile.
///
/// `g'` is analytic when the density is supplied and otherwise a central
/// finite difference with step 1e-5, clamped to `[0, ‖g'‖∞]`. Fails when the
/// quantile is non-monotone on a sampled probability grid.
pub fn make_quantile_transform(spec: LawSpec) -> Result<TargetLaw> {
    let quantile = spec.quantile.clone();

    // Monotonicity of the quantile on a sampled grid.
    let mut prev = f64::NEG_INFINITY;
    for i in 1..512 {
        let p = i as f64 / 512.0;
        let q = (quantile)(p);
        if !q.is_finite() {
            return Err(SepError::Config(format!(
                "quantile({p}) is not finite: {q}"
            )));
        }
        if q < prev {
            return Err(SepError::Config(format!(
                "quantile is non-monotone near p = {p}"
            )));
        }
        prev = q;
    }

    let g: RealFn = {
        let quantile = quantile.clone();
        Arc::new(move |x| (quantile)(norm_cdf(x)))
    };

    let g_prime_raw: RealFn = match &spec.density {
        Some(density) => {
            let g = g.clone();
            let density = density.clone();
            Arc::new(move |x| {
                let f = (density)((g)(x));
                if f > 0.0 {
                    crate::normal::norm_pdf(x) / f
                } else {
                    0.0
                }
            })
        }
        None => {
            let g = g.clone();
            Arc::new(move |x| ((g)(x + G_PRIME_FD_STEP) - (g)(x - G_PRIME_FD_STEP)) / (2.0 * G_PRIME_FD_STEP))
        }
    };

    let (g_prime_sup, estimated) = match spec.g_prime_sup {
        Some(v) if v > 0.0 && v.is_finite() => (v, false),
        Some(v) => {
            return Err(SepError::Config(format!(
                "declared g_prime_sup must be positive and finite, got {v}"
            )))
        }
        None => {
            // Sup of g' sampled over a wide window; flagged as estimated.
            let mut sup: f64 = 0.0;
            for i in 0..=1600 {
                let x = -8.0 + i as f64 * 0.01;
                sup = sup.max((g_prime_raw)(x));
            }
            if !(sup > 0.0) || !sup.is_finite() {
                return Err(SepError::Config(format!(
                    "estimated g_prime_sup is degenerate: {sup}"
                )));
            }
            (sup, true)
        }
    };

    // Monotonicity of F^{-1} ∘ Φ forces g' ≥ 0; clamp the fallback into range.
    let g_prime: RealFn = {
        let raw = g_prime_raw.clone();
        Arc::new(move |x| (raw)(x).clamp(0.0, g_prime_sup))
    };

    Ok(TargetLaw {
        cdf: spec.cdf,
        quantile: spec.quantile,
        g,
        g_prime,
        g_prime_sup,
        inv_g_prime_sup: spec.inv_g_prime_sup,
        normal_std: spec.normal_std,
        g_prime_sup_estimated: estimated,
    })
}

/// Target law from a tabulated quantile, linearly interpolated in probability.
///
/// `probs` must be strictly increasing inside (0,1) and `values` nondecreasing.
/// Outside the tabulated range the quantile is held at the end values, so the
/// law is compactly supported on `[values.first(), values.last()]`.
pub fn target_from_quantile_table(
    probs: &[f64],
    values: &[f64],
    g_prime_sup: Option<f64>,
    inv_g_prime_sup: Option<f64>,
) -> Result<TargetLaw> {
    if probs.len() != values.len() || probs.len() < 2 {
        return Err(SepError::Config(
            "quantile table needs matching probs/values with at least 2 rows".into(),
        ));
    }
    for w in probs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(SepError::Config("quantile table probs must be strictly increasing".into()));
        }
    }
    if probs[0] <= 0.0 || *probs.last().unwrap() >= 1.0 {
        return Err(SepError::Config("quantile table probs must lie inside (0,1)".into()));
    }
    for w in values.windows(2) {
        if w[1] < w[0] {
            return Err(SepError::Config("quantile table values must be nondecreasing".into()));
        }
    }
    let ps: Arc<[f64]> = probs.into();
    let vs: Arc<[f64]> = values.into();

    let quantile: RealFn = {
        let ps = ps.clone();
        let vs = vs.clone();
        Arc::new(move |p: f64| {
            if p <= ps[0] {
                return vs[0];
            }
            if p >= ps[ps.len() - 1] {
                return vs[vs.len() - 1];
            }
            let j = ps.partition_point(|&q| q < p).min(ps.len() - 1);
            let (p0, p1) = (ps[j - 1], ps[j]);
            let (v0, v1) = (vs[j - 1], vs[j]);
            v0 + (v1 - v0) * (p - p0) / (p1 - p0)
        })
    };
    // The piecewise-linear quantile inverts to a piecewise-linear CDF.
    let cdf: RealFn = {
        let ps = ps.clone();
        let vs = vs.clone();
        Arc::new(move |x: f64| {
            if x < vs[0] {
                return 0.0;
            }
            if x >= vs[vs.len() - 1] {
                return 1.0;
            }
            let j = vs.partition_point(|&v| v <= x).min(vs.len() - 1);
            let (v0, v1) = (vs[j - 1], vs[j]);
            if v1 == v0 {
                return ps[j];
            }
            let (p0, p1) = (ps[j - 1], ps[j]);
            p0 + (p1 - p0) * (x - v0) / (v1 - v0)
        })
    };

    make_quantile_transform(LawSpec {
        cdf,
        quantile,
        density: None,
        g_prime_sup,
        inv_g_prime_sup,
        normal_std: None,
    })
}

/// Logistic sigmoid and its derivative.
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Coefficient family `c(t, a) = p1 + p2·s(t) + p3·s(a)` with `s` the logistic
/// sigmoid, one parameter triple each for sigma and mu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidFamily {
    pub p_sigma: [f64; 3],
    pub p_mu: [f64; 3],
}

impl SigmoidFamily {
    pub fn new(p_sigma: [f64; 3], p_mu: [f64; 3]) -> Result<Self> {
        let fam = Self { p_sigma, p_mu };
        if !(fam.epsilon() > 0.0) {
            return Err(SepError::Config(format!(
                "sigmoid family has nonpositive ellipticity floor {}",
                fam.epsilon()
            )));
        }
        Ok(fam)
    }

    /// Ellipticity floor `p1 + min(0, p2) + min(0, p3)`.
    pub fn epsilon(&self) -> f64 {
        let p = self.p_sigma;
        p[0] + p[1].min(0.0) + p[2].min(0.0)
    }

    /// The coefficient field with analytic partials and declared norms.
    pub fn field(&self, g_prime_sup: f64) -> Result<CoefficientField> {
        let (norms, epsilon, sign_case) = sigmoid_norms(self, g_prime_sup)?;
        let ps = self.p_sigma;
        let pm = self.p_mu;
        let mut field = CoefficientField::new(
            Arc::new(move |t, a| pm[0] + pm[1] * sigmoid(t) + pm[2] * sigmoid(a)),
            Arc::new(move |t, a| ps[0] + ps[1] * sigmoid(t) + ps[2] * sigmoid(a)),
            Arc::new(move |t, _| pm[1] * sigmoid_prime(t)),
            Arc::new(move |_, a| pm[2] * sigmoid_prime(a)),
            Arc::new(move |t, _| ps[1] * sigmoid_prime(t)),
            Arc::new(move |_, a| ps[2] * sigmoid_prime(a)),
            epsilon,
            sign_case,
            ps[1] == 0.0 && pm[1] == 0.0,
        )?;
        field.norms = Some(norms);
        Ok(field)
    }
}

/// Closed-form norms, ellipticity floor and sign case of a sigmoid family,
/// after checking the family's three admissibility inequalities against the
/// declared ‖g'‖∞.
///
/// The sup norms take the coefficient sigmoids as bounded by one and the
/// infimum term uses the sharp bound 1/4 on the sigmoid derivative; both match
/// the closed forms under which the family was analysed, so they dominate any
/// grid estimate.
pub fn sigmoid_norms(fam: &SigmoidFamily, g_prime_sup: f64) -> Result<(NormSet, f64, SignCase)> {
    let ps = fam.p_sigma;
    let pm = fam.p_mu;

    // Inequality 1: ellipticity floor.
    let epsilon = fam.epsilon();
    if !(epsilon > 0.0) {
        return Err(SepError::AssumptionViolated(format!(
            "sigmoid inequality 1 fails: epsilon = p1 + min(0,p2) + min(0,p3) = {epsilon} <= 0"
        )));
    }

    let sign_case = if ps[2] == 0.0 {
        SignCase::ASigmaZero
    } else if ps[2] > 0.0 {
        SignCase::CaseII
    } else {
        SignCase::CaseIII
    };

    // Inequality 2: the mixed-sign condition 2 ∂t sigma · mu − sigma · ∂t mu
    // keeps one sign. Closed-form lower bound of the driving bracket:
    //   2 p2σ p3σ p1μ − p1σ p2μ + min(0, p2σ p3σ p2μ)
    //     + min(0, 2 p2σ p3σ p3μ − (p3σ)² p2μ).
    // Case II needs the bound ≥ 0; case III the mirrored bound ≤ 0; the
    // condition is vacuous when ∂a sigma ≡ 0.
    match sign_case {
        SignCase::ASigmaZero => {}
        SignCase::CaseII => {
            let bound = 2.0 * ps[1] * ps[2] * pm[0] - ps[0] * pm[1]
                + (ps[1] * ps[2] * pm[1]).min(0.0)
                + (2.0 * ps[1] * ps[2] * pm[2] - ps[2] * ps[2] * pm[1]).min(0.0);
            if bound < 0.0 {
                return Err(SepError::AssumptionViolated(format!(
                    "sigmoid inequality 2 fails for the increasing-diffusion case: bound = {bound} < 0"
                )));
            }
        }
        SignCase::CaseIII => {
            let bound = 2.0 * ps[1] * ps[2] * pm[0] - ps[0] * pm[1]
                + (ps[1] * ps[2] * pm[1]).max(0.0)
                + (2.0 * ps[1] * ps[2] * pm[2] - ps[2] * ps[2] * pm[1]).max(0.0);
            if bound > 0.0 {
                return Err(SepError::AssumptionViolated(format!(
                    "sigmoid inequality 2 fails for the decreasing-diffusion case: bound = {bound} > 0"
                )));
            }
        }
        SignCase::Unknown => unreachable!(),
    }

    // Lower bound on sigma ∂a mu − 2 ∂a sigma · mu over the quarter-plane,
    // divided by 4 eps³ (sigmoid derivative peaks at 1/4, sigma ≥ eps).
    let numerator_lower = ps[0] * pm[2] - 2.0 * ps[2] * pm[0]
        + (ps[1] * pm[2] - 2.0 * ps[2] * pm[1]).min(0.0)
        - (ps[2] * pm[2]).max(0.0);
    let inf_term = numerator_lower.min(0.0) / (4.0 * epsilon.powi(3));

    // Inequality 3: the gradient-bound inequality with the closed-form inf.
    let ineq3 = 1.0 / (g_prime_sup * g_prime_sup) + 2.0 * inf_term;
    if !(ineq3 > 0.0) {
        return Err(SepError::AssumptionViolated(format!(
            "sigmoid inequality 3 fails: 1/‖g'‖² + 2·inf = {ineq3} <= 0"
        )));
    }

    let mu_sup = (pm[0] + pm[1].max(0.0) + pm[2].max(0.0))
        .max(-pm[0] - pm[1].min(0.0) - pm[2].min(0.0));
    let norms = NormSet {
        sigma_sup: ps[0] + ps[1].max(0.0) + ps[2].max(0.0),
        drift_ratio_sup: mu_sup / (epsilon * epsilon),
        dt_mu_ratio_sup: pm[1].abs() / (epsilon * epsilon),
        da_mu_ratio_sup: pm[2].abs() / (epsilon * epsilon),
        dt_sigma_ratio_sup: ps[1].abs() / epsilon,
        da_sigma_ratio_sup: ps[2].abs() / epsilon,
        inf_term,
        provenance: NormProvenance::Declared,
        inf_term_witness: None,
        sigma_inf: None,
        sigma_inf_witness: None,
    };
    Ok((norms, epsilon, sign_case))
}

/// Grid-sampled sup/inf estimates over the rectangle
/// `[t_range.0, t_range.1] × [a_range.0, a_range.1]`.
///
/// The result is flagged [`NormProvenance::GridEstimated`]; a finite grid can
/// only under-estimate a sup, so downstream bounds are advisory.
pub fn estimate_norms_grid(
    field: &CoefficientField,
    t_range: (f64, f64),
    a_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<NormSet> {
    let (nt, na) = resolution;
    if nt < 2 || na < 2 {
        return Err(SepError::Config(format!(
            "grid resolution must be at least 2 per axis, got {nt}x{na}"
        )));
    }
    if !(t_range.1 > t_range.0) || !(a_range.1 > a_range.0) || t_range.0 < 0.0 {
        return Err(SepError::Config(
            "norm-estimation box must be nonempty with t >= 0".into(),
        ));
    }

    let mut sigma_sup: f64 = f64::NEG_INFINITY;
    let mut sigma_inf: f64 = f64::INFINITY;
    let mut sigma_inf_witness = (t_range.0, a_range.0);
    let mut drift: f64 = 0.0;
    let mut dt_mu: f64 = 0.0;
    let mut da_mu: f64 = 0.0;
    let mut dt_sigma: f64 = 0.0;
    let mut da_sigma: f64 = 0.0;
    let mut inf_term: f64 = f64::INFINITY;
    let mut inf_witness = (t_range.0, a_range.0);

    for it in 0..nt {
        let t = t_range.0 + (t_range.1 - t_range.0) * it as f64 / (nt - 1) as f64;
        for ia in 0..na {
            let a = a_range.0 + (a_range.1 - a_range.0) * ia as f64 / (na - 1) as f64;
            let s = field.sigma_unchecked(t, a);
            let m = field.mu(t, a);
            let dtm = field.d_t_mu(t, a);
            let dam = field.d_a_mu(t, a);
            let dts = field.d_t_sigma(t, a);
            let das = field.d_a_sigma(t, a);
            for (name, v) in [
                ("sigma", s),
                ("mu", m),
                ("d_t_mu", dtm),
                ("d_a_mu", dam),
                ("d_t_sigma", dts),
                ("d_a_sigma", das),
            ] {
                if !v.is_finite() {
                    return Err(SepError::Evaluation {
                        t,
                        a,
                        detail: format!("{name} evaluated to {v}"),
                    });
                }
            }
            let s2 = s * s;
            sigma_sup = sigma_sup.max(s);
            if s < sigma_inf {
                sigma_inf = s;
                sigma_inf_witness = (t, a);
            }
            drift = drift.max((m / s2).abs());
            dt_mu = dt_mu.max((dtm / s2).abs());
            da_mu = da_mu.max((dam / s2).abs());
            dt_sigma = dt_sigma.max((dts / s).abs());
            da_sigma = da_sigma.max((das / s).abs());
            let term = (s * dam - 2.0 * das * m) / (s2 * s);
            if term < inf_term {
                inf_term = term;
                inf_witness = (t, a);
            }
        }
    }

    Ok(NormSet {
        sigma_sup,
        drift_ratio_sup: drift,
        dt_mu_ratio_sup: dt_mu,
        da_mu_ratio_sup: da_mu,
        dt_sigma_ratio_sup: dt_sigma,
        da_sigma_ratio_sup: da_sigma,
        inf_term,
        provenance: NormProvenance::GridEstimated,
        inf_term_witness: Some(inf_witness),
        sigma_inf: Some(sigma_inf),
        sigma_inf_witness: Some(sigma_inf_witness),
    })
}
