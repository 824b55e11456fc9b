//! Assumption checking and the a-priori constants.
//!
//! Everything here is a pure function of the declared (or grid-estimated)
//! norms: the admissibility checks, the hard bounds `z_check <= Z <= z_hat`
//! on the control process, the bound on the second space derivative of the
//! decoupling field, and the deterministic interval containing the embedding
//! stopping time.

use crate::error::{Result, SepError};
use crate::model::{CoefficientField, NormProvenance, SignCase, TargetLaw};

/// Which sign branch the admissibility condition was verified under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionCase {
    I,
    II,
    III,
}

/// A named inequality that failed, with a witness point when one is known
/// (grid-estimated norms carry the grid point attaining the violation).
#[derive(Debug, Clone)]
pub struct FailedCheck {
    pub name: &'static str,
    pub detail: String,
    pub witness: Option<(f64, f64)>,
}

/// Outcome of the admissibility check. Failures are data, not errors.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub holds: bool,
    pub case: Option<AssumptionCase>,
    pub failed_checks: Vec<FailedCheck>,
    /// inf over (t, a) of (sigma ∂a mu − 2 ∂a sigma mu) / sigma³
    pub inf_term: f64,
    pub provenance: NormProvenance,
}

/// Hard bounds for the control process and the stopping time.
#[derive(Debug, Clone, Copy)]
pub struct ZBounds {
    pub z_hat: f64,
    pub z_check: f64,
    pub u2_norm_bound: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

/// Check ellipticity, norm finiteness, the gradient-bound inequality
/// `inf_term > −1/(2‖g'‖∞²)` and the sign condition.
pub fn check_assumptions(field: &CoefficientField, law: &TargetLaw) -> AssumptionReport {
    let mut failed: Vec<FailedCheck> = Vec::new();

    let Some(norms) = field.norms.as_ref() else {
        return AssumptionReport {
            holds: false,
            case: None,
            failed_checks: vec![FailedCheck {
                name: "norms_populated",
                detail: "no norm record on the coefficient field; declare norms or estimate them on a grid".into(),
                witness: None,
            }],
            inf_term: f64::NAN,
            provenance: NormProvenance::Declared,
        };
    };

    if !(field.epsilon > 0.0) {
        failed.push(FailedCheck {
            name: "ellipticity",
            detail: format!("epsilon = {} must be positive", field.epsilon),
            witness: None,
        });
    }
    if let Some(smin) = norms.sigma_inf {
        if smin < field.epsilon {
            failed.push(FailedCheck {
                name: "ellipticity",
                detail: format!(
                    "grid minimum of sigma = {smin} lies below the declared floor {}",
                    field.epsilon
                ),
                witness: norms.sigma_inf_witness,
            });
        }
    }

    if !norms.all_sups_finite() {
        failed.push(FailedCheck {
            name: "norm_finiteness",
            detail: "one of the six ratio norms is not finite and nonnegative".into(),
            witness: None,
        });
    }
    if !(law.g_prime_sup.is_finite() && law.g_prime_sup > 0.0) {
        failed.push(FailedCheck {
            name: "g_prime_sup",
            detail: format!("‖g'‖∞ = {} must be positive and finite", law.g_prime_sup),
            witness: None,
        });
    }

    // Gradient-bound inequality.
    let threshold = -1.0 / (2.0 * law.g_prime_sup * law.g_prime_sup);
    if !(norms.inf_term > threshold) {
        failed.push(FailedCheck {
            name: "gradient_bound_inequality",
            detail: format!(
                "inf (sigma ∂a mu − 2 ∂a sigma mu)/sigma³ = {} must exceed −1/(2‖g'‖∞²) = {threshold}",
                norms.inf_term
            ),
            witness: norms.inf_term_witness,
        });
    }

    let case = match field.sign_case {
        SignCase::ASigmaZero => Some(AssumptionCase::I),
        SignCase::CaseII => Some(AssumptionCase::II),
        SignCase::CaseIII => Some(AssumptionCase::III),
        SignCase::Unknown => None,
    };
    if case.is_none() {
        failed.push(FailedCheck {
            name: "sign_case",
            detail: "no sign branch holds for (∂a sigma, 2 ∂t sigma mu − sigma ∂t mu)".into(),
            witness: None,
        });
    }

    AssumptionReport {
        holds: failed.is_empty(),
        case,
        failed_checks: failed,
        inf_term: norms.inf_term,
        provenance: norms.provenance,
    }
}

/// Upper bound `z_hat = (1/‖g'‖∞² + 2 min{0, inf_term})^{-1/2}`.
pub fn compute_z_upper(report: &AssumptionReport, law: &TargetLaw) -> Result<f64> {
    if !report.holds {
        return Err(SepError::AssumptionViolated(
            "cannot compute the upper Z bound: assumptions do not hold".into(),
        ));
    }
    let arg = 1.0 / (law.g_prime_sup * law.g_prime_sup) + 2.0 * report.inf_term.min(0.0);
    if !(arg > 0.0) {
        return Err(SepError::AssumptionViolated(format!(
            "inverse-square-root argument {arg} is not positive; norms are numerically inconsistent"
        )));
    }
    Ok(1.0 / arg.sqrt())
}

/// Bound on ‖∂x₂u‖∞:
/// `exp[z_hat²(‖∂a mu/σ²‖ + 2(‖∂a σ/σ‖·‖mu/σ²‖ + ε⁻²‖∂t σ/σ‖))]
///  · z_hat²(2‖∂t σ/σ‖·‖mu/σ²‖ + ‖∂t mu/σ²‖)`.
///
/// Requires a populated norm record; vanishes with the time-derivative norms.
pub fn compute_u2_bound(z_hat: f64, field: &CoefficientField) -> f64 {
    let n = field
        .norms
        .as_ref()
        .expect("compute_u2_bound requires populated norms");
    let z2 = z_hat * z_hat;
    let eps2 = field.epsilon * field.epsilon;
    let exponent = z2
        * (n.da_mu_ratio_sup
            + 2.0 * (n.da_sigma_ratio_sup * n.drift_ratio_sup + n.dt_sigma_ratio_sup / eps2));
    exponent.exp() * z2 * (2.0 * n.dt_sigma_ratio_sup * n.drift_ratio_sup + n.dt_mu_ratio_sup)
}

/// Lower bound
/// `z_check = (‖1/g'‖∞ + z_hat·(‖∂a mu/σ²‖ + 2‖mu/σ²‖·‖∂a σ/σ‖
///             + 2 ε⁻² u2 ‖∂a σ/σ‖))^{-1}`.
pub fn compute_z_lower(
    z_hat: f64,
    u2_bound: f64,
    field: &CoefficientField,
    law: &TargetLaw,
) -> Result<f64> {
    let Some(inv) = law.inv_g_prime_sup else {
        return Err(SepError::Mode(
            "‖1/g'‖∞ is not declared; the lower Z bound needs it (weak-mode targets may omit it)"
                .into(),
        ));
    };
    let n = field
        .norms
        .as_ref()
        .expect("compute_z_lower requires populated norms");
    let eps2 = field.epsilon * field.epsilon;
    let bracket = n.da_mu_ratio_sup
        + 2.0 * n.drift_ratio_sup * n.da_sigma_ratio_sup
        + 2.0 / eps2 * u2_bound * n.da_sigma_ratio_sup;
    let z_check = 1.0 / (inv + z_hat * bracket);
    if !(z_check > 0.0) || z_check > z_hat * (1.0 + 1e-9) {
        return Err(SepError::AssumptionViolated(format!(
            "lower Z bound {z_check} does not satisfy 0 < z_check <= z_hat = {z_hat}; declared norms are inconsistent"
        )));
    }
    // The chained inequality z_check <= 1/‖1/g'‖ <= ‖g'‖ <= z_hat can collapse
    // to equalities; keep the interval nonempty under round-off.
    Ok(z_check.min(z_hat))
}

/// Deterministic stopping-time interval `[z_check²/‖σ‖∞², z_hat²/ε²]`.
pub fn compute_tau_bounds(z_hat: f64, z_check: f64, field: &CoefficientField) -> (f64, f64) {
    let sigma_sup = field
        .norms
        .as_ref()
        .expect("compute_tau_bounds requires populated norms")
        .sigma_sup;
    let tau_lo = z_check * z_check / (sigma_sup * sigma_sup);
    let tau_hi = z_hat * z_hat / (field.epsilon * field.epsilon);
    (tau_lo, tau_hi)
}

/// All constants at once for a checked model.
pub fn derive_z_bounds(
    report: &AssumptionReport,
    field: &CoefficientField,
    law: &TargetLaw,
) -> Result<ZBounds> {
    let z_hat = compute_z_upper(report, law)?;
    let u2 = compute_u2_bound(z_hat, field);
    let z_check = compute_z_lower(z_hat, u2, field, law)?;
    let (tau_lo, tau_hi) = compute_tau_bounds(z_hat, z_check, field);
    Ok(ZBounds {
        z_hat,
        z_check,
        u2_norm_bound: u2,
        tau_lo,
        tau_hi,
    })
}
