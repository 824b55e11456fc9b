//! Least-squares projection of conditional expectations on polynomial bases.
//!
//! Regressors are standardized (affine map to zero mean and unit scale per
//! coordinate) before the monomial expansion; the forward state components
//! live on very different scales and raw monomials produce singular normal
//! equations. The fit solves a ridge-regularized least-squares problem by QR,
//! leaving the constant column unpenalized so that fitted values preserve the
//! target mean exactly up to round-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SepError};

/// Polynomial basis: all monomials in `dimension` regressors up to total
/// `degree`, in graded-lexicographic order with the constant first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub dimension: usize,
    pub degree: usize,
    /// Ridge weight applied to non-constant coefficients in standardized
    /// coordinates. Keeps early Picard iterates with degenerate state clouds
    /// (identically-zero regressors) solvable.
    pub ridge: f64,
}

impl BasisSpec {
    pub const DEFAULT_RIDGE: f64 = 1e-8;

    pub fn new(dimension: usize, degree: usize) -> Self {
        Self {
            dimension,
            degree,
            ridge: Self::DEFAULT_RIDGE,
        }
    }

    /// `C(dimension + degree, degree)`.
    pub fn basis_size(&self) -> usize {
        binomial(self.dimension + self.degree, self.degree)
    }

    /// Exponent tuples in graded-lexicographic order.
    pub fn exponents(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(self.basis_size());
        for total in 0..=self.degree as u32 {
            let mut prefix = Vec::with_capacity(self.dimension);
            push_exponents(self.dimension, total, &mut prefix, &mut out);
        }
        out
    }
}

fn push_exponents(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if dim == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=total).rev() {
        prefix.push(e);
        push_exponents(dim - 1, total - e, prefix, out);
        prefix.pop();
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Per-coordinate affine map `x ↦ (x − shift) / scale` applied before the
/// monomial expansion. A zero-variance coordinate keeps scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fit from an M × d state matrix. Sums run in index order so the result
    /// does not depend on any parallel schedule.
    pub fn fit(states: &DMatrix<f64>) -> Self {
        let (m, d) = states.shape();
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for c in 0..d {
            let mut sum = 0.0;
            for r in 0..m {
                sum += states[(r, c)];
            }
            let mean = sum / m as f64;
            let mut var = 0.0;
            for r in 0..m {
                let dev = states[(r, c)] - mean;
                var += dev * dev;
            }
            var /= m as f64;
            shift[c] = mean;
            scale[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { shift, scale }
    }
}

/// Result of one least-squares fit.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    /// Ratio of extreme diagonal magnitudes of the R factor.
    pub condition_estimate: f64,
    pub sample_count: usize,
    /// Affine regressor map used to build the design, when one was applied.
    pub standardizer: Option<Standardizer>,
}

/// Design matrix of all monomials of total degree ≤ `spec.degree` over the
/// standardized regressors, first column constant one.
pub fn design_matrix(spec: &BasisSpec, states: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardizer)> {
    let (m, d) = states.shape();
    if d != spec.dimension {
        return Err(SepError::Config(format!(
            "state matrix has {d} columns, basis expects {}",
            spec.dimension
        )));
    }
    for r in 0..m {
        for c in 0..d {
            if !states[(r, c)].is_finite() {
                return Err(SepError::Domain(format!(
                    "non-finite regressor at row {r}, column {c}"
                )));
            }
        }
    }
    let standardizer = Standardizer::fit(states);
    let design = expand(spec, states, &standardizer);
    Ok((design, standardizer))
}

fn expand(spec: &BasisSpec, states: &DMatrix<f64>, std: &Standardizer) -> DMatrix<f64> {
    let exps = spec.exponents();
    let (m, d) = states.shape();
    let k = exps.len();
    let mut design = DMatrix::<f64>::zeros(m, k);
    let mut z = vec![0.0f64; d];
    for r in 0..m {
        for c in 0..d {
            z[c] = (states[(r, c)] - std.shift[c]) / std.scale[c];
        }
        for (j, exp) in exps.iter().enumerate() {
            let mut v = 1.0;
            for (c, &e) in exp.iter().enumerate() {
                for _ in 0..e {
                    v *= z[c];
                }
            }
            design[(r, j)] = v;
        }
    }
    design
}

/// Minimize `‖design·β − targets‖² + ridge·‖β₁..‖²` (constant unpenalized) by
/// QR on the row-augmented system.
pub fn fit_least_squares(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    ridge: f64,
) -> Result<RegressionFit> {
    let (m, k) = design.shape();
    if m != targets.len() {
        return Err(SepError::Config(format!(
            "design has {m} rows but targets has {} entries",
            targets.len()
        )));
    }
    if m < k {
        return Err(SepError::InsufficientSamples { rows: m, basis: k });
    }
    if !(ridge >= 0.0) {
        return Err(SepError::Config(format!("ridge must be nonnegative, got {ridge}")));
    }

    let (a, b) = if ridge > 0.0 && k > 1 {
        let rows = m + k - 1;
        let mut a = DMatrix::<f64>::zeros(rows, k);
        a.view_mut((0, 0), (m, k)).copy_from(design);
        let sqrt_ridge = ridge.sqrt();
        for j in 1..k {
            a[(m + j - 1, j)] = sqrt_ridge;
        }
        let mut b = DVector::<f64>::zeros(rows);
        b.rows_mut(0, m).copy_from(targets);
        (a, b)
    } else {
        (design.clone(), targets.clone())
    };

    let qr = a.qr();
    let r = qr.r();
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for i in 0..k {
        let d = r[(i, i)].abs();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let condition_estimate = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };

    let rhs = qr.q().transpose() * b;
    let coeffs = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| SepError::Regression(format!(
            "singular design (condition estimate {condition_estimate}); consider a positive ridge"
        )))?;

    Ok(RegressionFit {
        coefficients: coeffs.iter().copied().collect(),
        condition_estimate,
        sample_count: m,
        standardizer: None,
    })
}

/// Longstaff–Schwartz-style in-sample projection: fit on the given states and
/// return the fitted values at those same states.
pub fn cond_expectation(
    spec: &BasisSpec,
    states: &DMatrix<f64>,
    targets: &DVector<f64>,
) -> Result<(Vec<f64>, RegressionFit)> {
    let (design, standardizer) = design_matrix(spec, states)?;
    let mut fit = fit_least_squares(&design, targets, spec.ridge)?;
    fit.standardizer = Some(standardizer);
    let coeffs = DVector::from_column_slice(&fit.coefficients);
    let fitted = design * coeffs;
    Ok((fitted.iter().copied().collect(), fit))
}
