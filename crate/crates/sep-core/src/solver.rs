//! Picard-iterated, truncated, explicit-Euler solver for the coupled system.
//!
//! Strong mode takes the Brownian motion `B` as the primitive (one lazily
//! refined trajectory per path) and reconstructs the inner Brownian motion `W`
//! from `B` increments read along the random clock; weak mode simulates `W`
//! directly on the grid and reconstructs `B` afterwards. Each Picard iterate
//! runs one forward Euler sweep for `(X², X³, W)` followed by one backward
//! sweep for `(Y, Z)` with least-squares Monte Carlo conditional expectations
//! and the variance-reduced `Z` estimator.
//!
//! The scheme clamps every consumed `Z` to the a-priori interval
//! `[z_check, z_hat]`, which keeps the clock increments inside a deterministic
//! sandwich and hence every stopping time inside `[tau_lo, tau_hi]` by
//! construction. There is no convergence proof for the Picard loop; any
//! non-finite intermediate aborts with diagnostics instead of truncating.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::analysis::ZBounds;
use crate::error::{Result, SepError};
use crate::model::{CoefficientField, NormProvenance, TargetLaw};
use crate::paths::{PathStore, RngStream};
use crate::regression::{cond_expectation, BasisSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// `B` primitive, `W` reconstructed; yields a stopping time adapted to `B`.
    Strong,
    /// `W` primitive, `B` reconstructed afterwards.
    Weak,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Uniform grid steps on [0, 1].
    pub n_steps: usize,
    pub n_paths: usize,
    /// Picard iteration cap.
    pub n_iterations: usize,
    /// Early-stop threshold on the RMS of the Y-update over paths × grid.
    pub tol_picard: f64,
    pub mode: SolveMode,
    pub seed: u64,
    pub basis: BasisSpec,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl SolverConfig {
    pub fn new(n_steps: usize, n_paths: usize, n_iterations: usize, seed: u64) -> Self {
        Self {
            n_steps,
            n_paths,
            n_iterations,
            tol_picard: 1e-4,
            mode: SolveMode::Strong,
            seed,
            basis: BasisSpec::new(3, 2),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(SepError::Config(format!(
                "need at least 2 time steps, got {}",
                self.n_steps
            )));
        }
        if self.n_iterations == 0 {
            return Err(SepError::Config("need at least 1 Picard iteration".into()));
        }
        if !(self.tol_picard > 0.0) {
            return Err(SepError::Config(format!(
                "tol_picard must be positive, got {}",
                self.tol_picard
            )));
        }
        if self.n_paths < self.basis.basis_size().max(2) {
            return Err(SepError::Config(format!(
                "need at least {} paths for a basis of size {}",
                self.basis.basis_size().max(2),
                self.basis.basis_size()
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }
}

/// Per-path, per-grid-time arrays of one Picard iterate, path-major.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub n_paths: usize,
    pub n_steps: usize,
    pub w: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Scalar Y at time 0 (trivial sigma-algebra).
    pub y0: f64,
    /// Picard iterate index; 0 is the initial guess.
    pub iteration: usize,
}

impl IterationState {
    fn zeros(n_paths: usize, n_steps: usize) -> Self {
        let len = n_paths * (n_steps + 1);
        Self {
            n_paths,
            n_steps,
            w: vec![0.0; len],
            x2: vec![0.0; len],
            x3: vec![0.0; len],
            y: vec![0.0; len],
            z: vec![0.0; len],
            y0: 0.0,
            iteration: 0,
        }
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn at(&self, array: &[f64], path: usize, step: usize) -> f64 {
        array[path * (self.n_steps + 1) + step]
    }

    pub fn w_terminal(&self, path: usize) -> f64 {
        self.at(&self.w, path, self.n_steps)
    }

    pub fn tau(&self, path: usize) -> f64 {
        self.at(&self.x2, path, self.n_steps)
    }

    fn has_non_finite(&self) -> bool {
        self.w
            .iter()
            .chain(&self.x2)
            .chain(&self.x3)
            .chain(&self.y)
            .chain(&self.z)
            .any(|v| !v.is_finite())
    }
}

/// Output of a Picard solve.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub state: IterationState,
    pub y0: f64,
    /// Monte Carlo standard error of `y0`.
    pub y0_stderr: f64,
    /// Per-path stopping time `tau = X²` at the terminal grid point.
    pub tau: Vec<f64>,
    pub iterations_used: usize,
    /// RMS of the Y-update per iteration.
    pub convergence_history: Vec<f64>,
}

/// Weak-mode output: the solve plus the reconstructed driving path skeleton,
/// one `(physical time, B value)` sequence per path.
#[derive(Debug, Clone)]
pub struct WeakOutput {
    pub result: PicardResult,
    pub b_points: Vec<Vec<(f64, f64)>>,
}

/// Decoupled-oracle output for time-homogeneous coefficients.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub y0: f64,
    pub y0_stderr: f64,
    pub tau: Vec<f64>,
}

/// Clamp to the a-priori interval `[z_check, z_hat]`.
#[inline]
pub fn truncate_z(z: f64, zb: &ZBounds) -> f64 {
    z.max(zb.z_check).min(zb.z_hat)
}

/// Initial Picard iterate: `Z ≡ ‖g'‖∞`, everything else zero.
pub fn init_iterate(cfg: &SolverConfig, law: &TargetLaw) -> IterationState {
    let mut state = IterationState::zeros(cfg.n_paths, cfg.n_steps);
    state.z.fill(law.g_prime_sup);
    state
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| SepError::Config(format!("cannot build worker pool: {e}")))
}

/// One forward Euler sweep in strong mode: writes `(X², X³, W)` of the next
/// iterate from the previous iterate's `(Y, Z)`, pulling `B` increments from
/// each path's store at the freshly computed clock times.
pub fn forward_pass(
    prev: &IterationState,
    next: &mut IterationState,
    stores: &mut [PathStore],
    field: &CoefficientField,
    zb: &ZBounds,
) -> Result<()> {
    let n = prev.n_steps;
    let cols = n + 1;
    let dt = 1.0 / n as f64;
    let declared = field
        .norms
        .as_ref()
        .map(|ns| ns.provenance == NormProvenance::Declared)
        .unwrap_or(false);
    let sigma_sup = field.norms.as_ref().map(|ns| ns.sigma_sup).unwrap_or(f64::INFINITY);
    let incr_lo = dt * (zb.z_check / sigma_sup).powi(2);
    let incr_hi = dt * (zb.z_hat / field.epsilon).powi(2);

    next.x2
        .par_chunks_mut(cols)
        .zip(next.x3.par_chunks_mut(cols))
        .zip(next.w.par_chunks_mut(cols))
        .zip(prev.y.par_chunks(cols))
        .zip(prev.z.par_chunks(cols))
        .zip(stores.par_iter_mut())
        .try_for_each(|(((((x2, x3), w), y_prev), z_prev), store)| -> Result<()> {
            x2[0] = 0.0;
            x3[0] = 0.0;
            w[0] = 0.0;
            let mut b_prev = store.sample_at(0.0)?;
            for i in 0..n {
                let tz = truncate_z(z_prev[i], zb);
                let t = x2[i];
                let a = y_prev[i] + x3[i];
                let sig = field.sigma(t, a)?;
                let m = field.mu(t, a);
                let ratio = tz / sig;
                let incr = dt * ratio * ratio;
                if declared {
                    assert!(
                        incr >= incr_lo * (1.0 - 1e-12) && incr <= incr_hi * (1.0 + 1e-12),
                        "clock increment {incr} outside [{incr_lo}, {incr_hi}]"
                    );
                }
                x2[i + 1] = x2[i] + incr;
                x3[i + 1] = x3[i] + incr * m;
                if !(x2[i + 1].is_finite() && x3[i + 1].is_finite()) {
                    return Err(SepError::Domain(format!(
                        "non-finite forward state at grid index {i}"
                    )));
                }
                let b_next = store.sample_at(x2[i + 1])?;
                w[i + 1] = w[i] + (sig / tz) * (b_next - b_prev);
                b_prev = b_next;
            }
            Ok(())
        })
}

/// Forward sweep in weak mode: `W` is the primitive Brownian motion (given on
/// the grid, fixed across iterations); only `(X², X³)` are advanced.
fn forward_pass_weak(
    prev: &IterationState,
    next: &mut IterationState,
    w_fixed: &[f64],
    field: &CoefficientField,
    zb: &ZBounds,
) -> Result<()> {
    let n = prev.n_steps;
    let cols = n + 1;
    let dt = 1.0 / n as f64;

    next.x2
        .par_chunks_mut(cols)
        .zip(next.x3.par_chunks_mut(cols))
        .zip(next.w.par_chunks_mut(cols))
        .zip(prev.y.par_chunks(cols))
        .zip(prev.z.par_chunks(cols))
        .zip(w_fixed.par_chunks(cols))
        .try_for_each(|(((((x2, x3), w), y_prev), z_prev), wf)| -> Result<()> {
            w.copy_from_slice(wf);
            x2[0] = 0.0;
            x3[0] = 0.0;
            for i in 0..n {
                let tz = truncate_z(z_prev[i], zb);
                let t = x2[i];
                let a = y_prev[i] + x3[i];
                let sig = field.sigma(t, a)?;
                let m = field.mu(t, a);
                let ratio = tz / sig;
                let incr = dt * ratio * ratio;
                x2[i + 1] = x2[i] + incr;
                x3[i + 1] = x3[i] + incr * m;
                if !(x2[i + 1].is_finite() && x3[i + 1].is_finite()) {
                    return Err(SepError::Domain(format!(
                        "non-finite forward state at grid index {i}"
                    )));
                }
            }
            Ok(())
        })
}

/// Backward sweep: terminal condition `Y = g(W₁) − X³₁`, then per time index
/// two regressions on the state `(W, X², X³)` at the earlier grid point — the
/// conditional expectation of `Y` and the variance-reduced `Z` estimator. At
/// the first grid point the conditioning sigma-algebra is trivial and plain
/// sample means replace the regressions.
pub fn backward_pass(
    next: &mut IterationState,
    law: &TargetLaw,
    basis: &BasisSpec,
) -> Result<(f64, f64)> {
    let n = next.n_steps;
    let cols = n + 1;
    let m = next.n_paths;
    let dt = 1.0 / n as f64;

    // Terminal condition.
    {
        let x3 = &next.x3;
        let w = &next.w;
        next.y
            .par_chunks_mut(cols)
            .zip(w.par_chunks(cols))
            .zip(x3.par_chunks(cols))
            .for_each(|((y, w), x3)| {
                y[n] = law.g(w[n]) - x3[n];
            });
    }
    let mut terminal_mean = 0.0;
    for p in 0..m {
        let v = next.y[p * cols + n];
        if !v.is_finite() {
            return Err(SepError::Domain(format!(
                "non-finite terminal value on path {p}"
            )));
        }
        terminal_mean += v;
    }
    terminal_mean /= m as f64;
    let mut terminal_var = 0.0;
    for p in 0..m {
        let d = next.y[p * cols + n] - terminal_mean;
        terminal_var += d * d;
    }
    terminal_var /= m as f64;

    let mut states = DMatrix::<f64>::zeros(m, 3);
    let mut targets = DVector::<f64>::zeros(m);
    let mut ztargets = DVector::<f64>::zeros(m);

    for i in (2..=n).rev() {
        for p in 0..m {
            let base = p * cols;
            states[(p, 0)] = next.w[base + i - 1];
            states[(p, 1)] = next.x2[base + i - 1];
            states[(p, 2)] = next.x3[base + i - 1];
            targets[p] = next.y[base + i];
        }
        let (fitted_y, _) = cond_expectation(basis, &states, &targets)?;
        for p in 0..m {
            let base = p * cols;
            let residual = targets[p] - fitted_y[p];
            ztargets[p] = residual * (next.w[base + i] - next.w[base + i - 1]) / dt;
        }
        let (fitted_z, _) = cond_expectation(basis, &states, &ztargets)?;
        let mut mean_t = 0.0;
        let mut mean_f = 0.0;
        for p in 0..m {
            let base = p * cols;
            next.y[base + i - 1] = fitted_y[p];
            next.z[base + i - 1] = fitted_z[p];
            mean_t += targets[p];
            mean_f += fitted_y[p];
        }
        mean_t /= m as f64;
        mean_f /= m as f64;
        if !(mean_t.is_finite() && mean_f.is_finite()) {
            return Err(SepError::Domain(format!(
                "non-finite conditional expectation at step {i}"
            )));
        }
        let scale = 1.0 + mean_t.abs().max(targets.amax());
        assert!(
            (mean_t - mean_f).abs() <= 1e-10 * scale,
            "conditional-expectation fit lost the mean at step {i}: {mean_t} vs {mean_f}"
        );
    }

    // Trivial sigma-algebra at the first grid point.
    let mut mean_y1 = 0.0;
    for p in 0..m {
        mean_y1 += next.y[p * cols + 1];
    }
    mean_y1 /= m as f64;
    let mut z0 = 0.0;
    for p in 0..m {
        let base = p * cols;
        let residual = next.y[base + 1] - mean_y1;
        z0 += residual * (next.w[base + 1] - next.w[base]) / dt;
    }
    z0 /= m as f64;
    for p in 0..m {
        let base = p * cols;
        next.y[base] = mean_y1;
        next.z[base] = z0;
        // Z at the terminal grid point is never consumed; carry it over.
        next.z[base + n] = next.z[base + n - 1];
    }
    next.y0 = mean_y1;
    // Every fit preserves the target mean, so y0 equals the sample mean of
    // the i.i.d. terminal values; its Monte Carlo error comes from their
    // spread, not from the (cross-path correlated) fitted values at t_1.
    let stderr = (terminal_var / m as f64).sqrt();
    Ok((mean_y1, stderr))
}

fn rms_y_change(a: &IterationState, b: &IterationState) -> f64 {
    let mut acc = 0.0;
    for (u, v) in a.y.iter().zip(&b.y) {
        let d = u - v;
        acc += d * d;
    }
    (acc / a.y.len() as f64).sqrt()
}

fn run_picard(
    cfg: &SolverConfig,
    law: &TargetLaw,
    mut forward: impl FnMut(&IterationState, &mut IterationState) -> Result<()>,
) -> Result<PicardResult> {
    cfg.validate()?;
    let mut basis = cfg.basis;
    basis.dimension = 3;

    let mut prev = init_iterate(cfg, law);
    let mut next = IterationState::zeros(cfg.n_paths, cfg.n_steps);
    let mut history = Vec::with_capacity(cfg.n_iterations);
    let mut y0 = 0.0;
    let mut y0_stderr = 0.0;
    let mut iterations_used = 0;

    for k in 0..cfg.n_iterations {
        let as_divergence = |e: SepError| match e {
            SepError::Domain(detail) => SepError::Diverged {
                iteration: k + 1,
                detail,
            },
            other => other,
        };
        forward(&prev, &mut next).map_err(as_divergence)?;
        let (m, se) = backward_pass(&mut next, law, &basis).map_err(as_divergence)?;
        y0 = m;
        y0_stderr = se;
        next.iteration = k + 1;
        if next.has_non_finite() {
            return Err(SepError::Diverged {
                iteration: k + 1,
                detail: "non-finite value in the iterate".into(),
            });
        }
        let rms = rms_y_change(&next, &prev);
        history.push(rms);
        std::mem::swap(&mut prev, &mut next);
        iterations_used = k + 1;
        if rms < cfg.tol_picard {
            break;
        }
    }

    let tau: Vec<f64> = (0..cfg.n_paths).map(|p| prev.tau(p)).collect();
    Ok(PicardResult {
        y0,
        y0_stderr,
        tau,
        iterations_used,
        convergence_history: history,
        state: prev,
    })
}

/// Solve the coupled system in strong mode against the given per-path stores.
///
/// The caller owns the stores (one per path, usually from
/// [`crate::paths::make_stores`]) so that verification can afterwards drive
/// the diffusion with the very same Brownian trajectories.
pub fn picard_solve(
    cfg: &SolverConfig,
    field: &CoefficientField,
    law: &TargetLaw,
    zb: &ZBounds,
    stores: &mut [PathStore],
) -> Result<PicardResult> {
    if stores.len() != cfg.n_paths {
        return Err(SepError::Config(format!(
            "{} stores for {} paths",
            stores.len(),
            cfg.n_paths
        )));
    }
    let pool = build_pool(cfg.workers)?;
    pool.install(|| {
        run_picard(cfg, law, |prev, next| {
            forward_pass(prev, next, stores, field, zb)
        })
    })
}

/// Solve the system in weak mode: `W` simulated directly on the grid, the
/// backward pass unchanged, and `B` reconstructed afterwards on the
/// time-changed grid through `ΔB = ΔY / sigma` along each path.
pub fn solve_weak(
    cfg: &SolverConfig,
    field: &CoefficientField,
    law: &TargetLaw,
    zb: &ZBounds,
) -> Result<WeakOutput> {
    let pool = build_pool(cfg.workers)?;
    pool.install(|| {
        let n = cfg.n_steps;
        let cols = n + 1;
        let sqrt_dt = cfg.dt().sqrt();
        let mut w_fixed = vec![0.0; cfg.n_paths * cols];
        w_fixed.par_chunks_mut(cols).enumerate().for_each(|(p, w)| {
            let mut stream = RngStream::new(cfg.seed, p as u64);
            for i in 0..n {
                w[i + 1] = w[i] + sqrt_dt * stream.next_normal();
            }
        });

        let result = run_picard(cfg, law, |prev, next| {
            forward_pass_weak(prev, next, &w_fixed, field, zb)
        })?;

        let state = &result.state;
        let mut b_points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.n_paths];
        b_points
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(p, pts)| -> Result<()> {
                let base = p * cols;
                pts.reserve(cols);
                pts.push((0.0, 0.0));
                let mut b = 0.0;
                for i in 0..n {
                    let t = state.x2[base + i];
                    let a = state.y[base + i] + state.x3[base + i];
                    let sig = field.sigma(t, a)?;
                    b += (state.y[base + i + 1] - state.y[base + i]) / sig;
                    pts.push((state.x2[base + i + 1], b));
                }
                Ok(())
            })?;

        Ok(WeakOutput { result, b_points })
    })
}

/// Decoupled oracle for time-homogeneous coefficients: backward LSMC for the
/// truncated-driver BSDE on the primitive `W` grid, then the clock by
/// quadrature. Cross-checks the coupled solver.
pub fn solve_homogeneous_oracle(
    cfg: &SolverConfig,
    field: &CoefficientField,
    law: &TargetLaw,
    zb: &ZBounds,
) -> Result<OracleResult> {
    if !field.time_homogeneous {
        return Err(SepError::Mode(
            "the decoupled oracle needs time-independent coefficients".into(),
        ));
    }
    cfg.validate()?;
    let pool = build_pool(cfg.workers)?;
    pool.install(|| {
        let n = cfg.n_steps;
        let cols = n + 1;
        let m = cfg.n_paths;
        let dt = cfg.dt();
        let sqrt_dt = dt.sqrt();
        let basis = BasisSpec {
            dimension: 1,
            degree: cfg.basis.degree,
            ridge: cfg.basis.ridge,
        };

        let mut w = vec![0.0; m * cols];
        w.par_chunks_mut(cols).enumerate().for_each(|(p, w)| {
            let mut stream = RngStream::new(cfg.seed, p as u64);
            for i in 0..n {
                w[i + 1] = w[i] + sqrt_dt * stream.next_normal();
            }
        });

        let mut y = vec![0.0; m * cols];
        let mut z = vec![0.0; m * cols];
        let mut terminal_mean = 0.0;
        for p in 0..m {
            let v = law.g(w[p * cols + n]);
            if !v.is_finite() {
                return Err(SepError::Domain(format!(
                    "non-finite terminal value on path {p}"
                )));
            }
            y[p * cols + n] = v;
            terminal_mean += v;
        }
        terminal_mean /= m as f64;
        let mut terminal_var = 0.0;
        for p in 0..m {
            let d = y[p * cols + n] - terminal_mean;
            terminal_var += d * d;
        }
        terminal_var /= m as f64;

        let driver = |yv: f64, zv: f64| -> Result<f64> {
            let sig = field.sigma(0.0, yv)?;
            Ok(field.mu(0.0, yv) * zv * zv / (sig * sig))
        };

        let mut states = DMatrix::<f64>::zeros(m, 1);
        let mut targets = DVector::<f64>::zeros(m);
        let mut ztargets = DVector::<f64>::zeros(m);
        for i in (2..=n).rev() {
            for p in 0..m {
                let base = p * cols;
                states[(p, 0)] = w[base + i - 1];
                targets[p] = y[base + i];
            }
            let (ey, _) = cond_expectation(&basis, &states, &targets)?;
            for p in 0..m {
                let base = p * cols;
                ztargets[p] = (targets[p] - ey[p]) * (w[base + i] - w[base + i - 1]) / dt;
            }
            let (ez, _) = cond_expectation(&basis, &states, &ztargets)?;
            for p in 0..m {
                let base = p * cols;
                let tz = truncate_z(ez[p], zb);
                y[base + i - 1] = ey[p] - dt * driver(ey[p], tz)?;
                z[base + i - 1] = ez[p];
            }
        }

        let mut mean_y1 = 0.0;
        for p in 0..m {
            mean_y1 += y[p * cols + 1];
        }
        mean_y1 /= m as f64;
        let mut z0 = 0.0;
        for p in 0..m {
            let base = p * cols;
            let residual = y[base + 1] - mean_y1;
            z0 += residual * (w[base + 1] - w[base]) / dt;
        }
        z0 /= m as f64;
        let y0 = mean_y1 - dt * driver(mean_y1, truncate_z(z0, zb))?;
        for p in 0..m {
            z[p * cols] = z0;
        }

        // Clock by quadrature of (T(Z)/sigma(Y))² along each path.
        let mut tau = vec![0.0; m];
        for p in 0..m {
            let base = p * cols;
            let mut x2 = 0.0;
            for i in 0..n {
                let yv = if i == 0 { y0 } else { y[base + i] };
                let tz = truncate_z(z[base + i], zb);
                let sig = field.sigma(0.0, yv)?;
                x2 += dt * (tz / sig) * (tz / sig);
            }
            tau[p] = x2;
        }

        Ok(OracleResult {
            y0,
            y0_stderr: (terminal_var / m as f64).sqrt(),
            tau,
        })
    })
}
