// Scratch diagnostic for the sigmoid experiment (not part of the test suite).
use sep_core::analysis::{check_assumptions, derive_z_bounds};
use sep_core::model::{SigmoidFamily, TargetLaw};
use sep_core::paths::make_stores;
use sep_core::solver::{picard_solve, SolverConfig};
use sep_core::verify::{dagostino_pearson, ks_test, run_verification};

fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (mean, m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2))
}

fn main() {
    let fam = SigmoidFamily::new([2.0, 0.5, 2.0], [1.5, -2.5, 0.5]).unwrap();
    let law = TargetLaw::normal(1.0).unwrap();
    let field = fam.field(1.0).unwrap();
    let report = check_assumptions(&field, &law);
    let zb = derive_z_bounds(&report, &field, &law).unwrap();

    let args: Vec<String> = std::env::args().collect();
    let n_paths: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20_000);
    let n_sub: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200);
    let seeds: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);

    for seed in 0..seeds {
        let mut cfg = SolverConfig::new(20, n_paths, 50, 72_020 + seed);
        cfg.tol_picard = 1e-12;
        let mut stores = make_stores(cfg.seed, cfg.n_paths);
        let t0 = std::time::Instant::now();
        let res = picard_solve(&cfg, &field, &law, &zb, &mut stores).unwrap();
        let t1 = t0.elapsed();
        let rep = run_verification(&field, &law, &zb, res.y0, &res.tau, &mut stores, n_sub, 50)
            .unwrap();
        let t2 = t0.elapsed();
        let (mean, sd, skew, kurt) = moments(&rep.a_tau_samples);
        let (k2, p) = dagostino_pearson(&rep.a_tau_samples).unwrap();
        let (_, ksp) = ks_test(&rep.a_tau_samples, |x| law.cdf(x));

        // Pipeline decomposition: in exact arithmetic A_tau = g(W_1).
        let gw1: Vec<f64> = (0..cfg.n_paths).map(|p| law.g(res.state.w_terminal(p))).collect();
        let gap: Vec<f64> = rep
            .a_tau_samples
            .iter()
            .zip(&gw1)
            .map(|(a, g)| a - g)
            .collect();
        let (gw_mean, gw_sd, gw_skew, gw_kurt) = moments(&gw1);
        let (gap_mean, gap_sd, gap_skew, _) = moments(&gap);
        println!(
            "  g(W1): mean={gw_mean:.4} sd={gw_sd:.4} skew={gw_skew:.4} kurt={gw_kurt:.4}   A-g(W1): mean={gap_mean:.4} sd={gap_sd:.4} skew={gap_skew:.4}"
        );
        let tau_min = res.tau.iter().copied().fold(f64::INFINITY, f64::min);
        let tau_max = res.tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "seed {} y0={:.4} tau=[{:.4},{:.4}] A: mean={:.4} sd={:.4} skew={:.4} kurt={:.4} K2={:.2} dp_p={:.4} ks_p={:.4} iters={} solve={:.1?} verify={:.1?}",
            seed, res.y0, tau_min, tau_max, mean, sd, skew, kurt, k2, p, ksp,
            res.iterations_used, t1, t2 - t1
        );
        let h = &res.convergence_history;
        println!("  conv tail: {:?}", &h[h.len().saturating_sub(5)..]);
    }
}
