//! Acceptance suite. Each test prints one PASS/FAIL line on stderr (written
//! directly, so it shows without `--nocapture`) and then asserts.
//!
//! Monte Carlo checks use one master seed fixed before any run; per-check
//! streams are derived from it.

use std::io::Write;

use kronlik::experiments::{
    bartlett_check, deletion_experiment, degeneracy_check, efficiency_table, haar_trace_moments, info_curve,
    tr_quad_covariance_check, ut_info_curve, BartlettConfig,
};
use kronlik::haar::{bipartition_pair_counts, product_and_cov_tr_quad};
use kronlik::likelihood::{
    distance_loglik_model_i, distance_loglik_model_ii, distance_score_model_i, distance_score_model_ii,
    markov_conditional_loglik, markov_conditional_score, ut_subgroup_loglik, ut_subgroup_score, DEGENERACY_GRID,
};
use kronlik::linalg::{sym_sqrt, symmetrized, trace_product};
use kronlik::projection::series_distances;
use kronlik::sampling::{derive_rng, derive_seed, haar_orthogonal, standard_normal_matrix};
use kronlik::stats::Z_LIMIT;
use kronlik::{
    distance_pair, efficiency_ii_vs_i, expected_info, gamma_of, make_projector, profile_loglik, score, Ar1Model,
    CovBundle, DesignMatrix, Matrix, ModelKind, ProfileKernel, SigmaSpec,
};
use rand::Rng;

const SEED: u64 = 1;

fn report(index: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {index:>2}/10 {name}: {verdict} ({detail})");
}

fn seed_for(check: u64) -> u64 {
    derive_seed(SEED, check)
}

const MODELS: [ModelKind; 3] = [ModelKind::I, ModelKind::II, ModelKind::III];

#[test]
fn bartlett_identities() {
    let n = 8;
    let reps = 50_000;
    let mut tests = 0;
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut config = 0u64;
    for p in [0usize, 1] {
        for beta in [0.0, 0.4, 0.8] {
            for model in MODELS {
                let k_max = if model == ModelKind::III { n - p } else { n };
                for k in 1..=k_max {
                    config += 1;
                    let r = bartlett_check(&BartlettConfig {
                        n,
                        k,
                        p,
                        beta,
                        model,
                        sigma: SigmaSpec::ScalarVar(1.0),
                        reps,
                        seed: seed_for(1_000 + config),
                    })
                    .unwrap();
                    for (what, rep) in [("mean", &r.mean), ("var", &r.variance)] {
                        tests += 1;
                        if let Some(z) = rep.z {
                            worst = worst.max(z.abs());
                        }
                        if !rep.pass {
                            failures.push(format!(
                                "p={p} beta={beta} model={model} k={k} {what}: est={} target={:?} z={:?}",
                                rep.estimate, rep.target, rep.z
                            ));
                        }
                    }
                }
            }
        }
    }
    let pass = failures.is_empty();
    report(
        1,
        "bartlett identities",
        pass,
        &format!("{tests} z-tests at |z| <= {Z_LIMIT}, max |z| = {worst:.3}, failures: {failures:?}"),
    );
    assert!(pass, "{failures:#?}");
}

#[test]
fn information_hump_and_collapse() {
    let n = 8;
    let mut problems = Vec::new();
    let ar = Ar1Model::new(n).unwrap();
    for (i, beta) in [0.0, 0.4, -0.6, 0.85].into_iter().enumerate() {
        let curve = info_curve(n, 0, beta, ModelKind::III, 200, seed_for(2_000 + i as u64)).unwrap();
        // V from an independent dense evaluation
        let b = gamma_of(&ar, beta).unwrap();
        let w = b.gamma.clone().try_inverse().unwrap();
        let wd = &w * &b.d;
        let v = n as f64 * (&wd * &wd).trace() - wd.trace().powi(2);
        let nf = n as f64;
        for row in &curve.rows {
            let k = row.k as f64;
            let want = v * k * (nf - k) / (2.0 * (nf - 1.0) * (nf + 2.0));
            if (row.formula_info - want).abs() > 1e-10 * (1.0 + want.abs()) {
                problems.push(format!("beta={beta} k={}: {} vs {want}", row.k, row.formula_info));
            }
        }
        for k in 1..n {
            let (a, c) = (curve.rows[k - 1].formula_info, curve.rows[n - k - 1].formula_info);
            if (a - c).abs() > 1e-12 * (1.0 + a.abs()) {
                problems.push(format!("beta={beta}: f({k}) != f({})", n - k));
            }
        }
        if beta == 0.0 && (curve.rows[3].formula_info - 12.8).abs() > 1e-12 {
            problems.push(format!("f(4) at beta=0 is {}", curve.rows[3].formula_info));
        }
        if curve.rows[n - 1].formula_info != 0.0 {
            problems.push(format!("beta={beta}: f(n) = {}", curve.rows[n - 1].formula_info));
        }
    }
    let mut spreads = Vec::new();
    for p in [0usize, 1, 2] {
        let d = degeneracy_check(n, p, &DEGENERACY_GRID, &SigmaSpec::ScalarVar(1.0), seed_for(2_100 + p as u64)).unwrap();
        spreads.push((p, d.spread_square, d.spread_wide));
        if !d.pass {
            problems.push(format!("p={p}: spread {} at l = {}", d.spread_square, d.loglik_square));
        }
    }
    let pass = problems.is_empty();
    report(
        2,
        "information hump and collapse",
        pass,
        &format!("f(4) = 12.8 at beta=0, symmetric, spreads (p, k=n-p, k=n-p+2): {spreads:?}, problems: {problems:?}"),
    );
    assert!(pass, "{problems:#?}");
}

#[test]
fn deletion_anomaly() {
    let d = deletion_experiment(8, 7, 4, 0.4, 2_000, seed_for(3_000)).unwrap();
    let pass = d.var_ratio >= 1.5;
    report(
        3,
        "deletion anomaly",
        pass,
        &format!(
            "var ratio {:.4} (bootstrap se {:.4}), mse ratio {:.4}, formula ratio {:.4}, degenerate {}, boundary fits full/sub {}/{}",
            d.var_ratio, d.var_ratio_se, d.mse_ratio, d.formula_ratio, d.degenerate, d.boundary_full, d.boundary_sub
        ),
    );
    assert!(pass);
}

#[test]
fn efficiency_ratio() {
    let first = efficiency_ii_vs_i(10, 1);
    let decreasing = (1..2_000u64).all(|k| efficiency_ii_vs_i(10, k + 1) < efficiency_ii_vs_i(10, k));
    let t = efficiency_table(10, &[100_000]).unwrap();
    let last = t.rows[0].efficiency;
    let pass = first == 1.0 && decreasing && (last - 10.0 / 12.0).abs() <= 1e-4 && (t.limit - 10.0 / 12.0).abs() < 1e-15;
    report(4, "efficiency", pass, &format!("k=1: {first}, k=1e5: {last}, |diff| = {:.3e}", (last - 10.0 / 12.0).abs()));
    assert!(pass);
}

#[test]
fn haar_moments() {
    let mut failures = Vec::new();
    let mut tests = 0;
    for (i, n) in [3usize, 5, 10].into_iter().enumerate() {
        for row in haar_trace_moments(n, 100_000, seed_for(5_000 + i as u64)).unwrap() {
            tests += 1;
            if !row.report.pass {
                failures.push(format!("n={n} {}: z={:?}", row.statistic, row.report.z));
            }
        }
    }
    let n = 6;
    let mut max_square_var: f64 = 0.0;
    let mut rng = derive_rng(seed_for(5_100), 0);
    for pair in 0..10u64 {
        let a = symmetrized(&standard_normal_matrix(&mut rng, n, n));
        let b = symmetrized(&standard_normal_matrix(&mut rng, n, n));
        for k in [1usize, 3, 6] {
            tests += 1;
            let r = tr_quad_covariance_check(&a, &b, k, 100_000, seed_for(5_200 + 10 * pair + k as u64)).unwrap();
            if k == n {
                max_square_var = max_square_var.max(r.var_a).max(r.var_b);
            }
            if !r.pass {
                failures.push(format!("pair {pair} k={k}: cov z={:?} var_a={} var_b={}", r.covariance.z, r.var_a, r.var_b));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        5,
        "haar moments",
        pass,
        &format!("{tests} checks, max k=n variance {max_square_var:.3e}, failures: {failures:?}"),
    );
    assert!(pass, "{failures:#?}");
}

#[test]
fn bipartition_counts() {
    let four: Vec<(usize, usize)> = bipartition_pair_counts(4).unwrap().into_iter().collect();
    let six: Vec<(usize, usize)> = bipartition_pair_counts(6).unwrap().into_iter().collect();
    let pass = four == vec![(1, 6), (2, 3)] && six == vec![(1, 120), (2, 90), (3, 15)];
    report(6, "bi-partition counts", pass, &format!("order 4 {four:?}, order 6 {six:?} (blocks, pairs)"));
    assert!(pass);
}

#[test]
fn consistency_oracle() {
    let mut rng = derive_rng(seed_for(7_000), 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12usize);
        let k = rng.random_range(1..=n);
        let beta = rng.random_range(-0.9..0.9);
        let bundle = gamma_of(&Ar1Model::new(n).unwrap(), beta).unwrap();
        let root = sym_sqrt(&bundle.gamma);
        let b = symmetrized(&(&root * bundle.a() * &root));
        let (_, var) = product_and_cov_tr_quad(&b, &b, k).unwrap();
        let oracle = (n as f64 / 2.0).powi(2) * var;
        let info = expected_info(&bundle, k, ModelKind::III, None).unwrap();
        worst = worst.max((oracle - info).abs() / (1.0 + info.abs()));
    }
    let pass = worst <= 1e-10;
    report(7, "consistency oracle", pass, &format!("100 configs, max scaled difference {worst:.3e}"));
    assert!(pass);
}

/// Five-point central difference.
fn derivative<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-3;
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn relative_gap(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

#[test]
fn analytic_scores_match_numeric_derivatives() {
    let n = 9;
    let ar = Ar1Model::new(n).unwrap();
    let bundle = |beta: f64| -> CovBundle { gamma_of(&ar, beta).unwrap() };
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut track = |name: String, gap: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => w.1 = w.1.max(gap),
        None => worst.push((name, gap)),
    };
    for (i, beta) in [-0.5, 0.1, 0.6].into_iter().enumerate() {
        let y = standard_normal_matrix(&mut derive_rng(seed_for(8_000), i as u64), n, 4);
        for p in [0usize, 1, 2] {
            let design = (p > 0).then(|| DesignMatrix::polynomial(ar.points(), p).unwrap());
            let x = design.as_ref();
            for model in MODELS {
                let a = score(&ar, &y, beta, model, x).unwrap();
                let fd = derivative(|b| profile_loglik(&ar, &y, b, model, x).unwrap(), beta);
                track(format!("profile {model} p={p}"), relative_gap(a, fd));
            }
            let a = ut_subgroup_score(&bundle(beta), &y, x, None).unwrap();
            let fd = derivative(|b| ut_subgroup_loglik(&bundle(b), &y, x, None).unwrap(), beta);
            track(format!("ut p={p}"), relative_gap(a, fd));
            let a = markov_conditional_score(&bundle(beta), &y, x).unwrap();
            let fd = derivative(|b| markov_conditional_loglik(&bundle(b), &y, x).unwrap(), beta);
            track(format!("markov p={p}"), relative_gap(a, fd));
        }
        let x = DesignMatrix::polynomial(ar.points(), 2).unwrap();
        let dp = distance_pair(&y);
        let a = distance_score_model_i(&dp, &bundle(beta), &x).unwrap();
        let fd = derivative(|b| distance_loglik_model_i(&dp, &bundle(b), &x).unwrap(), beta);
        track("distance I".into(), relative_gap(a, fd));
        let ds = series_distances(&y);
        let a = distance_score_model_ii(&ds, &bundle(beta), &x).unwrap();
        let fd = derivative(|b| distance_loglik_model_ii(&ds, &bundle(b), &x).unwrap(), beta);
        track("distance II".into(), relative_gap(a, fd));
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let pass = max <= 1e-6;
    report(
        8,
        "analytic vs numeric scores",
        pass,
        &format!("{} variants, max relative error {max:.3e}", worst.len()),
    );
    assert!(pass, "{worst:#?}");
}

#[test]
fn invariance_suite() {
    let n = 8;
    let k = 3;
    let ar = Ar1Model::new(n).unwrap();
    let beta = 0.45;
    let mut rng = derive_rng(seed_for(9_000), 0);
    let (mut score_gap, mut shift_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let y = standard_normal_matrix(&mut rng, n, k);
        let h = haar_orthogonal(&mut rng, k);
        let scales = Matrix::from_fn(k, k, |i, j| if i == j { rng.random_range(0.4..2.5) } else { 0.0 });
        let g = h * scales;
        let log_det = g.clone().lu().determinant().abs().ln();
        let yg = &y * &g;
        let s = score(&ar, &y, beta, ModelKind::III, None).unwrap();
        let sg = score(&ar, &yg, beta, ModelKind::III, None).unwrap();
        score_gap = score_gap.max((s - sg).abs());
        let l = profile_loglik(&ar, &y, beta, ModelKind::III, None).unwrap();
        let lg = profile_loglik(&ar, &yg, beta, ModelKind::III, None).unwrap();
        shift_gap = shift_gap.max((lg - l + n as f64 * log_det).abs());
    }

    let x = DesignMatrix::intercept(n);
    let y = standard_normal_matrix(&mut rng, n, k);
    let dp = distance_pair(&y);
    let both = |b: f64| {
        let bundle = gamma_of(&ar, b).unwrap();
        (
            distance_loglik_model_i(&dp, &bundle, &x).unwrap(),
            ProfileKernel::new(&bundle, Some(&x)).unwrap().loglik(&y, ModelKind::I).unwrap(),
        )
    };
    let (d0, r0) = both(0.0);
    let mut distance_gap: f64 = 0.0;
    let mut trace_gap: f64 = 0.0;
    for b in [-0.8, -0.3, 0.2, 0.5, 0.9] {
        let (d, r) = both(b);
        distance_gap = distance_gap.max(((d - d0) - (r - r0)).abs());
        let wq = make_projector(&gamma_of(&ar, b).unwrap().w, &x).unwrap().wq;
        trace_gap = trace_gap.max((trace_product(&wq, &dp.s) + 0.5 * trace_product(&wq, &dp.dsq)).abs());
    }
    let pass = score_gap <= 1e-9 && shift_gap <= 1e-8 && distance_gap <= 1e-9 && trace_gap <= 1e-10;
    report(
        9,
        "invariance suite",
        pass,
        &format!(
            "score {score_gap:.2e} (1e-9), shift {shift_gap:.2e} (1e-8), distance vs residual {distance_gap:.2e} (1e-9), trace identity {trace_gap:.2e} (1e-10)"
        ),
    );
    assert!(pass);
}

#[test]
fn upper_triangular_information_is_monotone() {
    let c = ut_info_curve(8, 1, 0.4, 50_000, seed_for(10_000)).unwrap();
    let rows: Vec<String> = c.rows.iter().map(|r| format!("k={} {:.4}±{:.4}", r.k, r.mc_info, r.mc_se)).collect();
    report(
        10,
        "upper-triangular monotonicity",
        c.pass,
        &format!("{}; k=1 vs residual model II formula z={:?}", rows.join(", "), c.first.z),
    );
    assert!(c.pass);
}
