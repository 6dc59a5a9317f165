//! Property checks of the spline core against independent brute-force oracles.

use citesim_gam::basis::{difference_penalty, BSplineBasis};
use citesim_gam::{
    build_basis, cross_products, fit_model, fit_penalized_ls, ColumnFrame, FitOptions, KnotPlacement,
    ModelSpec, PenalizedLs, Penalty, SmoothTerm,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Gaussian elimination with partial pivoting on the normal equations.
fn normal_equations_oracle(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let p = x.ncols();
    let n = x.nrows();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        a[i][p] = (0..n).map(|r| x[(r, i)] * y[r]).sum();
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| a[i][k] * beta[k]).sum();
        beta[i] = (a[i][p] - s) / a[i][i];
    }
    beta
}

/// Intercept plus one constrained smooth, with its penalty.
fn smooth_problem(x: &[f64], q: usize) -> (DMatrix<f64>, Penalty, usize) {
    let block = build_basis(x, &SmoothTerm::new("x").with_basis_size(q)).unwrap();
    let n = x.len();
    let w = block.design.ncols();
    let mut design = DMatrix::zeros(n, w + 1);
    design.column_mut(0).fill(1.0);
    design.columns_mut(1, w).copy_from(&block.design);
    let null_dim = block.smooth.null_space_dim();
    (design, Penalty::from_root(1, block.smooth.penalty_root.clone()), null_dim)
}

fn noisy_sine(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> (Vec<f64>, Vec<f64>) {
    let noise = Normal::new(0.0, sd).unwrap();
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
    let y = x.iter().map(|v| (v * 0.9).sin() * 2.0 + noise.sample(rng)).collect();
    (x, y)
}

#[test]
fn partition_of_unity_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(3) * 50.0 - 5.0).collect();
    let basis = BSplineBasis::from_data(&data, &SmoothTerm::new("x")).unwrap();
    let (lo, hi) = basis.span();
    for _ in 0..1000 {
        let x = lo + (hi - lo) * rng.random::<f64>();
        let sum: f64 = basis.eval(x).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-10, "row sum {sum} at {x}");
    }
}

#[test]
fn penalty_rank_is_basis_size_minus_order() {
    for (q, order) in [(5, 2), (5, 1), (10, 2), (20, 2), (20, 3), (8, 3)] {
        let s = difference_penalty(q, order);
        let svd = s.svd(false, false);
        let max = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&v| v > max * 1e-10).count();
        assert_eq!(rank, q - order, "q={q} order={order}");
    }
}

#[test]
fn zero_lambda_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = 40 + rng.random_range(0..160);
        let q = 6 + rng.random_range(0..12);
        let (x, y) = noisy_sine(&mut rng, n, 0.4);
        let (design, pen, _) = smooth_problem(&x, q);
        assert!(design.ncols() <= 20);
        let fit = fit_penalized_ls(&design, &y, &[pen], &[0.0]).unwrap();
        let oracle = normal_equations_oracle(&design, &y);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            assert!(rel <= 1e-8, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn gcv_matches_explicit_hat_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for lambda in [1e-3, 0.5, 10.0, 1e4] {
        let (x, y) = noisy_sine(&mut rng, 90, 0.5);
        let (design, pen, _) = smooth_problem(&x, 12);
        let s_full = {
            let mut s = DMatrix::zeros(design.ncols(), design.ncols());
            s.view_mut((1, 1), (pen.width(), pen.width())).copy_from(&pen.matrix());
            s
        };
        let cp = cross_products(&design, &y).unwrap();
        let problem = PenalizedLs::new(&cp, vec![pen]).unwrap();
        let gcv = problem.gcv(&[lambda]).unwrap();

        let xtx = design.transpose() * &design;
        let a = (&xtx + &s_full * lambda).try_inverse().unwrap();
        let hat = &design * a * design.transpose();
        let yv = nalgebra::DVector::from_vec(y.clone());
        let resid = &yv - &hat * &yv;
        let n = y.len() as f64;
        let tr = hat.trace();
        let oracle = n * resid.norm_squared() / (n - tr).powi(2);
        assert!((gcv - oracle).abs() / oracle <= 1e-8, "{gcv} vs {oracle}");
    }
}

#[test]
fn smooth_edf_non_increasing_in_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (x, y) = noisy_sine(&mut rng, 300, 0.5);
    let (design, pen, _) = smooth_problem(&x, 20);
    let cp = cross_products(&design, &y).unwrap();
    let problem = PenalizedLs::new(&cp, vec![pen]).unwrap();
    let mut last = f64::INFINITY;
    for k in 0..20 {
        let lambda = (-8.0 + 20.0 * k as f64 / 19.0f64).exp();
        let sol = problem.solve(&[lambda]).unwrap();
        let edf: f64 = sol.edf_per_coef.rows(1, 19).sum();
        assert!(edf <= last + 1e-9, "edf rose from {last} to {edf} at λ={lambda}");
        last = edf;
    }
}

#[test]
fn hat_trace_between_null_space_and_column_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, y) = noisy_sine(&mut rng, 250, 1.0);
    let (design, pen, null_dim) = smooth_problem(&x, 15);
    let p = design.ncols();
    let cp = cross_products(&design, &y).unwrap();
    let problem = PenalizedLs::new(&cp, vec![pen]).unwrap();
    let lower = (1 + null_dim) as f64;
    for log_l in [-8.0, -2.0, 0.0, 4.0, 12.0, 30.0] {
        let sol = problem.solve(&[f64::exp(log_l)]).unwrap();
        assert!(sol.hat_trace >= lower - 1e-6, "{} < {lower}", sol.hat_trace);
        assert!(sol.hat_trace <= p as f64 + 1e-9);
    }
}

#[test]
fn huge_lambda_collapses_to_penalty_null_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (x, y) = noisy_sine(&mut rng, 200, 0.3);
    let (design, pen, _) = smooth_problem(&x, 12);
    let fit = fit_penalized_ls(&design, &y, &[pen], &[1e12]).unwrap();
    let fitted = &design * &fit.beta;

    // oracle: the order-2 null space plus intercept spans {1, x}
    let null_design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let coef = normal_equations_oracle(&null_design, &y);
    for i in 0..x.len() {
        let oracle = coef[0] + coef[1] * x[i];
        assert!((fitted[i] - oracle).abs() < 1e-5, "row {i}: {} vs {oracle}", fitted[i]);
    }
}

fn frame_with_smooth(x: Vec<f64>, y: Vec<f64>) -> ColumnFrame {
    ColumnFrame::new(y).with_column("x", x)
}

#[test]
fn fitted_smooth_is_centered_on_observed_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (x, y) = noisy_sine(&mut rng, 600, 0.7);
    let spec = ModelSpec::new(vec![], vec![SmoothTerm::new("x")]);
    let fit = fit_model(&spec, &frame_with_smooth(x.clone(), y), &FitOptions::default()).unwrap();
    let vals = fit.smooth_values("x", &x).unwrap();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!(mean.abs() <= 1e-8, "mean {mean}");
}

#[test]
fn refit_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (x, y) = noisy_sine(&mut rng, 20_000, 1.0);
    let frame = frame_with_smooth(x, y);
    let spec = ModelSpec::new(vec![], vec![SmoothTerm::new("x")]);
    let a = fit_model(&spec, &frame, &FitOptions::default()).unwrap();
    let b = fit_model(&spec, &frame, &FitOptions::default()).unwrap();
    assert_eq!(a.beta, b.beta);
    assert_eq!(a.aic.to_bits(), b.aic.to_bits());
    assert_eq!(a.gcv.to_bits(), b.gcv.to_bits());
    assert_eq!(a.dev_explained.to_bits(), b.dev_explained.to_bits());
    assert_eq!(a.smooths[0].lambda.to_bits(), b.smooths[0].lambda.to_bits());
}

#[test]
fn fit_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (x, y) = noisy_sine(&mut rng, 2_000, 1.0);
    let spec = ModelSpec::new(vec![], vec![SmoothTerm::new("x")]);
    let fit = fit_model(&spec, &frame_with_smooth(x, y), &FitOptions::default()).unwrap();
    assert!(fit.dev_explained >= 0.0 && fit.dev_explained <= 1.0);
    assert!(fit.edf_total <= fit.beta.len() as f64);
    assert!(fit.gcv > 0.0);
    let sigma2 = fit.rss / (fit.n as f64 - fit.edf_total);
    assert!((fit.sigma2_hat - sigma2).abs() < 1e-12);
    let n = fit.n as f64;
    let aic = n * (fit.rss / n).ln() + n * (2.0 * std::f64::consts::PI).ln() + n + 2.0 * (fit.edf_total + 1.0);
    assert!((fit.aic - aic).abs() < 1e-6);
}

#[test]
fn linear_generator_gives_linear_partial_effect() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let x: Vec<f64> = (0..1500).map(|_| rng.random::<f64>() * 4.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 + v + noise.sample(&mut rng)).collect();
    let spec = ModelSpec::new(vec![], vec![SmoothTerm::new("x")]);
    let fit = fit_model(&spec, &frame_with_smooth(x, y), &FitOptions::default()).unwrap();
    let pe = citesim_gam::partial_effect(&fit, "x", 50).unwrap();
    let (slope, icept) = line_fit(&pe.grid, &pe.f_hat);
    let max_se = pe.se.iter().copied().fold(0.0, f64::max);
    for (g, f) in pe.grid.iter().zip(&pe.f_hat) {
        assert!((f - (icept + slope * g)).abs() < 2.0 * max_se);
    }
    assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[test]
fn grid_of_two_hits_range_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (x, y) = noisy_sine(&mut rng, 300, 0.5);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spec = ModelSpec::new(vec![], vec![SmoothTerm::new("x")]);
    let fit = fit_model(&spec, &frame_with_smooth(x, y), &FitOptions::default()).unwrap();
    let pe = citesim_gam::partial_effect(&fit, "x", 2).unwrap();
    assert_eq!(pe.grid, vec![lo, hi]);
    assert!(citesim_gam::partial_effect(&fit, "nope", 2).is_err());
}

#[test]
fn huge_lambda_partial_effect_is_straight_on_even_design() {
    let n = 400;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * 8.0).collect();
    let y: Vec<f64> = x.iter().map(|v| (v * 1.7).sin() + 0.3 * v).collect();
    let spec = ModelSpec::new(
        vec![],
        vec![SmoothTerm::new("x").with_knots(KnotPlacement::Quantile)],
    );
    let opts = FitOptions {
        fixed_lambda: Some(vec![1e12]),
        ..FitOptions::default()
    };
    let fit = fit_model(&spec, &frame_with_smooth(x, y), &opts).unwrap();
    let pe = citesim_gam::partial_effect(&fit, "x", 41).unwrap();
    let (slope, icept) = line_fit(&pe.grid, &pe.f_hat);
    let dev = pe
        .grid
        .iter()
        .zip(&pe.f_hat)
        .map(|(g, f)| (f - (icept + slope * g)).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-6, "max deviation from a line {dev}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_rows_sum_to_one(points in prop::collection::vec(-50.0f64..50.0, 30..80), probe in 0.0f64..1.0) {
        let mut distinct = points.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(distinct.len() >= 20);
        let basis = BSplineBasis::from_data(&points, &SmoothTerm::new("x")).unwrap();
        let (lo, hi) = basis.span();
        let sum: f64 = basis.eval(lo + (hi - lo) * probe).iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
    }
}
