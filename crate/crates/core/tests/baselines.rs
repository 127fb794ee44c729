use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yieldcast::baselines::{lasso_fit, lasso_objective, lasso_predict, LassoModel, DEFAULT_ALPHA};

fn random_problem(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
    let y = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    (x, y)
}

/// Least squares with an intercept via the normal equations.
fn normal_equations(x: &Array2<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = x.dim();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let ata = a.transpose() * &a;
    let aty = a.transpose() * DVector::from_column_slice(y);
    let beta = ata.lu().solve(&aty).expect("full rank");
    (beta[0], beta.iter().skip(1).copied().collect())
}

#[test]
fn unpenalized_fit_matches_normal_equations() {
    let (x, y) = random_problem(40, 6, 3);
    let m = lasso_fit(x.view(), &y, 0.0, 1e-13, 100_000).unwrap();
    assert!(m.converged);
    let (b, w) = normal_equations(&x, &y);
    assert!((m.intercept - b).abs() <= 1e-6 * b.abs().max(1.0));
    for (a, e) in m.coefficients.iter().zip(&w) {
        assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0), "{a} vs {e}");
    }
}

#[test]
fn exact_linear_targets_are_recovered() {
    let (x, _) = random_problem(25, 4, 8);
    let beta = [1.5, -2.0, 0.25, 3.0];
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| 7.0 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let m = lasso_fit(x.view(), &y, 0.0, 1e-13, 100_000).unwrap();
    let yhat = lasso_predict(&m, x.view()).unwrap();
    for (a, b) in yhat.iter().zip(&y) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn single_row_prediction_is_row_arithmetic() {
    let m = LassoModel {
        coefficients: vec![2.0, 0.0, -1.0],
        intercept: 0.5,
        alpha: DEFAULT_ALPHA,
        sweeps: 1,
        converged: true,
        objective_path: vec![],
        feature_hash: None,
    };
    let x = ndarray::array![[1.0, 9.0, 4.0]];
    assert_eq!(lasso_predict(&m, x.view()).unwrap(), vec![0.5 + 2.0 - 4.0]);
    let zero = LassoModel {
        coefficients: vec![0.0; 3],
        ..m
    };
    assert_eq!(lasso_predict(&zero, x.view()).unwrap(), vec![0.5]);
}

/// Exact two-column lasso by enumerating sign patterns of the KKT system on
/// centered data.
fn brute_force_two_columns(x: &Array2<f64>, y: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    let xm: Vec<f64> = (0..2).map(|j| x.column(j).sum() / n).collect();
    let xc = Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, j]] - xm[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let gram = |a: usize, b: usize| xc.column(a).dot(&xc.column(b)) / n;
    let corr = |a: usize| xc.column(a).iter().zip(&yc).map(|(p, q)| p * q).sum::<f64>() / n;
    let eval = |w: &[f64]| {
        let b = ym - xm[0] * w[0] - xm[1] * w[1];
        lasso_objective(x.view(), y, w, b, alpha)
    };
    let mut best = (vec![0.0, 0.0], eval(&[0.0, 0.0]));
    for s0 in [-1.0, 0.0, 1.0] {
        for s1 in [-1.0, 0.0, 1.0] {
            let w = match (s0 != 0.0, s1 != 0.0) {
                (false, false) => continue,
                (true, false) => vec![(corr(0) - alpha * s0) / gram(0, 0), 0.0],
                (false, true) => vec![0.0, (corr(1) - alpha * s1) / gram(1, 1)],
                (true, true) => {
                    let (a, b, d) = (gram(0, 0), gram(0, 1), gram(1, 1));
                    let det = a * d - b * b;
                    let (r0, r1) = (corr(0) - alpha * s0, corr(1) - alpha * s1);
                    vec![(d * r0 - b * r1) / det, (a * r1 - b * r0) / det]
                }
            };
            let consistent = [(w[0], s0), (w[1], s1)]
                .iter()
                .all(|&(v, s)| s == 0.0 || v.signum() == s);
            if consistent && w.iter().all(|v| v.is_finite()) {
                let f = eval(&w);
                if f < best.1 {
                    best = (w, f);
                }
            }
        }
    }
    best
}

fn nnz(w: &[f64], eps: f64) -> usize {
    w.iter().filter(|v| v.abs() > eps).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_never_increases_across_sweeps(seed in any::<u64>(), alpha in 0.0..0.5f64) {
        let (x, y) = random_problem(20, 5, seed);
        let m = lasso_fit(x.view(), &y, alpha, 1e-10, 500).unwrap();
        for pair in m.objective_path.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "{:?}", pair);
        }
        let last = *m.objective_path.last().unwrap();
        let direct = lasso_objective(x.view(), &y, &m.coefficients, m.intercept, alpha);
        prop_assert!((last - direct).abs() < 1e-9 * direct.max(1.0));
    }

    #[test]
    fn two_column_support_matches_enumeration(seed in any::<u64>(), a1 in 0.0..0.6f64, gap in 0.01..0.6f64) {
        let (x, y) = random_problem(15, 2, seed);
        for alpha in [a1, a1 + gap] {
            let m = lasso_fit(x.view(), &y, alpha, 1e-13, 100_000).unwrap();
            let (w, f) = brute_force_two_columns(&x, &y, alpha);
            let fm = lasso_objective(x.view(), &y, &m.coefficients, m.intercept, alpha);
            prop_assert!((fm - f).abs() <= 1e-9 * f.max(1.0), "cd {fm} vs exact {f}");
            // supports agree wherever the exact solution is not on a threshold boundary
            if w.iter().all(|v| *v == 0.0 || v.abs() > 1e-6) {
                prop_assert_eq!(m.n_nonzero(), nnz(&w, 0.0));
            }
        }
    }
}
