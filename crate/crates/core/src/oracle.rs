//! Analytic self-tests of the ray quadrature and the dense eigensolvers; no operator
//! assembly is involved.

use faer::Mat;
use statrs::function::gamma::gamma;

use crate::c64;
use crate::error::Result;
use crate::frac::{frac_integral_left, marchaud_left, FracConfig, RayFunction};
use crate::geometry::{graded_partition, Domain};
use crate::spectral::{eig_sym, eigenvalues_general, eigenvalues_sym};
use crate::verify::{ClaimRecord, Verdict};

pub const ORACLE_CLAIMS: &[(&str, &str)] = &[
    ("oracle.power_law", "𝔇^α t^k = Γ(k+1)/Γ(k+1−α) t^{k−α} on the unit ray"),
    ("oracle.inversion", "ℑ^α 𝔇^α f = f for piecewise-linear f vanishing at both ends"),
    ("oracle.integral", "ℑ^α of constants and linear functions against closed forms"),
    ("oracle.laplacian", "dense eigenvalues of the finite-difference Dirichlet Laplacian against the exact spectrum"),
    ("oracle.eigensolver", "eigenvalues of matrices with known spectra"),
];

/// Ray cells at which the power-law error is judged, and the refinement ladder for orders.
pub const POWER_LAW_CELLS: usize = 256;
pub const LADDER: [usize; 4] = [32, 64, 128, 256];
pub const POWER_LAW_TOL: f64 = 1e-3;
pub const MIN_ORDER: f64 = 1.5;
pub const INVERSION_TOL: f64 = 1e-3;
pub const MIN_REDUCTION: f64 = 2.0;

fn eval_points() -> Vec<f64> {
    (1..=200).map(|j| j as f64 / 200.0).collect()
}

fn rel_l2(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (v, e)| (n + (v - e).powi(2), d + e * e));
    (num / den).sqrt()
}

/// Relative discrete `L₂` error of `𝔇^α t^k` over `r = j/200`, the ray to each `r` sampled
/// on its own partition graded toward `r`.
pub fn power_law_error(alpha: f64, k: i32, cells: usize) -> Result<f64> {
    let cfg = FracConfig::new(alpha, 1)?.with_ray(cells, 2.0)?;
    let kf = k as f64;
    let c = gamma(kf + 1.0) / gamma(kf + 1.0 - alpha);
    let mut pairs = Vec::new();
    for r in eval_points() {
        let f = RayFunction::sample(graded_partition(r, cells, cfg.grading), |t| t.powi(k))?;
        pairs.push((marchaud_left(&f, &cfg, r)?, c * r.powf(kf - alpha)));
    }
    Ok(rel_l2(pairs.into_iter()))
}

/// Observed orders `log₂(e_M / e_{2M})` along a ladder of errors.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Knots and values of the piecewise-linear test function for the inversion oracle.
pub const HAT_KNOTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const HAT_VALUES: [f64; 5] = [0.0, 1.0, 0.4, 0.7, 0.0];

/// Mesh with `cells` cells split evenly over the knot intervals, each graded toward its
/// left knot, where `𝔇^α f` has its `(t − t_k)^{1−α}` behaviour.
pub fn kink_mesh(knots: &[f64], cells: usize, q: f64) -> Vec<f64> {
    let per = (cells / (knots.len() - 1)).max(1);
    let mut out = vec![knots[0]];
    for w in knots.windows(2) {
        out.extend((1..=per).map(|j| w[0] + (w[1] - w[0]) * (j as f64 / per as f64).powf(q)));
    }
    out
}

/// `‖ℑ^α 𝔇^α f − f‖/‖f‖` over the mesh nodes, `𝔇^α f` being represented piecewise
/// linearly on the same mesh.
pub fn inversion_error(alpha: f64, cells: usize) -> Result<f64> {
    let cfg = FracConfig::new(alpha, 1)?.with_ray(cells, 2.0)?;
    let f = RayFunction::from_samples(HAT_KNOTS.to_vec(), HAT_VALUES.to_vec())?;
    let mesh = kink_mesh(&HAT_KNOTS, cells, cfg.grading);
    // 𝔇^α f behaves like t^{1−α} f'(0) at the origin
    let g = mesh.iter().map(|&t| if t == 0.0 { Ok(0.0) } else { marchaud_left(&f, &cfg, t) }).collect::<Result<Vec<_>>>()?;
    let gf = RayFunction::from_samples(mesh.clone(), g)?;
    let mut pairs = Vec::new();
    for &t in &mesh[1..] {
        pairs.push((frac_integral_left(&gf, &cfg, t)?, f.eval(t)));
    }
    Ok(rel_l2(pairs.into_iter()))
}

/// Largest relative error of `ℑ^α 1` and `ℑ^α t` against `r^α/Γ(α+1)` and `r^{1+α}/Γ(α+2)`.
pub fn integral_error(alpha: f64) -> Result<f64> {
    let cfg = FracConfig::new(alpha, 1)?;
    let one = RayFunction::sample(vec![0.0, 1.0], |_| 1.0)?;
    let lin = RayFunction::sample(vec![0.0, 1.0], |t| t)?;
    let mut worst: f64 = 0.0;
    for r in eval_points() {
        let e1 = r.powf(alpha) / gamma(alpha + 1.0);
        let e2 = r.powf(alpha + 1.0) / gamma(alpha + 2.0);
        worst = worst.max((frac_integral_left(&one, &cfg, r)? - e1).abs() / e1);
        worst = worst.max((frac_integral_left(&lin, &cfg, r)? - e2).abs() / e2);
    }
    Ok(worst)
}

/// Finite-difference Dirichlet Laplacian on `(0,1)ⁿ` with `N` cells per axis, built directly.
pub fn fd_laplacian(n_dim: usize, n: usize) -> Mat<f64> {
    let h2 = (n as f64).powi(-2);
    let m = n - 1;
    match n_dim {
        1 => Mat::from_fn(m, m, |i, j| match i.abs_diff(j) {
            0 => 2.0 / h2,
            1 => -1.0 / h2,
            _ => 0.0,
        }),
        _ => Mat::from_fn(m * m, m * m, |p, q| {
            let (pi, pj, qi, qj) = (p % m, p / m, q % m, q / m);
            if p == q {
                4.0 / h2
            } else if (pi.abs_diff(qi) == 1 && pj == qj) || (pj.abs_diff(qj) == 1 && pi == qi) {
                -1.0 / h2
            } else {
                0.0
            }
        }),
    }
}

/// Largest relative deviation of the first `count` dense FD eigenvalues from the exact
/// Dirichlet spectrum of the unit interval or square.
pub fn laplacian_error(n_dim: usize, n: usize, count: usize) -> Result<f64> {
    let dense = eigenvalues_sym(fd_laplacian(n_dim, n).as_ref())?;
    let domain = if n_dim == 1 { Domain::interval(1.0)? } else { Domain::rectangle(1.0, 1.0)? };
    let exact = domain.dirichlet_laplacian_eigenvalues(count);
    Ok(dense.iter().zip(&exact).map(|(d, e)| (d - e).abs() / e).fold(0.0, f64::max))
}

/// Worst relative eigenvalue error on an upper-triangular matrix and a rotation block, plus
/// the symmetric residual on a tridiagonal matrix.
pub fn eigensolver_error() -> Result<f64> {
    let n = 12;
    let tri = Mat::from_fn(n, n, |i, j| if i == j { (i + 1) as f64 } else if j > i { 1.0 / (1 + i + j) as f64 } else { 0.0 });
    let got = eigenvalues_general(tri.as_ref())?.eigenvalues;
    let mut worst: f64 = (1..=n).map(|k| got.iter().map(|z| (z - c64::new(k as f64, 0.0)).norm() / k as f64).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let rot = Mat::from_fn(2, 2, |i, j| [[1.0, -2.0], [2.0, 1.0]][i][j]);
    let got = eigenvalues_general(rot.as_ref())?.eigenvalues;
    for want in [c64::new(1.0, 2.0), c64::new(1.0, -2.0)] {
        worst = worst.max(got.iter().map(|z| (z - want).norm()).fold(f64::INFINITY, f64::min) / want.norm());
    }
    let sym = fd_laplacian(1, 20);
    let e = eig_sym(sym.as_ref())?;
    let exact: Vec<f64> = (1..20).map(|k| 4.0 * 400.0 * (k as f64 * std::f64::consts::PI / 40.0).sin().powi(2)).collect();
    for (v, x) in e.values.iter().zip(&exact) {
        worst = worst.max((v - x).abs() / x);
    }
    Ok(worst)
}

/// Evaluates every oracle claim.
pub fn oracle_claims() -> Result<Vec<ClaimRecord>> {
    let mut out = Vec::new();

    let mut c = ClaimRecord::new("oracle.power_law", POWER_LAW_TOL).limit("max_relative_error", POWER_LAW_TOL).limit("min_order", MIN_ORDER);
    c.anchor = ORACLE_CLAIMS[0].1.into();
    let mut ok = true;
    for alpha in [0.25, 0.5, 0.75] {
        let e_lin = power_law_error(alpha, 1, POWER_LAW_CELLS)?;
        let ladder = LADDER.iter().map(|&m| power_law_error(alpha, 2, m)).collect::<Result<Vec<_>>>()?;
        let order = observed_orders(&ladder).into_iter().fold(f64::INFINITY, f64::min);
        ok &= e_lin <= POWER_LAW_TOL && order >= MIN_ORDER;
        c = c.measure(&format!("alpha={alpha}.error_t"), e_lin).measure(&format!("alpha={alpha}.error_t2"), ladder[3]).measure(&format!("alpha={alpha}.order_t2"), order);
    }
    out.push(c.note("f = t is reproduced to rounding, so the order is measured on f = t²").verdict(Verdict::from_bool(ok)));

    let mut c = ClaimRecord::new("oracle.inversion", INVERSION_TOL).limit("max_relative_error", INVERSION_TOL).limit("min_reduction", MIN_REDUCTION);
    c.anchor = ORACLE_CLAIMS[1].1.into();
    let mut ok = true;
    for alpha in [0.25, 0.5, 0.75] {
        let errs = LADDER.iter().map(|&m| inversion_error(alpha, m)).collect::<Result<Vec<_>>>()?;
        let red = errs.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        ok &= errs[3] <= INVERSION_TOL && red >= MIN_REDUCTION;
        c = c.measure(&format!("alpha={alpha}.error"), errs[3]).measure(&format!("alpha={alpha}.min_reduction"), red);
    }
    out.push(c.verdict(Verdict::from_bool(ok)));

    let tol = 1e-10;
    let worst = [0.25, 0.5, 0.75].iter().map(|&a| integral_error(a)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let mut c = ClaimRecord::new("oracle.integral", tol).measure("max_relative_error", worst).verdict(Verdict::from_bool(worst <= tol));
    c.anchor = ORACLE_CLAIMS[2].1.into();
    out.push(c);

    let e1 = laplacian_error(1, 400, 20)?;
    let e2 = laplacian_error(2, 32, 10)?;
    let mut c = ClaimRecord::new("oracle.laplacian", 0.02)
        .measure("1d_N400_first20", e1)
        .measure("2d_N32_first10", e2)
        .limit("1d", 0.01)
        .limit("2d", 0.02)
        .verdict(Verdict::from_bool(e1 <= 0.01 && e2 <= 0.02));
    c.anchor = ORACLE_CLAIMS[3].1.into();
    out.push(c);

    let tol = 1e-10;
    let e = eigensolver_error()?;
    let mut c = ClaimRecord::new("oracle.eigensolver", tol).measure("max_relative_error", e).verdict(Verdict::from_bool(e <= tol));
    c.anchor = ORACLE_CLAIMS[4].1.into();
    out.push(c);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kink_mesh_contains_knots() {
        let m = kink_mesh(&HAT_KNOTS, 32, 2.0);
        assert_eq!(m.len(), 33);
        for k in HAT_KNOTS {
            assert!(m.iter().any(|&t| (t - k).abs() < 1e-15));
        }
        assert!(m.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn linear_power_law_is_exact() {
        assert!(power_law_error(0.5, 1, 16).unwrap() < 1e-12);
        assert!(integral_error(0.3).unwrap() < 1e-12);
    }

    #[test]
    fn orders_from_ladder() {
        assert_eq!(observed_orders(&[1.0, 0.25, 0.0625]), vec![2.0, 2.0]);
    }

    #[test]
    fn eigensolvers_and_laplacian() {
        assert!(eigensolver_error().unwrap() < 1e-10);
        assert!(laplacian_error(1, 64, 5).unwrap() < 0.01);
        let l = fd_laplacian(2, 4);
        assert_eq!(l.nrows(), 9);
        assert_eq!(l[(0, 1)], -16.0);
        assert_eq!(l[(2, 3)], 0.0);
    }
}
