//! Dense spectral computations: eigenvalues, singular values, resolvent, field of values,
//! numerical-range angles, the sectorial factorization `L = H^{1/2}(I + iB)H^{1/2}` and
//! power-law decay fits.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};

use crate::c64;
use crate::error::{Error, Result};

/// Relative tolerance used to cluster eigenvalues into multiplicities.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending real part for symmetric input, ascending modulus (then argument) otherwise.
    pub eigenvalues: Vec<c64>,
    pub distinct: Vec<c64>,
    pub multiplicities: Vec<usize>,
    pub nu: usize,
    /// Backward-error estimates `‖Mv − λv‖/‖v‖`, aligned with `eigenvalues`; empty when
    /// eigenvectors were not requested.
    pub residuals: Vec<f64>,
}

impl SpectrumResult {
    fn new(eigenvalues: Vec<c64>, residuals: Vec<f64>) -> Self {
        let (distinct, multiplicities) = cluster(&eigenvalues);
        let nu = multiplicities.iter().sum();
        Self { eigenvalues, distinct, multiplicities, nu, residuals }
    }

    /// Moduli in descending order.
    pub fn moduli_descending(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.eigenvalues.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        m
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn cluster(values: &[c64]) -> (Vec<c64>, Vec<usize>) {
    let mut assigned = vec![false; values.len()];
    let (mut distinct, mut mult) = (Vec::new(), Vec::new());
    for i in 0..values.len() {
        if assigned[i] {
            continue;
        }
        let rep = values[i];
        let tol = CLUSTER_TOL * rep.norm().max(f64::MIN_POSITIVE);
        let mut count = 0;
        for j in i..values.len() {
            if values[j].norm() - rep.norm() > tol {
                break;
            }
            if !assigned[j] && (values[j] - rep).norm() <= tol {
                assigned[j] = true;
                count += 1;
            }
        }
        distinct.push(rep);
        mult.push(count);
    }
    (distinct, mult)
}

fn sort_by_modulus(v: &mut [c64]) {
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
}

pub fn fro_norm(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

pub fn sym_part(m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn skew_part(m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] - m[(j, i)]))
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

fn check_square(m: MatRef<'_, f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Spectrum(format!("matrix must be square and non-empty, got {}x{}", m.nrows(), m.ncols())));
    }
    if (0..m.ncols()).any(|j| (0..m.nrows()).any(|i| !m[(i, j)].is_finite())) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    Ok(())
}

/// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F`.
pub fn asymmetry(m: MatRef<'_, f64>) -> f64 {
    let scale = fro_norm(m).max(f64::MIN_POSITIVE);
    fro_norm(skew_part(m).as_ref()) * 2.0 / scale
}

fn check_symmetric(m: MatRef<'_, f64>) -> Result<()> {
    check_square(m)?;
    let asym = asymmetry(m);
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub spectrum: SpectrumResult,
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Mat<f64>,
}

pub fn eig_sym(m: MatRef<'_, f64>) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let e = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<f64> = (0..m.nrows()).map(|i| e.S()[i]).collect();
    let vectors = e.U().to_owned();
    let mv = m * &vectors;
    let residuals = (0..values.len())
        .map(|j| (0..m.nrows()).map(|i| (mv[(i, j)] - values[j] * vectors[(i, j)]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let spectrum = SpectrumResult::new(values.iter().map(|&v| c64::new(v, 0.0)).collect(), residuals);
    Ok(SymmetricEigen { spectrum, values, vectors })
}

/// Ascending eigenvalues of a symmetric matrix, without eigenvectors.
pub fn eigenvalues_sym(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
}

#[derive(Debug, Clone)]
pub struct GeneralEigen {
    pub spectrum: SpectrumResult,
    /// Unit eigenvectors as columns, aligned with `spectrum.eigenvalues`.
    pub vectors: Mat<c64>,
}

pub fn eig_general(m: MatRef<'_, f64>) -> Result<GeneralEigen> {
    check_square(m)?;
    let n = m.nrows();
    let e = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let u = e.U();
    let mut order: Vec<usize> = (0..n).collect();
    let lam: Vec<c64> = (0..n).map(|i| e.S()[i]).collect();
    order.sort_by(|&a, &b| lam[a].norm().total_cmp(&lam[b].norm()).then(lam[a].arg().total_cmp(&lam[b].arg())));
    let mut vectors = Mat::<c64>::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let norm = (0..n).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            vectors[(i, k)] = u[(i, j)] / norm;
        }
    }
    let eigenvalues: Vec<c64> = order.iter().map(|&j| lam[j]).collect();
    let mv = to_complex(m) * &vectors;
    let residuals = (0..n)
        .map(|j| (0..n).map(|i| (mv[(i, j)] - eigenvalues[j] * vectors[(i, j)]).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok(GeneralEigen { spectrum: SpectrumResult::new(eigenvalues, residuals), vectors })
}

/// Eigenvalues of a general real matrix sorted by ascending modulus, without residuals.
pub fn eigenvalues_general(m: MatRef<'_, f64>) -> Result<SpectrumResult> {
    check_square(m)?;
    let mut v = m.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    sort_by_modulus(&mut v);
    Ok(SpectrumResult::new(v, Vec::new()))
}

#[derive(Debug, Clone)]
pub struct SNumberSequence {
    /// Descending.
    pub values: Vec<f64>,
    pub source: String,
}

pub fn singular_values(m: MatRef<'_, f64>, source: &str) -> Result<SNumberSequence> {
    check_square(m)?;
    let mut values = m.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SNumberSequence { values, source: source.to_string() })
}

/// Numerical rank of a set of columns (each normalized first), with the ratio `σ_min/σ_max`.
pub fn column_rank(m: MatRef<'_, c64>) -> Result<(usize, f64)> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut a = m.to_owned();
    for j in 0..c {
        let norm = (0..r).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..r {
            a[(i, j)] /= norm;
        }
    }
    let s = a.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = r.max(c) as f64 * f64::EPSILON * smax;
    Ok((s.iter().filter(|&&v| v > tol).count(), smin / smax))
}

#[derive(Debug, Clone)]
pub struct Resolvent {
    pub matrix: Mat<f64>,
    /// `‖L R − I‖_F / √n`.
    pub residual: f64,
    /// `‖L‖_1 ‖R‖_1`.
    pub condition_estimate: f64,
}

fn norm_1(m: MatRef<'_, f64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `R = L^{-1}` by LU with partial pivoting.
pub fn resolvent_at_zero(l: MatRef<'_, f64>) -> Result<Resolvent> {
    check_square(l)?;
    let n = l.nrows();
    let inv = l.partial_piv_lu().inverse();
    if (0..n).any(|j| (0..n).any(|i| !inv[(i, j)].is_finite())) {
        return Err(Error::Singular(f64::INFINITY));
    }
    let cond = norm_1(l) * norm_1(inv.as_ref());
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular(cond));
    }
    let mut prod = l * &inv;
    for i in 0..n {
        prod[(i, i)] -= 1.0;
    }
    let residual = fro_norm(prod.as_ref()) / (n as f64).sqrt();
    Ok(Resolvent { matrix: inv, residual, condition_estimate: cond })
}

/// The Hermitian family `c·H + i·s·K` with `H` symmetric and `K` skew, both real.
struct Pencil<'a> {
    h: MatRef<'a, f64>,
    k: MatRef<'a, f64>,
    h_norm: f64,
    k_norm: f64,
}

/// Top Ritz vectors carried from one member of a pencil sweep to the next.
type WarmBlock = Vec<Vec<c64>>;

impl<'a> Pencil<'a> {
    fn new(h: MatRef<'a, f64>, k: MatRef<'a, f64>) -> Result<Self> {
        let h_norm = spectral_norm(h)?;
        let k_norm = spectral_norm(k)?;
        Ok(Self { h, k, h_norm, k_norm })
    }

    fn n(&self) -> usize {
        self.h.nrows()
    }

    fn dense(&self, c: f64, s: f64) -> Mat<c64> {
        Mat::from_fn(self.n(), self.n(), |i, j| c64::new(c * self.h[(i, j)], s * self.k[(i, j)]))
    }

    fn apply_block(&self, c: f64, s: f64, v: &[Vec<c64>]) -> Vec<Vec<c64>> {
        let n = self.n();
        let m = v.len();
        let x = Mat::from_fn(n, 2 * m, |i, j| if j < m { v[j][i].re } else { v[j - m][i].im });
        let hx = self.h * &x;
        let kx = self.k * &x;
        (0..m)
            .map(|j| {
                (0..n)
                    .map(|i| c64::new(c * hx[(i, j)] - s * kx[(i, j + m)], c * hx[(i, j + m)] + s * kx[(i, j)]))
                    .collect()
            })
            .collect()
    }

    fn norm_bound(&self, c: f64, s: f64) -> f64 {
        c.abs() * self.h_norm + s.abs() * self.k_norm
    }

    /// Largest eigenvalue, a unit eigenvector and its residual norm for `c·H + i·s·K`.
    fn top(&self, c: f64, s: f64, tol: f64, warm: &mut WarmBlock) -> Result<(f64, Vec<c64>, f64)> {
        let n = self.n();
        if n <= DENSE_LIMIT {
            let e = self.dense(c, s).self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let v = (0..n).map(|i| e.U()[(i, n - 1)]).collect();
            return Ok((e.S()[n - 1].re, v, 0.0));
        }
        thick_restart_top(|v| self.apply_block(c, s, v), n, self.norm_bound(c, s), tol, warm)
    }
}

/// Matrices up to this order are handled by dense Hermitian eigensolves.
const DENSE_LIMIT: usize = 120;

pub fn spectral_norm(m: MatRef<'_, f64>) -> Result<f64> {
    let s = m.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic, well-spread start vector.
fn seed_vector(n: usize, salt: usize) -> Vec<c64> {
    let g = 0.7548776662 + 0.0137 * salt as f64;
    (0..n).map(|i| c64::new((g * (i + 1) as f64).fract() - 0.5, (0.5698402910 * (i + 1 + salt) as f64).fract() - 0.5)).collect()
}

/// Orthonormalizes `v` against `q` (twice) and normalizes; `None` if it collapses.
fn orthonormalize(mut v: Vec<c64>, q: &[Vec<c64>]) -> Option<Vec<c64>> {
    let before = norm(&v);
    for _ in 0..2 {
        for qi in q {
            let p = dot(qi, &v);
            v.iter_mut().zip(qi).for_each(|(x, y)| *x -= p * y);
        }
    }
    let after = norm(&v);
    if !(after > 1e-10 * before) || after == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= after);
    Some(v)
}

/// Top eigenpair of a Hermitian operator by thick-restart Krylov iteration with explicit
/// Rayleigh–Ritz projection. `warm` supplies starting vectors and receives the kept Ritz block.
fn thick_restart_top(
    apply: impl Fn(&[Vec<c64>]) -> Vec<Vec<c64>>,
    n: usize,
    scale: f64,
    tol: f64,
    warm: &mut WarmBlock,
) -> Result<(f64, Vec<c64>, f64)> {
    let max_basis = n.min(64);
    let keep = 12.min(max_basis / 2);
    let mut q: Vec<Vec<c64>> = Vec::with_capacity(max_basis);
    let mut salt = 0;
    let starts: Vec<Vec<c64>> = if warm.is_empty() { vec![seed_vector(n, 0)] } else { warm.clone() };
    for v in starts {
        if let Some(v) = orthonormalize(v, &q) {
            q.push(v);
        }
    }
    if q.is_empty() {
        q.push(orthonormalize(seed_vector(n, 0), &[]).expect("seed vector is non-zero"));
    }
    let mut w = apply(&q);
    let mut best = (f64::NEG_INFINITY, Vec::new(), f64::INFINITY);
    for _step in 0..4000 {
        // expand with Krylov continuation of the newest vector
        let target = (q.len() + 8).min(max_basis);
        while q.len() < target {
            let next = match orthonormalize(w.last().unwrap().clone(), &q) {
                Some(v) => v,
                None => {
                    salt += 1;
                    match orthonormalize(seed_vector(n, salt), &q) {
                        Some(v) => v,
                        None => break,
                    }
                }
            };
            let wn = apply(std::slice::from_ref(&next)).pop().unwrap();
            q.push(next);
            w.push(wn);
        }
        let m = q.len();
        let t = Mat::from_fn(m, m, |i, j| 0.5 * (dot(&q[i], &w[j]) + dot(&q[j], &w[i]).conj()));
        let e = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let ritz = |col: usize| -> (Vec<c64>, Vec<c64>) {
            let mut x = vec![c64::new(0.0, 0.0); n];
            let mut gx = vec![c64::new(0.0, 0.0); n];
            for r in 0..m {
                let y = e.U()[(r, col)];
                x.iter_mut().zip(&q[r]).for_each(|(a, b)| *a += y * b);
                gx.iter_mut().zip(&w[r]).for_each(|(a, b)| *a += y * b);
            }
            (x, gx)
        };
        let theta = e.S()[m - 1].re;
        let (x, gx) = ritz(m - 1);
        let resid: Vec<c64> = gx.iter().zip(&x).map(|(a, b)| a - b * theta).collect();
        let res = norm(&resid);
        if res < best.2 {
            best = (theta, x.clone(), res);
        }
        let kept: Vec<(Vec<c64>, Vec<c64>)> = (m.saturating_sub(keep)..m).rev().map(ritz).collect();
        *warm = kept.iter().map(|p| p.0.clone()).collect();
        if res <= tol * scale || m >= n {
            return Ok(best);
        }
        if m < max_basis {
            continue;
        }
        q = kept.iter().map(|p| p.0.clone()).collect();
        w = kept.into_iter().map(|p| p.1).collect();
        if let Some(r) = orthonormalize(resid, &q) {
            let wr = apply(std::slice::from_ref(&r)).pop().unwrap();
            q.push(r);
            w.push(wr);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovPoint {
    pub phi: f64,
    pub support: f64,
    pub z: c64,
}

#[derive(Debug, Clone)]
pub struct FovBoundary {
    pub points: Vec<FovPoint>,
    /// Largest eigen-residual of the support problems relative to their norm bound.
    pub max_relative_residual: f64,
}

impl FovBoundary {
    pub fn max_arg(&self) -> f64 {
        self.points.iter().map(|p| p.z.arg()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_arg(&self) -> f64 {
        self.points.iter().map(|p| p.z.arg()).fold(f64::INFINITY, f64::min)
    }
}

/// Rayleigh quotient `v^H M v / v^H v` of a real matrix.
pub fn rayleigh(m: MatRef<'_, f64>, v: &[c64]) -> c64 {
    let n = m.nrows();
    let x = Mat::from_fn(n, 2, |i, j| if j == 0 { v[i].re } else { v[i].im });
    let mx = m * &x;
    let num: c64 = (0..n).map(|i| v[i].conj() * c64::new(mx[(i, 0)], mx[(i, 1)])).sum();
    num / v.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Relative residual accepted for field-of-values support vectors.
pub const FOV_TOL: f64 = 1e-8;

/// Support-function sampling of the numerical range of a real matrix:
/// for each angle the top eigenvector of `(e^{iφ}M + e^{−iφ}Mᵀ)/2` gives a boundary point.
pub fn field_of_values(m: MatRef<'_, f64>, n_angles: usize) -> Result<FovBoundary> {
    check_square(m)?;
    if n_angles < 16 {
        return Err(Error::Spectrum(format!("n_angles must be at least 16, got {n_angles}")));
    }
    let h = sym_part(m);
    let k = skew_part(m);
    let pencil = Pencil::new(h.as_ref(), k.as_ref())?;
    // a real matrix has a range symmetric about the real axis, so angle −φ mirrors φ
    let half = n_angles / 2;
    let mut upper = Vec::with_capacity(half + 1);
    let mut warm = WarmBlock::new();
    let mut worst: f64 = 0.0;
    for j in 0..=half {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let (_, v, res) = pencil.top(c, s, FOV_TOL, &mut warm)?;
        worst = worst.max(res / pencil.norm_bound(c, s));
        let z = rayleigh(m, &v);
        upper.push(FovPoint { phi, support: (z * c64::cis(phi)).re, z });
    }
    let mut points = upper.clone();
    for j in half + 1..n_angles {
        let p = upper[n_angles - j];
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
        points.push(FovPoint { phi, support: p.support, z: p.z.conj() });
    }
    Ok(FovBoundary { points, max_relative_residual: worst })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiAngles {
    /// `sup arg z` over the numerical range.
    pub upper: f64,
    /// `sup (−arg z)` over the numerical range.
    pub lower: f64,
}

impl SemiAngles {
    pub fn max(&self) -> f64 {
        self.upper.max(self.lower)
    }
}

/// Brent's method for a sign change of `f` on `[a, b]`.
pub fn brent(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Spectrum("root not bracketed".into()));
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::Spectrum("Brent iteration did not converge".into()))
}

/// Relative residual targeted by the semi-angle root finder.
const ANGLE_TOL: f64 = 1e-13;

/// Sharp semi-angles of the numerical range of a real matrix with positive definite
/// symmetric part, each found as the root of `θ ↦ max Im(e^{∓iθ} z)` over the range.
pub fn numerical_range_semi_angles(m: MatRef<'_, f64>) -> Result<SemiAngles> {
    check_square(m)?;
    let h = sym_part(m);
    let k = skew_part(m);
    let lmin = eigenvalues_sym(h.as_ref())?[0];
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    let pencil = Pencil::new(h.as_ref(), k.as_ref())?;
    let side = |sign: f64| -> Result<f64> {
        let mut warm = WarmBlock::new();
        let mut g = |theta: f64| -> Result<f64> {
            let (c, s) = (-theta.sin(), -sign * theta.cos());
            let (val, _, res) = pencil.top(c, s, ANGLE_TOL, &mut warm)?;
            if res > 1e3 * ANGLE_TOL * pencil.norm_bound(c, s) {
                return Err(Error::Eigen(format!("support eigenproblem did not converge (residual {res:.3e})")));
            }
            Ok(val)
        };
        if g(0.0)? <= 0.0 {
            return Ok(0.0);
        }
        brent(g, 0.0, std::f64::consts::FRAC_PI_2, 1e-14)
    };
    let upper = side(1.0)?;
    let lower = side(-1.0)?;
    Ok(SemiAngles { upper, lower })
}

#[derive(Debug, Clone)]
pub struct SectorFactorization {
    pub h_half: Mat<f64>,
    pub h_inv_half: Mat<f64>,
    /// Hermitian `B = −i H^{−1/2} K H^{−1/2}` with `K` the skew part of `L`.
    pub b: Mat<c64>,
    /// `S = I + B²`, real symmetric because `B` is purely imaginary.
    pub s: Mat<f64>,
    pub b_norm: f64,
    pub s_inv_norm: f64,
    pub s_min_eigenvalue: f64,
    /// `‖H^{1/2}H^{1/2} − H‖ / ‖H‖`.
    pub h_half_residual: f64,
    /// `‖B − B^H‖ / ‖B‖`.
    pub b_hermitian_residual: f64,
    /// `‖H^{1/2}(I + iB)H^{1/2} − L‖ / ‖L‖`.
    pub reconstruction_residual: f64,
    s_inverse: Mat<f64>,
}

fn mat_fro_c(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

pub fn factorize_sector(l: MatRef<'_, f64>, h: MatRef<'_, f64>) -> Result<SectorFactorization> {
    check_square(l)?;
    let n = l.nrows();
    let eh = eig_sym(h)?;
    if !(eh.values[0] > 0.0) {
        return Err(Error::NotPositiveDefinite(eh.values[0]));
    }
    let u = &eh.vectors;
    let scaled = |f: &dyn Fn(f64) -> f64| -> Mat<f64> {
        let mut ud = u.clone();
        for j in 0..n {
            let c = f(eh.values[j]);
            for i in 0..n {
                ud[(i, j)] *= c;
            }
        }
        let m = &ud * u.transpose();
        sym_part(m.as_ref())
    };
    let h_half = scaled(&|x| x.sqrt());
    let h_inv_half = scaled(&|x| 1.0 / x.sqrt());
    let mut hh = &h_half * &h_half;
    hh -= h;
    let h_half_residual = fro_norm(hh.as_ref()) / fro_norm(h);

    let k = skew_part(l);
    let w = &h_inv_half * &k * &h_inv_half;
    let b = Mat::from_fn(n, n, |i, j| c64::new(0.0, -w[(i, j)]));
    let bh = Mat::from_fn(n, n, |i, j| b[(i, j)] - b[(j, i)].conj());
    let b_fro = mat_fro_c(b.as_ref());
    let b_hermitian_residual = if b_fro > 0.0 { mat_fro_c(bh.as_ref()) / b_fro } else { 0.0 };

    let b2 = &b * &b;
    let s = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + b2[(i, j)].re);
    let s = sym_part(s.as_ref());
    let es = eig_sym(s.as_ref())?;
    let s_min_eigenvalue = es.values[0];
    let b_norm = b.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?.into_iter().fold(0.0, f64::max);
    let mut us = es.vectors.clone();
    for j in 0..n {
        let c = 1.0 / es.values[j];
        for i in 0..n {
            us[(i, j)] *= c;
        }
    }
    let s_inverse = sym_part((&us * es.vectors.transpose()).as_ref());

    let hc = to_complex(h_half.as_ref());
    let mut mid = Mat::from_fn(n, n, |i, j| c64::new(0.0, 1.0) * b[(i, j)]);
    for i in 0..n {
        mid[(i, i)] += c64::new(1.0, 0.0);
    }
    let rec = &hc * &mid * &hc;
    let diff = Mat::from_fn(n, n, |i, j| rec[(i, j)] - c64::new(l[(i, j)], 0.0));
    let reconstruction_residual = mat_fro_c(diff.as_ref()) / fro_norm(l);

    Ok(SectorFactorization {
        h_half,
        h_inv_half,
        b,
        s,
        b_norm,
        s_inv_norm: 1.0 / s_min_eigenvalue,
        s_min_eigenvalue,
        h_half_residual,
        b_hermitian_residual,
        reconstruction_residual,
        s_inverse,
    })
}

impl SectorFactorization {
    /// `H^{−1/2} S^{−1} H^{−1/2}`, the real component of `L^{−1}`.
    pub fn real_component_of_inverse(&self) -> Mat<f64> {
        let v = &self.h_inv_half * &self.s_inverse * &self.h_inv_half;
        sym_part(v.as_ref())
    }

    /// Relative distances of `v` from `H^{−1/2}S^{−1}H^{−1/2}` and from half of it.
    pub fn v_residuals(&self, v: MatRef<'_, f64>) -> (f64, f64) {
        let w = self.real_component_of_inverse();
        let nv = fro_norm(v);
        let full = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] - w[(i, j)]);
        let half = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] - 0.5 * w[(i, j)]);
        (fro_norm(full.as_ref()) / nv, fro_norm(half.as_ref()) / nv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least-squares slope of `log seq_i` against `log i` over the 1-based range `[i_min, i_max]`.
pub fn decay_exponent(seq: &[f64], i_min: usize, i_max: usize) -> Result<DecayFit> {
    if i_min < 1 || i_max > seq.len() || i_max < i_min + 10 {
        return Err(Error::Spectrum(format!(
            "decay fit needs 1 ≤ i_min, i_max − i_min ≥ 10 and i_max ≤ {}, got [{i_min}, {i_max}]",
            seq.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (i_min..=i_max)
        .map(|i| {
            let v = seq[i - 1];
            if v > 0.0 { Ok(((i as f64).ln(), v.ln())) } else { Err(Error::Spectrum(format!("entry {i} is not positive: {v}"))) }
        })
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (m - 2.0) / sxx).sqrt();
    Ok(DecayFit { slope, stderr, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn laplacian_1d(n: usize) -> Mat<f64> {
        let h = 1.0 / n as f64;
        Mat::from_fn(n - 1, n - 1, |i, j| match i.abs_diff(j) {
            0 => 2.0 / (h * h),
            1 => -1.0 / (h * h),
            _ => 0.0,
        })
    }

    #[test]
    fn symmetric_eigenvalues() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        assert_eq!(eig_sym(d.as_ref()).unwrap().values, vec![1.0, 2.0, 3.0]);
        let n = 64;
        let vals = eig_sym(laplacian_1d(n).as_ref()).unwrap().values;
        let h = 1.0 / n as f64;
        for (i, v) in vals.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((i + 1) as f64 * PI * h / 2.0).sin().powi(2);
            assert!((v - exact).abs() <= 1e-10 * exact);
        }
        let a = random(50, 1);
        let s = sym_part(a.as_ref());
        let e = eig_sym(s.as_ref()).unwrap();
        assert!(e.spectrum.max_residual() <= 1e-10 * fro_norm(s.as_ref()));
        assert!(eig_sym(a.as_ref()).is_err());
    }

    #[test]
    fn general_eigenvalues() {
        let rot = Mat::from_fn(2, 2, |i, j| [[0.0, -1.0], [1.0, 0.0]][i][j]);
        let e = eig_general(rot.as_ref()).unwrap().spectrum;
        assert!((e.eigenvalues[0] - c64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((e.eigenvalues[1] - c64::new(0.0, 1.0)).norm() < 1e-14);
        let comp = Mat::from_fn(3, 3, |i, j| [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]][i][j]);
        let e = eig_general(comp.as_ref()).unwrap().spectrum;
        for z in &e.eigenvalues {
            assert!((z.powu(3) - c64::new(1.0, 0.0)).norm() < 1e-10);
        }
        assert_eq!(e.nu, 3);
        let a = random(40, 2);
        let e1 = eigenvalues_general(a.as_ref()).unwrap().eigenvalues;
        let e2 = eigenvalues_general(a.transpose()).unwrap().eigenvalues;
        for z in &e1 {
            assert!(e2.iter().any(|w| (z - w).norm() <= 1e-8 * z.norm().max(1.0)));
        }
        let full = eig_general(a.as_ref()).unwrap();
        assert!(full.spectrum.max_residual() <= 1e-10 * fro_norm(a.as_ref()));
    }

    #[test]
    fn multiplicities_are_clustered() {
        let d = Mat::from_fn(4, 4, |i, j| if i == j { [2.0, 1.0, 2.0, 2.0][i] } else { 0.0 });
        let e = eig_sym(d.as_ref()).unwrap().spectrum;
        assert_eq!(e.multiplicities, vec![1, 3]);
        assert_eq!(e.nu, 4);
    }

    #[test]
    fn singular_value_contracts() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [-2.0, 1.0][i] } else { 0.0 });
        assert_eq!(singular_values(d.as_ref(), "d").unwrap().values, vec![2.0, 1.0]);
        let a = random(30, 3);
        let s = singular_values(a.as_ref(), "a").unwrap().values;
        let fro2 = fro_norm(a.as_ref()).powi(2);
        assert!((s.iter().map(|v| v * v).sum::<f64>() - fro2).abs() <= 1e-10 * fro2);
        let ata = sym_part((a.transpose() * &a).as_ref());
        let mut ev = eigenvalues_sym(ata.as_ref()).unwrap();
        ev.reverse();
        for (si, li) in s.iter().zip(&ev) {
            assert!((si * si - li).abs() <= 1e-10 * ev[0]);
        }
        let spd = &ata + Mat::<f64>::identity(30, 30);
        let sv = singular_values(spd.as_ref(), "spd").unwrap().values;
        let mut ev = eigenvalues_sym(sym_part(spd.as_ref()).as_ref()).unwrap();
        ev.reverse();
        for (a, b) in sv.iter().zip(&ev) {
            assert!((a - b).abs() <= 1e-12 * ev[0]);
        }
    }

    #[test]
    fn resolvent_inverts() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, 4.0][i] } else { 0.0 });
        let r = resolvent_at_zero(d.as_ref()).unwrap();
        assert_eq!(r.matrix[(0, 0)], 0.5);
        assert_eq!(r.matrix[(1, 1)], 0.25);
        let a = &random(40, 4) + Mat::<f64>::identity(40, 40) * 10.0;
        assert!(resolvent_at_zero(a.as_ref()).unwrap().residual < 1e-12);
        let sing = Mat::<f64>::zeros(3, 3);
        assert!(resolvent_at_zero(sing.as_ref()).is_err());
    }

    #[test]
    fn field_of_values_examples() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [0.0, 1.0][i] } else { 0.0 });
        let f = field_of_values(d.as_ref(), 32).unwrap();
        assert!(f.points.iter().all(|p| p.z.im.abs() < 1e-14 && p.z.re > -1e-14 && p.z.re < 1.0 + 1e-14));
        assert!((f.points.iter().map(|p| p.z.re).fold(f64::MIN, f64::max) - 1.0).abs() < 1e-14);
        let j = Mat::from_fn(2, 2, |i, k| [[1.0, 1.0], [0.0, 1.0]][i][k]);
        let f = field_of_values(j.as_ref(), 256).unwrap();
        let rmax = f.points.iter().map(|p| (p.z - c64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
        assert!((rmax - 0.5).abs() < 1e-6);
    }

    #[test]
    fn lanczos_matches_dense() {
        // above the dense cutoff, the Lanczos path must reproduce the dense support values
        let n = DENSE_LIMIT + 20;
        let mut a = laplacian_1d(n + 1);
        let r = random(n, 5);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += 50.0 * r[(i, j)];
            }
        }
        let h = sym_part(a.as_ref());
        let k = skew_part(a.as_ref());
        let pencil = Pencil::new(h.as_ref(), k.as_ref()).unwrap();
        let mut warm = WarmBlock::new();
        for phi in [0.0f64, 1.0, 2.5, 4.0] {
            let (lz, v, _) = pencil.top(phi.cos(), phi.sin(), 1e-12, &mut warm).unwrap();
            let e = pencil.dense(phi.cos(), phi.sin()).self_adjoint_eigenvalues(Side::Lower).unwrap();
            let top = e[n - 1];
            assert!((lz - top).abs() <= 1e-10 * top.abs().max(1.0), "{lz} {top}");
            assert!((rayleigh(a.as_ref(), &v) * c64::cis(phi)).re - top <= 1e-8 * top.abs());
        }
    }

    #[test]
    fn semi_angle_of_normal_matrix() {
        // block diag of [[a, −b], [b, a]] has eigenvalues a ± ib and is normal: angle = max atan(b/a)
        let blocks = [(2.0, 1.0), (1.0, 1.5), (3.0, 0.2)];
        let mut m = Mat::<f64>::zeros(6, 6);
        for (k, (a, b)) in blocks.iter().enumerate() {
            m[(2 * k, 2 * k)] = *a;
            m[(2 * k + 1, 2 * k + 1)] = *a;
            m[(2 * k, 2 * k + 1)] = -b;
            m[(2 * k + 1, 2 * k)] = *b;
        }
        let s = numerical_range_semi_angles(m.as_ref()).unwrap();
        assert!((s.upper - 1.5f64.atan()).abs() < 1e-12);
        assert!((s.lower - 1.5f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn factorization_of_symmetric_matrix() {
        let a = random(20, 6);
        let h = &sym_part((a.transpose() * &a).as_ref()) + Mat::<f64>::identity(20, 20);
        let f = factorize_sector(h.as_ref(), h.as_ref()).unwrap();
        assert_eq!(f.b_norm, 0.0);
        assert!((f.s_min_eigenvalue - 1.0).abs() < 1e-15);
        let r = resolvent_at_zero(h.as_ref()).unwrap().matrix;
        let (full, half) = f.v_residuals(sym_part(r.as_ref()).as_ref());
        assert!(full < 1e-12);
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn factorization_identities() {
        let n = 30;
        let a = random(n, 7);
        let h = &sym_part((a.transpose() * &a).as_ref()) + Mat::<f64>::identity(n, n);
        let k = skew_part(random(n, 8).as_ref()) * 3.0;
        let l = &h + &k;
        let f = factorize_sector(l.as_ref(), h.as_ref()).unwrap();
        assert!(f.reconstruction_residual < 1e-12);
        assert!(f.h_half_residual < 1e-12);
        assert!(f.b_hermitian_residual < 1e-12);
        assert!(f.s_min_eigenvalue >= 1.0 - 1e-12);
        let lt = l.transpose().to_owned();
        let ft = factorize_sector(lt.as_ref(), h.as_ref()).unwrap();
        let sum = Mat::from_fn(n, n, |i, j| f.b[(i, j)] + ft.b[(i, j)]);
        assert!(mat_fro_c(sum.as_ref()) <= 1e-12 * mat_fro_c(f.b.as_ref()));
        let r = resolvent_at_zero(l.as_ref()).unwrap().matrix;
        let (full, _) = f.v_residuals(sym_part(r.as_ref()).as_ref());
        assert!(full < 1e-10);
        let theta = numerical_range_semi_angles(l.as_ref()).unwrap().max();
        assert!((f.b_norm - theta.tan()).abs() <= 1e-8 * f.b_norm);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let v: Vec<c64> = (0..n).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let bv: Vec<c64> = (0..n).map(|i| (0..n).map(|j| f.b[(i, j)] * v[j]).sum()).collect();
            let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            for sign in [1.0, -1.0] {
                let w: f64 = v.iter().zip(&bv).map(|(x, y)| (x + c64::new(0.0, sign) * y).norm_sqr()).sum();
                assert!(w >= nv * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn decay_fits() {
        let s: Vec<f64> = (1..=300).map(|i| (i as f64).powi(-2)).collect();
        let f = decay_exponent(&s, 1, 300).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && f.stderr < 1e-12);
        let s: Vec<f64> = (1..=300).map(|i| 5.0 / i as f64).collect();
        assert!((decay_exponent(&s, 1, 300).unwrap().slope + 1.0).abs() < 1e-12);
        let s: Vec<f64> = (1..=300).map(|i| (i as f64).powi(-2) * (1.0 + 0.1 * (i as f64).sin())).collect();
        assert!((decay_exponent(&s, 10, 200).unwrap().slope + 2.0).abs() < 0.05);
        assert!(decay_exponent(&s, 10, 15).is_err());
        assert!(decay_exponent(&[1.0; 20].iter().enumerate().map(|(i, _)| i as f64).collect::<Vec<_>>(), 1, 20).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn fov_points_lie_in_range_and_support(seed in 0u64..1000, n in 3usize..12) {
            let a = random(n, seed);
            let f = field_of_values(a.as_ref(), 32).unwrap();
            for p in &f.points {
                // the boundary point attains the support value in its direction
                prop_assert!(((p.z * c64::cis(p.phi)).re - p.support).abs() <= 1e-10 * (1.0 + p.support.abs()));
            }
        }
    }
}
