//! Dense matrices of the discrete operators and the constants of the coefficient conditions.

use faer::Mat;

use crate::c64;
use crate::error::{param, Error, Result};
use crate::frac::{kipriyanov_stencils, kappa_constant, right_derivative_stencils, FracConfig, RayStencils};
use crate::geometry::{Domain, Grid, Point};
use crate::spectral::{eigenvalues_sym, skew_part, sym_part};

/// Constant principal coefficients and an affine `ρ(Q) = ρ₀ + ρ₁|Q − P|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    n: usize,
    aij: Vec<f64>,
    pub rho0: f64,
    pub rho1: f64,
}

impl Coefficients {
    /// `aij` is row-major `n×n`.
    pub fn new(n: usize, aij: Vec<f64>, rho0: f64, rho1: f64) -> Result<Self> {
        if aij.len() != n * n {
            return Err(param("coefficients.aij", format!("expected {} entries, got {}", n * n, aij.len())));
        }
        if aij.iter().any(|v| !v.is_finite()) || !rho0.is_finite() || !rho1.is_finite() {
            return Err(param("coefficients", "entries must be finite"));
        }
        let scale = aij.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (aij[i * n + j] - aij[j * n + i]).abs() > 1e-14 * scale {
                    return Err(param("coefficients.aij", "matrix must be symmetric"));
                }
            }
        }
        let c = Self { n, aij, rho0, rho1 };
        let a = c.ellipticity();
        if !(a > 0.0) {
            return Err(param("coefficients.aij", format!("not elliptic, smallest eigenvalue {a}")));
        }
        Ok(c)
    }

    pub fn identity(n: usize, rho0: f64, rho1: f64) -> Result<Self> {
        let aij = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
        Self::new(n, aij, rho0, rho1)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.aij[i * self.n + j]
    }

    /// Ellipticity constant `a`: smallest eigenvalue of `(a^{ij})`.
    pub fn ellipticity(&self) -> f64 {
        match self.n {
            1 => self.aij[0],
            _ => {
                let (p, q, r) = (self.a(0, 0), self.a(0, 1), self.a(1, 1));
                0.5 * (p + r - ((p - r).powi(2) + 4.0 * q * q).sqrt())
            }
        }
    }

    /// `𝒜 = (Σ|a_ij|²)^{1/2}`.
    pub fn frobenius(&self) -> f64 {
        self.aij.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn rho_at(&self, r: f64) -> f64 {
        self.rho0 + self.rho1 * r
    }

    /// `(ϱ, 𝒫)`: infimum and supremum of `ρ` over the closed domain.
    pub fn rho_bounds(&self, domain: &Domain) -> (f64, f64) {
        let far = self.rho_at(domain.max_pole_distance());
        (self.rho0.min(far), self.rho0.max(far))
    }

    /// Hölder exponent of `ρ`; affine coefficients are Lipschitz.
    pub fn rho_exponent(&self) -> f64 {
        1.0
    }

    pub fn validate_on(&self, domain: &Domain, alpha: f64) -> Result<()> {
        if self.n != domain.dimension() {
            return Err(param("coefficients.aij", format!("dimension {} does not match the domain", self.n)));
        }
        let (lo, _) = self.rho_bounds(domain);
        if lo < 0.0 {
            return Err(param("coefficients.rho0", format!("rho must be non-negative on the domain, minimum is {lo}")));
        }
        if !(self.rho_exponent() > alpha) {
            return Err(param("alpha", "must be smaller than the Hölder exponent of rho"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Elliptic,
    Fractional,
    L,
    LAdjoint,
    H,
    Mass,
}

/// Dense matrix in the inner product `(f, g)_h = w Σ f ḡ`. Since `w` is scalar the
/// adjoint is the plain transpose.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: Mat<f64>,
    pub weight: f64,
    pub label: Label,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn transpose(&self, label: Label) -> Self {
        Self { entries: self.entries.transpose().to_owned(), weight: self.weight, label }
    }

    /// `(M f, f)_h` for a complex vector.
    pub fn form(&self, f: &[c64]) -> c64 {
        let mf = apply_real(&self.entries, f);
        mf.iter().zip(f).map(|(a, b)| a * b.conj()).sum::<c64>() * self.weight
    }
}

pub(crate) fn apply_real(m: &Mat<f64>, f: &[c64]) -> Vec<c64> {
    let n = m.nrows();
    let x = Mat::from_fn(n, 2, |i, j| if j == 0 { f[i].re } else { f[i].im });
    let y = m * &x;
    (0..n).map(|i| c64::new(y[(i, 0)], y[(i, 1)])).collect()
}

fn dense(rows: &RayStencils, n: usize, scale: impl Fn(usize) -> f64) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    for (q, row) in rows.rows.iter().enumerate() {
        let s = scale(q);
        for &(j, w) in row {
            m[(q, j)] += s * w;
        }
    }
    m
}

/// Central finite differences for `−D_j(a^{ij} D_i f)` with homogeneous Dirichlet data.
pub fn assemble_elliptic(coeffs: &Coefficients, grid: &Grid) -> Result<OperatorMatrix> {
    if coeffs.dimension() != grid.dimension() {
        return Err(param("coefficients.aij", "dimension does not match the grid"));
    }
    if !(coeffs.ellipticity() > 0.0) {
        return Err(param("coefficients.aij", "not elliptic"));
    }
    let n = grid.n_dof();
    let big_n = grid.n_per_axis();
    let [hx, hy] = grid.spacing();
    let mut m = Mat::<f64>::zeros(n, n);
    if grid.dimension() == 1 {
        let c = coeffs.a(0, 0) / (hx * hx);
        for i in 1..big_n {
            let q = grid.dof(i, 0).unwrap();
            m[(q, q)] = 2.0 * c;
            for nb in [i - 1, i + 1] {
                if let Some(p) = grid.dof(nb, 0) {
                    m[(q, p)] = -c;
                }
            }
        }
    } else {
        let (axx, axy, ayy) = (coeffs.a(0, 0) / (hx * hx), coeffs.a(0, 1) / (4.0 * hx * hy), coeffs.a(1, 1) / (hy * hy));
        for j in 1..big_n {
            for i in 1..big_n {
                let q = grid.dof(i, j).unwrap();
                m[(q, q)] = 2.0 * axx + 2.0 * ayy;
                let mut put = |ii: usize, jj: usize, v: f64| {
                    if let Some(p) = grid.dof(ii, jj) {
                        m[(q, p)] += v;
                    }
                };
                put(i - 1, j, -axx);
                put(i + 1, j, -axx);
                put(i, j - 1, -ayy);
                put(i, j + 1, -ayy);
                if axy != 0.0 {
                    // −2a¹² ∂x∂y f, centered
                    put(i + 1, j + 1, -2.0 * axy);
                    put(i - 1, j - 1, -2.0 * axy);
                    put(i + 1, j - 1, 2.0 * axy);
                    put(i - 1, j + 1, 2.0 * axy);
                }
            }
        }
    }
    Ok(OperatorMatrix { entries: m, weight: grid.weight(), label: Label::Elliptic })
}

fn rho_at_point(coeffs: &Coefficients, pole: Point, x: Point) -> f64 {
    coeffs.rho_at((x[0] - pole[0]).hypot(x[1] - pole[1]))
}

/// Row `q` holds `f ↦ ρ(Q_q)(𝔇^α f)(Q_q)`.
pub fn assemble_fractional(coeffs: &Coefficients, cfg: &FracConfig, grid: &Grid) -> Result<OperatorMatrix> {
    let st = kipriyanov_stencils(grid, cfg)?;
    let nodes = grid.nodes();
    let m = dense(&st, grid.n_dof(), |q| coeffs.rho_at(nodes[q].r));
    Ok(OperatorMatrix { entries: m, weight: grid.weight(), label: Label::Fractional })
}

pub fn assemble_l(coeffs: &Coefficients, cfg: &FracConfig, grid: &Grid) -> Result<OperatorMatrix> {
    let e = assemble_elliptic(coeffs, grid)?;
    let f = assemble_fractional(coeffs, cfg, grid)?;
    Ok(combine(&e, &f, Label::L))
}

pub fn combine(e: &OperatorMatrix, f: &OperatorMatrix, label: Label) -> OperatorMatrix {
    OperatorMatrix { entries: &e.entries + &f.entries, weight: e.weight, label }
}

/// Right-side fractional part `f ↦ 𝔇^α_{d−}(ρ f)`, assembled along the rays.
pub fn assemble_right_fractional(coeffs: &Coefficients, cfg: &FracConfig, grid: &Grid) -> Result<OperatorMatrix> {
    let pole = grid.domain().pole();
    let st = right_derivative_stencils(grid, cfg, |x| rho_at_point(coeffs, pole, x))?;
    Ok(OperatorMatrix { entries: dense(&st, grid.n_dof(), |_| 1.0), weight: grid.weight(), label: Label::Fractional })
}

/// `L⁺_h`: elliptic part plus the right-side derivative of `ρ f`.
pub fn assemble_l_adjoint(coeffs: &Coefficients, cfg: &FracConfig, grid: &Grid) -> Result<OperatorMatrix> {
    let e = assemble_elliptic(coeffs, grid)?;
    let f = assemble_right_fractional(coeffs, cfg, grid)?;
    Ok(combine(&e, &f, Label::LAdjoint))
}

/// `(M + Mᵀ)/2`.
pub fn real_component(m: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix { entries: sym_part(m.entries.as_ref()), weight: m.weight, label: Label::H }
}

/// `(M − Mᵀ)/2i`, Hermitian.
pub fn imaginary_component(m: &OperatorMatrix) -> Mat<c64> {
    let k = skew_part(m.entries.as_ref());
    Mat::from_fn(k.nrows(), k.ncols(), |i, j| c64::new(0.0, -k[(i, j)]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eta {
    pub eta: f64,
    /// `η^{−2}`, the smallest eigenvalue of the symmetric part of the fractional matrix.
    pub inv_eta_sq: f64,
}

pub fn estimate_eta(fractional: &OperatorMatrix) -> Result<Eta> {
    let lmin = eigenvalues_sym(sym_part(fractional.entries.as_ref()).as_ref())?[0];
    if !(lmin > 0.0) {
        return Err(Error::AccretivityViolated { lambda_min: lmin });
    }
    Ok(Eta { eta: lmin.powf(-0.5), inv_eta_sq: lmin })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseConstants {
    pub n: usize,
    pub alpha: f64,
    pub a: f64,
    /// `𝒜`.
    pub big_a: f64,
    /// `ϱ`.
    pub rho_min: f64,
    /// `𝒫`.
    pub rho_max: f64,
    pub delta: f64,
    /// `𝒦`.
    pub kappa: f64,
    /// `𝓘 = 𝒫𝒦`.
    pub big_i: f64,
    pub eta: f64,
}

pub fn operator_constants(coeffs: &Coefficients, cfg: &FracConfig, domain: &Domain, eta: f64) -> Result<BaseConstants> {
    let delta = domain.diameter();
    let kappa = kappa_constant(cfg.alpha, delta, domain.dimension())?;
    let (rho_min, rho_max) = coeffs.rho_bounds(domain);
    Ok(BaseConstants {
        n: domain.dimension(),
        alpha: cfg.alpha,
        a: coeffs.ellipticity(),
        big_a: coeffs.frobenius(),
        rho_min,
        rho_max,
        delta,
        kappa,
        big_i: rho_max * kappa,
        eta,
    })
}

/// Discrete `‖f‖²_h`.
pub fn l2_norm_sq(grid: &Grid, f: &[c64]) -> f64 {
    grid.weight() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Discrete `‖∇_h f‖²_h` from forward differences over every grid edge, boundary
/// values being zero.
pub fn gradient_norm_sq(grid: &Grid, f: &[c64]) -> f64 {
    let n = grid.n_per_axis();
    let [hx, hy] = grid.spacing();
    let val = |i: usize, j: usize| grid.dof(i, j).map_or(c64::new(0.0, 0.0), |q| f[q]);
    let mut s = 0.0;
    if grid.dimension() == 1 {
        for i in 0..n {
            s += ((val(i + 1, 0) - val(i, 0)) / hx).norm_sqr();
        }
    } else {
        for j in 0..=n {
            for i in 0..n {
                s += ((val(i + 1, j) - val(i, j)) / hx).norm_sqr();
            }
        }
        for j in 0..n {
            for i in 0..=n {
                s += ((val(i, j + 1) - val(i, j)) / hy).norm_sqr();
            }
        }
    }
    grid.weight() * s
}

/// Eigenvalues of the discrete Dirichlet Laplacian `−Δ_h`, ascending.
pub fn discrete_laplacian_eigenvalues(grid: &Grid, count: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let n = grid.n_per_axis();
    let [hx, hy] = grid.spacing();
    let mode = |k: usize, h: f64| 4.0 / (h * h) * (k as f64 * PI / (2.0 * n as f64)).sin().powi(2);
    let mut v: Vec<f64> = if grid.dimension() == 1 {
        (1..n).map(|k| mode(k, hx)).collect()
    } else {
        (1..n).flat_map(|j| (1..n).map(move |k| mode(j, hx) + mode(k, hy))).collect()
    };
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::{kipriyanov_apply, GridFunction};
    use crate::geometry::build_grid;
    use crate::spectral::{eigenvalues_sym, fro_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_interval(n: usize) -> Grid {
        build_grid(&Domain::interval(1.0).unwrap(), n).unwrap()
    }

    fn unit_square(n: usize) -> Grid {
        build_grid(&Domain::rectangle(1.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn elliptic_stencil_1d() {
        let g = unit_interval(4);
        let e = assemble_elliptic(&Coefficients::identity(1, 1.0, 0.0).unwrap(), &g).unwrap();
        assert_eq!(e.entries[(1, 1)], 32.0);
        assert_eq!(e.entries[(1, 0)], -16.0);
        assert_eq!(e.entries[(0, 2)], 0.0);
        assert_eq!(e.weight, 0.25);
    }

    #[test]
    fn elliptic_spectra_match_continuum() {
        let e = assemble_elliptic(&Coefficients::identity(1, 1.0, 0.0).unwrap(), &unit_interval(400)).unwrap();
        let v = eigenvalues_sym(e.entries.as_ref()).unwrap();
        assert!((v[0] - PI * PI).abs() < 1e-4 * PI * PI);
        let g = unit_square(32);
        let e = assemble_elliptic(&Coefficients::identity(2, 1.0, 0.0).unwrap(), &g).unwrap();
        let v = eigenvalues_sym(e.entries.as_ref()).unwrap();
        assert!((v[0] - 2.0 * PI * PI).abs() < 0.02 * 2.0 * PI * PI);
        let fd = discrete_laplacian_eigenvalues(&g, 50);
        for (a, b) in v.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-10 * b);
        }
    }

    #[test]
    fn mixed_coefficients_stay_symmetric() {
        let c = Coefficients::new(2, vec![2.0, 0.5, 0.5, 1.0], 1.0, 0.0).unwrap();
        let e = assemble_elliptic(&c, &build_grid(&Domain::rectangle(1.0, 2.0).unwrap(), 8).unwrap()).unwrap();
        assert!(crate::spectral::asymmetry(e.entries.as_ref()) == 0.0);
        assert!(eigenvalues_sym(e.entries.as_ref()).unwrap()[0] > 0.0);
        assert!(Coefficients::new(2, vec![1.0, 2.0, 2.0, 1.0], 1.0, 0.0).is_err());
        assert!(Coefficients::new(2, vec![1.0, 0.1, 0.0, 1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn constants() {
        let c2 = Coefficients::identity(2, 1.0, 0.0).unwrap();
        assert_eq!(c2.ellipticity(), 1.0);
        assert!((c2.frobenius() - 2f64.sqrt()).abs() < 1e-15);
        let c1 = Coefficients::identity(1, 1.0, 0.0).unwrap();
        let cfg = FracConfig::new(0.5, 1).unwrap();
        let k = operator_constants(&c1, &cfg, &Domain::interval(1.0).unwrap(), 1.0).unwrap();
        assert_eq!(k.big_a, 1.0);
        assert!((k.big_i - 3.0 / PI.sqrt()).abs() < 1e-14);
        let affine = Coefficients::identity(2, 1.0, 2.0).unwrap();
        let (lo, hi) = affine.rho_bounds(&Domain::rectangle(1.0, 1.0).unwrap());
        assert_eq!(lo, 1.0);
        assert!((hi - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn fractional_matrix_matches_operator() {
        for g in [unit_interval(40), unit_square(8)] {
            let n = g.dimension();
            let cfg = FracConfig::new(0.6, n).unwrap();
            let c = Coefficients::identity(n, 1.5, 0.7).unwrap();
            let m = assemble_fractional(&c, &cfg, &g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let f: Vec<f64> = (0..g.n_dof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let direct = kipriyanov_apply(&GridFunction::from_real(&f), &cfg, &g).unwrap();
            let mf = apply_real(&m.entries, &GridFunction::from_real(&f).values);
            for (q, node) in g.nodes().iter().enumerate() {
                let expect = c.rho_at(node.r) * direct.values[q].re;
                assert!((mf[q].re - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
            let ones = vec![1.0; g.n_dof()];
            let rows: Vec<f64> = (0..g.n_dof()).map(|q| (0..g.n_dof()).map(|j| m.entries[(q, j)]).sum()).collect();
            let direct = kipriyanov_apply(&GridFunction::from_real(&ones), &cfg, &g).unwrap();
            for (q, node) in g.nodes().iter().enumerate() {
                let expect = c.rho_at(node.r) * direct.values[q].re;
                assert!((rows[q] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rho_scaling_and_zero_rho() {
        let g = unit_interval(20);
        let cfg = FracConfig::new(0.5, 1).unwrap();
        let m1 = assemble_fractional(&Coefficients::identity(1, 1.0, 0.0).unwrap(), &cfg, &g).unwrap();
        let m3 = assemble_fractional(&Coefficients::identity(1, 3.0, 0.0).unwrap(), &cfg, &g).unwrap();
        let diff = &m3.entries - &m1.entries * 3.0;
        assert!(fro_norm(diff.as_ref()) <= 1e-14 * fro_norm(m3.entries.as_ref()));
        let eta1 = estimate_eta(&m1).unwrap().inv_eta_sq;
        let eta3 = estimate_eta(&m3).unwrap().inv_eta_sq;
        assert!((eta3 - 3.0 * eta1).abs() <= 1e-12 * eta3);
        let zero = Coefficients::identity(1, 0.0, 0.0).unwrap();
        let l = assemble_l(&zero, &cfg, &g).unwrap();
        let lp = assemble_l_adjoint(&zero, &cfg, &g).unwrap();
        let e = assemble_elliptic(&zero, &g).unwrap();
        assert!(fro_norm((&l.entries - &e.entries).as_ref()) == 0.0);
        assert!(fro_norm((&lp.entries - &e.entries).as_ref()) == 0.0);
        let f0 = assemble_fractional(&zero, &cfg, &g).unwrap();
        assert!(matches!(estimate_eta(&f0), Err(Error::AccretivityViolated { .. })));
    }

    #[test]
    fn components_reconstruct() {
        let m = OperatorMatrix {
            entries: Mat::from_fn(2, 2, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.0 }),
            weight: 1.0,
            label: Label::L,
        };
        let re = real_component(&m);
        assert_eq!(re.entries[(0, 1)], 0.5);
        assert_eq!(re.entries[(1, 0)], 0.5);
        let im = imaginary_component(&m);
        assert_eq!(im[(0, 1)], c64::new(0.0, -0.5));
        assert_eq!(im[(1, 0)], c64::new(0.0, 0.5));
        for i in 0..2 {
            for j in 0..2 {
                let z = c64::new(re.entries[(i, j)], 0.0) + c64::new(0.0, 1.0) * im[(i, j)];
                assert_eq!(z, c64::new(m.entries[(i, j)], 0.0));
                assert_eq!(im[(i, j)], im[(j, i)].conj());
            }
        }
    }

    #[test]
    fn adjoint_consistency_improves_with_refinement() {
        for (dom, ns) in [(Domain::interval(1.0).unwrap(), [20usize, 40, 80]), (Domain::rectangle(1.0, 1.0).unwrap(), [6, 12, 24])] {
            let n = dom.dimension();
            let c = Coefficients::identity(n, 1.0, 0.5).unwrap();
            let mut prev = f64::INFINITY;
            for big_n in ns {
                let g = build_grid(&dom, big_n).unwrap();
                let cfg = FracConfig::new(0.5, n).unwrap();
                let l = assemble_l(&c, &cfg, &g).unwrap();
                let lp = assemble_l_adjoint(&c, &cfg, &g).unwrap();
                let d = &l.entries.transpose() - &lp.entries;
                let rel = fro_norm(d.as_ref()) / fro_norm(l.entries.as_ref());
                assert!(rel < prev, "n={n} N={big_n}: {rel} vs {prev}");
                prev = rel;
            }
        }
    }

    #[test]
    fn summation_by_parts() {
        let g = unit_square(6);
        let e = assemble_elliptic(&Coefficients::identity(2, 1.0, 0.0).unwrap(), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<c64> = (0..g.n_dof()).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let form = e.form(&f);
        let grad = gradient_norm_sq(&g, &f);
        assert!((form.re - grad).abs() <= 1e-12 * grad && form.im.abs() <= 1e-12 * grad);
    }
}
