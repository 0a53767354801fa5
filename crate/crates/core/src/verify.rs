//! Evaluation of the explicit constants (sector vertex and angle, comparison spectra, trace
//! bounds) and the checks that compare them with discrete spectra.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::assembly::{gradient_norm_sq, l2_norm_sq, BaseConstants, OperatorMatrix};
use crate::c64;
use crate::error::{param, Error, Result};
use crate::frac::{kipriyanov_apply, FracConfig, GridFunction};
use crate::geometry::{Domain, Grid};
use crate::spectral::{decay_exponent, FovBoundary};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable(String),
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok { Verdict::Pass } else { Verdict::Fail }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail)
    }
}

/// One claim evaluated at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ClaimRecord {
    pub id: String,
    pub anchor: String,
    pub measured: BTreeMap<String, f64>,
    pub bound: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ClaimRecord {
    pub fn new(id: &str, tolerance: f64) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor(id).unwrap_or("").to_string(),
            measured: BTreeMap::new(),
            bound: BTreeMap::new(),
            tolerance,
            verdict: Verdict::Pass,
            notes: Vec::new(),
        }
    }

    pub fn measure(mut self, key: &str, v: f64) -> Self {
        self.measured.insert(key.to_string(), v);
        self
    }

    pub fn limit(mut self, key: &str, v: f64) -> Self {
        self.bound.insert(key.to_string(), v);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }
}

/// Fixed claim registry: id and the statement it checks.
pub const CLAIMS: &[(&str, &str)] = &[
    ("fractional.bound", "‖𝔇^α f‖ ≤ 𝒦‖f‖_{H¹₀} for smooth f vanishing on the boundary"),
    ("accretivity", "Re(L f, f) ≥ a‖∇f‖² + η^{−2}‖f‖² for L and its adjoint; H positive definite"),
    ("subordination", "½𝔱[f] ≤ |𝔞[f]| ≤ sec θ · ½𝔱[f] with 𝔱 = 2H, 𝔞 = −Lᵀ"),
    ("sector.formulas", "γ(ξ) = 0 and tan θ₀ = 1/b(ξ)"),
    ("sector.enclosure", "spectrum and numerical range of L inside the sector with vertex γ and semi-angle θ"),
    ("sector.enclosure_resolvent", "numerical range of R = L^{−1} inside the sector with vertex 0 and semi-angle θ₀"),
    ("factorization.reconstruction", "L = H^{1/2}(I + iB)H^{1/2}"),
    ("factorization.real_component", "Re R = ½H^{−1/2}(I + B²)^{−1}H^{−1/2} as displayed"),
    ("factorization.b_norm", "‖B‖ ≤ tan θ with θ the measured semi-angle"),
    ("factorization.s_inverse", "‖(I + B²)^{−1}‖ ≤ 1"),
    ("factorization.adjoint", "B from L and from Lᵀ are negatives"),
    ("weyl.sandwich", "λ_i(Y₀) ≤ λ_i(H) ≤ λ_i(Y₁) index-wise, within the discretization band"),
    ("weyl.constant", "λ_i(Y₀) ~ E₀ i^{2/n} with E₀ = 4πμ₀[Γ(n/2+1)/mes Ω]^{2/n}"),
    ("weyl.decay", "λ_i(Re R) ≍ i^{−2/n}"),
    ("schatten.decay", "s_i(R) ≍ i^{−2/n}"),
    ("schatten.membership", "R ∈ 𝔖_p iff p > n/2 (sufficient: p = 1 for n = 1, p > n for n ≥ 2)"),
    ("completeness", "θ₀ < π/n implies completeness; cone angle 0 < ϑ(R) ≤ 2θ₀"),
    ("sumbound.intermediate", "Σ^k|λ_m(R)|^p ≤ sec^p θ Σ^k s_m(Re R)^p"),
    ("sumbound.final", "Σ^k|λ_m(R)|^p ≤ sec^p θ ‖S^{−1}‖ Σ^k λ_m(Y₀)^{−p}"),
    ("sumbound.tail", "|λ_i(R)| = o(i^{−2/n+ε})"),
    ("refinement.sector_margin", "margin needed for the sector enclosure does not grow under refinement"),
    ("refinement.weyl_band", "Weyl sandwich band shrinks under refinement"),
    ("refinement.monotone", "every pass at N remains a pass at 2N"),
];

pub fn anchor(id: &str) -> Option<&'static str> {
    CLAIMS.iter().find(|c| c.0 == id).map(|c| c.1)
}

// ---------------------------------------------------------------- sector constants

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorParams {
    pub a: f64,
    pub big_a: f64,
    pub big_i: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub b: f64,
    pub gamma: f64,
    pub theta: f64,
    pub xi: f64,
    /// Semi-angle at `γ = 0` from the closed form.
    pub theta0: f64,
    /// `arctan(1/b(ξ))`, the same angle by the second route.
    pub theta0_from_b: f64,
}

/// `b(ε) = a(𝓘ε/2 + 𝒜)^{−1}`.
pub fn b_of(a: f64, big_a: f64, big_i: f64, eps: f64) -> f64 {
    a / (big_i * eps / 2.0 + big_a)
}

/// `γ(ε) = η^{−2} − a(𝓘/2)(𝓘ε²/2 + 𝒜ε)^{−1}`.
pub fn gamma_of(a: f64, big_a: f64, big_i: f64, eta: f64, eps: f64) -> f64 {
    eta.powi(-2) - a * big_i / 2.0 / (big_i / 2.0 * eps * eps + big_a * eps)
}

pub fn sector_params(base: &BaseConstants, eps: f64) -> Result<SectorParams> {
    let (a, big_a, big_i, eta) = (base.a, base.big_a, base.big_i, base.eta);
    if !(eps > 0.0) {
        return Err(param("epsilon", format!("must be positive, got {eps}")));
    }
    for (name, v) in [("a", a), ("A", big_a), ("I", big_i), ("eta", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Spectrum(format!("sector constant {name} must be positive, got {v}")));
        }
    }
    // √((𝒜/𝓘)² + aη²) − 𝒜/𝓘, rationalized against cancellation
    let xi = a * eta * eta / (((big_a / big_i).powi(2) + a * eta * eta).sqrt() + big_a / big_i);
    let theta0 = (((big_a / (2.0 * a)).powi(2) + big_i * big_i * eta * eta / (4.0 * a)).sqrt() + big_a / (2.0 * a)).atan();
    Ok(SectorParams {
        a,
        big_a,
        big_i,
        eta,
        epsilon: eps,
        b: b_of(a, big_a, big_i, eps),
        gamma: gamma_of(a, big_a, big_i, eta, eps),
        theta: (big_i * eps / (2.0 * a) + big_a / a).atan(),
        xi,
        theta0,
        theta0_from_b: (1.0 / b_of(a, big_a, big_i, xi)).atan(),
    })
}

pub fn sector_formulas_claim(p: &SectorParams) -> ClaimRecord {
    let gamma_xi = gamma_of(p.a, p.big_a, p.big_i, p.eta, p.xi);
    let tan_gap = (p.theta0.tan() - 1.0 / b_of(p.a, p.big_a, p.big_i, p.xi)).abs() / p.theta0.tan();
    let ok = gamma_xi.abs() <= 1e-12 * p.eta.powi(-2).max(1.0) && tan_gap <= 1e-10;
    ClaimRecord::new("sector.formulas", 1e-10)
        .measure("gamma_at_xi", gamma_xi)
        .measure("tan_theta0_relative_gap", tan_gap)
        .measure("xi", p.xi)
        .measure("theta0", p.theta0)
        .verdict(Verdict::from_bool(ok))
}

// ---------------------------------------------------------------- enclosure

#[derive(Debug, Clone, PartialEq)]
pub struct Enclosure {
    pub checked: usize,
    pub violations: usize,
    /// Largest `|arg(z − γ)| − θ` over all points (negative when strictly inside).
    pub worst_excess: f64,
    pub worst_point: c64,
    /// `max(0, worst_excess)`: the smallest margin that would have sufficed.
    pub needed_margin: f64,
}

/// Counts points with `|arg(z − γ)| > θ + margin`. Eigenvalues are compared against the
/// vertex at the origin, boundary points against `γ`.
pub fn check_sector_enclosure(fov: &[c64], eigs: &[c64], gamma: f64, theta: f64, margin: f64) -> Enclosure {
    let mut e = Enclosure { checked: 0, violations: 0, worst_excess: f64::NEG_INFINITY, worst_point: c64::new(0.0, 0.0), needed_margin: 0.0 };
    let shifted = fov.iter().map(|&z| (z, z - gamma)).chain(eigs.iter().map(|&z| (z, z)));
    for (z, w) in shifted {
        let excess = if w.norm() == 0.0 { f64::NEG_INFINITY } else { w.arg().abs() - theta };
        e.checked += 1;
        if excess > margin {
            e.violations += 1;
        }
        if excess > e.worst_excess {
            e.worst_excess = excess;
            e.worst_point = z;
        }
    }
    e.needed_margin = e.worst_excess.max(0.0);
    e
}

pub fn enclosure_claim(id: &str, e: &Enclosure, gamma: f64, theta: f64, margin: f64) -> ClaimRecord {
    let mut c = ClaimRecord::new(id, margin)
        .measure("points_checked", e.checked as f64)
        .measure("violations", e.violations as f64)
        .measure("worst_excess", e.worst_excess)
        .measure("needed_margin", e.needed_margin)
        .limit("gamma", gamma)
        .limit("theta", theta)
        .verdict(Verdict::from_bool(e.violations == 0));
    if e.violations > 0 {
        c = c.note(format!("worst offender {:.6e}{:+.6e}i", e.worst_point.re, e.worst_point.im));
    }
    c
}

// ---------------------------------------------------------------- comparison spectra

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylBounds {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub mu0: f64,
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub e0: f64,
    pub e1: f64,
}

/// `E = 4πμ[Γ(n/2+1)/mes Ω]^{2/n}`.
pub fn weyl_constant(mu: f64, n: usize, measure: f64) -> f64 {
    let nf = n as f64;
    4.0 * PI * mu * (gamma(nf / 2.0 + 1.0) / measure).powf(2.0 / nf)
}

/// Comparison coefficients `(μ₀, σ₀, μ₁, σ₁)`.
pub fn comparison_coefficients(base: &BaseConstants) -> (f64, f64, f64, f64) {
    (base.a, base.eta.powi(-2), base.big_a + base.big_i / 2.0, base.big_i / 2.0)
}

/// Bounds for the `i`-th (1-based) eigenvalue of the real component.
pub fn weyl_bounds(i: usize, base: &BaseConstants, domain: &Domain) -> Result<WeylBounds> {
    if i == 0 {
        return Err(param("index", "is 1-based"));
    }
    let lap = domain.dirichlet_laplacian_eigenvalues(i)[i - 1];
    let (mu0, sigma0, mu1, sigma1) = comparison_coefficients(base);
    let (n, m) = (domain.dimension(), domain.measure());
    Ok(WeylBounds {
        index: i,
        lower: mu0 * lap + sigma0,
        upper: mu1 * lap + sigma1,
        mu0,
        sigma0,
        mu1,
        sigma1,
        e0: weyl_constant(mu0, n, m),
        e1: weyl_constant(mu1, n, m),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub checked: usize,
    pub violations: usize,
    /// Largest band `tol_i` used, relative to `λ_i(Y₀)`.
    pub max_relative_band: f64,
    /// `tol_i` per index.
    pub band: Vec<f64>,
}

/// Index-wise `λ_i(Y₀) − tol_i ≤ λ_i(H_h) ≤ λ_i(Y₁) + tol_i` for `i ≤ count`, with
/// `tol_i = μ_k(λ_i(−Δ) − λ_i(−Δ_h))`, the gap between the exact and the discrete Laplacian.
pub fn weyl_sandwich(h_eigs: &[f64], exact_lap: &[f64], discrete_lap: &[f64], base: &BaseConstants, count: usize) -> Result<Sandwich> {
    if h_eigs.len() < count || exact_lap.len() < count || discrete_lap.len() < count {
        return Err(Error::Spectrum(format!("sandwich needs {count} eigenvalues")));
    }
    let (mu0, sigma0, mu1, sigma1) = comparison_coefficients(base);
    let mut s = Sandwich { checked: count, violations: 0, max_relative_band: 0.0, band: Vec::with_capacity(count) };
    for i in 0..count {
        let gap = (exact_lap[i] - discrete_lap[i]).max(0.0);
        let (lo, hi) = (mu0 * exact_lap[i] + sigma0, mu1 * exact_lap[i] + sigma1);
        let (tlo, thi) = (mu0 * gap, mu1 * gap);
        let slack = 1e-10 * h_eigs[i].abs();
        if h_eigs[i] < lo - tlo - slack || h_eigs[i] > hi + thi + slack {
            s.violations += 1;
        }
        s.band.push(tlo);
        s.max_relative_band = s.max_relative_band.max(tlo / lo);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub slope: f64,
    pub stderr: f64,
    pub expected: f64,
    /// `min` and `max` of `seq_i · i^{2/n}` over the window.
    pub c1: f64,
    pub c2: f64,
    pub window: (usize, usize),
}

/// Decay window `[5, n_dof/4]`.
pub fn decay_window(n_dof: usize) -> (usize, usize) {
    (5, n_dof / 4)
}

pub fn decay_check(seq_desc: &[f64], n: usize) -> Result<DecayCheck> {
    let window = decay_window(seq_desc.len());
    let fit = decay_exponent(seq_desc, window.0, window.1)?;
    let e = 2.0 / n as f64;
    let scaled = (window.0..=window.1).map(|i| seq_desc[i - 1] * (i as f64).powf(e));
    let (c1, c2) = scaled.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(DecayCheck { slope: fit.slope, stderr: fit.stderr, expected: -e, c1, c2, window })
}

pub fn decay_claim(id: &str, d: &DecayCheck, tol: f64) -> ClaimRecord {
    ClaimRecord::new(id, tol)
        .measure("slope", d.slope)
        .measure("slope_stderr", d.stderr)
        .measure("c1", d.c1)
        .measure("c2", d.c2)
        .measure("window_start", d.window.0 as f64)
        .measure("window_end", d.window.1 as f64)
        .limit("expected_slope", d.expected)
        .verdict(Verdict::from_bool((d.slope - d.expected).abs() <= tol && d.c1 > 0.0))
}

// ---------------------------------------------------------------- Schatten classes

/// Tail exponents at or above this count as a divergent series.
pub const DIVERGENCE_EXPONENT: f64 = -1.05;
/// Relative size of the fitted tail beyond the last term accepted as a Cauchy tail.
pub const TAIL_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchattenClass {
    pub p: f64,
    pub n: usize,
    /// Fitted exponent of `s_i`.
    pub decay: f64,
    /// Fitted exponent of `s_i^p`.
    pub tail_exponent: f64,
    pub partial_sum: f64,
    /// Power-law estimate of `Σ_{i>N} s_i^p` relative to the partial sum (infinite if divergent).
    pub relative_tail: f64,
    pub converges: bool,
    /// `p = 1` for `n = 1`, `p > n` for `n ≥ 2`.
    pub sufficient: bool,
    /// `n < 2p`.
    pub necessary: bool,
}

impl SchattenClass {
    /// Membership implied by the tail test.
    pub fn member(&self) -> bool {
        self.converges
    }

    /// The tail test agrees with both the sufficient and the necessary condition.
    pub fn consistent(&self) -> bool {
        !(self.sufficient && !self.converges) && !(!self.necessary && self.converges)
    }
}

/// Classifies the (descending) sequence of s-numbers against `𝔖_p`, fitting the tail over the
/// decay window.
pub fn schatten_classify(s: &[f64], p: f64, n: usize) -> Result<SchattenClass> {
    if !(p >= 1.0) {
        return Err(param("schatten.p_list", format!("p must be at least 1, got {p}")));
    }
    let (lo, hi) = decay_window(s.len());
    let fit = decay_exponent(s, lo, hi)?;
    let tail_exponent = p * fit.slope;
    let partial_sum: f64 = s.iter().map(|v| v.powf(p)).sum();
    let converges = tail_exponent < DIVERGENCE_EXPONENT;
    let relative_tail = if converges {
        // Σ_{i>N} C i^e ≈ C N^{e+1}/(−e−1) with C from the fit
        let big_n = s.len() as f64;
        let c = (p * fit.intercept).exp();
        c * big_n.powf(tail_exponent + 1.0) / (-tail_exponent - 1.0) / partial_sum
    } else {
        f64::INFINITY
    };
    let nf = n as f64;
    let sufficient = if n == 1 { p >= 1.0 } else { p > nf };
    Ok(SchattenClass {
        p,
        n,
        decay: fit.slope,
        tail_exponent,
        partial_sum,
        relative_tail,
        converges: converges && relative_tail < TAIL_TOLERANCE,
        sufficient,
        necessary: nf < 2.0 * p,
    })
}

pub fn schatten_claim(classes: &[SchattenClass]) -> ClaimRecord {
    let mut c = ClaimRecord::new("schatten.membership", TAIL_TOLERANCE).limit("divergence_exponent", DIVERGENCE_EXPONENT);
    let mut ok = true;
    for k in classes {
        let tag = format!("p={}", k.p);
        c = c
            .measure(&format!("{tag}.tail_exponent"), k.tail_exponent)
            .measure(&format!("{tag}.relative_tail"), k.relative_tail)
            .measure(&format!("{tag}.member"), k.member() as u8 as f64)
            .limit(&format!("{tag}.sufficient"), k.sufficient as u8 as f64)
            .limit(&format!("{tag}.necessary"), k.necessary as u8 as f64);
        ok &= k.consistent();
    }
    c.verdict(Verdict::from_bool(ok))
}

// ---------------------------------------------------------------- completeness

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Completeness {
    pub flag: bool,
    pub cone_angle: f64,
    pub arg_asymmetry: f64,
    pub rank: usize,
    pub n_dof: usize,
}

pub fn completeness_condition(theta0: f64, fov_of_r: &FovBoundary, rank: usize, n_dof: usize, n: usize) -> Completeness {
    let (hi, lo) = (fov_of_r.max_arg(), fov_of_r.min_arg());
    Completeness {
        flag: theta0 < PI / n as f64,
        cone_angle: 2.0 * hi.abs().max(lo.abs()),
        arg_asymmetry: (hi + lo).abs(),
        rank,
        n_dof,
    }
}

/// Cone angles below this are treated as a symmetric (degenerate) operator.
pub const DEGENERATE_CONE: f64 = 1e-10;

pub fn completeness_claim(c: &Completeness, theta0: f64, margin: f64) -> ClaimRecord {
    let rec = ClaimRecord::new("completeness", margin)
        .measure("theta0_below_pi_over_n", c.flag as u8 as f64)
        .measure("cone_angle", c.cone_angle)
        .measure("arg_asymmetry", c.arg_asymmetry)
        .measure("eigenvector_rank", c.rank as f64)
        .limit("cone_angle_max", 2.0 * theta0 + margin)
        .limit("n_dof", c.n_dof as f64)
        .note("a diagonalizable matrix always has a complete eigenvector system");
    if c.cone_angle <= DEGENERATE_CONE {
        return rec.verdict(Verdict::NotApplicable("cone angle vanishes: the fractional term does not contribute a skew part".into()));
    }
    let ok = c.flag && c.arg_asymmetry <= 1e-6 && c.cone_angle <= 2.0 * theta0 + margin && c.rank == c.n_dof;
    rec.verdict(Verdict::from_bool(ok))
}

// ---------------------------------------------------------------- trace-type bounds

#[derive(Debug, Clone, PartialEq)]
pub struct SumBound {
    pub p: f64,
    /// `Σ^k |λ_m(R)|^p`.
    pub lhs: Vec<f64>,
    /// `sec^p θ Σ^k s_m(V)^p`.
    pub intermediate: Vec<f64>,
    /// `sec^p θ ‖S^{−1}‖ Σ^k λ_m(Y₀)^{−p}`.
    pub last: Vec<f64>,
    /// The intermediate chain evaluated with the analytic angle instead.
    pub intermediate_analytic: Vec<f64>,
    pub worst_intermediate: f64,
    pub worst_final: f64,
}

/// Partial-sum comparison for every `k` up to the shortest input. `lambda_r` are moduli of
/// the eigenvalues of `R` in descending order, `v` the eigenvalues of `Re R` descending and
/// `y0` the comparison eigenvalues ascending.
pub fn eigenvalue_sum_bound(lambda_r: &[f64], v: &[f64], y0: &[f64], s_inv_norm: f64, theta: f64, theta0: f64, p: f64) -> Result<SumBound> {
    let k = lambda_r.len();
    if v.len() != k || y0.len() < k {
        return Err(Error::Spectrum(format!(
            "sum bound inputs disagree in length: {} eigenvalues, {} s-numbers, {} comparison values",
            k,
            v.len(),
            y0.len()
        )));
    }
    let sec = 1.0 / theta.cos();
    let sec0 = 1.0 / theta0.cos();
    let mut out = SumBound {
        p,
        lhs: Vec::with_capacity(k),
        intermediate: Vec::with_capacity(k),
        last: Vec::with_capacity(k),
        intermediate_analytic: Vec::with_capacity(k),
        worst_intermediate: 0.0,
        worst_final: 0.0,
    };
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for m in 0..k {
        a += lambda_r[m].powf(p);
        b += v[m].powf(p);
        c += y0[m].powf(-p);
        let (bi, bf) = (sec.powf(p) * b, sec.powf(p) * s_inv_norm * c);
        out.lhs.push(a);
        out.intermediate.push(bi);
        out.last.push(bf);
        out.intermediate_analytic.push(sec0.powf(p) * b);
        out.worst_intermediate = out.worst_intermediate.max(a / bi);
        out.worst_final = out.worst_final.max(a / bf);
    }
    Ok(out)
}

/// Roundoff allowance on the ratio of the two sides.
pub const SUM_RATIO_SLACK: f64 = 1e-12;

// ---------------------------------------------------------------- forms

fn random_complex(n: usize, rng: &mut impl Rng) -> Vec<c64> {
    (0..n).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subordination {
    pub samples: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// `min |𝔞[f]| / (½𝔱[f])`.
    pub min_ratio: f64,
    /// `max |𝔞[f]| / (½𝔱[f])`.
    pub max_ratio: f64,
    pub sec_theta: f64,
}

/// `𝔱 = 2H`, `𝔞 = −Lᵀ`; `θ` is the semi-angle of the numerical range of `Lᵀ`.
pub fn subordination_check(l: &OperatorMatrix, h: &OperatorMatrix, theta: f64, samples: usize, tol: f64, rng: &mut impl Rng) -> Subordination {
    let a_op = OperatorMatrix { entries: l.entries.transpose().to_owned() * -1.0, weight: l.weight, label: l.label };
    let sec = 1.0 / theta.cos();
    let mut s = Subordination { samples, lower_violations: 0, upper_violations: 0, min_ratio: f64::INFINITY, max_ratio: 0.0, sec_theta: sec };
    for _ in 0..samples {
        let f = random_complex(l.dim(), rng);
        let half_t = h.form(&f).re;
        let mag = a_op.form(&f).norm();
        let ratio = mag / half_t;
        s.min_ratio = s.min_ratio.min(ratio);
        s.max_ratio = s.max_ratio.max(ratio);
        if mag < half_t * (1.0 - tol) {
            s.lower_violations += 1;
        }
        if mag > sec * half_t * (1.0 + tol) {
            s.upper_violations += 1;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accretivity {
    pub samples: usize,
    pub violations: usize,
    /// `min [Re(Lf,f) − a‖∇f‖² − η^{−2}‖f‖²] / Re(Lf,f)`.
    pub min_relative_margin: f64,
    pub h_min_eigenvalue: f64,
}

/// Checks the lower form bound for `L` and `Lᵀ` over random vectors, plus `λ_min(H) > 0`.
pub fn accretivity_check(
    l: &OperatorMatrix,
    grid: &Grid,
    a: f64,
    inv_eta_sq: f64,
    h_min_eigenvalue: f64,
    samples: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> Accretivity {
    let lt = l.transpose(l.label);
    let mut out = Accretivity { samples, violations: 0, min_relative_margin: f64::INFINITY, h_min_eigenvalue };
    for _ in 0..samples {
        let f = random_complex(l.dim(), rng);
        let floor = a * gradient_norm_sq(grid, &f) + inv_eta_sq * l2_norm_sq(grid, &f);
        for m in [l, &lt] {
            let re = m.form(&f).re;
            let margin = (re - floor) / re.abs().max(f64::MIN_POSITIVE);
            out.min_relative_margin = out.min_relative_margin.min(margin);
            if margin < -tol {
                out.violations += 1;
            }
        }
    }
    if !(h_min_eigenvalue > 0.0) {
        out.violations += 1;
    }
    out
}

// ---------------------------------------------------------------- boundedness of 𝔇^α

/// Smooth test functions vanishing on the boundary: sine products and polynomial bumps.
pub fn bound_samples(grid: &Grid, count: usize) -> Vec<Vec<f64>> {
    let lengths = grid.domain().lengths();
    let sine = |k: usize, t: f64, l: f64| (k as f64 * PI * t / l).sin();
    let bump = |p: i32, q: i32, t: f64, l: f64| {
        let u = t / l;
        u.powi(p) * (1.0 - u).powi(q)
    };
    (0..count)
        .map(|s| {
            let j = s / 2;
            let k = 1 + j;
            let (p, q) = (1 + (j % 3) as i32, 1 + (j / 3) as i32);
            let (k2, p2, q2) = (1 + j % 3, 1 + (j % 2) as i32, 2 + (j % 3) as i32);
            grid.nodes()
                .iter()
                .map(|node| {
                    let x = node.point;
                    let fx = if s % 2 == 0 { sine(k, x[0], lengths[0]) } else { bump(p, q, x[0], lengths[0]) };
                    if lengths.len() == 1 {
                        fx
                    } else if s % 2 == 0 {
                        fx * sine(k2, x[1], lengths[1])
                    } else {
                        fx * bump(p2, q2, x[1], lengths[1])
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub kappa: f64,
    /// `‖𝔇^α f‖ / ‖f‖_{H¹₀}` per sample.
    pub ratios: Vec<f64>,
    pub violations: usize,
    pub factor: f64,
}

impl BoundCheck {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Ratio of the discrete norms for each sample against `𝒦·factor`.
pub fn bound_check(grid: &Grid, cfg: &FracConfig, kappa: f64, samples: &[Vec<f64>], factor: f64) -> Result<BoundCheck> {
    let mut out = BoundCheck { kappa, ratios: Vec::with_capacity(samples.len()), violations: 0, factor };
    for f in samples {
        let gf = GridFunction::from_real(f);
        let d = kipriyanov_apply(&gf, cfg, grid)?;
        let num = l2_norm_sq(grid, &d.values).sqrt();
        let den = gradient_norm_sq(grid, &gf.values).sqrt();
        let ratio = if den == 0.0 { 0.0 } else { num / den };
        if num > kappa * den * factor {
            out.violations += 1;
        }
        out.ratios.push(ratio);
    }
    Ok(out)
}

/// Decile counts of `ratio/𝒦` over `[0, 1.1]`, last bin open.
pub fn ratio_histogram(ratios: &[f64], kappa: f64) -> [usize; 12] {
    let mut h = [0usize; 12];
    for r in ratios {
        let bin = ((r / kappa) * 10.0).floor().max(0.0) as usize;
        h[bin.min(11)] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_elliptic, assemble_fractional, combine, estimate_eta, real_component, Coefficients, Label};
    use crate::geometry::build_grid;
    use crate::spectral::{eigenvalues_general, field_of_values, to_complex, FovPoint};
    use faer::Mat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn base(a: f64, big_a: f64, big_i: f64, eta: f64) -> BaseConstants {
        BaseConstants { n: 1, alpha: 0.5, a, big_a, rho_min: 1.0, rho_max: 1.0, delta: 1.0, kappa: big_i, big_i, eta }
    }

    #[test]
    fn sector_params_reference_values() {
        let p = sector_params(&base(1.0, 1.0, 2.0, 1.0), 1.0).unwrap();
        assert!((p.b - 0.5).abs() < 1e-15);
        assert!((p.gamma - 0.5).abs() < 1e-15);
        assert!((p.theta - 2f64.atan()).abs() < 1e-15);
        assert!((p.xi - 0.6180339887498949).abs() < 1e-15);
        assert!((p.theta0 - 1.0172219678978514).abs() < 1e-14);
        assert!((p.theta0 - p.theta0_from_b).abs() < 1e-12);
        assert!(gamma_of(1.0, 1.0, 2.0, 1.0, p.xi).abs() < 1e-12);
        assert!(sector_params(&base(1.0, 1.0, 2.0, 1.0), 0.0).is_err());
        assert!(!sector_formulas_claim(&p).verdict.is_fail());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]
        #[test]
        fn sector_formulas_agree(la in -3.0f64..3.0, lb in -3.0f64..3.0, li in -3.0f64..3.0, le in -2.0f64..2.0) {
            let (a, big_a, big_i, eta) = (10f64.powf(la), 10f64.powf(lb), 10f64.powf(li), 10f64.powf(le));
            let p = sector_params(&base(a, big_a, big_i, eta), 1.0).unwrap();
            prop_assert!((p.theta0.tan() - 1.0 / b_of(a, big_a, big_i, p.xi)).abs() <= 1e-10 * p.theta0.tan());
            prop_assert!(gamma_of(a, big_a, big_i, eta, p.xi).abs() <= 1e-12 * eta.powi(-2));
            for k in -6..=6 {
                let eps = p.xi * 2f64.powi(k);
                let g = gamma_of(a, big_a, big_i, eta, eps);
                if k < 0 { prop_assert!(g < 0.0); } else if k > 0 { prop_assert!(g > 0.0); }
            }
        }
    }

    #[test]
    fn enclosure_flags_constructed_violation() {
        let theta = 0.5;
        let eigs = [c64::new(1.0, 0.0), c64::cis(theta + 0.2) * 2.0];
        let e = check_sector_enclosure(&[], &eigs, 0.0, theta, 0.05);
        assert_eq!(e.violations, 1);
        assert!((e.worst_excess - 0.2).abs() < 1e-12);
        assert_eq!(e.worst_point, eigs[1]);
        let real = [c64::new(0.3, 0.0), c64::new(4.0, 0.0)];
        assert_eq!(check_sector_enclosure(&real, &real, 0.0, 0.0, 0.0).violations, 0);
    }

    #[test]
    fn weyl_constants() {
        assert!((weyl_constant(1.0, 1, 1.0) - PI * PI).abs() < 1e-12);
        assert!((weyl_constant(1.0, 2, 1.0) - 4.0 * PI).abs() < 1e-12);
        // brute-force sorted lattice π²(j² + k²), j, k ≤ 60
        let mut lattice: Vec<f64> = (1..=60).flat_map(|j| (1..=60).map(move |k| PI * PI * (j * j + k * k) as f64)).collect();
        lattice.sort_by(f64::total_cmp);
        let i = 2000;
        let ratio = lattice[i - 1] / i as f64;
        assert!((ratio / (4.0 * PI) - 1.0).abs() < 0.05, "ratio {ratio}");
        let dom = Domain::interval(1.0).unwrap();
        let w = weyl_bounds(3, &base(1.0, 1.0, 2.0, 1.0), &dom).unwrap();
        assert!((w.lower - (9.0 * PI * PI + 1.0)).abs() < 1e-10);
        assert!((w.upper - (2.0 * 9.0 * PI * PI + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn decay_of_synthetic_sequence() {
        let v: Vec<f64> = (1..=200).map(|i| (i as f64).powi(-2)).collect();
        let d = decay_check(&v, 1).unwrap();
        assert!((d.slope + 2.0).abs() < 1e-12);
        assert!((d.c1 - 1.0).abs() < 1e-12 && (d.c2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schatten_synthetic_boundary() {
        for (n, p, member) in [(1usize, 1.0, true), (2, 1.0, false), (2, 2.0, true), (2, 3.0, true)] {
            let s: Vec<f64> = (1..=1000).map(|i| (i as f64).powf(-2.0 / n as f64)).collect();
            let c = schatten_classify(&s, p, n).unwrap();
            assert_eq!(c.member(), member, "n={n} p={p}");
            assert_eq!(c.necessary, (n as f64) < 2.0 * p);
            assert!(c.consistent());
        }
        let s: Vec<f64> = (1..=1000).map(|i| 1.0 / i as f64).collect();
        let c = schatten_classify(&s, 2.0, 2).unwrap();
        assert!((c.tail_exponent + 2.0).abs() < 1e-12 && c.member());
    }

    #[test]
    fn completeness_flag_and_degenerate_case() {
        let fov = |arg: f64| FovBoundary {
            points: [-arg, 0.0, arg].iter().map(|&t| FovPoint { phi: t, support: 1.0, z: c64::cis(t) }).collect(),
            max_relative_residual: 0.0,
        };
        let c = completeness_condition(PI / 3.0, &fov(0.2), 5, 5, 2);
        assert!(c.flag && (c.cone_angle - 0.4).abs() < 1e-15);
        assert_eq!(completeness_claim(&c, PI / 3.0, 0.05).verdict, Verdict::Pass);
        assert!(!completeness_condition(PI / 3.0, &fov(0.2), 5, 5, 4).flag);
        let flat = completeness_condition(0.3, &fov(0.0), 5, 5, 1);
        assert!(matches!(completeness_claim(&flat, 0.3, 0.05).verdict, Verdict::NotApplicable(_)));
    }

    #[test]
    fn sum_bound_equality_for_real_diagonal() {
        let l = [1.0, 0.25, 1.0 / 9.0];
        let s = eigenvalue_sum_bound(&l, &l, &[1.0, 4.0, 9.0], 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((s.worst_intermediate - 1.0).abs() < 1e-15);
        assert!((s.worst_final - 1.0).abs() < 1e-15);
        assert!(eigenvalue_sum_bound(&l, &l[..2], &[1.0; 3], 1.0, 0.0, 0.0, 1.0).is_err());
        // |λ| = sec θ · Re λ on the sector edge
        let theta: f64 = 0.7;
        let z = c64::new(2.0, 2.0 * theta.tan());
        assert!((z.norm() - z.re / theta.cos()).abs() < 1e-14);
    }

    fn reference(n: usize) -> (Grid, OperatorMatrix, OperatorMatrix, f64, f64) {
        let dom = Domain::interval(1.0).unwrap();
        let g = build_grid(&dom, n).unwrap();
        let c = Coefficients::identity(1, 1.0, 0.0).unwrap();
        let cfg = FracConfig::new(0.5, 1).unwrap();
        let f = assemble_fractional(&c, &cfg, &g).unwrap();
        let l = combine(&assemble_elliptic(&c, &g).unwrap(), &f, Label::L);
        let h = real_component(&l);
        let eta = estimate_eta(&f).unwrap();
        let theta = crate::spectral::numerical_range_semi_angles(l.entries.as_ref()).unwrap().max();
        (g, l, h, eta.inv_eta_sq, theta)
    }

    #[test]
    fn subordination_and_accretivity_on_reference() {
        let (g, l, h, inv_eta_sq, theta) = reference(40);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = subordination_check(&l, &h, theta, 100, 1e-10, &mut rng);
        assert_eq!(s.lower_violations + s.upper_violations, 0, "{s:?}");
        assert!(s.min_ratio >= 1.0 - 1e-12 && s.max_ratio <= s.sec_theta);
        let hmin = crate::spectral::eigenvalues_sym(h.entries.as_ref()).unwrap()[0];
        let a = accretivity_check(&l, &g, 1.0, inv_eta_sq, hmin, 50, 1e-10, &mut rng);
        assert_eq!(a.violations, 0, "{a:?}");
    }

    #[test]
    fn symmetric_case_is_tight() {
        let dom = Domain::interval(1.0).unwrap();
        let g = build_grid(&dom, 20).unwrap();
        let l = assemble_elliptic(&Coefficients::identity(1, 0.0, 0.0).unwrap(), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = subordination_check(&l, &l, 0.0, 20, 1e-10, &mut rng);
        assert!((s.max_ratio - 1.0).abs() < 1e-12 && (s.min_ratio - 1.0).abs() < 1e-12);
        let a = accretivity_check(&l, &g, 1.0, 0.0, 1.0, 20, 1e-10, &mut rng);
        assert_eq!(a.violations, 0);
        assert!(a.min_relative_margin.abs() < 1e-10);
    }

    #[test]
    fn constructed_counterexamples_fail() {
        let dom = Domain::interval(1.0).unwrap();
        let g = build_grid(&dom, 6).unwrap();
        let n = g.n_dof();
        let bad = OperatorMatrix { entries: Mat::from_fn(n, n, |i, j| if i == j { if i == 0 { -5.0 } else { 1.0 } } else { 0.0 }), weight: g.weight(), label: Label::L };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(accretivity_check(&bad, &g, 1.0, 0.0, -5.0, 10, 1e-10, &mut rng).violations > 0);
        let h = OperatorMatrix { entries: Mat::identity(n, n), weight: g.weight(), label: Label::H };
        let s = subordination_check(&bad, &h, 0.0, 10, 1e-10, &mut rng);
        assert!(s.lower_violations + s.upper_violations > 0);
    }

    #[test]
    fn bound_on_sine_and_zero() {
        let dom = Domain::interval(1.0).unwrap();
        let g = build_grid(&dom, 200).unwrap();
        let cfg = FracConfig::new(0.5, 1).unwrap();
        let kappa = crate::frac::kappa_constant(0.5, 1.0, 1).unwrap();
        assert!((kappa - 3.0 / PI.sqrt()).abs() < 1e-12);
        let sine: Vec<f64> = g.nodes().iter().map(|q| (PI * q.point[0]).sin()).collect();
        let scaled: Vec<f64> = sine.iter().map(|v| 3.5 * v).collect();
        let zero = vec![0.0; g.n_dof()];
        let r = bound_check(&g, &cfg, kappa, &[sine, scaled, zero], 1.0).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.ratios[0] < kappa);
        assert!((r.ratios[0] - r.ratios[1]).abs() < 1e-12 * r.ratios[0]);
        assert_eq!(r.ratios[2], 0.0);
        assert_eq!(ratio_histogram(&r.ratios, kappa).iter().sum::<usize>(), 3);
    }

    #[test]
    fn bound_samples_vanish_and_differ() {
        let dom = Domain::rectangle(1.0, 2.0).unwrap();
        let g = build_grid(&dom, 12).unwrap();
        let s = bound_samples(&g, 20);
        assert_eq!(s.len(), 20);
        for i in 0..20 {
            for j in 0..i {
                assert!(s[i].iter().zip(&s[j]).any(|(a, b)| (a - b).abs() > 1e-8), "{i} {j}");
            }
        }
    }

    #[test]
    fn enclosure_of_small_reference() {
        let (_, l, _, _, theta) = reference(30);
        let eig = eigenvalues_general(l.entries.as_ref()).unwrap();
        let fov = field_of_values(l.entries.as_ref(), 64).unwrap();
        let z: Vec<c64> = fov.points.iter().map(|p| p.z).collect();
        let e = check_sector_enclosure(&z, &eig.eigenvalues, 0.0, theta, 1e-9);
        assert_eq!(e.violations, 0, "{e:?}");
    }

    // imaginary parts of eigenvalues are majorized by the s-numbers of the imaginary component
    proptest! {
        #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]
        #[test]
        fn imaginary_parts_majorized(seed in 0u64..10_000, p in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let eig = eigenvalues_general(a.as_ref()).unwrap();
            let mut im: Vec<f64> = eig.eigenvalues.iter().map(|z| z.im.abs()).collect();
            im.sort_by(|x, y| y.total_cmp(x));
            let k = crate::spectral::skew_part(a.as_ref());
            let mut s = k.singular_values().unwrap();
            s.sort_by(|x, y| y.total_cmp(x));
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for m in 0..n {
                lhs += im[m].powi(p as i32);
                rhs += s[m].powi(p as i32);
                prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
            }
        }

        #[test]
        fn rotation_swaps_components(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 6;
            let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let ia = Mat::from_fn(n, n, |i, j| c64::new(0.0, 1.0) * to_complex(a.as_ref())[(i, j)]);
            let ev = eigenvalues_general(a.as_ref()).unwrap().eigenvalues;
            let evi = ia.eigenvalues().unwrap();
            for z in &ev {
                let w = c64::new(0.0, 1.0) * z;
                let d = evi.iter().map(|v| (v - w).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-9);
                let best = evi.iter().min_by(|x, y| (*x - w).norm().total_cmp(&(*y - w).norm())).unwrap();
                prop_assert!((best.im - z.re).abs() < 1e-9);
            }
        }
    }
}
