//! JSON run configuration with field-level validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::Coefficients;
use crate::error::{Error, Result};
use crate::frac::FracConfig;
use crate::geometry::Domain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: ShapeKind,
    pub lengths: Vec<f64>,
    /// Defaults to the origin corner.
    #[serde(default)]
    pub pole: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// Row-major `n×n`.
    pub aij: Vec<f64>,
    pub rho0: f64,
    #[serde(default)]
    pub rho1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    #[serde(rename = "M")]
    pub m: usize,
    pub q: f64,
}

impl Default for RaySpec {
    fn default() -> Self {
        Self { m: 64, q: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchattenSpec {
    pub p_list: Vec<f64>,
}

impl Default for SchattenSpec {
    fn default() -> Self {
        Self { p_list: vec![1.0, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FovSpec {
    pub n_angles: usize,
}

impl Default for FovSpec {
    fn default() -> Self {
        Self { n_angles: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub sector_margin: f64,
    /// Relative residual accepted for the factorization identities.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sector_margin: 0.05, residual: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub domain: DomainSpec,
    pub alpha: f64,
    pub coefficients: CoefficientSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub ray: RaySpec,
    #[serde(default)]
    pub schatten: SchattenSpec,
    #[serde(default)]
    pub fov: FovSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

/// Smallest and largest grid `N` accepted.
pub const N_RANGE: (usize, usize) = (4, 1024);
/// Open interval accepted for `alpha`.
pub const ALPHA_RANGE: (f64, f64) = (0.01, 0.99);

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field against the preconditions of the modules that consume it.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if !(n == 1 || n == 2) {
            return Err(field("dimension", format!("must be 1 or 2, got {n}")));
        }
        let want = match self.domain.shape {
            ShapeKind::Interval => 1,
            ShapeKind::Rectangle => 2,
        };
        if want != n {
            return Err(field("domain.shape", format!("{:?} does not match dimension {n}", self.domain.shape)));
        }
        if self.domain.lengths.len() != n || self.domain.lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(field("domain.lengths", format!("need {n} positive finite lengths, got {:?}", self.domain.lengths)));
        }
        if let Some(p) = &self.domain.pole {
            if p.len() != n {
                return Err(field("domain.pole", format!("need {n} coordinates, got {}", p.len())));
            }
        }
        self.domain().map_err(|e| field("domain.pole", e))?;
        let (lo, hi) = ALPHA_RANGE;
        if !(self.alpha > lo && self.alpha < hi) {
            return Err(field("alpha", format!("must lie in ({lo}, {hi}), got {}", self.alpha)));
        }
        if self.coefficients.aij.len() != n * n {
            return Err(field("coefficients.aij", format!("need {} entries, got {}", n * n, self.coefficients.aij.len())));
        }
        let coeffs = self.coefficients().map_err(|e| field("coefficients", e))?;
        coeffs.validate_on(&self.domain()?, self.alpha).map_err(|e| field("coefficients", e))?;
        if self.grid.n_list.is_empty() {
            return Err(field("grid.N_list", "must not be empty"));
        }
        if let Some(bad) = self.grid.n_list.iter().find(|&&v| v < N_RANGE.0 || v > N_RANGE.1) {
            return Err(field("grid.N_list", format!("entries must lie in [{}, {}], got {bad}", N_RANGE.0, N_RANGE.1)));
        }
        if self.grid.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("grid.N_list", "must be strictly increasing"));
        }
        if n == 2 && *self.grid.n_list.last().unwrap() > 64 {
            return Err(field("grid.N_list", "two-dimensional grids are limited to N ≤ 64 (dense matrices)"));
        }
        self.frac_config().map_err(|e| field("ray", e))?;
        if self.schatten.p_list.is_empty() || self.schatten.p_list.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
            return Err(field("schatten.p_list", format!("need values p ≥ 1, got {:?}", self.schatten.p_list)));
        }
        if self.fov.n_angles < 16 {
            return Err(field("fov.n_angles", format!("must be at least 16, got {}", self.fov.n_angles)));
        }
        let t = &self.tolerances;
        if !(t.sector_margin >= 0.0 && t.sector_margin < 1.0) {
            return Err(field("tolerances.sector_margin", format!("must lie in [0, 1), got {}", t.sector_margin)));
        }
        if !(t.residual > 0.0 && t.residual < 1.0) {
            return Err(field("tolerances.residual", format!("must lie in (0, 1), got {}", t.residual)));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        let l = &self.domain.lengths;
        let d = match self.domain.shape {
            ShapeKind::Interval => Domain::interval(l[0])?,
            ShapeKind::Rectangle => Domain::rectangle(l[0], l[1])?,
        };
        match &self.domain.pole {
            Some(p) => d.with_pole(p),
            None => Ok(d),
        }
    }

    pub fn coefficients(&self) -> Result<Coefficients> {
        let c = &self.coefficients;
        Coefficients::new(self.dimension, c.aij.clone(), c.rho0, c.rho1)
    }

    pub fn frac_config(&self) -> Result<FracConfig> {
        FracConfig::new(self.alpha, self.dimension)?.with_ray(self.ray.m, self.ray.q)
    }

    /// The 1D reference problem on the unit interval with identity coefficient and `ρ ≡ 1`.
    pub fn reference_1d(n_list: Vec<usize>) -> Self {
        Self {
            dimension: 1,
            domain: DomainSpec { shape: ShapeKind::Interval, lengths: vec![1.0], pole: None },
            alpha: 0.5,
            coefficients: CoefficientSpec { aij: vec![1.0], rho0: 1.0, rho1: 0.0 },
            grid: GridSpec { n_list },
            ray: RaySpec::default(),
            schatten: SchattenSpec::default(),
            fov: FovSpec::default(),
            tolerances: Tolerances::default(),
            seed: 20240601,
            out_dir: default_out(),
        }
    }

    /// The unit-square counterpart of [`RunConfig::reference_1d`].
    pub fn reference_2d(n_list: Vec<usize>) -> Self {
        Self {
            dimension: 2,
            domain: DomainSpec { shape: ShapeKind::Rectangle, lengths: vec![1.0, 1.0], pole: None },
            coefficients: CoefficientSpec { aij: vec![1.0, 0.0, 0.0, 1.0], rho0: 1.0, rho1: 0.0 },
            ..Self::reference_1d(n_list)
        }
    }
}
