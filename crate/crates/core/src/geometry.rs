//! Convex domains with a boundary pole, ray coordinates and uniform interior grids.
//!
//! Points are stored as `[f64; 2]`; in one dimension the second coordinate is always zero.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { length: f64 },
    Rectangle { width: f64, height: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    pole: Point,
}

const BOUNDARY_TOL: f64 = 1e-12;

impl Domain {
    /// Interval `(0, length)` with the pole at the left endpoint.
    pub fn interval(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidDomain(format!("interval length must be positive, got {length}")));
        }
        Ok(Self { shape: Shape::Interval { length }, pole: [0.0, 0.0] })
    }

    /// Rectangle `(0, width) × (0, height)` with the pole at the origin corner.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "rectangle extents must be positive, got {width} x {height}"
            )));
        }
        Ok(Self { shape: Shape::Rectangle { width, height }, pole: [0.0, 0.0] })
    }

    /// Moves the pole; it has to sit on the boundary.
    pub fn with_pole(mut self, pole: &[f64]) -> Result<Self> {
        let n = self.dimension();
        if pole.len() != n {
            return Err(Error::InvalidDomain(format!(
                "pole has {} coordinates, domain dimension is {n}",
                pole.len()
            )));
        }
        let p = if n == 1 { [pole[0], 0.0] } else { [pole[0], pole[1]] };
        let scale = self.diameter();
        let on_boundary = match self.shape {
            Shape::Interval { length } => p[0].abs() <= BOUNDARY_TOL * scale || (p[0] - length).abs() <= BOUNDARY_TOL * scale,
            Shape::Rectangle { width, height } => {
                let inside = (-BOUNDARY_TOL * scale..=width + BOUNDARY_TOL * scale).contains(&p[0])
                    && (-BOUNDARY_TOL * scale..=height + BOUNDARY_TOL * scale).contains(&p[1]);
                let near_edge = p[0].abs().min((p[0] - width).abs()).min(p[1].abs()).min((p[1] - height).abs())
                    <= BOUNDARY_TOL * scale;
                inside && near_edge
            }
        };
        if !on_boundary {
            return Err(Error::InvalidDomain(format!("pole {pole:?} is not on the boundary")));
        }
        self.pole = p;
        Ok(self)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pole(&self) -> Point {
        self.pole
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            Shape::Rectangle { .. } => 2,
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        match self.shape {
            Shape::Interval { length } => vec![length],
            Shape::Rectangle { width, height } => vec![width, height],
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Interval { length } => length,
            Shape::Rectangle { width, height } => width.hypot(height),
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Largest distance from the pole to a point of the closed domain.
    pub fn max_pole_distance(&self) -> f64 {
        match self.shape {
            Shape::Interval { length } => self.pole[0].max(length - self.pole[0]),
            Shape::Rectangle { width, height } => {
                let dx = self.pole[0].max(width - self.pole[0]);
                let dy = self.pole[1].max(height - self.pole[1]);
                dx.hypot(dy)
            }
        }
    }

    /// Exact Dirichlet eigenvalues of `−Δ`, ascending, the first `count` of them.
    pub fn dirichlet_laplacian_eigenvalues(&self, count: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        match self.shape {
            Shape::Interval { length } => (1..=count).map(|i| (i as f64 * PI / length).powi(2)).collect(),
            Shape::Rectangle { width, height } => {
                // enlarge the lattice box until the count-th value is certainly captured
                let mut kmax = ((count as f64).sqrt().ceil() as usize).max(4);
                loop {
                    let mut vals: Vec<f64> = (1..=kmax)
                        .flat_map(|j| (1..=kmax).map(move |k| (j, k)))
                        .map(|(j, k)| PI * PI * ((j * j) as f64 / (width * width) + (k * k) as f64 / (height * height)))
                        .collect();
                    vals.sort_by(f64::total_cmp);
                    vals.truncate(count);
                    let edge = PI * PI * ((kmax + 1) as f64).powi(2) / (width * width).max(height * height);
                    if vals.len() == count && vals[count - 1] <= edge {
                        return vals;
                    }
                    kmax *= 2;
                }
            }
        }
    }

    /// Parameters `t > 0` at which the open segment from the pole along `e` meets
    /// the boundary, i.e. `d(e)`.
    pub fn exit_distance(&self, e: Point) -> Result<f64> {
        let norm = e[0].hypot(e[1]);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDirection(format!("direction {e:?} is not a unit vector")));
        }
        let p = self.pole;
        let d = match self.shape {
            Shape::Interval { length } => {
                if e[1].abs() > 1e-12 {
                    return Err(Error::RayExitsImmediately);
                }
                if e[0] > 0.0 { length - p[0] } else { p[0] }
            }
            Shape::Rectangle { width, height } => {
                let axis = |x: f64, dir: f64, hi: f64| -> f64 {
                    if dir > 0.0 {
                        (hi - x) / dir
                    } else if dir < 0.0 {
                        -x / dir
                    } else {
                        // parallel to this axis, possibly along an edge of the closed rectangle
                        f64::INFINITY
                    }
                };
                axis(p[0], e[0], width).min(axis(p[1], e[1], height))
            }
        };
        if !(d > BOUNDARY_TOL * self.diameter()) {
            return Err(Error::RayExitsImmediately);
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCoords {
    pub point: Point,
    pub r: f64,
    pub e: Point,
    pub d: f64,
}

impl RayCoords {
    pub fn at(&self, t: f64, pole: Point) -> Point {
        [pole[0] + t * self.e[0], pole[1] + t * self.e[1]]
    }
}

/// Uniform grid with `N` cells per axis; only interior nodes carry unknowns.
///
/// Nodes are ordered with the first axis varying fastest.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    n_per_axis: usize,
    spacing: Point,
    nodes: Vec<RayCoords>,
}

pub fn build_grid(domain: &Domain, n: usize) -> Result<Grid> {
    if n < 4 {
        return Err(Error::InvalidGrid(format!("N must be at least 4, got {n}")));
    }
    let lengths = domain.lengths();
    let spacing = match domain.dimension() {
        1 => [lengths[0] / n as f64, 0.0],
        _ => [lengths[0] / n as f64, lengths[1] / n as f64],
    };
    let pole = domain.pole();
    let mut nodes = Vec::new();
    let inner = n - 1;
    let rows = if domain.dimension() == 1 { 1 } else { inner };
    for j in 0..rows {
        for i in 0..inner {
            let point = if domain.dimension() == 1 {
                [(i + 1) as f64 * spacing[0], 0.0]
            } else {
                [(i + 1) as f64 * spacing[0], (j + 1) as f64 * spacing[1]]
            };
            let dx = [point[0] - pole[0], point[1] - pole[1]];
            let r = dx[0].hypot(dx[1]);
            let e = [dx[0] / r, dx[1] / r];
            let d = domain.exit_distance(e)?;
            nodes.push(RayCoords { point, r, e, d });
        }
    }
    Ok(Grid { domain: domain.clone(), n_per_axis: n, spacing, nodes })
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn spacing(&self) -> Point {
        self.spacing
    }

    pub fn nodes(&self) -> &[RayCoords] {
        &self.nodes
    }

    pub fn n_dof(&self) -> usize {
        self.nodes.len()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Weight `w = h^n` of the discrete inner product `(f, g)_h = w Σ f ḡ`.
    pub fn weight(&self) -> f64 {
        match self.dimension() {
            1 => self.spacing[0],
            _ => self.spacing[0] * self.spacing[1],
        }
    }

    /// Degree of freedom for interior multi-index (1-based grid indices).
    pub fn dof(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n_per_axis;
        if i == 0 || i >= n {
            return None;
        }
        if self.dimension() == 1 {
            return Some(i - 1);
        }
        if j == 0 || j >= n {
            return None;
        }
        Some((j - 1) * (n - 1) + (i - 1))
    }

    /// Interpolation stencil of the piecewise (bi)linear interpolant of interior values,
    /// with zero boundary values. Points outside the closed domain give an empty stencil.
    pub fn interpolation_stencil(&self, x: Point, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.n_per_axis;
        let locate = |coord: f64, h: f64| -> Option<(usize, f64)> {
            let s = coord / h;
            if !(s >= -1e-12 && s <= n as f64 + 1e-12) {
                return None;
            }
            let s = s.clamp(0.0, n as f64);
            let k = (s.floor() as usize).min(n - 1);
            Some((k, s - k as f64))
        };
        let Some((i, fx)) = locate(x[0], self.spacing[0]) else { return };
        if self.dimension() == 1 {
            for (ii, w) in [(i, 1.0 - fx), (i + 1, fx)] {
                if w != 0.0 {
                    if let Some(q) = self.dof(ii, 0) {
                        out.push((q, w));
                    }
                }
            }
            return;
        }
        let Some((j, fy)) = locate(x[1], self.spacing[1]) else { return };
        for (jj, wy) in [(j, 1.0 - fy), (j + 1, fy)] {
            for (ii, wx) in [(i, 1.0 - fx), (i + 1, fx)] {
                let w = wx * wy;
                if w != 0.0 {
                    if let Some(q) = self.dof(ii, jj) {
                        out.push((q, w));
                    }
                }
            }
        }
    }

    /// Evaluates the interpolant of `values` (interior nodes) at `x`.
    pub fn interpolate(&self, values: &[f64], x: Point) -> f64 {
        let mut st = Vec::with_capacity(4);
        self.interpolation_stencil(x, &mut st);
        st.iter().map(|&(q, w)| w * values[q]).sum()
    }

    /// Ray parameters in `(t0, t1)` where the ray of `node` crosses a grid line.
    /// Between consecutive crossings the interpolant restricted to the ray is smooth.
    pub fn line_crossings(&self, ray: &RayCoords, t0: f64, t1: f64) -> Vec<f64> {
        let pole = self.domain.pole();
        let mut ts = Vec::new();
        for axis in 0..self.dimension() {
            let dir = ray.e[axis];
            if dir.abs() < 1e-14 {
                continue;
            }
            let h = self.spacing[axis];
            let a = (pole[axis] + t0 * dir) / h;
            let b = (pole[axis] + t1 * dir) / h;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut k = lo.floor() as i64 + 1;
            while (k as f64) < hi {
                let t = (k as f64 * h - pole[axis]) / dir;
                if t > t0 && t < t1 {
                    ts.push(t);
                }
                k += 1;
            }
        }
        ts.sort_by(f64::total_cmp);
        ts
    }
}

/// Partition of `[0, len]` graded toward `len`: `t_k = len·(1 − (1 − k/M)^q)`.
pub fn graded_partition(len: f64, cells: usize, q: f64) -> Vec<f64> {
    (0..=cells)
        .map(|k| {
            if k == cells {
                len
            } else {
                len * (1.0 - (1.0 - k as f64 / cells as f64).powf(q))
            }
        })
        .collect()
}

/// Graded partition of `[0, r]` for the ray through grid node `node`.
pub fn ray_samples(grid: &Grid, node: usize, cells: usize, q: f64) -> Vec<f64> {
    graded_partition(grid.nodes()[node].r, cells, q)
}

/// Merges sorted abscissae, dropping points closer than a relative `1e-13·scale`.
pub fn merge_abscissae(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let tol = 1e-13 * scale;
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= tol => {}
            _ => out.push(t),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_grid_nodes() {
        let g = build_grid(&Domain::interval(1.0).unwrap(), 4).unwrap();
        let rs: Vec<f64> = g.nodes().iter().map(|n| n.r).collect();
        assert_eq!(rs, vec![0.25, 0.5, 0.75]);
        assert!(g.nodes().iter().all(|n| n.d == 1.0));
        assert_eq!(g.n_dof(), 3);
    }

    #[test]
    fn square_ray_coordinates() {
        let g = build_grid(&Domain::rectangle(1.0, 1.0).unwrap(), 4).unwrap();
        assert_eq!(g.n_dof(), 9);
        let q = g.dof(2, 2).unwrap();
        let node = g.nodes()[q];
        assert_eq!(node.point, [0.5, 0.5]);
        assert!((node.r - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((node.e[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((node.d - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exit_distances() {
        let sq = Domain::rectangle(1.0, 1.0).unwrap();
        assert_eq!(sq.exit_distance([1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(sq.exit_distance([0.0, 1.0]).unwrap(), 1.0);
        let s = 0.5f64.sqrt();
        assert!((sq.exit_distance([s, s]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let rect = Domain::rectangle(2.0, 1.0).unwrap();
        assert_eq!(rect.exit_distance([1.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(sq.exit_distance([-1.0, 0.0]), Err(Error::RayExitsImmediately)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Domain::interval(0.0).is_err());
        assert!(Domain::rectangle(1.0, -1.0).is_err());
        assert!(build_grid(&Domain::interval(1.0).unwrap(), 3).is_err());
        assert!(Domain::rectangle(1.0, 1.0).unwrap().with_pole(&[0.5, 0.5]).is_err());
        assert!(Domain::rectangle(1.0, 1.0).unwrap().with_pole(&[0.5, 0.0]).is_ok());
    }

    #[test]
    fn graded_partitions() {
        assert_eq!(graded_partition(1.0, 4, 1.0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(graded_partition(1.0, 4, 2.0), vec![0.0, 0.4375, 0.75, 0.9375, 1.0]);
        let half = graded_partition(0.5, 4, 2.0);
        for (a, b) in half.iter().zip(graded_partition(1.0, 4, 2.0)) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn dirichlet_spectrum_of_square() {
        let d = Domain::rectangle(1.0, 1.0).unwrap();
        let v = d.dirichlet_laplacian_eigenvalues(4);
        let pi2 = std::f64::consts::PI.powi(2);
        let expect = [2.0 * pi2, 5.0 * pi2, 5.0 * pi2, 8.0 * pi2];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn bilinear_interpolation_reproduces_nodes() {
        let g = build_grid(&Domain::rectangle(2.0, 1.0).unwrap(), 8).unwrap();
        let vals: Vec<f64> = (0..g.n_dof()).map(|k| (k as f64 * 0.37).sin()).collect();
        for (k, node) in g.nodes().iter().enumerate() {
            assert!((g.interpolate(&vals, node.point) - vals[k]).abs() < 1e-14);
        }
        assert_eq!(g.interpolate(&vals, [0.0, 0.3]), 0.0);
    }

    proptest! {
        #[test]
        fn nodes_reconstruct_from_ray_coords(w in 0.2f64..5.0, h in 0.2f64..5.0, n in 4usize..12) {
            let dom = Domain::rectangle(w, h).unwrap();
            let g = build_grid(&dom, n).unwrap();
            for node in g.nodes() {
                let q = node.at(node.r, dom.pole());
                prop_assert!((q[0] - node.point[0]).abs() <= 1e-12 * dom.diameter());
                prop_assert!((q[1] - node.point[1]).abs() <= 1e-12 * dom.diameter());
                prop_assert!(node.r <= node.d * (1.0 + 1e-12));
                prop_assert!(node.d <= dom.diameter() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn exit_distance_is_homogeneous(w in 0.2f64..5.0, h in 0.2f64..5.0, s in 0.1f64..10.0, phi in 0.01f64..1.56) {
            let e = [phi.cos(), phi.sin()];
            let d1 = Domain::rectangle(w, h).unwrap().exit_distance(e).unwrap();
            let d2 = Domain::rectangle(s * w, s * h).unwrap().exit_distance(e).unwrap();
            prop_assert!((d2 - s * d1).abs() <= 1e-12 * d2);
        }
    }
}
