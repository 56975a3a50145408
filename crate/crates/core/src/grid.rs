//! Structured cell-centred grids with homogeneous Dirichlet boundaries.
//!
//! Unknowns live at cell centres. Gradients live on faces: the normal
//! component is the two-point difference across the face, and on a boundary
//! face the missing neighbour is the zero boundary value at half a cell.
//! Radial grids reduce a radially symmetric problem on the ball `B_R ⊂ R^N`
//! to the radius, with shell volumes as cell measures and sphere areas
//! `N ω_N r^{N-1}` on faces; no unknown sits at the origin.

use crate::error::{Error, Result};
use crate::linalg::BandedMatrix;
use crate::lorentz::{unit_ball_volume, SampledFunction};
use std::sync::Arc;

/// Physical position. One-dimensional and radial grids use the first
/// component only (the radius, for radial grids).
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum GridKind {
    Interval { lower: f64, upper: f64 },
    /// Uniform shells of the ball of radius `radius` in `R^dim`.
    Radial { dim: usize, radius: f64 },
    /// Geometrically graded shells: a core ball of radius `r_min`, then edges
    /// growing by a constant ratio up to `radius`.
    RadialGeometric { dim: usize, radius: f64, r_min: f64 },
    Rect2d { lower: Point, upper: Point },
}

#[derive(Clone, Debug)]
pub struct Face {
    /// Cell on the negative side along `axis` (`None` on the lower boundary).
    pub minus: Option<usize>,
    /// Cell on the positive side (`None` on the upper boundary).
    pub plus: Option<usize>,
    pub axis: usize,
    pub position: Point,
    /// Face area (sphere area on radial grids, side length on rectangles).
    pub area: f64,
    /// Distance between the two values differenced across the face.
    pub distance: f64,
    /// Quadrature weight of this face in `∫|∇u|^p`.
    pub weight: f64,
    tangential: Vec<(usize, f64)>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    kind: GridKind,
    nodes: Vec<Point>,
    measures: Vec<f64>,
    faces: Vec<Face>,
    h: f64,
    shape: (usize, usize),
}

impl Grid {
    pub fn interval(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        if !(upper > lower) || cells == 0 {
            return Err(Error::invalid("interval grid needs upper > lower and at least one cell"));
        }
        let h = (upper - lower) / cells as f64;
        let nodes = (0..cells)
            .map(|i| [lower + (i as f64 + 0.5) * h, 0.0])
            .collect();
        let faces = (0..=cells)
            .map(|i| {
                let boundary = i == 0 || i == cells;
                let distance = if boundary { 0.5 * h } else { h };
                Face {
                    minus: (i > 0).then(|| i - 1),
                    plus: (i < cells).then_some(i),
                    axis: 0,
                    position: [lower + i as f64 * h, 0.0],
                    area: 1.0,
                    distance,
                    weight: distance,
                    tangential: Vec::new(),
                }
            })
            .collect();
        Ok(Grid {
            kind: GridKind::Interval { lower, upper },
            nodes,
            measures: vec![h; cells],
            faces,
            h,
            shape: (cells, 1),
        })
    }

    pub fn radial(dim: usize, radius: f64, cells: usize) -> Result<Self> {
        if dim < 2 || !(radius > 0.0) || cells == 0 {
            return Err(Error::invalid("radial grid needs dim ≥ 2, radius > 0, cells ≥ 1"));
        }
        let edges: Vec<f64> = (0..=cells).map(|i| radius * i as f64 / cells as f64).collect();
        let nodes: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self::radial_from(GridKind::Radial { dim, radius }, dim, &edges, &nodes))
    }

    /// Graded radial grid; the core cell `[0, r_min]` carries its node at
    /// `r_min / √q`, continuing the geometric sequence of nodes.
    pub fn radial_geometric(dim: usize, radius: f64, cells: usize, r_min: f64) -> Result<Self> {
        if dim < 2 || !(radius > 0.0) || cells < 2 || !(r_min > 0.0 && r_min < radius) {
            return Err(Error::invalid(
                "geometric radial grid needs dim ≥ 2, cells ≥ 2 and 0 < r_min < radius",
            ));
        }
        let q = (radius / r_min).powf(1.0 / (cells - 1) as f64);
        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        for i in 0..cells {
            edges.push(r_min * q.powi(i as i32));
        }
        edges[cells] = radius;
        let mut nodes = Vec::with_capacity(cells);
        nodes.push(r_min / q.sqrt());
        for i in 1..cells {
            nodes.push((edges[i] * edges[i + 1]).sqrt());
        }
        Ok(Self::radial_from(
            GridKind::RadialGeometric { dim, radius, r_min },
            dim,
            &edges,
            &nodes,
        ))
    }

    fn radial_from(kind: GridKind, dim: usize, edges: &[f64], nodes: &[f64]) -> Grid {
        let n = nodes.len();
        let omega = unit_ball_volume(dim);
        let nf = dim as f64;
        let measures = edges
            .windows(2)
            .map(|w| omega * (w[1].powi(dim as i32) - w[0].powi(dim as i32)))
            .collect();
        // the face at the origin has zero area and is omitted
        let faces = (1..=n)
            .map(|i| {
                let r = edges[i];
                let area = nf * omega * r.powf(nf - 1.0);
                let distance = if i < n { nodes[i] - nodes[i - 1] } else { r - nodes[n - 1] };
                Face {
                    minus: Some(i - 1),
                    plus: (i < n).then_some(i),
                    axis: 0,
                    position: [r, 0.0],
                    area,
                    distance,
                    weight: area * distance,
                    tangential: Vec::new(),
                }
            })
            .collect();
        let h = edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Grid {
            kind,
            nodes: nodes.iter().map(|&r| [r, 0.0]).collect(),
            measures,
            faces,
            h,
            shape: (n, 1),
        }
    }

    pub fn rect2d(lower: Point, upper: Point, nx: usize, ny: usize) -> Result<Self> {
        if !(upper[0] > lower[0] && upper[1] > lower[1]) || nx == 0 || ny == 0 {
            return Err(Error::invalid("rectangle grid needs a nonempty box and cells ≥ 1 per side"));
        }
        let dx = (upper[0] - lower[0]) / nx as f64;
        let dy = (upper[1] - lower[1]) / ny as f64;
        let idx = |i: usize, j: usize| i + nx * j;
        let mut nodes = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                nodes.push([
                    lower[0] + (i as f64 + 0.5) * dx,
                    lower[1] + (j as f64 + 0.5) * dy,
                ]);
            }
        }
        // centred difference of cell (i, j) along `axis`, zero ghosts at half a cell
        let cell_diff = |i: usize, j: usize, axis: usize| -> Vec<(usize, f64)> {
            let (pos, len, step) = if axis == 0 { (i, nx, dx) } else { (j, ny, dy) };
            let neighbour = |k: usize| if axis == 0 { idx(k, j) } else { idx(i, k) };
            let up = (pos + 1 < len).then(|| neighbour(pos + 1));
            let down = (pos > 0).then(|| neighbour(pos - 1));
            let span = if up.is_some() { step } else { 0.5 * step }
                + if down.is_some() { step } else { 0.5 * step };
            let mut st = Vec::new();
            if let Some(u) = up {
                st.push((u, 1.0 / span));
            }
            if let Some(d) = down {
                st.push((d, -1.0 / span));
            }
            st
        };
        let mut faces = Vec::new();
        for j in 0..ny {
            for i in 0..=nx {
                let boundary = i == 0 || i == nx;
                let distance = if boundary { 0.5 * dx } else { dx };
                let minus = (i > 0).then(|| idx(i - 1, j));
                let plus = (i < nx).then(|| idx(i, j));
                let tangential = if boundary {
                    Vec::new()
                } else {
                    let mut t: Vec<(usize, f64)> = cell_diff(i - 1, j, 1)
                        .into_iter()
                        .chain(cell_diff(i, j, 1))
                        .map(|(c, w)| (c, 0.5 * w))
                        .collect();
                    t.sort_by_key(|x| x.0);
                    t
                };
                faces.push(Face {
                    minus,
                    plus,
                    axis: 0,
                    position: [lower[0] + i as f64 * dx, lower[1] + (j as f64 + 0.5) * dy],
                    area: dy,
                    distance,
                    weight: 0.5 * dy * distance,
                    tangential,
                });
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let boundary = j == 0 || j == ny;
                let distance = if boundary { 0.5 * dy } else { dy };
                let minus = (j > 0).then(|| idx(i, j - 1));
                let plus = (j < ny).then(|| idx(i, j));
                let tangential = if boundary {
                    Vec::new()
                } else {
                    let mut t: Vec<(usize, f64)> = cell_diff(i, j - 1, 0)
                        .into_iter()
                        .chain(cell_diff(i, j, 0))
                        .map(|(c, w)| (c, 0.5 * w))
                        .collect();
                    t.sort_by_key(|x| x.0);
                    t
                };
                faces.push(Face {
                    minus,
                    plus,
                    axis: 1,
                    position: [lower[0] + (i as f64 + 0.5) * dx, lower[1] + j as f64 * dy],
                    area: dx,
                    distance,
                    weight: 0.5 * dx * distance,
                    tangential,
                });
            }
        }
        Ok(Grid {
            kind: GridKind::Rect2d { lower, upper },
            nodes,
            measures: vec![dx * dy; nx * ny],
            faces,
            h: dx.max(dy),
            shape: (nx, ny),
        })
    }

    /// Unit square centred at the origin with `n × n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rect2d([-0.5, -0.5], [0.5, 0.5], n, n)
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// `|Ω|`.
    pub fn volume(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Dimension of the physical domain (`1` for intervals).
    pub fn dimension(&self) -> usize {
        match self.kind {
            GridKind::Interval { .. } => 1,
            GridKind::Radial { dim, .. } | GridKind::RadialGeometric { dim, .. } => dim,
            GridKind::Rect2d { .. } => 2,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, GridKind::Radial { .. } | GridKind::RadialGeometric { .. })
    }

    /// `|x|` of a position on this grid.
    pub fn abs_position(&self, x: Point) -> f64 {
        if self.is_radial() {
            x[0].abs()
        } else {
            x[0].hypot(x[1])
        }
    }

    /// Half bandwidth of operators built from normal face differences.
    pub fn half_band(&self) -> usize {
        match self.kind {
            GridKind::Rect2d { .. } => self.shape.0,
            _ => 1,
        }
    }

    /// Normal derivative across face `f`.
    #[inline]
    pub fn normal_gradient(&self, f: &Face, u: &[f64]) -> f64 {
        let up = f.plus.map_or(0.0, |i| u[i]);
        let um = f.minus.map_or(0.0, |i| u[i]);
        (up - um) / f.distance
    }

    /// Tangential derivative at face `f` (zero on one-dimensional grids and
    /// on boundary faces, where the trace vanishes).
    #[inline]
    pub fn tangential_gradient(&self, f: &Face, u: &[f64]) -> f64 {
        f.tangential.iter().map(|&(i, w)| w * u[i]).sum()
    }

    /// Full gradient vector at face `f`.
    #[inline]
    pub fn face_gradient(&self, f: &Face, u: &[f64]) -> Point {
        let g = self.normal_gradient(f, u);
        let t = self.tangential_gradient(f, u);
        if f.axis == 0 {
            [g, t]
        } else {
            [t, g]
        }
    }

    /// Linear stencil `(cell, coefficient)` of the full face gradient along
    /// `component`.
    fn gradient_stencil(&self, f: &Face, component: usize) -> Vec<(usize, f64)> {
        if component == f.axis {
            let mut st = Vec::new();
            if let Some(m) = f.minus {
                st.push((m, -1.0 / f.distance));
            }
            if let Some(p) = f.plus {
                st.push((p, 1.0 / f.distance));
            }
            st
        } else {
            f.tangential.clone()
        }
    }

    /// Matrix of the quadratic form `u ↦ Σ_f w_f |∇u|_f²` (the discrete
    /// Dirichlet energy measured by [`w1p_seminorm`] with `p = 2`).
    pub fn dirichlet_form(&self) -> BandedMatrix {
        let components = if matches!(self.kind, GridKind::Rect2d { .. }) { 2 } else { 1 };
        let mut band = 1;
        let mut stencils = Vec::new();
        for f in &self.faces {
            for c in 0..components {
                let st = self.gradient_stencil(f, c);
                if let (Some(lo), Some(hi)) = (st.iter().map(|x| x.0).min(), st.iter().map(|x| x.0).max()) {
                    band = band.max(hi - lo);
                }
                stencils.push((f.weight, st));
            }
        }
        let mut a = BandedMatrix::zeros(self.len(), band);
        for (w, st) in &stencils {
            for &(i, ci) in st {
                for &(j, cj) in st {
                    a.add(i, j, w * ci * cj);
                }
            }
        }
        a
    }
}

/// A field on a grid; boundary values are zero and not stored.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid function has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Face-based gradient of a grid function.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub vectors: Vec<Point>,
    pub weights: Vec<f64>,
    pub on_boundary: Vec<bool>,
}

impl GradientField {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.vectors.iter().map(|v| v[0].hypot(v[1]))
    }
}

pub fn gradient(u: &GridFunction) -> GradientField {
    let g = &u.grid;
    GradientField {
        vectors: g.faces().iter().map(|f| g.face_gradient(f, &u.values)).collect(),
        weights: g.faces().iter().map(|f| f.weight).collect(),
        on_boundary: g.faces().iter().map(Face::is_boundary).collect(),
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("norm exponent p = {p} must be ≥ 1")));
    }
    Ok(())
}

/// `(Σ m_i |u_i|^p)^{1/p}`.
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let s: f64 = u
        .values
        .iter()
        .zip(u.grid.measures())
        .map(|(v, m)| m * v.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `Σ m_i u_i²`.
pub fn l2_norm_sq(u: &GridFunction) -> f64 {
    u.values
        .iter()
        .zip(u.grid.measures())
        .map(|(v, m)| m * v * v)
        .sum()
}

/// `Σ_f w_f |∇u|_f^p`, the discrete `∫|∇u|^p`.
pub fn grad_p_integral(u: &GridFunction, p: f64) -> f64 {
    let g = &u.grid;
    g.faces()
        .iter()
        .map(|f| {
            let v = g.face_gradient(f, &u.values);
            f.weight * v[0].hypot(v[1]).powf(p)
        })
        .sum()
}

/// `(∫|∇u|^p)^{1/p}` in the discrete sense of [`grad_p_integral`].
pub fn w1p_seminorm(u: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(grad_p_integral(u, p).powf(1.0 / p))
}

/// Cell list `(u_i, m_i)`; the total measure is `|Ω|`.
pub fn to_sampled(u: &GridFunction) -> SampledFunction {
    SampledFunction::new(u.values.iter().copied().zip(u.grid.measures().iter().copied()))
        .expect("grid measures are positive and values finite")
}

/// Smallest eigenvalue of the discrete Dirichlet problem, i.e. the minimum of
/// `Σ_f w_f |∇u|_f² / Σ_i m_i u_i²`, by inverse iteration.
///
/// Its reciprocal is the discrete Poincaré constant.
pub fn smallest_dirichlet_eigenvalue(grid: &Grid) -> Result<f64> {
    let mut a = grid.dirichlet_form();
    let form = a.clone();
    a.factor()?;
    let m = grid.measures();
    let mut x: Vec<f64> = (0..grid.len()).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut rq = f64::INFINITY;
    for _ in 0..1000 {
        let mut y: Vec<f64> = x.iter().zip(m).map(|(xi, mi)| xi * mi).collect();
        a.solve_factored(&mut y);
        let norm = y.iter().zip(m).map(|(v, mi)| mi * v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let ky = form.mul_vec(&y);
        let new_rq: f64 = ky.iter().zip(&y).map(|(a, b)| a * b).sum();
        x = y;
        if (new_rq - rq).abs() <= 1e-14 * new_rq {
            return Ok(new_rq);
        }
        rq = new_rq;
    }
    Ok(rq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn measures_sum_to_volume() {
        let g = Grid::interval(0.0, PI, 37).unwrap();
        assert!((g.volume() - PI).abs() < 1e-12);
        for dim in [2, 3, 5] {
            let g = Grid::radial(dim, 1.0, 50).unwrap();
            let vol = unit_ball_volume(dim);
            assert!((g.volume() - vol).abs() < 1e-10 * vol);
            let g = Grid::radial_geometric(dim, 1.0, 200, 1e-6).unwrap();
            assert!((g.volume() - vol).abs() < 1e-10 * vol);
            assert!(g.nodes().iter().all(|x| x[0] > 0.0));
        }
        let g = Grid::unit_square(9).unwrap();
        assert!((g.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_nodes_avoid_origin_and_lie_in_cells() {
        let g = Grid::radial_geometric(2, 1.0, 100, 1e-5).unwrap();
        let faces: Vec<f64> = g.faces().iter().map(|f| f.position[0]).collect();
        assert!(g.nodes()[0][0] < faces[0]);
        for i in 1..g.len() {
            assert!(g.nodes()[i][0] > faces[i - 1] && g.nodes()[i][0] < faces[i]);
        }
    }

    #[test]
    fn affine_gradient_is_exact_inside() {
        let g = Arc::new(Grid::interval(0.0, 1.0, 20).unwrap());
        let u = GridFunction::from_fn(g, |x| x[0]);
        let grad = gradient(&u);
        for (v, b) in grad.vectors.iter().zip(&grad.on_boundary) {
            if !b {
                assert!((v[0] - 1.0).abs() < 1e-12);
            }
        }
        let zero = GridFunction::zeros(u.grid().clone());
        assert!(gradient(&zero).magnitudes().all(|m| m == 0.0));
    }

    #[test]
    fn sine_gradient_second_order() {
        let g = Arc::new(Grid::interval(0.0, PI, 200).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x| x[0].sin());
        let grad = gradient(&u);
        let err = g
            .faces()
            .iter()
            .zip(&grad.vectors)
            .map(|(f, v)| (v[0] - f.position[0].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn norms_on_interval() {
        for n in [10, 100, 1000] {
            let g = Arc::new(Grid::interval(0.0, 1.0, n).unwrap());
            let one = GridFunction::from_fn(g, |_| 1.0);
            assert!((lp_norm(&one, 2.0).unwrap() - 1.0).abs() < 1e-12);
        }
        let g = Arc::new(Grid::interval(0.0, PI, 400).unwrap());
        let s = GridFunction::from_fn(g, |x| x[0].sin());
        assert!((l2_norm_sq(&s) - PI / 2.0).abs() < 1e-3);
        assert!(lp_norm(&s, 0.5).is_err());
        let zero = GridFunction::zeros(s.grid().clone());
        assert_eq!(lp_norm(&zero, 3.0).unwrap(), 0.0);
        assert_eq!(w1p_seminorm(&zero, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn affine_cone_seminorm() {
        // u = g (R - r) has |∇u| = g everywhere and zero trace
        let slope = 1.7;
        for p in [1.5, 2.0, 3.0] {
            let g = Arc::new(Grid::radial(3, 1.0, 400).unwrap());
            let vol = g.volume();
            let u = GridFunction::from_fn(g, |x| slope * (1.0 - x[0]));
            let w = w1p_seminorm(&u, p).unwrap();
            let expect = slope * vol.powf(1.0 / p);
            assert!((w - expect).abs() < 1e-3 * expect, "p={p}: {w} vs {expect}");
        }
    }

    #[test]
    fn to_sampled_preserves_measure() {
        let g = Arc::new(Grid::radial(3, 1.0, 30).unwrap());
        let c = GridFunction::from_fn(g.clone(), |_| 2.5);
        let s = to_sampled(&c);
        assert!((s.total_measure() - g.volume()).abs() < 1e-12);
        assert!(s.cells().iter().all(|x| x.value == 2.5));
    }

    #[test]
    fn interval_eigenvalue_matches_stencil_formula() {
        let n = 400;
        let h = PI / n as f64;
        let g = Grid::interval(0.0, PI, n).unwrap();
        let lam = smallest_dirichlet_eigenvalue(&g).unwrap();
        let exact = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
        assert!((lam - exact).abs() < 1e-9, "{lam} vs {exact}");
    }

    #[test]
    fn square_eigenvalue_close_to_continuum() {
        let g = Grid::unit_square(40).unwrap();
        let lam = smallest_dirichlet_eigenvalue(&g).unwrap();
        let exact = 2.0 * PI * PI;
        assert!((lam - exact).abs() < 0.02 * exact, "{lam} vs {exact}");
    }
}
