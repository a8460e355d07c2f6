//! Uniform vertex-centred space-time meshes on 1D intervals and 2D rectangles.
//!
//! Mesh values are stored row-major with axis order `(x1, x2)`, so the flat
//! index of point `(i, j)` is `i * n2 + j`; in 1D `n2 == 1`. Boundary points
//! are enumerated bottom edge, top edge, left edge, right edge (2D) or left,
//! right (1D), each by increasing along-index. Corners are never part of the
//! boundary enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Length and point count of one spatial axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub length: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(length: f64, points: usize) -> Self {
        Self { length, points }
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.points - 1) as f64
    }
}

/// Description of a space-time mesh before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x1: Axis,
    /// Second axis; `None` for a 1D interval.
    pub x2: Option<Axis>,
    /// Number of time levels `N_t` (including `t = 0` and `t = T`).
    pub time_levels: usize,
    pub final_time: f64,
}

impl GridSpec {
    pub fn line(length: f64, points: usize, time_levels: usize, final_time: f64) -> Self {
        Self {
            x1: Axis::new(length, points),
            x2: None,
            time_levels,
            final_time,
        }
    }

    pub fn rect(x1: Axis, x2: Axis, time_levels: usize, final_time: f64) -> Self {
        Self {
            x1,
            x2: Some(x2),
            time_levels,
            final_time,
        }
    }

    pub fn dim(&self) -> usize {
        if self.x2.is_some() {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check_axis(axis: &Axis, len: &'static str, pts: &'static str) -> Result<()> {
            if !(axis.length > 0.0 && axis.length.is_finite()) {
                return Err(Error::InvalidGrid {
                    field: len,
                    reason: format!("must be positive and finite, got {}", axis.length),
                });
            }
            if axis.points < 3 {
                return Err(Error::InvalidGrid {
                    field: pts,
                    reason: format!("need at least 3 points, got {}", axis.points),
                });
            }
            Ok(())
        }
        check_axis(&self.x1, "lx", "nx")?;
        if let Some(x2) = &self.x2 {
            check_axis(x2, "ly", "ny")?;
        }
        if self.time_levels < 2 {
            return Err(Error::InvalidGrid {
                field: "nt",
                reason: format!("need at least 2 time levels, got {}", self.time_levels),
            });
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidGrid {
                field: "t_final",
                reason: format!("must be positive and finite, got {}", self.final_time),
            });
        }
        Ok(())
    }
}

/// Side of the domain a boundary point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    /// `x2 = 0` (2D only).
    Bottom,
    /// `x2 = L_x2` (2D only).
    Top,
    /// `x1 = 0`.
    Left,
    /// `x1 = L_x1`.
    Right,
}

impl Edge {
    pub fn name(self) -> &'static str {
        match self {
            Edge::Bottom => "bottom",
            Edge::Top => "top",
            Edge::Left => "left",
            Edge::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Edge> {
        match s {
            "bottom" => Some(Edge::Bottom),
            "top" => Some(Edge::Top),
            "left" => Some(Edge::Left),
            "right" => Some(Edge::Right),
            _ => None,
        }
    }
}

/// A non-corner mesh point on the spatial boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub edge: Edge,
    /// Position along the edge: `i` on bottom/top, `j` on left/right, 0 in 1D.
    pub along: usize,
    /// Flat mesh index of the point.
    pub index: usize,
    /// Flat mesh index of the interior neighbour along the inward normal.
    pub neighbor: usize,
    /// Mesh spacing along the normal direction.
    pub normal_spacing: f64,
    /// Length of boundary attributed to the point (1 in 1D).
    pub measure: f64,
}

/// A boundary point at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryIndex {
    pub level: usize,
    pub point: usize,
}

/// Validated mesh with derived spacings and boundary enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    n1: usize,
    n2: usize,
    dt: f64,
    dx1: f64,
    dx2: f64,
    boundary: Vec<BoundaryPoint>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n1 = spec.x1.points;
        let dx1 = spec.x1.spacing();
        let (n2, dx2) = match &spec.x2 {
            Some(ax) => (ax.points, ax.spacing()),
            None => (1, f64::NAN),
        };
        let dt = spec.final_time / (spec.time_levels - 1) as f64;

        let mut boundary = Vec::new();
        if spec.x2.is_none() {
            boundary.push(BoundaryPoint {
                edge: Edge::Left,
                along: 0,
                index: 0,
                neighbor: 1,
                normal_spacing: dx1,
                measure: 1.0,
            });
            boundary.push(BoundaryPoint {
                edge: Edge::Right,
                along: 0,
                index: n1 - 1,
                neighbor: n1 - 2,
                normal_spacing: dx1,
                measure: 1.0,
            });
        } else {
            let idx = |i: usize, j: usize| i * n2 + j;
            for i in 1..n1 - 1 {
                boundary.push(BoundaryPoint {
                    edge: Edge::Bottom,
                    along: i,
                    index: idx(i, 0),
                    neighbor: idx(i, 1),
                    normal_spacing: dx2,
                    measure: dx1,
                });
            }
            for i in 1..n1 - 1 {
                boundary.push(BoundaryPoint {
                    edge: Edge::Top,
                    along: i,
                    index: idx(i, n2 - 1),
                    neighbor: idx(i, n2 - 2),
                    normal_spacing: dx2,
                    measure: dx1,
                });
            }
            for j in 1..n2 - 1 {
                boundary.push(BoundaryPoint {
                    edge: Edge::Left,
                    along: j,
                    index: idx(0, j),
                    neighbor: idx(1, j),
                    normal_spacing: dx1,
                    measure: dx2,
                });
            }
            for j in 1..n2 - 1 {
                boundary.push(BoundaryPoint {
                    edge: Edge::Right,
                    along: j,
                    index: idx(n1 - 1, j),
                    neighbor: idx(n1 - 2, j),
                    normal_spacing: dx1,
                    measure: dx2,
                });
            }
        }

        Ok(Self {
            spec,
            n1,
            n2,
            dt,
            dx1,
            dx2,
            boundary,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn is_2d(&self) -> bool {
        self.spec.x2.is_some()
    }

    /// Point counts `(n1, n2)`; `n2 == 1` in 1D.
    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_levels(&self) -> usize {
        self.spec.time_levels
    }

    pub fn final_time(&self) -> f64 {
        self.spec.final_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx1(&self) -> f64 {
        self.dx1
    }

    /// Spacing along `x2`; NaN in 1D.
    pub fn dx2(&self) -> f64 {
        self.dx2
    }

    pub fn min_spacing(&self) -> f64 {
        if self.is_2d() {
            self.dx1.min(self.dx2)
        } else {
            self.dx1
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    /// Mesh coordinates of a flat index.
    pub fn coords(&self, index: usize) -> (f64, f64) {
        let i = index / self.n2;
        let j = index % self.n2;
        let x2 = if self.is_2d() { j as f64 * self.dx2 } else { 0.0 };
        (i as f64 * self.dx1, x2)
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    /// Time level closest to `t`, clamped to the mesh.
    pub fn level_at(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.time_levels() - 1)
        }
    }

    pub fn boundary(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_interior(&self, index: usize) -> bool {
        let i = index / self.n2;
        let j = index % self.n2;
        let inner1 = i > 0 && i + 1 < self.n1;
        if self.is_2d() {
            inner1 && j > 0 && j + 1 < self.n2
        } else {
            inner1
        }
    }

    pub fn is_corner(&self, index: usize) -> bool {
        if !self.is_2d() {
            return false;
        }
        let i = index / self.n2;
        let j = index % self.n2;
        (i == 0 || i + 1 == self.n1) && (j == 0 || j + 1 == self.n2)
    }

    /// Flat indices of interior points, in layout order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.is_interior(k))
    }

    /// Quadrature weight (cell volume) of a mesh point: full cells inside,
    /// half cells on edges and quarter cells at corners.
    pub fn cell_volume(&self, index: usize) -> f64 {
        let i = index / self.n2;
        let j = index % self.n2;
        let half = |k: usize, n: usize| if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        let mut w = self.dx1 * half(i, self.n1);
        if self.is_2d() {
            w *= self.dx2 * half(j, self.n2);
        }
        w
    }

    /// Cell measure of a boundary index in `[0, T] x dOmega`.
    pub fn boundary_weight(&self, point: usize) -> f64 {
        self.dt * self.boundary[point].measure
    }

    pub fn zeros(&self) -> Field {
        Field::filled(self, 0.0)
    }

    pub fn check_field(&self, field: &Field, what: &str) -> Result<()> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: field shape {:?} does not match grid {:?}",
                field.shape(),
                self.shape()
            )));
        }
        Ok(())
    }
}

/// Scalar mesh function at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn filled(grid: &Grid, value: f64) -> Self {
        let (n1, n2) = grid.shape();
        Self {
            n1,
            n2,
            values: vec![value; n1 * n2],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        let (n1, n2) = grid.shape();
        Ok(Self { n1, n2, values })
    }

    /// Samples `f(x1, x2)` at every mesh point (`x2 = 0` in 1D).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let (n1, n2) = grid.shape();
        let values = (0..grid.len())
            .map(|k| {
                let (x1, x2) = grid.coords(k);
                f(x1, x2)
            })
            .collect();
        Self { n1, n2, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n2 + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Central second-difference Laplacian at interior point `k` of flat data.
///
/// Opposite neighbours are summed first so that mirrored inputs give
/// bit-identical results.
#[inline(always)]
pub(crate) fn laplacian_at(data: &[f64], k: usize, n2: usize, inv_dx1_sq: f64, inv_dx2_sq: f64) -> f64 {
    let c = data[k];
    let along1 = ((data[k - n2] + data[k + n2]) - 2.0 * c) * inv_dx1_sq;
    if n2 == 1 {
        along1
    } else {
        along1 + ((data[k - 1] + data[k + 1]) - 2.0 * c) * inv_dx2_sq
    }
}

/// Inverse squared spacings `(1/dx1^2, 1/dx2^2)`; the second is 0 in 1D.
pub(crate) fn inverse_spacings_sq(grid: &Grid) -> (f64, f64) {
    let a = 1.0 / (grid.dx1() * grid.dx1());
    let b = if grid.is_2d() {
        1.0 / (grid.dx2() * grid.dx2())
    } else {
        0.0
    };
    (a, b)
}

/// 3-point (1D) or 5-point (2D) discrete Laplacian. Only interior values of
/// the result are meaningful; boundary entries are set to zero.
pub fn laplacian(f: &Field, grid: &Grid) -> Result<Field> {
    grid.check_field(f, "laplacian")?;
    if !f.is_finite() {
        return Err(Error::NonFinite("laplacian input"));
    }
    let (_, n2) = grid.shape();
    let (a, b) = inverse_spacings_sq(grid);
    let mut out = grid.zeros();
    for k in grid.interior() {
        out.values[k] = laplacian_at(&f.values, k, n2, a, b);
    }
    Ok(out)
}

/// Largest time step for which the explicit scheme is diffusion-stable:
/// `min dx^2 / (2 dim D)` over the heat equation (`D = 1`) and the phase
/// equation (`D = 1/gamma`).
pub fn stability_bound(grid: &Grid, params: &ModelParams) -> f64 {
    let h = grid.min_spacing();
    let d = 1.0_f64.max(1.0 / params.gamma);
    h * h / (2.0 * grid.dim() as f64 * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Grid {
        Grid::new(GridSpec::line(1.0, n, 2, 1.0)).unwrap()
    }

    #[test]
    fn published_resolution_spacings() {
        let g = Grid::new(GridSpec::line(1.0, 400, 400_000, 0.1)).unwrap();
        assert_eq!(g.dx1(), 1.0 / 399.0);
        assert_eq!(g.dt(), 0.1 / 399_999.0);
    }

    #[test]
    fn smallest_legal_grid() {
        let g = Grid::new(GridSpec::line(1.0, 3, 2, 1.0)).unwrap();
        assert_eq!(g.dx1(), 0.5);
        assert_eq!(g.dt(), 1.0);
        assert_eq!(g.boundary_len(), 2);
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let bad = [
            (GridSpec::line(1.0, 2, 10, 1.0), "nx"),
            (GridSpec::line(0.0, 5, 10, 1.0), "lx"),
            (GridSpec::line(1.0, 5, 1, 1.0), "nt"),
            (GridSpec::line(1.0, 5, 10, -1.0), "t_final"),
            (
                GridSpec::rect(Axis::new(1.0, 5), Axis::new(1.0, 2), 10, 1.0),
                "ny",
            ),
        ];
        for (spec, name) in bad {
            match Grid::new(spec) {
                Err(Error::InvalidGrid { field, .. }) => assert_eq!(field, name),
                other => panic!("expected invalid {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn boundary_enumeration_2d() {
        let g = Grid::new(GridSpec::rect(Axis::new(0.6, 60), Axis::new(1.0, 100), 2, 1.0)).unwrap();
        assert_eq!(g.boundary_len(), 2 * (60 - 2) + 2 * (100 - 2));
        let mut seen = std::collections::HashSet::new();
        for b in g.boundary() {
            assert!(!g.is_corner(b.index));
            assert!(!g.is_interior(b.index));
            assert!(g.is_interior(b.neighbor));
            assert!(seen.insert(b.index));
        }
        let edge_points = (0..g.len())
            .filter(|&k| !g.is_interior(k) && !g.is_corner(k))
            .count();
        assert_eq!(edge_points, seen.len());
        // frozen order: bottom, top, left, right
        let edges: Vec<Edge> = g.boundary().iter().map(|b| b.edge).collect();
        assert_eq!(edges[0], Edge::Bottom);
        assert_eq!(edges[58], Edge::Top);
        assert_eq!(edges[116], Edge::Left);
        assert_eq!(edges[116 + 98], Edge::Right);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = line(9);
        let f = Field::filled(&g, 3.7);
        let l = laplacian(&f, &g).unwrap();
        for k in g.interior() {
            assert_eq!(l.values()[k], 0.0);
        }
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = Grid::new(GridSpec::line(1.0, 17, 2, 1.0)).unwrap();
        let f = Field::from_fn(&g, |x, _| x * x);
        let l = laplacian(&f, &g).unwrap();
        for k in g.interior() {
            assert!((l.values()[k] - 2.0).abs() < 1e-10, "{}", l.values()[k]);
        }

        let g2 = Grid::new(GridSpec::rect(Axis::new(0.6, 13), Axis::new(1.0, 21), 2, 1.0)).unwrap();
        let f2 = Field::from_fn(&g2, |x, y| x * x + y * y);
        let l2 = laplacian(&f2, &g2).unwrap();
        for k in g2.interior() {
            assert!((l2.values()[k] - 4.0).abs() < 1e-9, "{}", l2.values()[k]);
        }
    }

    #[test]
    fn laplacian_rejects_non_finite() {
        let g = line(5);
        let mut f = g.zeros();
        f.values_mut()[2] = f64::NAN;
        assert!(matches!(laplacian(&f, &g), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cell_volumes_sum_to_domain_measure() {
        let g = line(11);
        let total: f64 = (0..g.len()).map(|k| g.cell_volume(k)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let g2 = Grid::new(GridSpec::rect(Axis::new(0.6, 7), Axis::new(1.0, 9), 2, 1.0)).unwrap();
        let total2: f64 = (0..g2.len()).map(|k| g2.cell_volume(k)).sum();
        assert!((total2 - 0.6).abs() < 1e-14);
    }

    #[test]
    fn stability_bounds() {
        let g = Grid::new(GridSpec::line(1.0, 400, 400_000, 0.1)).unwrap();
        let p = ModelParams::table1();
        let bound = stability_bound(&g, &p);
        assert!((bound - (1.0f64 / 399.0).powi(2) / 2.0).abs() < 1e-20);
        assert!((bound - 3.14e-6).abs() < 1e-8);
        assert!(g.dt() <= bound);

        // large gamma: heat equation decides
        let mut slow = p.clone();
        slow.gamma = 1e9;
        assert_eq!(stability_bound(&g, &slow), g.dx1() * g.dx1() / 2.0);

        let g2 = Grid::new(GridSpec::rect(Axis::new(0.6, 60), Axis::new(1.0, 100), 8000, 0.081)).unwrap();
        let p2 = ModelParams::table6();
        let h = (0.6f64 / 59.0).min(1.0 / 99.0);
        assert!((stability_bound(&g2, &p2) - h * h / 4.0).abs() < 1e-18);
        assert!(g2.dt() <= stability_bound(&g2, &p2));
    }
}
