//! Cost functional, boundary quadrature and discrete gradient assembly.

use serde::Serialize;

use crate::adjoint::{solve_adjoint, AdjointOptions};
use crate::control::{BoundaryControl, BoundarySeries, FluxTrace};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, ForwardSolution};
use crate::grid::{Field, Grid};
use crate::model::{ModelParams, PhysicalityReport};
use crate::scenarios::Scenario;
use crate::trajectory::StoragePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    /// `mismatch + regularization`.
    pub total: f64,
    /// `1/2 int |phase(T) - target|^2`.
    pub mismatch: f64,
    /// `alpha/2 int int |u|^2`.
    pub regularization: f64,
    /// Unweighted Euclidean norm of `phase(T) - target` over all mesh values.
    pub error_norm: f64,
    pub realistic: bool,
    /// Peak physicality indicator and how far it exceeds its bound.
    pub physicality_peak: f64,
    pub physicality_excess: f64,
}

/// `sum_k sum_b f s dt |edge cell|` over all time levels and non-corner
/// boundary points (`|edge cell| = 1` in 1D).
pub fn boundary_quadrature(f: &BoundarySeries, s: &BoundarySeries, grid: &Grid) -> Result<f64> {
    f.check_shape(grid)?;
    s.check_shape(grid)?;
    let nb = grid.boundary_len();
    let measures: Vec<f64> = grid.boundary().iter().map(|b| b.measure).collect();
    let mut total = 0.0;
    for k in 0..grid.time_levels() {
        let (fk, sk) = (f.level(k), s.level(k));
        let mut level_sum = 0.0;
        for b in 0..nb {
            level_sum += fk[b] * sk[b] * measures[b];
        }
        total += level_sum;
    }
    Ok(total * grid.dt())
}

/// Unweighted Euclidean distance between two mesh functions.
pub fn error_norm(phase: &Field, target: &Field) -> f64 {
    phase
        .values()
        .iter()
        .zip(target.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Evaluates the cost of a final phase field and control.
pub fn cost(
    final_phase: &Field,
    target: &Field,
    control: &BoundaryControl,
    physicality: &PhysicalityReport,
    params: &ModelParams,
    grid: &Grid,
) -> Result<CostReport> {
    grid.check_field(final_phase, "final phase")?;
    grid.check_field(target, "target")?;
    let mismatch = 0.5
        * final_phase
            .values()
            .iter()
            .zip(target.values())
            .enumerate()
            .map(|(k, (a, b))| (a - b) * (a - b) * grid.cell_volume(k))
            .sum::<f64>();
    let regularization = if params.alpha == 0.0 {
        0.0
    } else {
        0.5 * params.alpha * boundary_quadrature(control, control, grid)?
    };
    let report = CostReport {
        total: mismatch + regularization,
        mismatch,
        regularization,
        error_norm: error_norm(final_phase, target),
        realistic: physicality.realistic(),
        physicality_peak: physicality.peak,
        physicality_excess: physicality.excess(),
    };
    if !(report.total.is_finite() && report.error_norm.is_finite()) {
        return Err(Error::NonFinite("cost"));
    }
    Ok(report)
}

/// Gradient of the discrete reduced cost: `(alpha u - p3) * w` per boundary
/// index, with `w` the quadrature cell measure `dt * |edge cell|`.
pub fn gradient(
    flux: &FluxTrace,
    control: &BoundaryControl,
    params: &ModelParams,
    grid: &Grid,
) -> Result<BoundaryControl> {
    flux.check_shape(grid)?;
    control.check_shape(grid)?;
    let weights: Vec<f64> = (0..grid.boundary_len())
        .map(|b| grid.boundary_weight(b))
        .collect();
    let mut g = BoundarySeries::zeros(grid);
    for k in 0..grid.time_levels() {
        let (fk, uk) = (flux.level(k), control.level(k));
        for ((o, w), (p3, u)) in g.level_mut(k).iter_mut().zip(&weights).zip(fk.iter().zip(uk)) {
            *o = (params.alpha * u - p3) * w;
        }
    }
    Ok(g)
}

/// Reduced cost at `control`, keeping the forward solution.
pub fn evaluate(
    scenario: &Scenario,
    control: &BoundaryControl,
    storage: StoragePolicy,
) -> Result<(CostReport, ForwardSolution)> {
    let forward = solve_forward(scenario, control, storage)?;
    let report = cost(
        &forward.final_state().phase,
        &scenario.target,
        control,
        &forward.physicality,
        &scenario.params,
        &scenario.grid,
    )?;
    Ok((report, forward))
}

/// Reduced cost and its adjoint gradient at `control`.
pub fn cost_and_gradient(
    scenario: &Scenario,
    control: &BoundaryControl,
    storage: StoragePolicy,
) -> Result<(CostReport, BoundaryControl)> {
    let (report, forward) = evaluate(scenario, control, storage)?;
    let adjoint = solve_adjoint(
        &forward.trajectory,
        &scenario.target,
        scenario,
        AdjointOptions::default(),
    )?;
    let g = gradient(&adjoint.flux, control, &scenario.params, &scenario.grid)?;
    Ok((report, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn zero_cost_at_target() {
        let g = Grid::new(GridSpec::line(1.0, 11, 5, 1.0)).unwrap();
        let p = ModelParams::table1();
        let f = Field::from_fn(&g, |x, _| x);
        let u = BoundarySeries::zeros(&g);
        let r = cost(&f, &f, &u, &PhysicalityReport::new(&p), &p, &g).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.error_norm, 0.0);
    }

    #[test]
    fn unit_mismatch_on_unit_interval() {
        let g = Grid::new(GridSpec::line(1.0, 21, 5, 1.0)).unwrap();
        let p = ModelParams::table1();
        let r = cost(
            &Field::filled(&g, 1.0),
            &g.zeros(),
            &BoundarySeries::zeros(&g),
            &PhysicalityReport::new(&p),
            &p,
            &g,
        )
        .unwrap();
        assert!((r.mismatch - 0.5).abs() < 1e-14);
        assert!((r.error_norm - 21f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn quadrature_weights() {
        let g = Grid::new(GridSpec::line(1.0, 5, 101, 1.0)).unwrap();
        let one = BoundarySeries::constant(&g, 1.0);
        let q = boundary_quadrature(&one, &one, &g).unwrap();
        // two points, 101 levels of weight dt = 1/100
        let expected = 2.0 * 101.0 * (1.0 / 100.0);
        assert!((q - expected).abs() < 1e-13);
        assert_eq!(boundary_quadrature(&BoundarySeries::zeros(&g), &one, &g).unwrap(), 0.0);
        let mut three = one.clone();
        three.scale(3.0);
        let s = BoundarySeries::from_fn(&g, |k, b| (k as f64).sin() + b as f64);
        let lhs = boundary_quadrature(&three, &s, &g).unwrap();
        let rhs = 3.0 * boundary_quadrature(&one, &s, &g).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
    }

    #[test]
    fn gradient_formula() {
        let g = Grid::new(GridSpec::line(1.0, 5, 11, 1.0)).unwrap();
        let mut p = ModelParams::table1();
        let zero = BoundarySeries::zeros(&g);
        assert_eq!(gradient(&zero, &zero, &p, &g).unwrap(), zero);

        p.alpha = 2.0;
        let u = BoundarySeries::constant(&g, 1.0);
        let gr = gradient(&zero, &u, &p, &g).unwrap();
        assert!(gr.values().iter().all(|&v| (v - 2.0 * g.dt()).abs() < 1e-15));

        // joint linearity in (flux, u)
        let f1 = BoundarySeries::from_fn(&g, |k, b| (k * 3 + b) as f64 * 0.1);
        let f2 = BoundarySeries::from_fn(&g, |k, b| (k as f64 - b as f64).cos());
        let mut f12 = f1.clone();
        f12.axpy(-2.5, &f2);
        let mut u12 = u.clone();
        u12.axpy(-2.5, &f1);
        let mut expected = gradient(&f1, &u, &p, &g).unwrap();
        expected.axpy(-2.5, &gradient(&f2, &f1, &p, &g).unwrap());
        let got = gradient(&f12, &u12, &p, &g).unwrap();
        for (a, b) in got.values().iter().zip(expected.values()) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = Grid::new(GridSpec::line(1.0, 5, 11, 1.0)).unwrap();
        let g2 = Grid::new(GridSpec::line(1.0, 5, 12, 1.0)).unwrap();
        let p = ModelParams::table1();
        let u = BoundarySeries::zeros(&g2);
        assert!(gradient(&BoundarySeries::zeros(&g), &u, &p, &g).is_err());
        let other = Grid::new(GridSpec::line(1.0, 6, 11, 1.0)).unwrap();
        assert!(cost(
            &other.zeros(),
            &g.zeros(),
            &BoundarySeries::zeros(&g),
            &PhysicalityReport::new(&p),
            &p,
            &g
        )
        .is_err());
    }
}
