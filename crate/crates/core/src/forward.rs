//! Explicit Euler solver for the coupled heat / Allen-Cahn state system.
//!
//! One step from level `k` to `k + 1` updates the phase field first, using
//! the temperature at level `k`, and then the temperature, using the
//! just-computed discrete phase increment for the latent-heat source:
//!
//! ```text
//! phase' = phase + dt/(gamma xi^2) (xi^2 L phase + f0(y, phase))
//! y'     = y + dt L y + H (phase' - phase)
//! ```
//!
//! Frame `k` always carries the control values `u_k` on the boundary.

use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::grid::{inverse_spacings_sq, laplacian_at, stability_bound, Field, Grid};
use crate::model::{ModelParams, PhysicalityReport};
use crate::scenarios::Scenario;
use crate::trajectory::{StoragePolicy, Trajectory};

/// Temperature and phase field at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub level: usize,
    pub temperature: Field,
    pub phase: Field,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverWarning {
    /// The time step exceeds the explicit diffusion stability limit.
    UnstableTimeStep { dt: f64, bound: f64 },
}

impl std::fmt::Display for SolverWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverWarning::UnstableTimeStep { dt, bound } => {
                write!(f, "time step {dt:e} exceeds stability bound {bound:e}")
            }
        }
    }
}

/// Checks the time step against [`stability_bound`], logging on violation.
pub fn check_stability(grid: &Grid, params: &ModelParams) -> Option<SolverWarning> {
    let bound = stability_bound(grid, params);
    if grid.dt() > bound {
        let w = SolverWarning::UnstableTimeStep {
            dt: grid.dt(),
            bound,
        };
        log::warn!("{w}");
        Some(w)
    } else {
        None
    }
}

/// Calls `f` for every interior flat index in layout order.
#[inline(always)]
pub(crate) fn for_each_interior(grid: &Grid, mut f: impl FnMut(usize)) {
    let (n1, n2) = grid.shape();
    let (j0, j1) = if grid.is_2d() { (1, n2 - 1) } else { (0, 1) };
    for i in 1..n1 - 1 {
        let row = i * n2;
        for j in j0..j1 {
            f(row + j);
        }
    }
}

/// Writes boundary values into `data`; 2D corners receive the mean of
/// their two edge neighbours.
pub(crate) fn impose_boundary(data: &mut [f64], values: &[f64], grid: &Grid) {
    for (b, v) in grid.boundary().iter().zip(values) {
        data[b.index] = *v;
    }
    if grid.is_2d() {
        let (n1, n2) = grid.shape();
        let idx = |i: usize, j: usize| i * n2 + j;
        for (ci, cj, ni, nj) in [
            (0, 0, 1, 1),
            (n1 - 1, 0, n1 - 2, 1),
            (0, n2 - 1, 1, n2 - 2),
            (n1 - 1, n2 - 1, n1 - 2, n2 - 2),
        ] {
            data[idx(ci, cj)] = 0.5 * (data[idx(ni, cj)] + data[idx(ci, nj)]);
        }
    }
}

/// Returns `f` with the prescribed boundary values (interior untouched).
pub fn apply_dirichlet(f: &Field, values: &[f64], grid: &Grid) -> Result<Field> {
    grid.check_field(f, "apply_dirichlet")?;
    if values.len() != grid.boundary_len() {
        return Err(Error::IncompleteBoundary {
            expected: grid.boundary_len(),
            actual: values.len(),
        });
    }
    let mut out = f.clone();
    impose_boundary(out.values_mut(), values, grid);
    Ok(out)
}

/// Precomputed coefficients for repeated forward steps on one grid.
#[derive(Debug, Clone)]
pub(crate) struct Stepper<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    phase_bc: &'a [f64],
    inv1: f64,
    inv2: f64,
    /// `dt / (gamma xi^2)`.
    phase_rate: f64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(grid: &'a Grid, params: &'a ModelParams, phase_bc: &'a [f64]) -> Self {
        let (inv1, inv2) = inverse_spacings_sq(grid);
        Self {
            grid,
            params,
            phase_bc,
            inv1,
            inv2,
            phase_rate: grid.dt() / (params.gamma * params.xi * params.xi),
        }
    }

    /// Builds frame 0 from initial conditions.
    pub(crate) fn initial(&self, y0: &Field, phase0: &Field, u0: &[f64]) -> State {
        let mut temperature = y0.clone();
        let mut phase = phase0.clone();
        impose_boundary(temperature.values_mut(), u0, self.grid);
        impose_boundary(phase.values_mut(), self.phase_bc, self.grid);
        State {
            level: 0,
            temperature,
            phase,
        }
    }

    /// Advances `cur` (whose boundary already carries its own control) into
    /// `next`, imposing `u_next` on the result.
    pub(crate) fn advance(&self, cur: &State, next: &mut State, u_next: &[f64]) -> Result<()> {
        let n2 = self.grid.shape().1;
        let (inv1, inv2) = (self.inv1, self.inv2);
        let dt = self.grid.dt();
        let xi2 = self.params.xi * self.params.xi;
        let heat = self.params.latent_heat;
        let rate = self.phase_rate;
        let params = self.params;

        let y = cur.temperature.values();
        let ph = cur.phase.values();
        let mut check = 0.0;
        {
            let ny = next.temperature.values_mut();
            let nph = next.phase.values_mut();
            for_each_interior(self.grid, |k| {
                let lap_ph = laplacian_at(ph, k, n2, inv1, inv2);
                let new_ph = ph[k] + rate * (xi2 * lap_ph + params.reaction(y[k], ph[k]));
                let lap_y = laplacian_at(y, k, n2, inv1, inv2);
                let new_y = y[k] + dt * lap_y + heat * (new_ph - ph[k]);
                nph[k] = new_ph;
                ny[k] = new_y;
                check += new_ph + new_y;
            });
        }
        next.level = cur.level + 1;
        if !check.is_finite() {
            return Err(Error::BlowUp {
                what: "forward state",
                level: next.level,
            });
        }
        impose_boundary(next.temperature.values_mut(), u_next, self.grid);
        impose_boundary(next.phase.values_mut(), self.phase_bc, self.grid);
        Ok(())
    }
}

/// One explicit Euler step from `state` (level `k`) to level `k + 1`.
///
/// `u_now` is imposed on the temperature and the phase boundary data on the
/// phase field before the update; `u_next` is imposed on the result.
pub fn step(state: &State, u_now: &[f64], u_next: &[f64], scenario: &Scenario) -> Result<State> {
    let grid = &scenario.grid;
    for v in [u_now, u_next] {
        if v.len() != grid.boundary_len() {
            return Err(Error::IncompleteBoundary {
                expected: grid.boundary_len(),
                actual: v.len(),
            });
        }
    }
    grid.check_field(&state.temperature, "temperature")?;
    grid.check_field(&state.phase, "phase")?;
    let stepper = Stepper::new(grid, &scenario.params, &scenario.phase_bc);
    let mut cur = state.clone();
    impose_boundary(cur.temperature.values_mut(), u_now, grid);
    impose_boundary(cur.phase.values_mut(), &scenario.phase_bc, grid);
    let mut next = cur.clone();
    stepper.advance(&cur, &mut next, u_next)?;
    Ok(next)
}

/// Result of a forward solve.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub trajectory: Trajectory,
    pub physicality: PhysicalityReport,
    pub warnings: Vec<SolverWarning>,
}

impl ForwardSolution {
    pub fn final_state(&self) -> &State {
        self.trajectory.last()
    }
}

/// Solves the state system under `control`, recording the trajectory.
pub fn solve_forward(
    scenario: &Scenario,
    control: &BoundaryControl,
    storage: StoragePolicy,
) -> Result<ForwardSolution> {
    solve_forward_observed(scenario, control, storage, |_| {})
}

/// [`solve_forward`] that also hands every frame, in time order, to
/// `observer`.
pub fn solve_forward_observed(
    scenario: &Scenario,
    control: &BoundaryControl,
    storage: StoragePolicy,
    mut observer: impl FnMut(&State),
) -> Result<ForwardSolution> {
    let grid = &scenario.grid;
    let params = &scenario.params;
    control.check_shape(grid)?;
    if !control.is_finite() {
        return Err(Error::NonFinite("control"));
    }
    let warnings: Vec<_> = check_stability(grid, params).into_iter().collect();

    let nt = grid.time_levels();
    let stride = storage.stride(grid);
    let stepper = Stepper::new(grid, params, &scenario.phase_bc);

    let mut physicality = PhysicalityReport::new(params);
    let mut cur = stepper.initial(
        &scenario.initial_temperature,
        &scenario.initial_phase,
        control.level(0),
    );
    let mut next = cur.clone();
    let mut frames = Vec::with_capacity(nt.div_ceil(stride));

    physicality.observe(0, cur.temperature.values(), params, grid);
    observer(&cur);
    frames.push(cur.clone());
    for k in 1..nt {
        stepper.advance(&cur, &mut next, control.level(k))?;
        std::mem::swap(&mut cur, &mut next);
        physicality.observe(k, cur.temperature.values(), params, grid);
        observer(&cur);
        if k % stride == 0 {
            frames.push(cur.clone());
        }
    }

    let trajectory = Trajectory::new(scenario, control.clone(), stride, frames, cur);
    Ok(ForwardSolution {
        trajectory,
        physicality,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::BoundarySeries;
    use crate::grid::{Axis, GridSpec};
    use crate::model::{Limiter, ReactionKind};
    use crate::scenarios::Scenario;

    fn tiny(params: ModelParams, dt: f64, y0: f64, phase0: f64) -> Scenario {
        let grid = Grid::new(GridSpec::line(1.0, 3, 2, dt)).unwrap();
        Scenario::uniform("tiny", grid, params, y0, phase0, 0.0, 0.0)
    }

    #[test]
    fn dirichlet_overwrites_boundary_only() {
        let g = Grid::new(GridSpec::line(1.0, 3, 2, 1.0)).unwrap();
        let f = Field::filled(&g, 9.0);
        let out = apply_dirichlet(&f, &[0.0, 1.0], &g).unwrap();
        assert_eq!(out.values(), &[0.0, 9.0, 1.0]);
        assert_eq!(apply_dirichlet(&out, &[0.0, 1.0], &g).unwrap(), out);
        assert!(matches!(
            apply_dirichlet(&f, &[0.0], &g),
            Err(Error::IncompleteBoundary { expected: 2, actual: 1 })
        ));

        let g2 = Grid::new(GridSpec::rect(Axis::new(1.0, 4), Axis::new(1.0, 5), 2, 1.0)).unwrap();
        let z = g2.zeros();
        let ones = vec![1.0; g2.boundary_len()];
        let out = apply_dirichlet(&z, &ones, &g2).unwrap();
        for k in 0..g2.len() {
            let expected = if g2.is_interior(k) { 0.0 } else { 1.0 };
            assert_eq!(out.values()[k], expected);
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let mut p = ModelParams::table1();
        p.melting_temperature = 0.0;
        let s = tiny(p, 0.01, 0.0, 0.0);
        let st = step(&s.initial_state(), &[0.0, 0.0], &[0.0, 0.0], &s).unwrap();
        assert!(st.temperature.values().iter().all(|&v| v == 0.0));
        assert!(st.phase.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_hand_arithmetic() {
        // f0(0, 0) = +0.005; phase -> 0.01 * 0.005 / (1 * 0.005^2) = 2
        let s = tiny(ModelParams::table1(), 0.01, 0.0, 0.0);
        let st = step(&s.initial_state(), &[0.0, 0.0], &[0.0, 0.0], &s).unwrap();
        assert!((st.phase.values()[1] - 2.0).abs() < 1e-12);
        assert!((st.temperature.values()[1] - 2.0).abs() < 1e-12);
        assert_eq!(st.level, 1);
    }

    #[test]
    fn reaction_kinds_differ_after_one_step() {
        let lin = {
            let mut p = ModelParams::table6();
            p.reaction = ReactionKind::Linear;
            p
        };
        let lim = ModelParams::table6();
        assert!(matches!(lim.reaction, ReactionKind::Limiter(Limiter { .. })));
        let a = tiny(lin, 1e-6, 0.0, 0.1);
        let b = tiny(lim, 1e-6, 0.0, 0.1);
        let u = [0.0, 0.0];
        let sa = step(&a.initial_state(), &u, &u, &a).unwrap();
        let sb = step(&b.initial_state(), &u, &u, &b).unwrap();
        assert!((sa.phase.values()[1] - sb.phase.values()[1]).abs() > 1e-6);
    }

    #[test]
    fn blow_up_reports_level() {
        let s = tiny(ModelParams::table1(), 1e300, 0.0, 0.3);
        let err = step(&s.initial_state(), &[1e300, 0.0], &[0.0, 0.0], &s).unwrap_err();
        assert!(matches!(err, Error::BlowUp { level: 1, .. }), "{err}");
    }

    #[test]
    fn two_levels_trajectory() {
        let s = tiny(ModelParams::table1(), 0.01, 0.0, 0.0);
        let u = BoundarySeries::zeros(&s.grid);
        let sol = solve_forward(&s, &u, StoragePolicy::Full).unwrap();
        assert_eq!(sol.trajectory.levels(), 2);
        let first = sol.trajectory.frame(0).unwrap();
        assert_eq!(first, s.initial_state());
        let second = step(&first, u.level(0), u.level(1), &s).unwrap();
        assert_eq!(&second, sol.final_state());
    }

    #[test]
    fn unstable_step_is_a_warning() {
        let grid = Grid::new(GridSpec::line(1.0, 11, 3, 0.1)).unwrap();
        let s = Scenario::uniform("w", grid, ModelParams::table1(), 0.5, 0.0, 0.5, 0.0);
        let u = BoundarySeries::constant(&s.grid, 0.5);
        let sol = solve_forward(&s, &u, StoragePolicy::Full).unwrap();
        assert!(matches!(sol.warnings[0], SolverWarning::UnstableTimeStep { .. }));
    }
}
