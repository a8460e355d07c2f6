//! Time-transformed adjoint system and the boundary flux trace.
//!
//! With `p(t) = p1(T - t)` and `q(t) = q1(T - t)` the adjoint problem runs
//! forward in transformed time from `p = 0`,
//! `q = (target - phase(T)) / (gamma xi^2)`:
//!
//! ```text
//! p' = p + dt (L p - c q)
//! q' = q + dt/(gamma xi^2) (xi^2 L q + d q) + H (p' - p) / (gamma xi^2)
//! ```
//!
//! where `c = -df0/dy` and `d = df0/dphase` are evaluated on the reversed
//! forward trajectory. Transformed step `j -> j + 1` consumes the forward
//! frame at original level `N_t - 2 - j`; with that pairing the sweep is the
//! exact transpose of the explicit forward scheme, so the resulting gradient
//! is the derivative of the discrete reduced cost.

use crate::control::{BoundarySeries, FluxTrace};
use crate::error::{Error, Result};
use crate::forward::{for_each_interior, State};
use crate::grid::{inverse_spacings_sq, laplacian_at, Field, Grid};
use crate::model::ModelParams;
use crate::scenarios::Scenario;
use crate::trajectory::Trajectory;

/// Adjoint variables at one transformed time level.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub level: usize,
    pub p: Field,
    pub q: Field,
}

impl AdjointState {
    /// Initial adjoint state for a terminal phase mismatch.
    pub fn terminal(final_phase: &Field, target: &Field, params: &ModelParams, grid: &Grid) -> Result<Self> {
        grid.check_field(final_phase, "final phase")?;
        grid.check_field(target, "target")?;
        let scale = 1.0 / (params.gamma * params.xi * params.xi);
        let mut q = grid.zeros();
        {
            let qv = q.values_mut();
            let (f, t) = (final_phase.values(), target.values());
            for_each_interior(grid, |k| qv[k] = scale * (t[k] - f[k]));
        }
        Ok(Self {
            level: 0,
            p: grid.zeros(),
            q,
        })
    }
}

struct AdjointStepper<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    inv1: f64,
    inv2: f64,
}

impl<'a> AdjointStepper<'a> {
    fn new(grid: &'a Grid, params: &'a ModelParams) -> Self {
        let (inv1, inv2) = inverse_spacings_sq(grid);
        Self {
            grid,
            params,
            inv1,
            inv2,
        }
    }

    fn advance(&self, cur: &AdjointState, next: &mut AdjointState, frame: &State) -> Result<()> {
        let n2 = self.grid.shape().1;
        let (inv1, inv2) = (self.inv1, self.inv2);
        let dt = self.grid.dt();
        let params = self.params;
        let xi2 = params.xi * params.xi;
        let inv_gx = 1.0 / (params.gamma * xi2);
        let rate = dt * inv_gx;
        let heat = params.latent_heat * inv_gx;

        let (p, q) = (cur.p.values(), cur.q.values());
        let (y, ph) = (frame.temperature.values(), frame.phase.values());
        let mut check = 0.0;
        {
            let np = next.p.values_mut();
            let nq = next.q.values_mut();
            for_each_interior(self.grid, |k| {
                let c = params.adjoint_coupling(ph[k]);
                let new_p = p[k] + dt * (laplacian_at(p, k, n2, inv1, inv2) - c * q[k]);
                let d = params.reaction_dphase(y[k], ph[k]);
                let new_q = q[k]
                    + rate * (xi2 * laplacian_at(q, k, n2, inv1, inv2) + d * q[k])
                    + heat * (new_p - p[k]);
                np[k] = new_p;
                nq[k] = new_q;
                check += new_p + new_q;
            });
        }
        next.level = cur.level + 1;
        if !check.is_finite() {
            return Err(Error::BlowUp {
                what: "adjoint state",
                level: next.level,
            });
        }
        Ok(())
    }
}

/// One explicit Euler step of the adjoint system, with coefficients taken
/// from the forward `frame`. Boundary values of `p` and `q` stay zero.
pub fn adjoint_step(state: &AdjointState, frame: &State, scenario: &Scenario) -> Result<AdjointState> {
    let grid = &scenario.grid;
    for f in [&state.p, &state.q, &frame.temperature, &frame.phase] {
        grid.check_field(f, "adjoint_step")?;
    }
    let stepper = AdjointStepper::new(grid, &scenario.params);
    let mut next = AdjointState {
        level: state.level,
        p: grid.zeros(),
        q: grid.zeros(),
    };
    stepper.advance(state, &mut next, frame)?;
    Ok(next)
}

/// `p3` at every boundary point: the one-sided negative outward normal
/// derivative `p(neighbour) / dx_normal`, using `p = 0` on the boundary.
pub fn flux_from_p(p: &Field, grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.boundary_len()];
    write_flux(p.values(), grid, &mut out);
    out
}

fn write_flux(p: &[f64], grid: &Grid, out: &mut [f64]) {
    for (o, b) in out.iter_mut().zip(grid.boundary()) {
        *o = p[b.neighbor] / b.normal_spacing;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdjointOptions {
    /// Keep every `p`, `q` frame (transformed time order). Memory heavy.
    pub keep_frames: bool,
}

/// Optional by-products of the adjoint sweep.
#[derive(Debug, Clone)]
pub struct AdjointDiagnostics {
    /// `p1` at `t = 0`.
    pub p2: Field,
    /// `(gamma xi^2 q1 - H p1)` at `t = 0`.
    pub q2: Field,
    /// `-xi^2 grad q1 . n` on the boundary, original time.
    pub q3: BoundarySeries,
    /// Transformed-time frames, present when requested.
    pub frames: Vec<AdjointState>,
}

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub flux: FluxTrace,
    pub diagnostics: AdjointDiagnostics,
}

/// Runs the adjoint sweep over a forward trajectory and returns the flux
/// trace indexed by original time level.
///
/// The trace at level `k` is taken from the transformed frame
/// `N_t - 2 - k`, which is the sensitivity to the control applied at `k`;
/// the controls at levels `N_t - 2` and `N_t - 1` do not reach the final
/// phase field and get a zero trace.
pub fn solve_adjoint(
    trajectory: &Trajectory,
    target: &Field,
    scenario: &Scenario,
    options: AdjointOptions,
) -> Result<AdjointSolution> {
    let grid = &scenario.grid;
    let params = &scenario.params;
    let nt = grid.time_levels();
    let nb = grid.boundary_len();

    let mut cur = AdjointState::terminal(&trajectory.last().phase, target, params, grid)?;
    let mut next = cur.clone();
    let stepper = AdjointStepper::new(grid, params);

    let mut flux = BoundarySeries::zeros(grid);
    let mut q3 = BoundarySeries::zeros(grid);
    let xi2 = params.xi * params.xi;
    let mut frames = Vec::new();
    if options.keep_frames {
        frames.push(cur.clone());
    }

    trajectory.visit_reverse(|state| {
        let k = state.level;
        if k + 1 == nt {
            return Ok(());
        }
        write_flux(cur.p.values(), grid, flux.level_mut(k));
        let q3k = q3.level_mut(k);
        for (o, b) in q3k.iter_mut().zip(grid.boundary()) {
            *o = xi2 * cur.q.values()[b.neighbor] / b.normal_spacing;
        }
        stepper.advance(&cur, &mut next, state)?;
        std::mem::swap(&mut cur, &mut next);
        if options.keep_frames {
            frames.push(cur.clone());
        }
        Ok(())
    })?;
    debug_assert_eq!(cur.level, nt - 1);
    debug_assert_eq!(flux.points(), nb);

    let gx = params.gamma * xi2;
    let q2_values = cur
        .q
        .values()
        .iter()
        .zip(cur.p.values())
        .map(|(q, p)| gx * q - params.latent_heat * p)
        .collect();
    let diagnostics = AdjointDiagnostics {
        q2: Field::from_values(grid, q2_values)?,
        p2: cur.p,
        q3,
        frames,
    };
    Ok(AdjointSolution { flux, diagnostics })
}
