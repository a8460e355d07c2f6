//! Scenario data, profile constructors, interface extraction and the
//! registry of built-in experiments.
//!
//! Initial conditions and targets of the built-in experiments are
//! reconstructions of published figures: positions and widths below are
//! chosen to reproduce the described set-ups (seed at a wall, two crystals
//! kept apart, a gap moved across the domain, a crystal moved or split in
//! 2D), not digitised values.

use crate::control::{BoundaryControl, BoundarySeries};
use crate::error::{Error, Result};
use crate::forward::{State, Stepper};
use crate::grid::{Axis, Edge, Field, Grid, GridSpec};
use crate::model::{ModelParams, ReactionKind};
use crate::optimize::ScheduleEntry;

/// Everything needed to pose one optimal control problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub grid: Grid,
    pub params: ModelParams,
    pub initial_temperature: Field,
    pub initial_phase: Field,
    /// Phase-field Dirichlet values per boundary point, constant in time.
    pub phase_bc: Vec<f64>,
    /// Target phase profile at the final time.
    pub target: Field,
    /// Initial guess for the control.
    pub initial_control: BoundaryControl,
}

impl Scenario {
    /// Spatially uniform data; the target is the initial phase field.
    pub fn uniform(
        name: &str,
        grid: Grid,
        params: ModelParams,
        temperature: f64,
        phase: f64,
        control: f64,
        phase_bc: f64,
    ) -> Self {
        let initial_phase = Field::filled(&grid, phase);
        Self {
            name: name.to_string(),
            description: String::new(),
            initial_temperature: Field::filled(&grid, temperature),
            target: initial_phase.clone(),
            initial_phase,
            phase_bc: vec![phase_bc; grid.boundary_len()],
            initial_control: BoundarySeries::constant(&grid, control),
            params,
            grid,
        }
    }

    /// Frame 0 under the initial control guess.
    pub fn initial_state(&self) -> State {
        Stepper::new(&self.grid, &self.params, &self.phase_bc).initial(
            &self.initial_temperature,
            &self.initial_phase,
            self.initial_control.level(0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let g = &self.grid;
        g.check_field(&self.initial_temperature, "initial temperature")?;
        g.check_field(&self.initial_phase, "initial phase")?;
        g.check_field(&self.target, "target")?;
        self.initial_control.check_shape(g)?;
        if self.phase_bc.len() != g.boundary_len() {
            return Err(Error::IncompleteBoundary {
                expected: g.boundary_len(),
                actual: self.phase_bc.len(),
            });
        }
        let finite = self.initial_temperature.is_finite()
            && self.initial_phase.is_finite()
            && self.target.is_finite()
            && self.initial_control.is_finite()
            && self.phase_bc.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("scenario data"));
        }
        Ok(())
    }

    /// Same problem posed with a different regularization weight.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.params.alpha = alpha;
        self
    }
}

/// Which side of a 1D front is solid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Solid for `x < x0`: `1/2 [1 - tanh((x - x0) / (2 xi))]`.
    SolidLeft,
    /// Solid for `x > x0`: `1/2 [1 + tanh((x - x0) / (2 xi))]`.
    SolidRight,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::SolidLeft => 1.0,
            Orientation::SolidRight => -1.0,
        }
    }
}

/// A diffuse phase interface in 1D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Front {
    pub position: f64,
    pub orientation: Orientation,
}

impl Front {
    pub fn new(position: f64, orientation: Orientation) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn value(&self, x: f64, xi: f64) -> f64 {
        0.5 * (1.0 - (self.orientation.sign() * (x - self.position) / (2.0 * xi)).tanh())
    }
}

/// Characteristic diffuse-interface profile through the given fronts. Each
/// mesh point takes the profile of its nearest front, so alternating fronts
/// describe any sequence of solid and liquid intervals.
pub fn tanh_profile(fronts: &[Front], xi: f64, grid: &Grid) -> Field {
    Field::from_fn(grid, |x, _| {
        fronts
            .iter()
            .min_by(|a, b| {
                (x - a.position)
                    .abs()
                    .total_cmp(&(x - b.position).abs())
            })
            .map_or(0.0, |f| f.value(x, xi))
    })
}

/// Region of space used for indicator and smooth profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `[a, b]` along `x1`.
    Interval(f64, f64),
    /// Axis-aligned rectangle `[x1a, x1b] x [x2a, x2b]`.
    Rect { x1: (f64, f64), x2: (f64, f64) },
    Disc { center: (f64, f64), radius: f64 },
}

impl Shape {
    /// Signed distance, negative inside.
    pub fn signed_distance(&self, x1: f64, x2: f64) -> f64 {
        match *self {
            Shape::Interval(a, b) => (a - x1).max(x1 - b),
            Shape::Rect { x1: (a1, b1), x2: (a2, b2) } => {
                let dx = (a1 - x1).max(x1 - b1);
                let dy = (a2 - x2).max(x2 - b2);
                let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
                outside + dx.max(dy).min(0.0)
            }
            Shape::Disc { center, radius } => {
                ((x1 - center.0).powi(2) + (x2 - center.1).powi(2)).sqrt() - radius
            }
        }
    }
}

const INSIDE_TOL: f64 = 1e-12;

/// 1 inside the union of `shapes` (boundary inclusive), 0 elsewhere.
pub fn indicator_profile(shapes: &[Shape], grid: &Grid) -> Field {
    Field::from_fn(grid, |x1, x2| {
        let inside = shapes
            .iter()
            .any(|s| s.signed_distance(x1, x2) <= INSIDE_TOL);
        if inside {
            1.0
        } else {
            0.0
        }
    })
}

/// Diffuse profile `1/2 [1 - tanh(d / (2 xi))]` of the union of `shapes`,
/// `d` being the signed distance.
pub fn smooth_profile(shapes: &[Shape], xi: f64, grid: &Grid) -> Field {
    Field::from_fn(grid, |x1, x2| {
        shapes
            .iter()
            .map(|s| 0.5 * (1.0 - (s.signed_distance(x1, x2) / (2.0 * xi)).tanh()))
            .fold(0.0, f64::max)
    })
}

/// Straight piece of a level-1/2 contour in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

/// Level-1/2 set of a phase field.
#[derive(Debug, Clone, PartialEq)]
pub enum InterfaceSet {
    /// Crossing positions along `x1` (1D).
    Points(Vec<f64>),
    /// Marching-squares segments (2D).
    Segments(Vec<Segment>),
}

impl InterfaceSet {
    pub fn is_empty(&self) -> bool {
        match self {
            InterfaceSet::Points(p) => p.is_empty(),
            InterfaceSet::Segments(s) => s.is_empty(),
        }
    }
}

/// Extracts the phase interface `{phase = 1/2}`.
pub fn extract_interface(phase: &Field, grid: &Grid) -> InterfaceSet {
    const LEVEL: f64 = 0.5;
    let v = phase.values();
    if !grid.is_2d() {
        let dx = grid.dx1();
        let mut points = Vec::new();
        for i in 0..v.len() {
            let x = i as f64 * dx;
            if v[i] == LEVEL {
                points.push(x);
                continue;
            }
            if i + 1 < v.len() {
                let (a, b) = (v[i] - LEVEL, v[i + 1] - LEVEL);
                if a * b < 0.0 {
                    points.push(x + a / (a - b) * dx);
                }
            }
        }
        return InterfaceSet::Points(points);
    }

    let (n1, n2) = grid.shape();
    let (dx1, dx2) = (grid.dx1(), grid.dx2());
    let at = |i: usize, j: usize| v[i * n2 + j];
    let mut segments = Vec::new();
    for i in 0..n1 - 1 {
        for j in 0..n2 - 1 {
            // corners counter-clockwise from (i, j)
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pos = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let case = c
                .iter()
                .enumerate()
                .fold(0u8, |m, (bit, &val)| if val >= LEVEL { m | 1 << bit } else { m });
            if case == 0 || case == 15 {
                continue;
            }
            let cross = |e: usize| {
                let (p, q) = (e, (e + 1) % 4);
                let t = (LEVEL - c[p]) / (c[q] - c[p]);
                let (pi, pj) = pos[p];
                let (qi, qj) = pos[q];
                let x1 = (pi as f64 + t * (qi as f64 - pi as f64)) * dx1;
                let x2 = (pj as f64 + t * (qj as f64 - pj as f64)) * dx2;
                (x1, x2)
            };
            let centre_inside = c.iter().sum::<f64>() * 0.25 >= LEVEL;
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 if centre_inside => &[(0, 1), (2, 3)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_inside => &[(3, 0), (1, 2)],
                10 => &[(0, 1), (2, 3)],
                _ => unreachable!(),
            };
            for &(e, f) in pairs {
                segments.push(Segment {
                    a: cross(e),
                    b: cross(f),
                });
            }
        }
    }
    InterfaceSet::Segments(segments)
}

/// Fields of a preset other than grid and parameters.
struct Layout {
    temperature: Field,
    phase: Field,
    phase_bc: Vec<f64>,
    target: Field,
    control: BoundaryControl,
}

/// A built-in experiment.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub grid: GridSpec,
    pub params: ModelParams,
    /// Published step sizes and iteration counts.
    pub schedule: Vec<ScheduleEntry>,
    /// Factor converting the published step sizes to this crate's gradient
    /// scaling, fixed once against the finite-difference oracle.
    pub step_scale: f64,
    build: fn(&Grid, &ModelParams) -> Layout,
}

impl Preset {
    /// Instantiates the preset, optionally on another grid or with other
    /// parameters; profiles are rebuilt on the requested mesh.
    pub fn scenario(&self, grid: Option<GridSpec>, params: Option<ModelParams>) -> Result<Scenario> {
        let grid = Grid::new(grid.unwrap_or(self.grid))?;
        let params = params.unwrap_or_else(|| self.params.clone());
        params.validate()?;
        let layout = (self.build)(&grid, &params);
        let s = Scenario {
            name: self.name.to_string(),
            description: self.description.to_string(),
            initial_temperature: layout.temperature,
            initial_phase: layout.phase,
            phase_bc: layout.phase_bc,
            target: layout.target,
            initial_control: layout.control,
            params,
            grid,
        };
        s.validate()?;
        // computed targets (a forward solve's final phase) may sit slightly
        // outside the wells; the built-in ones may not
        if s.target.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ShapeMismatch("target values must lie in [0, 1]".into()));
        }
        Ok(s)
    }

    pub fn total_iterations(&self) -> usize {
        self.schedule.iter().map(|e| e.iterations).sum()
    }

    /// Published schedule with the step sizes converted by `step_scale`.
    pub fn calibrated_schedule(&self) -> Vec<ScheduleEntry> {
        self.schedule
            .iter()
            .map(|e| ScheduleEntry {
                iterations: e.iterations,
                step: e.step * self.step_scale,
            })
            .collect()
    }

    /// [`Self::calibrated_schedule`] moved to another mesh. Gradient
    /// components carry the quadrature weight `dt |edge cell|`, so steps
    /// are divided by its ratio to the published mesh.
    pub fn calibrated_schedule_on(&self, grid: &GridSpec) -> Result<Vec<ScheduleEntry>> {
        let ratio = mean_boundary_weight(&Grid::new(self.grid)?) / mean_boundary_weight(&Grid::new(*grid)?);
        let mut schedule = self.calibrated_schedule();
        for e in &mut schedule {
            e.step *= ratio;
        }
        Ok(schedule)
    }
}

fn mean_boundary_weight(grid: &Grid) -> f64 {
    let n = grid.boundary_len();
    (0..n).map(|b| grid.boundary_weight(b)).sum::<f64>() / n as f64
}

/// Per-edge values helper: 1D `(left, right)`; 2D uses `left` everywhere.
fn edge_values(grid: &Grid, left: f64, right: f64) -> Vec<f64> {
    grid.boundary()
        .iter()
        .map(|b| if b.edge == Edge::Right { right } else { left })
        .collect()
}

fn steady_control(grid: &Grid, left: f64, right: f64) -> BoundaryControl {
    BoundarySeries::steady(grid, &edge_values(grid, left, right)).expect("one value per point")
}

/// Solid seed at the left wall, uniformly supercooled melt, target crystal
/// `[0, 1/2]` as an indicator.
fn growth_layout(grid: &Grid, p: &ModelParams) -> Layout {
    Layout {
        temperature: Field::filled(grid, GROWTH_INITIAL_TEMPERATURE),
        phase: tanh_profile(&[Front::new(0.05, Orientation::SolidLeft)], p.xi, grid),
        phase_bc: edge_values(grid, 1.0, 0.0),
        target: indicator_profile(&[Shape::Interval(0.0, 0.5)], grid),
        control: steady_control(grid, 0.0, 1.0),
    }
}

/// Initial temperature of experiments 1-3.
pub const GROWTH_INITIAL_TEMPERATURE: f64 = 0.4;

/// Two interior crystals plus thin wall layers; target keeps a liquid gap
/// `[0.35, 0.65]` while the crystals reach the walls.
fn separation_fronts() -> (Vec<Front>, Vec<Front>) {
    use Orientation::*;
    let initial = vec![
        Front::new(0.05, SolidLeft),
        Front::new(0.2, SolidRight),
        Front::new(0.35, SolidLeft),
        Front::new(0.65, SolidRight),
        Front::new(0.8, SolidLeft),
        Front::new(0.95, SolidRight),
    ];
    let target = vec![Front::new(0.35, SolidLeft), Front::new(0.65, SolidRight)];
    (initial, target)
}

fn separation_layout(grid: &Grid, p: &ModelParams, symmetric_guess: bool) -> Layout {
    let (initial, target) = separation_fronts();
    let control = if symmetric_guess {
        steady_control(grid, 0.0, 0.0)
    } else {
        steady_control(grid, 0.0, 1.0)
    };
    Layout {
        temperature: Field::filled(grid, p.melting_temperature),
        phase: tanh_profile(&initial, p.xi, grid),
        phase_bc: edge_values(grid, 1.0, 1.0),
        target: tanh_profile(&target, p.xi, grid),
        control,
    }
}

/// Solid everywhere except the gap `[0.6, 0.7]`; target gap `[0.3, 0.4]`.
fn gap_layout(grid: &Grid, p: &ModelParams) -> Layout {
    use Orientation::*;
    let gap = |a, b| [Front::new(a, SolidLeft), Front::new(b, SolidRight)];
    Layout {
        temperature: Field::filled(grid, p.melting_temperature),
        phase: tanh_profile(&gap(0.6, 0.7), p.xi, grid),
        phase_bc: edge_values(grid, 1.0, 1.0),
        target: tanh_profile(&gap(0.3, 0.4), p.xi, grid),
        control: steady_control(grid, 0.0, 0.0),
    }
}

/// Crystal off-centre in the north, target of the same size further south.
/// The two discs overlap; with disjoint discs plain descent melts the crystal
/// before it can regrow at the target.
fn move_layout(grid: &Grid, p: &ModelParams) -> Layout {
    let start = Shape::Disc {
        center: (0.38, 0.62),
        radius: 0.13,
    };
    let end = Shape::Disc {
        center: (0.3, 0.4),
        radius: 0.13,
    };
    Layout {
        temperature: Field::filled(grid, p.melting_temperature),
        phase: smooth_profile(&[start], p.xi, grid),
        phase_bc: vec![0.0; grid.boundary_len()],
        target: smooth_profile(&[end], p.xi, grid),
        control: BoundarySeries::constant(grid, 1.0),
    }
}

/// Rectangular crystal to be split into two round ones.
fn split_layout(grid: &Grid, p: &ModelParams) -> Layout {
    let start = Shape::Rect {
        x1: (0.2, 0.4),
        x2: (0.3, 0.7),
    };
    let ends = [
        Shape::Disc {
            center: (0.3, 0.25),
            radius: 0.1,
        },
        Shape::Disc {
            center: (0.3, 0.75),
            radius: 0.1,
        },
    ];
    Layout {
        temperature: Field::filled(grid, p.melting_temperature),
        phase: smooth_profile(&[start], p.xi, grid),
        phase_bc: vec![0.0; grid.boundary_len()],
        target: smooth_profile(&ends, p.xi, grid),
        control: BoundarySeries::constant(grid, 1.0),
    }
}

/// Step conversion for the 1D presets: `LINE_STEP_FACTOR dt dx` of the
/// published grid.
fn line_scale(spec: GridSpec) -> f64 {
    LINE_STEP_FACTOR * spec.final_time / (spec.time_levels - 1) as f64 * spec.x1.spacing()
}

/// Fitted so that both the growth and the separation experiments descend
/// without oscillation at their published step sizes.
pub const LINE_STEP_FACTOR: f64 = 0.5;

/// Step conversion for the 2D presets. Larger values heat the boundary past
/// the limiter bound within the first few dozen iterations.
pub const PLANE_STEP_SCALE: f64 = 5e3;

fn entry(
    name: &'static str,
    description: &'static str,
    grid: GridSpec,
    mut params: ModelParams,
    schedule: &[(usize, f64)],
    build: fn(&Grid, &ModelParams) -> Layout,
) -> Preset {
    let step_scale = if grid.dim() == 1 {
        line_scale(grid)
    } else {
        PLANE_STEP_SCALE
    };
    // published weights are paired with the published gradient scaling
    params.alpha /= step_scale;
    Preset {
        name,
        description,
        grid,
        params,
        schedule: schedule
            .iter()
            .map(|&(iterations, step)| ScheduleEntry { iterations, step })
            .collect(),
        step_scale,
        build,
    }
}

fn with_alpha(mut p: ModelParams, alpha: f64) -> ModelParams {
    p.alpha = alpha;
    p
}

/// All built-in experiments in listing order.
pub fn presets() -> Vec<Preset> {
    let t1 = ModelParams::table1;
    let line = GridSpec::line;
    let rect = GridSpec::rect(Axis::new(0.6, 60), Axis::new(1.0, 100), 8000, 0.081);
    let linear6 = {
        let mut p = ModelParams::table6();
        p.reaction = ReactionKind::Linear;
        p
    };
    let asym = |g: &Grid, p: &ModelParams| separation_layout(g, p, false);
    vec![
        entry(
            "exp1",
            "1D crystal growth from the left wall to x = 1/2, T = 0.1",
            line(1.0, 400, 400_000, 0.1),
            t1(),
            &[(100, 3e15)],
            growth_layout,
        ),
        entry(
            "exp2",
            "as exp1 with T = 0.05",
            line(1.0, 400, 400_000, 0.05),
            t1(),
            &[(100, 2e16)],
            growth_layout,
        ),
        entry(
            "exp3",
            "as exp2 with regularization alpha = 5e-11",
            line(1.0, 400, 400_000, 0.05),
            with_alpha(t1(), 5e-11),
            &[(100, 2e16)],
            growth_layout,
        ),
        entry(
            "exp4",
            "1D keep two crystals apart, asymmetric guess, T = 0.05",
            line(1.0, 200, 100_000, 0.05),
            t1(),
            &[(150, 2e14)],
            asym,
        ),
        entry(
            "exp5",
            "1D keep two crystals apart, asymmetric guess, T = 0.4",
            line(1.0, 200, 100_000, 0.4),
            t1(),
            &[(100, 3e13)],
            asym,
        ),
        entry(
            "exp6",
            "as exp5 with alpha = 5e-10",
            line(1.0, 200, 100_000, 0.4),
            with_alpha(t1(), 5e-10),
            &[(100, 1e13)],
            asym,
        ),
        entry(
            "exp7",
            "as exp5 with alpha = 1e-9",
            line(1.0, 200, 100_000, 0.4),
            with_alpha(t1(), 1e-9),
            &[(125, 1e13)],
            asym,
        ),
        entry(
            "exp8",
            "as exp5 with the symmetric zero guess",
            line(1.0, 200, 100_000, 0.4),
            t1(),
            &[(100, 3e14)],
            |g, p| separation_layout(g, p, true),
        ),
        entry(
            "exp9",
            "1D move a liquid gap between two crystals to the left",
            line(1.0, 200, 100_000, 0.1),
            t1(),
            &[(225, 1e16), (25, 5e15)],
            gap_layout,
        ),
        entry(
            "move2d-linear",
            "2D move a crystal from north to south, linear reaction term",
            rect,
            linear6,
            &[(400, 5.0)],
            move_layout,
        ),
        entry(
            "move2d-limiter",
            "2D move a crystal from north to south, limiter reaction term",
            rect,
            ModelParams::table6(),
            &[(5000, 5.0)],
            move_layout,
        ),
        entry(
            "separate2d",
            "2D split a rectangular crystal into two discs, limiter reaction term",
            rect,
            ModelParams::table6(),
            &[(1000, 7.5)],
            split_layout,
        ),
    ]
}

pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name).collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_string(),
            available: preset_names().join(", "),
        })
}

/// Built-in scenario at its published resolution.
pub fn builtin(name: &str) -> Result<Scenario> {
    preset(name)?.scenario(None, None)
}

/// Built-in scenario with an optional grid and/or parameter override.
pub fn builtin_with(name: &str, grid: Option<GridSpec>, params: Option<ModelParams>) -> Result<Scenario> {
    preset(name)?.scenario(grid, params)
}
