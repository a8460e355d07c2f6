//! Gradient descent on the boundary control and a finite-difference oracle
//! for the adjoint gradient.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{BoundaryControl, BoundarySeries};
use crate::error::{Error, Result};
use crate::forward::State;
use crate::objective::{cost_and_gradient, evaluate, CostReport};
use crate::scenarios::Scenario;
use crate::trajectory::StoragePolicy;

/// `iterations` descent steps with step size `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub iterations: usize,
    pub step: f64,
}

/// Parses `"225:1e16,25:5e15"`.
pub fn parse_schedule(s: &str) -> Result<Vec<ScheduleEntry>> {
    let bad = |why: &str| Error::InvalidConfig(format!("schedule {s:?}: {why}"));
    s.split(',')
        .map(|part| {
            let (n, e) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| bad("expected iterations:step"))?;
            Ok(ScheduleEntry {
                iterations: n.trim().parse().map_err(|_| bad("bad iteration count"))?,
                step: e.trim().parse().map_err(|_| bad("bad step size"))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub schedule: Vec<ScheduleEntry>,
    /// Hard cap on the total iteration count; `None` runs the full schedule.
    pub max_iterations: Option<usize>,
    /// Stop once the Euclidean gradient norm is at or below this value.
    pub grad_tol: Option<f64>,
    /// Record every `record_every`-th iteration (the first and last are
    /// always recorded).
    pub record_every: usize,
    pub storage: StoragePolicy,
}

impl OptimizeConfig {
    pub fn new(schedule: Vec<ScheduleEntry>) -> Self {
        Self {
            schedule,
            max_iterations: None,
            grad_tol: None,
            record_every: 1,
            storage: StoragePolicy::default(),
        }
    }

    pub fn fixed(iterations: usize, step: f64) -> Self {
        Self::new(vec![ScheduleEntry { iterations, step }])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schedule.is_empty() {
            return bad("step schedule is empty".into());
        }
        for e in &self.schedule {
            if !(e.step > 0.0 && e.step.is_finite()) {
                return bad(format!("step size must be positive and finite, got {}", e.step));
            }
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return bad(format!("gradient tolerance must be non-negative, got {t}"));
            }
        }
        if self.record_every == 0 {
            return bad("record cadence must be at least 1".into());
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        let n: usize = self.schedule.iter().map(|e| e.iterations).sum();
        self.max_iterations.map_or(n, |m| n.min(m))
    }

    /// Step size used at iteration `n` (0-based).
    pub fn step_at(&self, n: usize) -> Option<f64> {
        let mut start = 0;
        for e in &self.schedule {
            if n < start + e.iterations {
                return Some(e.step);
            }
            start += e.iterations;
        }
        None
    }
}

/// State of the descent at one iterate `u_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub cost: f64,
    pub mismatch: f64,
    pub regularization: f64,
    pub error_norm: f64,
    /// `NaN` for the final iterate, whose gradient is not computed.
    pub grad_norm: f64,
    pub physicality_excess: f64,
    pub realistic: bool,
    /// Milliseconds since the start of the run.
    pub wall_ms: f64,
}

impl HistoryRecord {
    fn new(iteration: usize, r: &CostReport, grad_norm: f64, start: Instant) -> Self {
        Self {
            iteration,
            cost: r.total,
            mismatch: r.mismatch,
            regularization: r.regularization,
            error_norm: r.error_norm,
            grad_norm,
            physicality_excess: r.physicality_excess,
            realistic: r.realistic,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

pub type DescentHistory = Vec<HistoryRecord>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ScheduleExhausted,
    GradientTolerance,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub control: BoundaryControl,
    pub history: DescentHistory,
    /// Cost at the returned control.
    pub report: CostReport,
    pub final_state: State,
    /// Descent steps actually taken.
    pub iterations: usize,
    pub stop: StopReason,
    /// Worst physicality excess over every forward solve of the run.
    pub max_physicality_excess: f64,
}

/// A failed descent, with everything computed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("descent failed after {} recorded iterations: {error}", history.len())]
pub struct DescentFailure {
    #[source]
    pub error: Error,
    pub history: DescentHistory,
    /// Last control whose forward solve succeeded.
    pub control: BoundaryControl,
}

/// Runs `u <- u - step * gradient` over the configured schedule, starting
/// from the scenario's initial guess. `on_record` sees each history record
/// as it is produced.
pub fn descend(
    scenario: &Scenario,
    config: &OptimizeConfig,
    mut on_record: impl FnMut(&HistoryRecord),
) -> std::result::Result<DescentOutcome, DescentFailure> {
    let start = Instant::now();
    let mut u = scenario.initial_control.clone();
    let mut history = Vec::new();
    let fail = |error, history, control| DescentFailure {
        error,
        history,
        control,
    };
    if let Err(e) = config.validate().and_then(|_| scenario.validate()) {
        return Err(fail(e, history, u));
    }
    let total = config.total_iterations();
    let mut max_excess: f64 = 0.0;
    let mut stop = StopReason::ScheduleExhausted;
    let mut n = 0;
    while n < total {
        let (report, g) = match cost_and_gradient(scenario, &u, config.storage) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, history, u)),
        };
        max_excess = max_excess.max(report.physicality_excess);
        let gnorm = g.norm();
        let converged = config.grad_tol.is_some_and(|t| gnorm <= t);
        if n % config.record_every == 0 || converged {
            let rec = HistoryRecord::new(n, &report, gnorm, start);
            on_record(&rec);
            history.push(rec);
        }
        if converged {
            stop = StopReason::GradientTolerance;
            break;
        }
        let step = config.step_at(n).expect("n below the schedule length");
        let mut next = u.clone();
        next.axpy(-step, &g);
        if !next.is_finite() {
            return Err(fail(Error::NonFinite("control update"), history, u));
        }
        u = next;
        n += 1;
        log::debug!("iteration {n}: J = {:e}, |g| = {gnorm:e}", report.total);
    }

    let (report, forward) = match evaluate(scenario, &u, config.storage) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, history, u)),
    };
    max_excess = max_excess.max(report.physicality_excess);
    if stop == StopReason::ScheduleExhausted {
        let rec = HistoryRecord::new(n, &report, f64::NAN, start);
        on_record(&rec);
        history.push(rec);
    }
    Ok(DescentOutcome {
        final_state: forward.final_state().clone(),
        control: u,
        history,
        report,
        iterations: n,
        stop,
        max_physicality_excess: max_excess,
    })
}

/// Comparison of the adjoint directional derivative with a central
/// difference along one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionCheck {
    /// `<gradient, s>`.
    pub adjoint: f64,
    /// `(J(u + h s) - J(u - h s)) / (2 h)`.
    pub finite_difference: f64,
    pub relative_error: f64,
    /// The Richardson extrapolation of the central differences at `h` and
    /// `h/2` moves noticeably away from the one at `h`, towards the adjoint
    /// value: the mismatch is mostly the difference quotient's own
    /// truncation error and `h` should be reduced.
    pub truncation_dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheckReport {
    pub h: f64,
    pub directions: Vec<DirectionCheck>,
}

impl GradientCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.directions
            .iter()
            .map(|d| d.relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_relative_error() <= threshold
    }
}

/// Relative change under Richardson extrapolation above which a
/// comparison is flagged as truncation dominated.
const TRUNCATION_FLAG: f64 = 1e-7;

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks the adjoint gradient at `u` against central differences of the
/// reduced cost along each direction, every cost from a fresh forward solve.
pub fn fd_gradient_check(
    scenario: &Scenario,
    u: &BoundaryControl,
    directions: &[BoundaryControl],
    h: f64,
) -> Result<GradientCheckReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    for (i, s) in directions.iter().enumerate() {
        s.check_shape(&scenario.grid)?;
        if s.max_abs() == 0.0 {
            return Err(Error::ZeroDirection(i));
        }
    }
    let storage = StoragePolicy::default();
    let (_, g) = cost_and_gradient(scenario, u, storage)?;
    let j = |shift: f64, s: &BoundaryControl| -> Result<f64> {
        let mut v = u.clone();
        v.axpy(shift, s);
        Ok(evaluate(scenario, &v, storage)?.0.total)
    };
    let mut out = Vec::with_capacity(directions.len());
    for s in directions {
        let adjoint = g.dot(s);
        let (jp, jm) = (j(h, s)?, j(-h, s)?);
        let (jhp, jhm) = (j(0.5 * h, s)?, j(-0.5 * h, s)?);
        let fd = (jp - jm) / (2.0 * h);
        let fd_half = (jhp - jhm) / h;
        let err = relative_error(adjoint, fd);
        let richardson = (4.0 * fd_half - fd) / 3.0;
        // cancellation noise of the two quotients, magnified by the extrapolation
        let level = jp.abs().max(jm.abs()).max(jhp.abs()).max(jhm.abs());
        let roundoff = 8.0 * f64::EPSILON * level / h;
        let truncation_dominated = relative_error(fd, richardson) > TRUNCATION_FLAG
            && (fd - richardson).abs() > 10.0 * roundoff
            && relative_error(adjoint, richardson) < err;
        if truncation_dominated {
            log::warn!("finite-difference step {h:e} is truncation dominated");
        }
        out.push(DirectionCheck {
            adjoint,
            finite_difference: fd,
            relative_error: err,
            truncation_dominated,
        });
    }
    Ok(GradientCheckReport { h, directions: out })
}

/// `n` seeded random directions with entries uniform in `[-1, 1]`,
/// normalised to unit Euclidean norm.
pub fn random_directions(scenario: &Scenario, n: usize, seed: u64) -> Vec<BoundaryControl> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = scenario.grid.time_levels() * scenario.grid.boundary_len();
    (0..n)
        .map(|_| {
            let values = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut s = BoundarySeries::from_values(&scenario.grid, values).expect("sized to the grid");
            let norm = s.norm();
            s.scale(1.0 / norm);
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use crate::model::ModelParams;

    #[test]
    fn schedule_parsing() {
        let s = parse_schedule("225:1e16, 25:5e15").unwrap();
        assert_eq!(
            s,
            vec![
                ScheduleEntry {
                    iterations: 225,
                    step: 1e16
                },
                ScheduleEntry {
                    iterations: 25,
                    step: 5e15
                }
            ]
        );
        assert!(parse_schedule("10").is_err());
        assert!(parse_schedule("x:1").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizeConfig::new(vec![]).validate().is_err());
        assert!(OptimizeConfig::fixed(3, 0.0).validate().is_err());
        assert!(OptimizeConfig::fixed(3, -1.0).validate().is_err());
        let mut c = OptimizeConfig::new(parse_schedule("2:1,3:0.5").unwrap());
        assert!(c.validate().is_ok());
        assert_eq!(c.total_iterations(), 5);
        assert_eq!(c.step_at(1), Some(1.0));
        assert_eq!(c.step_at(2), Some(0.5));
        assert_eq!(c.step_at(5), None);
        c.max_iterations = Some(3);
        assert_eq!(c.total_iterations(), 3);
    }

    fn small() -> Scenario {
        let g = Grid::new(GridSpec::line(1.0, 11, 50, 1e-3)).unwrap();
        Scenario::uniform("s", g, ModelParams::table1(), 0.3, 0.2, 0.5, 0.0)
    }

    #[test]
    fn zero_direction_rejected() {
        let s = small();
        let u = s.initial_control.clone();
        let err = fd_gradient_check(&s, &u, &[BoundarySeries::zeros(&s.grid)], 1e-3).unwrap_err();
        assert!(matches!(err, Error::ZeroDirection(0)));
    }

    #[test]
    fn random_directions_are_seeded_units() {
        let s = small();
        let a = random_directions(&s, 3, 7);
        let b = random_directions(&s, 3, 7);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        for d in &a {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_evaluate_the_guess() {
        let s = small();
        let out = descend(&s, &OptimizeConfig::fixed(0, 1.0), |_| {}).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.control, s.initial_control);
        assert_eq!(out.history.len(), 1);
        assert!(out.history[0].grad_norm.is_nan());
    }

    #[test]
    fn history_cadence() {
        let s = small();
        let mut c = OptimizeConfig::fixed(5, 1e-3);
        c.record_every = 2;
        let out = descend(&s, &c, |_| {}).unwrap();
        let its: Vec<_> = out.history.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![0, 2, 4, 5]);
    }
}
