use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use pfcontrol::export::{control_csv, field_csv, history_csv, interface_csv, write_atomic};
use pfcontrol::{
    descend, extract_interface, fd_gradient_check, presets, random_directions, solve_forward_observed, Grid,
    InterfaceSet, ScheduleEntry, State, StopReason, StoragePolicy,
};

use crate::config::RunConfig;

/// Some direction exceeded the gradient-check threshold.
#[derive(Debug)]
pub struct GradcheckFailed {
    pub worst: f64,
    pub threshold: f64,
}

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "gradient check failed: relative error {:e} above {:e}",
            self.worst, self.threshold
        )
    }
}

impl std::error::Error for GradcheckFailed {}

fn grid_label(g: &pfcontrol::GridSpec) -> String {
    match g.x2 {
        Some(x2) => format!("{}x{}, N_t={}", g.x1.points, x2.points, g.time_levels),
        None => format!("N_x={}, N_t={}", g.x1.points, g.time_levels),
    }
}

pub fn list() {
    for p in presets() {
        println!(
            "{:<15} {:<22} T={:<6} {}",
            p.name,
            grid_label(&p.grid),
            p.grid.final_time,
            p.description
        );
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    #[serde(rename = "J")]
    cost: f64,
    mismatch: f64,
    regularization: f64,
    error_norm: f64,
    /// Physicality of the final forward solve.
    realistic: bool,
    /// No forward solve of the run left the physicality bound.
    realistic_throughout: bool,
    max_physicality_excess: f64,
    iterations: usize,
    stop_reason: StopReason,
    wall_clock_s: f64,
    grid: &'a pfcontrol::GridSpec,
    schedule: &'a [ScheduleEntry],
}

fn snapshot_levels(grid: &Grid, times: &[f64]) -> Vec<usize> {
    let mut levels: Vec<usize> = times.iter().map(|&t| grid.level_at(t)).collect();
    levels.dedup();
    levels
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let s = &cfg.scenario;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let total = cfg.optimize.total_iterations();
    let outcome = descend(s, &cfg.optimize, |r| {
        log::info!(
            "iteration {}/{total}: J = {:e}, error = {:.6}",
            r.iteration,
            r.cost,
            r.error_norm
        );
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(failure) => {
            write_atomic(&dir.join("history.csv"), &history_csv(&failure.history))?;
            return Err(failure.into());
        }
    };
    write_atomic(&dir.join("history.csv"), &history_csv(&outcome.history))?;
    write_atomic(&dir.join("control.csv"), &control_csv(&outcome.control, &s.grid)?)?;

    if cfg.write_fields {
        write_atomic(&dir.join("final_state.csv"), &field_csv(&outcome.final_state, &s.grid)?)?;
    }

    let nt = s.grid.time_levels();
    let snaps = snapshot_levels(&s.grid, &cfg.snapshots);
    let mut interface_levels = vec![0];
    interface_levels.extend(&snaps);
    interface_levels.push(nt - 1);
    interface_levels.sort_unstable();
    interface_levels.dedup();

    if !snaps.is_empty() || cfg.write_interface {
        let mut frames: Vec<State> = Vec::new();
        let mut interfaces: Vec<(f64, InterfaceSet)> = Vec::new();
        // one more solve under the final control, keeping only two frames
        solve_forward_observed(s, &outcome.control, StoragePolicy::Checkpointed { stride: nt }, |st| {
            if snaps.binary_search(&st.level).is_ok() {
                frames.push(st.clone());
            }
            if cfg.write_interface && interface_levels.binary_search(&st.level).is_ok() {
                interfaces.push((s.grid.time(st.level), extract_interface(&st.phase, &s.grid)));
            }
        })?;
        for st in &frames {
            write_atomic(
                &dir.join(format!("snapshot_{:07}.csv", st.level)),
                &field_csv(st, &s.grid)?,
            )?;
        }
        if cfg.write_interface {
            write_atomic(&dir.join("interface.csv"), &interface_csv(&interfaces, s.grid.is_2d()))?;
        }
    }

    let r = &outcome.report;
    let summary = Summary {
        scenario: &s.name,
        cost: r.total,
        mismatch: r.mismatch,
        regularization: r.regularization,
        error_norm: r.error_norm,
        realistic: r.realistic,
        realistic_throughout: outcome.max_physicality_excess == 0.0,
        max_physicality_excess: outcome.max_physicality_excess,
        iterations: outcome.iterations,
        stop_reason: outcome.stop,
        wall_clock_s: start.elapsed().as_secs_f64(),
        grid: s.grid.spec(),
        schedule: &cfg.optimize.schedule,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    write_atomic(&dir.join("summary.json"), &json)?;
    println!(
        "{}: J = {:e}, error_norm = {}, realistic = {}, {} iterations",
        s.name, r.total, r.error_norm, r.realistic, outcome.iterations
    );
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig) -> Result<()> {
    let g = &cfg.gradcheck;
    let mut s = cfg.scenario.clone();
    if g.self_target {
        let forward = pfcontrol::solve_forward(&s, &s.initial_control, StoragePolicy::default())?;
        s.target = forward.final_state().phase.clone();
    }
    let s = &s;
    let dirs = random_directions(s, g.directions, g.seed);
    let report = fd_gradient_check(s, &s.initial_control, &dirs, g.h)?;
    println!("{:>3} {:>24} {:>24} {:>12}", "dir", "adjoint", "finite_difference", "rel_error");
    for (i, d) in report.directions.iter().enumerate() {
        let flag = if d.truncation_dominated {
            "  warning: truncation dominated, reduce gradcheck.h"
        } else {
            ""
        };
        println!(
            "{i:>3} {:>24e} {:>24e} {:>12.3e}{flag}",
            d.adjoint, d.finite_difference, d.relative_error
        );
    }
    let worst = report.max_relative_error();
    if report.passes(g.threshold) {
        println!("pass: max relative error {worst:.3e} <= {:e}", g.threshold);
        Ok(())
    } else {
        Err(GradcheckFailed {
            worst,
            threshold: g.threshold,
        }
        .into())
    }
}
