//! End-to-end checks, one line per criterion. Full-scale runs dominate the
//! wall clock (roughly twenty minutes on one core).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pfcontrol::export::{control_csv, field_csv, history_csv, interface_csv};
use pfcontrol::scenarios::{indicator_profile, Shape};
use pfcontrol::{
    builtin_with, cost_and_gradient, descend, extract_interface, fd_gradient_check, preset, random_directions,
    solve_forward, stability_bound, Axis, DescentOutcome, Field, Grid, GridSpec, ModelParams, OptimizeConfig,
    ReactionKind, Scenario, StopReason, StoragePolicy,
};

type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn calibrated(name: &str, spec: GridSpec, params: Option<ModelParams>) -> (Scenario, OptimizeConfig) {
    let p = preset(name).unwrap();
    let s = builtin_with(name, Some(spec), params).unwrap();
    let cfg = OptimizeConfig::new(p.calibrated_schedule_on(&spec).unwrap());
    (s, cfg)
}

fn run(name: &str, s: &Scenario, cfg: &OptimizeConfig) -> Result<DescentOutcome, String> {
    descend(s, cfg, |_| {}).map_err(|e| format!("{name}: {e}"))
}

fn gradient_oracle() -> Check {
    let spec = GridSpec::line(1.0, 50, 2000, 0.05);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for alpha in [0.0, 1e-8] {
        let mut params = ModelParams::table1();
        params.alpha = alpha;
        let s = builtin_with("exp1", Some(spec), Some(params)).unwrap();
        let dirs = random_directions(&s, 6, 7);
        let report = fd_gradient_check(&s, &s.initial_control, &dirs, 1e-2).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_relative_error());
        count += report.directions.len();
    }
    verdict(
        worst <= 1e-3,
        format!("max relative error {worst:.2e} over {count} directions (limit 1e-3)"),
    )
}

fn self_target() -> Check {
    let spec = GridSpec::line(1.0, 50, 2000, 0.05);
    let mut s = builtin_with("exp1", Some(spec), None).unwrap();
    let forward = solve_forward(&s, &s.initial_control, StoragePolicy::Full).map_err(|e| e.to_string())?;
    s.target = forward.final_state().phase.clone();
    let (_, g) = cost_and_gradient(&s, &s.initial_control, StoragePolicy::Full).map_err(|e| e.to_string())?;
    let nonzero = g.values().iter().filter(|&&v| v != 0.0).count();
    let mut cfg = OptimizeConfig::fixed(10, 1.0);
    cfg.grad_tol = Some(1e-30);
    let out = run("self-target", &s, &cfg)?;
    let unchanged = out.control == s.initial_control;
    verdict(
        nonzero == 0 && out.stop == StopReason::GradientTolerance && out.iterations == 0 && unchanged,
        format!(
            "{nonzero} nonzero gradient entries, stop {:?} after {} iterations",
            out.stop, out.iterations
        ),
    )
}

fn symmetry() -> Check {
    let base = preset("exp8").unwrap().grid;
    let spec = GridSpec::line(1.0, 100, 20_000, base.final_time);
    let (s, mut cfg) = calibrated("exp8", spec, None);
    cfg.schedule.truncate(1);
    cfg.schedule[0].iterations = 20;
    let out = run("exp8", &s, &cfg)?;
    let left: Vec<f64> = out.control.series(0).collect();
    let right: Vec<f64> = out.control.series(1).collect();
    let gap = left.iter().zip(&right).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let moved = out.control.max_abs() > 0.0;
    verdict(
        gap <= 1e-8 && moved,
        format!("max |u_left - u_right| = {gap:.2e} after 20 iterations (limit 1e-8)"),
    )
}

const SMOKE_STEP: f64 = 3e4;

fn descent_effectiveness() -> Check {
    let p = preset("exp5").unwrap();
    let (s, cfg) = calibrated("exp5", p.grid, None);
    let t = Instant::now();
    let out = run("exp5", &s, &cfg)?;
    let full = t.elapsed();

    let spec = GridSpec {
        time_levels: 10_000,
        final_time: 0.1,
        ..p.grid
    };
    // a quarter of the horizon keeps N_t = 10^4 stable; the step sits inside
    // the band [2e4, 4e4] where 20 iterations do not melt both crystals
    let small = builtin_with("exp5", Some(spec), None).unwrap();
    let small_cfg = OptimizeConfig::fixed(20, SMOKE_STEP);
    let t = Instant::now();
    let smoke = run("exp5 smoke", &small, &small_cfg)?;
    let smoke_time = t.elapsed();
    let j0 = smoke.history[0].cost;
    let j = smoke.report.total;

    let error = out.report.error_norm;
    verdict(
        error <= 0.5 && full <= Duration::from_secs(900) && j < 0.5 * j0 && smoke_time <= Duration::from_secs(60),
        format!(
            "error {error:.4} (limit 0.5) in {:.0} s; smoke J {j:.3e} vs initial {j0:.3e} in {:.1} s",
            full.as_secs_f64(),
            smoke_time.as_secs_f64()
        ),
    )
}

fn physicality() -> Check {
    let mut parts = Vec::new();
    let mut outcomes = Vec::new();
    for name in ["exp1", "exp2", "exp3"] {
        let p = preset(name).unwrap();
        let (s, cfg) = calibrated(name, p.grid, None);
        let out = run(name, &s, &cfg)?;
        parts.push(format!(
            "{name} realistic={} error={:.4}",
            out.report.realistic, out.report.error_norm
        ));
        outcomes.push(out.report);
    }
    let (e1, e2, e3) = (&outcomes[0], &outcomes[1], &outcomes[2]);
    verdict(
        e1.realistic && !e2.realistic && e3.realistic && e3.error_norm > e2.error_norm,
        parts.join(", "),
    )
}

fn limiter_realism() -> Check {
    let base = preset("move2d-limiter").unwrap().grid;
    let spec = GridSpec::rect(
        Axis::new(base.x1.length, 31),
        Axis::new(base.x2.unwrap().length, 51),
        2000,
        base.final_time,
    );
    let (s, mut cfg) = calibrated("move2d-limiter", spec, None);
    cfg.schedule.truncate(1);
    cfg.schedule[0].iterations = 50;
    let limiter = run("limiter", &s, &cfg)?;

    let mut linear = s.clone();
    linear.params.reaction = ReactionKind::Linear;
    let linear = run("linear", &linear, &cfg)?;
    verdict(
        limiter.max_physicality_excess == 0.0 && linear.max_physicality_excess > limiter.max_physicality_excess,
        format!(
            "max excess limiter {:.3e}, linear {:.3e}",
            limiter.max_physicality_excess, linear.max_physicality_excess
        ),
    )
}

/// Relaxes a sharp front under a constant boundary temperature and returns
/// the max-norm distance to the best-shifted profile of half-width `w`.
fn relaxed_deviation(params: &ModelParams, boundary: f64, width: f64) -> Result<f64, String> {
    let probe = Grid::new(GridSpec::line(1.0, 400, 2, 1.0)).unwrap();
    let dt = 0.8 * stability_bound(&probe, params);
    let nt = 4000;
    let grid = Grid::new(GridSpec::line(1.0, 400, nt, dt * (nt - 1) as f64)).unwrap();
    let mut s = Scenario::uniform("relax", grid, params.clone(), boundary, 0.0, boundary, 0.0);
    s.initial_phase = indicator_profile(&[Shape::Interval(0.0, 0.5)], &s.grid);
    s.phase_bc = vec![1.0, 0.0];
    let forward = solve_forward(&s, &s.initial_control, StoragePolicy::Checkpointed { stride: nt })
        .map_err(|e| e.to_string())?;
    let phase = &forward.final_state().phase;
    let deviation = |x0: f64| {
        Field::from_fn(&s.grid, |x, _| 0.5 * (1.0 - ((x - x0) / width).tanh())).max_abs_diff(phase)
    };
    let start = match extract_interface(phase, &s.grid) {
        pfcontrol::InterfaceSet::Points(p) if p.len() == 1 => p[0],
        other => return Err(format!("expected one front, found {other:?}")),
    };
    // golden-section search for the best shift around the extracted front
    let (mut a, mut b) = (start - 2.0 * s.grid.dx1(), start + 2.0 * s.grid.dx1());
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if deviation(c) < deviation(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(deviation(0.5 * (a + b)))
}

fn interface_profile() -> Check {
    let linear = ModelParams::table1();
    let xi = linear.xi;
    let mut limiter = linear.clone();
    limiter.reaction = ReactionKind::Limiter(pfcontrol::Limiter::new(0.0, 0.2));
    let cold = linear.melting_temperature - 0.1;

    // the 2 xi profile solves the limiter equation exactly; the cubic of the
    // linear term has the wider 2 sqrt(2) xi profile
    let lim = relaxed_deviation(&limiter, cold, 2.0 * xi)?;
    let lin_own = relaxed_deviation(&linear, cold, 2.0 * 2f64.sqrt() * xi)?;
    let lin = relaxed_deviation(&linear, cold, 2.0 * xi)?;
    verdict(
        lim <= 0.05 && lin_own <= 0.05,
        format!(
            "max deviation limiter {lim:.4} (2 xi), linear {lin_own:.4} (2 sqrt2 xi), linear vs 2 xi {lin:.4} (limit 0.05)"
        ),
    )
}

fn performance() -> Check {
    let spec = GridSpec::rect(Axis::new(1.0, 51), Axis::new(1.0, 51), 1000, 0.03);
    let (s, mut cfg) = calibrated("move2d-limiter", spec, None);
    cfg.schedule.truncate(1);
    cfg.schedule[0].iterations = 100;
    let t = Instant::now();
    let out = run("timing", &s, &cfg)?;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        secs <= 185.0 && out.iterations == 100,
        format!("100 iterations at 51x51, N_t=1000 in {secs:.1} s (limit 185 s)"),
    )
}

/// Every CSV of a short run, with the wall-clock column removed.
fn csv_outputs(name: &str) -> Result<Vec<String>, String> {
    let p = preset(name).unwrap();
    let mut spec = p.grid;
    spec.x1.points = if spec.x2.is_some() { 21 } else { 120 };
    if let Some(ax) = spec.x2.as_mut() {
        ax.points = 31;
    }
    // the published time step on a coarser mesh, 300 levels
    let dt = p.grid.final_time / (p.grid.time_levels - 1) as f64;
    spec.time_levels = 300;
    spec.final_time = dt * 299.0;
    let (s, mut cfg) = calibrated(name, spec, None);
    cfg.schedule.truncate(1);
    cfg.schedule[0].iterations = 2;
    let out = run(name, &s, &cfg)?;
    let err = |e: pfcontrol::Error| e.to_string();
    let forward = solve_forward(&s, &out.control, StoragePolicy::Full).map_err(err)?;
    let interfaces: Vec<_> = [0, spec.time_levels - 1]
        .iter()
        .map(|&k| {
            let st = forward.trajectory.frame(k).unwrap();
            (s.grid.time(k), extract_interface(&st.phase, &s.grid))
        })
        .collect();
    let history: String = history_csv(&out.history)
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string() + "\n")
        .collect();
    Ok(vec![
        history,
        control_csv(&out.control, &s.grid).map_err(err)?,
        field_csv(&out.final_state, &s.grid).map_err(err)?,
        interface_csv(&interfaces, s.grid.is_2d()),
    ])
}

fn determinism() -> Check {
    let mut checked = 0;
    for p in pfcontrol::presets() {
        let a = csv_outputs(p.name)?;
        let b = csv_outputs(p.name)?;
        if a != b {
            return Err(format!("{} differs between runs", p.name));
        }
        checked += 1;
    }
    verdict(true, format!("{checked} presets produce identical CSV bytes"))
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 adjoint gradient matches finite differences", gradient_oracle),
        ("2 self-target gives a zero gradient", self_target),
        ("3 symmetric problem keeps symmetric controls", symmetry),
        ("4 descent reaches the separation target", descent_effectiveness),
        ("5 physicality discriminates exp1-exp3", physicality),
        ("6 limiter model stays realistic in 2D", limiter_realism),
        ("7 relaxed front has the tanh profile", interface_profile),
        ("8 2D descent timing", performance),
        ("9 repeated runs give identical CSVs", determinism),
    ];
    let mut failed = 0;
    for (label, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| label.starts_with(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {label}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {label}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
