//! Run configuration: a preset plus `section.key = value` overrides.

use std::path::{Path, PathBuf};

use pfcontrol::optimize::parse_schedule;
use pfcontrol::{builtin_with, preset, GridSpec, Limiter, ModelParams, OptimizeConfig, ReactionKind, Scenario, StoragePolicy};

/// Every key accepted in config files and `--override`.
pub const KEYS: &[&str] = &[
    "run.scenario",
    "grid.nx",
    "grid.ny",
    "grid.nt",
    "grid.t_final",
    "grid.lx",
    "grid.ly",
    "model.gamma",
    "model.beta",
    "model.xi",
    "model.y_mt",
    "model.latent_heat",
    "model.alpha",
    "model.reaction",
    "model.eps0",
    "model.eps1",
    "opt.iterations",
    "opt.step",
    "opt.schedule",
    "opt.grad_tol",
    "opt.record_every",
    "storage.memory_mb",
    "storage.stride",
    "output.dir",
    "output.snapshots",
    "output.fields",
    "output.interface",
    "gradcheck.directions",
    "gradcheck.h",
    "gradcheck.seed",
    "gradcheck.threshold",
    "gradcheck.self_target",
];

/// Invalid configuration; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone)]
pub struct GradcheckSettings {
    pub directions: usize,
    pub h: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Replace the target by the final phase under the initial guess.
    pub self_target: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub optimize: OptimizeConfig,
    pub out_dir: PathBuf,
    pub snapshots: Vec<f64>,
    pub write_fields: bool,
    pub write_interface: bool,
    pub gradcheck: GradcheckSettings,
}

/// Ordered `(key, value)` assignments; later ones win.
#[derive(Debug, Clone, Default)]
pub struct Assignments(Vec<(String, String)>);

impl Assignments {
    pub fn push(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        if !KEYS.contains(&key) {
            return err(format!("unknown config key `{key}`"));
        }
        self.0.push((key.to_string(), value.trim().to_string()));
        Ok(())
    }

    /// Parses one `key=value` override.
    pub fn push_override(&mut self, s: &str) -> Result<(), ConfigError> {
        match s.split_once('=') {
            Some((k, v)) => self.push(k, v),
            None => err(format!("override `{s}` is not of the form key=value")),
        }
    }

    pub fn read_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        self.parse_text(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn parse_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", n + 1));
            };
            self.push(k, v)
                .map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => err(format!("invalid value `{v}` for `{key}`: expected true or false")),
    }
}

impl RunConfig {
    /// Resolves assignments against the named preset. `scenario` takes
    /// precedence over `run.scenario`.
    pub fn resolve(a: &Assignments, scenario: Option<&str>) -> Result<Self, ConfigError> {
        let name = match scenario.or(a.get("run.scenario")) {
            Some(n) => n.to_string(),
            None => return err("no scenario given (use --scenario or run.scenario)"),
        };
        let preset = preset(&name).map_err(|e| ConfigError(e.to_string()))?;

        let mut spec: GridSpec = preset.grid;
        let mut params: ModelParams = preset.params.clone();
        for (key, v) in &a.0 {
            let v = v.as_str();
            match key.as_str() {
                "grid.nx" => spec.x1.points = parse(key, v)?,
                "grid.lx" => spec.x1.length = parse(key, v)?,
                "grid.ny" | "grid.ly" => {
                    let Some(ax) = spec.x2.as_mut() else {
                        return err(format!("`{key}` needs a 2D scenario"));
                    };
                    if key == "grid.ny" {
                        ax.points = parse(key, v)?;
                    } else {
                        ax.length = parse(key, v)?;
                    }
                }
                "grid.nt" => spec.time_levels = parse(key, v)?,
                "grid.t_final" => spec.final_time = parse(key, v)?,
                "model.gamma" => params.gamma = parse(key, v)?,
                "model.beta" => params.beta = parse(key, v)?,
                "model.xi" => params.xi = parse(key, v)?,
                "model.y_mt" => params.melting_temperature = parse(key, v)?,
                "model.latent_heat" => params.latent_heat = parse(key, v)?,
                "model.alpha" => params.alpha = parse(key, v)?,
                "model.reaction" => {
                    params.reaction = match v {
                        "linear" => ReactionKind::Linear,
                        "limiter" => match params.reaction {
                            ReactionKind::Limiter(l) => ReactionKind::Limiter(l),
                            ReactionKind::Linear => ReactionKind::Limiter(Limiter::new(0.0, 0.2)),
                        },
                        _ => return err(format!("invalid value `{v}` for `{key}`: expected linear or limiter")),
                    }
                }
                "model.eps0" | "model.eps1" => {
                    let ReactionKind::Limiter(l) = &mut params.reaction else {
                        return err(format!("`{key}` needs model.reaction = limiter"));
                    };
                    if key == "model.eps0" {
                        l.eps0 = parse(key, v)?;
                    } else {
                        l.eps1 = parse(key, v)?;
                    }
                }
                _ => {}
            }
        }
        let scenario = builtin_with(&name, Some(spec), Some(params)).map_err(|e| ConfigError(e.to_string()))?;

        let mut schedule = preset
            .calibrated_schedule_on(&spec)
            .map_err(|e| ConfigError(e.to_string()))?;
        if let Some(v) = a.get("opt.schedule") {
            schedule = parse_schedule(v).map_err(|e| ConfigError(format!("opt.schedule: {e}")))?;
        }
        if let Some(v) = a.get("opt.step") {
            let step: f64 = parse("opt.step", v)?;
            for e in &mut schedule {
                e.step = step;
            }
        }
        if let Some(v) = a.get("opt.iterations") {
            let n: usize = parse("opt.iterations", v)?;
            schedule = resize_schedule(schedule, n);
        }
        let mut optimize = OptimizeConfig::new(schedule);
        if let Some(v) = a.get("opt.grad_tol") {
            optimize.grad_tol = Some(parse("opt.grad_tol", v)?);
        }
        if let Some(v) = a.get("opt.record_every") {
            optimize.record_every = parse("opt.record_every", v)?;
        }
        if let Some(v) = a.get("storage.memory_mb") {
            let mb: usize = parse("storage.memory_mb", v)?;
            optimize.storage = StoragePolicy::Budget { bytes: mb << 20 };
        }
        if let Some(v) = a.get("storage.stride") {
            let stride: usize = parse("storage.stride", v)?;
            optimize.storage = if stride <= 1 {
                StoragePolicy::Full
            } else {
                StoragePolicy::Checkpointed { stride }
            };
        }
        optimize
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;

        let t_final = scenario.grid.final_time();
        let mut snapshots = Vec::new();
        if let Some(v) = a.get("output.snapshots") {
            for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let t: f64 = parse("output.snapshots", part)?;
                if !(0.0..=t_final).contains(&t) {
                    return err(format!("snapshot time {t} outside [0, {t_final}]"));
                }
                snapshots.push(t);
            }
        }

        let gradcheck = GradcheckSettings {
            directions: a.get("gradcheck.directions").map_or(Ok(5), |v| parse("gradcheck.directions", v))?,
            h: a.get("gradcheck.h").map_or(Ok(1e-2), |v| parse("gradcheck.h", v))?,
            seed: a.get("gradcheck.seed").map_or(Ok(0), |v| parse("gradcheck.seed", v))?,
            threshold: a.get("gradcheck.threshold").map_or(Ok(1e-3), |v| parse("gradcheck.threshold", v))?,
            self_target: a
                .get("gradcheck.self_target")
                .map_or(Ok(false), |v| parse_bool("gradcheck.self_target", v))?,
        };
        if gradcheck.directions == 0 {
            return err("gradcheck.directions must be at least 1");
        }

        Ok(Self {
            scenario,
            optimize,
            out_dir: PathBuf::from(a.get("output.dir").unwrap_or("out")),
            snapshots,
            write_fields: a.get("output.fields").map_or(Ok(true), |v| parse_bool("output.fields", v))?,
            write_interface: a.get("output.interface").map_or(Ok(true), |v| parse_bool("output.interface", v))?,
            gradcheck,
        })
    }
}

/// Truncates or extends (by repeating the last step size) to `n` iterations.
fn resize_schedule(schedule: Vec<pfcontrol::ScheduleEntry>, n: usize) -> Vec<pfcontrol::ScheduleEntry> {
    let last_step = schedule.last().map_or(1.0, |e| e.step);
    let mut out = Vec::new();
    let mut left = n;
    for e in schedule {
        if left == 0 {
            break;
        }
        let take = e.iterations.min(left);
        out.push(pfcontrol::ScheduleEntry {
            iterations: take,
            step: e.step,
        });
        left -= take;
    }
    if left > 0 || out.is_empty() {
        out.push(pfcontrol::ScheduleEntry {
            iterations: left,
            step: last_step,
        });
    }
    out
}
