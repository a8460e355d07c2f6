//! Physical parameters, reaction terms and the physicality monitor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Half-width of the admissible band for `beta*xi*(y - y_mt)` under the
/// linear reaction term: `sqrt(3)/36`.
pub const LINEAR_PHYSICALITY_BOUND: f64 = 0.048_112_522_432_468_81;

/// Thresholds of the smoothstep limiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limiter {
    pub eps0: f64,
    pub eps1: f64,
}

impl Limiter {
    pub fn new(eps0: f64, eps1: f64) -> Self {
        Self { eps0, eps1 }
    }
}

/// Which reaction term drives the Allen-Cahn equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReactionKind {
    Linear,
    Limiter(Limiter),
}

impl ReactionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ReactionKind::Linear => "linear",
            ReactionKind::Limiter(_) => "limiter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Attachment-kinetics coefficient.
    pub gamma: f64,
    /// Dimensionless supercooling coefficient.
    pub beta: f64,
    /// Interface thickness scale.
    pub xi: f64,
    pub melting_temperature: f64,
    pub latent_heat: f64,
    /// Weight of the control regularization.
    pub alpha: f64,
    pub reaction: ReactionKind,
}

impl ModelParams {
    /// Parameters of the 1D experiments.
    pub fn table1() -> Self {
        Self {
            gamma: 1.0,
            beta: 2.0,
            xi: 0.005,
            melting_temperature: 0.5,
            latent_heat: 1.0,
            alpha: 0.0,
            reaction: ReactionKind::Linear,
        }
    }

    /// Parameters of the 2D experiments, with the limiter reaction term.
    pub fn table6() -> Self {
        Self {
            gamma: 3.0,
            beta: 300.0,
            xi: 0.0101,
            melting_temperature: 1.0,
            latent_heat: 2.0,
            alpha: 0.0,
            reaction: ReactionKind::Limiter(Limiter::new(0.0, 0.2)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidParams {
                field,
                reason: reason.to_string(),
            })
        };
        let all_finite = [
            self.gamma,
            self.beta,
            self.xi,
            self.melting_temperature,
            self.latent_heat,
            self.alpha,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("params", "all parameters must be finite");
        }
        if self.gamma <= 0.0 {
            return bad("gamma", "must be > 0");
        }
        if self.xi <= 0.0 {
            return bad("xi", "must be > 0");
        }
        if self.latent_heat < 0.0 {
            return bad("latent_heat", "must be >= 0");
        }
        if self.alpha < 0.0 {
            return bad("alpha", "must be >= 0");
        }
        if let ReactionKind::Limiter(l) = self.reaction {
            if !(0.0 <= l.eps0 && l.eps0 < l.eps1 && l.eps1 <= 1.0) {
                return bad("eps0/eps1", "require 0 <= eps0 < eps1 <= 1");
            }
        }
        Ok(())
    }

    /// Reaction term `f0(y, phase)` of the configured kind.
    #[inline]
    pub fn reaction(&self, y: f64, phase: f64) -> f64 {
        match self.reaction {
            ReactionKind::Linear => reaction_linear(y, phase, self),
            ReactionKind::Limiter(l) => reaction_limiter(y, phase, self, l),
        }
    }

    /// Partial derivative of the reaction term with respect to the phase.
    #[inline]
    pub fn reaction_dphase(&self, y: f64, phase: f64) -> f64 {
        let cubic = -3.0 * phase * phase + 3.0 * phase - 0.5;
        match self.reaction {
            ReactionKind::Linear => cubic,
            ReactionKind::Limiter(l) => 2.0 * cubic - self.xi * h_term(phase, y, self, l),
        }
    }

    /// Coefficient `c` multiplying `q` in the adjoint temperature equation,
    /// i.e. minus the partial derivative of the reaction term with respect
    /// to temperature.
    #[inline]
    pub fn adjoint_coupling(&self, phase: f64) -> f64 {
        adjoint_coupling(phase, self)
    }
}

/// `phase (1 - phase) (phase - 1/2) - beta xi (y - y_mt)`.
#[inline]
pub fn reaction_linear(y: f64, phase: f64, p: &ModelParams) -> f64 {
    phase * (1.0 - phase) * (phase - 0.5) - p.beta * p.xi * (y - p.melting_temperature)
}

/// Cubic smoothstep from 0 at `eps0` to 1 at `eps1`.
#[inline]
pub fn sigma(phase: f64, l: Limiter) -> f64 {
    if phase <= l.eps0 {
        0.0
    } else if phase >= l.eps1 {
        1.0
    } else {
        let s = (phase - l.eps0) / (l.eps1 - l.eps0);
        3.0 * s * s - 2.0 * s * s * s
    }
}

/// Exact derivative of [`sigma`]; zero outside `(eps0, eps1)`.
#[inline]
pub fn sigma_prime(phase: f64, l: Limiter) -> f64 {
    if phase <= l.eps0 || phase >= l.eps1 {
        0.0
    } else {
        let w = l.eps1 - l.eps0;
        let s = (phase - l.eps0) / w;
        6.0 * s * (1.0 - s) / w
    }
}

/// `2 phase (1 - phase) (phase - 1/2 + xi beta/2 Sigma(phase) (y_mt - y))`.
#[inline]
pub fn reaction_limiter(y: f64, phase: f64, p: &ModelParams, l: Limiter) -> f64 {
    2.0 * phase
        * (1.0 - phase)
        * (phase - 0.5 + p.xi * p.beta * 0.5 * sigma(phase, l) * (p.melting_temperature - y))
}

/// Coupling coefficient of `q` in the adjoint temperature equation:
/// `beta xi` for the linear term, `beta xi (z Sigma(z) - z^2 Sigma(z))` for
/// the limiter.
#[inline]
pub fn adjoint_coupling(phase: f64, p: &ModelParams) -> f64 {
    match p.reaction {
        ReactionKind::Linear => p.beta * p.xi,
        ReactionKind::Limiter(l) => {
            let s = sigma(phase, l);
            p.beta * p.xi * (phase * s - phase * phase * s)
        }
    }
}

/// `beta (z - y_mt) (Sigma + z Sigma' - 2 z Sigma - z^2 Sigma')`.
///
/// The phase derivative of the limiter reaction is
/// `2 (-3 z^2 + 3 z - 1/2) - xi * h_term`.
#[inline]
pub fn h_term(phase: f64, y: f64, p: &ModelParams, l: Limiter) -> f64 {
    let s = sigma(phase, l);
    let ds = sigma_prime(phase, l);
    p.beta
        * (y - p.melting_temperature)
        * (s + phase * ds - 2.0 * phase * s - phase * phase * ds)
}

/// Peak of the physicality indicator over a trajectory.
///
/// For the linear term the indicator is `|beta xi (y - y_mt)|` against
/// `sqrt(3)/36` (three roots of the cubic). For the limiter term the middle
/// root stays inside `(0, 1)` iff `beta xi (y - y_mt) < 1`, so the indicator
/// is `beta xi (y - y_mt)` against 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalityReport {
    pub peak: f64,
    pub bound: f64,
    /// Time level of the peak.
    pub level: usize,
    /// Flat mesh index of the peak.
    pub index: usize,
}

impl PhysicalityReport {
    pub fn new(params: &ModelParams) -> Self {
        let bound = match params.reaction {
            ReactionKind::Linear => LINEAR_PHYSICALITY_BOUND,
            ReactionKind::Limiter(_) => 1.0,
        };
        Self {
            peak: f64::NEG_INFINITY,
            bound,
            level: 0,
            index: 0,
        }
    }

    pub fn realistic(&self) -> bool {
        self.peak < self.bound
    }

    /// `max(0, peak - bound)`.
    pub fn excess(&self) -> f64 {
        (self.peak - self.bound).max(0.0)
    }

    /// Folds one temperature frame into the running maximum. Corner points
    /// of 2D meshes are skipped.
    pub fn observe(&mut self, level: usize, temperature: &[f64], params: &ModelParams, grid: &Grid) {
        let scale = params.beta * params.xi;
        let ymt = params.melting_temperature;
        let linear = matches!(params.reaction, ReactionKind::Linear);
        let check_corners = grid.is_2d();
        for (k, &y) in temperature.iter().enumerate() {
            let v = if linear {
                (scale * (y - ymt)).abs()
            } else {
                scale * (y - ymt)
            };
            if v > self.peak && !(check_corners && grid.is_corner(k)) {
                self.peak = v;
                self.level = level;
                self.index = k;
            }
        }
    }
}

/// Scans every stored temperature frame of a trajectory.
pub fn physicality_violation(
    frames: impl IntoIterator<Item = (usize, Vec<f64>)>,
    params: &ModelParams,
    grid: &Grid,
) -> PhysicalityReport {
    let mut report = PhysicalityReport::new(params);
    for (level, y) in frames {
        report.observe(level, &y, params, grid);
    }
    report
}
