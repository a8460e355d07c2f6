//! Storage of forward trajectories for the reverse-time adjoint sweep.
//!
//! Small problems keep every frame. Larger ones keep every `stride`-th frame
//! and regenerate the frames of one segment at a time by re-stepping from
//! the preceding checkpoint; re-stepping runs the same arithmetic as the
//! original solve, so regenerated frames are bit-identical.

use crate::control::BoundaryControl;
use crate::error::Result;
use crate::forward::{State, Stepper};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::scenarios::Scenario;

/// Default in-memory budget for stored frames: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoragePolicy {
    /// Keep every frame.
    Full,
    /// Keep every `stride`-th frame and recompute the rest on demand.
    Checkpointed { stride: usize },
    /// Keep every frame when they fit in `bytes`, otherwise checkpoint with
    /// stride `ceil(sqrt(N_t))`.
    Budget { bytes: usize },
}

impl Default for StoragePolicy {
    fn default() -> Self {
        StoragePolicy::Budget {
            bytes: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl StoragePolicy {
    /// Bytes needed to hold one frame (temperature and phase).
    pub fn frame_bytes(grid: &Grid) -> usize {
        2 * grid.len() * std::mem::size_of::<f64>()
    }

    pub fn stride(&self, grid: &Grid) -> usize {
        let nt = grid.time_levels();
        match *self {
            StoragePolicy::Full => 1,
            StoragePolicy::Checkpointed { stride } => stride.clamp(1, nt),
            StoragePolicy::Budget { bytes } => {
                let total = nt.saturating_mul(Self::frame_bytes(grid));
                if total <= bytes {
                    1
                } else {
                    let s = (nt as f64).sqrt().ceil() as usize;
                    let kept = nt.div_ceil(s) + s;
                    if kept.saturating_mul(Self::frame_bytes(grid)) > bytes {
                        log::warn!(
                            "checkpointed trajectory needs ~{} MiB, above the budget",
                            kept * Self::frame_bytes(grid) >> 20
                        );
                    }
                    s.max(1)
                }
            }
        }
    }
}

/// Time history of the state `(y, phase)` over all `N_t` levels.
#[derive(Debug, Clone)]
pub struct Trajectory {
    levels: usize,
    stride: usize,
    /// Frames at levels `0, stride, 2 stride, ...`.
    frames: Vec<State>,
    last: State,
    grid: Grid,
    params: ModelParams,
    phase_bc: Vec<f64>,
    control: BoundaryControl,
}

impl Trajectory {
    pub(crate) fn new(
        scenario: &Scenario,
        control: BoundaryControl,
        stride: usize,
        frames: Vec<State>,
        last: State,
    ) -> Self {
        Self {
            levels: scenario.grid.time_levels(),
            stride,
            frames,
            last,
            grid: scenario.grid.clone(),
            params: scenario.params.clone(),
            phase_bc: scenario.phase_bc.clone(),
            control,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn is_checkpointed(&self) -> bool {
        self.stride > 1
    }

    pub fn stored_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn last(&self) -> &State {
        &self.last
    }

    pub fn control(&self) -> &BoundaryControl {
        &self.control
    }

    fn stepper(&self) -> Stepper<'_> {
        Stepper::new(&self.grid, &self.params, &self.phase_bc)
    }

    /// Frame at time level `level`, recomputed from the nearest checkpoint
    /// when necessary. `None` if `level` is out of range.
    pub fn frame(&self, level: usize) -> Option<State> {
        if level >= self.levels {
            return None;
        }
        if level % self.stride == 0 {
            return Some(self.frames[level / self.stride].clone());
        }
        let stepper = self.stepper();
        let mut cur = self.frames[level / self.stride].clone();
        let mut next = cur.clone();
        while cur.level < level {
            // replaying a solve that already succeeded
            stepper
                .advance(&cur, &mut next, self.control.level(cur.level + 1))
                .expect("recomputation of a stored trajectory diverged");
            std::mem::swap(&mut cur, &mut next);
        }
        Some(cur)
    }

    /// Visits every frame from level `N_t - 1` down to 0.
    pub fn visit_reverse(&self, mut f: impl FnMut(&State) -> Result<()>) -> Result<()> {
        if self.stride == 1 {
            for s in self.frames.iter().rev() {
                f(s)?;
            }
            return Ok(());
        }
        let stepper = self.stepper();
        let mut segment: Vec<State> = Vec::with_capacity(self.stride);
        for (c, checkpoint) in self.frames.iter().enumerate().rev() {
            let start = c * self.stride;
            let end = ((c + 1) * self.stride).min(self.levels);
            segment.truncate(0);
            segment.push(checkpoint.clone());
            for level in start + 1..end {
                let prev = segment.last().unwrap();
                let mut next = prev.clone();
                stepper.advance(prev, &mut next, self.control.level(level))?;
                segment.push(next);
            }
            for s in segment.iter().rev() {
                f(s)?;
            }
        }
        Ok(())
    }

    /// Visits every frame from level 0 up to `N_t - 1`.
    pub fn visit_forward(&self, mut f: impl FnMut(&State) -> Result<()>) -> Result<()> {
        if self.stride == 1 {
            return self.frames.iter().try_for_each(f);
        }
        let stepper = self.stepper();
        let mut cur = self.frames[0].clone();
        let mut next = cur.clone();
        f(&cur)?;
        for level in 1..self.levels {
            stepper.advance(&cur, &mut next, self.control.level(level))?;
            std::mem::swap(&mut cur, &mut next);
            f(&cur)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_forward;
    use crate::grid::GridSpec;
    use crate::scenarios::builtin_with;

    #[test]
    fn checkpointed_frames_are_bit_identical() {
        let spec = GridSpec::line(1.0, 40, 203, 0.01);
        let scenario = builtin_with("exp1", Some(spec), None).unwrap();
        let u = scenario.initial_control.clone();
        let full = solve_forward(&scenario, &u, StoragePolicy::Full).unwrap();
        let ck = solve_forward(&scenario, &u, StoragePolicy::Checkpointed { stride: 15 }).unwrap();
        assert!(ck.trajectory.is_checkpointed());
        assert_eq!(ck.trajectory.stored_frames(), 203usize.div_ceil(15));
        assert_eq!(full.final_state(), ck.final_state());

        let mut a = Vec::new();
        let mut b = Vec::new();
        full.trajectory
            .visit_reverse(|s| {
                a.push(s.clone());
                Ok(())
            })
            .unwrap();
        ck.trajectory
            .visit_reverse(|s| {
                b.push(s.clone());
                Ok(())
            })
            .unwrap();
        assert_eq!(a.len(), 203);
        assert_eq!(a, b);
        assert_eq!(a[0].level, 202);
        assert_eq!(ck.trajectory.frame(101).unwrap(), full.trajectory.frame(101).unwrap());

        let mut levels = Vec::new();
        ck.trajectory
            .visit_forward(|s| {
                levels.push(s.level);
                Ok(())
            })
            .unwrap();
        assert_eq!(levels, (0..203).collect::<Vec<_>>());
    }

    #[test]
    fn budget_policy_picks_sqrt_stride() {
        let g = Grid::new(GridSpec::line(1.0, 400, 400_000, 0.1)).unwrap();
        let stride = StoragePolicy::default().stride(&g);
        assert_eq!(stride, 633);
        let small = Grid::new(GridSpec::line(1.0, 50, 2000, 0.05)).unwrap();
        assert_eq!(StoragePolicy::default().stride(&small), 1);
    }
}
