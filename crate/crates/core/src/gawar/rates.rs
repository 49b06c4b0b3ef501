//! Adaptive crossover/mutation rate controller.
//!
//! Rates are kept in tenths so that the schedule 0.4 -> 0.6 -> 0.8 -> 1.0
//! hits 1.0 exactly instead of drifting past it in floating point.

use serde::{Deserialize, Serialize};

pub const INITIAL_PC_TENTHS: u32 = 9;
pub const INITIAL_PM_TENTHS: u32 = 4;
const STEP_TENTHS: u32 = 2;
const PC_FLOOR_TENTHS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateState {
    pc_tenths: u32,
    pm_tenths: u32,
    /// Iterations since the last improvement, starting at 1.
    pub tag: u32,
    /// Iterations since the last improvement or adaptation, starting at 1.
    pub a_tag: u32,
    pub crossover_active: bool,
}

impl Default for RateState {
    fn default() -> Self {
        Self {
            pc_tenths: INITIAL_PC_TENTHS,
            pm_tenths: INITIAL_PM_TENTHS,
            tag: 1,
            a_tag: 1,
            crossover_active: true,
        }
    }
}

impl RateState {
    pub fn p_c(&self) -> f64 {
        f64::from(self.pc_tenths) / 10.0
    }

    pub fn p_m(&self) -> f64 {
        f64::from(self.pm_tenths) / 10.0
    }

    /// `(n_c, n_m)` for a population of `n_pop`:
    /// `n_c = 2 * ceil(p_c * n_pop / 2)` and `n_m = ceil(p_m * n_pop)`, or
    /// `(0, n_pop)` once crossover is switched off.
    pub fn counts(&self, n_pop: usize) -> (usize, usize) {
        if !self.crossover_active {
            return (0, n_pop);
        }
        let pc = self.pc_tenths as usize;
        let pm = self.pm_tenths as usize;
        (2 * (pc * n_pop).div_ceil(20), (pm * n_pop).div_ceil(10))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adaptation {
    pub state: RateState,
    pub n_c: usize,
    pub n_m: usize,
    /// Rates changed in this step. Escalations after crossover is already
    /// off leave the rates unchanged and are not flagged.
    pub adapted: bool,
}

/// End-of-iteration update.
///
/// An improvement resets everything to the initial rates. Otherwise both
/// counters advance, and once `a_tag` exceeds `adapt_period` the crossover
/// rate drops by 0.2 (not below 0.3) while the mutation rate rises by 0.2.
/// When the mutation rate would pass 1 crossover is switched off and every
/// new individual comes from mutation.
pub fn adapt_rates(state: RateState, improved: bool, n_pop: usize, adapt_period: u32) -> Adaptation {
    if improved {
        let state = RateState::default();
        let (n_c, n_m) = state.counts(n_pop);
        return Adaptation { state, n_c, n_m, adapted: false };
    }
    let mut next = state;
    next.tag += 1;
    next.a_tag += 1;
    if next.a_tag > adapt_period {
        next.a_tag = 1;
        next.pc_tenths = next.pc_tenths.saturating_sub(STEP_TENTHS).max(PC_FLOOR_TENTHS);
        next.pm_tenths += STEP_TENTHS;
        if next.pm_tenths > 10 {
            next.pc_tenths = 0;
            next.pm_tenths = 10;
            next.crossover_active = false;
        }
    }
    let adapted = (next.pc_tenths, next.pm_tenths, next.crossover_active)
        != (state.pc_tenths, state.pm_tenths, state.crossover_active);
    let (n_c, n_m) = next.counts(n_pop);
    Adaptation { state: next, n_c, n_m, adapted }
}
