use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// `alpha = s2` for every iteration.
    Constant,
    /// `alpha = s2 / sqrt(K)`.
    Theory,
}

/// Step sizes `alpha = s1 * b`, constant over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    s1: f64,
    s2: f64,
    iterations: usize,
    mode: StepMode,
    tracking: Option<f64>,
}

impl StepSchedule {
    pub fn new(s1: f64, s2: f64, iterations: usize, mode: StepMode) -> Result<Self> {
        if !(s1 > 0.0 && s1 <= 2.0) {
            return Err(Error::Domain(format!("s1 must lie in (0, 2], got {s1}")));
        }
        if !(s2 >= 0.0) || !s2.is_finite() {
            return Err(Error::Domain(format!("s2 must be nonnegative, got {s2}")));
        }
        Ok(StepSchedule {
            s1,
            s2,
            iterations,
            mode,
            tracking: None,
        })
    }

    /// Overrides the tracking weight `b` (otherwise `min(1, alpha / s1)`).
    pub fn with_tracking_weight(mut self, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Domain(format!(
                "tracking weight must lie in [0, 1], got {b}"
            )));
        }
        self.tracking = Some(b);
        Ok(self)
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> f64 {
        self.s2
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        match self.mode {
            StepMode::Constant => self.s2,
            StepMode::Theory if self.iterations == 0 => 0.0,
            StepMode::Theory => self.s2 / (self.iterations as f64).sqrt(),
        }
    }

    /// `b = alpha / s1`, capped at 1 so the tracker stays a convex update.
    pub fn tracking_weight(&self) -> f64 {
        self.tracking
            .unwrap_or_else(|| (self.alpha() / self.s1).min(1.0))
    }
}

/// `{1/2, 1/4, 1/8}`
pub const GRID_S1: [f64; 3] = [0.5, 0.25, 0.125];
/// `{1, 5} x {1e-1, 1e-2, 1e-3}`, ascending.
pub const GRID_S2: [f64; 6] = [1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1];
