use crate::error::{Error, Result};

/// Detection timestamps in integer ticks at a fixed resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    tick_resolution_fs: u64,
    ticks: Vec<u64>,
}

impl TimeTagStream {
    /// Builds a stream, rejecting a zero resolution or any tick that does
    /// not strictly exceed its predecessor.
    pub fn new(tick_resolution_fs: u64, ticks: Vec<u64>) -> Result<Self> {
        if tick_resolution_fs == 0 {
            return Err(Error::domain("tick resolution must be positive"));
        }
        if let Some(index) = first_non_increasing(&ticks) {
            return Err(Error::NonMonotonic { index });
        }
        Ok(TimeTagStream { tick_resolution_fs, ticks })
    }

    pub fn tick_resolution_fs(&self) -> u64 {
        self.tick_resolution_fs
    }

    pub fn ticks(&self) -> &[u64] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn into_ticks(self) -> Vec<u64> {
        self.ticks
    }

    /// Span from first to last tag in seconds.
    pub fn duration_secs(&self) -> f64 {
        match (self.ticks.first(), self.ticks.last()) {
            (Some(a), Some(b)) => (b - a) as f64 * self.tick_resolution_fs as f64 * 1e-15,
            _ => 0.0,
        }
    }
}

/// Index of the first tick that is not strictly greater than the previous.
pub(crate) fn first_non_increasing(ticks: &[u64]) -> Option<usize> {
    ticks.windows(2).position(|w| w[1] <= w[0]).map(|i| i + 1)
}
