//! Inter-arrival histograms of consecutive detections.
//!
//! Bin `n` (1-based) covers elapsed times `[(n-1) w, n w)`. Intervals at or
//! beyond `range_max` land in `overflow`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::SlotWidth;
use crate::stream::TimeTagStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterArrivalHistogram {
    bin_width: SlotWidth,
    counts: Vec<u64>,
    total_intervals: u64,
    overflow: u64,
}

impl InterArrivalHistogram {
    /// Empty histogram with `n_bins` bins.
    pub fn empty(bin_width: SlotWidth, n_bins: usize) -> Self {
        InterArrivalHistogram { bin_width, counts: vec![0; n_bins], total_intervals: 0, overflow: 0 }
    }

    /// Assembles a histogram from its parts. `total_intervals` must cover
    /// every in-range count plus the overflow.
    pub fn from_parts(bin_width: SlotWidth, counts: Vec<u64>, total_intervals: u64, overflow: u64) -> Result<Self> {
        let in_range = counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c));
        match in_range.and_then(|s| s.checked_add(overflow)) {
            Some(s) if s <= total_intervals => {}
            _ => return Err(Error::domain("bin counts plus overflow exceed total_intervals")),
        }
        Ok(InterArrivalHistogram { bin_width, counts, total_intervals, overflow })
    }

    pub fn bin_width(&self) -> SlotWidth {
        self.bin_width
    }

    /// Count in bin `n` (1-based); zero outside the range.
    pub fn count(&self, n: u64) -> u64 {
        n.checked_sub(1).and_then(|i| self.counts.get(i as usize)).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_intervals(&self) -> u64 {
        self.total_intervals
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn range_max_ps(&self) -> u64 {
        self.counts.len() as u64 * self.bin_width.ps()
    }

    /// Lower and upper edge of bin `n` in picoseconds.
    pub fn bin_edges_ps(&self, n: u64) -> (u64, u64) {
        ((n - 1) * self.bin_width.ps(), n * self.bin_width.ps())
    }

    /// Estimated waiting probability `counts(n) / total_intervals`.
    pub fn probability(&self, n: u64) -> f64 {
        if self.total_intervals == 0 {
            return 0.0;
        }
        self.count(n) as f64 / self.total_intervals as f64
    }

    /// First bin with a non-zero count.
    pub fn first_occupied_bin(&self) -> Option<u64> {
        self.counts.iter().position(|&c| c > 0).map(|i| i as u64 + 1)
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &InterArrivalHistogram) -> Result<()> {
        if other.bin_width != self.bin_width || other.counts.len() != self.counts.len() {
            return Err(Error::domain("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_intervals += other.total_intervals;
        self.overflow += other.overflow;
        Ok(())
    }

    /// Adds one interval given in femtoseconds.
    pub fn record_fs(&mut self, interval_fs: u128) {
        self.total_intervals += 1;
        let width_fs = self.bin_width.ps() as u128 * 1_000;
        let bin = interval_fs / width_fs;
        if bin < self.counts.len() as u128 {
            self.counts[bin as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }
}

fn n_bins_for(bin_width: SlotWidth, range_max_ps: u64) -> Result<usize> {
    if range_max_ps == 0 || !range_max_ps.is_multiple_of(bin_width.ps()) {
        return Err(Error::domain(format!(
            "range {range_max_ps} ps must be a positive multiple of the bin width {} ps",
            bin_width.ps()
        )));
    }
    Ok((range_max_ps / bin_width.ps()) as usize)
}

/// Bins the gaps between consecutive tags.
pub fn build_histogram(tags: &TimeTagStream, bin_width: SlotWidth, range_max_ps: u64) -> Result<InterArrivalHistogram> {
    let n_bins = n_bins_for(bin_width, range_max_ps)?;
    histogram_of(tags.ticks(), tags.tick_resolution_fs(), bin_width, n_bins)
}

fn histogram_of(
    ticks: &[u64],
    resolution_fs: u64,
    bin_width: SlotWidth,
    n_bins: usize,
) -> Result<InterArrivalHistogram> {
    let mut hist = InterArrivalHistogram::empty(bin_width, n_bins);
    for (i, pair) in ticks.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::NonMonotonic { index: i + 1 });
        }
        hist.record_fs((pair[1] - pair[0]) as u128 * resolution_fs as u128);
    }
    Ok(hist)
}

/// Same result as [`build_histogram`], computed over contiguous chunks in
/// parallel. Neighbouring chunks share one tag so no interval is lost.
pub fn build_histogram_chunked(
    tags: &TimeTagStream,
    bin_width: SlotWidth,
    range_max_ps: u64,
    chunk_len: usize,
) -> Result<InterArrivalHistogram> {
    let n_bins = n_bins_for(bin_width, range_max_ps)?;
    let ticks = tags.ticks();
    let chunk_len = chunk_len.max(2);
    let starts: Vec<usize> = (0..ticks.len().saturating_sub(1)).step_by(chunk_len - 1).collect();
    let parts = starts
        .par_iter()
        .map(|&s| {
            let end = (s + chunk_len).min(ticks.len());
            histogram_of(&ticks[s..end], tags.tick_resolution_fs(), bin_width, n_bins).map_err(|e| match e {
                Error::NonMonotonic { index } => Error::NonMonotonic { index: index + s },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = InterArrivalHistogram::empty(bin_width, n_bins);
    for part in &parts {
        total.merge(part)?;
    }
    Ok(total)
}
