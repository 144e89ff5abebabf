use serde::{Deserialize, Serialize};

use crate::bounds::BoundSet;
use crate::error::{Error, Result};
use crate::histogram::InterArrivalHistogram;

/// How histogram bins map onto waiting slots `n = bin - offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "offset")]
pub enum SlotOrigin {
    /// The first occupied bin is waiting slot 1.
    #[default]
    FirstOccupied,
    /// Explicit offset in bins.
    Offset(u64),
}

impl SlotOrigin {
    /// Bin offset for `hist`, or `None` if the histogram is empty.
    pub fn resolve(self, hist: &InterArrivalHistogram) -> Option<u64> {
        match self {
            SlotOrigin::FirstOccupied => hist.first_occupied_bin().map(|b| b - 1),
            SlotOrigin::Offset(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TailFitOptions {
    /// Weight each bin by its count instead of plain least squares.
    pub weighted: bool,
    pub origin: SlotOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFitResult {
    pub mu_hat_per_slot: f64,
    pub c_delta_hat: f64,
    /// Requested window in picoseconds of elapsed time.
    pub window_ps: [u64; 2],
    /// First and last waiting slot that entered the fit.
    pub fit_window_slots: [u64; 2],
    /// Bin index minus waiting slot.
    pub slot_offset: u64,
    pub slot_width_ps: u64,
    pub residual_rms: f64,
    pub bins_used: u64,
    pub weighted: bool,
}

impl TailFitResult {
    /// Fitted log waiting probability at waiting slot `n`.
    pub fn line(&self, n: u64) -> f64 {
        -self.mu_hat_per_slot * n as f64 + self.c_delta_hat
    }
}

/// Bins whose full extent lies in `[lo_ps, hi_ps]`, as `(bin, slot)` pairs.
pub(crate) fn bins_in_window(
    hist: &InterArrivalHistogram,
    offset: u64,
    lo_ps: u64,
    hi_ps: u64,
) -> impl Iterator<Item = (u64, u64)> + '_ {
    (1..=hist.n_bins() as u64).filter_map(move |bin| {
        let (lo, hi) = hist.bin_edges_ps(bin);
        (lo >= lo_ps && hi <= hi_ps && bin > offset).then(|| (bin, bin - offset))
    })
}

/// Straight-line fit of `ln P_hat(n)` against the waiting slot over the
/// non-empty bins inside `[lo_ps, hi_ps]`.
pub fn fit_tail(hist: &InterArrivalHistogram, window_ps: [u64; 2], options: TailFitOptions) -> Result<TailFitResult> {
    let [lo_ps, hi_ps] = window_ps;
    if lo_ps >= hi_ps {
        return Err(Error::fit(format!("empty fit window [{lo_ps}, {hi_ps}] ps")));
    }
    let offset = options.origin.resolve(hist).ok_or_else(|| Error::fit("histogram has no counts"))?;
    let total = hist.total_intervals() as f64;
    let points: Vec<(f64, f64, f64, u64)> = bins_in_window(hist, offset, lo_ps, hi_ps)
        .filter(|&(bin, _)| hist.count(bin) > 0)
        .map(|(bin, n)| {
            let c = hist.count(bin) as f64;
            let w = if options.weighted { c } else { 1.0 };
            (n as f64, (c / total).ln(), w, n)
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::fit(format!("window [{lo_ps}, {hi_ps}] ps holds {} non-empty bins, need 2", points.len())));
    }

    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mu_hat = -slope;
    if !(mu_hat > 0.0) {
        return Err(Error::fit(format!("fitted slope gives non-positive rate {mu_hat:e} per slot")));
    }
    let ss: f64 = points.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();

    Ok(TailFitResult {
        mu_hat_per_slot: mu_hat,
        c_delta_hat: intercept,
        window_ps,
        fit_window_slots: [points[0].3, points[points.len() - 1].3],
        slot_offset: offset,
        slot_width_ps: hist.bin_width().ps(),
        residual_rms: (ss / points.len() as f64).sqrt(),
        bins_used: points.len() as u64,
        weighted: options.weighted,
    })
}

/// Bounds implied by a tail fit: `R0 = c - ln(1 - e^-mu) - mu`.
pub fn bound_afterpulsing(fit: &TailFitResult) -> Result<BoundSet> {
    let mu = fit.mu_hat_per_slot;
    if !(mu > 0.0) {
        return Err(Error::domain("tail fit rate must be positive"));
    }
    let r0 = fit.c_delta_hat - (-(-mu).exp_m1()).ln() - mu;
    Ok(BoundSet::from_r0(r0))
}

/// Relative change below which neighbouring sweep values count as flat.
pub const PLATEAU_REL_TOL: f64 = 0.01;
/// Absolute floor for the same test, so bounds sitting at zero plateau.
pub const PLATEAU_ABS_TOL: f64 = 1e-9;
/// Consecutive flat candidates required for a plateau.
pub const PLATEAU_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweepEntry {
    pub tau_ps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<TailFitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pa_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweepResult {
    pub entries: Vec<TauSweepEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_tau_ps: Option<u64>,
}

impl TauSweepResult {
    pub fn taus_ps(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.tau_ps).collect()
    }

    pub fn pa_bounds(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.pa_upper).collect()
    }
}

fn flat(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d <= PLATEAU_ABS_TOL || d <= PLATEAU_REL_TOL * a.abs().max(b.abs())
}

/// Fits the tail over `[tau, range_max]` for every candidate and looks for
/// the first `tau` from which the bound stays flat.
pub fn sweep_tau(hist: &InterArrivalHistogram, taus_ps: &[u64], options: TailFitOptions) -> Result<TauSweepResult> {
    if taus_ps.len() < PLATEAU_RUN {
        return Err(Error::domain(format!("need at least {PLATEAU_RUN} tau candidates")));
    }
    if taus_ps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("tau candidates must be strictly increasing"));
    }
    let range = hist.range_max_ps();
    let entries: Vec<TauSweepEntry> = taus_ps
        .iter()
        .map(|&tau| match fit_tail(hist, [tau, range], options).and_then(|f| Ok((bound_afterpulsing(&f)?, f))) {
            Ok((b, f)) => TauSweepEntry { tau_ps: tau, fit: Some(f), pa_upper: Some(b.pa_upper), error: None },
            Err(e) => TauSweepEntry { tau_ps: tau, fit: None, pa_upper: None, error: Some(e.to_string()) },
        })
        .collect();
    let plateau_tau_ps = entries.windows(PLATEAU_RUN).find_map(|run| {
        let values: Option<Vec<f64>> = run.iter().map(|e| e.pa_upper).collect();
        let values = values?;
        values.windows(2).all(|p| flat(p[0], p[1])).then_some(run[0].tau_ps)
    });
    Ok(TauSweepResult { entries, plateau_tau_ps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessBin {
    pub bin: u64,
    pub slot: u64,
    pub value: f64,
    /// The raw difference was negative.
    pub clamped: bool,
}

/// Per-bin upper bound on the afterpulse waiting probability,
/// `max(0, P_hat(n) - e^{-n mu + c})`, for every bin at or past slot 1.
pub fn afterpulse_excess(hist: &InterArrivalHistogram, fit: &TailFitResult) -> Vec<ExcessBin> {
    let offset = fit.slot_offset;
    (offset + 1..=hist.n_bins() as u64)
        .map(|bin| {
            let slot = bin - offset;
            let raw = hist.probability(bin) - fit.line(slot).exp();
            ExcessBin { bin, slot, value: raw.max(0.0), clamped: raw < 0.0 }
        })
        .collect()
}
