use serde::{Deserialize, Serialize};

use super::optim::nelder_mead;
use super::tail::{bins_in_window, TailFitResult};
use crate::error::{Error, Result};
use crate::histogram::InterArrivalHistogram;
use crate::models::{AfterpulseModel, ExponentialModel};
use crate::params::DeadTime;
use crate::waiting::fire_prob;

/// Search box for the amplitude after dead-time attenuation.
pub const AMPLITUDE_RANGE: (f64, f64) = (1e-4, 0.99);
/// Upper end of the lifetime search box; the lower end is one slot.
pub const MAX_TAU0_PS: f64 = 1e8;
const GRID: usize = 40;
const XTOL: f64 = 1e-7;
const MAX_ITER: usize = 20_000;
/// Distance in log units from a box edge that counts as "on the edge".
const EDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpFitOptions {
    /// Refit the Poissonian rate together with the afterpulse parameters
    /// instead of holding it at the tail-fit value.
    pub refine_mu: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFitResult {
    /// Amplitude at the end of the dead time.
    pub p_a0_hat: f64,
    /// Amplitude extrapolated back to zero elapsed time.
    pub p_a0_undelayed_hat: f64,
    pub tau0_hat_ps: f64,
    pub mu_per_slot: f64,
    pub dead_slots: u64,
    /// Residual sum of squares in log space.
    pub objective_value: f64,
    pub bins_used: u64,
    /// The optimum sits on an edge of the search box.
    pub at_boundary: bool,
}

impl ExpFitResult {
    /// The fitted model in the crate's undelayed parameterization.
    pub fn model(&self) -> Result<AfterpulseModel> {
        Ok(AfterpulseModel::Exponential(ExponentialModel::new(self.p_a0_undelayed_hat, self.tau0_hat_ps)?))
    }
}

struct Objective {
    /// (waiting slot, ln P_hat), increasing in slot
    points: Vec<(u64, f64)>,
    slot_ps: f64,
}

impl Objective {
    /// Sum of squared log residuals for amplitude `a`, lifetime `tau0`
    /// (ps) and rate `mu`.
    fn eval(&self, a: f64, tau0: f64, mu: f64) -> f64 {
        let decay = (-self.slot_ps / tau0).exp();
        let mut p = a;
        let mut residual = 0.0;
        let mut ss = 0.0;
        let mut slot = 1;
        for &(n, y) in &self.points {
            while slot < n {
                p *= decay;
                residual += (-p).ln_1p();
                slot += 1;
            }
            let p_n = p * decay;
            let model = fire_prob(mu, p_n).ln() - mu * (n - 1) as f64 + residual;
            ss += (y - model).powi(2);
        }
        ss
    }
}

/// Fits the single-exponential afterpulse model to the early part of the
/// histogram, `region_ps`, holding `mu` at the tail fit unless
/// `options.refine_mu` is set.
pub fn fit_exponential(
    hist: &InterArrivalHistogram,
    tail: &TailFitResult,
    region_ps: [u64; 2],
    dead: DeadTime,
    options: ExpFitOptions,
) -> Result<ExpFitResult> {
    if hist.bin_width().ps() != tail.slot_width_ps {
        return Err(Error::domain("tail fit and histogram use different bin widths"));
    }
    let total = hist.total_intervals() as f64;
    let points: Vec<(u64, f64)> = bins_in_window(hist, tail.slot_offset, region_ps[0], region_ps[1])
        .filter(|&(bin, _)| hist.count(bin) > 0)
        .map(|(bin, n)| (n, (hist.count(bin) as f64 / total).ln()))
        .collect();
    let needed = if options.refine_mu { 3 } else { 2 };
    if points.len() < needed {
        return Err(Error::fit(format!(
            "region [{}, {}] ps holds {} non-empty bins, need {needed}",
            region_ps[0],
            region_ps[1],
            points.len()
        )));
    }
    let slot_ps = hist.bin_width().ps_f64();
    let objective = Objective { points, slot_ps };
    let mu0 = tail.mu_hat_per_slot;

    let lo = [AMPLITUDE_RANGE.0.ln(), slot_ps.ln()];
    let hi = [AMPLITUDE_RANGE.1.ln(), MAX_TAU0_PS.ln()];
    let spacing = [(hi[0] - lo[0]) / (GRID - 1) as f64, (hi[1] - lo[1]) / (GRID - 1) as f64];
    let mut start = [lo[0], lo[1]];
    let mut best = f64::INFINITY;
    for i in 0..GRID {
        for j in 0..GRID {
            let x = [lo[0] + i as f64 * spacing[0], lo[1] + j as f64 * spacing[1]];
            let v = objective.eval(x[0].exp(), x[1].exp(), mu0);
            if v < best {
                best = v;
                start = x;
            }
        }
    }
    let f2 = |x: &[f64]| objective.eval(x[0].exp(), x[1].exp(), mu0);
    let mut min = nelder_mead(f2, &start, &spacing, &lo, &hi, XTOL, MAX_ITER);
    let mut mu = mu0;
    if options.refine_mu {
        let lo3 = [lo[0], lo[1], (mu0 * 1e-3).ln()];
        let hi3 = [hi[0], hi[1], (mu0 * 1e3).min(10.0).ln()];
        let x0 = [min.x[0], min.x[1], mu0.ln()];
        let f3 = |x: &[f64]| objective.eval(x[0].exp(), x[1].exp(), x[2].exp());
        min = nelder_mead(f3, &x0, &[spacing[0], spacing[1], 0.1], &lo3, &hi3, XTOL, MAX_ITER);
        mu = min.x[2].exp();
    }

    let at_boundary = (0..2).any(|k| min.x[k] - lo[k] < EDGE || hi[k] - min.x[k] < EDGE);
    let a = min.x[0].exp();
    let tau0 = min.x[1].exp();
    Ok(ExpFitResult {
        p_a0_hat: a,
        p_a0_undelayed_hat: a * (dead.n_slots() as f64 * slot_ps / tau0).exp(),
        tau0_hat_ps: tau0,
        mu_per_slot: mu,
        dead_slots: dead.n_slots(),
        objective_value: min.f,
        bins_used: objective.points.len() as u64,
        at_boundary,
    })
}
