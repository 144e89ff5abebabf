//! Model-free bounds on afterpulsing derived from the tail constant `R0`.
//!
//! A detection in a slot is one of: Poissonian only, afterpulse only, or a
//! coincidence of both (indistinguishable in practice). The Poissonian
//! waiting probability is bracketed by excluding or including the
//! coincidences, and the afterpulse probability by the complements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AfterpulseModel, MAX_SERIES_TERMS};
use crate::params::{DeadTime, SlotParams};
use crate::waiting::{log_pmf_full, r0_limit, residual_term};

/// Bounds on the cumulative afterpulse probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    /// Limit of the residual term; never positive for a consistent model.
    pub r0_delta: f64,
    /// Upper bound on the probability that the first detection after a
    /// trigger is an afterpulse, `1 - e^R0`.
    pub pa_upper: f64,
    /// Upper bound on afterpulses per Poissonian detection, `e^-R0 - 1`.
    pub n_ap_per_trigger_upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_slot_ap_upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<CumulativeSeries>,
    /// Set when a fluctuation pushed `R0` above zero and the bounds were
    /// clamped to zero.
    #[serde(default)]
    pub clamped: bool,
}

impl BoundSet {
    /// Bounds implied by a tail constant. A positive `r0` clamps both
    /// bounds to zero and sets the flag.
    pub fn from_r0(r0_delta: f64) -> Self {
        let clamped = r0_delta > 0.0;
        let (pa_upper, n_ap) = if clamped { (0.0, 0.0) } else { (-r0_delta.exp_m1(), (-r0_delta).exp_m1()) };
        BoundSet { r0_delta, pa_upper, n_ap_per_trigger_upper: n_ap, per_slot_ap_upper: None, series: None, clamped }
    }
}

/// Series-evaluated cumulative probabilities for a known model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    /// `e^R0`, the closed-form lower estimate of `poisson_lower`.
    pub poisson_lower_estimate: f64,
    /// Cumulative probability that the first event is Poissonian, coincidences excluded.
    pub poisson_lower: f64,
    /// Same with coincidences counted as Poissonian.
    pub poisson_upper: f64,
    /// `1 - poisson_upper`.
    pub afterpulse_lower: f64,
    /// `1 - poisson_lower`; never exceeds `pa_upper`.
    pub afterpulse_upper: f64,
}

/// Per-slot Poissonian waiting bounds: `(lower, lower_of_lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonianWaitingBounds {
    pub lower: f64,
    pub lower_of_lower: f64,
    pub upper: f64,
}

/// Brackets the probability that the first detection lands in slot `n`
/// and is Poissonian.
pub fn poissonian_waiting_bounds(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    n: u64,
    tolerance: f64,
) -> Result<PoissonianWaitingBounds> {
    let mu = params.mu_total();
    let p_n = model.prob_at_slot(params.slot_width(), dead, n)?;
    let r_n = residual_term(params, model, dead, n)?;
    let r0 = r0_limit(params, model, dead, tolerance)?;
    let lead = params.p_poisson_slot();
    let decay = -mu * (n - 1) as f64;
    let upper = lead * (decay + r_n).exp();
    let lower = lead * (decay + r_n + (-p_n).ln_1p()).exp();
    let lower_of_lower = lead * (decay + r0).exp();
    Ok(PoissonianWaitingBounds { lower, lower_of_lower, upper })
}

/// A value that was clamped at zero when the raw estimate went negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    pub fn at_zero(raw: f64) -> Self {
        if raw < 0.0 {
            Clamped { value: 0.0, clamped: true }
        } else {
            Clamped { value: raw, clamped: false }
        }
    }
}

/// Upper bound on the probability that the first detection in slot `n` is
/// an afterpulse: `P_H(n) - (1 - e^-mu) e^{-(n-1) mu + R0}`.
pub fn afterpulse_waiting_upper(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    n: u64,
    tolerance: f64,
) -> Result<Clamped> {
    let mu = params.mu_total();
    let p_h = log_pmf_full(params, model, dead, n)?.exp();
    let r0 = r0_limit(params, model, dead, tolerance)?;
    let floor = params.p_poisson_slot() * (-mu * (n - 1) as f64 + r0).exp();
    Ok(Clamped::at_zero(p_h - floor))
}

/// Same bound from a fitted tail: `P_hat(n) - exp(-n mu_hat + c_hat)`.
pub fn afterpulse_waiting_upper_fitted(p_hat: f64, mu_hat: f64, c_hat: f64, n: u64) -> Clamped {
    Clamped::at_zero(p_hat - (-(n as f64) * mu_hat + c_hat).exp())
}

/// Walks slots 1, 2, ... carrying `R(n)` and hands each slot's data to
/// `visit` until it returns `false`.
fn walk_slots(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    mut visit: impl FnMut(u64, f64, f64) -> Result<bool>,
) -> Result<()> {
    let w = params.slot_width();
    let mut r_n = 0.0;
    for n in 1..=MAX_SERIES_TERMS {
        let p_n = model.prob_at_slot(w, dead, n)?;
        if !visit(n, r_n, p_n)? {
            return Ok(());
        }
        r_n += (-p_n).ln_1p();
    }
    Err(Error::Convergence { terms: MAX_SERIES_TERMS })
}

/// Cumulative bounds for a known model, with the cumulative series
/// evaluated to `tolerance`.
pub fn cumulative_bounds(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    tolerance: f64,
) -> Result<BoundSet> {
    let mu = params.mu_total();
    if !(mu > 0.0) {
        return Err(Error::domain("cumulative bounds need a positive Poissonian mean"));
    }
    let r0 = r0_limit(params, model, dead, tolerance)?;
    let w = params.slot_width();
    let lead = params.p_poisson_slot();
    let e_r0 = r0.exp();
    // poisson_lower = e^R0 + sum_i w_i (e^R(i+1) - e^R0); every bracket is
    // non-negative, so truncation can only under-count it.
    let mut excess = 0.0;
    walk_slots(params, model, dead, |n, r_n, p_n| {
        let weight = lead * (-mu * (n - 1) as f64).exp();
        excess += weight * ((r_n + (-p_n).ln_1p()).exp() - e_r0).max(0.0);
        let tail = model.tail_sum(w, dead, n + 1);
        let remaining = (-mu * n as f64).exp() * tail / (1.0 - p_n);
        Ok(remaining >= tolerance)
    })?;
    let (_, error_total) = bound_error_series(params, model, dead, tolerance)?;

    let mut bounds = BoundSet::from_r0(r0);
    let poisson_lower = e_r0 + excess;
    let poisson_upper = poisson_lower + error_total;
    let series = CumulativeSeries {
        poisson_lower_estimate: e_r0,
        poisson_lower,
        poisson_upper,
        afterpulse_lower: bounds.pa_upper - excess - error_total,
        afterpulse_upper: bounds.pa_upper - excess,
    };
    let slack = 4.0 * tolerance;
    if !(series.poisson_lower_estimate <= series.poisson_lower
        && series.poisson_lower <= series.poisson_upper
        && series.poisson_upper <= 1.0 + slack)
    {
        return Err(Error::model(format!("cumulative bound ordering violated: {series:?}")));
    }
    bounds.series = Some(series);
    Ok(bounds)
}

/// Per-slot gap between the two Poissonian bounds and its cumulative sum.
///
/// The gap at slot `n` is the coincidence mass
/// `(1 - e^-mu) e^{-(n-1) mu} prod_{i<n}(1 - P(i)) P(n)`.
pub fn bound_error_series(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tolerance > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let mu = params.mu_total();
    let w = params.slot_width();
    let lead = params.p_poisson_slot();
    let mut per_slot = Vec::new();
    walk_slots(params, model, dead, |n, r_n, p_n| {
        let decay = (-mu * (n - 1) as f64).exp();
        per_slot.push(lead * decay * r_n.exp() * p_n);
        let remaining = lead * (-mu * n as f64).exp() * model.tail_sum(w, dead, n + 1);
        Ok(remaining >= tolerance)
    })?;
    // Smallest terms first.
    let total = per_slot.iter().rev().sum();
    Ok((per_slot, total))
}
