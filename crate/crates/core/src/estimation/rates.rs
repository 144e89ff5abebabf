use serde::{Deserialize, Serialize};

use super::tail::TailFitResult;
use crate::error::{Error, Result};
use crate::params::SlotWidth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSeparation {
    pub mu_s_hat_per_slot: f64,
    pub mu_d_hat_per_slot: f64,
    /// The light-minus-dark difference was negative and was set to zero.
    pub clamped: bool,
}

/// Splits the light-on rate into source and dark parts using a dark-only
/// measurement taken with the same slot width.
pub fn separate_rates(fit_dark: &TailFitResult, fit_light: &TailFitResult) -> Result<RateSeparation> {
    if fit_dark.slot_width_ps != fit_light.slot_width_ps {
        return Err(Error::domain(format!(
            "dark and light fits use different slot widths ({} ps vs {} ps)",
            fit_dark.slot_width_ps, fit_light.slot_width_ps
        )));
    }
    Ok(rates_from_mu(fit_dark.mu_hat_per_slot, fit_light.mu_hat_per_slot))
}

/// Same separation from bare per-slot means.
pub fn rates_from_mu(mu_dark: f64, mu_light: f64) -> RateSeparation {
    let diff = mu_light - mu_dark;
    RateSeparation { mu_s_hat_per_slot: diff.max(0.0), mu_d_hat_per_slot: mu_dark, clamped: diff < 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub eta: f64,
    pub mu_s_hat_per_slot: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_d_hat_per_slot: Option<f64>,
    pub source_rate_hz: f64,
    pub slot_width_ps: u64,
    /// The raw ratio fell outside `[0, 1]`.
    pub clamped: bool,
}

/// Detection efficiency `mu_s / (slot_width * source_rate)`.
pub fn estimate_efficiency(mu_s_hat: f64, slot_width: SlotWidth, source_rate_hz: f64) -> Result<EfficiencyEstimate> {
    if !(source_rate_hz > 0.0) || !source_rate_hz.is_finite() {
        return Err(Error::domain("source rate must be positive and finite"));
    }
    if !mu_s_hat.is_finite() {
        return Err(Error::domain("source mean must be finite"));
    }
    let raw = mu_s_hat * 1e12 / (slot_width.ps_f64() * source_rate_hz);
    Ok(EfficiencyEstimate {
        eta: raw.clamp(0.0, 1.0),
        mu_s_hat_per_slot: mu_s_hat,
        mu_d_hat_per_slot: None,
        source_rate_hz,
        slot_width_ps: slot_width.ps(),
        clamped: !(0.0..=1.0).contains(&raw),
    })
}

/// Efficiency from a dark/light separation, keeping the dark mean.
pub fn efficiency_from_rates(
    rates: &RateSeparation,
    slot_width: SlotWidth,
    source_rate_hz: f64,
) -> Result<EfficiencyEstimate> {
    let mut e = estimate_efficiency(rates.mu_s_hat_per_slot, slot_width, source_rate_hz)?;
    e.mu_d_hat_per_slot = Some(rates.mu_d_hat_per_slot);
    Ok(e)
}
