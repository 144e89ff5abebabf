use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of one time slot (and histogram bin), in whole picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotWidth(u64);

impl SlotWidth {
    pub fn from_ps(ps: u64) -> Result<Self> {
        if ps == 0 {
            return Err(Error::domain("slot width must be positive"));
        }
        Ok(SlotWidth(ps))
    }

    pub fn from_ns(ns: u64) -> Result<Self> {
        Self::from_ps(ns.checked_mul(1_000).ok_or_else(|| Error::domain("slot width overflow"))?)
    }

    pub fn ps(self) -> u64 {
        self.0
    }

    pub fn ps_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn secs(self) -> f64 {
        self.0 as f64 * 1e-12
    }
}

/// Poissonian means per slot for the source and for dark counts.
///
/// Both means are dimensionless expected counts in one slot; rates are
/// only ever derived through [`SlotParams::slot_width`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    mu_s: f64,
    mu_d: f64,
    slot_width: SlotWidth,
}

impl SlotParams {
    pub fn new(mu_s: f64, mu_d: f64, slot_width: SlotWidth) -> Result<Self> {
        if !(mu_s.is_finite() && mu_s >= 0.0) {
            return Err(Error::domain(format!("mu_s must be finite and >= 0, got {mu_s}")));
        }
        if !(mu_d.is_finite() && mu_d >= 0.0) {
            return Err(Error::domain(format!("mu_d must be finite and >= 0, got {mu_d}")));
        }
        Ok(SlotParams { mu_s, mu_d, slot_width })
    }

    /// Builds the per-slot means from rates in events per second.
    pub fn from_rates(source_hz: f64, dark_hz: f64, slot_width: SlotWidth) -> Result<Self> {
        Self::new(source_hz * slot_width.secs(), dark_hz * slot_width.secs(), slot_width)
    }

    /// Single combined Poissonian mean, attributed entirely to dark counts.
    pub fn total(mu: f64, slot_width: SlotWidth) -> Result<Self> {
        Self::new(0.0, mu, slot_width)
    }

    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    pub fn mu_d(&self) -> f64 {
        self.mu_d
    }

    pub fn slot_width(&self) -> SlotWidth {
        self.slot_width
    }

    pub fn mu_total(&self) -> f64 {
        self.mu_s + self.mu_d
    }

    /// Probability of at least one Poissonian arrival in a slot.
    pub fn p_poisson_slot(&self) -> f64 {
        -(-self.mu_total()).exp_m1()
    }

    pub fn total_rate_hz(&self) -> f64 {
        self.mu_total() / self.slot_width.secs()
    }
}

/// Dead time as a whole number of slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeadTime(u64);

impl DeadTime {
    pub const NONE: DeadTime = DeadTime(0);

    pub fn slots(n: u64) -> Self {
        DeadTime(n)
    }

    /// Quantizes a dead time in picoseconds, rounding partial slots up.
    pub fn from_ps(ps: u64, slot_width: SlotWidth) -> Self {
        DeadTime(ps.div_ceil(slot_width.ps()))
    }

    pub fn n_slots(self) -> u64 {
        self.0
    }

    pub fn duration_ps(self, slot_width: SlotWidth) -> u64 {
        self.0 * slot_width.ps()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_means() {
        let w = SlotWidth::from_ns(100).unwrap();
        assert!(SlotParams::new(-1e-3, 0.0, w).is_err());
        assert!(SlotParams::new(0.0, f64::NAN, w).is_err());
        assert!(SlotWidth::from_ps(0).is_err());
    }

    #[test]
    fn poisson_slot_probability() {
        let w = SlotWidth::from_ns(100).unwrap();
        let p = SlotParams::new(0.06, 0.04, w).unwrap();
        assert!((p.p_poisson_slot() - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((p.total_rate_hz() - 1e6).abs() < 1e-6);
        let zero = SlotParams::new(0.0, 0.0, w).unwrap();
        assert_eq!(zero.p_poisson_slot(), 0.0);
    }

    #[test]
    fn dead_time_rounds_up() {
        let w = SlotWidth::from_ns(100).unwrap();
        assert_eq!(DeadTime::from_ps(100_000, w).n_slots(), 1);
        assert_eq!(DeadTime::from_ps(100_001, w).n_slots(), 2);
        assert_eq!(DeadTime::from_ps(3_000_000, w).duration_ps(w), 3_000_000);
    }
}
