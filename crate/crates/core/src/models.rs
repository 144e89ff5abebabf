//! Per-slot afterpulse probability models.
//!
//! Every model describes the probability `P_a(k)` that an afterpulse
//! arrives in the `k`-th slot after a detection (`k >= 1`). Dead time is
//! applied by shifting the slot index: the probability in waiting slot `i`
//! (counted from the first slot after the dead time) is `P_a(i + n_dead)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DeadTime, SlotWidth};

/// Hard cap on the number of slots any series evaluation may visit.
pub const MAX_SERIES_TERMS: u64 = 10_000_000;

/// Single exponential decay `p_a0 * exp(-k dt / tau0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExponential")]
pub struct ExponentialModel {
    p_a0: f64,
    tau0_ps: f64,
}

impl ExponentialModel {
    pub fn new(p_a0: f64, tau0_ps: f64) -> Result<Self> {
        if !(p_a0.is_finite() && (0.0..1.0).contains(&p_a0)) {
            return Err(Error::model(format!("p_a0 must lie in [0, 1), got {p_a0}")));
        }
        if !(tau0_ps.is_finite() && tau0_ps > 0.0) {
            return Err(Error::model(format!("tau0 must be positive, got {tau0_ps} ps")));
        }
        Ok(ExponentialModel { p_a0, tau0_ps })
    }

    /// Solves for the amplitude that yields `total` afterpulse probability
    /// once `dead` slots of dead time have elapsed.
    pub fn calibrate(total: f64, dead: DeadTime, tau0_ps: f64, slot_width: SlotWidth) -> Result<Self> {
        if !(total.is_finite() && total > 0.0 && total < 1.0) {
            return Err(Error::domain(format!("total probability must lie in (0, 1), got {total}")));
        }
        if !(tau0_ps.is_finite() && tau0_ps > 0.0) {
            return Err(Error::model(format!("tau0 must be positive, got {tau0_ps} ps")));
        }
        let r = slot_width.ps_f64() / tau0_ps;
        let geometric = (-r).exp() / -(-r).exp_m1();
        let p_a0 = total * (dead.n_slots() as f64 * r).exp() / geometric;
        Self::new(p_a0, tau0_ps)
    }

    pub fn p_a0(&self) -> f64 {
        self.p_a0
    }

    pub fn tau0_ps(&self) -> f64 {
        self.tau0_ps
    }

    fn ratio(&self, slot_width: SlotWidth) -> f64 {
        slot_width.ps_f64() / self.tau0_ps
    }

    /// Total afterpulse probability without dead time, `p_a0 q / (1 - q)`.
    pub fn total_prob(&self, slot_width: SlotWidth) -> Result<f64> {
        self.total_prob_with_dead(DeadTime::NONE, slot_width)
    }

    /// Total afterpulse probability remaining after `dead` slots.
    pub fn total_prob_with_dead(&self, dead: DeadTime, slot_width: SlotWidth) -> Result<f64> {
        let r = self.ratio(slot_width);
        let q_over = (-r).exp() / -(-r).exp_m1();
        let total = self.p_a0 * (-(dead.n_slots() as f64) * r).exp() * q_over;
        if !(total < 1.0) {
            return Err(Error::model(format!("total afterpulse probability {total} is not below 1")));
        }
        Ok(total)
    }

    /// Smallest whole-slot dead time whose remaining total afterpulse
    /// probability does not exceed `target`.
    pub fn min_dead_time_for_target(&self, slot_width: SlotWidth, target: f64) -> Result<DeadTime> {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::domain(format!("target must be positive, got {target}")));
        }
        let total0 = self.total_prob(slot_width)?;
        if total0 <= target {
            return Ok(DeadTime::NONE);
        }
        let estimate = (total0 / target).ln() / self.ratio(slot_width);
        if !estimate.is_finite() || estimate > u64::MAX as f64 / 2.0 {
            return Err(Error::domain("target is unreachable with a finite dead time"));
        }
        let mut n = estimate.ceil().max(0.0) as u64;
        // Rounding in the closed form can land one slot either side.
        while n > 0 && self.total_prob_with_dead(DeadTime::slots(n - 1), slot_width)? <= target {
            n -= 1;
        }
        while self.total_prob_with_dead(DeadTime::slots(n), slot_width)? > target {
            n += 1;
        }
        Ok(DeadTime::slots(n))
    }

    fn base_prob(&self, k: u64, slot_width: SlotWidth) -> f64 {
        self.p_a0 * (-(k as f64) * self.ratio(slot_width)).exp()
    }

    fn tail_from(&self, k: u64, slot_width: SlotWidth) -> f64 {
        let r = self.ratio(slot_width);
        self.p_a0 * (-(k as f64) * r).exp() / -(-r).exp_m1()
    }

    fn square_tail_from(&self, k: u64, slot_width: SlotWidth) -> f64 {
        let r = 2.0 * self.ratio(slot_width);
        self.p_a0 * self.p_a0 * (-(k as f64) * r).exp() / -(-r).exp_m1()
    }
}

/// One amplitude/lifetime pair of a multi-exponential model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialTerm {
    pub amplitude: f64,
    pub tau_ps: f64,
}

/// Sum of independent exponential trap contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultiExponential")]
pub struct MultiExponentialModel {
    terms: Vec<ExponentialTerm>,
}

impl MultiExponentialModel {
    pub fn new(terms: Vec<ExponentialTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.amplitude.is_finite() && t.amplitude >= 0.0) {
                return Err(Error::model(format!("amplitude must be >= 0, got {}", t.amplitude)));
            }
            if !(t.tau_ps.is_finite() && t.tau_ps > 0.0) {
                return Err(Error::model(format!("lifetime must be positive, got {} ps", t.tau_ps)));
            }
        }
        Ok(MultiExponentialModel { terms })
    }

    pub fn terms(&self) -> &[ExponentialTerm] {
        &self.terms
    }

    fn base_prob(&self, k: u64, slot_width: SlotWidth) -> f64 {
        self.terms.iter().map(|t| t.amplitude * (-(k as f64) * slot_width.ps_f64() / t.tau_ps).exp()).sum()
    }

    fn tail_from(&self, k: u64, slot_width: SlotWidth) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let r = slot_width.ps_f64() / t.tau_ps;
                t.amplitude * (-(k as f64) * r).exp() / -(-r).exp_m1()
            })
            .sum()
    }

    fn square_tail_from(&self, k: u64, slot_width: SlotWidth) -> f64 {
        let w = slot_width.ps_f64();
        let mut sum = 0.0;
        for a in &self.terms {
            for b in &self.terms {
                let r = w / a.tau_ps + w / b.tau_ps;
                sum += a.amplitude * b.amplitude * (-(k as f64) * r).exp() / -(-r).exp_m1();
            }
        }
        sum
    }
}

/// Power-law decay `amplitude * (k + onset)^(-exponent)`, with `k` in slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPowerLaw")]
pub struct PowerLawModel {
    amplitude: f64,
    exponent: f64,
    onset: u64,
}

impl PowerLawModel {
    pub fn new(amplitude: f64, exponent: f64, onset: u64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::model(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(exponent.is_finite() && exponent > 1.0) {
            return Err(Error::model(format!("exponent must exceed 1 to be summable, got {exponent}")));
        }
        if onset < 1 {
            return Err(Error::model("onset slot must be >= 1"));
        }
        let first = amplitude * ((1 + onset) as f64).powf(-exponent);
        if !(first < 1.0) {
            return Err(Error::model(format!("per-slot probability {first} is not below 1")));
        }
        Ok(PowerLawModel { amplitude, exponent, onset })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn onset(&self) -> u64 {
        self.onset
    }

    fn base_prob(&self, k: u64) -> f64 {
        self.amplitude * ((k + self.onset) as f64).powf(-self.exponent)
    }

    fn tail_from(&self, k: u64) -> f64 {
        self.amplitude * hurwitz_tail((k + self.onset) as f64, self.exponent)
    }

    fn square_tail_from(&self, k: u64) -> f64 {
        self.amplitude * self.amplitude * hurwitz_tail((k + self.onset) as f64, 2.0 * self.exponent)
    }
}

// Deserialization goes through the validating constructors.

#[derive(Deserialize)]
struct RawExponential {
    p_a0: f64,
    tau0_ps: f64,
}

impl TryFrom<RawExponential> for ExponentialModel {
    type Error = Error;
    fn try_from(raw: RawExponential) -> Result<Self> {
        ExponentialModel::new(raw.p_a0, raw.tau0_ps)
    }
}

#[derive(Deserialize)]
struct RawMultiExponential {
    terms: Vec<ExponentialTerm>,
}

impl TryFrom<RawMultiExponential> for MultiExponentialModel {
    type Error = Error;
    fn try_from(raw: RawMultiExponential) -> Result<Self> {
        MultiExponentialModel::new(raw.terms)
    }
}

#[derive(Deserialize)]
struct RawPowerLaw {
    amplitude: f64,
    exponent: f64,
    onset: u64,
}

impl TryFrom<RawPowerLaw> for PowerLawModel {
    type Error = Error;
    fn try_from(raw: RawPowerLaw) -> Result<Self> {
        PowerLawModel::new(raw.amplitude, raw.exponent, raw.onset)
    }
}

/// `sum_{j >= 0} (x + j)^(-s)` for `x >= 1`, `s > 1`, via Euler-Maclaurin
/// after a handful of explicit terms.
fn hurwitz_tail(x: f64, s: f64) -> f64 {
    const DIRECT: usize = 9;
    // B_2j / (2j)!
    const BERNOULLI: [f64; 5] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30_240.0, -1.0 / 1_209_600.0, 1.0 / 47_900_160.0];
    let mut sum = 0.0;
    for j in 0..DIRECT {
        sum += (x + j as f64).powf(-s);
    }
    let a = x + DIRECT as f64;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times a^(-s-2j+1)
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        tail += b * rising * power;
        let m = 2 * j as u32 + 1;
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        power /= a * a;
    }
    sum + tail
}

/// Pluggable afterpulse model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AfterpulseModel {
    Null,
    Exponential(ExponentialModel),
    MultiExponential(MultiExponentialModel),
    PowerLaw(PowerLawModel),
}

impl AfterpulseModel {
    pub fn exponential(p_a0: f64, tau0_ps: f64) -> Result<Self> {
        Ok(AfterpulseModel::Exponential(ExponentialModel::new(p_a0, tau0_ps)?))
    }

    pub fn is_null(&self) -> bool {
        match self {
            AfterpulseModel::Null => true,
            AfterpulseModel::Exponential(m) => m.p_a0 == 0.0,
            AfterpulseModel::MultiExponential(m) => m.terms.iter().all(|t| t.amplitude == 0.0),
            AfterpulseModel::PowerLaw(m) => m.amplitude == 0.0,
        }
    }

    /// Unchecked per-slot probability `k` slots after the detection.
    fn base_prob(&self, k: u64, slot_width: SlotWidth) -> f64 {
        match self {
            AfterpulseModel::Null => 0.0,
            AfterpulseModel::Exponential(m) => m.base_prob(k, slot_width),
            AfterpulseModel::MultiExponential(m) => m.base_prob(k, slot_width),
            AfterpulseModel::PowerLaw(m) => m.base_prob(k),
        }
    }

    /// Dead-time-shifted afterpulse probability in waiting slot `i >= 1`.
    pub fn prob_at_slot(&self, slot_width: SlotWidth, dead: DeadTime, i: u64) -> Result<f64> {
        if i == 0 {
            return Err(Error::domain("waiting slot index starts at 1"));
        }
        let p = self.base_prob(i + dead.n_slots(), slot_width);
        if !(p.is_finite() && (0.0..1.0).contains(&p)) {
            return Err(Error::model(format!("afterpulse probability {p} at waiting slot {i} is outside [0, 1)")));
        }
        Ok(p)
    }

    /// `sum_{j >= i} P_a,dead(j)`: the afterpulse mass from waiting slot `i` on.
    pub fn tail_sum(&self, slot_width: SlotWidth, dead: DeadTime, i: u64) -> f64 {
        let k = i.max(1) + dead.n_slots();
        match self {
            AfterpulseModel::Null => 0.0,
            AfterpulseModel::Exponential(m) => m.tail_from(k, slot_width),
            AfterpulseModel::MultiExponential(m) => m.tail_from(k, slot_width),
            AfterpulseModel::PowerLaw(m) => m.tail_from(k),
        }
    }

    /// `sum_{j >= i} P_a,dead(j)^2`.
    pub(crate) fn square_tail_sum(&self, slot_width: SlotWidth, dead: DeadTime, i: u64) -> f64 {
        let k = i.max(1) + dead.n_slots();
        match self {
            AfterpulseModel::Null => 0.0,
            AfterpulseModel::Exponential(m) => m.square_tail_from(k, slot_width),
            AfterpulseModel::MultiExponential(m) => m.square_tail_from(k, slot_width),
            AfterpulseModel::PowerLaw(m) => m.square_tail_from(k),
        }
    }

    /// Total afterpulse probability after `dead` slots of dead time.
    pub fn total_prob_with_dead(&self, slot_width: SlotWidth, dead: DeadTime) -> Result<f64> {
        // Validates the leading slot; the models are non-increasing.
        self.prob_at_slot(slot_width, dead, 1)?;
        let total = self.tail_sum(slot_width, dead, 1);
        if !(total < 1.0) {
            return Err(Error::model(format!("total afterpulse probability {total} is not below 1")));
        }
        Ok(total)
    }

    /// Smallest dead time that brings the total afterpulse probability to
    /// `target` or below. Closed form for single exponentials, bisection
    /// on the summed total otherwise.
    pub fn min_dead_time_for_target(&self, slot_width: SlotWidth, target: f64) -> Result<DeadTime> {
        if let AfterpulseModel::Exponential(m) = self {
            return m.min_dead_time_for_target(slot_width, target);
        }
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::domain(format!("target must be positive, got {target}")));
        }
        let total = |n: u64| self.total_prob_with_dead(slot_width, DeadTime::slots(n));
        if total(0)? <= target {
            return Ok(DeadTime::NONE);
        }
        let mut lo = 0u64;
        let mut hi = 1u64;
        while total(hi)? > target {
            lo = hi;
            hi = hi
                .checked_mul(2)
                .filter(|&h| h <= MAX_SERIES_TERMS)
                .ok_or(Error::Convergence { terms: MAX_SERIES_TERMS })?;
        }
        // invariant: total(lo) > target >= total(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if total(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(DeadTime::slots(hi))
    }
}
