//! Discrete waiting-time distribution of the first detection after a
//! triggering one.
//!
//! All public functions use the shifted slot convention: slot 1 is the
//! first slot after the dead time has elapsed. The zero-padded raw view,
//! where the dead slots are counted too, is available as [`pmf_raw`].
//!
//! Probabilities are assembled in log space. `pmf_full` is `exp` of
//! `log_pmf_full`, which keeps values far down the tail representable.

use crate::error::{Error, Result};
use crate::models::{AfterpulseModel, MAX_SERIES_TERMS};
use crate::params::{DeadTime, SlotParams};

fn check_slot(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::domain("slot index starts at 1"))
    } else {
        Ok(())
    }
}

/// `1 - e^-mu (1 - p)`: probability that slot fires given afterpulse
/// probability `p` in that slot.
pub(crate) fn fire_prob(mu: f64, p: f64) -> f64 {
    -(-mu).exp_m1() + (-mu).exp() * p
}

/// Geometric waiting probability without afterpulsing.
pub fn pmf_no_afterpulse(params: &SlotParams, n: u64) -> Result<f64> {
    check_slot(n)?;
    let mu = params.mu_total();
    Ok(params.p_poisson_slot() * (-mu * (n - 1) as f64).exp())
}

/// `sum_{i=1}^{n-1} ln(1 - P_a,dead(i))`; zero for `n = 1`.
pub fn residual_term(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, n: u64) -> Result<f64> {
    check_slot(n)?;
    if model.is_null() {
        return Ok(0.0);
    }
    let w = params.slot_width();
    let mut sum = 0.0;
    for i in 1..n {
        sum += (-model.prob_at_slot(w, dead, i)?).ln_1p();
    }
    Ok(sum)
}

/// Natural log of the waiting probability at slot `n`.
pub fn log_pmf_full(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, n: u64) -> Result<f64> {
    check_slot(n)?;
    let mu = params.mu_total();
    let p_n = model.prob_at_slot(params.slot_width(), dead, n)?;
    let head = fire_prob(mu, p_n);
    if head <= 0.0 {
        return Err(Error::domain(format!("waiting probability at slot {n} is zero")));
    }
    Ok(head.ln() - mu * (n - 1) as f64 + residual_term(params, model, dead, n)?)
}

/// Waiting probability that the first detection after a trigger falls in
/// waiting slot `n`.
pub fn pmf_full(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, n: u64) -> Result<f64> {
    check_slot(n)?;
    let p_n = model.prob_at_slot(params.slot_width(), dead, n)?;
    if fire_prob(params.mu_total(), p_n) <= 0.0 {
        return Ok(0.0);
    }
    Ok(log_pmf_full(params, model, dead, n)?.exp())
}

/// Raw view counting every slot after the trigger, dead slots included.
/// Zero for `n <= n_dead`; equal to `pmf_full(n - n_dead)` beyond.
pub fn pmf_raw(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, n: u64) -> Result<f64> {
    check_slot(n)?;
    if n <= dead.n_slots() {
        return Ok(0.0);
    }
    let w = params.slot_width();
    let mu = params.mu_total();
    let nd = dead.n_slots();
    // Undelayed model indexed by absolute slot.
    let p_n = model.prob_at_slot(w, DeadTime::NONE, n)?;
    let head = fire_prob(mu, p_n);
    if head <= 0.0 {
        return Ok(0.0);
    }
    let mut residual = 0.0;
    for i in nd + 1..n {
        residual += (-model.prob_at_slot(w, DeadTime::NONE, i)?).ln_1p();
    }
    Ok((head.ln() - mu * (n - nd - 1) as f64 + residual).exp())
}

/// Limit of the residual term as `n` grows, summed until the remaining
/// tail is certified to be below `tolerance`.
///
/// The tail beyond slot `m` is estimated from the exact tail sums
/// `T1 = sum p` and `T2 = sum p^2`: `sum ln(1 - p) = -T1 - T2 / 2 - e` with
/// `0 <= e <= p_m T2 / (3 (1 - p_m))`. Taking the midpoint of that interval
/// bounds the error by half its width.
pub fn r0_limit(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, tolerance: f64) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if model.is_null() {
        return Ok(0.0);
    }
    let w = params.slot_width();
    let mut sum = 0.0;
    let mut m = 1u64;
    loop {
        let p_m = model.prob_at_slot(w, dead, m)?;
        let tail = model.tail_sum(w, dead, m);
        let square = model.square_tail_sum(w, dead, m);
        let spread = p_m * square / (3.0 * (1.0 - p_m));
        if spread / 2.0 < tolerance {
            return Ok(sum - tail - square / 2.0 - spread / 2.0);
        }
        sum += (-p_m).ln_1p();
        m += 1;
        if m > MAX_SERIES_TERMS {
            return Err(Error::Convergence { terms: MAX_SERIES_TERMS });
        }
    }
}

/// Intercept of the asymptotic log-linear tail, `ln(1 - e^-mu) + mu + R0`.
pub fn tail_intercept(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, tolerance: f64) -> Result<f64> {
    let mu = params.mu_total();
    if !(mu > 0.0) {
        return Err(Error::domain("tail intercept needs a positive Poissonian mean"));
    }
    Ok(params.p_poisson_slot().ln() + mu + r0_limit(params, model, dead, tolerance)?)
}

/// Straight line `-mu n + c` approximating the log waiting probability
/// once afterpulsing has died out.
pub fn linear_tail(mu: f64, c_delta: f64, n: u64) -> Result<f64> {
    check_slot(n)?;
    Ok(-mu * n as f64 + c_delta)
}

/// Waiting distribution tabulated over slots `1..=n_max`, with the
/// probability of no detection within that range.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingPmf {
    log_values: Vec<f64>,
    log_survival: f64,
}

impl WaitingPmf {
    /// Tabulates the distribution in O(n_max).
    pub fn compute(params: &SlotParams, model: &AfterpulseModel, dead: DeadTime, n_max: u64) -> Result<Self> {
        let mu = params.mu_total();
        let w = params.slot_width();
        let mut log_values = Vec::with_capacity(n_max as usize);
        // log of the probability that slots 1..n-1 stayed quiet
        let mut log_quiet = 0.0;
        for n in 1..=n_max {
            let p = model.prob_at_slot(w, dead, n)?;
            let head = fire_prob(mu, p);
            log_values.push(if head > 0.0 { head.ln() + log_quiet } else { f64::NEG_INFINITY });
            log_quiet += -mu + (-p).ln_1p();
        }
        Ok(WaitingPmf { log_values, log_survival: log_quiet })
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    /// Value at slot `n` (1-based).
    pub fn value(&self, n: u64) -> Option<f64> {
        self.log_value(n).map(f64::exp)
    }

    pub fn log_value(&self, n: u64) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.log_values.get(i as usize).copied())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_values.iter().map(|v| v.exp())
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Probability of no detection within the tabulated range.
    pub fn survival(&self) -> f64 {
        self.log_survival.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ExponentialModel, PowerLawModel};
    use crate::params::SlotWidth;

    fn w100() -> SlotWidth {
        SlotWidth::from_ns(100).unwrap()
    }

    fn params(mu: f64) -> SlotParams {
        SlotParams::total(mu, w100()).unwrap()
    }

    /// p_a0 = 0.2 with dt / tau0 = 0.5.
    fn exp_model() -> AfterpulseModel {
        AfterpulseModel::Exponential(ExponentialModel::new(0.2, 200_000.0).unwrap())
    }

    #[test]
    fn geometric_values() {
        assert_eq!(pmf_no_afterpulse(&params(0.0), 5).unwrap(), 0.0);
        let p1 = pmf_no_afterpulse(&params(0.1), 1).unwrap();
        assert!((p1 - 0.095_162_581_964_040_43).abs() < 1e-15);
        let p3 = pmf_no_afterpulse(&params(0.1), 3).unwrap();
        assert!((p3 - 0.095_162_581_964_040_43 * (-0.2f64).exp()).abs() < 1e-15);
        assert!((p3 - 0.077_912_6).abs() < 1e-7);
        assert!(pmf_no_afterpulse(&params(0.1), 0).is_err());
    }

    #[test]
    fn full_pmf_reference_values() {
        let p = params(0.1);
        let v = pmf_full(&p, &exp_model(), DeadTime::NONE, 1).unwrap();
        // Bernoulli enumeration: 1 - P(no Poisson) P(no afterpulse)
        let enumerated = 1.0 - (-0.1f64).exp() * (1.0 - 0.2 * (-0.5f64).exp());
        assert!((v - enumerated).abs() < 1e-15);
        assert!((v - 0.204_924_909_182_842_8).abs() < 1e-12);
        let l = log_pmf_full(&p, &exp_model(), DeadTime::NONE, 1).unwrap();
        assert!((l - (-1.585_111_663_615_785_6)).abs() < 1e-12);
        for n in [1u64, 3, 10] {
            assert!(
                (pmf_full(&p, &AfterpulseModel::Null, DeadTime::slots(4), n).unwrap()
                    - pmf_no_afterpulse(&p, n).unwrap())
                .abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn zero_probability_handling() {
        let p = params(0.0);
        assert_eq!(pmf_full(&p, &AfterpulseModel::Null, DeadTime::NONE, 3).unwrap(), 0.0);
        assert!(matches!(log_pmf_full(&p, &AfterpulseModel::Null, DeadTime::NONE, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_reference_values() {
        let p = params(0.1);
        assert_eq!(residual_term(&p, &exp_model(), DeadTime::NONE, 1).unwrap(), 0.0);
        assert_eq!(residual_term(&p, &AfterpulseModel::Null, DeadTime::NONE, 100).unwrap(), 0.0);
        let r3 = residual_term(&p, &exp_model(), DeadTime::NONE, 3).unwrap();
        let hand = (1.0 - 0.2 * (-0.5f64).exp()).ln() + (1.0 - 0.2 * (-1.0f64).exp()).ln();
        assert!((r3 - hand).abs() < 1e-15);
        assert!((r3 - (-0.205_741_860_051_398_37)).abs() < 1e-12);
    }

    #[test]
    fn r0_reference_values() {
        let p = params(0.1);
        assert_eq!(r0_limit(&p, &AfterpulseModel::Null, DeadTime::NONE, 1e-9).unwrap(), 0.0);
        let r0 = r0_limit(&p, &exp_model(), DeadTime::NONE, 1e-12).unwrap();
        // direct summation of 2000 terms, computed independently
        let direct: f64 = (1..2000).map(|i| (1.0 - 0.2 * (-0.5 * i as f64).exp()).ln()).sum();
        assert!((r0 - direct).abs() < 1e-12);
        assert!((r0 - (-0.320_773_215_223_655_5)).abs() < 1e-12);
        let r0_dead = r0_limit(&p, &exp_model(), DeadTime::slots(2), 1e-12).unwrap();
        assert!(r0_dead > r0);
        assert!(r0_limit(&p, &exp_model(), DeadTime::NONE, 0.0).is_err());
    }

    #[test]
    fn r0_power_law_converges_quickly() {
        let model = AfterpulseModel::PowerLaw(PowerLawModel::new(0.3, 1.5, 1).unwrap());
        let p = params(0.01);
        let r0 = r0_limit(&p, &model, DeadTime::NONE, 1e-10).unwrap();
        // Reference: brute-force 4e6 terms, then -T - T2/2 closes the tail
        // (dominant terms of the logarithm series).
        let n = 4_000_000u64;
        let mut direct = 0.0;
        for k in 1..n {
            direct += (1.0 - 0.3 * ((k + 1) as f64).powf(-1.5)).ln();
        }
        let end = (n + 1) as f64;
        let t1 = 0.3 * (end.powf(-0.5) / 0.5 + 0.5 * end.powf(-1.5));
        let t2 = 0.09 * (end.powf(-2.0) / 2.0);
        direct -= t1 + t2 / 2.0;
        assert!((r0 - direct).abs() < 1e-9, "{r0} vs {direct}");
    }

    #[test]
    fn linear_tail_matches_geometric() {
        let p = params(0.07);
        let c = p.p_poisson_slot().ln() + 0.07;
        for n in [1u64, 5, 40] {
            let exact = pmf_no_afterpulse(&p, n).unwrap().ln();
            assert!((linear_tail(0.07, c, n).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn raw_and_shifted_views_agree() {
        let p = params(0.03);
        let dead = DeadTime::slots(4);
        for n in 1..=4 {
            assert_eq!(pmf_raw(&p, &exp_model(), dead, n).unwrap(), 0.0);
        }
        for n in 5..60 {
            let raw = pmf_raw(&p, &exp_model(), dead, n).unwrap();
            let shifted = pmf_full(&p, &exp_model(), dead, n - 4).unwrap();
            assert_eq!(raw, shifted, "slot {n}");
        }
    }

    #[test]
    fn tabulated_matches_pointwise() {
        let p = params(0.02);
        let dead = DeadTime::slots(1);
        let table = WaitingPmf::compute(&p, &exp_model(), dead, 200).unwrap();
        for n in [1u64, 2, 17, 200] {
            let point = log_pmf_full(&p, &exp_model(), dead, n).unwrap();
            assert!((table.log_value(n).unwrap() - point).abs() < 1e-12);
        }
        let total: f64 = table.values().sum::<f64>() + table.survival();
        assert!((total - 1.0).abs() < 1e-13);
        assert_eq!(table.value(0), None);
        assert_eq!(table.value(201), None);
    }

    #[test]
    fn r0_converges_for_slowly_decaying_power_law() {
        let p = SlotParams::total(0.001, SlotWidth::from_ns(100).unwrap()).unwrap();
        let model = AfterpulseModel::PowerLaw(PowerLawModel::new(0.4, 1.1, 1).unwrap());
        let fine = r0_limit(&p, &model, DeadTime::NONE, 1e-13).unwrap();
        let coarse = r0_limit(&p, &model, DeadTime::NONE, 1e-8).unwrap();
        assert!((fine - coarse).abs() < 1e-8);
        assert!(fine < 0.0);
    }
}
