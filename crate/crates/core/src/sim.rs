//! Exact event-stream simulation of the slotted detector model.
//!
//! After each detection the detector is blind for `n_dead` slots; from then
//! on waiting slot `m` fires with probability `1 - e^-mu (1 - P_a,dead(m))`.
//! Instead of flipping one coin per slot, the simulator draws the first
//! Poissonian slot (geometric) and the first afterpulse slot (inverted from
//! the cumulative survival table) and takes the earlier of the two, which
//! has the same law. Afterpulse state resets on every detection.
//!
//! The generator is ChaCha8 seeded through `seed_from_u64`; a given seed
//! and configuration always yields the same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::AfterpulseModel;
use crate::params::{DeadTime, SlotParams, SlotWidth};
use crate::stream::TimeTagStream;

/// Afterpulse mass below which the survival table stops growing.
const TABLE_TAIL: f64 = 1e-17;
const TABLE_MAX: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    /// Stop after this many recorded detections.
    Events(u64),
    /// Stop before the first detection beyond this slot.
    Slots(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: SlotParams,
    pub model: AfterpulseModel,
    pub dead: DeadTime,
    pub seed: u64,
    pub stop: StopCondition,
}

impl SimConfig {
    pub fn new(
        params: SlotParams,
        model: AfterpulseModel,
        dead: DeadTime,
        seed: u64,
        stop: StopCondition,
    ) -> Result<Self> {
        let target = match stop {
            StopCondition::Events(n) | StopCondition::Slots(n) => n,
        };
        if target == 0 {
            return Err(Error::domain("stop target must be positive"));
        }
        model.prob_at_slot(params.slot_width(), dead, 1)?;
        Ok(SimConfig { params, model, dead, seed, stop })
    }
}

/// What actually arrived in the slot that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Source,
    Dark,
    Afterpulse,
    /// A Poissonian arrival and an afterpulse in the same slot.
    Coincident,
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::Source => "source",
            Cause::Dark => "dark",
            Cause::Afterpulse => "afterpulse",
            Cause::Coincident => "coincident",
        }
    }

    /// Afterpulse or coincidence: an afterpulse was present.
    pub fn has_afterpulse(self) -> bool {
        matches!(self, Cause::Afterpulse | Cause::Coincident)
    }
}

impl std::str::FromStr for Cause {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Cause::Source),
            "dark" => Ok(Cause::Dark),
            "afterpulse" => Ok(Cause::Afterpulse),
            "coincident" => Ok(Cause::Coincident),
            other => Err(Error::domain(format!("unknown cause {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvent {
    /// Slot index since stream start.
    pub tick: u64,
    pub cause: Cause,
}

/// Inverse-CDF sampler for the first afterpulse slot.
struct AfterpulseSampler<'a> {
    model: &'a AfterpulseModel,
    slot_width: SlotWidth,
    dead: DeadTime,
    /// `log_survival[m-1] = sum_{i<=m} ln(1 - P(i))`
    log_survival: Vec<f64>,
}

impl<'a> AfterpulseSampler<'a> {
    fn new(model: &'a AfterpulseModel, slot_width: SlotWidth, dead: DeadTime) -> Result<Self> {
        let mut log_survival = Vec::new();
        if !model.is_null() {
            let mut acc = 0.0;
            let mut m = 1u64;
            loop {
                acc += (-model.prob_at_slot(slot_width, dead, m)?).ln_1p();
                log_survival.push(acc);
                if model.tail_sum(slot_width, dead, m + 1) < TABLE_TAIL || log_survival.len() >= TABLE_MAX {
                    break;
                }
                m += 1;
            }
        }
        Ok(AfterpulseSampler { model, slot_width, dead, log_survival })
    }

    /// First slot `<= limit` whose survival drops below `u`, or `None` when
    /// no afterpulse arrives at or before `limit`.
    fn first_slot(&self, ln_u: f64, limit: u64) -> Result<Option<u64>> {
        let idx = self.log_survival.partition_point(|&l| l >= ln_u);
        if idx < self.log_survival.len() {
            let m = idx as u64 + 1;
            return Ok((m <= limit).then_some(m));
        }
        // Beyond the table: step until the slot is found, the limit is
        // reached, or the remaining mass cannot reach u.
        let mut m = self.log_survival.len() as u64;
        let mut acc = self.log_survival.last().copied().unwrap_or(0.0);
        while m < limit {
            let next = m + 1;
            let p = self.model.prob_at_slot(self.slot_width, self.dead, next)?;
            let tail = self.model.tail_sum(self.slot_width, self.dead, next);
            if ln_u < acc - tail / (1.0 - p) {
                return Ok(None);
            }
            acc += (-p).ln_1p();
            m = next;
            if acc < ln_u {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }
}

/// Generates a labelled detection stream. Slot 0 acts as an unrecorded
/// trigger so the first recorded interval already follows the model.
pub fn simulate(config: &SimConfig) -> Result<Vec<LabeledEvent>> {
    let mu = config.params.mu_total();
    let source_share = if mu > 0.0 { config.params.mu_s() / mu } else { 0.0 };
    let sampler = AfterpulseSampler::new(&config.model, config.params.slot_width(), config.dead)?;
    let has_afterpulse = !config.model.is_null();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut events = Vec::new();
    if let StopCondition::Events(n) = config.stop {
        events.reserve(n.min(1 << 24) as usize);
    }
    let mut last = 0u64;

    loop {
        if let StopCondition::Events(n) = config.stop {
            if events.len() as u64 >= n {
                break;
            }
        }
        // First slot with a Poissonian arrival: P(G > k) = e^{-mu k}.
        let poisson = if mu > 0.0 {
            let e: f64 = rng.sample(Exp1);
            let g = (e / mu).floor();
            (g < 1e18).then(|| g as u64 + 1)
        } else {
            None
        };
        let afterpulse = if has_afterpulse {
            let u: f64 = 1.0 - rng.random::<f64>();
            sampler.first_slot(u.ln(), poisson.unwrap_or(u64::MAX))?
        } else {
            None
        };
        let (waiting, cause) = match (poisson, afterpulse) {
            (None, None) => break,
            (Some(g), Some(a)) if a == g => (g, Cause::Coincident),
            (_, Some(a)) => (a, Cause::Afterpulse),
            (Some(g), None) => {
                let source = rng.random::<f64>() < source_share;
                (g, if source { Cause::Source } else { Cause::Dark })
            }
        };
        let Some(tick) = last.checked_add(config.dead.n_slots() + waiting) else {
            break;
        };
        if let StopCondition::Slots(limit) = config.stop {
            if tick > limit {
                break;
            }
        }
        events.push(LabeledEvent { tick, cause });
        last = tick;
    }
    Ok(events)
}

/// Converts slot indices to time tags at `tick_resolution_fs`.
pub fn to_timetags(events: &[LabeledEvent], slot_width: SlotWidth, tick_resolution_fs: u64) -> Result<TimeTagStream> {
    if tick_resolution_fs == 0 {
        return Err(Error::domain("tick resolution must be positive"));
    }
    let slot_fs = slot_width.ps() as u128 * 1_000;
    if !slot_fs.is_multiple_of(tick_resolution_fs as u128) {
        return Err(Error::domain(format!(
            "tick resolution {tick_resolution_fs} fs does not divide the slot width {} ps",
            slot_width.ps()
        )));
    }
    let factor = u64::try_from(slot_fs / tick_resolution_fs as u128)
        .map_err(|_| Error::domain("slot width too large for tick resolution"))?;
    let ticks = events
        .iter()
        .map(|e| e.tick.checked_mul(factor).ok_or_else(|| Error::domain("tick overflow")))
        .collect::<Result<Vec<_>>>()?;
    TimeTagStream::new(tick_resolution_fs, ticks)
}

/// Waiting slots (gap minus dead time) between consecutive events.
pub fn waiting_slots(events: &[LabeledEvent], dead: DeadTime) -> impl Iterator<Item = u64> + '_ {
    events.windows(2).map(move |w| w[1].tick - w[0].tick - dead.n_slots())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ExponentialModel;

    fn w100() -> SlotWidth {
        SlotWidth::from_ns(100).unwrap()
    }

    fn config(mu: f64, model: AfterpulseModel, dead: u64, seed: u64, n: u64) -> SimConfig {
        let params = SlotParams::new(mu * 0.25, mu * 0.75, w100()).unwrap();
        SimConfig::new(params, model, DeadTime::slots(dead), seed, StopCondition::Events(n)).unwrap()
    }

    #[test]
    fn zero_rate_gives_empty_stream() {
        let c = config(0.0, AfterpulseModel::Null, 0, 1, 100);
        assert!(simulate(&c).unwrap().is_empty());
    }

    #[test]
    fn zero_stop_target_rejected() {
        let params = SlotParams::total(0.01, w100()).unwrap();
        assert!(SimConfig::new(params, AfterpulseModel::Null, DeadTime::NONE, 0, StopCondition::Events(0)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let model = AfterpulseModel::Exponential(ExponentialModel::new(0.03, 1_660_000.0).unwrap());
        let a = simulate(&config(0.002, model.clone(), 1, 7, 5_000)).unwrap();
        let b = simulate(&config(0.002, model.clone(), 1, 7, 5_000)).unwrap();
        let c = simulate(&config(0.002, model, 1, 8, 5_000)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dead_time_respected() {
        let model = AfterpulseModel::Exponential(ExponentialModel::new(0.5, 300_000.0).unwrap());
        let ev = simulate(&config(0.05, model, 3, 3, 20_000)).unwrap();
        assert!(ev.windows(2).all(|w| w[1].tick - w[0].tick >= 4));
        assert!(ev.iter().any(|e| e.cause == Cause::Coincident));
        assert!(ev.iter().any(|e| e.cause == Cause::Afterpulse));
    }

    #[test]
    fn slot_stop_condition() {
        let params = SlotParams::total(0.01, w100()).unwrap();
        let c =
            SimConfig::new(params, AfterpulseModel::Null, DeadTime::NONE, 5, StopCondition::Slots(100_000)).unwrap();
        let ev = simulate(&c).unwrap();
        assert!(ev.last().unwrap().tick <= 100_000);
        // ~1000 expected
        assert!((800..1200).contains(&ev.len()));
    }

    #[test]
    fn source_dark_split_follows_means() {
        let ev = simulate(&config(0.01, AfterpulseModel::Null, 0, 11, 40_000)).unwrap();
        let source = ev.iter().filter(|e| e.cause == Cause::Source).count() as f64;
        let frac = source / ev.len() as f64;
        // 0.25 expected, binomial sd ~0.002
        assert!((frac - 0.25).abs() < 0.012, "{frac}");
    }

    #[test]
    fn timetag_conversion() {
        let ev = [LabeledEvent { tick: 3, cause: Cause::Dark }, LabeledEvent { tick: 10, cause: Cause::Source }];
        let s = to_timetags(&ev, w100(), 100_000).unwrap();
        assert_eq!(s.ticks(), &[3000, 10000]);
        assert!(matches!(to_timetags(&ev, w100(), 82_000), Err(Error::Domain(_))));
    }

    #[test]
    fn sampler_table_and_stepping_agree() {
        let model = AfterpulseModel::Exponential(ExponentialModel::new(0.2, 200_000.0).unwrap());
        let sampler = AfterpulseSampler::new(&model, w100(), DeadTime::NONE).unwrap();
        let stepper = AfterpulseSampler {
            log_survival: Vec::new(),
            ..AfterpulseSampler::new(&model, w100(), DeadTime::NONE).unwrap()
        };
        for i in 1..400 {
            let ln_u = -(i as f64) * 0.0009;
            assert_eq!(sampler.first_slot(ln_u, 1000).unwrap(), stepper.first_slot(ln_u, 1000).unwrap(), "ln_u={ln_u}");
        }
    }
}
