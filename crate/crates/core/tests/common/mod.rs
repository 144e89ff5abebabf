#![allow(dead_code)]

use afterpulse::histogram::build_histogram;
use afterpulse::sim::{simulate, to_timetags, LabeledEvent, SimConfig, StopCondition};
use afterpulse::waiting::WaitingPmf;
use afterpulse::{AfterpulseModel, DeadTime, InterArrivalHistogram, SlotParams, SlotWidth};

/// Pseudo-count scale for noise-free histograms.
pub const SCALE: f64 = 1e18;

pub fn w100() -> SlotWidth {
    SlotWidth::from_ns(100).unwrap()
}

pub fn exp_model(p_a0: f64, tau0_us: f64) -> AfterpulseModel {
    AfterpulseModel::exponential(p_a0, tau0_us * 1e6).unwrap()
}

/// Exact waiting distribution laid out the way simulated data is binned:
/// waiting slot `m` in bin `m + n_dead + 1`.
pub fn pseudo_histogram(
    params: &SlotParams,
    model: &AfterpulseModel,
    dead: DeadTime,
    n_bins: usize,
    scale: f64,
) -> InterArrivalHistogram {
    let offset = dead.n_slots() as usize + 1;
    let pmf = WaitingPmf::compute(params, model, dead, (n_bins - offset) as u64).unwrap();
    let mut counts = vec![0u64; n_bins];
    for (c, v) in counts[offset..].iter_mut().zip(pmf.values()) {
        *c = (v * scale).round() as u64;
    }
    let in_range: u64 = counts.iter().sum();
    let total = scale as u64;
    InterArrivalHistogram::from_parts(params.slot_width(), counts, total, total.saturating_sub(in_range)).unwrap()
}

pub struct Dataset {
    pub events: Vec<LabeledEvent>,
    pub hist: InterArrivalHistogram,
}

impl Dataset {
    /// Fraction of waiting periods that ended in an afterpulse or a
    /// coincidence.
    pub fn afterpulse_fraction(&self) -> f64 {
        let n = self.events.len() - 1;
        self.events[1..].iter().filter(|e| e.cause.has_afterpulse()).count() as f64 / n as f64
    }
}

/// Simulates `intervals` waiting periods and bins them up to `range_us`.
pub fn simulated(
    mu: f64,
    model: AfterpulseModel,
    dead_slots: u64,
    seed: u64,
    intervals: u64,
    range_us: u64,
) -> Dataset {
    let params = SlotParams::total(mu, w100()).unwrap();
    let config =
        SimConfig::new(params, model, DeadTime::slots(dead_slots), seed, StopCondition::Events(intervals + 1)).unwrap();
    let events = simulate(&config).unwrap();
    let tags = to_timetags(&events, w100(), 100_000).unwrap();
    let hist = build_histogram(&tags, w100(), range_us * 1_000_000).unwrap();
    Dataset { events, hist }
}
