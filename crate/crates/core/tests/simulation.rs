use afterpulse::bounds::cumulative_bounds;
use afterpulse::histogram::build_histogram;
use afterpulse::models::ExponentialModel;
use afterpulse::sim::{simulate, to_timetags, waiting_slots, Cause, SimConfig, StopCondition};
use afterpulse::waiting::WaitingPmf;
use afterpulse::{AfterpulseModel, DeadTime, InterArrivalHistogram, SlotParams, SlotWidth};
use rayon::prelude::*;

fn w100() -> SlotWidth {
    SlotWidth::from_ns(100).unwrap()
}

fn exp_model() -> AfterpulseModel {
    AfterpulseModel::Exponential(ExponentialModel::new(0.03, 1_660_000.0).unwrap())
}

fn config(mu: f64, model: AfterpulseModel, dead: u64, seed: u64, events: u64) -> SimConfig {
    let params = SlotParams::new(mu / 3.0, 2.0 * mu / 3.0, w100()).unwrap();
    SimConfig::new(params, model, DeadTime::slots(dead), seed, StopCondition::Events(events)).unwrap()
}

#[test]
fn null_model_matches_geometric_pmf() {
    let mu = 0.05;
    let c = config(mu, AfterpulseModel::Null, 0, 42, 1_000_001);
    let ev = simulate(&c).unwrap();
    let tags = to_timetags(&ev, w100(), 100_000).unwrap();
    let hist = build_histogram(&tags, w100(), 100_000_000).unwrap();
    assert_eq!(hist.total_intervals(), 1_000_000);
    let pmf = WaitingPmf::compute(&c.params, &c.model, c.dead, 999).unwrap();
    let n = hist.total_intervals() as f64;
    let mut checked = 0;
    for m in 1..=999u64 {
        let expected = n * pmf.value(m).unwrap();
        if expected < 100.0 {
            continue;
        }
        checked += 1;
        // waiting slot m lands in bin m + 1 without dead time
        let z = (hist.count(m + 1) as f64 - expected) / expected.sqrt();
        assert!(z.abs() < 5.0, "slot {m}: z = {z}");
    }
    assert!(checked > 100);
}

#[test]
fn per_slot_firing_frequency() {
    let mu = 0.0015;
    let c = config(mu, exp_model(), 1, 7, 1_000_001);
    let ev = simulate(&c).unwrap();
    let waits: Vec<u64> = waiting_slots(&ev, c.dead).collect();
    let max = 2000usize;
    let mut fired = vec![0u64; max + 2];
    for &m in &waits {
        fired[(m as usize).min(max + 1)] += 1;
    }
    let mut visits = waits.len() as u64;
    for m in 1..=max as u64 {
        if visits < 100 {
            break;
        }
        let p = c.model.prob_at_slot(w100(), c.dead, m).unwrap();
        let q = 1.0 - (-mu).exp() * (1.0 - p);
        let v = visits as f64;
        let z = (fired[m as usize] as f64 - v * q) / (v * q * (1.0 - q)).sqrt();
        assert!(z.abs() < 5.0, "slot {m}: z = {z}");
        visits -= fired[m as usize];
    }
}

#[test]
fn label_fractions_match_cumulative_series() {
    let mu = 0.001;
    let c = config(mu, exp_model(), 1, 99, 1_000_001);
    let ev = simulate(&c).unwrap();
    let series = cumulative_bounds(&c.params, &c.model, c.dead, 1e-12).unwrap().series.unwrap();
    let n = (ev.len() - 1) as f64;
    // every event after the first starts one waiting period
    let ap_only = ev[1..].iter().filter(|e| e.cause == Cause::Afterpulse).count() as f64 / n;
    let ap_any = ev[1..].iter().filter(|e| e.cause.has_afterpulse()).count() as f64 / n;
    let sd = |p: f64| (p * (1.0 - p) / n).sqrt();
    assert!((ap_only - series.afterpulse_lower).abs() < 3.0 * sd(series.afterpulse_lower), "{ap_only} vs {series:?}");
    assert!((ap_any - series.afterpulse_upper).abs() < 3.0 * sd(series.afterpulse_upper), "{ap_any} vs {series:?}");
}

#[test]
fn source_and_dark_share_follows_means() {
    let c = config(0.003, AfterpulseModel::Null, 2, 5, 200_001);
    let ev = simulate(&c).unwrap();
    let source = ev.iter().filter(|e| e.cause == Cause::Source).count() as f64 / ev.len() as f64;
    let sd = (1.0 / 3.0 * 2.0 / 3.0 / ev.len() as f64).sqrt();
    assert!((source - 1.0 / 3.0).abs() < 5.0 * sd);
}

#[test]
fn timetag_histogram_equals_slot_gap_histogram() {
    let c = config(0.002, exp_model(), 3, 11, 100_000);
    let ev = simulate(&c).unwrap();
    let tags = to_timetags(&ev, w100(), 1_000).unwrap();
    let from_tags = build_histogram(&tags, w100(), 20_000_000).unwrap();
    let mut counts = vec![0u64; 200];
    let mut overflow = 0;
    for pair in ev.windows(2) {
        let gap = pair[1].tick - pair[0].tick;
        // gap of g slots covers [g w, (g + 1) w): bin g + 1
        match counts.get_mut(gap as usize) {
            Some(c) => *c += 1,
            None => overflow += 1,
        }
    }
    let direct = InterArrivalHistogram::from_parts(w100(), counts, ev.len() as u64 - 1, overflow).unwrap();
    assert_eq!(from_tags, direct);
    assert_eq!(from_tags.first_occupied_bin(), Some(5));
}

#[test]
fn parallel_streams_are_reproducible() {
    let seeds: Vec<u64> = (0..8).collect();
    let run = |s: &u64| simulate(&config(0.002, exp_model(), 1, *s, 20_000)).unwrap();
    let parallel: Vec<_> = seeds.par_iter().map(run).collect();
    let serial: Vec<_> = seeds.iter().map(run).collect();
    assert_eq!(parallel, serial);
    assert!(parallel.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn slot_target_stops_in_range() {
    let params = SlotParams::total(0.002, w100()).unwrap();
    let c = SimConfig::new(params, exp_model(), DeadTime::slots(1), 3, StopCondition::Slots(1_000_000)).unwrap();
    let ev = simulate(&c).unwrap();
    assert!(ev.last().unwrap().tick <= 1_000_000);
    assert!(ev.windows(2).all(|w| w[1].tick - w[0].tick >= 2));
}
