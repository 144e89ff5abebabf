use std::fmt::Write as _;
use std::path::Path;

use afterpulse::estimation::{
    afterpulse_excess, bound_afterpulsing, efficiency_from_rates, fit_exponential, fit_tail, rates_from_mu, sweep_tau,
    ExpFitOptions, SlotOrigin, TailFitOptions,
};
use afterpulse::histogram::build_histogram_chunked;
use afterpulse::io::{
    read_histogram_csv, read_report, read_tags, write_histogram_csv, write_labels_csv, write_report, write_tags,
    InputMetadata, ReportDocument,
};
use afterpulse::models::ExponentialModel;
use afterpulse::sim::{simulate, to_timetags, Cause, SimConfig, StopCondition};
use afterpulse::{AfterpulseModel, DeadTime, SlotParams, SlotWidth};
use serde::Deserialize;

use crate::args::{AnalyzeArgs, ApModel, Emit, OptimizeArgs, PlotArgs, SimulateArgs};
use crate::error::{CliError, CliResult};

const HIST_CHUNK: usize = 1 << 16;

fn us_to_ps(name: &str, us: f64) -> CliResult<u64> {
    if !(us.is_finite() && us >= 0.0) || us * 1e6 > u64::MAX as f64 {
        return Err(CliError::usage(format!("--{name} must be a non-negative number of microseconds")));
    }
    Ok((us * 1e6).round() as u64)
}

fn log(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("{}", msg.as_ref());
    }
}

/// Simulation parameters as read from `--config`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationFile {
    source_rate_hz: f64,
    dark_rate_hz: f64,
    slot_ps: u64,
    #[serde(default = "null_model")]
    model: AfterpulseModel,
    #[serde(default)]
    dead_slots: u64,
    events: u64,
}

fn null_model() -> AfterpulseModel {
    AfterpulseModel::Null
}

fn simulation_from_flags(a: &SimulateArgs) -> CliResult<(SlotParams, AfterpulseModel, DeadTime, u64)> {
    let w = SlotWidth::from_ns(a.slot_ns)?;
    let params = SlotParams::from_rates(a.rate_source_hz, a.rate_dark_hz, w)?;
    let model = match a.ap_model {
        ApModel::None => AfterpulseModel::Null,
        ApModel::Exponential => {
            let (Some(p0), Some(tau0)) = (a.ap_p0, a.ap_tau0_us) else {
                return Err(CliError::usage("--ap-model exponential needs --ap-p0 and --ap-tau0-us"));
            };
            AfterpulseModel::exponential(p0, tau0 * 1e6)?
        }
    };
    let dead = DeadTime::from_ps(us_to_ps("dead-us", a.dead_us)?, w);
    Ok((params, model, dead, a.events))
}

pub fn simulate_cmd(a: &SimulateArgs, seed: u64, verbose: bool) -> CliResult<String> {
    let (params, model, dead, events) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path)(e.into()))?;
            let f: SimulationFile =
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let w = SlotWidth::from_ps(f.slot_ps)?;
            (
                SlotParams::from_rates(f.source_rate_hz, f.dark_rate_hz, w)?,
                f.model,
                DeadTime::slots(f.dead_slots),
                f.events,
            )
        }
        None => simulation_from_flags(a)?,
    };
    let w = params.slot_width();
    if a.tick_ps == 0 {
        return Err(CliError::usage("--tick-ps must be positive"));
    }
    let config = SimConfig::new(params, model, dead, seed, StopCondition::Events(events))?;
    log(
        verbose,
        format!("simulating {events} events, mu = {:e} per slot, {} dead slots", params.mu_total(), dead.n_slots()),
    );
    let ev = simulate(&config)?;
    let stream = to_timetags(&ev, w, a.tick_ps * 1_000)?;
    write_tags(&stream, &a.out).map_err(CliError::file(&a.out))?;
    if let Some(path) = &a.labels {
        write_labels_csv(&ev, path).map_err(CliError::file(path))?;
    }

    let mut s = String::new();
    let _ = writeln!(s, "events: {}", ev.len());
    let span = stream.duration_secs();
    let _ = writeln!(s, "duration_s: {span}");
    if span > 0.0 {
        let _ = writeln!(s, "mean_rate_hz: {}", (ev.len() - 1) as f64 / span);
    }
    for cause in [Cause::Source, Cause::Dark, Cause::Afterpulse, Cause::Coincident] {
        let _ = writeln!(s, "{}: {}", cause.as_str(), ev.iter().filter(|e| e.cause == cause).count());
    }
    Ok(s)
}

fn parse_sweep(spec: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::usage(format!("--sweep-tau expects start:stop:step in microseconds, got {spec:?}"));
    let parts: Vec<f64> =
        spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as u64;
    (0..=n).map(|k| us_to_ps("sweep-tau", start + k as f64 * step)).collect()
}

pub fn analyze_cmd(a: &AnalyzeArgs, verbose: bool) -> CliResult<String> {
    let w = SlotWidth::from_ns(a.bin_ns)?;
    let range_ps = us_to_ps("range-us", a.range_us)?;
    let tau_ps = us_to_ps("tau-us", a.tau_us)?;
    let origin = match a.origin_bin {
        Some(0) => return Err(CliError::usage("--origin-bin counts from 1")),
        Some(b) => SlotOrigin::Offset(b - 1),
        None => SlotOrigin::FirstOccupied,
    };
    let taus = a.sweep_tau.as_deref().map(parse_sweep).transpose()?;

    let stream = read_tags(&a.input).map_err(CliError::file(&a.input))?;
    let hist = build_histogram_chunked(&stream, w, range_ps, HIST_CHUNK)?;
    log(verbose, format!("{} intervals, {} beyond {range_ps} ps", hist.total_intervals(), hist.overflow()));

    let options = TailFitOptions { weighted: a.weighted, origin };
    let tail = fit_tail(&hist, [tau_ps, range_ps], options)?;
    let mut bounds = bound_afterpulsing(&tail)?;
    let excess = afterpulse_excess(&hist, &tail);
    bounds.per_slot_ap_upper =
        Some(excess.iter().take_while(|e| e.slot < tail.fit_window_slots[0]).map(|e| e.value).collect());
    log(verbose, format!("tail fit over slots {:?}, {} bins", tail.fit_window_slots, tail.bins_used));

    let dead = match a.dead_ns {
        Some(ns) => Some(DeadTime::from_ps(ns * 1_000, w)),
        None => a.fit_exp.then(|| DeadTime::slots(tail.slot_offset.saturating_sub(1))),
    };
    let input = InputMetadata {
        file: Some(a.input.display().to_string()),
        slot_width_ps: w.ps(),
        range_max_ps: range_ps,
        tau_ps,
        total_intervals: hist.total_intervals(),
        overflow_intervals: hist.overflow(),
        dead_slots: dead.map(DeadTime::n_slots),
    };
    let mut doc = ReportDocument::new(input, tail.clone(), bounds);

    if let Some(taus) = taus {
        doc.tau_sweep = Some(sweep_tau(&hist, &taus, options)?);
    }
    if a.fit_exp {
        let region = if a.fit_exp_joint { [0, range_ps] } else { [0, tau_ps] };
        let fit = fit_exponential(
            &hist,
            &tail,
            region,
            dead.unwrap_or_default(),
            ExpFitOptions { refine_mu: a.fit_exp_joint },
        )?;
        if fit.at_boundary {
            eprintln!("warning: exponential fit ended on the edge of its search box");
        }
        doc.model = fit.model().ok();
        doc.exp_fit = Some(fit);
    }
    if let Some(dark) = a.dark_mu {
        let rates = rates_from_mu(dark, tail.mu_hat_per_slot);
        if rates.clamped {
            eprintln!("warning: dark mean exceeds the fitted total; source mean clamped to 0");
        }
        if let Some(rate) = a.source_rate_hz {
            doc.efficiency = Some(efficiency_from_rates(&rates, w, rate)?);
        }
        doc.rates = Some(rates);
    }

    write_report(&doc, &a.report).map_err(CliError::file(&a.report))?;
    if let Some(path) = &a.hist {
        write_histogram_csv(&hist, path).map_err(CliError::file(path))?;
    }

    let mut s = String::new();
    let _ = writeln!(s, "intervals: {}", hist.total_intervals());
    let _ = writeln!(s, "mu_hat_per_slot: {}", tail.mu_hat_per_slot);
    let _ = writeln!(s, "poisson_rate_hz: {}", tail.mu_hat_per_slot / w.secs());
    let _ = writeln!(s, "c_delta_hat: {}", tail.c_delta_hat);
    let _ = writeln!(s, "pa_upper: {}{}", doc.bounds.pa_upper, if doc.bounds.clamped { " (clamped)" } else { "" });
    let _ = writeln!(s, "n_ap_per_trigger_upper: {}", doc.bounds.n_ap_per_trigger_upper);
    if let Some(sw) = &doc.tau_sweep {
        match sw.plateau_tau_ps {
            Some(t) => _ = writeln!(s, "plateau_tau_us: {}", t as f64 / 1e6),
            None => _ = writeln!(s, "plateau_tau_us: none"),
        }
    }
    if let Some(f) = &doc.exp_fit {
        let _ = writeln!(s, "p_a0_hat: {}", f.p_a0_undelayed_hat);
        let _ = writeln!(s, "tau0_hat_us: {}", f.tau0_hat_ps / 1e6);
    }
    if let Some(e) = &doc.efficiency {
        let _ = writeln!(s, "efficiency: {}", e.eta);
    }
    Ok(s)
}

pub fn optimize_cmd(a: &OptimizeArgs) -> CliResult<String> {
    let w = SlotWidth::from_ns(a.slot_ns)?;
    let tau0_ps = a.ap_tau0_us * 1e6;
    let model = match (a.ap_p0, a.ap_total, a.at_dead_us) {
        (Some(p0), _, _) => ExponentialModel::new(p0, tau0_ps)?,
        (None, Some(total), Some(at)) => {
            ExponentialModel::calibrate(total, DeadTime::from_ps(us_to_ps("at-dead-us", at)?, w), tau0_ps, w)?
        }
        _ => return Err(CliError::usage("give either --ap-p0 or --ap-total with --at-dead-us")),
    };
    let dead = model.min_dead_time_for_target(w, a.target)?;
    let achieved = model.total_prob_with_dead(dead, w)?;
    let mut s = String::new();
    let _ = writeln!(s, "p_a0: {}", model.p_a0());
    let _ = writeln!(s, "dead_slots: {}", dead.n_slots());
    let _ = writeln!(s, "dead_time_us: {}", dead.duration_ps(w) as f64 / 1e6);
    let _ = writeln!(s, "achieved_total: {achieved}");
    Ok(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn plot_cmd(a: &PlotArgs) -> CliResult<String> {
    let doc = read_report(&a.report).map_err(CliError::file(&a.report))?;
    let hist = read_histogram_csv(&a.hist).map_err(CliError::file(&a.hist))?;
    if hist.bin_width().ps() != doc.tail_fit.slot_width_ps {
        return Err(CliError::usage(format!(
            "{} uses {} ps bins but the report was fitted with {} ps",
            a.hist.display(),
            hist.bin_width().ps(),
            doc.tail_fit.slot_width_ps
        )));
    }
    if hist.total_intervals() != doc.input.total_intervals {
        return Err(CliError::usage(format!(
            "{} holds {} intervals but the report describes {}",
            a.hist.display(),
            hist.total_intervals(),
            doc.input.total_intervals
        )));
    }
    let fit = &doc.tail_fit;
    let [first, last] = fit.fit_window_slots;
    let mut s = String::from("time_us,empirical_log_pmf,fitted_line,excess_bound\n");
    for e in afterpulse_excess(&hist, fit) {
        let count = hist.count(e.bin);
        let keep = match a.emit {
            Emit::WaitingPmf => true,
            Emit::TailFit => (first..=last).contains(&e.slot) && count > 0,
            Emit::Excess => e.slot < first,
        };
        if !keep {
            continue;
        }
        let empirical = (count > 0).then(|| hist.probability(e.bin).ln());
        let time_us = hist.bin_edges_ps(e.bin).0 as f64 / 1e6;
        let _ = writeln!(s, "{time_us},{},{},{}", fmt_opt(empirical), fit.line(e.slot), e.value);
    }
    Ok(s)
}

pub fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::file(p)(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
