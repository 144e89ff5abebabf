use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::histogram::InterArrivalHistogram;
use crate::params::SlotWidth;

pub const HIST_HEADER: &str = "bin_index,count,bin_lo_ps,bin_hi_ps";

pub fn histogram_to_csv(hist: &InterArrivalHistogram) -> String {
    let mut s = String::with_capacity(32 * (hist.n_bins() + 2));
    s.push_str(HIST_HEADER);
    s.push('\n');
    for bin in 1..=hist.n_bins() as u64 {
        let (lo, hi) = hist.bin_edges_ps(bin);
        let _ = writeln!(s, "{bin},{},{lo},{hi}", hist.count(bin));
    }
    let _ = writeln!(
        s,
        "# total_intervals={} overflow={} bin_width_ps={}",
        hist.total_intervals(),
        hist.overflow(),
        hist.bin_width().ps()
    );
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn field(line: usize, name: &str, raw: &str) -> std::result::Result<u64, FormatError> {
    raw.parse().map_err(|_| parse_err(line, format!("{name} {raw:?} is not an unsigned integer")))
}

/// Parses the CSV form. Rows must list bins 1, 2, ... with edges matching
/// the bin width declared in the trailing comment.
pub fn histogram_from_csv(text: &str) -> Result<InterArrivalHistogram> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h == HIST_HEADER => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected header {HIST_HEADER:?}, found {h:?}")).into()),
        None => return Err(parse_err(1, "empty file").into()),
    }
    let mut rows: Vec<(usize, u64, u64, u64)> = Vec::new();
    let mut meta = None;
    for (n, line) in lines {
        if meta.is_some() {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(n, "content after the metadata comment").into());
        }
        if let Some(rest) = line.strip_prefix('#') {
            meta = Some((n, rest.trim().to_owned()));
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(parse_err(n, format!("expected 4 columns, found {}", cols.len())).into());
        }
        let bin = field(n, "bin_index", cols[0])?;
        if bin != rows.len() as u64 + 1 {
            return Err(parse_err(n, format!("expected bin_index {}, found {bin}", rows.len() + 1)).into());
        }
        rows.push((n, field(n, "count", cols[1])?, field(n, "bin_lo_ps", cols[2])?, field(n, "bin_hi_ps", cols[3])?));
    }
    let (meta_line, meta) = meta.ok_or_else(|| parse_err(text.lines().count() + 1, "missing metadata comment"))?;
    let (mut total, mut overflow, mut width) = (None, None, None);
    for kv in meta.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(meta_line, format!("malformed entry {kv:?}")))?;
        let slot = match k {
            "total_intervals" => &mut total,
            "overflow" => &mut overflow,
            "bin_width_ps" => &mut width,
            other => return Err(parse_err(meta_line, format!("unknown key {other:?}")).into()),
        };
        if slot.replace(field(meta_line, k, v)?).is_some() {
            return Err(parse_err(meta_line, format!("duplicate key {k:?}")).into());
        }
    }
    let missing = |k: &str| parse_err(meta_line, format!("missing {k}"));
    let total = total.ok_or_else(|| missing("total_intervals"))?;
    let overflow = overflow.ok_or_else(|| missing("overflow"))?;
    let width = width.ok_or_else(|| missing("bin_width_ps"))?;
    let width = SlotWidth::from_ps(width).map_err(|_| parse_err(meta_line, "bin_width_ps must be positive"))?;
    let w = width.ps();
    let mut counts = Vec::with_capacity(rows.len());
    for (i, &(n, count, lo, hi)) in rows.iter().enumerate() {
        let i = i as u64;
        if lo != i * w || hi != (i + 1) * w {
            return Err(parse_err(n, format!("edges {lo}..{hi} do not match bin width {w} ps")).into());
        }
        counts.push(count);
    }
    InterArrivalHistogram::from_parts(width, counts, total, overflow)
        .map_err(|_| parse_err(meta_line, "counts plus overflow exceed total_intervals").into())
}

pub fn write_histogram_csv(hist: &InterArrivalHistogram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, histogram_to_csv(hist))?;
    Ok(())
}

pub fn read_histogram_csv(path: impl AsRef<Path>) -> Result<InterArrivalHistogram> {
    histogram_from_csv(&std::fs::read_to_string(path)?)
}
