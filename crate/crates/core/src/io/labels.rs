use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::sim::{Cause, LabeledEvent};

const HEADER: &str = "tick,cause";

pub fn labels_to_csv(events: &[LabeledEvent]) -> String {
    let mut s = String::with_capacity(16 * (events.len() + 1));
    s.push_str(HEADER);
    s.push('\n');
    for e in events {
        let _ = writeln!(s, "{},{}", e.tick, e.cause.as_str());
    }
    s
}

pub fn labels_from_csv(text: &str) -> Result<Vec<LabeledEvent>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(FormatError::Parse { line: 1, msg: format!("expected header {HEADER:?}") }.into()),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(line, l)| {
            let err = |msg: String| FormatError::Parse { line, msg };
            let (tick, cause) = l.split_once(',').ok_or_else(|| err("expected tick,cause".into()))?;
            let tick = tick.parse().map_err(|_| err(format!("bad tick {tick:?}")))?;
            let cause: Cause = cause.parse().map_err(|_| err(format!("bad cause {cause:?}")))?;
            Ok(LabeledEvent { tick, cause })
        })
        .collect()
}

pub fn write_labels_csv(events: &[LabeledEvent], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, labels_to_csv(events))?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledEvent>> {
    labels_from_csv(&std::fs::read_to_string(path)?)
}
