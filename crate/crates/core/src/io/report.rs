use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bounds::BoundSet;
use crate::error::{FormatError, Result};
use crate::estimation::{EfficiencyEstimate, ExpFitResult, RateSeparation, TailFitResult, TauSweepResult};
use crate::models::AfterpulseModel;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub slot_width_ps: u64,
    pub range_max_ps: u64,
    pub tau_ps: u64,
    pub total_intervals: u64,
    pub overflow_intervals: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_slots: Option<u64>,
}

/// Characterization report. Fields this version does not know about are
/// kept in `extra` and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub input: InputMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tail_fit: TailFitResult,
    pub bounds: BoundSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_fit: Option<ExpFitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_sweep: Option<TauSweepResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateSeparation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<AfterpulseModel>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ReportDocument {
    pub fn new(input: InputMetadata, tail_fit: TailFitResult, bounds: BoundSet) -> Self {
        ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            input,
            seed: None,
            tail_fit,
            bounds,
            exp_fit: None,
            tau_sweep: None,
            rates: None,
            efficiency: None,
            model: None,
            extra: Map::new(),
        }
    }
}

/// serde_json writes non-finite floats as `null`, and every optional field
/// is skipped when absent, so a `null` outside `extra` marks a bad number.
fn find_null(v: &Value, path: &mut String) -> bool {
    match v {
        Value::Null => true,
        Value::Array(items) => items.iter().enumerate().any(|(i, x)| {
            let len = path.len();
            path.push_str(&format!("[{i}]"));
            let found = find_null(x, path);
            if !found {
                path.truncate(len);
            }
            found
        }),
        Value::Object(map) => map.iter().any(|(k, x)| {
            let len = path.len();
            if !path.is_empty() {
                path.push('.');
            }
            path.push_str(k);
            let found = find_null(x, path);
            if !found {
                path.truncate(len);
            }
            found
        }),
        _ => false,
    }
}

pub fn report_to_json(doc: &ReportDocument) -> Result<String> {
    let value = serde_json::to_value(doc).map_err(FormatError::from)?;
    if let Value::Object(map) = &value {
        for (k, v) in map.iter().filter(|(k, _)| !doc.extra.contains_key(*k)) {
            let mut path = k.clone();
            if find_null(v, &mut path) {
                return Err(FormatError::NonFinite(path).into());
            }
        }
    }
    let mut s = serde_json::to_string_pretty(&value).map_err(FormatError::from)?;
    s.push('\n');
    Ok(s)
}

pub fn report_from_json(text: &str) -> Result<ReportDocument> {
    let value: Value = serde_json::from_str(text).map_err(FormatError::from)?;
    let found = value.get("schema_version").and_then(Value::as_u64).unwrap_or(0);
    if found != REPORT_SCHEMA_VERSION as u64 {
        return Err(
            FormatError::Schema { found: found.min(u32::MAX as u64) as u32, expected: REPORT_SCHEMA_VERSION }.into()
        );
    }
    Ok(serde_json::from_value(value).map_err(FormatError::from)?)
}

pub fn write_report(doc: &ReportDocument, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, report_to_json(doc)?)?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    report_from_json(&std::fs::read_to_string(path)?)
}
