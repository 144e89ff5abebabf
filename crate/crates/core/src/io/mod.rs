//! On-disk formats.
//!
//! - Tag files: a 20-byte header (`TTG1`, version u16, tick resolution in
//!   femtoseconds u64, six zero bytes) followed by absolute u64 ticks, all
//!   little-endian.
//! - Histogram CSV: one row per bin and a trailing `#` metadata line.
//! - Reports: versioned JSON with unit-suffixed field names.
//! - Label CSV: simulator ground truth, `tick,cause` per event.

mod hist_csv;
mod labels;
mod report;
mod tags;

pub use hist_csv::{histogram_from_csv, histogram_to_csv, read_histogram_csv, write_histogram_csv, HIST_HEADER};
pub use labels::{labels_from_csv, labels_to_csv, read_labels_csv, write_labels_csv};
pub use report::{
    read_report, report_from_json, report_to_json, write_report, InputMetadata, ReportDocument, REPORT_SCHEMA_VERSION,
};
pub use tags::{
    parse_tags, read_tags, write_tags, write_tags_to, TagFileHeader, TagReader, HEADER_LEN, TAG_MAGIC, TAG_VERSION,
};
