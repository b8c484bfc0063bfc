//! Shared CLI plumbing: threshold flag parsing, thread-pool setup, and
//! the provenance sidecar every artifact-writing command emits.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use diffi::forest::ThresholdMode;
use diffi::{Error, Result};
use serde::Serialize;

/// Parsed `--threshold` flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec(pub ThresholdMode);

impl FromStr for ThresholdSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parse_value = |v: &str, what: &str| {
            v.parse::<f64>().map_err(|_| format!("{what} {v:?} is not a number"))
        };
        let mode = match s.split_once(':') {
            None => ThresholdMode::fixed(parse_value(s, "threshold")?),
            Some(("fixed", v)) => ThresholdMode::fixed(parse_value(v, "threshold")?),
            Some(("quantile", v)) => ThresholdMode::quantile(parse_value(v, "contamination")?),
            Some((other, _)) => {
                return Err(format!("unknown threshold mode {other:?} (use fixed: or quantile:)"))
            }
        };
        Ok(ThresholdSpec(mode))
    }
}

pub fn init_threads(flag: Option<usize>) {
    let count = flag.or_else(|| {
        std::env::var("DIFFI_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(count) = count {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
}

/// Provenance sidecar: the full configuration that produced an artifact.
/// Timestamps and wall-clock measurements live only here, so the
/// artifacts themselves are byte-identical across reruns with the same
/// configuration.
#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'a str,
    version: &'a str,
    model_format_version: u32,
    subcommand: &'a str,
    config: &'a C,
    unix_timestamp: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<serde_json::Value>,
}

/// Write `<artifact>.provenance.json` next to a file artifact, or
/// `provenance.json` inside a directory artifact.
pub fn write_provenance<C: Serialize>(artifact: &Path, subcommand: &str, config: &C) -> Result<()> {
    write_provenance_with_timing(artifact, subcommand, config, None)
}

pub fn write_provenance_with_timing<C: Serialize>(
    artifact: &Path,
    subcommand: &str,
    config: &C,
    timing: Option<serde_json::Value>,
) -> Result<()> {
    let path: PathBuf = if artifact.is_dir() {
        artifact.join("provenance.json")
    } else {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".provenance.json");
        artifact.with_file_name(name)
    };
    let record = Provenance {
        tool: "diffi",
        version: env!("CARGO_PKG_VERSION"),
        model_format_version: diffi::dataio::MODEL_FORMAT_VERSION,
        subcommand,
        config,
        unix_timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        timing,
    };
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::InvalidData(format!("provenance serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Parse `1,2,5` or `1..4` (inclusive) into k values.
pub fn parse_k_values(text: &str) -> Result<Vec<usize>> {
    let bad = |t: &str| Error::InvalidArgument(format!("bad k value {t:?}"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad(lo))?;
        let hi: usize = hi.trim().parse().map_err(|_| bad(hi))?;
        if lo > hi {
            return Err(Error::InvalidArgument(format!("empty k range {text:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(|_| bad(t))).collect()
}

pub fn delimiter_byte(delimiter: char) -> Result<u8> {
    u8::try_from(delimiter)
        .map_err(|_| Error::InvalidArgument(format!("delimiter {delimiter:?} is not ASCII")))
}
