pub mod classify;
pub mod explore;
pub mod forecast;
pub mod ingest;
pub mod report;
pub mod simulate;

use std::path::Path;

use chainpulse::ingest::{load_block_csv, SplitSpec};
use chainpulse::BlockSeries;

use crate::error::{CliError, CliResult};
use crate::output::Outputs;

/// Loads a block CSV, registering it as an input and logging validation findings.
pub(crate) fn load_blocks(path: &Path, outputs: &mut Outputs) -> CliResult<BlockSeries> {
    outputs.input(path);
    let loaded = load_block_csv(path)?;
    for m in &loaded.report.messages {
        log::warn!("{}: {m}", path.display());
    }
    Ok(loaded.series)
}

/// `"0.7,0.15,0.15"` as train/test/validation fractions.
pub(crate) fn parse_split(s: &str) -> Result<SplitSpec, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: '{p}'")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] => SplitSpec::new(*a, *b, *c).map_err(|e| e.to_string()),
        _ => Err(format!("expected three comma-separated fractions, got {}", parts.len())),
    }
}

/// Comma-separated list of numbers.
pub(crate) fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: '{p}'"))).collect()
}

/// File-name-safe rendering of a label such as `BTC.com` or `?`.
pub(crate) fn slug(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    if s.chars().all(|c| c == '_') {
        "unknown".to_string()
    } else {
        s
    }
}

pub(crate) fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub(crate) fn require<T>(v: Option<T>, flag: &str, why: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::usage(format!("{flag} is required {why}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("0.7,0.15,0.15").unwrap().counts(80_408), (56_286, 12_061, 12_061));
        assert!(parse_split("0.7,0.3").is_err());
        assert!(parse_split("0.7,x,0.1").is_err());
        assert!(parse_split("0.9,0.9,0.9").is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("BTC.com"), "BTC_com");
        assert_eq!(slug("?"), "unknown");
        assert_eq!(slug("F2Pool"), "F2Pool");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let b = csv_bytes(&["a", "b"], &[vec!["x,y".into(), "1".into()]]);
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\n\"x,y\",1\n");
    }
}
