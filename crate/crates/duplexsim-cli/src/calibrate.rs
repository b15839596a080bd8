//! Channel calibration against measured ratio sweeps.

use std::path::Path;

use thiserror::Error;

use duplexsim::channel::{calibrate, CalibrationReport, ChannelError, DuplexMode};

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("targets file has no usable (read_ratio, gbps) rows")]
    Empty,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("failed to serialize preset: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Reads `(read_ratio, gbps)` pairs from a CSV file. A header row is
/// accepted and skipped when the first field does not parse as a number.
pub fn read_targets(path: &Path) -> Result<Vec<(f64, f64)>, CalibrateError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut targets = Vec::new();
    for record in reader.records() {
        let r = record?;
        if r.len() < 2 {
            continue;
        }
        match (r[0].trim().parse::<f64>(), r[1].trim().parse::<f64>()) {
            (Ok(ratio), Ok(gbps)) => targets.push((ratio, gbps)),
            _ => continue, // header or comment row
        }
    }
    if targets.is_empty() {
        return Err(CalibrateError::Empty);
    }
    Ok(targets)
}

/// Fits a channel to the targets and renders a preset file: a bare channel
/// table that a node section can reference via `channel_file = "..."`.
pub fn calibrate_preset(
    name: &str,
    targets: &[(f64, f64)],
    mode: DuplexMode,
) -> Result<(CalibrationReport, String), CalibrateError> {
    let report = calibrate(targets, mode)?;
    let mut text = String::new();
    text.push_str(&format!("# preset '{name}' fitted to {} targets\n", targets.len()));
    text.push_str(&format!(
        "# max relative residual {:.2}%  sse {:.3e}\n",
        report.max_abs_rel_err * 100.0,
        report.sse
    ));
    for (i, &(ratio, gbps)) in targets.iter().enumerate() {
        text.push_str(&format!(
            "#   r={ratio:.2}: target {gbps:.1} GB/s, fitted residual {:+.2}%\n",
            report.per_target_rel_err[i] * 100.0
        ));
    }
    text.push('\n');
    text.push_str(&toml::to_string(&report.config)?);
    Ok((report, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn targets_csv_round_trip() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "read_ratio,gbps").unwrap();
        writeln!(file, "0.0,35.9").unwrap();
        writeln!(file, "0.55,57.8").unwrap();
        writeln!(file, "1.0,48.0").unwrap();
        let targets = read_targets(file.path()).unwrap();
        assert_eq!(targets, vec![(0.0, 35.9), (0.55, 57.8), (1.0, 48.0)]);
    }

    #[test]
    fn preset_file_is_a_loadable_channel_table() {
        let targets = [(0.0, 35.9), (0.55, 57.8), (1.0, 48.0)];
        let (report, text) = calibrate_preset("cxl-fit", &targets, DuplexMode::FullDuplex).unwrap();
        assert!(report.max_abs_rel_err < 0.10);
        let cfg: duplexsim::channel::ChannelConfig = toml::from_str(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg, report.config);
    }

    #[test]
    fn empty_targets_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "read_ratio,gbps").unwrap();
        assert!(matches!(read_targets(file.path()), Err(CalibrateError::Empty)));
    }
}
