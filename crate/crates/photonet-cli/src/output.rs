//! Output files: CSV tables and text reports, written atomically
//! (temp-then-rename) with a provenance comment header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use photonet_core::fitting::{SpectrumConfig, SpectrumSet};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    /// One column per series.
    #[default]
    Csv,
    /// Script-friendly triplets: x, series, value.
    Long,
}

/// Provenance stamped at the top of every output file.
#[derive(Debug, Clone)]
pub struct FileStamp {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl FileStamp {
    pub fn header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# photonet v{}\n# config_hash={}\n# seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            seed
        )
    }
}

pub struct OutputWriter {
    dir: PathBuf,
    stamp: FileStamp,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl OutputWriter {
    pub fn new(dir: &Path, stamp: FileStamp, format: OutputFormat) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::validation(format!("cannot create output directory {}: {e}", dir.display()))
        })?;
        Ok(Self { dir: dir.to_path_buf(), stamp, format, written: Vec::new() })
    }

    pub fn written_files(&self) -> &[PathBuf] {
        &self.written
    }

    fn write_atomic(&mut self, name: &str, content: &str) -> CliResult<PathBuf> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, content)?;
        fs::rename(&tmp, &target)?;
        self.written.push(target.clone());
        Ok(target)
    }

    /// Write a table; the first column is the independent variable used
    /// as the x-key in long format.
    pub fn write_table(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> CliResult<PathBuf> {
        let mut text = self.stamp.header();
        match self.format {
            OutputFormat::Csv => {
                let _ = writeln!(text, "{}", columns.join(","));
                for row in rows {
                    let _ = writeln!(text, "{}", row.join(","));
                }
            }
            OutputFormat::Long => {
                let _ = writeln!(text, "{},series,value", columns[0]);
                for row in rows {
                    for (j, value) in row.iter().enumerate().skip(1) {
                        let _ = writeln!(text, "{},{},{}", row[0], columns[j], value);
                    }
                }
            }
        }
        self.write_atomic(name, &text)
    }

    /// Write a plain-text report under the provenance header.
    pub fn write_report(&mut self, name: &str, body: &str) -> CliResult<PathBuf> {
        let mut text = self.stamp.header();
        text.push_str(body);
        if !body.ends_with('\n') {
            text.push('\n');
        }
        self.write_atomic(name, &text)
    }

    /// Export a spectrum set: detuning column plus one column per
    /// configuration label (always wide CSV, the fitter reads it back).
    pub fn write_spectra(&mut self, name: &str, set: &SpectrumSet) -> CliResult<PathBuf> {
        let mut text = self.stamp.header();
        let _ = writeln!(text, "# noise_sigma={}", set.noise_sigma);
        let labels: Vec<&str> = set.curves.iter().map(|(c, _)| c.as_str()).collect();
        let _ = writeln!(text, "detuning_ghz,{}", labels.join(","));
        for (i, &x) in set.probe.iter().enumerate() {
            let mut row = x.to_string();
            for (_, curve) in &set.curves {
                let _ = write!(row, ",{}", curve[i]);
            }
            let _ = writeln!(text, "{row}");
        }
        self.write_atomic(name, &text)
    }
}

/// Read a detection record from CSV (`time_ns,detector` rows with `D1` /
/// `D2` labels, `#` comments and a header row allowed). Events are
/// re-sorted by time on construction.
pub fn read_record(path: &Path) -> CliResult<photonet_core::counting::DetectionRecord> {
    use photonet_core::counting::{DetectionEvent, Detector};
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut events = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (time, detector) = (fields.next(), fields.next());
        let (Some(time), Some(detector), None) = (time, detector, fields.next()) else {
            return Err(CliError::validation(format!(
                "{}:{}: expected 'time_ns,detector'",
                path.display(),
                lineno + 1
            )));
        };
        if time == "time_ns" {
            continue; // header row
        }
        let time_ns: f64 = time.parse().map_err(|_| {
            CliError::validation(format!("{}:{}: bad time '{time}'", path.display(), lineno + 1))
        })?;
        let detector = match detector {
            "D1" => Detector::D1,
            "D2" => Detector::D2,
            other => {
                return Err(CliError::validation(format!(
                    "{}:{}: unknown detector '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        events.push(DetectionEvent { time_ns, detector });
    }
    Ok(photonet_core::counting::DetectionRecord::new(events))
}

/// Read a spectrum set written by [`OutputWriter::write_spectra`] (or any
/// CSV with a detuning column, one column per configuration label, and
/// optional `#` comments).
pub fn read_spectra(path: &Path) -> CliResult<SpectrumSet> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut noise_sigma = 0.0;
    let mut header: Option<Vec<SpectrumConfig>> = None;
    let mut probe = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("noise_sigma=") {
                noise_sigma = v.trim().parse().unwrap_or(0.0);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => {
                if fields.len() < 2 {
                    return Err(CliError::validation(format!(
                        "{}:{}: need a detuning column and at least one curve",
                        path.display(),
                        lineno + 1
                    )));
                }
                let configs = fields[1..]
                    .iter()
                    .map(|label| SpectrumConfig::parse(label))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| {
                        CliError::validation(format!("{}:{}: {e}", path.display(), lineno + 1))
                    })?;
                columns = vec![Vec::new(); configs.len()];
                header = Some(configs);
            }
            Some(configs) => {
                if fields.len() != configs.len() + 1 {
                    return Err(CliError::validation(format!(
                        "{}:{}: expected {} fields",
                        path.display(),
                        lineno + 1,
                        configs.len() + 1
                    )));
                }
                let parse = |s: &str, col: usize| -> CliResult<f64> {
                    s.parse().map_err(|_| {
                        CliError::validation(format!(
                            "{}:{}: field {} is not a number",
                            path.display(),
                            lineno + 1,
                            col + 1
                        ))
                    })
                };
                probe.push(parse(fields[0], 0)?);
                for (j, field) in fields[1..].iter().enumerate() {
                    columns[j].push(parse(field, j + 1)?);
                }
            }
        }
    }
    let configs = header
        .ok_or_else(|| CliError::validation(format!("{}: no header row", path.display())))?;
    Ok(SpectrumSet {
        probe,
        curves: configs.into_iter().zip(columns).collect(),
        noise_sigma,
    })
}
