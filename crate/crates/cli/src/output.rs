//! Output files: manifest, metrics and summary tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use cdm_eit::cloud::DetectorDisk;
use cdm_eit::observables::{SpectrumResult, WindowMetrics};
use cdm_eit::params::LambdaParams;
use cdm_eit::{CloudSpec, KernelMode};
use serde::Serialize;

use crate::config::{Command, Config};

/// Bumped whenever a file layout changes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

/// Writes `bytes` to `path` through a buffered file.
pub fn write_with<F>(path: &Path, f: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    f(&mut out).with_context(|| format!("writing {}", path.display()))?;
    out.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One spectrum, STIRAP run or oracle table.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub mode: Option<KernelMode>,
    pub axis_value: Option<f64>,
    /// Relative to the output directory.
    pub output_dir: String,
    pub status: Status,
    pub error: Option<String>,
    pub seeds: Vec<u64>,
    pub diagnostics: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub command: Command,
    pub code_version: &'static str,
    pub rng_algorithm: &'static str,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub master_seed: u64,
    pub config: &'a Config,
    pub runs: Vec<RunRecord>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: Command, config: &'a Config) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            code_version: env!("CARGO_PKG_VERSION"),
            rng_algorithm: cdm_eit::seeds::RNG_ALGORITHM,
            started_at: timestamp(),
            finished_at: String::new(),
            threads: rayon::current_num_threads(),
            master_seed: config.ensemble.master_seed,
            config,
            runs: Vec::new(),
        }
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<()> {
        self.finished_at = timestamp();
        write_json(&dir.join("manifest.json"), &self)
    }
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsFile {
    pub mode: KernelMode,
    pub axis_value: Option<f64>,
    pub n_realizations: usize,
    /// Realizations whose own curve has no transparency window.
    pub failed_realizations: usize,
    /// Width of the mean curve's window.
    pub fwhm: Option<f64>,
    /// Standard error of the per-realization widths.
    pub fwhm_stderr: Option<f64>,
    pub fwhm_realization_mean: Option<f64>,
    pub t_peak: Option<f64>,
    pub peak_detuning: Option<f64>,
    pub t_min: Option<f64>,
    pub t_min_stderr: Option<f64>,
    pub t_min_realization_mean: Option<f64>,
    pub valley_detunings: Option<[f64; 2]>,
    pub valley_values: Option<[f64; 2]>,
    pub half_level: Option<f64>,
    /// Why the mean curve has no window, when it has none.
    pub window_error: Option<String>,
    pub params: LambdaParams<f64>,
    pub cloud: CloudSpec,
    pub detector: DetectorDisk<f64>,
    pub seeds: Vec<u64>,
}

impl MetricsFile {
    pub fn new(result: &SpectrumResult<f64>, axis_value: Option<f64>) -> Self {
        let summary = result.summary();
        let window = result.window_metrics();
        let w: Option<&WindowMetrics<f64>> = window.as_ref().ok();
        Self {
            mode: result.plan.params.kernel_mode,
            axis_value,
            n_realizations: summary.n_realizations,
            failed_realizations: summary.failed_realizations,
            fwhm: w.map(|m| m.fwhm),
            fwhm_stderr: summary.fwhm.and_then(|s| s.stderr),
            fwhm_realization_mean: summary.fwhm.map(|s| s.mean),
            t_peak: w.map(|m| m.t_peak),
            peak_detuning: w.map(|m| m.peak_detuning),
            t_min: w.map(|m| m.t_min),
            t_min_stderr: summary.t_min.and_then(|s| s.stderr),
            t_min_realization_mean: summary.t_min.map(|s| s.mean),
            valley_detunings: w.map(|m| m.valley_detunings),
            valley_values: w.map(|m| m.valley_values),
            half_level: w.map(|m| m.half_level),
            window_error: window.as_ref().err().map(|e| e.to_string()),
            params: result.plan.params,
            cloud: result.plan.cloud,
            detector: result.plan.detector,
            seeds: result.seeds.clone(),
        }
    }
}

/// One row of `summary.csv`.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub axis_value: f64,
    pub mode: KernelMode,
    pub fwhm: Option<(f64, Option<f64>)>,
    pub t_min: Option<(f64, Option<f64>)>,
}

impl SummaryRow {
    pub fn from_result(axis_value: f64, result: &SpectrumResult<f64>) -> Self {
        let s = result.summary();
        Self {
            axis_value,
            mode: result.plan.params.kernel_mode,
            fwhm: s.fwhm.map(|e| (e.mean, e.stderr)),
            t_min: s.t_min.map(|e| (e.mean, e.stderr)),
        }
    }

    pub fn failed(axis_value: f64, mode: KernelMode) -> Self {
        Self { axis_value, mode, fwhm: None, t_min: None }
    }
}

/// CSV with columns `axis_value,fwhm_mean,fwhm_stderr,tmin_mean,tmin_stderr,mode`;
/// missing values are empty fields.
pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    fn field(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    writeln!(out, "axis_value,fwhm_mean,fwhm_stderr,tmin_mean,tmin_stderr,mode")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.axis_value,
            field(r.fwhm.map(|f| f.0)),
            field(r.fwhm.and_then(|f| f.1)),
            field(r.t_min.map(|f| f.0)),
            field(r.t_min.and_then(|f| f.1)),
            r.mode.name()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_layout() {
        let rows = [
            SummaryRow {
                axis_value: 0.01,
                mode: KernelMode::Scalar,
                fwhm: Some((0.2, Some(0.01))),
                t_min: Some((0.5, None)),
            },
            SummaryRow::failed(0.002, KernelMode::None),
        ];
        let mut buf = Vec::new();
        write_summary(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "axis_value,fwhm_mean,fwhm_stderr,tmin_mean,tmin_stderr,mode\n0.01,0.2,0.01,0.5,,scalar\n0.002,,,,,none\n"
        );
    }
}
