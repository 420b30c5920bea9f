//! The `spectrum`, `stirap`, `oracle` and `sweep` subcommands.

use std::path::Path;

use cdm_eit::observables::{spectrum_partial, stirap, SpectrumPlan, SpectrumResult};
use cdm_eit::oracle::{oracle_table, write_oracle_csv, OracleParams};
use cdm_eit::{Error, KernelMode};
use serde_json::json;

use crate::config::{Command, Config, SweepAxis};
use crate::output::{write_json, write_summary, write_with, Manifest, MetricsFile, RunRecord, Status, SummaryRow};

/// How a run ended, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// At least one run failed for a reason other than convergence.
    Failed,
    Convergence,
    PartialSweep,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Failed => 1,
            Outcome::Convergence => 3,
            Outcome::PartialSweep => 4,
        }
    }

    fn of_error(e: &Error) -> Self {
        match e.root() {
            Error::NotConverged { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::TooManySteps { .. }
            | Error::NonFinite { .. } => Outcome::Convergence,
            _ => Outcome::Failed,
        }
    }

    /// The more severe of the two; convergence trumps other failures.
    fn worst(self, other: Self) -> Self {
        let rank = |o: Self| match o {
            Outcome::Success => 0,
            Outcome::Failed => 1,
            Outcome::Convergence => 2,
            Outcome::PartialSweep => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

const SPECTRAL_MODES: [KernelMode; 2] = [KernelMode::Scalar, KernelMode::None];

fn mark_failed(dir: &Path, e: &Error) -> anyhow::Result<()> {
    log::error!("{}: {e}", dir.display());
    write_with(&dir.join("FAILED"), |out| {
        use std::io::Write;
        writeln!(out, "{e}")
    })
}

/// Runs one spectrum into `out/rel`, keeping whatever completed.
fn spectrum_into(
    plan: &SpectrumPlan<f64>,
    out: &Path,
    rel: &str,
    axis_value: Option<f64>,
) -> anyhow::Result<(RunRecord, Option<SpectrumResult<f64>>, Option<Error>)> {
    let dir = out.join(rel);
    log::info!(
        "{rel}: {} mode, N = {}, {} grid points",
        plan.params.kernel_mode,
        plan.cloud.atom_count(),
        plan.delta1_grid.len()
    );
    let partial = spectrum_partial(plan)?;
    if let Some(r) = &partial.result {
        write_with(&dir.join("spectrum.csv"), |w| r.write_csv(w))?;
        write_json(&dir.join("metrics.json"), &MetricsFile::new(r, axis_value))?;
    }
    if let Some(e) = &partial.failure {
        mark_failed(&dir, e)?;
    }
    let record = RunRecord {
        mode: Some(plan.params.kernel_mode),
        axis_value,
        output_dir: rel.to_string(),
        status: if partial.failure.is_some() { Status::Failed } else { Status::Ok },
        error: partial.failure.as_ref().map(|e| e.to_string()),
        seeds: partial.result.as_ref().map(|r| r.seeds.clone()).unwrap_or_default(),
        diagnostics: json!(partial.result.as_ref().map(|r| &r.diagnostics)),
    };
    Ok((record, partial.result, partial.failure))
}

pub fn run_spectrum(config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    config.validate(Command::Spectrum)?;
    let mut manifest = Manifest::new(Command::Spectrum, config);
    let mut outcome = Outcome::Success;
    for mode in config.modes_or(&SPECTRAL_MODES) {
        let plan = config.spectrum_plan(config.cloud_spec(), mode);
        let (record, result, failure) = spectrum_into(&plan, out, mode.name(), None)?;
        if let Some(r) = &result {
            match r.window_metrics() {
                Ok(m) => log::info!("{mode}: FWHM {:.6}, T_min {:.6}", m.fwhm, m.t_min),
                Err(e) => log::info!("{mode}: {e}"),
            }
        }
        if let Some(e) = &failure {
            outcome = outcome.worst(Outcome::of_error(e));
        }
        manifest.runs.push(record);
    }
    manifest.write(out)?;
    Ok(outcome)
}

pub fn run_sweep(config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    config.validate(Command::Sweep)?;
    let mut manifest = Manifest::new(Command::Sweep, config);
    let mut rows = Vec::new();
    let mut failed = 0;
    let axis = config.sweep.axis;
    let axis_name = match axis {
        SweepAxis::Density => "density",
        SweepAxis::Thickness => "thickness_kl",
    };
    for mode in config.modes_or(&SPECTRAL_MODES) {
        for &value in &config.sweep.values {
            let mut cloud = config.cloud_spec();
            match axis {
                SweepAxis::Density => cloud.density = value,
                SweepAxis::Thickness => cloud.thickness_kl = value,
            }
            let plan = config.spectrum_plan(cloud, mode);
            let rel = format!("{}/{axis_name}={value}", mode.name());
            let (record, result, failure) = spectrum_into(&plan, out, &rel, Some(value))?;
            match (&result, &failure) {
                (Some(r), None) => rows.push(SummaryRow::from_result(value, r)),
                _ => {
                    failed += 1;
                    rows.push(SummaryRow::failed(value, mode));
                }
            }
            manifest.runs.push(record);
        }
    }
    write_with(&out.join("summary.csv"), |w| write_summary(&rows, w))?;
    manifest.write(out)?;
    if failed > 0 {
        log::error!("{failed} of {} sweep points failed", rows.len());
        return Ok(Outcome::PartialSweep);
    }
    Ok(Outcome::Success)
}

pub fn run_stirap(config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    config.validate(Command::Stirap)?;
    let mut manifest = Manifest::new(Command::Stirap, config);
    let mut outcome = Outcome::Success;
    for mode in config.modes_or(&KernelMode::ALL) {
        let plan = config.stirap_plan(mode);
        plan.validate()?;
        let rel = mode.name();
        let dir = out.join(rel);
        log::info!("{rel}: N = {}, {} realizations", plan.cloud.atom_count(), plan.realizations);
        let record = match stirap(&plan) {
            Ok(r) => {
                write_with(&dir.join("stirap.csv"), |w| r.write_csv(w))?;
                let [s11, s22, s33] = r.final_populations;
                log::info!("{rel}: final mean s11 = {:e}", s11.mean);
                RunRecord {
                    mode: Some(mode),
                    axis_value: None,
                    output_dir: rel.to_string(),
                    status: Status::Ok,
                    error: None,
                    seeds: r.seeds.clone(),
                    diagnostics: json!({
                        "final_s11": s11,
                        "final_s22": s22,
                        "final_s33": s33,
                        "final_s11_per_realization": r.final_s11,
                        "realizations": r.diagnostics,
                    }),
                }
            }
            Err(e) => {
                mark_failed(&dir, &e)?;
                outcome = outcome.worst(Outcome::of_error(&e));
                RunRecord {
                    mode: Some(mode),
                    axis_value: None,
                    output_dir: rel.to_string(),
                    status: Status::Failed,
                    error: Some(e.to_string()),
                    seeds: Vec::new(),
                    diagnostics: serde_json::Value::Null,
                }
            }
        };
        manifest.runs.push(record);
    }
    manifest.write(out)?;
    Ok(outcome)
}

pub fn run_oracle(config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    config.validate(Command::Oracle)?;
    let cloud = config.cloud_spec();
    let base = OracleParams {
        lambda: config.params(KernelMode::None),
        atom_count: cloud.atom_count(),
        radius_kr: cloud.radius_kr,
        thickness_kl: cloud.thickness_kl,
    };
    let rows = oracle_table(&base, &config.delta1_grid())?;
    write_with(&out.join("oracle.csv"), |w| write_oracle_csv(&rows, w))?;
    let mut manifest = Manifest::new(Command::Oracle, config);
    manifest.runs.push(RunRecord {
        mode: None,
        axis_value: None,
        output_dir: String::new(),
        status: Status::Ok,
        error: None,
        seeds: Vec::new(),
        diagnostics: json!({ "atom_count": base.atom_count }),
    });
    manifest.write(out)?;
    Ok(Outcome::Success)
}
