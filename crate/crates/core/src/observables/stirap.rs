//! Disorder-averaged STIRAP transfer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::CloudSpec;
use crate::dynamics::{integrate, write_trajectory_csv, Drive, EnsembleState, StirapSchedule, Tolerances, TrajectorySample};
use crate::error::{Error, Result};
use crate::kernel::build_matrices;
use crate::num::Real;
use crate::params::LambdaParams;
use crate::seeds::realization_seed;

use super::stats::{ensemble_stats, EnsembleStats};

/// Default end of the run (units of 1/Γ). The populations keep settling for a while
/// after the pulses end at `t₀ + t_r`.
pub const DEFAULT_STIRAP_T_END: f64 = 200.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapPlan<T> {
    pub cloud: CloudSpec<T>,
    /// `omega1` and `omega2` are ignored; the schedule supplies them.
    pub params: LambdaParams<T>,
    pub schedule: StirapSchedule<T>,
    pub t_end: T,
    pub sample_times: Vec<T>,
    pub realizations: usize,
    pub master_seed: u64,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> StirapPlan<T> {
    /// Reference schedule, one realization, samples every `1/Γ` up to
    /// [`DEFAULT_STIRAP_T_END`].
    pub fn new(cloud: CloudSpec<T>, params: LambdaParams<T>) -> Self {
        let t_end = T::lit(DEFAULT_STIRAP_T_END);
        Self {
            cloud,
            params,
            schedule: StirapSchedule::reference(),
            t_end,
            sample_times: unit_samples(t_end),
            realizations: 1,
            master_seed: 0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        self.tolerances.validate()?;
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "need at least one realization"));
        }
        if !(self.t_end > T::zero()) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample_times", "must be strictly ascending"));
        }
        if self.sample_times.iter().any(|&s| s < T::zero() || s > self.t_end) {
            return Err(Error::invalid("sample_times", "must lie in [0, t_end]"));
        }
        Ok(())
    }
}

/// `0, 1, …, ⌊t_end⌋`, plus `t_end` itself when it is not an integer.
pub fn unit_samples<T: Real>(t_end: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let t = T::from_usize_lossy(i);
        if t > t_end {
            break;
        }
        out.push(t);
        i += 1;
    }
    if out.last() != Some(&t_end) {
        out.push(t_end);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapDiagnostics {
    pub index: usize,
    pub seed: u64,
    pub atom_count: usize,
    pub rhs_evals: usize,
    pub rejected_steps: usize,
    pub max_trace_error: f64,
    pub worst_physicality_excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StirapRealization<T> {
    pub samples: Vec<TrajectorySample<T>>,
    /// Ensemble-mean `[σ₁₁, σ₂₂, σ₃₃]` at `t_end`.
    pub final_populations: [T; 3],
    pub diagnostics: StirapDiagnostics,
}

pub fn run_stirap_realization<T: Real>(plan: &StirapPlan<T>, index: usize) -> Result<StirapRealization<T>> {
    let seed = realization_seed(plan.master_seed, index as u64);
    let tag = |e: Error| Error::Task {
        realization: index,
        delta1: plan.params.delta1.to_f64_lossy(),
        source: Box::new(e),
    };
    let cloud = plan.cloud.sample(seed).map_err(tag)?;
    let n = cloud.atom_count();
    let matrices = build_matrices(&cloud, &plan.params).map_err(tag)?;
    let tr = integrate(
        &EnsembleState::ground(n),
        &cloud,
        &matrices,
        &plan.params,
        Drive::Stirap(plan.schedule),
        plan.t_end,
        &plan.sample_times,
        plan.tolerances,
    )
    .map_err(tag)?;
    let max_trace_error = tr
        .samples
        .iter()
        .map(|s| s.trace_error.to_f64_lossy())
        .fold(0.0, f64::max);
    Ok(StirapRealization {
        final_populations: tr.final_state.mean_populations(),
        diagnostics: StirapDiagnostics {
            index,
            seed,
            atom_count: n,
            rhs_evals: tr.stats.rhs_evals,
            rejected_steps: tr.stats.rejected,
            max_trace_error,
            worst_physicality_excess: tr.worst_physicality_excess.to_f64_lossy(),
        },
        samples: tr.samples,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StirapResult<T> {
    pub plan: StirapPlan<T>,
    pub seeds: Vec<u64>,
    /// Realization average of the ensemble means; `trace_error` is the worst over
    /// realizations.
    pub samples: Vec<TrajectorySample<T>>,
    /// Final ensemble-mean `σ₁₁` of each realization.
    pub final_s11: Vec<T>,
    pub final_populations: [EnsembleStats<T>; 3],
    pub diagnostics: Vec<StirapDiagnostics>,
}

/// Runs all realizations of `plan` in parallel; the averaging order is by index.
pub fn stirap<T: Real>(plan: &StirapPlan<T>) -> Result<StirapResult<T>> {
    plan.validate()?;
    let runs: Vec<StirapRealization<T>> = (0..plan.realizations)
        .into_par_iter()
        .map(|i| run_stirap_realization(plan, i))
        .collect::<Result<_>>()?;
    Ok(StirapResult::from_realizations(plan.clone(), runs))
}

impl<T: Real> StirapResult<T> {
    pub fn from_realizations(plan: StirapPlan<T>, runs: Vec<StirapRealization<T>>) -> Self {
        let count = T::from_usize_lossy(runs.len());
        let samples = (0..plan.sample_times.len())
            .map(|k| {
                let mut acc = runs[0].samples[k];
                acc.trace_error = T::zero();
                let (mut a, mut b, mut c) = (T::zero(), T::zero(), T::zero());
                for r in &runs {
                    let s = &r.samples[k];
                    a = a + s.mean_s11;
                    b = b + s.mean_s22;
                    c = c + s.mean_s33;
                    acc.trace_error = acc.trace_error.max(s.trace_error);
                }
                acc.mean_s11 = a / count;
                acc.mean_s22 = b / count;
                acc.mean_s33 = c / count;
                acc
            })
            .collect();
        let column = |i: usize| {
            let v: Vec<T> = runs.iter().map(|r| r.final_populations[i]).collect();
            ensemble_stats(&v).expect("at least one realization")
        };
        let final_populations = [column(0), column(1), column(2)];
        Self {
            seeds: runs.iter().map(|r| r.diagnostics.seed).collect(),
            final_s11: runs.iter().map(|r| r.final_populations[0]).collect(),
            diagnostics: runs.into_iter().map(|r| r.diagnostics).collect(),
            samples,
            final_populations,
            plan,
        }
    }

    /// CSV with columns `t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        write_trajectory_csv(&self.samples, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelMode;

    #[test]
    fn sample_grid() {
        assert_eq!(unit_samples(3.0), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(unit_samples(1.5), vec![0.0, 1.0, 1.5]);
    }

    #[test]
    fn no_drive_no_transfer() {
        let mut plan = StirapPlan::new(CloudSpec::new(3.0, 3.0, 0.1), LambdaParams::eit().with_mode(KernelMode::Scalar));
        plan.schedule.omega_max = 0.0;
        plan.t_end = 20.0;
        plan.sample_times = unit_samples(20.0);
        plan.realizations = 2;
        let r = stirap(&plan).unwrap();
        assert_eq!(r.final_s11, vec![1.0, 1.0]);
        assert!(r.samples.iter().all(|s| s.mean_s11 == 1.0));
    }

    #[test]
    fn averaging_is_by_index() {
        let mut plan = StirapPlan::new(CloudSpec::new(3.0, 3.0, 0.1), LambdaParams::eit());
        plan.t_end = 30.0;
        plan.sample_times = unit_samples(30.0);
        plan.realizations = 3;
        plan.master_seed = 5;
        let r = stirap(&plan).unwrap();
        let runs: Vec<_> = (0..3).map(|i| run_stirap_realization(&plan, i).unwrap()).collect();
        let last = |i: usize| runs[i].samples.last().unwrap().mean_s11;
        let expected = (0.0 + last(0) + last(1) + last(2)) / 3.0;
        assert_eq!(r.samples.last().unwrap().mean_s11, expected);
        assert_eq!(r.seeds, (0..3).map(|i| realization_seed(5, i)).collect::<Vec<_>>());
    }
}
