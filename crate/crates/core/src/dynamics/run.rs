//! Time evolution of an ensemble and steady-state search.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::cloud::CloudGeometry;
use crate::error::{Error, Result};
use crate::kernel::InteractionMatrices;
use crate::num::Real;
use crate::params::LambdaParams;

use super::drive::Drive;
use super::equations::EnsembleSystem;
use super::integrator::{Dopri5, Observer, OdeSystem, StepStats, Tolerances};
use super::state::{max_abs, physicality_excess, EnsembleState, BLOCKS, S11, S22};

/// Tolerance on `σ₃₃ < 0` and `|σ_ab| > 1` before a physicality warning is logged.
pub const PHYSICALITY_SLACK: f64 = 1e-6;

/// One row of a trajectory: ensemble means and the drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample<T> {
    pub t: T,
    pub mean_s11: T,
    pub mean_s22: T,
    pub mean_s33: T,
    pub omega1: T,
    pub omega2: T,
    /// `max |σ₁₁ + σ₂₂ + σ₃₃ − 1|` over atoms.
    pub trace_error: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<TrajectorySample<T>>,
    pub final_state: EnsembleState<T>,
    pub stats: StepStats,
    /// Worst physicality excess seen at accepted steps.
    pub worst_physicality_excess: T,
}

impl<T: Real> Trajectory<T> {
    /// CSV with columns `t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        write_trajectory_csv(&self.samples, out)
    }
}

pub fn write_trajectory_csv<T: Real, W: std::io::Write>(
    samples: &[TrajectorySample<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.t, s.mean_s11, s.mean_s22, s.mean_s33, s.omega1, s.omega2
        )?;
    }
    Ok(())
}

fn trace_error<T: Real>(n: usize, y: &[T]) -> T {
    let mut worst = T::zero();
    for j in 0..n {
        let (a, b) = (y[S11 * n + j], y[S22 * n + j]);
        let s33 = T::one() - (a + b);
        worst = worst.max((a + b + s33 - T::one()).abs());
    }
    worst
}

struct TrajectoryObserver<'p, T> {
    n: usize,
    params: &'p LambdaParams<T>,
    drive: Drive<T>,
    samples: Vec<TrajectorySample<T>>,
    worst: T,
}

impl<T: Real> Observer<T> for TrajectoryObserver<'_, T> {
    fn sample(&mut self, t: T, y: &[T]) {
        let state = EnsembleState::from_flat(self.n, t, y.to_vec());
        let [m11, m22, m33] = state.mean_populations();
        let (omega1, omega2) = self.drive.rabi(t, self.params);
        self.samples.push(TrajectorySample {
            t,
            mean_s11: m11,
            mean_s22: m22,
            mean_s33: m33,
            omega1,
            omega2,
            trace_error: trace_error(self.n, y),
        });
    }

    fn step(&mut self, t: T, y: &[T], _dydt: &[T]) -> ControlFlow<()> {
        let excess = physicality_excess(self.n, y);
        if excess > T::lit(PHYSICALITY_SLACK) && excess > self.worst.max(T::lit(PHYSICALITY_SLACK)) * T::lit(2.0) {
            log::warn!("unphysical state at t = {t}: bound exceeded by {excess:e}");
        }
        self.worst = self.worst.max(excess);
        ControlFlow::Continue(())
    }
}

/// Integrates from `state` to `t_end`, reporting ensemble means at `sample_times`.
///
/// The run is split at the drive's breakpoints so that no step straddles a kink or a
/// jump of the Rabi frequencies.
pub fn integrate<T: Real>(
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    matrices: &InteractionMatrices<T>,
    params: &LambdaParams<T>,
    drive: Drive<T>,
    t_end: T,
    sample_times: &[T],
    tolerances: Tolerances<T>,
) -> Result<Trajectory<T>> {
    params.validate()?;
    tolerances.validate()?;
    if let Drive::Stirap(s) = &drive {
        s.validate()?;
    }
    let n = cloud.atom_count();
    if state.atom_count() != n {
        return Err(Error::SizeMismatch { expected: n, found: state.atom_count() });
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sample_times", "must be sorted ascending"));
    }
    let mut sys = EnsembleSystem::new(cloud, matrices, params, drive)?;
    let mut solver = Dopri5::new(tolerances);
    let mut observer = TrajectoryObserver {
        n,
        params,
        drive,
        samples: Vec::with_capacity(sample_times.len()),
        worst: state.physicality_excess().max(T::lit(-1.0)),
    };

    let mut y = state.as_slice().to_vec();
    let mut t = state.time;
    let mut stats = StepStats::default();
    let mut cuts: Vec<T> = drive
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t && b < t_end)
        .collect();
    cuts.push(t_end);

    for (i, &stop) in cuts.iter().enumerate() {
        // Samples exactly at an interior cut belong to the following segment.
        let seg_samples: Vec<T> = sample_times
            .iter()
            .copied()
            .filter(|&s| if i + 1 == cuts.len() { s >= t && s <= stop } else { s >= t && s < stop })
            .collect();
        if stop > t {
            let out = solver.integrate(&mut sys, t, &mut y, stop, &seg_samples, &mut observer)?;
            stats.accepted += out.stats.accepted;
            stats.rejected += out.stats.rejected;
            stats.rhs_evals += out.stats.rhs_evals;
            t = out.t;
            solver.reset_step();
        } else {
            for s in seg_samples {
                observer.sample(s, &y);
            }
        }
    }

    Ok(Trajectory {
        samples: observer.samples,
        final_state: EnsembleState::from_flat(n, t, y),
        stats,
        worst_physicality_excess: observer.worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions<T> {
    pub tolerances: Tolerances<T>,
    /// Convergence when the max-norm of the full derivative drops below this (units of Γ).
    pub residual_target: T,
    /// Give up at this time (units of 1/Γ).
    pub t_max: T,
}

/// Integrator tolerances for relaxation. The derivative norm stalls at roughly
/// `rtol` times the size of the coupling terms, so the integration default of
/// `1e-8` cannot reliably reach a `1e-8` residual.
pub const STEADY_STATE_RTOL: f64 = 1e-10;
pub const STEADY_STATE_ATOL: f64 = 1e-12;

impl<T: Real> Default for SteadyStateOptions<T> {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::new(T::lit(STEADY_STATE_RTOL), T::lit(STEADY_STATE_ATOL)),
            residual_target: T::lit(1e-8),
            t_max: T::lit(2000.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState<T> {
    pub state: EnsembleState<T>,
    /// Max-norm of the derivative at `state`.
    pub residual: T,
    pub stats: StepStats,
}

struct ConvergenceWatch<T> {
    target: T,
    last_residual: T,
    next_log: T,
    history: Vec<(f64, f64)>,
}

impl<T: Real> Observer<T> for ConvergenceWatch<T> {
    fn step(&mut self, t: T, _y: &[T], dydt: &[T]) -> ControlFlow<()> {
        let r = max_abs(dydt);
        self.last_residual = r;
        if t >= self.next_log {
            self.history.push((t.to_f64_lossy(), r.to_f64_lossy()));
            self.next_log = self.next_log * T::lit(2.0);
        }
        if r < self.target {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Relaxes the all-`|1⟩` ensemble under the static drive of `params` until the
/// derivative max-norm falls below `options.residual_target`.
pub fn solve_steady_state<T: Real>(
    cloud: &CloudGeometry<T>,
    matrices: &InteractionMatrices<T>,
    params: &LambdaParams<T>,
    options: &SteadyStateOptions<T>,
) -> Result<SteadyState<T>> {
    relax_to_steady_state(EnsembleState::ground(cloud.atom_count()), cloud, matrices, params, options)
}

/// Like [`solve_steady_state`] but starting from an arbitrary state.
pub fn relax_to_steady_state<T: Real>(
    initial: EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    matrices: &InteractionMatrices<T>,
    params: &LambdaParams<T>,
    options: &SteadyStateOptions<T>,
) -> Result<SteadyState<T>> {
    params.validate()?;
    options.tolerances.validate()?;
    let n = cloud.atom_count();
    if initial.atom_count() != n {
        return Err(Error::SizeMismatch { expected: n, found: initial.atom_count() });
    }
    let mut sys = EnsembleSystem::new(cloud, matrices, params, Drive::Static)?;
    let mut y = initial.as_slice().to_vec();
    let mut dydt = vec![T::zero(); BLOCKS * n];
    sys.rhs(initial.time, &y, &mut dydt);
    let r0 = max_abs(&dydt);
    if r0 < options.residual_target {
        return Ok(SteadyState {
            state: initial,
            residual: r0,
            stats: StepStats { rhs_evals: 1, ..Default::default() },
        });
    }

    let mut watch = ConvergenceWatch {
        target: options.residual_target,
        last_residual: r0,
        next_log: T::one(),
        history: vec![(initial.time.to_f64_lossy(), r0.to_f64_lossy())],
    };
    let mut solver = Dopri5::new(options.tolerances);
    let t_end = initial.time + options.t_max;
    let out = solver.integrate(&mut sys, initial.time, &mut y, t_end, &[], &mut watch)?;
    if !out.stopped {
        watch.history.push((out.t.to_f64_lossy(), watch.last_residual.to_f64_lossy()));
        return Err(Error::NotConverged {
            t_max: t_end.to_f64_lossy(),
            residual: watch.last_residual.to_f64_lossy(),
            target: options.residual_target.to_f64_lossy(),
            history: watch.history,
        });
    }
    let state = EnsembleState::from_flat(n, out.t, y);
    let excess = state.physicality_excess();
    if excess > T::lit(PHYSICALITY_SLACK) {
        log::warn!("steady state violates physical bounds by {excess:e}");
    }
    Ok(SteadyState {
        state,
        residual: watch.last_residual,
        stats: out.stats,
    })
}
