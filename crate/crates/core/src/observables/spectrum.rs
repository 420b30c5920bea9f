//! Disorder-averaged transmission spectra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{CloudGeometry, CloudSpec, DetectorDisk};
use crate::dynamics::{relax_to_steady_state, EnsembleState, SteadyStateOptions};
use crate::error::{Error, Result};
use crate::kernel::build_matrices;
use crate::num::Real;
use crate::params::LambdaParams;
use crate::seeds::realization_seed;

use super::field::{transmission, transmission_checked};
use super::metrics::{window_metrics, WindowMetrics};
use super::stats::{ensemble_stats, EnsembleStats};

/// Default relative FWHM standard error at which adaptive plans stop.
pub const DEFAULT_FWHM_REL_STDERR: f64 = 0.02;

/// How many disorder realizations to average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealizationPlan {
    Fixed { count: usize },
    /// Add realizations until the FWHM standard error drops below `rel_stderr` of the
    /// mean FWHM, or until `max`.
    Adaptive { min: usize, max: usize, rel_stderr: f64 },
}

impl RealizationPlan {
    pub fn adaptive(min: usize, max: usize) -> Self {
        RealizationPlan::Adaptive { min, max, rel_stderr: DEFAULT_FWHM_REL_STDERR }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RealizationPlan::Fixed { count } if count == 0 => {
                Err(Error::invalid("realizations", "need at least one realization"))
            }
            RealizationPlan::Adaptive { min, max, rel_stderr } => {
                if min < 2 || max < min {
                    Err(Error::invalid("realizations", format!("need 2 <= min <= max, got {min}..{max}")))
                } else if !(rel_stderr > 0.0) {
                    Err(Error::invalid("realizations", "rel_stderr must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn max_count(&self) -> usize {
        match *self {
            RealizationPlan::Fixed { count } => count,
            RealizationPlan::Adaptive { max, .. } => max,
        }
    }
}

/// Everything that determines a spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPlan<T> {
    pub cloud: CloudSpec<T>,
    /// `delta1` is ignored; the grid supplies it.
    pub params: LambdaParams<T>,
    pub detector: DetectorDisk<T>,
    pub delta1_grid: Vec<T>,
    pub realizations: RealizationPlan,
    pub master_seed: u64,
    pub steady_state: SteadyStateOptions<T>,
    /// Start each grid point from the previous point's steady state instead of from
    /// the ground state. Grid points of one realization then run sequentially.
    #[serde(default)]
    pub warm_start: bool,
    /// Also evaluate every transmission on the doubled quadrature.
    #[serde(default)]
    pub check_quadrature: bool,
}

/// Default grid: 101 points over `[−0.5, 0.5]`.
pub fn default_grid<T: Real>() -> Vec<T> {
    uniform_grid(T::lit(-0.5), T::lit(0.5), 101)
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(points - 1);
            (0..points).map(|i| lo + step * T::from_usize_lossy(i)).collect()
        }
    }
}

impl<T: Real> SpectrumPlan<T> {
    /// Fixed single realization, default detector, grid and steady-state options.
    pub fn new(cloud: CloudSpec<T>, params: LambdaParams<T>) -> Self {
        Self {
            cloud,
            params,
            detector: DetectorDisk::for_cloud(&cloud),
            delta1_grid: default_grid(),
            realizations: RealizationPlan::Fixed { count: 1 },
            master_seed: 0,
            steady_state: SteadyStateOptions::default(),
            warm_start: false,
            check_quadrature: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.realizations.validate()?;
        self.detector.validate(&self.cloud)?;
        self.steady_state.tolerances.validate()?;
        if self.delta1_grid.is_empty() {
            return Err(Error::invalid("delta1_grid", "empty"));
        }
        if self.delta1_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("delta1_grid", "must be strictly ascending"));
        }
        if self.delta1_grid.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("delta1_grid", "must be finite"));
        }
        if !(self.params.omega1 > T::zero()) {
            return Err(Error::invalid("omega1", "transmission needs a non-zero probe"));
        }
        Ok(())
    }
}

/// Convergence bookkeeping for one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationDiagnostics {
    pub index: usize,
    pub seed: u64,
    pub atom_count: usize,
    pub max_residual: f64,
    pub max_relaxation_time: f64,
    pub rhs_evals: usize,
    /// Largest `|T(refined) − T|`, when the quadrature was checked.
    pub max_quadrature_discrepancy: Option<f64>,
}

/// One realization's spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationSpectrum<T> {
    pub transmission: Vec<T>,
    pub diagnostics: RealizationDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult<T> {
    pub plan: SpectrumPlan<T>,
    /// Per realization, one transmission per grid point.
    pub transmissions: Vec<Vec<T>>,
    pub seeds: Vec<u64>,
    pub mean: Vec<T>,
    /// Absent with a single realization.
    pub stderr: Vec<Option<T>>,
    pub diagnostics: Vec<RealizationDiagnostics>,
}

struct PointResult<T> {
    transmission: T,
    residual: T,
    relaxation_time: T,
    rhs_evals: usize,
    discrepancy: Option<T>,
}

fn grid_point<T: Real>(
    plan: &SpectrumPlan<T>,
    cloud: &CloudGeometry<T>,
    matrices: &crate::kernel::InteractionMatrices<T>,
    delta1: T,
    initial: EnsembleState<T>,
) -> Result<(PointResult<T>, EnsembleState<T>)> {
    let params = plan.params.with_delta1(delta1);
    let start = initial.time;
    let ss = relax_to_steady_state(initial, cloud, matrices, &params, &plan.steady_state)?;
    let (t, discrepancy) = if plan.check_quadrature {
        let c = transmission_checked(&ss.state, cloud, &params, &plan.detector)?;
        (c.value, Some(c.discrepancy()))
    } else {
        (transmission(&ss.state, cloud, &params, &plan.detector)?, None)
    };
    let point = PointResult {
        transmission: t,
        residual: ss.residual,
        relaxation_time: ss.state.time - start,
        rhs_evals: ss.stats.rhs_evals,
        discrepancy,
    };
    let mut state = ss.state;
    state.time = T::zero();
    Ok((point, state))
}

/// Samples realization `index` of `plan` and computes its spectrum.
pub fn run_realization<T: Real>(plan: &SpectrumPlan<T>, index: usize) -> Result<RealizationSpectrum<T>> {
    let seed = realization_seed(plan.master_seed, index as u64);
    let cloud = plan.cloud.sample(seed)?;
    let n = cloud.atom_count();
    let tag = |delta1: T, e: Error| Error::Task {
        realization: index,
        delta1: delta1.to_f64_lossy(),
        source: Box::new(e),
    };
    let matrices = build_matrices(&cloud, &plan.params).map_err(|e| tag(plan.delta1_grid[0], e))?;

    let points: Vec<PointResult<T>> = if plan.warm_start {
        let mut state = EnsembleState::ground(n);
        let mut out = Vec::with_capacity(plan.delta1_grid.len());
        for &d in &plan.delta1_grid {
            let (p, s) = grid_point(plan, &cloud, &matrices, d, state).map_err(|e| tag(d, e))?;
            out.push(p);
            state = s;
        }
        out
    } else {
        plan.delta1_grid
            .par_iter()
            .map(|&d| {
                grid_point(plan, &cloud, &matrices, d, EnsembleState::ground(n))
                    .map(|(p, _)| p)
                    .map_err(|e| tag(d, e))
            })
            .collect::<Result<_>>()?
    };

    let fold_max = |f: &dyn Fn(&PointResult<T>) -> T| {
        points.iter().map(|p| f(p).to_f64_lossy()).fold(0.0, f64::max)
    };
    let diagnostics = RealizationDiagnostics {
        index,
        seed,
        atom_count: n,
        max_residual: fold_max(&|p| p.residual),
        max_relaxation_time: fold_max(&|p| p.relaxation_time),
        rhs_evals: points.iter().map(|p| p.rhs_evals).sum(),
        max_quadrature_discrepancy: plan
            .check_quadrature
            .then(|| fold_max(&|p| p.discrepancy.unwrap_or_else(T::zero))),
    };
    if let Some(d) = diagnostics.max_quadrature_discrepancy {
        if d > super::field::QUADRATURE_TOLERANCE {
            log::warn!("realization {index}: detector quadrature discrepancy {d:e}");
        }
    }
    Ok(RealizationSpectrum {
        transmission: points.into_iter().map(|p| p.transmission).collect(),
        diagnostics,
    })
}

/// Runs `plan`: realizations are processed in index order, grid points of a
/// realization in parallel. Results do not depend on the thread count.
pub fn spectrum<T: Real>(plan: &SpectrumPlan<T>) -> Result<SpectrumResult<T>> {
    let partial = spectrum_partial(plan)?;
    match partial.failure {
        Some(e) => Err(e),
        None => Ok(partial.result.expect("a successful run has realizations")),
    }
}

/// Outcome of [`spectrum_partial`].
#[derive(Debug)]
pub struct PartialSpectrum<T> {
    /// Realizations completed before the first failure, if any.
    pub result: Option<SpectrumResult<T>>,
    pub failure: Option<Error>,
}

/// Like [`spectrum`], but a failing realization stops the run and the realizations
/// before it are kept. Only an invalid plan is an error.
pub fn spectrum_partial<T: Real>(plan: &SpectrumPlan<T>) -> Result<PartialSpectrum<T>> {
    plan.validate()?;
    let mut realizations = Vec::new();
    let mut failure = None;
    let max = plan.realizations.max_count();
    // Warm-started realizations are sequential internally, so parallelize across them.
    let batch = if plan.warm_start { rayon::current_num_threads().max(1) } else { 1 };
    'outer: while realizations.len() < max {
        let start = realizations.len();
        let end = (start + batch).min(max);
        let chunk: Vec<Result<RealizationSpectrum<T>>> =
            (start..end).into_par_iter().map(|i| run_realization(plan, i)).collect();
        for r in chunk {
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(e);
                    break 'outer;
                }
            };
            log::info!(
                "realization {} (seed {:#018x}, N = {}) done, {} rhs evaluations",
                r.diagnostics.index,
                r.diagnostics.seed,
                r.diagnostics.atom_count,
                r.diagnostics.rhs_evals
            );
            realizations.push(r);
        }
        if let RealizationPlan::Adaptive { min, rel_stderr, .. } = plan.realizations {
            if realizations.len() >= min {
                let fwhm: Vec<T> = realizations
                    .iter()
                    .filter_map(|r| window_metrics(&plan.delta1_grid, &r.transmission).ok())
                    .map(|m| m.fwhm)
                    .collect();
                if let Some(EnsembleStats { mean, stderr: Some(se), .. }) = ensemble_stats(&fwhm) {
                    if se < T::lit(rel_stderr) * mean.abs() {
                        break;
                    }
                }
            }
        }
    }
    let result = (!realizations.is_empty()).then(|| SpectrumResult::from_realizations(plan.clone(), realizations));
    Ok(PartialSpectrum { result, failure })
}

impl<T: Real> SpectrumResult<T> {
    pub fn from_realizations(plan: SpectrumPlan<T>, realizations: Vec<RealizationSpectrum<T>>) -> Self {
        let m = plan.delta1_grid.len();
        let mut mean = Vec::with_capacity(m);
        let mut stderr = Vec::with_capacity(m);
        for i in 0..m {
            let column: Vec<T> = realizations.iter().map(|r| r.transmission[i]).collect();
            match ensemble_stats(&column) {
                Some(s) => {
                    mean.push(s.mean);
                    stderr.push(s.stderr);
                }
                None => {
                    mean.push(T::nan());
                    stderr.push(None);
                }
            }
        }
        let seeds = realizations.iter().map(|r| r.diagnostics.seed).collect();
        let (transmissions, diagnostics) = realizations
            .into_iter()
            .map(|r| (r.transmission, r.diagnostics))
            .unzip();
        Self { plan, transmissions, seeds, mean, stderr, diagnostics }
    }

    pub fn realization_count(&self) -> usize {
        self.transmissions.len()
    }

    pub fn delta1_grid(&self) -> &[T] {
        &self.plan.delta1_grid
    }

    /// Window of the mean curve.
    pub fn window_metrics(&self) -> Result<WindowMetrics<T>> {
        window_metrics(&self.plan.delta1_grid, &self.mean)
    }

    /// Window of each realization's curve.
    pub fn realization_metrics(&self) -> Vec<Result<WindowMetrics<T>>> {
        self.transmissions
            .iter()
            .map(|t| window_metrics(&self.plan.delta1_grid, t))
            .collect()
    }

    /// Summary for `metrics.json`.
    pub fn summary(&self) -> SpectrumMetrics<T> {
        let per: Vec<WindowMetrics<T>> = self.realization_metrics().into_iter().filter_map(|m| m.ok()).collect();
        let fwhm: Vec<T> = per.iter().map(|m| m.fwhm).collect();
        let tmin: Vec<T> = per.iter().map(|m| m.t_min).collect();
        SpectrumMetrics {
            mean_curve: self.window_metrics().ok(),
            fwhm: ensemble_stats(&fwhm),
            t_min: ensemble_stats(&tmin),
            failed_realizations: self.realization_count() - per.len(),
            n_realizations: self.realization_count(),
        }
    }

    /// CSV with columns `delta1_over_gamma,t_mean,t_stderr,n_realizations`; the standard
    /// error field is empty when absent.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "delta1_over_gamma,t_mean,t_stderr,n_realizations")?;
        let n = self.realization_count();
        for ((d, m), s) in self.plan.delta1_grid.iter().zip(&self.mean).zip(&self.stderr) {
            match s {
                Some(s) => writeln!(out, "{d},{m},{s},{n}")?,
                None => writeln!(out, "{d},{m},,{n}")?,
            }
        }
        Ok(())
    }
}

/// Window metrics of a spectrum: of the mean curve, and statistics over realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetrics<T> {
    pub mean_curve: Option<WindowMetrics<T>>,
    /// FWHM over realizations whose curve has a window.
    pub fwhm: Option<EnsembleStats<T>>,
    pub t_min: Option<EnsembleStats<T>>,
    pub failed_realizations: usize,
    pub n_realizations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> SpectrumPlan<f64> {
        let mut plan = SpectrumPlan::new(CloudSpec::new(3.0, 3.0, 0.1), LambdaParams::eit());
        plan.delta1_grid = uniform_grid(-0.5, 0.5, 11);
        plan.detector.radial_nodes = 16;
        plan.detector.angular_nodes = 16;
        plan
    }

    #[test]
    fn grids() {
        let g = default_grid::<f64>();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], -0.5);
        assert!((g[50]).abs() < 1e-15);
        assert!((g[100] - 0.5).abs() < 1e-15);
        assert_eq!(uniform_grid(0.0, 1.0, 1), vec![0.0]);
    }

    #[test]
    fn empty_cloud_is_flat() {
        let mut plan = tiny_plan();
        plan.cloud.density = 0.0;
        let r = spectrum(&plan).unwrap();
        assert!(r.mean.iter().all(|&t| t == 1.0));
        assert!(r.stderr.iter().all(Option::is_none));
        assert!(r.window_metrics().is_err());
    }

    #[test]
    fn plan_validation() {
        let mut plan = tiny_plan();
        plan.delta1_grid = vec![0.1, 0.0];
        assert!(spectrum(&plan).is_err());
        let mut plan = tiny_plan();
        plan.realizations = RealizationPlan::Fixed { count: 0 };
        assert!(plan.validate().is_err());
        plan.realizations = RealizationPlan::adaptive(1, 4);
        assert!(plan.validate().is_err());
        plan.realizations = RealizationPlan::adaptive(2, 4);
        assert!(plan.validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        let mut plan = tiny_plan();
        plan.cloud.density = 0.0;
        plan.delta1_grid = vec![-0.1, 0.1];
        let mut buf = Vec::new();
        spectrum(&plan).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "delta1_over_gamma,t_mean,t_stderr,n_realizations\n-0.1,1,,1\n0.1,1,,1\n"
        );
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let mut plan = tiny_plan();
        plan.realizations = RealizationPlan::Fixed { count: 2 };
        let cold = spectrum(&plan).unwrap();
        plan.warm_start = true;
        let warm = spectrum(&plan).unwrap();
        assert_eq!(cold.seeds, warm.seeds);
        for (a, b) in cold.mean.iter().zip(&warm.mean) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn realization_seeds_are_derived() {
        let mut plan = tiny_plan();
        plan.realizations = RealizationPlan::Fixed { count: 3 };
        plan.master_seed = 99;
        let r = spectrum(&plan).unwrap();
        let expected: Vec<u64> = (0..3).map(|i| realization_seed(99, i)).collect();
        assert_eq!(r.seeds, expected);
        assert!(r.stderr.iter().all(Option::is_some));
    }

    #[test]
    fn failure_is_reported_with_partial_results() {
        let mut plan = tiny_plan();
        plan.realizations = RealizationPlan::Fixed { count: 3 };
        plan.steady_state.t_max = 1e-3;
        let p = spectrum_partial(&plan).unwrap();
        assert!(p.result.is_none());
        assert!(matches!(p.failure.as_ref().map(Error::root), Some(Error::NotConverged { .. })));
        assert!(spectrum(&plan).is_err());
    }
}
