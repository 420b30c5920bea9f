//! Run configuration: TOML file, `--set` overrides and validation.

use std::path::Path;

use anyhow::Context;
use cdm_eit::cloud::{DetectorDisk, DEFAULT_MIN_PAIR_SEPARATION};
use cdm_eit::dynamics::{PulseConvention, StirapSchedule, SteadyStateOptions, Tolerances};
use cdm_eit::observables::{uniform_grid, RealizationPlan, SpectrumPlan, StirapPlan, DEFAULT_FWHM_REL_STDERR};
use cdm_eit::params::LambdaParams;
use cdm_eit::{CloudSpec, ExcitedDecay, KernelMode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub cloud: CloudConfig,
    pub physics: PhysicsConfig,
    pub detector: DetectorConfig,
    pub grid: GridConfig,
    pub ensemble: EnsembleConfig,
    pub solver: SolverConfig,
    pub stirap: StirapConfig,
    pub sweep: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub radius_kr: f64,
    pub thickness_kl: f64,
    pub density: f64,
    pub min_pair_separation_k: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            radius_kr: 20.0,
            thickness_kl: 20.0,
            density: 0.01,
            min_pair_separation_k: DEFAULT_MIN_PAIR_SEPARATION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub omega1: f64,
    pub omega2: f64,
    /// Used by `stirap` only; spectra take `Δ₁` from the grid.
    pub delta1: f64,
    pub delta2: f64,
    pub gamma1_frac: f64,
    pub k2_over_k1: f64,
    pub excited_decay: ExcitedDecay,
    /// Kernel modes to run. When absent, `spectrum` and `sweep` run scalar and none,
    /// `stirap` runs all three.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<KernelMode>>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            omega1: 0.1,
            omega2: 0.5,
            delta1: 0.0,
            delta2: 0.0,
            gamma1_frac: 0.5,
            k2_over_k1: 1.0,
            excited_decay: ExcitedDecay::Total,
            modes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// `k₁z₀ − k₁L/2`.
    pub z0_offset_k: f64,
    /// `s_max / R`.
    pub s_max_fraction: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            z0_offset_k: cdm_eit::cloud::DEFAULT_DETECTOR_OFFSET,
            s_max_fraction: cdm_eit::cloud::DEFAULT_DETECTOR_RADIUS_FRACTION,
            radial_nodes: cdm_eit::cloud::DEFAULT_RADIAL_NODES,
            angular_nodes: cdm_eit::cloud::DEFAULT_ANGULAR_NODES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub delta1_min: f64,
    pub delta1_max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { delta1_min: -0.5, delta1_max: 0.5, points: 101 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub realizations: usize,
    /// Stop early once the FWHM standard error is below `rel_stderr` of the mean.
    pub adaptive: bool,
    pub min_realizations: usize,
    pub rel_stderr: f64,
    pub master_seed: u64,
    pub warm_start: bool,
    pub check_quadrature: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            realizations: 8,
            adaptive: false,
            min_realizations: 4,
            rel_stderr: DEFAULT_FWHM_REL_STDERR,
            master_seed: 1,
            warm_start: true,
            check_quadrature: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub residual_target: f64,
    pub t_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SteadyStateOptions::<f64>::default();
        Self {
            rtol: s.tolerances.rtol,
            atol: s.tolerances.atol,
            residual_target: s.residual_target,
            t_max: s.t_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StirapConfig {
    pub omega_max: f64,
    pub t0: f64,
    pub tr: f64,
    pub convention: PulseConvention,
    pub t_end: f64,
    pub sample_step: f64,
}

impl Default for StirapConfig {
    fn default() -> Self {
        let s = StirapSchedule::<f64>::reference();
        Self {
            omega_max: s.omega_max,
            t0: s.t0,
            tr: s.tr,
            convention: s.convention,
            t_end: cdm_eit::observables::DEFAULT_STIRAP_T_END,
            sample_step: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[default]
    Density,
    Thickness,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Configuration problems, one entry per offending key.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(vec![msg.into()]).into()
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `section.key=value` to `table`.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_error(format!("override `{assignment}` has an empty key")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{assignment}`: `{k}` is not a section")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Reads `path` (or starts from defaults) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        Ok(config)
    }

    /// Config echoed in a manifest, with `overrides` applied on top.
    pub fn from_manifest(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let config = manifest
            .get("config")
            .cloned()
            .ok_or_else(|| config_error(format!("{}: no `config` entry", path.display())))?;
        let config: Config =
            serde_json::from_value(config).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut table = toml::Table::try_from(&config).context("re-encoding manifest config")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.to_string()))
    }

    pub fn modes_or(&self, default: &[KernelMode]) -> Vec<KernelMode> {
        self.physics.modes.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn cloud_spec(&self) -> CloudSpec {
        CloudSpec::new(self.cloud.radius_kr, self.cloud.thickness_kl, self.cloud.density)
            .with_min_separation(self.cloud.min_pair_separation_k)
    }

    pub fn params(&self, mode: KernelMode) -> LambdaParams<f64> {
        let p = &self.physics;
        let mut out = LambdaParams::new(p.omega1, p.omega2, p.delta1, p.delta2)
            .with_branching(p.gamma1_frac)
            .with_mode(mode);
        out.k2_over_k1 = p.k2_over_k1;
        out.excited_decay = p.excited_decay;
        out
    }

    pub fn detector(&self, cloud: &CloudSpec) -> DetectorDisk<f64> {
        DetectorDisk {
            z0_k: cloud.thickness_kl / 2.0 + self.detector.z0_offset_k,
            s_max_k: cloud.radius_kr * self.detector.s_max_fraction,
            radial_nodes: self.detector.radial_nodes,
            angular_nodes: self.detector.angular_nodes,
        }
    }

    pub fn delta1_grid(&self) -> Vec<f64> {
        uniform_grid(self.grid.delta1_min, self.grid.delta1_max, self.grid.points)
    }

    pub fn steady_state(&self) -> SteadyStateOptions<f64> {
        SteadyStateOptions {
            tolerances: Tolerances::new(self.solver.rtol, self.solver.atol),
            residual_target: self.solver.residual_target,
            t_max: self.solver.t_max,
        }
    }

    pub fn realization_plan(&self) -> RealizationPlan {
        let e = &self.ensemble;
        if e.adaptive {
            RealizationPlan::Adaptive { min: e.min_realizations, max: e.realizations, rel_stderr: e.rel_stderr }
        } else {
            RealizationPlan::Fixed { count: e.realizations }
        }
    }

    pub fn spectrum_plan(&self, cloud: CloudSpec, mode: KernelMode) -> SpectrumPlan<f64> {
        SpectrumPlan {
            cloud,
            params: self.params(mode),
            detector: self.detector(&cloud),
            delta1_grid: self.delta1_grid(),
            realizations: self.realization_plan(),
            master_seed: self.ensemble.master_seed,
            steady_state: self.steady_state(),
            warm_start: self.ensemble.warm_start,
            check_quadrature: self.ensemble.check_quadrature,
        }
    }

    pub fn schedule(&self) -> StirapSchedule<f64> {
        StirapSchedule {
            omega_max: self.stirap.omega_max,
            t0: self.stirap.t0,
            tr: self.stirap.tr,
            convention: self.stirap.convention,
        }
    }

    pub fn stirap_plan(&self, mode: KernelMode) -> StirapPlan<f64> {
        let s = &self.stirap;
        let steps = (s.t_end / s.sample_step).floor() as usize;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * s.sample_step).filter(|&t| t <= s.t_end).collect();
        if times.last() != Some(&s.t_end) {
            times.push(s.t_end);
        }
        StirapPlan {
            cloud: self.cloud_spec(),
            params: self.params(mode),
            schedule: self.schedule(),
            t_end: s.t_end,
            sample_times: times,
            realizations: self.ensemble.realizations,
            master_seed: self.ensemble.master_seed,
            tolerances: Tolerances::new(self.solver.rtol, self.solver.atol),
        }
    }

    /// Every problem found, as `key: reason`.
    pub fn problems(&self, command: Command) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, reason: &str| {
            if !ok {
                out.push(format!("{key}: {reason}"));
            }
        };
        let c = &self.cloud;
        check(c.radius_kr > 0.0 && c.radius_kr.is_finite(), "cloud.radius_kr", "must be positive");
        check(c.thickness_kl > 0.0 && c.thickness_kl.is_finite(), "cloud.thickness_kl", "must be positive");
        check(c.density >= 0.0 && c.density.is_finite(), "cloud.density", "must be non-negative");
        check(c.min_pair_separation_k >= 0.0, "cloud.min_pair_separation_k", "must be non-negative");
        let p = &self.physics;
        check(p.omega1 >= 0.0, "physics.omega1", "must be non-negative");
        check(p.omega2 >= 0.0, "physics.omega2", "must be non-negative");
        check(p.delta1.is_finite(), "physics.delta1", "must be finite");
        check(p.delta2.is_finite(), "physics.delta2", "must be finite");
        check(p.gamma1_frac > 0.0 && p.gamma1_frac <= 1.0, "physics.gamma1_frac", "must lie in (0, 1]");
        check(p.k2_over_k1 > 0.0 && p.k2_over_k1.is_finite(), "physics.k2_over_k1", "must be positive");
        if let Some(m) = &p.modes {
            check(!m.is_empty(), "physics.modes", "must not be empty");
            let mut seen = m.clone();
            seen.sort_by_key(|k| k.name());
            seen.dedup();
            check(seen.len() == m.len(), "physics.modes", "contains duplicates");
        }
        let s = &self.solver;
        check(s.rtol > 0.0, "solver.rtol", "must be positive");
        check(s.atol > 0.0, "solver.atol", "must be positive");
        check(s.residual_target > 0.0, "solver.residual_target", "must be positive");
        check(s.t_max > 0.0, "solver.t_max", "must be positive");
        let e = &self.ensemble;
        check(e.realizations > 0, "ensemble.realizations", "must be at least 1");
        if e.adaptive {
            check(
                e.min_realizations >= 2 && e.min_realizations <= e.realizations,
                "ensemble.min_realizations",
                "need 2 <= min_realizations <= realizations",
            );
            check(e.rel_stderr > 0.0, "ensemble.rel_stderr", "must be positive");
        }

        let spectral = matches!(command, Command::Spectrum | Command::Sweep | Command::Oracle);
        if spectral {
            let g = &self.grid;
            check(g.points > 0, "grid.points", "must be at least 1");
            check(
                g.delta1_min.is_finite() && g.delta1_max.is_finite() && (g.points == 1 || g.delta1_max > g.delta1_min),
                "grid.delta1_max",
                "must exceed grid.delta1_min",
            );
        }
        if matches!(command, Command::Spectrum | Command::Sweep) {
            check(p.omega1 > 0.0, "physics.omega1", "transmission needs a non-zero probe");
            let d = &self.detector;
            check(
                d.s_max_fraction > 0.0 && d.s_max_fraction < 1.0,
                "detector.s_max_fraction",
                "must lie in (0, 1)",
            );
            check(d.z0_offset_k > 0.0, "detector.z0_offset_k", "detector must sit beyond the cloud face");
            check(d.radial_nodes > 0, "detector.radial_nodes", "must be positive");
            check(d.angular_nodes > 0, "detector.angular_nodes", "must be positive");
        }
        if command == Command::Oracle {
            check(p.delta2 == 0.0, "physics.delta2", "closed-form results need a resonant control (0)");
            check(p.omega1 > 0.0, "physics.omega1", "cross-section needs a non-zero probe");
        }
        if command == Command::Stirap {
            let st = &self.stirap;
            check(st.omega_max >= 0.0, "stirap.omega_max", "must be non-negative");
            check(st.t0 >= 0.0, "stirap.t0", "must be non-negative");
            check(st.tr > 0.0, "stirap.tr", "must be positive");
            check(st.t_end > 0.0, "stirap.t_end", "must be positive");
            check(st.sample_step > 0.0, "stirap.sample_step", "must be positive");
        }
        if command == Command::Sweep {
            let sw = &self.sweep;
            check(!sw.values.is_empty(), "sweep.values", "empty sweep list");
            let bad = match sw.axis {
                SweepAxis::Density => sw.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())),
                SweepAxis::Thickness => sw.values.iter().any(|v| !(*v > 0.0 && v.is_finite())),
            };
            check(!bad, "sweep.values", "out of range for the sweep axis");
        }
        out
    }

    pub fn validate(&self, command: Command) -> anyhow::Result<()> {
        let problems = self.problems(command);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems).into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Stirap,
    Oracle,
    Sweep,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = Config::load(None, &[]).unwrap();
        assert_eq!(c, Config::default());
        let text = toml::to_string(&c).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(c.problems(Command::Spectrum).is_empty());
    }

    #[test]
    fn overrides() {
        let c = Config::load(
            None,
            &[
                "cloud.density=0.002".into(),
                "physics.modes=[\"none\", \"vectorial\"]".into(),
                "stirap.convention=literal".into(),
                "ensemble.master_seed=42".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.cloud.density, 0.002);
        assert_eq!(c.physics.modes, Some(vec![KernelMode::None, KernelMode::Vectorial]));
        assert_eq!(c.stirap.convention, PulseConvention::Literal);
        assert_eq!(c.ensemble.master_seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::load(None, &["cloud.radius=3".into()]).is_err());
        assert!(Config::load(None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn all_problems_are_listed() {
        let mut c = Config::default();
        c.cloud.radius_kr = -1.0;
        c.grid.points = 0;
        c.physics.omega1 = 0.0;
        let p = c.problems(Command::Spectrum);
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(p[0].starts_with("cloud.radius_kr"));
    }

    #[test]
    fn empty_sweep_is_a_config_error() {
        let c = Config::default();
        assert!(c.validate(Command::Sweep).is_err());
    }

    #[test]
    fn stirap_sample_times() {
        let mut c = Config::default();
        c.stirap.t_end = 2.5;
        let plan = c.stirap_plan(KernelMode::None);
        assert_eq!(plan.sample_times, vec![0.0, 1.0, 2.0, 2.5]);
    }
}
