//! Time dependence of the probe and control Rabi frequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::params::LambdaParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseConvention {
    /// Ramp argument `π(t − t₀)/(2t_r)`: continuous at `t₀` and `t_f`.
    #[default]
    Shifted,
    /// Ramp argument `πt/(2t_r)` inside the Heaviside window, jumps included.
    Literal,
}

/// Counter-intuitive STIRAP sequence: control on first, then swapped for the probe
/// over `[t₀, t₀ + t_r]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapSchedule<T> {
    pub omega_max: T,
    pub t0: T,
    pub tr: T,
    #[serde(default)]
    pub convention: PulseConvention,
}

impl<T: Real> StirapSchedule<T> {
    /// `Ω_max = 0.5Γ`, `Γt₀ = 10`, `Γt_r = 60`.
    pub fn reference() -> Self {
        Self {
            omega_max: T::lit(0.5),
            t0: T::lit(10.0),
            tr: T::lit(60.0),
            convention: PulseConvention::Shifted,
        }
    }

    pub fn tf(&self) -> T {
        self.t0 + self.tr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= T::zero()) {
            return Err(Error::invalid("t0", format!("must be >= 0, got {}", self.t0)));
        }
        if !(self.tr > T::zero()) {
            return Err(Error::invalid("tr", format!("must be > 0, got {}", self.tr)));
        }
        if !(self.omega_max >= T::zero()) {
            return Err(Error::invalid("omega_max", "must be >= 0"));
        }
        Ok(())
    }

    /// `(Ω₁(t), Ω₂(t))`. The step function is taken as right-continuous, `θ(0) = 1`.
    pub fn drives(&self, t: T) -> (T, T) {
        let step = |x: T| if x >= T::zero() { T::one() } else { T::zero() };
        let tf = self.tf();
        let quarter = T::FRAC_PI_2() / self.tr;
        match self.convention {
            PulseConvention::Shifted => {
                if t < self.t0 {
                    (T::zero(), self.omega_max)
                } else if t <= tf {
                    let (s, c) = (quarter * (t - self.t0)).sin_cos();
                    (self.omega_max * s, self.omega_max * c)
                } else {
                    (self.omega_max, T::zero())
                }
            }
            PulseConvention::Literal => {
                let window = step(t - self.t0) - step(t - tf);
                let (s, c) = (quarter * t).sin_cos();
                (
                    self.omega_max * (step(t - tf) + s * window),
                    self.omega_max * (T::one() - step(t - self.t0) + c * window),
                )
            }
        }
    }
}

/// Drive seen by the ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Drive<T> {
    /// Constant `Ω₁`, `Ω₂` taken from [`LambdaParams`].
    Static,
    Stirap(StirapSchedule<T>),
}

impl<T: Real> Drive<T> {
    pub fn rabi(&self, t: T, params: &LambdaParams<T>) -> (T, T) {
        match self {
            Drive::Static => (params.omega1, params.omega2),
            Drive::Stirap(s) => s.drives(t),
        }
    }

    /// Times at which the drive or its derivative is not smooth.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            Drive::Static => Vec::new(),
            Drive::Stirap(s) => vec![s.t0, s.tf()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn before_ramp_only_control() {
        let s = StirapSchedule::<f64>::reference();
        assert_eq!(s.drives(0.0), (0.0, 0.5));
        assert_eq!(s.drives(9.99), (0.0, 0.5));
        let lit = StirapSchedule { convention: PulseConvention::Literal, ..s };
        assert_eq!(lit.drives(5.0), (0.0, 0.5));
    }

    #[test]
    fn mid_ramp_equal_fields() {
        let s = StirapSchedule::<f64>::reference();
        let (a, b) = s.drives(s.t0 + s.tr / 2.0);
        let h = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((a - h).abs() < 1e-15 && (b - h).abs() < 1e-15);
        assert!((a / 0.5 - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn after_ramp_only_probe() {
        let s = StirapSchedule::<f64>::reference();
        assert_eq!(s.drives(71.0), (0.5, 0.0));
        assert_eq!(s.drives(500.0), (0.5, 0.0));
    }

    #[test]
    fn shifted_is_continuous() {
        let s = StirapSchedule::<f64>::reference();
        for t in [s.t0, s.tf()] {
            let (a0, b0) = s.drives(t - 1e-9);
            let (a1, b1) = s.drives(t + 1e-9);
            assert!((a0 - a1).abs() < 1e-9 && (b0 - b1).abs() < 1e-9);
        }
    }

    #[test]
    fn literal_jumps_at_ramp_end() {
        let s = StirapSchedule { convention: PulseConvention::Literal, ..StirapSchedule::<f64>::reference() };
        // cos(π·70/120) = cos(105°) just before t_f.
        let (_, b) = s.drives(s.tf() - 1e-12);
        assert!((b / 0.5 - (105f64.to_radians()).cos()).abs() < 1e-9);
        assert!((b / 0.5 + 0.259).abs() < 1e-3);
        assert_eq!(s.drives(s.tf()), (0.5, 0.0));
    }

    #[test]
    fn schedule_validation() {
        let mut s = StirapSchedule::<f64>::reference();
        s.validate().unwrap();
        s.tr = 0.0;
        assert!(s.validate().is_err());
        s.tr = 1.0;
        s.t0 = -1.0;
        assert!(s.validate().is_err());
    }
}
