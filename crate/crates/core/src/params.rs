//! Physical parameters of the driven Λ system.
//!
//! Rates, detunings and Rabi frequencies are in units of `Γ = Γ₁ + Γ₂`; wavenumbers
//! in units of `k₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::num::Real;

/// How the excited population feeds the ground states.
///
/// `Total` makes `|3⟩` decay at `Γ` (gain `Γₙ σ₃₃` into `|n⟩`), with optical
/// coherences damped at `Γ/2`; this is the form whose single-atom steady state is the
/// closed-form `σ₃₃` of [`crate::oracle::sigma33_steady`]. `Halved` uses a gain of
/// `(Γₙ/2) σ₃₃`, i.e. an excited-state lifetime of `2/Γ` in the population sector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitedDecay {
    #[default]
    Total,
    Halved,
}

impl ExcitedDecay {
    #[inline]
    pub fn gain<T: Real>(self, gamma_n: T) -> T {
        match self {
            ExcitedDecay::Total => gamma_n,
            ExcitedDecay::Halved => gamma_n / T::lit(2.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams<T> {
    /// `Γ₁/Γ`.
    pub gamma1_frac: T,
    /// `Γ₂/Γ`.
    pub gamma2_frac: T,
    /// Probe Rabi frequency `Ω₁/Γ`.
    pub omega1: T,
    /// Control Rabi frequency `Ω₂/Γ`.
    pub omega2: T,
    /// Probe detuning `Δ₁/Γ`.
    pub delta1: T,
    /// Control detuning `Δ₂/Γ`.
    pub delta2: T,
    pub k2_over_k1: T,
    pub kernel_mode: KernelMode,
    #[serde(default)]
    pub excited_decay: ExcitedDecay,
}

impl<T: Real> LambdaParams<T> {
    /// Symmetric branching, `k₂ = k₁`, scalar kernel, no drive.
    pub fn new(omega1: T, omega2: T, delta1: T, delta2: T) -> Self {
        Self {
            gamma1_frac: T::lit(0.5),
            gamma2_frac: T::lit(0.5),
            omega1,
            omega2,
            delta1,
            delta2,
            k2_over_k1: T::one(),
            kernel_mode: KernelMode::Scalar,
            excited_decay: ExcitedDecay::Total,
        }
    }

    /// EIT regime: `Ω₁ = 0.1Γ`, `Ω₂ = 0.5Γ`, both on resonance.
    pub fn eit() -> Self {
        Self::new(T::lit(0.1), T::lit(0.5), T::zero(), T::zero())
    }

    /// CPT regime: `Ω₁ = Ω₂ = 0.5Γ`.
    pub fn cpt() -> Self {
        Self::new(T::lit(0.5), T::lit(0.5), T::zero(), T::zero())
    }

    pub fn with_mode(mut self, mode: KernelMode) -> Self {
        self.kernel_mode = mode;
        self
    }

    pub fn with_delta1(mut self, delta1: T) -> Self {
        self.delta1 = delta1;
        self
    }

    pub fn with_branching(mut self, gamma1_frac: T) -> Self {
        self.gamma1_frac = gamma1_frac;
        self.gamma2_frac = T::one() - gamma1_frac;
        self
    }

    /// `Γ/Γ`, kept explicit so formulas read like their physical counterparts.
    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma1_frac + self.gamma2_frac
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-9).max(T::EPS * T::lit(16.0));
        if !(self.gamma1_frac >= T::zero() && self.gamma2_frac >= T::zero()) {
            return Err(Error::invalid("gamma_frac", "branching fractions must be non-negative"));
        }
        if (self.gamma() - T::one()).abs() > tol {
            return Err(Error::invalid(
                "gamma_frac",
                format!("gamma1_frac + gamma2_frac must be 1, got {}", self.gamma()),
            ));
        }
        if !(self.omega1 >= T::zero() && self.omega2 >= T::zero()) {
            return Err(Error::invalid("omega", "Rabi frequencies must be non-negative"));
        }
        if !(self.k2_over_k1 > T::zero()) {
            return Err(Error::invalid("k2_over_k1", "must be positive"));
        }
        for (name, v) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.omega1 >= T::one() || self.omega2 >= T::one() {
            log::warn!(
                "Rabi frequencies (omega1 = {}, omega2 = {}) are not below Γ; the factorized dynamics may be inaccurate",
                self.omega1,
                self.omega2
            );
        }
        Ok(())
    }
}
