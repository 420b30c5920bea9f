//! Mean-field equations of motion of the coupled three-level dipoles.

use crate::cloud::CloudGeometry;
use crate::error::{Error, Result};
use crate::kernel::InteractionMatrices;
use crate::num::{Complex, Real};
use crate::params::LambdaParams;

use super::drive::Drive;
use super::integrator::OdeSystem;
use super::state::*;

/// Which transition an effective field drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    /// `|1⟩ ↔ |3⟩`, probe.
    Probe,
    /// `|2⟩ ↔ |3⟩`, control.
    Control,
}

/// Mean fields `Fₙʲ = iΩₙ e^{ikₙzⱼ} + Σ_{l≠j} Gₙʲˡ σₙ₃ˡ` in split form.
#[derive(Clone, Debug, Default)]
pub(crate) struct Fields<T> {
    pub f1_re: Vec<T>,
    pub f1_im: Vec<T>,
    pub f2_re: Vec<T>,
    pub f2_im: Vec<T>,
}

impl<T: Real> Fields<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            f1_re: vec![T::zero(); n],
            f1_im: vec![T::zero(); n],
            f2_re: vec![T::zero(); n],
            f2_im: vec![T::zero(); n],
        }
    }
}

/// Right-hand side of the ensemble equations for one realization.
pub struct EnsembleSystem<'a, T> {
    params: LambdaParams<T>,
    drive: Drive<T>,
    matrices: &'a InteractionMatrices<T>,
    /// `e^{ik₁zⱼ}` and `e^{ik₂zⱼ}`.
    phase1: Vec<Complex<T>>,
    phase2: Vec<Complex<T>>,
    fields: Fields<T>,
}

impl<'a, T: Real> EnsembleSystem<'a, T> {
    pub fn new(
        cloud: &CloudGeometry<T>,
        matrices: &'a InteractionMatrices<T>,
        params: &LambdaParams<T>,
        drive: Drive<T>,
    ) -> Result<Self> {
        let n = cloud.atom_count();
        if matrices.atom_count() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: matrices.atom_count(),
            });
        }
        let phase = |k: T| {
            cloud
                .positions
                .iter()
                .map(|p| crate::num::cis(k * p[2]))
                .collect::<Vec<_>>()
        };
        Ok(Self {
            params: *params,
            drive,
            matrices,
            phase1: phase(T::one()),
            phase2: phase(params.k2_over_k1),
            fields: Fields::zeros(n),
        })
    }

    pub fn atom_count(&self) -> usize {
        self.phase1.len()
    }

    pub fn params(&self) -> &LambdaParams<T> {
        &self.params
    }

    pub fn drive(&self) -> &Drive<T> {
        &self.drive
    }

    /// Fills `self.fields` for the flat state `y` at time `t`.
    pub(crate) fn compute_fields(&mut self, t: T, y: &[T]) {
        let n = self.atom_count();
        let (omega1, omega2) = self.drive.rabi(t, &self.params);
        let f = &mut self.fields;
        for j in 0..n {
            // iΩ e^{iφ} = Ω(−sin φ + i cos φ)
            f.f1_re[j] = -omega1 * self.phase1[j].im;
            f.f1_im[j] = omega1 * self.phase1[j].re;
            f.f2_re[j] = -omega2 * self.phase2[j].im;
            f.f2_im[j] = omega2 * self.phase2[j].re;
        }
        let blk = |b: usize| &y[b * n..(b + 1) * n];
        let m = self.matrices;
        match m.g2_over_g1 {
            Some(c) => m.g1.mul_add_pair(
                blk(S13_RE),
                blk(S13_IM),
                &mut f.f1_re,
                &mut f.f1_im,
                c,
                blk(S23_RE),
                blk(S23_IM),
                &mut f.f2_re,
                &mut f.f2_im,
            ),
            None => {
                m.g1.mul_add(blk(S13_RE), blk(S13_IM), &mut f.f1_re, &mut f.f1_im);
                m.g2.mul_add(blk(S23_RE), blk(S23_IM), &mut f.f2_re, &mut f.f2_im);
            }
        }
    }

    pub(crate) fn fields(&self) -> &Fields<T> {
        &self.fields
    }
}

impl<T: Real> OdeSystem<T> for EnsembleSystem<'_, T> {
    fn dim(&self) -> usize {
        BLOCKS * self.atom_count()
    }

    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]) {
        self.compute_fields(t, y);
        local_rhs(self.atom_count(), y, &self.fields, &self.params, dydt);
    }
}

/// Per-atom part of the equations given the mean fields.
///
/// ```text
/// dσₙₙ/dt = g(Γₙ) σ₃₃ + Re(σ₃ₙ Fₙ)
/// dσₙ₃/dt = −(Γ/2 + iΔₙ) σₙ₃ − ½[(σₙₙ − σ₃₃) Fₙ + σₙₘ Fₘ]
/// dσ₁₂/dt = i(Δ₂ − Δ₁) σ₁₂ + ½[σ₃₂ F₁ + σ₁₃ F₂*]
/// ```
/// with `σ₃ₙ = σₙ₃*`, `σ₂₁ = σ₁₂*` and `g` the excited-decay convention.
pub(crate) fn local_rhs<T: Real>(
    n: usize,
    y: &[T],
    f: &Fields<T>,
    p: &LambdaParams<T>,
    dydt: &mut [T],
) {
    let half = T::lit(0.5);
    let half_gamma = half * p.gamma();
    let gain1 = p.excited_decay.gain(p.gamma1_frac);
    let gain2 = p.excited_decay.gain(p.gamma2_frac);
    let d21 = p.delta2 - p.delta1;
    for j in 0..n {
        let s11 = y[S11 * n + j];
        let s22 = y[S22 * n + j];
        let s33 = T::one() - (s11 + s22);
        let s13 = Complex::new(y[S13_RE * n + j], y[S13_IM * n + j]);
        let s23 = Complex::new(y[S23_RE * n + j], y[S23_IM * n + j]);
        let s12 = Complex::new(y[S12_RE * n + j], y[S12_IM * n + j]);
        let f1 = Complex::new(f.f1_re[j], f.f1_im[j]);
        let f2 = Complex::new(f.f2_re[j], f.f2_im[j]);

        let d11 = gain1 * s33 + (s13.conj() * f1).re;
        let d22 = gain2 * s33 + (s23.conj() * f2).re;
        let d13 = -(Complex::new(half_gamma, p.delta1) * s13)
            - (f1 * (s11 - s33) + s12 * f2) * half;
        let d23 = -(Complex::new(half_gamma, p.delta2) * s23)
            - (f2 * (s22 - s33) + s12.conj() * f1) * half;
        let d12 = Complex::new(T::zero(), d21) * s12 + (s23.conj() * f1 + s13 * f2.conj()) * half;

        dydt[S11 * n + j] = d11;
        dydt[S22 * n + j] = d22;
        dydt[S13_RE * n + j] = d13.re;
        dydt[S13_IM * n + j] = d13.im;
        dydt[S23_RE * n + j] = d23.re;
        dydt[S23_IM * n + j] = d23.im;
        dydt[S12_RE * n + j] = d12.re;
        dydt[S12_IM * n + j] = d12.im;
    }
}

/// Mean field acting on `transition` for every atom, with the static drive of `params`.
pub fn effective_field<T: Real>(
    state: &EnsembleState<T>,
    matrices: &InteractionMatrices<T>,
    params: &LambdaParams<T>,
    cloud: &CloudGeometry<T>,
    transition: Transition,
) -> Result<Vec<Complex<T>>> {
    if state.atom_count() != cloud.atom_count() {
        return Err(Error::SizeMismatch {
            expected: cloud.atom_count(),
            found: state.atom_count(),
        });
    }
    let mut sys = EnsembleSystem::new(cloud, matrices, params, Drive::Static)?;
    sys.compute_fields(state.time, state.as_slice());
    let f = sys.fields();
    let (re, im) = match transition {
        Transition::Probe => (&f.f1_re, &f.f1_im),
        Transition::Control => (&f.f2_re, &f.f2_im),
    };
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect())
}

/// Time derivative of `state` for given mean fields.
pub fn rhs<T: Real>(
    state: &EnsembleState<T>,
    f1: &[Complex<T>],
    f2: &[Complex<T>],
    params: &LambdaParams<T>,
) -> Result<StateRate<T>> {
    let n = state.atom_count();
    for len in [f1.len(), f2.len()] {
        if len != n {
            return Err(Error::SizeMismatch { expected: n, found: len });
        }
    }
    let fields = Fields {
        f1_re: f1.iter().map(|z| z.re).collect(),
        f1_im: f1.iter().map(|z| z.im).collect(),
        f2_re: f2.iter().map(|z| z.re).collect(),
        f2_im: f2.iter().map(|z| z.im).collect(),
    };
    let mut out = vec![T::zero(); BLOCKS * n];
    local_rhs(n, state.as_slice(), &fields, params, &mut out);
    Ok(StateRate::from_flat(n, out))
}

/// Full derivative (fields included) of `state` under `drive`.
pub fn full_rhs<T: Real>(
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    matrices: &InteractionMatrices<T>,
    params: &LambdaParams<T>,
    drive: Drive<T>,
) -> Result<StateRate<T>> {
    let mut sys = EnsembleSystem::new(cloud, matrices, params, drive)?;
    if state.atom_count() != sys.atom_count() {
        return Err(Error::SizeMismatch {
            expected: sys.atom_count(),
            found: state.atom_count(),
        });
    }
    let mut out = vec![T::zero(); state.as_slice().len()];
    sys.rhs(state.time, state.as_slice(), &mut out);
    Ok(StateRate::from_flat(state.atom_count(), out))
}
