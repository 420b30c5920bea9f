use serde::{Deserialize, Serialize};

use crate::cloud::CloudGeometry;
use crate::error::{Error, Result};
use crate::num::{Complex, Real};
use crate::params::LambdaParams;

/// Block order inside the flat state vector. Each block holds `N` reals.
pub(crate) const S11: usize = 0;
pub(crate) const S22: usize = 1;
pub(crate) const S13_RE: usize = 2;
pub(crate) const S13_IM: usize = 3;
pub(crate) const S23_RE: usize = 4;
pub(crate) const S23_IM: usize = 5;
pub(crate) const S12_RE: usize = 6;
pub(crate) const S12_IM: usize = 7;
pub(crate) const BLOCKS: usize = 8;

/// Per-atom expectation values of the ensemble.
///
/// Stored component-major: all `σ₁₁`, then all `σ₂₂`, then the real and imaginary
/// parts of `σ₁₃`, `σ₂₃` and `σ₁₂`. The excited population is never stored; it is
/// `σ₃₃ = 1 − σ₁₁ − σ₂₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState<T> {
    pub time: T,
    n: usize,
    data: Vec<T>,
}

impl<T: Real> EnsembleState<T> {
    /// Every atom in `|1⟩`.
    pub fn ground(n: usize) -> Self {
        let mut data = vec![T::zero(); BLOCKS * n];
        data[..n].iter_mut().for_each(|x| *x = T::one());
        Self { time: T::zero(), n, data }
    }

    pub fn from_components(
        s11: &[T],
        s22: &[T],
        s13: &[Complex<T>],
        s23: &[Complex<T>],
        s12: &[Complex<T>],
    ) -> Result<Self> {
        let n = s11.len();
        for len in [s22.len(), s13.len(), s23.len(), s12.len()] {
            if len != n {
                return Err(Error::SizeMismatch { expected: n, found: len });
            }
        }
        let mut data = Vec::with_capacity(BLOCKS * n);
        data.extend_from_slice(s11);
        data.extend_from_slice(s22);
        for c in [s13, s23, s12] {
            data.extend(c.iter().map(|z| z.re));
            data.extend(c.iter().map(|z| z.im));
        }
        Ok(Self { time: T::zero(), n, data })
    }

    /// Every atom in the dark superposition `(Ω₂|1⟩ − Ω₁e^{i(k₁−k₂)z}|2⟩)/√(Ω₁² + Ω₂²)`
    /// of the static drive. A fixed point of the equations on two-photon resonance
    /// (`Δ₁ = Δ₂`), with or without interactions, since no atom radiates.
    pub fn dark(cloud: &CloudGeometry<T>, params: &LambdaParams<T>) -> Result<Self> {
        let s = params.omega1 * params.omega1 + params.omega2 * params.omega2;
        if !(s > T::zero()) {
            return Err(Error::invalid("omega1", "dark state needs a non-zero drive"));
        }
        let n = cloud.atom_count();
        let s11 = vec![params.omega2 * params.omega2 / s; n];
        let s22 = vec![params.omega1 * params.omega1 / s; n];
        let amp = -(params.omega1 * params.omega2 / s);
        let s12: Vec<Complex<T>> = cloud
            .positions
            .iter()
            .map(|r| Complex::from_polar(amp, (T::one() - params.k2_over_k1) * r[2]))
            .collect();
        let zero = vec![Complex::new(T::zero(), T::zero()); n];
        Self::from_components(&s11, &s22, &zero, &zero, &s12)
    }

    pub(crate) fn from_flat(n: usize, time: T, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), BLOCKS * n);
        Self { time, n, data }
    }

    pub fn atom_count(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn block(&self, b: usize) -> &[T] {
        &self.data[b * self.n..(b + 1) * self.n]
    }

    pub(crate) fn block_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.n;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn s11(&self, j: usize) -> T {
        self.block(S11)[j]
    }

    pub fn s22(&self, j: usize) -> T {
        self.block(S22)[j]
    }

    pub fn s33(&self, j: usize) -> T {
        T::one() - (self.s11(j) + self.s22(j))
    }

    pub fn s13(&self, j: usize) -> Complex<T> {
        Complex::new(self.block(S13_RE)[j], self.block(S13_IM)[j])
    }

    pub fn s23(&self, j: usize) -> Complex<T> {
        Complex::new(self.block(S23_RE)[j], self.block(S23_IM)[j])
    }

    pub fn s12(&self, j: usize) -> Complex<T> {
        Complex::new(self.block(S12_RE)[j], self.block(S12_IM)[j])
    }

    pub fn set_s13(&mut self, j: usize, v: Complex<T>) {
        self.block_mut(S13_RE)[j] = v.re;
        self.block_mut(S13_IM)[j] = v.im;
    }

    /// Ensemble means `(⟨σ₁₁⟩, ⟨σ₂₂⟩, ⟨σ₃₃⟩)`; all zero for an empty ensemble.
    pub fn mean_populations(&self) -> [T; 3] {
        if self.n == 0 {
            return [T::zero(); 3];
        }
        let n = T::from_usize_lossy(self.n);
        let m11 = self.block(S11).iter().copied().sum::<T>() / n;
        let m22 = self.block(S22).iter().copied().sum::<T>() / n;
        [m11, m22, T::one() - (m11 + m22)]
    }

    /// Largest violation of the physical bounds: `max(−σ₃₃, |σ_ab| − 1)` over atoms.
    pub fn physicality_excess(&self) -> T {
        physicality_excess(self.n, &self.data)
    }

    /// Per-atom CSV: `atom_index,s11,s22,s33,s13_re,s13_im,s23_re,s23_im,s12_re,s12_im`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "atom_index,s11,s22,s33,s13_re,s13_im,s23_re,s23_im,s12_re,s12_im")?;
        for j in 0..self.n {
            let (a, b, c) = (self.s13(j), self.s23(j), self.s12(j));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                j,
                self.s11(j),
                self.s22(j),
                self.s33(j),
                a.re,
                a.im,
                b.re,
                b.im,
                c.re,
                c.im
            )?;
        }
        Ok(())
    }
}

/// Time derivative of an [`EnsembleState`], same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StateRate<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> StateRate<T> {
    pub(crate) fn from_flat(n: usize, data: Vec<T>) -> Self {
        Self { n, data }
    }

    fn at(&self, b: usize, j: usize) -> T {
        self.data[b * self.n + j]
    }

    pub fn ds11(&self, j: usize) -> T {
        self.at(S11, j)
    }

    pub fn ds22(&self, j: usize) -> T {
        self.at(S22, j)
    }

    /// `dσ₃₃/dt = −dσ₁₁/dt − dσ₂₂/dt`.
    pub fn ds33(&self, j: usize) -> T {
        -(self.ds11(j) + self.ds22(j))
    }

    pub fn ds13(&self, j: usize) -> Complex<T> {
        Complex::new(self.at(S13_RE, j), self.at(S13_IM, j))
    }

    pub fn ds23(&self, j: usize) -> Complex<T> {
        Complex::new(self.at(S23_RE, j), self.at(S23_IM, j))
    }

    pub fn ds12(&self, j: usize) -> Complex<T> {
        Complex::new(self.at(S12_RE, j), self.at(S12_IM, j))
    }

    /// Max-norm over every stored real component.
    pub fn max_norm(&self) -> T {
        max_abs(&self.data)
    }
}

pub(crate) fn physicality_excess<T: Real>(n: usize, y: &[T]) -> T {
    let mut worst = T::neg_infinity();
    for j in 0..n {
        let s33 = T::one() - (y[S11 * n + j] + y[S22 * n + j]);
        worst = worst.max(-s33);
        for (re, im) in [(S13_RE, S13_IM), (S23_RE, S23_IM), (S12_RE, S12_IM)] {
            worst = worst.max(y[re * n + j].hypot(y[im * n + j]) - T::one());
        }
    }
    worst
}

pub(crate) fn max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
