//! Light-mediated pair couplings and the dense interaction matrices.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{distance, CloudGeometry};
use crate::error::{Error, Result};
use crate::num::{cis, i_unit, Complex, Real};
use crate::params::LambdaParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    /// `Γₙ e^{ikr}/(ikr)`.
    Scalar,
    /// Dipoles along the cylinder axis, including the near-field terms.
    Vectorial,
    /// Independent atoms.
    None,
}

impl KernelMode {
    pub const ALL: [KernelMode; 3] = [KernelMode::None, KernelMode::Scalar, KernelMode::Vectorial];

    pub fn name(self) -> &'static str {
        match self {
            KernelMode::Scalar => "scalar",
            KernelMode::Vectorial => "vectorial",
            KernelMode::None => "none",
        }
    }
}

impl std::fmt::Display for KernelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(KernelMode::Scalar),
            "vectorial" => Ok(KernelMode::Vectorial),
            "none" => Ok(KernelMode::None),
            other => Err(Error::invalid(
                "kernel_mode",
                format!("expected scalar, vectorial or none, got `{other}`"),
            )),
        }
    }
}

/// Scalar coupling `Γₙ e^{i kr} / (i kr)`.
pub fn scalar_green<T: Real>(gamma_n: T, k_r: T) -> Result<Complex<T>> {
    if !(k_r > T::zero()) {
        return Err(Error::KernelDomain(format!("scalar kernel needs kr > 0, got {k_r}")));
    }
    Ok(cis(k_r) / (i_unit::<T>() * k_r) * gamma_n)
}

/// Coupling between two dipoles oriented along `z`:
///
/// `(3Γₙ/2) e^{ikr}/(ikr) [1 + i/kr − 1/(kr)² − (z/r)² (1 + 3i/kr − 3/(kr)²)]`.
pub fn vectorial_green<T: Real>(gamma_n: T, k_r: T, z_over_r: T) -> Result<Complex<T>> {
    if !(k_r > T::zero()) {
        return Err(Error::KernelDomain(format!("vectorial kernel needs kr > 0, got {k_r}")));
    }
    if !(z_over_r.abs() <= T::one()) {
        return Err(Error::KernelDomain(format!(
            "vectorial kernel needs |z/r| <= 1, got {z_over_r}"
        )));
    }
    let inv = k_r.recip();
    let inv2 = inv * inv;
    let cos2 = z_over_r * z_over_r;
    let three = T::lit(3.0);
    let bracket = Complex::new(
        T::one() - inv2 - cos2 * (T::one() - three * inv2),
        inv - cos2 * three * inv,
    );
    let radial = cis(k_r) / (i_unit::<T>() * k_r);
    Ok(radial * bracket * (T::lit(1.5) * gamma_n))
}

/// Dense complex matrix stored as split real and imaginary planes, row-major.
///
/// `Zero` represents the exact zero matrix without storage; products with it are
/// skipped entirely.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingMatrix<T> {
    Zero { n: usize },
    Dense { n: usize, re: Vec<T>, im: Vec<T> },
}

impl<T: Real> CouplingMatrix<T> {
    pub fn dim(&self) -> usize {
        match self {
            CouplingMatrix::Zero { n } | CouplingMatrix::Dense { n, .. } => *n,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        match self {
            CouplingMatrix::Zero { n } => {
                assert!(row < *n && col < *n);
                Complex::new(T::zero(), T::zero())
            }
            CouplingMatrix::Dense { n, re, im } => {
                assert!(row < *n && col < *n);
                Complex::new(re[row * n + col], im[row * n + col])
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CouplingMatrix::Zero { .. })
    }

    /// `y += A x` with `x`, `y` in split real/imaginary form.
    pub fn mul_add(&self, x_re: &[T], x_im: &[T], y_re: &mut [T], y_im: &mut [T]) {
        let CouplingMatrix::Dense { n, re, im } = self else {
            return;
        };
        let n = *n;
        debug_assert!(x_re.len() == n && x_im.len() == n && y_re.len() == n && y_im.len() == n);
        for row in 0..n {
            let a_re = &re[row * n..(row + 1) * n];
            let a_im = &im[row * n..(row + 1) * n];
            let [(acc_re, acc_im)] = row_dots(a_re, a_im, [(x_re, x_im)]);
            y_re[row] = y_re[row] + acc_re;
            y_im[row] = y_im[row] + acc_im;
        }
    }

    /// `y += A x` and `w += c A v` in a single pass over the matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn mul_add_pair(
        &self,
        x_re: &[T],
        x_im: &[T],
        y_re: &mut [T],
        y_im: &mut [T],
        c: T,
        v_re: &[T],
        v_im: &[T],
        w_re: &mut [T],
        w_im: &mut [T],
    ) {
        let CouplingMatrix::Dense { n, re, im } = self else {
            return;
        };
        let n = *n;
        for row in 0..n {
            let a_re = &re[row * n..(row + 1) * n];
            let a_im = &im[row * n..(row + 1) * n];
            let [(p_re, p_im), (q_re, q_im)] = row_dots(a_re, a_im, [(x_re, x_im), (v_re, v_im)]);
            y_re[row] = y_re[row] + p_re;
            y_im[row] = y_im[row] + p_im;
            w_re[row] = w_re[row] + c * q_re;
            w_im[row] = w_im[row] + c * q_im;
        }
    }

    fn write_le_f64<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.dim();
        for row in 0..n {
            for col in 0..n {
                let g = self.get(row, col);
                out.write_all(&g.re.to_f64_lossy().to_le_bytes())?;
                out.write_all(&g.im.to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Complex dot products of one matrix row with `xs.len()` vectors, in split form.
///
/// Several independent lanes let the compiler vectorize, and the row is streamed from
/// memory once for all vectors. The summation order is fixed, so results are
/// reproducible.
#[inline]
fn row_dots<T: Real, const V: usize>(a_re: &[T], a_im: &[T], xs: [(&[T], &[T]); V]) -> [(T, T); V] {
    const LANES: usize = 4;
    let n = a_re.len();
    let a_im = &a_im[..n];
    let xs = xs.map(|(r, i)| (&r[..n], &i[..n]));
    let mut acc = [[[T::zero(); LANES]; 2]; V];
    let chunks = n / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        let ar: &[T; LANES] = a_re[base..base + LANES].try_into().unwrap();
        let ai: &[T; LANES] = a_im[base..base + LANES].try_into().unwrap();
        for (v, (x_re, x_im)) in xs.iter().enumerate() {
            let xr: &[T; LANES] = x_re[base..base + LANES].try_into().unwrap();
            let xi: &[T; LANES] = x_im[base..base + LANES].try_into().unwrap();
            for k in 0..LANES {
                acc[v][0][k] = acc[v][0][k] + ar[k] * xr[k] - ai[k] * xi[k];
                acc[v][1][k] = acc[v][1][k] + ar[k] * xi[k] + ai[k] * xr[k];
            }
        }
    }
    let mut out = [(T::zero(), T::zero()); V];
    for (v, (x_re, x_im)) in xs.iter().enumerate() {
        let [r, i] = acc[v];
        let mut re = (r[0] + r[1]) + (r[2] + r[3]);
        let mut im = (i[0] + i[1]) + (i[2] + i[3]);
        for l in chunks * LANES..n {
            re = re + a_re[l] * x_re[l] - a_im[l] * x_im[l];
            im = im + a_re[l] * x_im[l] + a_im[l] * x_re[l];
        }
        out[v] = (re, im);
    }
    out
}

/// Pairwise couplings of one realization, in units of `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrices<T> {
    pub g1: CouplingMatrix<T>,
    pub g2: CouplingMatrix<T>,
    pub mode: KernelMode,
    /// `Some(c)` when `G₂ = c G₁` (equal wavenumbers), enabling the fused product.
    pub(crate) g2_over_g1: Option<T>,
}

impl<T: Real> InteractionMatrices<T> {
    pub fn atom_count(&self) -> usize {
        self.g1.dim()
    }

    /// Raw dump: `g1` then `g2`, each row-major `(re, im)` pairs of little-endian `f64`,
    /// `32 N²` bytes in total.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        self.g1.write_le_f64(&mut out)?;
        self.g2.write_le_f64(&mut out)
    }
}

fn pair_coupling<T: Real>(
    mode: KernelMode,
    gamma_n: T,
    k_ratio: T,
    r: T,
    z_over_r: T,
) -> Result<Complex<T>> {
    match mode {
        KernelMode::Scalar => scalar_green(gamma_n, k_ratio * r),
        KernelMode::Vectorial => vectorial_green(gamma_n, k_ratio * r, z_over_r),
        KernelMode::None => Ok(Complex::new(T::zero(), T::zero())),
    }
}

/// Assembles `G₁` (wavenumber `k₁`, rate `Γ₁`) and `G₂` (wavenumber `k₂`, rate `Γ₂`).
///
/// Each unordered pair is evaluated once and written to both `(j, l)` and `(l, j)`,
/// so the matrices are exactly symmetric. Rows of the upper triangle are computed in
/// parallel; the result does not depend on the number of threads.
pub fn build_matrices<T: Real>(
    cloud: &CloudGeometry<T>,
    params: &LambdaParams<T>,
) -> Result<InteractionMatrices<T>> {
    let n = cloud.atom_count();
    let mode = params.kernel_mode;
    if mode == KernelMode::None {
        return Ok(InteractionMatrices {
            g1: CouplingMatrix::Zero { n },
            g2: CouplingMatrix::Zero { n },
            mode,
            g2_over_g1: None,
        });
    }

    // Both kernels are linear in the rate, so equal wavenumbers make them proportional.
    let g2_over_g1 = (params.k2_over_k1 == T::one() && params.gamma1_frac > T::zero())
        .then(|| params.gamma2_frac / params.gamma1_frac);

    let pos = &cloud.positions;
    let rows: Vec<Vec<[Complex<T>; 2]>> = (0..n)
        .into_par_iter()
        .map(|j| {
            ((j + 1)..n)
                .map(|l| {
                    let r = distance(&pos[j], &pos[l]);
                    let cos = ((pos[j][2] - pos[l][2]) / r).max(-T::one()).min(T::one());
                    let g1 = pair_coupling(mode, params.gamma1_frac, T::one(), r, cos)?;
                    let g2 = pair_coupling(mode, params.gamma2_frac, params.k2_over_k1, r, cos)?;
                    Ok([g1, g2])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut g1_re = vec![T::zero(); n * n];
    let mut g1_im = vec![T::zero(); n * n];
    let mut g2_re = vec![T::zero(); n * n];
    let mut g2_im = vec![T::zero(); n * n];
    for (j, row) in rows.iter().enumerate() {
        for (offset, [a, b]) in row.iter().enumerate() {
            let l = j + 1 + offset;
            for idx in [j * n + l, l * n + j] {
                g1_re[idx] = a.re;
                g1_im[idx] = a.im;
                g2_re[idx] = b.re;
                g2_im[idx] = b.im;
            }
        }
    }

    Ok(InteractionMatrices {
        g1: CouplingMatrix::Dense { n, re: g1_re, im: g1_im },
        g2: CouplingMatrix::Dense { n, re: g2_re, im: g2_im },
        mode,
        g2_over_g1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn scalar_at_one_wavelength() {
        let g = scalar_green(0.5, std::f64::consts::TAU).unwrap();
        assert!(close(g, Complex::new(0.0, -1.0 / (4.0 * std::f64::consts::PI)), 1e-15));
        assert!((g.im + 0.07958).abs() < 1e-5);
    }

    #[test]
    fn scalar_far_field_decay() {
        for kr in [1e3f64, 1e5, 1e7] {
            let g = scalar_green(0.3, kr).unwrap();
            assert!((g.norm() * kr / 0.3 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(scalar_green(0.5, 0.0).is_err());
        assert!(scalar_green(0.5, -1.0).is_err());
        assert!(vectorial_green(0.5, 0.0, 0.0).is_err());
        assert!(vectorial_green(0.5, 1.0, 1.5).is_err());
        assert!(vectorial_green(0.5, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn vectorial_at_one_wavelength() {
        // (3/2)(1/2) · (-i/2π) · (1 + i/2π − 1/4π²), expanded by hand.
        let a = 1.0 / std::f64::consts::TAU;
        let expected = Complex::new(0.75 * a * a, -0.75 * a * (1.0 - a * a));
        let g = vectorial_green(0.5, std::f64::consts::TAU, 0.0).unwrap();
        assert!(close(g, expected, 1e-15));
        assert!(close(g, Complex::new(0.5 * 0.037995, -0.5 * 0.232685), 1e-6));
    }

    #[test]
    fn vectorial_transverse_far_field_ratio() {
        for kr in [100.0, 1e3, 1e4] {
            let ratio = vectorial_green(0.5, kr, 0.0).unwrap() / scalar_green(0.5, kr).unwrap();
            // Leading correction is 1.5 i/kr.
            assert!((ratio - Complex::new(1.5, 0.0)).norm() < 1.6 / kr);
        }
    }

    #[test]
    fn vectorial_axial_has_no_far_field() {
        for kr in [1e2, 1e3, 1e4] {
            let g = vectorial_green(1.0, kr, 1.0).unwrap();
            let bracket = Complex::new(2.0 / (kr * kr), -2.0 / kr);
            let expected = cis(kr) / Complex::new(0.0, kr) * bracket * 1.5;
            assert!(close(g, expected, 1e-12 * g.norm()));
            assert!(g.norm() * kr * kr < 3.1);
        }
    }

    fn pair(sep: f64) -> CloudGeometry<f64> {
        CloudGeometry::from_positions(vec![[0.0, 0.0, 0.0], [0.0, 0.0, sep]])
    }

    #[test]
    fn single_atom_matrices_are_zero() {
        let cloud = CloudGeometry::from_positions(vec![[1.0, 2.0, 3.0]]);
        for mode in KernelMode::ALL {
            let m = build_matrices(&cloud, &LambdaParams::eit().with_mode(mode)).unwrap();
            assert_eq!(m.atom_count(), 1);
            assert_eq!(m.g1.get(0, 0), Complex::new(0.0, 0.0));
            assert_eq!(m.g2.get(0, 0), Complex::new(0.0, 0.0));
        }
    }

    #[test]
    fn mode_none_is_exact_zero() {
        let m = build_matrices(&pair(1.0), &LambdaParams::eit().with_mode(KernelMode::None)).unwrap();
        for j in 0..2 {
            for l in 0..2 {
                assert_eq!(m.g1.get(j, l), Complex::new(0.0, 0.0));
                assert_eq!(m.g2.get(j, l), Complex::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn two_atoms_one_wavelength_apart() {
        let m = build_matrices(&pair(std::f64::consts::TAU), &LambdaParams::eit()).unwrap();
        let expected = Complex::new(0.0, -1.0 / (4.0 * std::f64::consts::PI));
        assert!(close(m.g1.get(0, 1), expected, 1e-15));
        assert_eq!(m.g1.get(0, 1), m.g1.get(1, 0));
        assert!(close(m.g2.get(0, 1), expected, 1e-15));
        assert_eq!(m.g1.get(0, 0), Complex::new(0.0, 0.0));
    }

    #[test]
    fn second_transition_uses_its_own_wavenumber() {
        let mut params = LambdaParams::eit().with_branching(0.3);
        params.k2_over_k1 = 1.2;
        let m = build_matrices(&pair(2.0), &params).unwrap();
        assert!(close(m.g1.get(0, 1), scalar_green(0.3, 2.0).unwrap(), 1e-15));
        assert!(close(m.g2.get(0, 1), scalar_green(0.7, 2.4).unwrap(), 1e-15));
    }

    #[test]
    fn binary_dump_layout() {
        let m = build_matrices(&pair(1.0), &LambdaParams::eit()).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 * 4);
        let at = |k: usize| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().unwrap());
        // g1[0][1] is the second complex pair.
        assert_eq!(at(2), m.g1.get(0, 1).re);
        assert_eq!(at(3), m.g1.get(0, 1).im);
        // g2 starts after the four g1 entries.
        assert_eq!(at(8 + 2), m.g2.get(0, 1).re);
    }

    #[test]
    fn matvec_matches_entrywise_sum() {
        let cloud = CloudGeometry::from_positions(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.5, -0.3],
            [-2.0, 0.1, 1.7],
        ]);
        let m = build_matrices(&cloud, &LambdaParams::eit().with_mode(KernelMode::Vectorial)).unwrap();
        let x = [Complex::new(0.3, -0.1), Complex::new(-0.7, 0.2), Complex::new(0.05, 0.9)];
        let (xr, xi): (Vec<f64>, Vec<f64>) = x.iter().map(|c| (c.re, c.im)).unzip();
        let mut yr = vec![0.0; 3];
        let mut yi = vec![0.0; 3];
        m.g1.mul_add(&xr, &xi, &mut yr, &mut yi);
        for j in 0..3 {
            let direct: Complex<f64> = (0..3).map(|l| m.g1.get(j, l) * x[l]).sum();
            assert!(close(Complex::new(yr[j], yi[j]), direct, 1e-15));
        }
    }
}
