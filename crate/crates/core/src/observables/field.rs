//! Scattered probe field, intensity and disk-integrated transmission.
//!
//! Fields are normalized to the incident probe amplitude `E₁`, intensities to `E₁²`.

use crate::cloud::{CloudGeometry, DetectorDisk};
use crate::dynamics::EnsembleState;
use crate::error::{Error, Result};
use crate::num::{cis, Complex, Real};
use crate::params::LambdaParams;

use super::quadrature::DiskRule;

/// Doubling both node counts may change `T` by at most this much.
pub const QUADRATURE_TOLERANCE: f64 = 1e-3;

/// Per-atom source terms shared by the field and intensity sums.
struct Sources<'a, T> {
    positions: &'a [[T; 3]],
    /// `−(Γ₁/2Ω₁) σ₁₃ʲ`
    coherent: Vec<Complex<T>>,
    /// `(Γ₁/2Ω₁)² (σ₃₃ʲ − |σ₁₃ʲ|²)`
    incoherent: Vec<T>,
    exclusion: T,
}

impl<'a, T: Real> Sources<'a, T> {
    fn new(state: &EnsembleState<T>, cloud: &'a CloudGeometry<T>, params: &LambdaParams<T>) -> Result<Self> {
        let n = cloud.atom_count();
        if state.atom_count() != n {
            return Err(Error::SizeMismatch { expected: n, found: state.atom_count() });
        }
        if n > 0 && !(params.omega1 > T::zero()) {
            return Err(Error::invalid("omega1", "field normalization needs a non-zero probe"));
        }
        let scale = if n > 0 {
            params.gamma1_frac / (T::lit(2.0) * params.omega1)
        } else {
            T::zero()
        };
        let coherent = (0..n).map(|j| state.s13(j) * (-scale)).collect();
        let incoherent = (0..n)
            .map(|j| scale * scale * (state.s33(j) - state.s13(j).norm_sqr()))
            .collect();
        Ok(Self {
            positions: &cloud.positions,
            coherent,
            incoherent,
            exclusion: cloud.min_pair_separation_k,
        })
    }

    /// `(⟨E⟩, incoherent intensity)` at `point`.
    fn evaluate(&self, point: [T; 3]) -> Result<(Complex<T>, T)> {
        let mut field = cis(point[2]);
        let mut incoherent = T::zero();
        for (j, p) in self.positions.iter().enumerate() {
            let dx = point[0] - p[0];
            let dy = point[1] - p[1];
            let dz = point[2] - p[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            let d = d2.sqrt();
            if !(d > T::zero()) || d < self.exclusion {
                return Err(Error::Singularity { atom: j });
            }
            field = field + self.coherent[j] * cis(d) / d;
            incoherent = incoherent + self.incoherent[j] / d2;
        }
        Ok((field, incoherent))
    }
}

/// `E(r)/E₁ = e^{ik₁z} − (Γ₁/2Ω₁) Σⱼ σ₁₃ʲ e^{ik₁|r−rⱼ|}/(k₁|r−rⱼ|)`.
pub fn total_field<T: Real>(
    point: [T; 3],
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    params: &LambdaParams<T>,
) -> Result<Complex<T>> {
    Ok(Sources::new(state, cloud, params)?.evaluate(point)?.0)
}

/// `I/E₁² = |E/E₁|² + (Γ₁/2Ω₁)² Σⱼ (σ₃₃ʲ − |σ₁₃ʲ|²) / (k₁|r−rⱼ|)²`.
pub fn intensity<T: Real>(
    point: [T; 3],
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    params: &LambdaParams<T>,
) -> Result<T> {
    let (field, incoherent) = Sources::new(state, cloud, params)?.evaluate(point)?;
    Ok(field.norm_sqr() + incoherent)
}

/// Intensity averaged over the detector disk, i.e. transmitted over incident power.
pub fn transmission<T: Real>(
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    params: &LambdaParams<T>,
    detector: &DetectorDisk<T>,
) -> Result<T> {
    if cloud.is_empty() {
        return Ok(T::one());
    }
    let sources = Sources::new(state, cloud, params)?;
    let rule = DiskRule::new(detector.s_max_k, detector.radial_nodes, detector.angular_nodes);
    let mut acc = T::zero();
    for &(x, y, w) in &rule.points {
        let (field, incoherent) = sources.evaluate([x, y, detector.z0_k])?;
        acc = acc + w * (field.norm_sqr() + incoherent);
    }
    Ok(acc / (T::PI() * detector.s_max_k * detector.s_max_k))
}

/// Transmission together with the value on the doubled rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckedTransmission<T> {
    pub value: T,
    pub refined: T,
}

impl<T: Real> CheckedTransmission<T> {
    pub fn discrepancy(&self) -> T {
        (self.refined - self.value).abs()
    }

    pub fn resolved(&self) -> bool {
        self.discrepancy() <= T::lit(QUADRATURE_TOLERANCE)
    }
}

/// [`transmission`] plus a resolution check; logs a warning when doubling both node
/// counts moves `T` by more than [`QUADRATURE_TOLERANCE`].
pub fn transmission_checked<T: Real>(
    state: &EnsembleState<T>,
    cloud: &CloudGeometry<T>,
    params: &LambdaParams<T>,
    detector: &DetectorDisk<T>,
) -> Result<CheckedTransmission<T>> {
    let value = transmission(state, cloud, params, detector)?;
    let refined = transmission(state, cloud, params, &detector.refined())?;
    let checked = CheckedTransmission { value, refined };
    if !checked.resolved() {
        log::warn!(
            "detector quadrature unresolved: T = {value} with {}x{} nodes, {refined} with twice as many",
            detector.radial_nodes,
            detector.angular_nodes
        );
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_atom(s13: Complex<f64>, s11: f64, s22: f64) -> (CloudGeometry<f64>, EnsembleState<f64>) {
        let cloud = CloudGeometry::from_positions(vec![[0.0, 0.0, 0.0]]);
        let z = Complex::new(0.0, 0.0);
        let state = EnsembleState::from_components(&[s11], &[s22], &[s13], &[z], &[z]).unwrap();
        (cloud, state)
    }

    #[test]
    fn empty_cloud_is_plane_wave() {
        let cloud = CloudGeometry::<f64>::from_positions(vec![]);
        let state = EnsembleState::ground(0);
        let p = LambdaParams::eit();
        let e = total_field([0.3, -1.0, 2.0], &state, &cloud, &p).unwrap();
        assert!((e - cis(2.0)).norm() < 1e-15);
        assert!((intensity([0.3, -1.0, 2.0], &state, &cloud, &p).unwrap() - 1.0).abs() < 1e-15);
        let det = DetectorDisk { z0_k: 5.0, s_max_k: 2.0, radial_nodes: 8, angular_nodes: 8 };
        assert_eq!(transmission(&state, &cloud, &p, &det).unwrap(), 1.0);
    }

    #[test]
    fn dark_medium_scatters_nothing() {
        let (cloud, state) = single_atom(Complex::new(0.0, 0.0), 0.4, 0.6);
        let p = LambdaParams::eit();
        let e = total_field([1.0, 0.0, 3.0], &state, &cloud, &p).unwrap();
        assert!((e - cis(3.0)).norm() < 1e-15);
        assert!((intensity([1.0, 0.0, 3.0], &state, &cloud, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_scatterer_on_axis() {
        let c = Complex::new(0.02, -0.07);
        let (cloud, state) = single_atom(c, 0.99, 0.0);
        let p = LambdaParams::eit();
        let d = 7.5;
        let expected = cis(d) - c * (0.5 / (2.0 * 0.1)) * cis(d) / d;
        let e = total_field([0.0, 0.0, d], &state, &cloud, &p).unwrap();
        assert!((e - expected).norm() < 1e-15);
    }

    #[test]
    fn pure_state_has_no_incoherent_light() {
        // σ₃₃ = |σ₁₃|² for an atom in a pure superposition of |1⟩ and |3⟩.
        let c = Complex::new(0.3, 0.4);
        let s33 = c.norm_sqr();
        let (cloud, state) = single_atom(c, 1.0 - s33, 0.0);
        let p = LambdaParams::eit();
        let pt = [0.5, 1.0, 4.0];
        let e = total_field(pt, &state, &cloud, &p).unwrap();
        let i = intensity(pt, &state, &cloud, &p).unwrap();
        assert!((i - e.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn coincident_point_is_singular() {
        let (cloud, state) = single_atom(Complex::new(0.1, 0.0), 0.9, 0.0);
        let err = total_field([0.0, 0.0, 0.0], &state, &cloud, &LambdaParams::eit()).unwrap_err();
        assert!(matches!(err, Error::Singularity { atom: 0 }));
    }

    #[test]
    fn absorbing_atom_reduces_transmission() {
        // Weak-probe two-level response on resonance: σ₁₃ = −iΩ₁/Γ.
        let p = LambdaParams::new(0.1, 0.0, 0.0, 0.0);
        let (cloud, state) = single_atom(Complex::new(0.0, -0.1), 1.0, 0.0);
        let det = DetectorDisk { z0_k: 10.0, s_max_k: 3.0, radial_nodes: 64, angular_nodes: 64 };
        let t = transmission_checked(&state, &cloud, &p, &det).unwrap();
        assert!(t.value < 1.0);
        assert!(t.resolved());
    }
}
