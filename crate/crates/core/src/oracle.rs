//! Closed-form single-atom results: steady excited population with the control on
//! resonance, scattering cross-section and the optical thickness of the cylinder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::params::LambdaParams;

/// Physical parameters plus the cylinder needed for the optical thickness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleParams<T> {
    pub lambda: LambdaParams<T>,
    pub atom_count: usize,
    pub radius_kr: T,
    pub thickness_kl: T,
}

fn require_resonant_control<T: Real>(p: &LambdaParams<T>) -> Result<()> {
    if p.delta2 != T::zero() {
        return Err(Error::invalid(
            "delta2",
            "closed-form single-atom results assume a resonant control field (delta2 = 0)",
        ));
    }
    Ok(())
}

/// Steady-state `⟨σ₃₃⟩` of a single atom with `Δ₂ = 0`.
///
/// ```text
///                       4 Γ Δ² Ω₁² Ω₂²
/// σ₃₃ = ───────────────────────────────────────────────────────────
///        Γ₂Ω₁²(4Γ²Δ² + S²) + Ω₂²[Γ₁(4Γ²Δ² + (4Δ² − Ω₂²)² + Ω₁⁴ + 2Ω₁²Ω₂²) + 8ΓΔ²Ω₁²]
/// ```
/// with `S = Ω₁² + Ω₂²` and `Δ = Δ₁`. The `Γ₁` bracket is the expanded
/// `4Δ²(Γ² − 2Ω₂²) + 16Δ⁴ + S²` regrouped into non-negative terms.
pub fn sigma33_steady<T: Real>(params: &LambdaParams<T>) -> Result<T> {
    require_resonant_control(params)?;
    let g = params.gamma();
    let (g1, g2) = (params.gamma1_frac, params.gamma2_frac);
    let d2 = params.delta1 * params.delta1;
    let o1 = params.omega1 * params.omega1;
    let o2 = params.omega2 * params.omega2;
    let s = o1 + o2;
    let four = T::lit(4.0);
    let four_g2d2 = four * g * g * d2;
    let shifted = four * d2 - o2;

    let numerator = four * g * d2 * o1 * o2;
    let denominator = g2 * o1 * (four_g2d2 + s * s)
        + o2 * (g1 * (four_g2d2 + shifted * shifted + o1 * o1 + T::lit(2.0) * o1 * o2)
            + T::lit(8.0) * g * d2 * o1);
    if !(denominator > T::zero()) {
        return Err(Error::Degenerate(format!(
            "steady-state denominator vanishes (omega1 = {}, omega2 = {}, delta1 = {})",
            params.omega1, params.omega2, params.delta1
        )));
    }
    Ok(numerator / denominator)
}

/// `σ_sc = π (Γ₁/Ω₁)² σ₃₃` in units of `1/k₁²`.
pub fn scattering_cross_section<T: Real>(params: &LambdaParams<T>) -> Result<T> {
    if !(params.omega1 > T::zero()) {
        return Err(Error::invalid("omega1", "cross-section needs a non-zero probe"));
    }
    let ratio = params.gamma1_frac / params.omega1;
    Ok(T::PI() * ratio * ratio * sigma33_steady(params)?)
}

/// `b = (Γ₁/Ω₁)² σ₃₃ N / (k₁R)²`.
pub fn optical_thickness<T: Real>(params: &OracleParams<T>) -> Result<T> {
    if !(params.radius_kr > T::zero()) {
        return Err(Error::invalid("radius_kr", "must be positive"));
    }
    if params.atom_count == 0 {
        return Ok(T::zero());
    }
    let sigma = scattering_cross_section(&params.lambda)?;
    let n = T::from_usize_lossy(params.atom_count);
    Ok(sigma / T::PI() * n / (params.radius_kr * params.radius_kr))
}

/// One row of the oracle table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleRow<T> {
    pub delta1: T,
    pub sigma33: T,
    pub cross_section_k2: T,
    pub optical_thickness: T,
}

pub fn oracle_table<T: Real>(base: &OracleParams<T>, delta1_grid: &[T]) -> Result<Vec<OracleRow<T>>> {
    delta1_grid
        .iter()
        .map(|&d| {
            let p = OracleParams {
                lambda: base.lambda.with_delta1(d),
                ..*base
            };
            Ok(OracleRow {
                delta1: d,
                sigma33: sigma33_steady(&p.lambda)?,
                cross_section_k2: scattering_cross_section(&p.lambda)?,
                optical_thickness: optical_thickness(&p)?,
            })
        })
        .collect()
}

/// CSV with columns `delta1_over_gamma,sigma33,sigma_sc_k2,b`.
pub fn write_oracle_csv<T: Real, W: std::io::Write>(rows: &[OracleRow<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "delta1_over_gamma,sigma33,sigma_sc_k2,b")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.delta1, r.sigma33, r.cross_section_k2, r.optical_thickness
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eit_at(delta1: f64) -> LambdaParams<f64> {
        LambdaParams::eit().with_delta1(delta1)
    }

    /// Literal transcription of the printed rational function, without regrouping.
    fn sigma33_as_printed(g1: f64, g2: f64, d: f64, o1: f64, o2: f64) -> f64 {
        let g = g1 + g2;
        let s = o1 * o1 + o2 * o2;
        4.0 * g * d * d * o1 * o1 * o2 * o2
            / (g2 * o1 * o1 * (4.0 * g * g * d * d + s * s)
                + o2 * o2
                    * (g1 * (4.0 * d * d * (g * g - 2.0 * o2 * o2) + 16.0 * d.powi(4) + s * s)
                        + 8.0 * g * d * d * o1 * o1))
    }

    #[test]
    fn zero_on_two_photon_resonance() {
        assert_eq!(sigma33_steady(&eit_at(0.0)).unwrap(), 0.0);
        assert_eq!(scattering_cross_section(&eit_at(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_without_control() {
        let mut p = eit_at(0.3);
        p.omega2 = 0.0;
        assert_eq!(sigma33_steady(&p).unwrap(), 0.0);
        assert_eq!(scattering_cross_section(&p).unwrap(), 0.0);
    }

    #[test]
    fn eit_reference_point() {
        // Direct evaluation of the closed form.
        let s = sigma33_steady(&eit_at(0.125)).unwrap();
        assert!((s - 0.011_316_287_985_949_7).abs() < 1e-15);
        assert!((s - 0.0115).abs() < 3e-4);
        let sc = scattering_cross_section(&eit_at(0.125)).unwrap();
        assert!((sc - std::f64::consts::PI * 25.0 * s).abs() < 1e-14);
        assert!((sc - 0.889).abs() < 1e-3);
    }

    #[test]
    fn regrouping_matches_printed_form() {
        for &(g1, d, o1, o2) in &[
            (0.5, 0.125, 0.1, 0.5),
            (0.3, -0.7, 0.2, 0.05),
            (0.8, 0.01, 0.45, 0.3),
            (0.5, 0.26, 0.1, 0.5),
        ] {
            let p = LambdaParams::new(o1, o2, d, 0.0).with_branching(g1);
            let a = sigma33_steady(&p).unwrap();
            let b = sigma33_as_printed(g1, 1.0 - g1, d, o1, o2);
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn optical_thickness_reference_point() {
        let p = OracleParams {
            lambda: eit_at(0.125),
            atom_count: 3142,
            radius_kr: 50.0,
            thickness_kl: 40.0,
        };
        let b = optical_thickness(&p).unwrap();
        assert!((b - 0.355_557_768_518_54).abs() < 1e-12, "{b}");
        assert!((b - 0.36).abs() < 0.02);
        let empty = OracleParams { atom_count: 0, ..p };
        assert_eq!(optical_thickness(&empty).unwrap(), 0.0);
        let resonant = OracleParams { lambda: eit_at(0.0), ..p };
        assert_eq!(optical_thickness(&resonant).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let mut p = eit_at(0.1);
        p.omega1 = 0.0;
        assert!(scattering_cross_section(&p).is_err());
        p.omega2 = 0.0;
        assert!(matches!(sigma33_steady(&p), Err(Error::Degenerate(_))));
        let mut q = eit_at(0.1);
        q.delta2 = 0.2;
        assert!(sigma33_steady(&q).is_err());
    }

    #[test]
    fn transparency_onset_with_control() {
        // Once the Autler-Townes line (Ω₂ ≈ 2|Δ₁|) has moved past the probe,
        // more control means less excitation.
        for &d in &[0.05, 0.1, 0.2] {
            let mut prev = f64::INFINITY;
            let mut o2 = 3.0 * d;
            while o2 < 0.9 {
                let s = sigma33_steady(&LambdaParams::new(0.02, o2, d, 0.0)).unwrap();
                assert!(s < prev, "delta1 = {d}, omega2 = {o2}");
                prev = s;
                o2 += 0.02;
            }
        }
    }

    #[test]
    fn thin_over_studied_regime() {
        for (o1, o2) in [(0.1, 0.5), (0.5, 0.5)] {
            for density in [0.001, 0.005, 0.01] {
                for &d in &[0.05, 0.125, 0.25, 0.5] {
                    let n = crate::cloud::atom_count(50.0, 40.0, density);
                    let p = OracleParams {
                        lambda: LambdaParams::new(o1, o2, d, 0.0),
                        atom_count: n,
                        radius_kr: 50.0,
                        thickness_kl: 40.0,
                    };
                    assert!(optical_thickness(&p).unwrap() < 1.0);
                }
            }
        }
    }

    #[test]
    fn f32_evaluation() {
        let p = LambdaParams::<f32>::eit().with_delta1(0.125);
        let s = sigma33_steady(&p).unwrap();
        assert!((s - 0.011_316_288).abs() < 1e-6);
    }
}
