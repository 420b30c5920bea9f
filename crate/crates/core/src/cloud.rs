//! Disordered homogeneous cylindrical clouds and the detector disk.
//!
//! All lengths are dimensionless, measured in units of `1/k₁`. The cylinder axis is
//! `z`, the cloud occupies `x² + y² ≤ R²`, `|z| ≤ L/2`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::seeds::position_rng;

/// Exclusion distance used when none is configured.
pub const DEFAULT_MIN_PAIR_SEPARATION: f64 = 0.05;

/// Resampling budget for a single atom before placement is declared impossible.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Cylinder parameters without a particular draw of positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec<T> {
    pub radius_kr: T,
    pub thickness_kl: T,
    pub density: T,
    pub min_pair_separation_k: T,
}

impl<T: Real> CloudSpec<T> {
    pub fn new(radius_kr: T, thickness_kl: T, density: T) -> Self {
        Self {
            radius_kr,
            thickness_kl,
            density,
            min_pair_separation_k: T::lit(DEFAULT_MIN_PAIR_SEPARATION),
        }
    }

    pub fn with_min_separation(mut self, min_pair_separation_k: T) -> Self {
        self.min_pair_separation_k = min_pair_separation_k;
        self
    }

    /// `round(ρ π R² L)`.
    pub fn atom_count(&self) -> usize {
        atom_count(self.radius_kr, self.thickness_kl, self.density)
    }

    pub fn sample(&self, seed: u64) -> Result<CloudGeometry<T>> {
        sample_cloud(
            self.radius_kr,
            self.thickness_kl,
            self.density,
            seed,
            self.min_pair_separation_k,
        )
    }
}

/// One realization of atom positions in the cylinder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudGeometry<T> {
    pub radius_kr: T,
    pub thickness_kl: T,
    pub density: T,
    pub seed: u64,
    pub min_pair_separation_k: T,
    pub positions: Vec<[T; 3]>,
}

impl<T: Real> CloudGeometry<T> {
    /// Cloud built from explicit positions; used for hand-made configurations in tests
    /// and debugging. No containment or exclusion checks are made.
    pub fn from_positions(positions: Vec<[T; 3]>) -> Self {
        Self {
            radius_kr: T::zero(),
            thickness_kl: T::zero(),
            density: T::zero(),
            seed: 0,
            min_pair_separation_k: T::zero(),
            positions,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spec(&self) -> CloudSpec<T> {
        CloudSpec {
            radius_kr: self.radius_kr,
            thickness_kl: self.thickness_kl,
            density: self.density,
            min_pair_separation_k: self.min_pair_separation_k,
        }
    }

    /// Smallest pair distance, `None` for fewer than two atoms.
    pub fn min_pair_distance(&self) -> Option<T> {
        let mut best: Option<T> = None;
        for (j, a) in self.positions.iter().enumerate() {
            for b in &self.positions[j + 1..] {
                let d = distance(a, b);
                best = Some(match best {
                    Some(m) if m <= d => m,
                    _ => d,
                });
            }
        }
        best
    }

    /// CSV dump with columns `atom_index,kx,ky,kz`.
    pub fn write_positions_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "atom_index,kx,ky,kz")?;
        for (j, p) in self.positions.iter().enumerate() {
            writeln!(out, "{},{},{},{}", j, p[0], p[1], p[2])?;
        }
        Ok(())
    }
}

#[inline]
pub fn distance<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Number of atoms for a cylinder of density `density` (in `k₁³`).
pub fn atom_count<T: Real>(radius_kr: T, thickness_kl: T, density: T) -> usize {
    let n = density.to_f64_lossy()
        * std::f64::consts::PI
        * radius_kr.to_f64_lossy().powi(2)
        * thickness_kl.to_f64_lossy();
    n.round() as usize
}

/// Draws `round(ρπR²L)` atoms uniformly in the cylinder with hard-core exclusion.
///
/// Each candidate is drawn as `r = R√u`, `φ = 2πu'`, `z = L(u'' - ½)`; a candidate
/// closer than `min_pair_separation_k` to an already placed atom (or falling outside
/// the cylinder after rounding to `T`) is redrawn, up to [`MAX_PLACEMENT_ATTEMPTS`]
/// times per atom.
pub fn sample_cloud<T: Real>(
    radius_kr: T,
    thickness_kl: T,
    density: T,
    seed: u64,
    min_pair_separation_k: T,
) -> Result<CloudGeometry<T>> {
    let positive = |name: &'static str, v: T| {
        if v > T::zero() && v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
        }
    };
    positive("radius_kr", radius_kr)?;
    positive("thickness_kl", thickness_kl)?;
    if !(density >= T::zero()) || !density.is_finite() {
        return Err(Error::invalid("density", format!("must be non-negative and finite, got {density}")));
    }
    if !(min_pair_separation_k >= T::zero()) || !min_pair_separation_k.is_finite() {
        return Err(Error::invalid(
            "min_pair_separation_k",
            format!("must be non-negative, got {min_pair_separation_k}"),
        ));
    }

    let total = atom_count(radius_kr, thickness_kl, density);
    let r_max = radius_kr.to_f64_lossy();
    let l = thickness_kl.to_f64_lossy();
    let r2 = radius_kr * radius_kr;
    let half_l = thickness_kl / T::lit(2.0);

    let mut rng = position_rng(seed);
    let mut positions: Vec<[T; 3]> = Vec::with_capacity(total);
    for atom in 0..total {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let rho = r_max * rng.gen::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.gen::<f64>();
            let z = l * (rng.gen::<f64>() - 0.5);
            let p = [T::lit(rho * phi.cos()), T::lit(rho * phi.sin()), T::lit(z)];
            if p[0] * p[0] + p[1] * p[1] > r2 || p[2].abs() > half_l {
                continue;
            }
            if positions
                .iter()
                .any(|q| distance(&p, q) < min_pair_separation_k)
            {
                continue;
            }
            positions.push(p);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Placement {
                atom,
                total,
                attempts: MAX_PLACEMENT_ATTEMPTS,
                min_separation: min_pair_separation_k.to_f64_lossy(),
            });
        }
    }

    Ok(CloudGeometry {
        radius_kr,
        thickness_kl,
        density,
        seed,
        min_pair_separation_k,
        positions,
    })
}

pub const DEFAULT_DETECTOR_OFFSET: f64 = 10.0;
pub const DEFAULT_DETECTOR_RADIUS_FRACTION: f64 = 0.6;
pub const DEFAULT_RADIAL_NODES: usize = 64;
pub const DEFAULT_ANGULAR_NODES: usize = 128;

/// Disk in the plane `z = z₀` over which transmitted intensity is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorDisk<T> {
    pub z0_k: T,
    pub s_max_k: T,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl<T: Real> DetectorDisk<T> {
    /// Default detector: `z₀ = L/2 + 10`, `s_max = 0.6 R`, 64 × 128 nodes.
    pub fn for_cloud(spec: &CloudSpec<T>) -> Self {
        Self {
            z0_k: spec.thickness_kl / T::lit(2.0) + T::lit(DEFAULT_DETECTOR_OFFSET),
            s_max_k: spec.radius_kr * T::lit(DEFAULT_DETECTOR_RADIUS_FRACTION),
            radial_nodes: DEFAULT_RADIAL_NODES,
            angular_nodes: DEFAULT_ANGULAR_NODES,
        }
    }

    /// Same disk with both node counts doubled.
    pub fn refined(&self) -> Self {
        Self {
            radial_nodes: self.radial_nodes * 2,
            angular_nodes: self.angular_nodes * 2,
            ..*self
        }
    }

    pub fn validate(&self, spec: &CloudSpec<T>) -> Result<()> {
        if !(self.s_max_k > T::zero() && self.s_max_k < spec.radius_kr) {
            return Err(Error::invalid(
                "s_max_k",
                format!("need 0 < s_max < R = {}, got {}", spec.radius_kr, self.s_max_k),
            ));
        }
        if !(self.z0_k > spec.thickness_kl / T::lit(2.0)) {
            return Err(Error::invalid(
                "z0_k",
                format!("detector must sit beyond the cloud face L/2 = {}", spec.thickness_kl / T::lit(2.0)),
            ));
        }
        if self.radial_nodes == 0 || self.angular_nodes == 0 {
            return Err(Error::invalid("nodes", "quadrature node counts must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_atom_counts() {
        assert_eq!(atom_count(50.0, 40.0, 0.01), 3142);
        assert_eq!(atom_count(20.0, 20.0, 0.01), 251);
    }

    #[test]
    fn tiny_cloud_is_empty() {
        let c = sample_cloud(1.0, 1.0, 0.1, 3, 0.05).unwrap();
        assert_eq!(c.atom_count(), 0);
        assert!(c.positions.is_empty());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample_cloud(0.0, 1.0, 0.1, 0, 0.0).is_err());
        assert!(sample_cloud(1.0, -1.0, 0.1, 0, 0.0).is_err());
        assert!(sample_cloud(1.0, 1.0, -0.1, 0, 0.0).is_err());
        assert_eq!(sample_cloud(1.0, 1.0, 0.0, 0, 0.0).unwrap().atom_count(), 0);
        assert!(sample_cloud(1.0, 1.0, 0.1, 0, -0.1).is_err());
    }

    #[test]
    fn overcrowded_cloud_fails_placement() {
        // 126 atoms in a disk of radius 2 cannot be spaced 3 apart.
        let err = sample_cloud(2.0, 1.0, 10.0, 1, 3.0).unwrap_err();
        assert!(matches!(err, Error::Placement { .. }), "{err}");
    }

    #[test]
    fn containment_and_exclusion() {
        let c = sample_cloud(8.0f64, 6.0, 0.05, 11, 0.8).unwrap();
        assert_eq!(c.atom_count(), 60);
        for p in &c.positions {
            assert!(p[0] * p[0] + p[1] * p[1] <= 64.0);
            assert!(p[2].abs() <= 3.0);
        }
        assert!(c.min_pair_distance().unwrap() >= 0.8);
    }

    #[test]
    fn f32_clouds_respect_bounds() {
        let c = sample_cloud(5.0f32, 4.0, 0.05, 2, 0.1).unwrap();
        assert_eq!(c.atom_count(), 16);
        for p in &c.positions {
            assert!(p[0] * p[0] + p[1] * p[1] <= 25.0);
            assert!(p[2].abs() <= 2.0);
        }
    }

    #[test]
    fn detector_defaults() {
        let spec = CloudSpec::<f64>::new(20.0, 20.0, 0.01);
        let d = DetectorDisk::for_cloud(&spec);
        assert_eq!(d.z0_k, 20.0);
        assert!((d.s_max_k - 12.0).abs() < 1e-12);
        d.validate(&spec).unwrap();
        let bad = DetectorDisk { s_max_k: 25.0, ..d };
        assert!(bad.validate(&spec).is_err());
        let bad = DetectorDisk { z0_k: 5.0, ..d };
        assert!(bad.validate(&spec).is_err());
    }

    #[test]
    fn positions_csv_layout() {
        let c = CloudGeometry::from_positions(vec![[0.0, 1.0, 2.5]]);
        let mut buf = Vec::new();
        c.write_positions_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "atom_index,kx,ky,kz\n0,0,1,2.5\n");
    }
}
