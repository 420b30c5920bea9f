//! Gauss–Legendre rules and the tensor-product disk rule used at the detector.

use crate::num::Real;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots are refined by Newton iteration on the three-term recurrence in `f64`, then
/// converted to `T`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            // p0 = P_n(x), p1 = P_{n-1}(x)
            dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (
        nodes.into_iter().map(T::lit).collect(),
        weights.into_iter().map(T::lit).collect(),
    )
}

/// Quadrature over a disk of radius `s_max` centred on the axis:
/// Gauss–Legendre in the radius (with the `s` Jacobian folded into the weights) times
/// the uniform periodic rule in the angle.
#[derive(Clone, Debug)]
pub struct DiskRule<T> {
    /// `(x, y, weight)`; weights sum to the disk area `π s_max²`.
    pub points: Vec<(T, T, T)>,
}

impl<T: Real> DiskRule<T> {
    pub fn new(s_max: T, radial_nodes: usize, angular_nodes: usize) -> Self {
        let (xs, ws) = gauss_legendre::<T>(radial_nodes);
        let half = s_max / T::lit(2.0);
        let dphi = T::TAU() / T::from_usize_lossy(angular_nodes);
        let mut points = Vec::with_capacity(radial_nodes * angular_nodes);
        for (x, w) in xs.into_iter().zip(ws) {
            let s = half * (x + T::one());
            let radial_weight = w * half * s * dphi;
            for a in 0..angular_nodes {
                let (sin, cos) = (dphi * T::from_usize_lossy(a)).sin_cos();
                points.push((s * cos, s * sin, radial_weight));
            }
        }
        Self { points }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules() {
        let (x, w) = gauss_legendre::<f64>(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre::<f64>(3);
        assert!(x[1].abs() < 1e-15);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [5, 16, 64, 128] {
            let (x, w) = gauss_legendre::<f64>(n);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            // ∫ x^{2n-2} over [-1,1]
            let exact = 2.0 / (deg as f64);
            assert!((approx - exact).abs() < 1e-13, "n = {n}");
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn disk_area_and_second_moment() {
        let rule = DiskRule::<f64>::new(3.0, 16, 32);
        let area: f64 = rule.points.iter().map(|p| p.2).sum();
        assert!((area - 9.0 * std::f64::consts::PI).abs() < 1e-12);
        // ∫ (x² + y²) dA = π s⁴ / 2
        let m2: f64 = rule.points.iter().map(|(x, y, w)| w * (x * x + y * y)).sum();
        assert!((m2 - std::f64::consts::PI * 81.0 / 2.0).abs() < 1e-10);
    }
}
