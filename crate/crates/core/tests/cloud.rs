use cdm_eit::cloud::{distance, CloudSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atoms_stay_inside_and_apart(
        radius in 1.0f64..8.0,
        thickness in 1.0f64..8.0,
        density in 0.0f64..0.3,
        sep in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let spec = CloudSpec::new(radius, thickness, density).with_min_separation(sep);
        let cloud = spec.sample(seed).unwrap();
        prop_assert_eq!(cloud.atom_count(), spec.atom_count());
        for (j, p) in cloud.positions.iter().enumerate() {
            prop_assert!(p[0] * p[0] + p[1] * p[1] <= radius * radius);
            prop_assert!(p[2].abs() <= thickness / 2.0);
            for q in &cloud.positions[j + 1..] {
                prop_assert!(distance(p, q) >= sep);
            }
        }
    }

    #[test]
    fn same_seed_same_cloud(seed in any::<u64>(), density in 0.01f64..0.2) {
        let spec = CloudSpec::new(4.0, 5.0, density);
        prop_assert_eq!(spec.sample(seed).unwrap(), spec.sample(seed).unwrap());
    }
}

#[test]
fn different_seeds_differ() {
    let spec = CloudSpec::new(4.0, 5.0, 0.1);
    assert_ne!(spec.sample(1).unwrap().positions, spec.sample(2).unwrap().positions);
}

/// Pearson statistic of `xs` (all in `[0, 1)`) against the uniform law on `bins` bins.
fn chi_square(xs: impl Iterator<Item = f64>, bins: usize) -> (f64, usize) {
    let mut counts = vec![0usize; bins];
    let mut n = 0;
    for x in xs {
        counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        n += 1;
    }
    let e = n as f64 / bins as f64;
    (counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum(), n)
}

#[test]
fn positions_are_uniform_in_the_cylinder() {
    // Uniform in volume means r²/R², φ/2π and z/L + ½ are each uniform on [0, 1).
    let (radius, thickness) = (10.0, 8.0);
    let big = CloudSpec::new(radius, thickness, 2.0).with_min_separation(0.0);
    let cloud = big.sample(7).unwrap();
    let pos = &cloud.positions;
    // 20 bins, 19 degrees of freedom: the 0.999 quantile is about 43.8.
    let limit = 43.8;
    let (r2, n) = chi_square(pos.iter().map(|p| (p[0] * p[0] + p[1] * p[1]) / (radius * radius)), 20);
    assert!(n > 4000);
    assert!(r2 < limit, "radial chi-square {r2}");
    let (phi, _) = chi_square(
        pos.iter().map(|p| (p[1].atan2(p[0]) / std::f64::consts::TAU).rem_euclid(1.0)),
        20,
    );
    assert!(phi < limit, "azimuthal chi-square {phi}");
    let (z, _) = chi_square(pos.iter().map(|p| p[2] / thickness + 0.5), 20);
    assert!(z < limit, "axial chi-square {z}");
}
