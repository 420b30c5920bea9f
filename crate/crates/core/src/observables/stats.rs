use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Mean and standard error of per-realization values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats<T> {
    pub mean: T,
    /// `s/√n` with the unbiased sample deviation; absent for fewer than two values.
    pub stderr: Option<T>,
    pub count: usize,
}

/// Returns `None` for an empty slice.
pub fn ensemble_stats<T: Real>(values: &[T]) -> Option<EnsembleStats<T>> {
    if values.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let stderr = (values.len() >= 2).then(|| {
        let ss = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
        (ss / (n - T::one()) / n).sqrt()
    });
    Some(EnsembleStats { mean, stderr, count: values.len() })
}
