//! Width and depth of the transparency window of a transmission spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics<T> {
    /// Full width at the half level between peak and mean valley (units of Γ).
    pub fwhm: T,
    pub t_peak: T,
    pub peak_detuning: T,
    /// Lower of the two valley minima.
    pub t_min: T,
    /// `[left, right]` valley detunings.
    pub valley_detunings: [T; 2],
    pub valley_values: [T; 2],
    pub half_level: T,
}

/// Index of the minimum over `range`; ties go to the index nearest `toward`.
fn argmin<T: Real>(ys: &[T], range: std::ops::Range<usize>, toward: usize) -> Option<usize> {
    range.fold(None, |best: Option<usize>, i| match best {
        Some(b) if ys[b] < ys[i] || (ys[b] == ys[i] && b.abs_diff(toward) <= i.abs_diff(toward)) => Some(b),
        _ => Some(i),
    })
}

fn crossing<T: Real>(x0: T, y0: T, x1: T, y1: T, level: T) -> T {
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Locates the window of `t` sampled on the ascending grid `delta1`.
///
/// Valleys are the global minima on each side of `Δ₁ = 0` (the point `Δ₁ = 0` itself
/// belongs to neither side; ties go to the innermost point). The peak is the maximum
/// between them, and the width is the distance between the half-level crossings
/// nearest the peak, each linearly interpolated.
pub fn window_metrics<T: Real>(delta1: &[T], t: &[T]) -> Result<WindowMetrics<T>> {
    if delta1.len() != t.len() {
        return Err(Error::SizeMismatch { expected: delta1.len(), found: t.len() });
    }
    if delta1.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Shape("detuning grid must be strictly ascending".into()));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::Shape("non-finite transmission".into()));
    }
    let first_pos = delta1.iter().position(|&d| d > T::zero()).unwrap_or(delta1.len());
    let last_neg = delta1.iter().rposition(|&d| d < T::zero());
    let (Some(last_neg), true) = (last_neg, first_pos < delta1.len()) else {
        return Err(Error::Shape("grid does not straddle zero detuning".into()));
    };
    let left = argmin(t, 0..last_neg + 1, last_neg).expect("non-empty");
    let right = argmin(t, first_pos..delta1.len(), first_pos).expect("non-empty");
    if right - left < 2 {
        return Err(Error::Shape("valleys are adjacent".into()));
    }
    let mut peak = left + 1;
    for i in left + 1..right {
        if t[i] > t[peak] {
            peak = i;
        }
    }
    let (vl, vr) = (t[left], t[right]);
    let t_peak = t[peak];
    if !(t_peak > vl && t_peak > vr) {
        return Err(Error::Shape("no peak between the valleys".into()));
    }
    let half = (t_peak + (vl + vr) / T::lit(2.0)) / T::lit(2.0);

    let mut lo = None;
    for i in (left..peak).rev() {
        if t[i] < half {
            lo = Some(crossing(delta1[i], t[i], delta1[i + 1], t[i + 1], half));
            break;
        }
    }
    let mut hi = None;
    for i in peak + 1..=right {
        if t[i] < half {
            hi = Some(crossing(delta1[i - 1], t[i - 1], delta1[i], t[i], half));
            break;
        }
    }
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::Shape(format!(
            "half level {half} is not crossed on both sides of the peak"
        )));
    };
    Ok(WindowMetrics {
        fwhm: hi - lo,
        t_peak,
        peak_detuning: delta1[peak],
        t_min: vl.min(vr),
        valley_detunings: [delta1[left], delta1[right]],
        valley_values: [vl, vr],
        half_level: half,
    })
}
