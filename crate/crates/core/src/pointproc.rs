//! Scaled point sets `(i/d̃(t), (X_i - b̃(t))/ã(t), Y_i/t)` over the renewal
//! window, with order statistics and exceedance counts.

use crate::error::{invalid, Result};
use crate::model::JointModel;
use crate::renewal::RenewalPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPoint {
    pub u: f64,
    pub x: f64,
    pub y: f64,
}

/// Whether the point at the window end `τ(t)/d̃(t)` is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Points `i <= τ(t)`.
    Closed,
    /// Points `i <= τ(t) - 1`.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPointSet {
    pub points: Vec<ScaledPoint>,
    pub boundary: Boundary,
    pub window_end: f64,
}

pub fn extract(path: &RenewalPath, model: &JointModel, boundary: Boundary) -> Result<ScaledPointSet> {
    if !(path.horizon > 0.0) {
        return Err(invalid("scaled point sets need a positive horizon"));
    }
    let dt = model.inter().d_inv(path.horizon)?;
    let (a, b) = model.scaled_normalizers(path.horizon)?;
    let n = match boundary {
        Boundary::Closed => path.tau,
        Boundary::Open => path.tau - 1,
    };
    let points = (0..n)
        .map(|i| ScaledPoint {
            u: (i + 1) as f64 / dt,
            x: (path.x[i] - b) / a,
            y: path.y[i] / path.horizon,
        })
        .collect();
    Ok(ScaledPointSet {
        points,
        boundary,
        window_end: path.tau as f64 / dt,
    })
}

/// `k`-th largest normalized observation, `-∞` if there are fewer than `k`.
pub fn kth_max(pset: &ScaledPointSet, k: usize) -> f64 {
    assert!(k >= 1, "order statistic index starts at 1");
    if pset.points.len() < k {
        return f64::NEG_INFINITY;
    }
    let mut xs: Vec<f64> = pset.points.iter().map(|p| p.x).collect();
    let (_, kth, _) = xs.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// Number of points with normalized observation strictly above `x`.
pub fn count_exceed(pset: &ScaledPointSet, x: f64) -> usize {
    pset.points.iter().filter(|p| p.x > x).count()
}

/// `count_exceed(x) == 0` iff `kth_max(1) <= x`.
pub fn max_count_equivalent(pset: &ScaledPointSet, x: f64) -> bool {
    (count_exceed(pset, x) == 0) == (kth_max(pset, 1) <= x)
}

/// Time coordinates of points above `x0`, rescaled to `[0, 1]` by the
/// window end.
pub fn exceedance_times(pset: &ScaledPointSet, x0: f64) -> Vec<f64> {
    pset.points
        .iter()
        .filter(|p| p.x > x0)
        .map(|p| p.u / pset.window_end)
        .collect()
}
