//! Extrapolation of finite-`p` sequences to `p → ∞`.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::Serialize;

use crate::{Error, Result};

/// Number of largest exponents used by [`extrapolate`].
pub const FIT_POINTS: usize = 3;

/// Fit `y(p) ≈ a + b/p + c log p / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    /// Limit `a`.
    pub limit: f64,
    pub inverse: f64,
    pub log_inverse: f64,
    /// Exponents used in the fit.
    pub p_min: f64,
    pub p_max: f64,
}

impl Extrapolation {
    pub fn eval(&self, p: f64) -> f64 {
        self.limit + (self.inverse + self.log_inverse * p.ln()) / p
    }
}

/// Least-squares fit of `a + b/p + c log p / p` on the [`FIT_POINTS`] largest `p`.
pub fn extrapolate(ps: &[f64], ys: &[f64]) -> Result<Extrapolation> {
    extrapolate_last(ps, ys, FIT_POINTS)
}

/// Same fit on the `count` largest exponents.
pub fn extrapolate_last(ps: &[f64], ys: &[f64], count: usize) -> Result<Extrapolation> {
    if ps.len() != ys.len() {
        return Err(Error::InvalidArgument(format!("{} exponents for {} values", ps.len(), ys.len())));
    }
    if count < 3 || ps.len() < count {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs at least 3 points, got {} of {}",
            count,
            ps.len()
        )));
    }
    let mut pts: Vec<(f64, f64)> = ps.iter().copied().zip(ys.iter().copied()).collect();
    if pts.iter().any(|&(p, y)| !(p > 1.0 && p.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument("extrapolation needs finite values and p > 1".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("repeated exponent".into()));
    }
    let used = &pts[pts.len() - count..];
    let a = Mat::from_fn(count, 3, |i, j| {
        let p = used[i].0;
        match j {
            0 => 1.0,
            1 => 1.0 / p,
            _ => p.ln() / p,
        }
    });
    let rhs = Mat::from_fn(count, 1, |i, _| used[i].1);
    let x = a.qr().solve_lstsq(&rhs);
    let out = Extrapolation {
        limit: x[(0, 0)],
        inverse: x[(1, 0)],
        log_inverse: x[(2, 0)],
        p_min: used[0].0,
        p_max: used[count - 1].0,
    };
    if !out.limit.is_finite() {
        return Err(Error::InvalidArgument("singular extrapolation fit".into()));
    }
    Ok(out)
}

/// `true` if `ys` is strictly monotone (either direction).
pub fn strictly_monotone(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] > w[0]) || ys.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_model_exactly() {
        let f = |p: f64| 1.5 - 2.0 / p + 0.7 * p.ln() / p;
        let ps = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = ps.iter().map(|&p| f(p)).collect();
        let e = extrapolate(&ps, &ys).unwrap();
        assert!((e.limit - 1.5).abs() < 1e-12);
        assert!((e.inverse + 2.0).abs() < 1e-10);
        assert!((e.log_inverse - 0.7).abs() < 1e-10);
        assert_eq!((e.p_min, e.p_max), (20.0, 80.0));
        assert!((e.eval(1000.0) - f(1000.0)).abs() < 1e-12);
    }

    #[test]
    fn order_of_input_is_irrelevant() {
        let ps = [80.0, 10.0, 40.0, 20.0];
        let ys = [3.0, 1.0, 2.5, 2.0];
        let a = extrapolate(&ps, &ys).unwrap();
        let b = extrapolate(&[10.0, 20.0, 40.0, 80.0], &[1.0, 2.0, 2.5, 3.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_short_input() {
        assert!(extrapolate(&[10.0, 20.0], &[1.0, 2.0]).is_err());
        assert!(extrapolate(&[10.0, 10.0, 20.0], &[1.0, 1.0, 2.0]).is_err());
    }
}
