//! Composite Simpson rules on `[0,1]` and log-log convergence-order fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Composite Simpson weights for `m` uniform nodes on `[0,1]` (`m` odd, ≥ 3).
pub fn simpson_weights(m: usize) -> Result<Vec<f64>> {
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::Quadrature(format!(
            "Simpson needs an odd number of samples >= 3, got {m}"
        )));
    }
    let h = 1.0 / (m - 1) as f64;
    Ok((0..m)
        .map(|j| {
            let w = if j == 0 || j == m - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect())
}

/// Sample count after scaling the interval count by `factor` (keeps it even).
pub fn scaled_samples(m: usize, factor: usize) -> usize {
    (m - 1) * factor + 1
}

/// Estimated order of convergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Order {
    /// Least-squares slope of `log(error)` against `log(h)`.
    Measured(f64),
    /// Every level is at the floating-point floor: the identity holds exactly.
    Exact,
}

impl Order {
    pub fn meets(&self, min_order: f64) -> bool {
        match *self {
            Order::Exact => true,
            Order::Measured(o) => o >= min_order,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Order::Measured(o) => Some(o),
            Order::Exact => None,
        }
    }
}

/// Fit `error ≈ C h^q` over refinement levels. Levels whose errors all sit at
/// or below `floor` are reported as [`Order::Exact`].
pub fn fit_order(steps: &[f64], errors: &[f64], floor: f64) -> Result<Order> {
    if steps.len() != errors.len() {
        return Err(Error::Quadrature("steps and errors differ in length".into()));
    }
    if steps.len() < 3 {
        return Err(Error::TooFewLevels(steps.len()));
    }
    if errors.iter().all(|&e| e <= floor) {
        return Ok(Order::Exact);
    }
    if errors.iter().any(|&e| e <= 0.0 || !e.is_finite()) {
        return Ok(Order::Measured(f64::NAN));
    }
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(Order::Measured(sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(m: usize, f: impl Fn(f64) -> f64) -> f64 {
        let w = simpson_weights(m).unwrap();
        (0..m).map(|j| w[j] * f(j as f64 / (m - 1) as f64)).sum()
    }

    #[test]
    fn exact_on_cubics() {
        let q = simpson(5, |t| 1.0 - 2.0 * t + 3.0 * t * t - 4.0 * t * t * t);
        let exact = 1.0 - 1.0 + 1.0 - 1.0;
        assert!((q - exact).abs() < 1e-13);
    }

    #[test]
    fn fourth_order_on_smooth() {
        let e = |m| (simpson(m, |t: f64| t.exp()) - (1f64.exp() - 1.0)).abs();
        let order = (e(9) / e(17)).log2();
        assert!((order - 4.0).abs() < 0.1);
    }

    #[test]
    fn rejects_even_or_tiny() {
        assert!(simpson_weights(4).is_err());
        assert!(simpson_weights(1).is_err());
        assert_eq!(scaled_samples(5, 2), 9);
    }

    #[test]
    fn order_fit() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        match fit_order(&hs, &es, 1e-14).unwrap() {
            Order::Measured(q) => assert!((q - 2.0).abs() < 1e-12),
            Order::Exact => panic!(),
        }
        assert_eq!(fit_order(&hs, &[0.0, 1e-16, 0.0], 1e-14).unwrap(), Order::Exact);
        assert!(fit_order(&hs[..2], &es[..2], 0.0).is_err());
        assert!(Order::Exact.meets(1.9));
    }
}
