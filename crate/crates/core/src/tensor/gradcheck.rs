//! Central finite differences for checking analytic gradients.
//!
//! These helpers only ever evaluate the function being differentiated, so
//! they stay independent of the tape that produced the gradient under test.

/// Central-difference estimate of `∂f/∂x_i` for every coordinate.
pub fn central_difference<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    (0..x.len())
        .map(|i| central_difference_at(&mut f, x, i, step))
        .collect()
}

/// Central-difference estimate of a single partial derivative.
pub fn central_difference_at<F>(f: &mut F, x: &[f64], i: usize, step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    probe[i] = x[i] + step;
    let up = f(&probe);
    probe[i] = x[i] - step;
    let down = f(&probe);
    (up - down) / (2.0 * step)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(floor);
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest element-wise relative error between two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative_error <= tol
    }
}

/// Compares `analytic` against central differences of `f` at the given
/// coordinates (all coordinates when `indices` is `None`).
pub fn check_gradient<F>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    step: f64,
    floor: f64,
    indices: Option<&[usize]>,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let all: Vec<usize>;
    let idx = match indices {
        Some(idx) => idx,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        checked: idx.len(),
    };
    for &i in idx {
        let numeric = central_difference_at(&mut f, x, i, step);
        let err = relative_error(analytic[i], numeric, floor);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = i;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quadratics() {
        let g = central_difference(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0], 1e-3);
        assert!((g[0] - 4.0).abs() < 1e-9);
        assert!((g[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1, 0.0) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-12, 2e-12, 1e-6) < 1e-5);
    }
}
