//! Least-squares line fits used to summarize convergence and regret curves.

/// Slope, intercept and coefficient of determination of a least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. `None` with fewer than
/// two points or zero spread in `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len();
    if m < 2 {
        return None;
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fits `log y = log μ · k + c` over the positive entries of `ys` (indexed by
/// position). The slope's exponential is the per-step contraction factor μ.
pub fn fit_log_linear(ys: &[f64]) -> Option<LineFit> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(k, y)| (k as f64, y.ln()))
        .unzip();
    fit_line(&xs, &ls)
}

/// Fits `y ≈ C·x^c` on log-log axes over points with `x, y > 0`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn geometric_decay_and_power_law() {
        let ys: Vec<f64> = (0..50).map(|k| 3.0 * 0.9f64.powi(k)).collect();
        let f = fit_log_linear(&ys).unwrap();
        assert!((f.slope.exp() - 0.9).abs() < 1e-12);
        let xs: Vec<f64> = (1..100).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.sqrt()).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
    }
}
