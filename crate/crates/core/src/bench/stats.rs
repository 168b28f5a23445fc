pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Coefficient of determination of the least-squares line through (x, y).
pub fn ols_r2(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    (sxy * sxy) / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [5.0, 7.0, 9.0, 11.0];
        assert!((ols_r2(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_y_fits_trivially() {
        assert_eq!(ols_r2(&[0.0, 1.0, 2.0], &[4.0, 4.0, 4.0]), 1.0);
    }

    #[test]
    fn uncorrelated_scores_low() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, 1.0, -1.0];
        assert!(ols_r2(&xs, &ys) < 0.3);
    }
}
