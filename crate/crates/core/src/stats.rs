//! Small summary-statistics helpers used by the Monte-Carlo checks.

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Population (1/n) variance.
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    (mean(v), (sample_variance(v) / v.len() as f64).sqrt())
}

/// Index of the smallest value; the first one wins ties. NaN is never chosen
/// unless every value is NaN.
pub fn argmin(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if x < v[b] || (v[b].is_nan() && !x.is_nan()) => best = Some(i),
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
        assert!((population_variance(&[1.0, 2.0, 3.0]) - 2.0 / 3.0).abs() < 1e-15);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(argmin(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(argmin(&[]), None);
    }
}
