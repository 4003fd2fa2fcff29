//! Small statistics helpers shared by the evaluation and distance modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Pearson correlation. Zero-variance input on either side yields 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    pearson_opt(a, b).unwrap_or(0.0)
}

/// Pearson correlation, `None` when either side has zero variance or the
/// inputs are shorter than two elements.
pub fn pearson_opt(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    let n = a.len();
    if n < 2 || a.iter().all(|&x| x == a[0]) || b.iter().all(|&y| y == b[0]) {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sided p-value of a Pearson correlation `r` over `n` pairs using
/// `t = r·√((n−2)/(1−r²))` with `n − 2` degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("df > 0");
    (1.0 - dist.cdf(x)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(pearson_opt(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn median_and_sd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138089935299395).abs() < 1e-12);
    }

    #[test]
    fn p_values() {
        // t = 0 → p = 1; perfect correlation → 0.
        assert!((pearson_p_value(0.0, 50) - 1.0).abs() < 1e-12);
        assert_eq!(pearson_p_value(1.0, 50), 0.0);
        // r = 0.5, n = 12: t = 0.5·√(10/0.75) = 1.8257, two-sided p ≈ 0.0978.
        assert!((pearson_p_value(0.5, 12) - 0.0978).abs() < 1e-3);
        // χ²(1) = 3.841459 is the 95% point.
        assert!((chi_square_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-9);
    }
}
