//! Dense univariate polynomials in monomial form, `c[0] + c[1] s + ...`.

/// Horner evaluation.
#[inline]
pub fn eval(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

/// Coefficients of `p(alpha + beta t)` as a polynomial in `t`.
pub fn compose_affine(c: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // (alpha + beta t)^k expanded incrementally.
    let mut pw = vec![0.0; n];
    pw[0] = 1.0;
    for (k, &ck) in c.iter().enumerate() {
        if k > 0 {
            for i in (0..=k).rev() {
                let lower = if i > 0 { pw[i - 1] * beta } else { 0.0 };
                pw[i] = pw[i] * alpha + lower;
            }
        }
        for i in 0..=k {
            out[i] += ck * pw[i];
        }
    }
    out
}

/// `p(1 - t)`.
pub fn reflect(c: &[f64]) -> Vec<f64> {
    compose_affine(c, 1.0, -1.0)
}

/// Product of two polynomials.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Integral over `[0, 1]`.
pub fn integral01(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(k, &a)| a / (k as f64 + 1.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_matches_pointwise() {
        let p = [0.5, -2.0, 3.0, 1.25];
        let q = compose_affine(&p, 0.25, 0.5);
        for &t in &[0.0, 0.3, 0.9, 1.0] {
            assert!((eval(&q, t) - eval(&p, 0.25 + 0.5 * t)).abs() < 1e-14);
        }
        let r = reflect(&p);
        assert!((eval(&r, 0.2) - eval(&p, 0.8)).abs() < 1e-14);
    }

    #[test]
    fn integral_of_square() {
        assert!((integral01(&mul(&[0.0, 1.0], &[0.0, 1.0])) - 1.0 / 3.0).abs() < 1e-15);
    }
}
