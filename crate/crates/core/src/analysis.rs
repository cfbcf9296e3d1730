//! Spectral norm estimation, Schur-weighted tails, decay fits and the
//! weighted sequence norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{BasisWindow, EntrySource, Pattern};
use crate::index_geometry::MultiIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

/// Power iteration on `v -> A^T A v` from a fixed-seed random start.
pub fn spectral_norm<F, G>(apply: F, apply_t: G, n: usize, iters: usize, tol: f64, seed: u64) -> Result<NormEstimate, AnalysisError>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if iters < 5 {
        return Err(AnalysisError::InvalidArgument(format!("iters = {iters} below 5")));
    }
    if n == 0 {
        return Ok(NormEstimate { value: 0.0, converged: true, iterations: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut prev = f64::NAN;
    for it in 1..=iters {
        let w = apply_t(&apply(&v));
        // Rayleigh quotient of A^T A at unit v.
        let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let est = rq.max(0.0).sqrt();
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(NormEstimate { value: 0.0, converged: true, iterations: it });
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if prev.is_finite() && (est - prev).abs() <= tol * est.max(f64::MIN_POSITIVE) {
            return Ok(NormEstimate { value: est, converged: true, iterations: it });
        }
        prev = est;
    }
    Ok(NormEstimate { value: prev, converged: false, iterations: iters })
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurTail {
    pub per_row: Vec<f64>,
    pub max: f64,
}

/// `max_i sum_{j dropped} 2^{(|j_i|_1 - |j_j|_1)/2} |L_ij|`.
pub fn schur_weighted_tail(w: &BasisWindow, pattern: &Pattern, source: &dyn EntrySource) -> SchurTail {
    let n = w.dim();
    let lvl: Vec<f64> = w.indices.iter().map(|m| m.l1() as f64).collect();
    // 2^{-|j'|_1/2} factored out of the row sum.
    let col_w: Vec<f64> = lvl.iter().map(|l| (-0.5 * l).exp2()).collect();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let kept = pattern.row(i);
            let s = match source.dense_row(i) {
                Some(row) => {
                    let full: f64 = row.iter().zip(&col_w).map(|(a, c)| a.abs() * c).sum();
                    let k: f64 = kept.iter().map(|&j| row[j as usize].abs() * col_w[j as usize]).sum();
                    (full - k).max(0.0)
                }
                None => {
                    let mut s = 0.0;
                    let mut it = kept.iter().peekable();
                    for (j, cw) in col_w.iter().enumerate() {
                        if it.peek().map(|&&c| c as usize == j).unwrap_or(false) {
                            it.next();
                            continue;
                        }
                        s += source.entry(i, j).abs() * cw;
                    }
                    s
                }
            };
            s * (0.5 * lvl[i]).exp2()
        })
        .collect();
    let max = per_row.iter().cloned().fold(0.0, f64::max);
    SchurTail { per_row, max }
}

/// Least-squares slope of `-log2 e` against `r`.
pub fn fit_decay(rs: &[f64], es: &[f64]) -> Result<f64, AnalysisError> {
    if rs.len() != es.len() || rs.len() < 3 {
        return Err(AnalysisError::InvalidArgument("need at least 3 matching points".into()));
    }
    if es.iter().any(|&e| !(e > 0.0)) {
        return Err(AnalysisError::InvalidArgument("values must be positive".into()));
    }
    let ys: Vec<f64> = es.iter().map(|e| -e.log2()).collect();
    let n = rs.len() as f64;
    let mx = rs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = rs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = rs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::InvalidArgument("r values must not all coincide".into()));
    }
    Ok(sxy / sxx)
}

/// `sqrt(sum 2^{2 s |lambda|_inf} c^2)`.
pub fn sobolev_seq_norm(coeffs: &[(MultiIndex, f64)], s: f64) -> f64 {
    coeffs
        .iter()
        .map(|(m, c)| (2.0 * s * m.linf() as f64).exp2() * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Weights `2^{2 q |lambda|_inf + 2 (s_x j_x + s_y j_y)}`.
pub fn gk_seq_norm(coeffs: &[(MultiIndex, f64)], q: f64, s: [f64; 2]) -> f64 {
    coeffs
        .iter()
        .map(|(m, c)| {
            let e = 2.0 * q * m.linf() as f64 + 2.0 * (s[0] * m.jx() as f64 + s[1] * m.jy() as f64);
            e.exp2() * c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// `(sum 2^{tau q |lambda|_inf} |c|^tau)^{1/tau}` with `1/tau = s + 1/2`.
pub fn besov_tau_seminorm(coeffs: &[(MultiIndex, f64)], q: f64, s: f64) -> Result<f64, AnalysisError> {
    if !(s > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("s = {s} must be positive")));
    }
    let tau = 1.0 / (s + 0.5);
    let sum: f64 = coeffs
        .iter()
        .map(|(m, c)| (tau * q * m.linf() as f64).exp2() * c.abs().powf(tau))
        .sum();
    Ok(sum.powf(1.0 / tau))
}

/// `l2` error of keeping the `n` largest coefficients, for `n = 0..=len`.
pub fn best_n_term_errors(values: &[f64]) -> Vec<f64> {
    let mut sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let mut tail: Vec<f64> = vec![0.0; sq.len() + 1];
    for i in (0..sq.len()).rev() {
        tail[i] = tail[i + 1] + sq[i];
    }
    tail.into_iter().map(f64::sqrt).collect()
}

/// Condition number of the symmetric diagonal block formed by the given
/// indices, via power iterations on `A` and on `lambda_max I - A`.
pub fn block_condition(source: &dyn EntrySource, idx: &[usize], seed: u64) -> f64 {
    let m = idx.len();
    if m == 0 {
        return f64::NAN;
    }
    let a: Vec<f64> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| source.entry(i, j)).collect();
    let mv = |v: &[f64]| -> Vec<f64> { (0..m).map(|i| (0..m).map(|j| a[i * m + j] * v[j]).sum()).collect() };
    let top = spectral_norm(mv, mv, m, 200, 1e-10, seed).map(|e| e.value).unwrap_or(f64::NAN);
    let shifted = |v: &[f64]| -> Vec<f64> {
        let av = mv(v);
        v.iter().zip(av).map(|(x, y)| top * x - y).collect()
    };
    let gap = spectral_norm(shifted, shifted, m, 200, 1e-10, seed).map(|e| e.value).unwrap_or(f64::NAN);
    let low = (top - gap).abs();
    top / low
}

/// Random `f64` sample used by diagnostics.
pub fn seeded_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis1d::Member1D;

    fn at(jx: u32, jy: u32) -> MultiIndex {
        MultiIndex::new(0, Member1D::wavelet(jx, 0, 0), Member1D::wavelet(jy, 0, 0))
    }

    #[test]
    fn norm_examples() {
        let id = |v: &[f64]| v.to_vec();
        let e = spectral_norm(id, id, 5, 20, 1e-12, 1).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        let diag = |v: &[f64]| vec![3.0 * v[0], v[1], 0.5 * v[2]];
        let e = spectral_norm(diag, diag, 3, 200, 1e-14, 1).unwrap();
        assert!((e.value - 3.0).abs() < 1e-9);
        assert!(spectral_norm(id, id, 5, 4, 1e-3, 1).is_err());
    }

    #[test]
    fn fit_examples() {
        let rs: [f64; 5] = [2.0, 3.0, 4.0, 5.0, 6.0];
        let e1: Vec<f64> = rs.iter().map(|r| (-r).exp2()).collect();
        assert!((fit_decay(&rs, &e1).unwrap() - 1.0).abs() < 1e-12);
        let e2: Vec<f64> = rs.iter().map(|r| 4.0 * (-1.5 * *r).exp2()).collect();
        assert!((fit_decay(&rs, &e2).unwrap() - 1.5).abs() < 1e-12);
        let e3: Vec<f64> = rs.iter().map(|r| r * (-r).exp2()).collect();
        let s = fit_decay(&rs, &e3).unwrap();
        assert!(s > 0.6 && s < 1.0);
        assert!(fit_decay(&rs, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn sequence_norm_examples() {
        assert_eq!(sobolev_seq_norm(&[(at(2, 1), 1.0)], 1.0), 4.0);
        let two = [(at(0, 0), 1.0), (at(3, 0), 1.0)];
        assert!((sobolev_seq_norm(&two, 0.5) - 3.0).abs() < 1e-15);
        assert!((gk_seq_norm(&[(at(1, 2), 1.0)], 1.0, [0.5, 0.25]) - 8.0).abs() < 1e-12);
        assert_eq!(besov_tau_seminorm(&[(at(3, 1), 1.0)], 0.0, 0.7).unwrap(), 1.0);
        assert!(besov_tau_seminorm(&two, 0.0, 0.0).is_err());
    }

    #[test]
    fn best_n_term_monotone() {
        let e = best_n_term_errors(&[0.1, -3.0, 2.0, 0.0]);
        assert!(e.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(*e.last().unwrap(), 0.0);
    }
}
