//! Orthonormal piecewise polynomial multiwavelets on `[0, 1]`.
//!
//! The scaling functions of order `d` are the orthonormal Legendre polynomials
//! of degree `< d` on `[0, 1]`. The `d` mother wavelets are piecewise
//! polynomials on the two halves of `[0, 1]`, orthogonal to all polynomials of
//! degree `< d`, obtained by exact rational Gram-Schmidt and normalized at the end.

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::poly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Scaling,
    Wavelet,
}

/// One member of the 1D system: level, translation, kind and mother index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Member1D {
    pub level: u32,
    pub k: u32,
    pub kind: Kind,
    pub t: u8,
}

impl Member1D {
    pub fn scaling(t: u8) -> Self {
        Member1D { level: 0, k: 0, kind: Kind::Scaling, t }
    }

    pub fn wavelet(level: u32, k: u32, t: u8) -> Self {
        Member1D { level, k, kind: Kind::Wavelet, t }
    }

    pub fn width(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        let h = self.width();
        (self.k as f64 * h, (self.k + 1) as f64 * h)
    }

    /// Breakpoints including the support endpoints, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        match self.kind {
            Kind::Scaling => vec![lo, hi],
            Kind::Wavelet => vec![lo, 0.5 * (lo + hi), hi],
        }
    }
}

/// A polynomial piece on `[lo, hi]`, coefficients in the local coordinate
/// `s = (x - lo) / (hi - lo)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet1D {
    pub level: u32,
    pub translation: u32,
    pub kind: Kind,
    pub type_index: usize,
    pub pieces: Vec<Piece>,
}

impl Wavelet1D {
    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    pub fn singular_support(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.pieces.iter().map(|p| p.lo).collect();
        pts.push(self.support().1);
        pts
    }
}

#[derive(Debug, Clone)]
pub struct WaveletFamily {
    pub order_d: usize,
    pub vanishing_moments: usize,
    pub regularity_gamma: f64,
    /// Stored for completeness; the family is self-dual so it enters no formula.
    pub dual_regularity_gamma: f64,
    pub coarsest_level: u32,
    pub mother_count: usize,
    pub max_level: u32,
    /// Support diameter equals `c * 2^-j` with `c = C = 1`.
    pub support_constants: (f64, f64),
    /// Smallest nonzero distance between breakpoints, relative to `2^-j`.
    pub min_cell_fraction: f64,
    scaling: Vec<Vec<f64>>,
    mothers: Vec<[Vec<f64>; 2]>,
    refine: Vec<f64>,
}

type Pw = (Vec<BigRational>, Vec<BigRational>);

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `int_lo^hi x^n dx` for `[lo, hi]` one of `[0, 1/2]`, `[1/2, 1]`.
fn half_moment(n: usize, left: bool) -> BigRational {
    let half_pow = BigRational::new(BigInt::one(), BigInt::from(2).pow(n as u32 + 1));
    let denom = rat(n as i64 + 1, 1);
    if left {
        half_pow / denom
    } else {
        (BigRational::one() - half_pow) / denom
    }
}

fn pw_inner(a: &Pw, b: &Pw) -> BigRational {
    let mut acc = BigRational::zero();
    for (side, left) in [(0usize, true), (1usize, false)] {
        let (pa, pb) = if side == 0 { (&a.0, &b.0) } else { (&a.1, &b.1) };
        for (i, ca) in pa.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (j, cb) in pb.iter().enumerate() {
                if cb.is_zero() {
                    continue;
                }
                acc += ca * cb * half_moment(i + j, left);
            }
        }
    }
    acc
}

fn pw_axpy(y: &mut Pw, alpha: &BigRational, x: &Pw) {
    for (yi, xi) in y.0.iter_mut().zip(&x.0) {
        *yi += alpha * xi;
    }
    for (yi, xi) in y.1.iter_mut().zip(&x.1) {
        *yi += alpha * xi;
    }
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to scaled division for very large numerators/denominators.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Exact Gram-Schmidt; returns orthogonal (unnormalized) vectors with squared norms.
fn gram_schmidt(basis: &[Pw], candidates: Vec<Pw>) -> Vec<(Pw, BigRational)> {
    let mut out: Vec<(Pw, BigRational)> = basis
        .iter()
        .map(|b| (b.clone(), pw_inner(b, b)))
        .collect();
    let fixed = out.len();
    for mut v in candidates {
        for (u, nu) in out.iter() {
            let c = pw_inner(&v, u) / nu;
            if !c.is_zero() {
                pw_axpy(&mut v, &(-c), u);
            }
        }
        let n = pw_inner(&v, &v);
        if n.is_positive() {
            out.push((v, n));
        }
    }
    out.split_off(fixed)
}

/// Convert a global-coordinate polynomial on one half to the local coordinate of that half.
fn to_local_half(c: &[f64], left: bool) -> Vec<f64> {
    let alpha = if left { 0.0 } else { 0.5 };
    poly::compose_affine(c, alpha, 0.5)
}

fn legendre_exact(d: usize) -> Vec<(Pw, BigRational)> {
    let candidates: Vec<Pw> = (0..d)
        .map(|n| {
            let mut v = vec![BigRational::zero(); d];
            v[n] = BigRational::one();
            (v.clone(), v)
        })
        .collect();
    gram_schmidt(&[], candidates)
}

/// Orthonormal Legendre polynomials of degree `< d` on `[0, 1]`.
pub fn legendre(d: usize) -> Vec<Vec<f64>> {
    legendre_exact(d)
        .into_iter()
        .map(|(v, n)| {
            let s = rat_to_f64(&n).sqrt();
            v.0.iter().map(|c| rat_to_f64(c) / s).collect()
        })
        .collect()
}

pub fn build_family(order_d: usize, max_level: u32) -> Result<WaveletFamily, BasisError> {
    if order_d == 0 {
        return Err(BasisError::InvalidArgument("order_d must be at least 1".into()));
    }
    if order_d > 8 {
        return Err(BasisError::InvalidArgument("order_d above 8 is not supported".into()));
    }
    let d = order_d;
    let polys = legendre_exact(d);
    let candidates: Vec<Pw> = (0..d)
        .map(|n| {
            let mut v = vec![BigRational::zero(); d];
            v[n] = BigRational::one();
            (v, vec![BigRational::zero(); d])
        })
        .collect();
    let basis: Vec<Pw> = polys.iter().map(|(v, _)| v.clone()).collect();
    let mothers_exact = gram_schmidt(&basis, candidates);
    debug_assert_eq!(mothers_exact.len(), d);

    let scaling: Vec<Vec<f64>> = polys
        .iter()
        .map(|(v, n)| {
            let s = rat_to_f64(n).sqrt();
            v.0.iter().map(|c| rat_to_f64(c) / s).collect()
        })
        .collect();
    let mothers: Vec<[Vec<f64>; 2]> = mothers_exact
        .iter()
        .map(|(v, n)| {
            let s = rat_to_f64(n).sqrt();
            let l: Vec<f64> = v.0.iter().map(|c| rat_to_f64(c) / s).collect();
            let r: Vec<f64> = v.1.iter().map(|c| rat_to_f64(c) / s).collect();
            [to_local_half(&l, true), to_local_half(&r, false)]
        })
        .collect();

    let mut fam = WaveletFamily {
        order_d: d,
        vanishing_moments: d,
        regularity_gamma: 0.5,
        dual_regularity_gamma: 0.5,
        coarsest_level: 0,
        mother_count: d,
        max_level,
        support_constants: (1.0, 1.0),
        min_cell_fraction: 0.5,
        scaling,
        mothers,
        refine: Vec::new(),
    };
    fam.refine = fam.compute_refinement();
    Ok(fam)
}

impl WaveletFamily {
    /// Scaling polynomials on `[0, 1]` (orthonormal Legendre).
    pub fn scaling_polys(&self) -> &[Vec<f64>] {
        &self.scaling
    }

    /// Mother `t` as local polynomials on its left and right half.
    pub fn mother_polys(&self, t: usize) -> &[Vec<f64>; 2] {
        &self.mothers[t]
    }

    /// Number of 1D members with levels `<= j_max`.
    pub fn count_1d(&self, j_max: u32) -> usize {
        self.order_d << (j_max + 1)
    }

    pub fn member(&self, m: Member1D) -> Wavelet1D {
        let scale = (0.5 * m.level as f64).exp2();
        let (lo, hi) = m.support();
        let scaled = |c: &[f64]| c.iter().map(|v| v * scale).collect::<Vec<f64>>();
        let pieces = match m.kind {
            Kind::Scaling => vec![Piece { lo, hi, coeffs: scaled(&self.scaling[m.t as usize]) }],
            Kind::Wavelet => {
                let mid = 0.5 * (lo + hi);
                let [l, r] = &self.mothers[m.t as usize];
                vec![
                    Piece { lo, hi: mid, coeffs: scaled(l) },
                    Piece { lo: mid, hi, coeffs: scaled(r) },
                ]
            }
        };
        Wavelet1D {
            level: m.level,
            translation: m.k,
            kind: m.kind,
            type_index: m.t as usize,
            pieces,
        }
    }

    /// All 1D members with levels `<= j_max` in transform order:
    /// scaling types, then per level, per translation, per mother.
    pub fn members_1d(&self, j_max: u32) -> Vec<Member1D> {
        let d = self.order_d as u8;
        let mut out: Vec<Member1D> = (0..d).map(Member1D::scaling).collect();
        for j in 0..=j_max {
            for k in 0..(1u32 << j) {
                for t in 0..d {
                    out.push(Member1D::wavelet(j, k, t));
                }
            }
        }
        out
    }

    /// Position of a member within `members_1d`.
    pub fn transform_position(&self, m: Member1D) -> usize {
        let d = self.order_d;
        match m.kind {
            Kind::Scaling => m.t as usize,
            Kind::Wavelet => d * (1usize << m.level) + m.k as usize * d + m.t as usize,
        }
    }

    /// Orthogonal two-scale matrix (row-major, `2d x 2d`). Rows: scaling
    /// functions then mothers on `[0, 1]`; columns: normalized Legendre
    /// polynomials on the left child then on the right child.
    pub fn refinement(&self) -> &[f64] {
        &self.refine
    }

    fn compute_refinement(&self) -> Vec<f64> {
        let d = self.order_d;
        let mut r = vec![0.0; 4 * d * d];
        let sqrt2 = std::f64::consts::SQRT_2;
        for row in 0..2 * d {
            for child in 0..2 {
                let f_local: Vec<f64> = if row < d {
                    poly::compose_affine(&self.scaling[row], 0.5 * child as f64, 0.5)
                } else {
                    self.mothers[row - d][child].clone()
                };
                for p in 0..d {
                    // Child basis sqrt(2) P_p(s); measure 1/2.
                    let prod = poly::mul(&f_local, &self.scaling[p]);
                    r[row * 2 * d + child * d + p] = poly::integral01(&prod) * sqrt2 * 0.5;
                }
            }
        }
        r
    }
}

pub fn evaluate(w: &Wavelet1D, x: f64) -> Result<f64, BasisError> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(BasisError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    let (lo, hi) = w.support();
    let inside = (lo <= x && x < hi) || (x == hi && hi == 1.0);
    if !inside {
        return Ok(0.0);
    }
    let piece = w
        .pieces
        .iter()
        .find(|p| p.lo <= x && x < p.hi)
        .unwrap_or(&w.pieces[w.pieces.len() - 1]);
    let s = (x - piece.lo) / (piece.hi - piece.lo);
    Ok(poly::eval(&piece.coeffs, s))
}

/// `int x^m w(x) dx` by closed-form integration of each piece.
pub fn moment(w: &Wavelet1D, m: u32) -> f64 {
    w.pieces
        .iter()
        .map(|p| {
            let h = p.hi - p.lo;
            // x^m = (lo + h s)^m in the local coordinate.
            let mut xm = vec![0.0; m as usize + 1];
            xm[m as usize] = 1.0;
            let local = poly::compose_affine(&xm, p.lo, h);
            h * poly::integral01(&poly::mul(&local, &p.coeffs))
        })
        .sum()
}

/// Moment about the support centre in units of the support width,
/// `W^{-1/2} int ((x - c) / W)^m w(x) dx`; level independent for the
/// normalized members.
pub fn scaled_moment(w: &Wavelet1D, m: u32) -> f64 {
    let (lo, hi) = w.support();
    let width = hi - lo;
    let c = 0.5 * (lo + hi);
    let mut xm = vec![0.0; m as usize + 1];
    xm[m as usize] = 1.0;
    w.pieces
        .iter()
        .map(|p| {
            let h = p.hi - p.lo;
            let local = poly::compose_affine(&xm, (p.lo - c) / width, h / width);
            h * poly::integral01(&poly::mul(&local, &p.coeffs))
        })
        .sum::<f64>()
        / width.sqrt()
}

/// Exact `L2` inner product of two piecewise polynomials.
pub fn inner(a: &Wavelet1D, b: &Wavelet1D) -> f64 {
    let mut acc = 0.0;
    for pa in &a.pieces {
        for pb in &b.pieces {
            let lo = pa.lo.max(pb.lo);
            let hi = pa.hi.min(pb.hi);
            if hi <= lo {
                continue;
            }
            let restrict = |p: &Piece| {
                let h = p.hi - p.lo;
                poly::compose_affine(&p.coeffs, (lo - p.lo) / h, (hi - lo) / h)
            };
            acc += (hi - lo) * poly::integral01(&poly::mul(&restrict(pa), &restrict(pb)));
        }
    }
    acc
}

/// Multilevel analysis of single-scale coefficients on `2^levels` cells
/// (`d` Legendre coefficients per cell, cell-major) into transform order.
/// `buf` is overwritten; `scratch` must have the same length.
pub fn fwt_forward(fam: &WaveletFamily, buf: &mut [f64], scratch: &mut [f64], levels: u32) {
    let d = fam.order_d;
    let r = &fam.refine;
    debug_assert_eq!(buf.len(), d << levels);
    let mut n_cells = 1usize << levels;
    // Working region buf[..n_cells*d] holds scaling coefficients at the current level;
    // wavelet coefficients of level j land in buf[d*2^j .. d*2^(j+1)].
    while n_cells > 1 {
        let parents = n_cells / 2;
        for k in 0..parents {
            let child = &buf[2 * k * d..2 * k * d + 2 * d];
            for row in 0..2 * d {
                let coeff_row = &r[row * 2 * d..(row + 1) * 2 * d];
                let v: f64 = coeff_row.iter().zip(child).map(|(a, b)| a * b).sum();
                if row < d {
                    scratch[k * d + row] = v;
                } else {
                    scratch[parents * d + k * d + row - d] = v;
                }
            }
        }
        buf[..n_cells * d].copy_from_slice(&scratch[..n_cells * d]);
        n_cells = parents;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_values() {
        let f = build_family(1, 5).unwrap();
        let psi = f.member(Member1D::wavelet(0, 0, 0));
        assert_eq!(evaluate(&psi, 0.25).unwrap(), 1.0);
        assert_eq!(evaluate(&psi, 0.75).unwrap(), -1.0);
        assert_eq!(evaluate(&psi, 1.0).unwrap(), -1.0);
        let phi = f.member(Member1D::scaling(0));
        assert_eq!(moment(&phi, 0), 1.0);
        assert_eq!(moment(&psi, 0), 0.0);
        assert!(evaluate(&psi, 1.5).is_err());
    }

    #[test]
    fn refinement_is_orthogonal() {
        for d in 1..=4 {
            let f = build_family(d, 2).unwrap();
            let r = f.refinement();
            let n = 2 * d;
            for a in 0..n {
                for b in 0..n {
                    let v: f64 = (0..n).map(|c| r[a * n + c] * r[b * n + c]).sum();
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-12, "d={d} ({a},{b}) {v}");
                }
            }
        }
    }

    #[test]
    fn rejects_order_zero() {
        assert!(build_family(0, 3).is_err());
    }
}
