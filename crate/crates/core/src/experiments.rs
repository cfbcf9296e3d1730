//! Measurement drivers shared by the command line and the acceptance runner.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{fit_decay, schur_weighted_tail, spectral_norm, AnalysisError};
use crate::assembly::{BasisWindow, Domain, DroppedOperator, EntrySource, PatternBuilder};
use crate::basis1d::{inner, scaled_moment, Member1D, WaveletFamily, Wavelet1D};
use crate::compression::{minimal_vanishing_moments, CompressionParams, DEFAULT_ALPHA, DEFAULT_SIGMA_SHIFT};
use crate::index_geometry::{level_stats, pair_geometry, MultiIndex};
use crate::kernels::{dist3, Kernel, Point3};
use crate::manifold::{Adjacency, Chart, PatchGeometry};
use crate::quadrature::{entry, entry_oracle, QuadError, QuadratureSpec};

pub const NORM_ITERS: usize = 20;
pub const NORM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub r: u32,
    pub nnz_total: usize,
    pub nnz_row_max: usize,
    pub err_norm_est: f64,
    pub norm_converged: bool,
    pub schur_tail_max: f64,
    pub runtime_s: f64,
}

/// Pattern, dropped-part norm and Schur tail for each `r` against an entry source.
pub fn decay_rows(
    w: &BasisWindow,
    domain: Domain<'_>,
    source: &dyn EntrySource,
    base: CompressionParams,
    rs: &[u32],
    seed: u64,
) -> Result<Vec<DecayRow>, AnalysisError> {
    let n = w.dim();
    if source.dim() != n {
        return Err(AnalysisError::InvalidArgument("entry source does not match window".into()));
    }
    let mut rows = Vec::with_capacity(rs.len());
    for &r in rs {
        let t = Instant::now();
        let pattern = PatternBuilder::new(w, domain, base.with_r(r)).build();
        let op = DroppedOperator { pattern: &pattern, source };
        let est = spectral_norm(
            |v| op.apply(v).expect("matching dimension"),
            |v| op.apply_transpose(v).expect("matching dimension"),
            n,
            NORM_ITERS,
            NORM_TOL,
            seed,
        )?;
        let tail = schur_weighted_tail(w, &pattern, source);
        rows.push(DecayRow {
            r,
            nnz_total: pattern.nnz(),
            nnz_row_max: pattern.row_max(),
            err_norm_est: est.value,
            norm_converged: est.converged,
            schur_tail_max: tail.max,
            runtime_s: t.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySlopes {
    pub err: f64,
    pub tail: f64,
}

pub fn decay_slopes(rows: &[DecayRow]) -> Result<DecaySlopes, AnalysisError> {
    let rs: Vec<f64> = rows.iter().map(|r| r.r as f64).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.err_norm_est).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.schur_tail_max).collect();
    Ok(DecaySlopes { err: fit_decay(&rs, &es)?, tail: fit_decay(&rs, &ts)? })
}

/// `nnz_row_max / (r^2 2^r)`.
pub fn row_ratio(row: &DecayRow) -> f64 {
    row.nnz_row_max as f64 / ((row.r as f64).powi(2) * (row.r as f64).exp2())
}

// ---------------------------------------------------------------------------
// Vanishing-moment table

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SstarRow {
    pub d: u32,
    pub q2: i32,
    pub alpha: f64,
    pub min_d_tilde: Option<u32>,
}

pub fn sstar_table(alpha: f64, sigma: f64) -> Vec<SstarRow> {
    let mut out = Vec::new();
    for q2 in [-1, 0, 1] {
        for d in [1, 2] {
            out.push(SstarRow { d, q2, alpha, min_d_tilde: minimal_vanishing_moments(d, q2 as f64, alpha, sigma) });
        }
    }
    out
}

pub fn default_sstar_table() -> Vec<SstarRow> {
    sstar_table(DEFAULT_ALPHA, DEFAULT_SIGMA_SHIFT)
}

// ---------------------------------------------------------------------------
// Basis checks

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisCheckRow {
    pub level: u32,
    pub members: usize,
    pub gram_err: f64,
    pub moment_err: f64,
}

/// Gram error of every member at `level` against all members up to `level`,
/// and the largest vanishing-moment violation at `level`.
pub fn basis_check(fam: &WaveletFamily, j_max: u32) -> Vec<BasisCheckRow> {
    let d = fam.mother_count;
    let mut all: Vec<Wavelet1D> = (0..d as u8).map(|t| fam.member(Member1D::scaling(t))).collect();
    let mut rows = Vec::new();
    for j in 0..=j_max {
        let start = all.len();
        all.extend((0..1u32 << j).flat_map(|k| (0..d as u8).map(move |t| Member1D::wavelet(j, k, t))).map(|m| fam.member(m)));
        let mut gram = 0.0f64;
        let mut mom = 0.0f64;
        let first = if j == 0 { 0 } else { start };
        for a in first..all.len() {
            let wa = &all[a];
            let (alo, ahi) = wa.support();
            for (b, wb) in all.iter().enumerate() {
                let (blo, bhi) = wb.support();
                if bhi <= alo || ahi <= blo {
                    continue;
                }
                let want = if a == b { 1.0 } else { 0.0 };
                gram = gram.max((inner(wa, wb) - want).abs());
            }
            if a >= start {
                for m in 0..fam.vanishing_moments as u32 {
                    mom = mom.max(scaled_moment(wa, m).abs());
                }
            }
        }
        rows.push(BasisCheckRow { level: j, members: all.len() - start, gram_err: gram, moment_err: mom });
    }
    rows
}

// ---------------------------------------------------------------------------
// Entry-bound audit

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    FarField,
    TwoMoment,
    LongFace,
    NearField,
}

impl Oracle {
    pub const ALL: [Oracle; 4] = [Oracle::FarField, Oracle::TwoMoment, Oracle::LongFace, Oracle::NearField];

    pub fn as_str(&self) -> &'static str {
        match self {
            Oracle::FarField => "far_field",
            Oracle::TwoMoment => "two_moment",
            Oracle::LongFace => "long_face",
            Oracle::NearField => "near_field",
        }
    }

    /// Bound without its constant, or `None` outside the oracle's hypothesis.
    pub fn bound(&self, a: &MultiIndex, b: &MultiIndex, dt: f64, q: f64) -> Option<f64> {
        let g = pair_geometry(a, b).ok()?;
        let (ja, jb) = (a.levels(), b.levels());
        let st = level_stats(ja, jb);
        let l1 = (a.l1() + b.l1()) as f64;
        let linf = (a.linf() + b.linf()) as f64;
        let qscale = (-q * linf).exp2();
        let far = (-(st.m as f64)).exp2();
        match self {
            Oracle::FarField => (g.delta >= far)
                .then(|| (-(dt + 0.5) * l1).exp2() * qscale * g.delta.powf(-(2.0 + 2.0 * q + 4.0 * dt))),
            Oracle::TwoMoment => {
                if !(g.delta >= far) {
                    return None;
                }
                let mut lv = [ja.0, ja.1, jb.0, jb.1];
                lv.sort_unstable();
                let top = (lv[2] + lv[3]) as f64;
                Some((-0.5 * l1).exp2() * (-dt * top).exp2() * qscale * g.delta.powf(-(2.0 + 2.0 * q + 2.0 * dt)))
            }
            Oracle::LongFace => {
                // Across y when the x extents are the longer pair, else across x.
                let (dist, along, across) = if st.m_x <= st.m_y && g.dy > 0.0 {
                    (g.dy, (ja.1 + jb.1) as f64, ja.0.abs_diff(jb.0) as f64)
                } else if st.m_y <= st.m_x && g.dx > 0.0 {
                    (g.dx, (ja.0 + jb.0) as f64, ja.1.abs_diff(jb.1) as f64)
                } else {
                    return None;
                };
                Some(
                    (-0.5 * (along + across)).exp2()
                        * (-(dt + q) * linf).exp2()
                        * dist.powf(-(1.0 + 2.0 * q + 2.0 * dt)),
                )
            }
            Oracle::NearField => {
                let s = if g.sx > 0.0 && g.sx <= (-(st.m_x as f64)).exp2() && g.dy == 0.0 {
                    g.sx
                } else if g.sy > 0.0 && g.sy <= (-(st.m_y as f64)).exp2() && g.dx == 0.0 {
                    g.sy
                } else {
                    return None;
                };
                let dl1 = (ja.0.abs_diff(jb.0) + ja.1.abs_diff(jb.1)) as f64;
                Some(
                    (-0.5 * dl1).exp2()
                        * (-dt * (st.big_m_x + st.big_m_y) as f64).exp2()
                        * qscale
                        * s.powf(-(2.0 * q + 2.0 * dt)),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSample {
    pub oracle: Oracle,
    pub row: usize,
    pub col: usize,
    pub level_sum: u32,
    pub entry: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub oracle: Oracle,
    pub samples: usize,
    /// Constant fitted as the largest ratio over the coarsest level-sum block.
    pub c_fit: f64,
    pub max_over_median: f64,
    pub spearman: f64,
}

impl AuditSummary {
    pub fn passes(&self, min_samples: usize) -> bool {
        self.samples >= min_samples && self.max_over_median <= 50.0 && self.spearman <= 0.3
    }
}

/// Random pairs from the window, drawn level-uniformly, that satisfy the
/// hypothesis of `oracle` and whose entry exceeds `zero_floor` in modulus.
pub fn audit_samples(
    w: &BasisWindow,
    source: &dyn EntrySource,
    oracle: Oracle,
    dt: f64,
    q: f64,
    count: usize,
    zero_floor: f64,
    seed: u64,
) -> Vec<AuditSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (oracle as u64 + 1).wrapping_mul(0x9e37_79b9));
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); (w.j_max as usize + 1).pow(2)];
    let nl = w.j_max as usize + 1;
    for (i, m) in w.indices.iter().enumerate() {
        by_level[m.jx() as usize * nl + m.jy() as usize].push(i);
    }
    let mut out = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    let limit = 20_000 * count;
    for _ in 0..limit {
        if out.len() >= count {
            break;
        }
        let la = &by_level[rng.gen_range(0..by_level.len())];
        let lb = &by_level[rng.gen_range(0..by_level.len())];
        let (i, j) = (la[rng.gen_range(0..la.len())], lb[rng.gen_range(0..lb.len())]);
        let (a, b) = (&w.indices[i], &w.indices[j]);
        let Some(bound) = oracle.bound(a, b, dt, q) else { continue };
        if !seen.insert((i, j)) {
            continue;
        }
        let entry = source.entry(i, j);
        if entry.abs() <= zero_floor {
            continue;
        }
        out.push(AuditSample { oracle, row: i, col: j, level_sum: a.l1() + b.l1(), entry, bound });
    }
    out
}

pub fn summarize_audit(oracle: Oracle, samples: &[AuditSample]) -> AuditSummary {
    let ratios: Vec<f64> = samples.iter().map(|s| s.entry.abs() / s.bound).collect();
    let lmin = samples.iter().map(|s| s.level_sum).min().unwrap_or(0);
    let c_fit = samples
        .iter()
        .zip(&ratios)
        .filter(|(s, _)| s.level_sum == lmin)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if sorted.is_empty() { f64::NAN } else { sorted[sorted.len() / 2] };
    let max = sorted.last().copied().unwrap_or(f64::NAN);
    let logs: Vec<f64> = ratios.iter().map(|r| r.max(f64::MIN_POSITIVE).log2()).collect();
    let levels: Vec<f64> = samples.iter().map(|s| s.level_sum as f64).collect();
    AuditSummary {
        oracle,
        samples: samples.len(),
        c_fit,
        max_over_median: max / median,
        spearman: spearman(&logs, &levels),
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && v[idx[k + 1]] == v[idx[i]] {
            k += 1;
        }
        let avg = 0.5 * (i + k) as f64;
        for &t in &idx[i..=k] {
            r[t] = avg;
        }
        i = k + 1;
    }
    r
}

/// Rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

// ---------------------------------------------------------------------------
// Quadrature against the brute-force oracle

pub const ORACLE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadCheck {
    pub far_samples: usize,
    pub far_worst_rel: f64,
    pub far_over_tol: usize,
    /// Far pairs whose oracle value lies below the floor; compared absolutely.
    pub far_zero: usize,
    pub far_zero_worst_abs: f64,
    pub near_samples: usize,
    pub near_worst_rel: f64,
    /// Touching pairs below `near_floor`; adaptive rules only resolve
    /// these to the leaf tolerance, so no relative check applies.
    pub near_zero: usize,
    pub zero_floor: f64,
    pub near_floor: f64,
}

/// Separated pairs (`delta >= 2^{-m}`) against the tensor oracle and
/// touching pairs against a rerun with two extra singular refinements.
/// Separated entries below `1e-13` times the coarsest diagonal entry, and
/// touching ones below the leaf tolerance times it, count as structural zeros.
pub fn quadrature_check(
    w: &BasisWindow,
    k: Kernel,
    q: f64,
    spec: &QuadratureSpec,
    far: usize,
    near: usize,
    far_tol: f64,
    seed: u64,
) -> Result<QuadCheck, QuadError> {
    let fam = &w.family;
    let n = w.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = entry(fam, k, &w.indices[0], &w.indices[0], q, spec)?.value.abs();
    let zero_floor = 1e-13 * top;
    let mut c = QuadCheck {
        far_samples: 0,
        far_worst_rel: 0.0,
        far_over_tol: 0,
        far_zero: 0,
        far_zero_worst_abs: 0.0,
        near_samples: 0,
        near_worst_rel: 0.0,
        near_zero: 0,
        zero_floor,
        near_floor: 1e-2 * spec.rel_tol * top,
    };
    let mut seen = std::collections::HashSet::new();
    for _ in 0..10_000 * far {
        if c.far_samples >= far {
            break;
        }
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (a, b) = (&w.indices[i], &w.indices[j]);
        let st = level_stats(a.levels(), b.levels());
        if pair_geometry(a, b).map_or(true, |g| g.delta < (-(st.m as f64)).exp2()) || !seen.insert((i, j)) {
            continue;
        }
        let e = entry(fam, k, a, b, q, spec)?.value;
        let o = entry_oracle(fam, k, a, b, q, ORACLE_NODES)?;
        if o.abs() <= zero_floor {
            c.far_zero += 1;
            c.far_zero_worst_abs = c.far_zero_worst_abs.max((e - o).abs());
            continue;
        }
        let rel = (e - o).abs() / o.abs();
        c.far_samples += 1;
        c.far_worst_rel = c.far_worst_rel.max(rel);
        c.far_over_tol += usize::from(rel > far_tol);
    }
    let fine = QuadratureSpec { singular_refinement: spec.singular_refinement + 2, ..*spec };
    for _ in 0..10_000 * near {
        if c.near_samples >= near {
            break;
        }
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (a, b) = (&w.indices[i], &w.indices[j]);
        if pair_geometry(a, b).map_or(true, |g| g.delta > 0.0) || !seen.insert((i, j)) {
            continue;
        }
        let e0 = entry(fam, k, a, b, q, spec)?.value;
        let e2 = entry(fam, k, a, b, q, &fine)?.value;
        if e2.abs() <= c.near_floor {
            c.near_zero += 1;
            continue;
        }
        c.near_samples += 1;
        c.near_worst_rel = c.near_worst_rel.max((e0 - e2).abs() / e2.abs());
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Distance equivalence on surfaces

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSample {
    pub patch_a: usize,
    pub patch_b: usize,
    pub chart: f64,
    pub surface: f64,
    pub ratio: f64,
}

/// Euclidean distance of two mapped boxes: grid search then compass search.
pub fn mapped_box_distance(ca: &Chart, ra: [f64; 4], cb: &Chart, rb: [f64; 4]) -> f64 {
    let n = 17;
    let at = |r: &[f64; 4], s: f64, t: f64| [r[0] + s * (r[1] - r[0]), r[2] + t * (r[3] - r[2])];
    let f = |x: &[f64; 4]| -> f64 {
        let pa: Point3 = ca.map(at(&ra, x[0], x[1]));
        let pb: Point3 = cb.map(at(&rb, x[2], x[3]));
        dist3(&pa, &pb)
    };
    let mut best = [0.0; 4];
    let mut fb = f64::INFINITY;
    let grid = |i: usize| i as f64 / (n - 1) as f64;
    for i in 0..n {
        for j in 0..n {
            let pa = ca.map(at(&ra, grid(i), grid(j)));
            for k in 0..n {
                for l in 0..n {
                    let pb = cb.map(at(&rb, grid(k), grid(l)));
                    let v = dist3(&pa, &pb);
                    if v < fb {
                        fb = v;
                        best = [grid(i), grid(j), grid(k), grid(l)];
                    }
                }
            }
        }
    }
    let mut step = 1.0 / (n - 1) as f64;
    while step > 1e-12 {
        let mut moved = false;
        for c in 0..4 {
            for s in [-step, step] {
                let mut x = best;
                x[c] = (x[c] + s).clamp(0.0, 1.0);
                let v = f(&x);
                if v < fb {
                    fb = v;
                    best = x;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    fb
}

/// Random support pairs on adjacent patches with positive chart distance.
pub fn distance_samples(g: &PatchGeometry, w: &BasisWindow, count: usize, seed: u64) -> Vec<DistanceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..g.patch_count())
        .flat_map(|i| (0..g.patch_count()).map(move |j| (i, j)))
        .filter(|&(i, j)| matches!(g.adjacency(i, j), Adjacency::Edge(_) | Adjacency::Vertex(_)))
        .collect();
    let per_patch = w.dim() / w.patches;
    let mut out = Vec::with_capacity(count);
    if pairs.is_empty() {
        return out;
    }
    for _ in 0..10_000 * count {
        if out.len() >= count {
            break;
        }
        let (pa, pb) = pairs[rng.gen_range(0..pairs.len())];
        let a = &w.indices[pa * per_patch + rng.gen_range(0..per_patch)];
        let b = &w.indices[pb * per_patch + rng.gen_range(0..per_patch)];
        let chart = g.surface_distances(a, b).delta;
        if !(chart > 1e-9) {
            continue;
        }
        let (fa, fb) = (a.footprint(), b.footprint());
        let surface = mapped_box_distance(
            &g.charts[pa],
            [fa.x.lo, fa.x.hi, fa.y.lo, fa.y.hi],
            &g.charts[pb],
            [fb.x.lo, fb.x.hi, fb.y.lo, fb.y.hi],
        );
        out.push(DistanceSample { patch_a: pa, patch_b: pb, chart, surface, ratio: chart / surface });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn sstar_table_matches() {
        let t = default_sstar_table();
        let got: Vec<Option<u32>> = t.iter().map(|r| r.min_d_tilde).collect();
        assert_eq!(got, vec![Some(4), Some(6), Some(3), Some(5), None, Some(4)]);
    }

    #[test]
    fn flat_box_distance_is_exact() {
        let c = Chart::Flat { origin: [0.0; 3], e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] };
        let d = mapped_box_distance(&c, [0.0, 0.25, 0.0, 0.25], &c, [0.5, 0.75, 0.1, 0.2]);
        assert!((d - 0.25).abs() < 1e-12);
        let d = mapped_box_distance(&c, [0.0, 0.25, 0.0, 0.25], &c, [0.5, 0.75, 0.5, 0.6]);
        assert!((d - 0.25f64.hypot(0.25)).abs() < 1e-9);
    }
}
