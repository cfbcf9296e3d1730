//! Finite level windows, dense and compressed Galerkin matrices, and the
//! matrix-free dropped part.
//!
//! Dense matrices are assembled in the single-scale basis of piecewise
//! Legendre polynomials on the finest cells and transformed to the wavelet
//! basis with the orthogonal fast wavelet transform in both indices.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::basis1d::{fwt_forward, Member1D, WaveletFamily};
use crate::compression::{CompressionParams, KeepDecision, LevelCutoffs, RuleSet, Stage};
use crate::index_geometry::{delta_1d, sigma_1d, Footprint1D, MultiIndex, PairGeometry};
use crate::kernels::Kernel;
use crate::manifold::PatchGeometry;
use crate::quadrature::{entry, integrate_pair, Entry, FlatKernel, PairKernel, QuadError, QuadratureSpec, Rect, TensorBasis};

pub const MAX_WINDOW: usize = 1_000_000;
pub const MAX_DENSE: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("window dimension {0} exceeds the limit of {MAX_WINDOW}")]
    WindowTooLarge(usize),
    #[error("dense assembly of dimension {0} exceeds the limit of {MAX_DENSE}; use the matrix-free path")]
    DenseTooLarge(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// All tensor indices with levels `<= j_max` per direction, on every patch.
#[derive(Debug, Clone)]
pub struct BasisWindow {
    pub family: WaveletFamily,
    pub j_max: u32,
    pub patches: usize,
    pub indices: Vec<MultiIndex>,
    /// 1D members in transform order.
    pub members: Vec<Member1D>,
    /// Per window index: transform positions of its x and y members.
    pos: Vec<(u32, u32)>,
}

impl BasisWindow {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn n1(&self) -> usize {
        self.members.len()
    }

    pub fn positions(&self, i: usize) -> (usize, usize) {
        let (a, b) = self.pos[i];
        (a as usize, b as usize)
    }
}

fn members_at_level(fam: &WaveletFamily, j: u32) -> Vec<Vec<Member1D>> {
    // Groups by type (scaling types first), translations inside.
    let d = fam.order_d as u8;
    let mut out = Vec::new();
    if j == 0 {
        for t in 0..d {
            out.push(vec![Member1D::scaling(t)]);
        }
    }
    for t in 0..d {
        out.push((0..(1u32 << j)).map(|k| Member1D::wavelet(j, k, t)).collect());
    }
    out
}

pub fn build_window(fam: &WaveletFamily, j_max: u32) -> Result<BasisWindow, AssemblyError> {
    build_window_patches(fam, j_max, 1)
}

pub fn build_window_patches(fam: &WaveletFamily, j_max: u32, patches: usize) -> Result<BasisWindow, AssemblyError> {
    if j_max > 20 {
        return Err(AssemblyError::WindowTooLarge(usize::MAX));
    }
    if patches == 0 {
        return Err(AssemblyError::InvalidArgument("at least one patch".into()));
    }
    let n1 = fam.count_1d(j_max);
    let n = n1.checked_mul(n1).and_then(|v| v.checked_mul(patches)).unwrap_or(usize::MAX);
    if n > MAX_WINDOW {
        return Err(AssemblyError::WindowTooLarge(n));
    }
    let levels: Vec<Vec<Vec<Member1D>>> = (0..=j_max).map(|j| members_at_level(fam, j)).collect();
    let mut indices = Vec::with_capacity(n);
    for patch in 0..patches {
        for jx in 0..=j_max {
            for jy in 0..=j_max {
                for gx in &levels[jx as usize] {
                    for gy in &levels[jy as usize] {
                        for mx in gx {
                            for my in gy {
                                indices.push(MultiIndex::new(patch as u16, *mx, *my));
                            }
                        }
                    }
                }
            }
        }
    }
    let pos = indices
        .iter()
        .map(|m| (fam.transform_position(m.x) as u32, fam.transform_position(m.y) as u32))
        .collect();
    Ok(BasisWindow { family: fam.clone(), j_max, patches, indices, members: fam.members_1d(j_max), pos })
}

/// Where the indices live.
#[derive(Debug, Clone, Copy)]
pub enum Domain<'a> {
    UnitSquare,
    Surface(&'a PatchGeometry),
}

impl Domain<'_> {
    pub fn patch_count(&self) -> usize {
        match self {
            Domain::UnitSquare => 1,
            Domain::Surface(g) => g.patch_count(),
        }
    }

    pub fn keep(&self, a: &MultiIndex, b: &MultiIndex, p: &CompressionParams) -> KeepDecision {
        match self {
            Domain::UnitSquare => crate::compression::keep_entry(a, b, p),
            Domain::Surface(g) => g.keep_entry_surface(a, b, p),
        }
    }

    pub fn entry(
        &self,
        fam: &WaveletFamily,
        k: Kernel,
        a: &MultiIndex,
        b: &MultiIndex,
        q: f64,
        spec: &QuadratureSpec,
    ) -> Result<Entry, QuadError> {
        match self {
            Domain::UnitSquare => entry(fam, k, a, b, q, spec),
            Domain::Surface(g) => g.surface_entry(fam, k, a, b, q, spec),
        }
    }
}

// ---------------------------------------------------------------------------
// Dense matrices

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        check_dim(self.n, v)?;
        Ok(self.data.par_chunks(self.n).map(|r| dot(r, v)).collect())
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        check_dim(self.n, v)?;
        let mut y = vec![0.0; self.n];
        for (i, r) in self.data.chunks(self.n).enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                y.iter_mut().zip(r).for_each(|(y, a)| *y += vi * a);
            }
        }
        Ok(y)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// In-place transpose, blocked for locality.
    pub fn transpose_in_place(&mut self) {
        let n = self.n;
        const B: usize = 64;
        for bi in (0..n).step_by(B) {
            for bj in (bi..n).step_by(B) {
                for i in bi..(bi + B).min(n) {
                    let j0 = if bi == bj { i + 1 } else { bj };
                    for j in j0..(bj + B).min(n) {
                        self.data.swap(i * n + j, j * n + i);
                    }
                }
            }
        }
    }
}

fn check_dim(n: usize, v: &[f64]) -> Result<(), AssemblyError> {
    if v.len() != n {
        return Err(AssemblyError::InvalidArgument(format!("vector length {} differs from dimension {n}", v.len())));
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators keep the loop vectorizable and the order fixed.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Matrix of entries computed one by one with `entry`; for small windows and
/// as a reference for the transform route.
pub fn assemble_full_direct(
    w: &BasisWindow,
    domain: Domain<'_>,
    k: Kernel,
    q: f64,
    spec: &QuadratureSpec,
) -> Result<DenseMatrix, AssemblyError> {
    let n = w.dim();
    if n > MAX_DENSE {
        return Err(AssemblyError::DenseTooLarge(n));
    }
    let rows: Result<Vec<Vec<f64>>, QuadError> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| domain.entry(&w.family, k, &w.indices[i], &w.indices[j], q, spec).map(|e| e.value))
                .collect()
        })
        .collect();
    Ok(DenseMatrix { n, data: rows?.concat() })
}

/// Single-scale Galerkin matrix on `2^levels` cells per direction and patch.
/// Index of `(patch, cell (cx, cy), Legendre pair (p, q))` is
/// `patch * n1^2 + (cx * 2^levels + cy) * d^2 + p * d + q`.
pub fn single_scale_matrix(
    fam: &WaveletFamily,
    domain: Domain<'_>,
    levels: u32,
    k: Kernel,
    spec: &QuadratureSpec,
) -> Result<DenseMatrix, AssemblyError> {
    spec.validate(fam.order_d)?;
    let d = fam.order_d;
    let d2 = d * d;
    let side = 1usize << levels;
    let cells_per_patch = side * side;
    let patches = domain.patch_count();
    let n_cells = patches * cells_per_patch;
    let n = n_cells * d2;
    if n > MAX_DENSE {
        return Err(AssemblyError::DenseTooLarge(n));
    }
    let h = 1.0 / side as f64;
    // Cell basis (1/h) P_p(s) P_q(t); scale folded into the x factor.
    let leg = fam.scaling_polys();
    let funcs: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .flat_map(|p| (0..d).map(move |q| (p, q)))
        .map(|(p, q)| (leg[p].iter().map(|c| c / h).collect(), leg[q].clone()))
        .collect();
    let cell_basis = |c: usize| {
        let local = c % cells_per_patch;
        let (cx, cy) = (local / side, local % side);
        TensorBasis {
            rect: Rect::new(cx as f64 * h, (cx + 1) as f64 * h, cy as f64 * h, (cy + 1) as f64 * h),
            funcs: funcs.clone(),
        }
    };
    if !k.integrable_on_touching() {
        return Err(AssemblyError::Quadrature(QuadError::NonIntegrable(k.id())));
    }
    let mut m = DenseMatrix::zeros(n);
    // Upper block triangle, one block row of cells per task.
    m.data.par_chunks_mut(d2 * n).enumerate().for_each(|(ca, rows)| {
        let pa = ca / cells_per_patch;
        let mut out = vec![0.0; d2 * d2];
        let ba = cell_basis(ca);
        for cb in ca..n_cells {
            let pb = cb / cells_per_patch;
            let bb = cell_basis(cb);
            out.iter_mut().for_each(|x| *x = 0.0);
            match domain {
                Domain::UnitSquare => {
                    integrate_pair(&FlatKernel(k), &ba, &bb, spec, &mut out);
                }
                Domain::Surface(g) => {
                    let (kern, ga, gb) = g.pair_setup(k, pa, pb, std::slice::from_ref(&ba), std::slice::from_ref(&bb));
                    integrate_with(&kern, &ga[0], &gb[0], spec, &mut out);
                }
            }
            for p in 0..d2 {
                rows[p * n + cb * d2..p * n + cb * d2 + d2].copy_from_slice(&out[p * d2..(p + 1) * d2]);
            }
        }
    });
    // Mirror the strict lower block triangle.
    for ca in 0..n_cells {
        for cb in 0..ca {
            for p in 0..d2 {
                for qq in 0..d2 {
                    let v = m.data[(cb * d2 + qq) * n + ca * d2 + p];
                    m.data[(ca * d2 + p) * n + cb * d2 + qq] = v;
                }
            }
        }
    }
    Ok(m)
}

fn integrate_with<K: PairKernel>(k: &K, a: &TensorBasis, b: &TensorBasis, spec: &QuadratureSpec, out: &mut [f64]) {
    integrate_pair(k, a, b, spec, out);
}

/// Transform every row of a single-scale matrix to window order, in place.
fn transform_rows(m: &mut DenseMatrix, w: &BasisWindow, wpos: &[u32]) {
    let fam = &w.family;
    let d = fam.order_d;
    let n1 = w.n1();
    let side = n1 / d;
    let levels = side.trailing_zeros();
    let n = m.n;
    let block = n1 * n1;
    m.data.par_chunks_mut(n).for_each_init(
        || (vec![0.0; block], vec![0.0; n1], vec![0.0; n1], vec![0.0; n]),
        |(a, line, scratch, out), row| {
            for patch in 0..w.patches {
                let src = &row[patch * block..(patch + 1) * block];
                // Gather into a[ix * n1 + iy] with ix = cx * d + p, iy = cy * d + q.
                for cx in 0..side {
                    for cy in 0..side {
                        let c = (cx * side + cy) * d * d;
                        for p in 0..d {
                            for qq in 0..d {
                                a[(cx * d + p) * n1 + cy * d + qq] = src[c + p * d + qq];
                            }
                        }
                    }
                }
                for ix in 0..n1 {
                    fwt_forward(fam, &mut a[ix * n1..(ix + 1) * n1], scratch, levels);
                }
                for iy in 0..n1 {
                    for ix in 0..n1 {
                        line[ix] = a[ix * n1 + iy];
                    }
                    fwt_forward(fam, line, scratch, levels);
                    for ix in 0..n1 {
                        a[ix * n1 + iy] = line[ix];
                    }
                }
                for (t, &v) in a.iter().enumerate() {
                    out[wpos[patch * block + t] as usize] = v;
                }
            }
            row.copy_from_slice(out);
        },
    );
}

/// Dense wavelet-basis matrix via single-scale assembly and two-sided
/// fast wavelet transform. Rows and columns follow the window enumeration.
pub fn assemble_full(
    w: &BasisWindow,
    domain: Domain<'_>,
    k: Kernel,
    q: f64,
    spec: &QuadratureSpec,
) -> Result<DenseMatrix, AssemblyError> {
    let n = w.dim();
    if n > MAX_DENSE {
        return Err(AssemblyError::DenseTooLarge(n));
    }
    if w.patches != domain.patch_count() {
        return Err(AssemblyError::InvalidArgument("window and domain patch counts differ".into()));
    }
    let mut m = single_scale_matrix(&w.family, domain, w.j_max + 1, k, spec)?;
    let n1 = w.n1();
    let mut wpos = vec![0u32; n];
    for (i, idx) in w.indices.iter().enumerate() {
        let (mx, my) = w.positions(i);
        wpos[idx.patch as usize * n1 * n1 + mx * n1 + my] = i as u32;
    }
    transform_rows(&mut m, w, &wpos);
    m.transpose_in_place();
    transform_rows(&mut m, w, &wpos);
    let scale: Vec<f64> = w.indices.iter().map(|i| (-q * i.linf() as f64).exp2()).collect();
    m.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let si = scale[i];
        row.iter_mut().zip(&scale).for_each(|(v, sj)| *v *= si * sj);
    });
    Ok(m)
}

// ---------------------------------------------------------------------------
// Patterns

/// Fast keep/drop evaluation over a window from per-level cutoff tables and
/// 1D distance tables.
pub struct PatternBuilder<'a> {
    pub window: &'a BasisWindow,
    pub domain: Domain<'a>,
    pub params: CompressionParams,
    nl: usize,
    cutoffs: Vec<LevelCutoffs>,
    d1: Vec<f64>,
    s1: Vec<f64>,
}

impl<'a> PatternBuilder<'a> {
    pub fn new(window: &'a BasisWindow, domain: Domain<'a>, params: CompressionParams) -> Self {
        let nl = window.j_max as usize + 1;
        let mut cutoffs = Vec::with_capacity(nl.pow(4));
        for jx in 0..nl as u32 {
            for jy in 0..nl as u32 {
                for jx2 in 0..nl as u32 {
                    for jy2 in 0..nl as u32 {
                        cutoffs.push(LevelCutoffs::new((jx, jy), (jx2, jy2), &params));
                    }
                }
            }
        }
        let fp: Vec<Footprint1D> = window.members.iter().map(Footprint1D::of).collect();
        let n1 = fp.len();
        let mut d1 = vec![0.0; n1 * n1];
        let mut s1 = vec![0.0; n1 * n1];
        for a in 0..n1 {
            for b in 0..n1 {
                d1[a * n1 + b] = delta_1d(&fp[a], &fp[b]);
                s1[a * n1 + b] = sigma_1d(&fp[a], &fp[b]);
            }
        }
        PatternBuilder { window, domain, params, nl, cutoffs, d1, s1 }
    }

    #[inline]
    pub fn stage(&self, i: usize, j: usize) -> Stage {
        let w = self.window;
        let (a, b) = (&w.indices[i], &w.indices[j]);
        if a.patch != b.patch {
            return self.domain.keep(a, b, &self.params).stage;
        }
        let n1 = w.n1();
        let (ax, ay) = w.positions(i);
        let (bx, by) = w.positions(j);
        let g = PairGeometry::from_parts(
            self.d1[ax * n1 + bx],
            self.d1[ay * n1 + by],
            self.s1[ax * n1 + bx],
            self.s1[ay * n1 + by],
        );
        let nl = self.nl;
        let code = ((a.jx() as usize * nl + a.jy() as usize) * nl + b.jx() as usize) * nl + b.jy() as usize;
        self.cutoffs[code].decide(&g, RuleSet::ALL)
    }

    pub fn build(&self) -> Pattern {
        let n = self.window.dim();
        let rows: Vec<(Vec<u32>, [u64; 9])> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut kept = Vec::new();
                let mut hist = [0u64; 9];
                for j in 0..n {
                    let s = self.stage(i, j);
                    hist[s.index()] += 1;
                    if s.is_kept() {
                        kept.push(j as u32);
                    }
                }
                (kept, hist)
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut histogram = [0u64; 9];
        for (kept, h) in rows {
            cols.extend_from_slice(&kept);
            row_ptr.push(cols.len());
            for (a, b) in histogram.iter_mut().zip(h) {
                *a += b;
            }
        }
        Pattern { n, row_ptr, cols, histogram }
    }
}

/// Kept pairs in compressed-row form plus the drop-stage histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub histogram: [u64; 9],
}

impl Pattern {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_max(&self) -> usize {
        (0..self.n).map(|i| self.row(i).len()).max().unwrap_or(0)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).iter().all(|&j| self.contains(j as usize, i)))
    }

    pub fn histogram_map(&self) -> Vec<(&'static str, u64)> {
        Stage::ALL.iter().map(|s| (s.as_str(), self.histogram[s.index()])).collect()
    }
}

// ---------------------------------------------------------------------------
// Entry sources and operators

pub trait EntrySource: Sync {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
    fn dense_row(&self, _i: usize) -> Option<&[f64]> {
        None
    }
}

impl EntrySource for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    fn dense_row(&self, i: usize) -> Option<&[f64]> {
        Some(self.row(i))
    }
}

/// Entries computed on demand by quadrature.
pub struct DirectEntries<'a> {
    pub window: &'a BasisWindow,
    pub domain: Domain<'a>,
    pub kernel: Kernel,
    pub q: f64,
    pub spec: QuadratureSpec,
}

impl EntrySource for DirectEntries<'_> {
    fn dim(&self) -> usize {
        self.window.dim()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let w = self.window;
        self.domain
            .entry(&w.family, self.kernel, &w.indices[i], &w.indices[j], self.q, &self.spec)
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorMetadata {
    pub n: usize,
    pub r: u32,
    pub nnz: usize,
    pub nnz_row_max: usize,
    pub params: CompressionParams,
    pub histogram: Vec<(String, u64)>,
}

#[derive(Debug, Clone)]
pub struct CompressedOperator {
    pub r: u32,
    pub params: CompressionParams,
    pub pattern: Pattern,
    pub values: Vec<f64>,
}

impl CompressedOperator {
    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        check_dim(self.n(), v)?;
        let p = &self.pattern;
        Ok((0..p.n)
            .into_par_iter()
            .map(|i| {
                let (s, e) = (p.row_ptr[i], p.row_ptr[i + 1]);
                p.cols[s..e].iter().zip(&self.values[s..e]).map(|(&j, a)| a * v[j as usize]).sum()
            })
            .collect())
    }

    pub fn metadata(&self) -> OperatorMetadata {
        OperatorMetadata {
            n: self.n(),
            r: self.r,
            nnz: self.pattern.nnz(),
            nnz_row_max: self.pattern.row_max(),
            params: self.params,
            histogram: self.pattern.histogram_map().into_iter().map(|(s, c)| (s.to_string(), c)).collect(),
        }
    }

    pub fn values_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn compress_with(pattern: Pattern, params: CompressionParams, source: &dyn EntrySource) -> CompressedOperator {
    let values: Vec<f64> = (0..pattern.n)
        .into_par_iter()
        .flat_map_iter(|i| pattern.row(i).iter().map(move |&j| source.entry(i, j as usize)).collect::<Vec<_>>())
        .collect();
    CompressedOperator { r: params.r, params, pattern, values }
}

/// Pattern by `keep_entry` over all pairs, values by quadrature for kept pairs.
pub fn assemble_compressed(
    w: &BasisWindow,
    domain: Domain<'_>,
    k: Kernel,
    p: &CompressionParams,
    spec: &QuadratureSpec,
) -> Result<CompressedOperator, AssemblyError> {
    p.validate().map_err(|e| AssemblyError::InvalidArgument(e.to_string()))?;
    spec.validate(w.family.order_d)?;
    let pattern = PatternBuilder::new(w, domain, *p).build();
    let src = DirectEntries { window: w, domain, kernel: k, q: p.q, spec: *spec };
    let op = compress_with(pattern, *p, &src);
    if !op.values_finite() {
        return Err(AssemblyError::Quadrature(QuadError::NonIntegrable(k.id())));
    }
    Ok(op)
}

/// `L - L_r` as a linear map over an entry source.
pub struct DroppedOperator<'a> {
    pub pattern: &'a Pattern,
    pub source: &'a dyn EntrySource,
}

impl DroppedOperator<'_> {
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let n = self.pattern.n;
        check_dim(n, v)?;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let kept = self.pattern.row(i);
                match self.source.dense_row(i) {
                    Some(row) => {
                        let full = dot(row, v);
                        let k: f64 = kept.iter().map(|&j| row[j as usize] * v[j as usize]).sum();
                        full - k
                    }
                    None => {
                        let mut s = 0.0;
                        let mut it = kept.iter().peekable();
                        for (j, &vj) in v.iter().enumerate() {
                            if it.peek().map(|&&c| c as usize == j).unwrap_or(false) {
                                it.next();
                                continue;
                            }
                            if vj != 0.0 {
                                s += self.source.entry(i, j) * vj;
                            }
                        }
                        s
                    }
                }
            })
            .collect())
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let n = self.pattern.n;
        check_dim(n, v)?;
        let mut y = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let kept = self.pattern.row(i);
            match self.source.dense_row(i) {
                Some(row) => {
                    y.iter_mut().zip(row).for_each(|(y, a)| *y += vi * a);
                    for &j in kept {
                        y[j as usize] -= vi * row[j as usize];
                    }
                }
                None => {
                    let mut it = kept.iter().peekable();
                    for (j, yj) in y.iter_mut().enumerate() {
                        if it.peek().map(|&&c| c as usize == j).unwrap_or(false) {
                            it.next();
                            continue;
                        }
                        *yj += vi * self.source.entry(i, j);
                    }
                }
            }
        }
        Ok(y)
    }
}

/// `(L - L_r) v` evaluating entries only where the cascade drops them.
pub fn dropped_apply(
    w: &BasisWindow,
    domain: Domain<'_>,
    k: Kernel,
    p: &CompressionParams,
    spec: &QuadratureSpec,
    v: &[f64],
) -> Result<Vec<f64>, AssemblyError> {
    check_dim(w.dim(), v)?;
    let pattern = PatternBuilder::new(w, domain, *p).build();
    let src = DirectEntries { window: w, domain, kernel: k, q: p.q, spec: *spec };
    DroppedOperator { pattern: &pattern, source: &src }.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis1d::build_family;

    #[test]
    fn window_counts() {
        let haar = build_family(1, 8).unwrap();
        assert_eq!(build_window(&haar, 1).unwrap().dim(), 16);
        assert_eq!(build_window(&haar, 4).unwrap().dim(), 1024);
        let f2 = build_family(2, 8).unwrap();
        assert_eq!(build_window(&f2, 3).unwrap().dim(), 1024);
        assert!(matches!(build_window(&haar, 10), Err(AssemblyError::WindowTooLarge(_))));
    }

    #[test]
    fn window_order_is_lexicographic() {
        let f2 = build_family(2, 8).unwrap();
        let w = build_window(&f2, 2).unwrap();
        let key = |m: &MultiIndex| {
            (m.patch, m.jx(), m.jy(), (m.x.kind, m.x.t), (m.y.kind, m.y.t), m.x.k, m.y.k)
        };
        assert!(w.indices.windows(2).all(|p| key(&p[0]) < key(&p[1])));
    }

    #[test]
    fn transpose_round_trip() {
        let mut m = DenseMatrix { n: 70, data: (0..4900).map(|x| x as f64).collect() };
        let orig = m.clone();
        m.transpose_in_place();
        assert_eq!(m.get(3, 5), orig.get(5, 3));
        m.transpose_in_place();
        assert_eq!(m, orig);
    }
}
