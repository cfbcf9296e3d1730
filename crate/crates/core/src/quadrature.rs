//! Galerkin entries of singular kernels against piecewise polynomial tensor
//! functions.
//!
//! Pairs of boxes are refined recursively until they are either far enough
//! apart for a tensor Gauss rule of bounded order, or congruent cells that are
//! identical, share an edge or share a vertex. The latter are integrated after
//! a regularizing change of variables in relative coordinates whose Jacobian
//! cancels the `1/r` type singularity.

use std::sync::OnceLock;

use thiserror::Error;

use crate::basis1d::{Kind, Member1D, WaveletFamily};
use crate::index_geometry::MultiIndex;
use crate::kernels::{dist3, lift, Kernel, KernelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kernel {0} is not integrable over touching supports")]
    NonIntegrable(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Maximal Gauss order per direction; also the order of the regularized rules.
    pub gauss_order: usize,
    pub rel_tol: f64,
    pub max_subdivision_depth: u32,
    /// Extra uniform refinement levels applied to touching cells before the
    /// regularized rule; raising it is the self-convergence check.
    pub singular_refinement: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { gauss_order: 8, rel_tol: 1e-8, max_subdivision_depth: 12, singular_refinement: 0 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self, order_d: usize) -> Result<(), QuadError> {
        if self.gauss_order < order_d + 2 {
            return Err(QuadError::InvalidArgument(format!(
                "gauss_order {} below order_d + 2 = {}",
                self.gauss_order,
                order_d + 2
            )));
        }
        if self.gauss_order > MAX_GAUSS {
            return Err(QuadError::InvalidArgument(format!("gauss_order above {MAX_GAUSS}")));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(QuadError::InvalidArgument(format!("rel_tol {} outside (0, 1)", self.rel_tol)));
        }
        Ok(())
    }

    fn leaf_tol(&self) -> f64 {
        (self.rel_tol * 1e-2).max(1e-15)
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules on [0, 1]

pub const MAX_GAUSS: usize = 48;

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_gauss(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    GaussRule { nodes, weights }
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_GAUSS).map(|k| if k == 0 { GaussRule { nodes: vec![], weights: vec![] } } else { compute_gauss(k) }).collect());
    &rules[n.clamp(1, MAX_GAUSS)]
}

// ---------------------------------------------------------------------------
// Regularized rules for touching congruent cells

/// Node pairs `(u, v, w)` in units of the cell, with `u` in `[0,1]^2` and
/// `v` in the neighbouring cell.
#[derive(Debug, Clone, Default)]
pub struct PairRule {
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub w: Vec<f64>,
}

impl PairRule {
    fn push(&mut self, u: [f64; 2], v: [f64; 2], w: f64) {
        self.u.push(u);
        self.v.push(v);
        self.w.push(w);
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SingularRules {
    pub identical: PairRule,
    /// Neighbour at offset `(1, 0)`.
    pub edge: PairRule,
    /// Neighbour at offset `(1, 1)`.
    pub vertex: PairRule,
}

fn build_singular_rules(g: usize) -> SingularRules {
    let gr = gauss(g);
    let n = gr.nodes.len();
    let (x, w) = (&gr.nodes, &gr.weights);

    let mut identical = PairRule::default();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for tri in 0..2 {
                for i in 0..n {
                    let rho = x[i];
                    for j in 0..n {
                        let (m1, m2) = if tri == 0 { (rho, rho * x[j]) } else { (rho * x[j], rho) };
                        let z = [s1 * m1, s2 * m2];
                        let base_w = w[i] * w[j] * rho * (1.0 - m1) * (1.0 - m2);
                        for k in 0..n {
                            let u0 = (-z[0]).max(0.0) + x[k] * (1.0 - m1);
                            for l in 0..n {
                                let u1 = (-z[1]).max(0.0) + x[l] * (1.0 - m2);
                                identical.push([u0, u1], [u0 + z[0], u1 + z[1]], base_w * w[k] * w[l]);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut edge = PairRule::default();
    for sign in [1.0, -1.0] {
        for pyr in 0..3 {
            for i in 0..n {
                let rho = x[i];
                for j in 0..n {
                    for k in 0..n {
                        let (a, b, c) = match pyr {
                            0 => (rho, rho * x[j], rho * x[k]),
                            1 => (rho * x[j], rho, rho * x[k]),
                            _ => (rho * x[j], rho * x[k], rho),
                        };
                        let cz = sign * c;
                        let base_w = w[i] * w[j] * w[k] * rho * rho * (1.0 - c);
                        for l in 0..n {
                            let u1 = (-cz).max(0.0) + x[l] * (1.0 - c);
                            edge.push([1.0 - a, u1], [1.0 + b, u1 + cz], base_w * w[l]);
                        }
                    }
                }
            }
        }
    }

    let mut vertex = PairRule::default();
    for pyr in 0..4 {
        for i in 0..n {
            let rho = x[i];
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let t = [x[j], x[k], x[l]];
                        let mut c = [0.0; 4];
                        let mut ti = 0;
                        for (m, cm) in c.iter_mut().enumerate() {
                            if m == pyr {
                                *cm = rho;
                            } else {
                                *cm = rho * t[ti];
                                ti += 1;
                            }
                        }
                        let wt = w[i] * w[j] * w[k] * w[l] * rho * rho * rho;
                        vertex.push([1.0 - c[0], 1.0 - c[1]], [1.0 + c[2], 1.0 + c[3]], wt);
                    }
                }
            }
        }
    }
    SingularRules { identical, edge, vertex }
}

pub fn singular_rules(g: usize) -> &'static SingularRules {
    static RULES: OnceLock<Vec<OnceLock<SingularRules>>> = OnceLock::new();
    let table = RULES.get_or_init(|| (0..=MAX_GAUSS).map(|_| OnceLock::new()).collect());
    let g = g.clamp(1, MAX_GAUSS);
    table[g].get_or_init(|| build_singular_rules(g))
}

// ---------------------------------------------------------------------------
// Boxes and tensor polynomial bases on boxes

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn wx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn wy(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn max_side(&self) -> f64 {
        self.wx().max(self.wy())
    }

    pub fn dist(&self, o: &Rect) -> f64 {
        let dx = (self.x0 - o.x1).max(o.x0 - self.x1).max(0.0);
        let dy = (self.y0 - o.y1).max(o.y0 - self.y1).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    fn split(&self, sx: bool, sy: bool) -> Vec<Rect> {
        let xs: Vec<(f64, f64)> = if sx {
            let m = 0.5 * (self.x0 + self.x1);
            vec![(self.x0, m), (m, self.x1)]
        } else {
            vec![(self.x0, self.x1)]
        };
        let ys: Vec<(f64, f64)> = if sy {
            let m = 0.5 * (self.y0 + self.y1);
            vec![(self.y0, m), (m, self.y1)]
        } else {
            vec![(self.y0, self.y1)]
        };
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &(x0, x1) in &xs {
            for &(y0, y1) in &ys {
                out.push(Rect { x0, x1, y0, y1 });
            }
        }
        out
    }
}

/// Tensor polynomials `p(s) q(t)` in the local coordinates of `rect`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    pub rect: Rect,
    pub funcs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl TensorBasis {
    fn degree(&self) -> usize {
        self.funcs
            .iter()
            .map(|(p, q)| p.len().max(q.len()))
            .max()
            .unwrap_or(1)
            .saturating_sub(1)
    }

    #[inline]
    fn eval_into(&self, u: [f64; 2], out: &mut [f64]) {
        let s = (u[0] - self.rect.x0) / self.rect.wx();
        let t = (u[1] - self.rect.y0) / self.rect.wy();
        for (o, (p, q)) in out.iter_mut().zip(&self.funcs) {
            *o = crate::poly::eval(p, s) * crate::poly::eval(q, t);
        }
    }
}

/// Pulled-back kernel including surface weights: `k(u, v)` for chart points.
pub trait PairKernel: Sync {
    fn eval(&self, u: [f64; 2], v: [f64; 2]) -> f64;

    /// `None` when both boxes live in one chart where the kernel may be
    /// singular; `Some(d)` for a smooth pairing whose images stay at least
    /// `d` apart (`f64::INFINITY` for a smooth kernel).
    fn separation(&self) -> Option<f64> {
        None
    }

    /// Ratio between physical and chart lengths used to size Gauss rules for
    /// separated pairings.
    fn length_scale(&self) -> f64 {
        1.0
    }
}

/// Kernel on the flat unit square.
#[derive(Debug, Clone, Copy)]
pub struct FlatKernel(pub Kernel);

impl PairKernel for FlatKernel {
    #[inline]
    fn eval(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        self.0.eval_dist(dist3(&lift(u), &lift(v)))
    }

    fn separation(&self) -> Option<f64> {
        if matches!(self.0, Kernel::Constant) {
            Some(f64::INFINITY)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Report {
    /// Depth limit reached somewhere; a fallback rule was used.
    pub depth_limited: bool,
    /// At least one regularized singular rule was used.
    pub singular: bool,
}

struct Ctx<'a, K: PairKernel> {
    kern: &'a K,
    a: &'a TensorBasis,
    b: &'a TensorBasis,
    spec: &'a QuadratureSpec,
    ss_order: usize,
    extra_deg: usize,
    out: &'a mut [f64],
    fa: Vec<f64>,
    fb: Vec<f64>,
    report: Report,
}

fn order_for(dist: f64, half: f64, tol: f64, extra: usize) -> usize {
    if dist.is_infinite() {
        return extra + 1;
    }
    let e = dist / half;
    let rho = e + (1.0 + e * e).sqrt();
    let g = ((1.0 / tol).ln() / (2.0 * rho.ln())).ceil() as usize;
    g.max(1) + extra
}

impl<'a, K: PairKernel> Ctx<'a, K> {
    fn gauss_leaf(&mut self, ra: &Rect, rb: &Rect, ga: usize, gb: usize) {
        let na = self.a.funcs.len();
        let nb = self.b.funcs.len();
        let rule_a = gauss(ga);
        let rule_b = gauss(gb);
        let pts = |r: &Rect, rule: &GaussRule| {
            let mut p = Vec::with_capacity(rule.nodes.len().pow(2));
            let area = r.wx() * r.wy();
            for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
                for (yj, wj) in rule.nodes.iter().zip(&rule.weights) {
                    p.push(([r.x0 + xi * r.wx(), r.y0 + yj * r.wy()], wi * wj * area));
                }
            }
            p
        };
        let pa = pts(ra, rule_a);
        let pb = pts(rb, rule_b);
        // g_b[q][j] = sum_v w_v k(u, v) fb_j(v) for each u, then contract with fa.
        let mut fbv = vec![0.0; pb.len() * nb];
        for (i, (v, _)) in pb.iter().enumerate() {
            self.b.eval_into(*v, &mut fbv[i * nb..(i + 1) * nb]);
        }
        let mut acc = vec![0.0; nb];
        for (u, wu) in &pa {
            acc.iter_mut().for_each(|x| *x = 0.0);
            for (i, (v, wv)) in pb.iter().enumerate() {
                let kv = self.kern.eval(*u, *v) * wv;
                for (aj, fj) in acc.iter_mut().zip(&fbv[i * nb..(i + 1) * nb]) {
                    *aj += kv * fj;
                }
            }
            self.a.eval_into(*u, &mut self.fa);
            for p in 0..na {
                let c = self.fa[p] * wu;
                for (o, aj) in self.out[p * nb..(p + 1) * nb].iter_mut().zip(&acc) {
                    *o += c * aj;
                }
            }
        }
    }

    fn pair_rule_leaf(&mut self, ra: &Rect, rule: &PairRule, rot: u8) {
        let h = ra.wx();
        let na = self.a.funcs.len();
        let nb = self.b.funcs.len();
        let scale = h.powi(4);
        let map = |p: [f64; 2]| -> [f64; 2] {
            let (x, y) = (p[0] - 0.5, p[1] - 0.5);
            let (x, y) = match rot & 3 {
                0 => (x, y),
                1 => (-y, x),
                2 => (-x, -y),
                _ => (y, -x),
            };
            [ra.x0 + h * (x + 0.5), ra.y0 + h * (y + 0.5)]
        };
        for k in 0..rule.len() {
            let u = map(rule.u[k]);
            let v = map(rule.v[k]);
            let kv = self.kern.eval(u, v) * rule.w[k] * scale;
            self.a.eval_into(u, &mut self.fa);
            self.b.eval_into(v, &mut self.fb);
            for p in 0..na {
                let c = kv * self.fa[p];
                for (o, fj) in self.out[p * nb..(p + 1) * nb].iter_mut().zip(&self.fb) {
                    *o += c * fj;
                }
            }
        }
    }

    /// Touching congruent squares: returns false if not of that form.
    fn try_singular(&mut self, ra: &Rect, rb: &Rect) -> bool {
        let h = ra.wx();
        if ra.wy() != h || rb.wx() != h || rb.wy() != h {
            return false;
        }
        let ox = (rb.x0 - ra.x0) / h;
        let oy = (rb.y0 - ra.y0) / h;
        if ox.fract() != 0.0 || oy.fract() != 0.0 || ox.abs() > 1.0 || oy.abs() > 1.0 {
            return false;
        }
        let rules = singular_rules(self.ss_order);
        let (ox, oy) = (ox as i32, oy as i32);
        match (ox, oy) {
            (0, 0) => self.pair_rule_leaf(ra, &rules.identical, 0),
            (1, 0) => self.pair_rule_leaf(ra, &rules.edge, 0),
            (0, 1) => self.pair_rule_leaf(ra, &rules.edge, 1),
            (-1, 0) => self.pair_rule_leaf(ra, &rules.edge, 2),
            (0, -1) => self.pair_rule_leaf(ra, &rules.edge, 3),
            (1, 1) => self.pair_rule_leaf(ra, &rules.vertex, 0),
            (-1, 1) => self.pair_rule_leaf(ra, &rules.vertex, 1),
            (-1, -1) => self.pair_rule_leaf(ra, &rules.vertex, 2),
            _ => self.pair_rule_leaf(ra, &rules.vertex, 3),
        }
        self.report.singular = true;
        true
    }

    fn run(&mut self) -> Result<(), QuadError> {
        let tol = self.spec.leaf_tol();
        let gmax = self.spec.gauss_order;
        let sep = self.kern.separation();
        let mut stack: Vec<(Rect, Rect, u32, Option<u32>)> = vec![(self.a.rect, self.b.rect, 0, None)];
        while let Some((ra, rb, depth, refine_left)) = stack.pop() {
            let half = 0.5 * ra.max_side().max(rb.max_side());
            let (dist, touching) = match sep {
                Some(d) => (d / self.kern.length_scale(), false),
                None => {
                    let d = ra.dist(&rb);
                    (d, d == 0.0)
                }
            };
            if !touching {
                let g = order_for(dist, half, tol, self.extra_deg);
                if g <= gmax || depth >= self.spec.max_subdivision_depth {
                    if g > gmax {
                        self.report.depth_limited = true;
                    }
                    let g = g.min(gmax);
                    self.gauss_leaf(&ra, &rb, g, g);
                    continue;
                }
            } else {
                let congruent = ra.wx() == ra.wy() && ra.wx() == rb.wx() && ra.wy() == rb.wy();
                if congruent {
                    let left = refine_left.unwrap_or(self.spec.singular_refinement);
                    if left == 0 && self.try_singular(&ra, &rb) {
                        continue;
                    }
                    if left > 0 && depth < self.spec.max_subdivision_depth {
                        for ca in ra.split(true, true) {
                            for cb in rb.split(true, true) {
                                stack.push((ca, cb, depth + 1, Some(left - 1)));
                            }
                        }
                        continue;
                    }
                }
                if depth >= self.spec.max_subdivision_depth {
                    // Offset rules never place coincident nodes inside one box.
                    self.report.depth_limited = true;
                    self.gauss_leaf(&ra, &rb, 2, 3);
                    continue;
                }
            }
            let s = ra.max_side().max(rb.max_side());
            let ca = ra.split(ra.wx() == s, ra.wy() == s);
            let cb = rb.split(rb.wx() == s, rb.wy() == s);
            for x in &ca {
                for y in &cb {
                    stack.push((*x, *y, depth + 1, refine_left));
                }
            }
        }
        Ok(())
    }
}

/// Accumulates `int_A int_B k(u, v) f_p(u) g_q(v)` into `out[p * nb + q]`.
pub fn integrate_pair<K: PairKernel>(
    kern: &K,
    a: &TensorBasis,
    b: &TensorBasis,
    spec: &QuadratureSpec,
    out: &mut [f64],
) -> Report {
    assert_eq!(out.len(), a.funcs.len() * b.funcs.len());
    let extra_deg = a.degree().max(b.degree()).div_ceil(2);
    let mut ctx = Ctx {
        kern,
        a,
        b,
        spec,
        ss_order: spec.gauss_order,
        extra_deg,
        out,
        fa: vec![0.0; a.funcs.len()],
        fb: vec![0.0; b.funcs.len()],
        report: Report::default(),
    };
    let _ = ctx.run();
    ctx.report
}

// ---------------------------------------------------------------------------
// Entries of tensor-product wavelets

/// Polynomial pieces of a 1D member: `(lo, hi, local coefficients)`.
pub fn pieces_1d(fam: &WaveletFamily, m: &Member1D) -> Vec<(f64, f64, Vec<f64>)> {
    fam.member(*m).pieces.into_iter().map(|p| (p.lo, p.hi, p.coeffs)).collect()
}

/// One single-function tensor basis per polynomial piece of `idx`.
pub fn piece_bases(fam: &WaveletFamily, idx: &MultiIndex) -> Vec<TensorBasis> {
    let px = pieces_1d(fam, &idx.x);
    let py = pieces_1d(fam, &idx.y);
    let mut out = Vec::with_capacity(px.len() * py.len());
    for (x0, x1, cx) in &px {
        for (y0, y1, cy) in &py {
            out.push(TensorBasis {
                rect: Rect::new(*x0, *x1, *y0, *y1),
                funcs: vec![(cx.clone(), cy.clone())],
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub value: f64,
    /// Estimated absolute error; zero for separated pairs integrated by
    /// Gauss rules sized for `rel_tol`.
    pub error_estimate: f64,
    /// Set when the depth limit forced a fallback rule or the estimate
    /// exceeds the requested tolerance.
    pub accuracy_warning: bool,
}

pub fn rescale(q: f64, a: &MultiIndex, b: &MultiIndex) -> f64 {
    (-q * (a.linf() + b.linf()) as f64).exp2()
}

/// Unscaled integral over all piece pairs.
pub fn raw_pair_integral<K: PairKernel>(
    kern: &K,
    pa: &[TensorBasis],
    pb: &[TensorBasis],
    spec: &QuadratureSpec,
) -> (f64, Report) {
    let mut total = 0.0;
    let mut rep = Report::default();
    for a in pa {
        for b in pb {
            let mut out = [0.0];
            let r = integrate_pair(kern, a, b, spec, &mut out);
            rep.depth_limited |= r.depth_limited;
            rep.singular |= r.singular;
            total += out[0];
        }
    }
    (total, rep)
}

/// Entry with error estimate for touching pairs from a lower-order rerun.
pub fn entry_from_pieces<K: PairKernel>(
    kern: &K,
    pa: &[TensorBasis],
    pb: &[TensorBasis],
    scale: f64,
    spec: &QuadratureSpec,
) -> Entry {
    let (v, rep) = raw_pair_integral(kern, pa, pb, spec);
    let value = v * scale;
    let mut est = 0.0;
    if rep.singular {
        let coarse = QuadratureSpec { gauss_order: spec.gauss_order - 2, ..*spec };
        let (vc, _) = raw_pair_integral(kern, pa, pb, &coarse);
        est = (vc * scale - value).abs();
    }
    let warn = rep.depth_limited || est > spec.rel_tol * value.abs().max(1e-300) * 1e3;
    Entry { value, error_estimate: est, accuracy_warning: warn }
}

fn supports_touch(a: &MultiIndex, b: &MultiIndex) -> bool {
    let (ax0, ax1) = a.x.support();
    let (ay0, ay1) = a.y.support();
    let (bx0, bx1) = b.x.support();
    let (by0, by1) = b.y.support();
    Rect::new(ax0, ax1, ay0, ay1).dist(&Rect::new(bx0, bx1, by0, by1)) == 0.0
}

/// `2^{-q(|a|_inf + |b|_inf)} <K psi_b, psi_a>` on the unit square.
pub fn entry(
    fam: &WaveletFamily,
    k: Kernel,
    a: &MultiIndex,
    b: &MultiIndex,
    q: f64,
    spec: &QuadratureSpec,
) -> Result<Entry, QuadError> {
    spec.validate(fam.order_d)?;
    if a.patch != b.patch {
        return Err(QuadError::InvalidArgument("entry requires indices on one chart".into()));
    }
    if !k.integrable_on_touching() && supports_touch(a, b) {
        return Err(QuadError::NonIntegrable(k.id()));
    }
    let pa = piece_bases(fam, a);
    let pb = piece_bases(fam, b);
    Ok(entry_from_pieces(&FlatKernel(k), &pa, &pb, rescale(q, a, b), spec))
}

/// Nodes and values of a piecewise function along one direction: `n / 2`
/// uniform cells, two Gauss points each.
fn oracle_nodes_1d(pieces: &[(f64, f64, Vec<f64>)], n: usize) -> Vec<(f64, f64, f64)> {
    let lo = pieces[0].0;
    let hi = pieces[pieces.len() - 1].1;
    let cells = n / 2;
    let h = (hi - lo) / cells as f64;
    let g = 0.5 / 3f64.sqrt();
    let mut out = Vec::with_capacity(n);
    for c in 0..cells {
        let mid = lo + (c as f64 + 0.5) * h;
        for x in [mid - g * h, mid + g * h] {
            let p = pieces
                .iter()
                .find(|p| p.0 <= x && x < p.1)
                .expect("node inside support");
            let val = crate::poly::eval(&p.2, (x - p.0) / (p.1 - p.0));
            out.push((x, 0.5 * h, val));
        }
    }
    out
}

/// Brute-force tensor rule over the support product, `n` nodes per direction
/// (`n / 2` cells with two Gauss points), skipping coincident nodes.
pub fn oracle_integral<K: PairKernel>(
    kern: &K,
    ax: &[(f64, f64, Vec<f64>)],
    ay: &[(f64, f64, Vec<f64>)],
    bx: &[(f64, f64, Vec<f64>)],
    by: &[(f64, f64, Vec<f64>)],
    n: usize,
) -> Result<f64, QuadError> {
    if n < 16 || !n.is_multiple_of(4) {
        return Err(QuadError::InvalidArgument(format!("oracle n = {n} must be >= 16 and divisible by 4")));
    }
    let nax = oracle_nodes_1d(ax, n);
    let nay = oracle_nodes_1d(ay, n);
    let nbx = oracle_nodes_1d(bx, n);
    let nby = oracle_nodes_1d(by, n);
    let mut total = 0.0;
    for &(ux, wux, fux) in &nax {
        for &(uy, wuy, fuy) in &nay {
            let fu = fux * fuy * wux * wuy;
            if fu == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for &(vx, wvx, fvx) in &nbx {
                for &(vy, wvy, fvy) in &nby {
                    if ux == vx && uy == vy {
                        continue;
                    }
                    inner += kern.eval([ux, uy], [vx, vy]) * fvx * fvy * wvx * wvy;
                }
            }
            total += fu * inner;
        }
    }
    Ok(total)
}

pub fn entry_oracle(
    fam: &WaveletFamily,
    k: Kernel,
    a: &MultiIndex,
    b: &MultiIndex,
    q: f64,
    n: usize,
) -> Result<f64, QuadError> {
    let v = oracle_integral(
        &FlatKernel(k),
        &pieces_1d(fam, &a.x),
        &pieces_1d(fam, &a.y),
        &pieces_1d(fam, &b.x),
        &pieces_1d(fam, &b.y),
        n,
    )?;
    Ok(v * rescale(q, a, b))
}

/// Whether a 1D member is a scaling function.
pub fn is_scaling(m: &Member1D) -> bool {
    m.kind == Kind::Scaling
}
