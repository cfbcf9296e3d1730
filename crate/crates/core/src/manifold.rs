//! Patchwise parametrized surfaces and glued charts across shared edges and
//! vertices.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::basis1d::WaveletFamily;
use crate::compression::{CompressionParams, KeepDecision, LevelCutoffs, RuleSet, Stage};
use crate::index_geometry::{Footprint1D, Footprint2D, MultiIndex, PairGeometry};
use crate::kernels::{dist3, Kernel, Point3};
use crate::quadrature::{
    entry_from_pieces, oracle_integral, piece_bases, pieces_1d, rescale, Entry, PairKernel, QuadError,
    QuadratureSpec, Rect, TensorBasis,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("patches {0} and {1} are separated; no common chart")]
    NoChart(usize, usize),
    #[error("inadmissible decomposition: patches {0} and {1} {2}")]
    Inadmissible(usize, usize, String),
    #[error("unknown geometry preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    Flat { origin: Point3, e1: Point3, e2: Point3 },
    Bilinear { p00: Point3, p10: Point3, p01: Point3, p11: Point3 },
    Cylinder { radius: f64, phi0: f64, dphi: f64, z0: f64, height: f64 },
}

impl Chart {
    #[inline]
    pub fn map(&self, u: [f64; 2]) -> Point3 {
        match *self {
            Chart::Flat { origin, e1, e2 } => [
                origin[0] + u[0] * e1[0] + u[1] * e2[0],
                origin[1] + u[0] * e1[1] + u[1] * e2[1],
                origin[2] + u[0] * e1[2] + u[1] * e2[2],
            ],
            Chart::Bilinear { p00, p10, p01, p11 } => {
                let (s, t) = (u[0], u[1]);
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (1.0 - s) * (1.0 - t) * p00[i] + s * (1.0 - t) * p10[i] + (1.0 - s) * t * p01[i] + s * t * p11[i];
                }
                out
            }
            Chart::Cylinder { radius, phi0, dphi, z0, height } => {
                let phi = phi0 + dphi * u[0];
                [radius * phi.cos(), radius * phi.sin(), z0 + height * u[1]]
            }
        }
    }

    /// Columns of the Jacobian.
    pub fn jacobian(&self, u: [f64; 2]) -> (Point3, Point3) {
        match *self {
            Chart::Flat { e1, e2, .. } => (e1, e2),
            Chart::Bilinear { p00, p10, p01, p11 } => {
                let (s, t) = (u[0], u[1]);
                let mut du = [0.0; 3];
                let mut dv = [0.0; 3];
                for i in 0..3 {
                    du[i] = (1.0 - t) * (p10[i] - p00[i]) + t * (p11[i] - p01[i]);
                    dv[i] = (1.0 - s) * (p01[i] - p00[i]) + s * (p11[i] - p10[i]);
                }
                (du, dv)
            }
            Chart::Cylinder { radius, phi0, dphi, height, .. } => {
                let phi = phi0 + dphi * u[0];
                ([-radius * dphi * phi.sin(), radius * dphi * phi.cos(), 0.0], [0.0, 0.0, height])
            }
        }
    }

    /// Surface weight `sqrt(det(D^T D))`.
    #[inline]
    pub fn weight(&self, u: [f64; 2]) -> f64 {
        let (a, b) = self.jacobian(u);
        (dot(a, a) * dot(b, b) - dot(a, b) * dot(a, b)).sqrt()
    }

    /// Extreme singular values of the Jacobian.
    fn singular_values(&self, u: [f64; 2]) -> (f64, f64) {
        let (a, b) = self.jacobian(u);
        let (p, q, r) = (dot(a, a), dot(a, b), dot(b, b));
        let tr = 0.5 * (p + r);
        let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        ((tr - disc).max(0.0).sqrt(), (tr + disc).sqrt())
    }
}

/// Element of the symmetry group of the unit square: optional swap of the
/// coordinates followed by optional reflections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dihedral {
    pub swap: bool,
    pub flip_x: bool,
    pub flip_y: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { swap: false, flip_x: false, flip_y: false };

    pub fn all() -> impl Iterator<Item = Dihedral> {
        (0..8u8).map(|i| Dihedral { swap: i & 4 != 0, flip_x: i & 1 != 0, flip_y: i & 2 != 0 })
    }

    #[inline]
    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        let (a, b) = if self.swap { (u[1], u[0]) } else { (u[0], u[1]) };
        [if self.flip_x { 1.0 - a } else { a }, if self.flip_y { 1.0 - b } else { b }]
    }

    #[inline]
    pub fn invert(&self, w: [f64; 2]) -> [f64; 2] {
        let a = if self.flip_x { 1.0 - w[0] } else { w[0] };
        let b = if self.flip_y { 1.0 - w[1] } else { w[1] };
        if self.swap {
            [b, a]
        } else {
            [a, b]
        }
    }

    pub fn footprint(&self, f: &Footprint2D, shift: [f64; 2]) -> Footprint2D {
        let (a, b) = if self.swap { (f.y, f.x) } else { (f.x, f.y) };
        let m = |g: Footprint1D, flip: bool, s: f64| if flip { g.mapped(-1.0, 1.0 + s) } else { g.mapped(1.0, s) };
        Footprint2D { x: m(a, self.flip_x, shift[0]), y: m(b, self.flip_y, shift[1]) }
    }

    pub fn rect(&self, r: &Rect, shift: [f64; 2]) -> Rect {
        let p = self.apply([r.x0, r.y0]);
        let q = self.apply([r.x1, r.y1]);
        Rect::new(
            p[0].min(q[0]) + shift[0],
            p[0].max(q[0]) + shift[0],
            p[1].min(q[1]) + shift[1],
            p[1].max(q[1]) + shift[1],
        )
    }

    pub fn basis(&self, b: &TensorBasis, shift: [f64; 2]) -> TensorBasis {
        let funcs = b
            .funcs
            .iter()
            .map(|(p, q)| {
                let (a, c) = if self.swap { (q, p) } else { (p, q) };
                let a = if self.flip_x { crate::poly::reflect(a) } else { a.clone() };
                let c = if self.flip_y { crate::poly::reflect(c) } else { c.clone() };
                (a, c)
            })
            .collect();
        TensorBasis { rect: self.rect(&b.rect, shift), funcs }
    }
}

/// Placement of two patches in a common chart: patch `a` at `ta(u)`, patch
/// `b` at `tb(v) + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Glue {
    pub ta: Dihedral,
    pub tb: Dihedral,
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adjacency {
    Same,
    Edge(Glue),
    Vertex(Glue),
    Separated,
}

impl Adjacency {
    pub fn tag(&self) -> &'static str {
        match self {
            Adjacency::Same => "same",
            Adjacency::Edge(_) => "shared-edge",
            Adjacency::Vertex(_) => "shared-vertex",
            Adjacency::Separated => "separated",
        }
    }

    pub fn glue(&self) -> Option<Glue> {
        match self {
            Adjacency::Same => Some(Glue { ta: Dihedral::IDENTITY, tb: Dihedral::IDENTITY, shift: [0.0, 0.0] }),
            Adjacency::Edge(g) | Adjacency::Vertex(g) => Some(*g),
            Adjacency::Separated => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    UnitSquare,
    TwoPatchScreen,
    LCorner,
    CylinderPair,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::UnitSquare => "unit_square",
            Preset::TwoPatchScreen => "two_patch_screen",
            Preset::LCorner => "l_corner",
            Preset::CylinderPair => "cylinder_pair",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ManifoldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "unit_square" => Ok(Preset::UnitSquare),
            "two_patch_screen" => Ok(Preset::TwoPatchScreen),
            "l_corner" => Ok(Preset::LCorner),
            "cylinder_pair" => Ok(Preset::CylinderPair),
            other => Err(ManifoldError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatchGeometry {
    pub name: String,
    pub charts: Vec<Chart>,
    adjacency: Vec<Adjacency>,
    /// Per patch `(min, max)` of the surface weight on a sampling grid.
    pub weight_bounds: Vec<(f64, f64)>,
    /// Lipschitz bound of all charts and glued charts in both directions.
    pub lipschitz: f64,
    /// Minimal distance between non-adjacent patches (infinite if none).
    pub separation_floor: f64,
}

const SNAP: f64 = 1e-9;

fn corners() -> [[f64; 2]; 4] {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
}

fn close(a: Point3, b: Point3) -> bool {
    dist3(&a, &b) < SNAP
}

/// Edges of the unit square as (corner, corner) parameter pairs.
fn edge_of(c0: [f64; 2], c1: [f64; 2]) -> Option<u8> {
    // 0: u=0, 1: u=1, 2: v=0, 3: v=1
    if c0[0] == c1[0] {
        Some(if c0[0] == 0.0 { 0 } else { 1 })
    } else if c0[1] == c1[1] {
        Some(if c0[1] == 0.0 { 2 } else { 3 })
    } else {
        None
    }
}

impl PatchGeometry {
    pub fn from_charts(name: &str, charts: Vec<Chart>) -> Result<Self, ManifoldError> {
        if charts.is_empty() || charts.len() > u16::MAX as usize {
            return Err(ManifoldError::InvalidArgument("patch count out of range".into()));
        }
        let p = charts.len();
        let mut adjacency = vec![Adjacency::Separated; p * p];
        let mut floor = f64::INFINITY;
        for i in 0..p {
            adjacency[i * p + i] = Adjacency::Same;
            for j in (i + 1)..p {
                let adj = detect(&charts, i, j)?;
                if let Adjacency::Separated = adj {
                    floor = floor.min(sampled_min_distance(&charts[i], &charts[j], 33));
                }
                adjacency[i * p + j] = adj;
                adjacency[j * p + i] = invert_adjacency(&adj);
            }
        }
        let weight_bounds = charts
            .iter()
            .map(|c| {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for_grid(64, |u| {
                    let w = c.weight(u);
                    lo = lo.min(w);
                    hi = hi.max(w);
                });
                (lo, hi)
            })
            .collect::<Vec<_>>();
        if weight_bounds.iter().any(|&(lo, _)| !(lo > 0.0)) {
            return Err(ManifoldError::InvalidArgument("degenerate parametrization".into()));
        }
        let mut g = PatchGeometry {
            name: name.to_string(),
            charts,
            adjacency,
            weight_bounds,
            lipschitz: 1.0,
            separation_floor: floor,
        };
        g.lipschitz = g.estimate_lipschitz();
        Ok(g)
    }

    pub fn preset(p: Preset) -> Self {
        let flat = |ox: f64, oy: f64| Chart::Flat { origin: [ox, oy, 0.0], e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] };
        let charts = match p {
            Preset::UnitSquare => vec![flat(0.0, 0.0)],
            Preset::TwoPatchScreen => vec![flat(0.0, 0.0), flat(1.0, 0.0)],
            Preset::LCorner => vec![flat(0.0, 0.0), flat(1.0, 0.0), flat(0.0, 1.0)],
            Preset::CylinderPair => {
                let dphi = std::f64::consts::FRAC_PI_4;
                vec![
                    Chart::Cylinder { radius: 1.0, phi0: 0.0, dphi, z0: 0.0, height: 1.0 },
                    Chart::Cylinder { radius: 1.0, phi0: dphi, dphi, z0: 0.0, height: 1.0 },
                ]
            }
        };
        PatchGeometry::from_charts(p.name(), charts).expect("presets are admissible")
    }

    /// Two parallel unit screens at distance one; exercises the separated path.
    pub fn parallel_plates() -> Self {
        let charts = vec![
            Chart::Flat { origin: [0.0; 3], e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] },
            Chart::Flat { origin: [0.0, 0.0, 1.0], e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] },
        ];
        PatchGeometry::from_charts("parallel_plates", charts).expect("admissible")
    }

    pub fn patch_count(&self) -> usize {
        self.charts.len()
    }

    pub fn adjacency(&self, i: usize, j: usize) -> Adjacency {
        self.adjacency[i * self.charts.len() + j]
    }

    fn estimate_lipschitz(&self) -> f64 {
        let mut l = 1.0f64;
        for c in &self.charts {
            for_grid(64, |u| {
                let (smin, smax) = c.singular_values(u);
                l = l.max(smax).max(1.0 / smin);
            });
        }
        let p = self.charts.len();
        for i in 0..p {
            for j in i..p {
                let Some(glue) = self.adjacency(i, j).glue() else { continue };
                l = l.max(chord_ratio(&self.charts[i], &self.charts[j], &glue, i == j));
            }
        }
        l * 1.02
    }

    /// Both supports in the common chart of their patches.
    pub fn glued_coords(&self, a: &MultiIndex, b: &MultiIndex) -> Result<(Adjacency, Footprint2D, Footprint2D), ManifoldError> {
        let adj = self.adjacency(a.patch as usize, b.patch as usize);
        let glue = adj.glue().ok_or(ManifoldError::NoChart(a.patch as usize, b.patch as usize))?;
        Ok((adj, glue.ta.footprint(&a.footprint(), [0.0, 0.0]), glue.tb.footprint(&b.footprint(), glue.shift)))
    }

    pub fn surface_distances(&self, a: &MultiIndex, b: &MultiIndex) -> SurfaceDistances {
        match self.glued_coords(a, b) {
            Ok((_, fa, fb)) => {
                let g = PairGeometry::between(&fa, &fb);
                SurfaceDistances { delta: g.delta, dx: Some(g.dx), dy: Some(g.dy), sx: Some(g.sx), sy: Some(g.sy) }
            }
            Err(_) => SurfaceDistances {
                delta: self.separated_delta(a, b),
                dx: None,
                dy: None,
                sx: None,
                sy: None,
            },
        }
    }

    /// Lower bound of the 3D distance between the mapped supports of indices on
    /// separated patches.
    pub fn separated_delta(&self, a: &MultiIndex, b: &MultiIndex) -> f64 {
        let n = 9;
        let pa = support_samples(&self.charts[a.patch as usize], &a.footprint(), n);
        let pb = support_samples(&self.charts[b.patch as usize], &b.footprint(), n);
        let mut m = f64::INFINITY;
        for x in &pa.0 {
            for y in &pb.0 {
                m = m.min(dist3(x, y));
            }
        }
        let slack = self.lipschitz * (pa.1 + pb.1);
        (m - slack).max(self.separation_floor.min(m)).max(0.0)
    }

    fn pair_kernel(&self, k: Kernel, pa: usize, pb: usize) -> SurfaceKernel<'_> {
        let adj = self.adjacency(pa, pb);
        let (glue, separation) = match adj.glue() {
            Some(g) => (g, None),
            None => (
                Glue { ta: Dihedral::IDENTITY, tb: Dihedral::IDENTITY, shift: [0.0, 0.0] },
                Some(if matches!(k, Kernel::Constant) { f64::INFINITY } else { self.separation_floor }),
            ),
        };
        let separation = if matches!(k, Kernel::Constant) { Some(f64::INFINITY) } else { separation };
        SurfaceKernel {
            kernel: k,
            ca: &self.charts[pa],
            cb: &self.charts[pb],
            glue,
            separation,
            lipschitz: self.lipschitz,
        }
    }

    /// Pair kernel and chart-space bases for a pair of patch-native bases.
    pub fn pair_setup(
        &self,
        k: Kernel,
        pa: usize,
        pb: usize,
        a: &[TensorBasis],
        b: &[TensorBasis],
    ) -> (SurfaceKernel<'_>, Vec<TensorBasis>, Vec<TensorBasis>) {
        let kern = self.pair_kernel(k, pa, pb);
        let ga: Vec<TensorBasis> = a.iter().map(|t| kern.glue.ta.basis(t, [0.0, 0.0])).collect();
        let gb: Vec<TensorBasis> = b.iter().map(|t| kern.glue.tb.basis(t, kern.glue.shift)).collect();
        (kern, ga, gb)
    }

    pub fn surface_entry(
        &self,
        fam: &WaveletFamily,
        k: Kernel,
        a: &MultiIndex,
        b: &MultiIndex,
        q: f64,
        spec: &QuadratureSpec,
    ) -> Result<Entry, QuadError> {
        spec.validate(fam.order_d)?;
        if !k.integrable_on_touching() && self.surface_distances(a, b).delta == 0.0 {
            return Err(QuadError::NonIntegrable(k.id()));
        }
        let (kern, ga, gb) = self.pair_setup(k, a.patch as usize, b.patch as usize, &piece_bases(fam, a), &piece_bases(fam, b));
        Ok(entry_from_pieces(&kern, &ga, &gb, rescale(q, a, b), spec))
    }

    /// Brute-force counterpart of `surface_entry` in native patch coordinates.
    pub fn surface_entry_oracle(
        &self,
        fam: &WaveletFamily,
        k: Kernel,
        a: &MultiIndex,
        b: &MultiIndex,
        q: f64,
        n: usize,
    ) -> Result<f64, QuadError> {
        let kern = NativeKernel { kernel: k, ca: &self.charts[a.patch as usize], cb: &self.charts[b.patch as usize] };
        let v = oracle_integral(&kern, &pieces_1d(fam, &a.x), &pieces_1d(fam, &a.y), &pieces_1d(fam, &b.x), &pieces_1d(fam, &b.y), n)?;
        Ok(v * rescale(q, a, b))
    }

    pub fn keep_entry_surface(&self, a: &MultiIndex, b: &MultiIndex, p: &CompressionParams) -> KeepDecision {
        let adj = self.adjacency(a.patch as usize, b.patch as usize);
        match adj {
            Adjacency::Same => crate::compression::keep_entry(a, b, p),
            Adjacency::Edge(_) | Adjacency::Vertex(_) => {
                let (_, fa, fb) = self.glued_coords(a, b).expect("adjacent");
                let g = PairGeometry::between(&fa, &fb);
                let free = !singular_supports_touch(&fa, &fb);
                let rules = RuleSet { mixed: matches!(adj, Adjacency::Edge(_)), second_x: free, second_y: free };
                LevelCutoffs::new(fa.levels(), fb.levels(), p).decide(&g, rules).into()
            }
            Adjacency::Separated => {
                let delta = self.separated_delta(a, b);
                let g = PairGeometry { dx: 0.0, dy: 0.0, delta, sx: 0.0, sy: 0.0 };
                let st = LevelCutoffs::new(a.levels(), b.levels(), p).decide(&g, RuleSet::FIRST_ONLY);
                debug_assert!(matches!(st, Stage::Diagonal | Stage::First | Stage::Kept));
                st.into()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDistances {
    pub delta: f64,
    pub dx: Option<f64>,
    pub dy: Option<f64>,
    pub sx: Option<f64>,
    pub sy: Option<f64>,
}

/// Whether the breakpoint grids (including support boundaries) of two
/// footprints intersect.
pub fn singular_supports_touch(a: &Footprint2D, b: &Footprint2D) -> bool {
    let segs = |f: &Footprint2D| {
        let mut s = Vec::new();
        for &x in f.x.breakpoints() {
            s.push((x, x, f.y.lo, f.y.hi));
        }
        for &y in f.y.breakpoints() {
            s.push((f.x.lo, f.x.hi, y, y));
        }
        s
    };
    let sa = segs(a);
    let sb = segs(b);
    sa.iter().any(|p| {
        sb.iter().any(|q| {
            Rect::new(p.0, p.1, p.2, p.3).dist(&Rect::new(q.0, q.1, q.2, q.3)) == 0.0
        })
    })
}

fn for_grid(n: usize, mut f: impl FnMut([f64; 2])) {
    for i in 0..n {
        for j in 0..n {
            f([(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64]);
        }
    }
}

fn support_samples(c: &Chart, f: &Footprint2D, n: usize) -> (Vec<Point3>, f64) {
    let mut pts = Vec::with_capacity(n * n);
    let hx = (f.x.hi - f.x.lo) / (n - 1) as f64;
    let hy = (f.y.hi - f.y.lo) / (n - 1) as f64;
    for i in 0..n {
        for j in 0..n {
            pts.push(c.map([f.x.lo + i as f64 * hx, f.y.lo + j as f64 * hy]));
        }
    }
    (pts, 0.5 * (hx * hx + hy * hy).sqrt())
}

fn sampled_min_distance(a: &Chart, b: &Chart, n: usize) -> f64 {
    let grid = |c: &Chart| {
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(c.map([i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]));
            }
        }
        v
    };
    let ga = grid(a);
    let gb = grid(b);
    let mut m = f64::INFINITY;
    for x in &ga {
        for y in &gb {
            m = m.min(dist3(x, y));
        }
    }
    m
}

/// Maximal ratio between chart distance and 3D distance (either way) over
/// sampled point pairs of the common chart.
fn chord_ratio(ca: &Chart, cb: &Chart, glue: &Glue, same: bool) -> f64 {
    let n = 24;
    let mut pts: Vec<([f64; 2], Point3)> = Vec::new();
    for_grid(n, |u| pts.push((glue.ta.apply(u), ca.map(u))));
    if !same {
        for_grid(n, |v| {
            let w = glue.tb.apply(v);
            pts.push(([w[0] + glue.shift[0], w[1] + glue.shift[1]], cb.map(v)));
        });
    }
    let mut l = 1.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let dc = ((pts[i].0[0] - pts[j].0[0]).powi(2) + (pts[i].0[1] - pts[j].0[1]).powi(2)).sqrt();
            let d3 = dist3(&pts[i].1, &pts[j].1);
            if dc > 0.0 && d3 > 0.0 {
                l = l.max(dc / d3).max(d3 / dc);
            }
        }
    }
    l
}

fn invert_adjacency(a: &Adjacency) -> Adjacency {
    // Roles swapped, then a half turn of the whole chart brings the second
    // patch back to the unit square.
    let swap = |g: &Glue| Glue { ta: g.tb, tb: g.ta, shift: [-g.shift[0], -g.shift[1]] };
    match a {
        Adjacency::Edge(g) => Adjacency::Edge(normalize_edge(&swap(g))),
        Adjacency::Vertex(g) => Adjacency::Vertex(normalize_vertex(&swap(g))),
        other => *other,
    }
}

/// Re-express a glue whose first patch sits at `u <= 0` so that it sits in
/// `[0, 1]` with the shared edge at `u = 1` (rotation of the whole chart by
/// a half turn about the edge midpoint).
fn normalize_edge(g: &Glue) -> Glue {
    let rot = |d: Dihedral| Dihedral { swap: d.swap, flip_x: !d.flip_x, flip_y: !d.flip_y };
    Glue { ta: rot(g.ta), tb: rot(g.tb), shift: [1.0, 0.0] }
}

fn normalize_vertex(g: &Glue) -> Glue {
    let rot = |d: Dihedral| Dihedral { swap: d.swap, flip_x: !d.flip_x, flip_y: !d.flip_y };
    Glue { ta: rot(g.ta), tb: rot(g.tb), shift: [1.0, 1.0] }
}

fn detect(charts: &[Chart], i: usize, j: usize) -> Result<Adjacency, ManifoldError> {
    let (ca, cb) = (&charts[i], &charts[j]);
    let mut shared: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for pa in corners() {
        for pb in corners() {
            if close(ca.map(pa), cb.map(pb)) {
                shared.push((pa, pb));
            }
        }
    }
    match shared.len() {
        0 => {
            if sampled_min_distance(ca, cb, 33) < SNAP {
                return Err(ManifoldError::Inadmissible(i, j, "intersect away from corners".into()));
            }
            Ok(Adjacency::Separated)
        }
        1 => {
            let (pa, pb) = shared[0];
            let ta = Dihedral::all().find(|d| d.apply(pa) == [1.0, 1.0]).expect("corner");
            let tb = Dihedral::all().find(|d| d.apply(pb) == [0.0, 0.0]).expect("corner");
            Ok(Adjacency::Vertex(Glue { ta, tb, shift: [1.0, 1.0] }))
        }
        2 => {
            let (a0, b0) = shared[0];
            let (a1, b1) = shared[1];
            if edge_of(a0, a1).is_none() || edge_of(b0, b1).is_none() {
                return Err(ManifoldError::Inadmissible(i, j, "share a diagonal".into()));
            }
            let mid = |p: [f64; 2], q: [f64; 2]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if !close(ca.map(mid(a0, a1)), cb.map(mid(b0, b1))) {
                return Err(ManifoldError::Inadmissible(i, j, "edges differ between corners".into()));
            }
            for ta in Dihedral::all() {
                let (x0, x1) = (ta.apply(a0), ta.apply(a1));
                if x0[0] != 1.0 || x1[0] != 1.0 {
                    continue;
                }
                for tb in Dihedral::all() {
                    let (y0, y1) = (tb.apply(b0), tb.apply(b1));
                    if y0[0] == 0.0 && y1[0] == 0.0 && y0[1] == x0[1] && y1[1] == x1[1] {
                        return Ok(Adjacency::Edge(Glue { ta, tb, shift: [1.0, 0.0] }));
                    }
                }
            }
            Err(ManifoldError::Inadmissible(i, j, "no consistent edge orientation".into()))
        }
        _ => Err(ManifoldError::Inadmissible(i, j, "share more than an edge".into())),
    }
}

/// Kernel pulled back to a common chart (or to the native charts of separated patches).
#[derive(Debug, Clone, Copy)]
pub struct SurfaceKernel<'a> {
    pub kernel: Kernel,
    pub ca: &'a Chart,
    pub cb: &'a Chart,
    pub glue: Glue,
    pub separation: Option<f64>,
    pub lipschitz: f64,
}

impl PairKernel for SurfaceKernel<'_> {
    #[inline]
    fn eval(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let pa = self.glue.ta.invert(u);
        let pb = self.glue.tb.invert([v[0] - self.glue.shift[0], v[1] - self.glue.shift[1]]);
        let r = dist3(&self.ca.map(pa), &self.cb.map(pb));
        self.kernel.eval_dist(r) * self.ca.weight(pa) * self.cb.weight(pb)
    }

    fn separation(&self) -> Option<f64> {
        self.separation
    }

    fn length_scale(&self) -> f64 {
        self.lipschitz
    }
}

/// Kernel in native patch coordinates, for the brute-force oracle.
struct NativeKernel<'a> {
    kernel: Kernel,
    ca: &'a Chart,
    cb: &'a Chart,
}

impl PairKernel for NativeKernel<'_> {
    fn eval(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let r = dist3(&self.ca.map(u), &self.cb.map(v));
        self.kernel.eval_dist(r) * self.ca.weight(u) * self.cb.weight(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis1d::Member1D;

    fn idx(p: u16, jx: u32, kx: u32, jy: u32, ky: u32) -> MultiIndex {
        MultiIndex::new(p, Member1D::wavelet(jx, kx, 0), Member1D::wavelet(jy, ky, 0))
    }

    #[test]
    fn presets_have_expected_adjacency() {
        let g = PatchGeometry::preset(Preset::TwoPatchScreen);
        assert_eq!(g.adjacency(0, 1).tag(), "shared-edge");
        let g = PatchGeometry::preset(Preset::LCorner);
        assert_eq!(g.adjacency(0, 1).tag(), "shared-edge");
        assert_eq!(g.adjacency(0, 2).tag(), "shared-edge");
        assert_eq!(g.adjacency(1, 2).tag(), "shared-vertex");
        assert_eq!(g.adjacency(2, 1).tag(), "shared-vertex");
        let g = PatchGeometry::preset(Preset::CylinderPair);
        assert_eq!(g.adjacency(1, 0).tag(), "shared-edge");
        let g = PatchGeometry::parallel_plates();
        assert_eq!(g.adjacency(0, 1).tag(), "separated");
        assert!((g.separation_floor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glued_examples() {
        let g = PatchGeometry::preset(Preset::TwoPatchScreen);
        let a = idx(0, 0, 0, 0, 0);
        let b = idx(1, 2, 0, 1, 1);
        let (_, _, fb) = g.glued_coords(&a, &b).unwrap();
        assert_eq!((fb.x.lo, fb.x.hi, fb.y.lo, fb.y.hi), (1.0, 1.25, 0.5, 1.0));
        let g = PatchGeometry::preset(Preset::LCorner);
        let a = idx(1, 2, 0, 2, 0);
        let b = idx(2, 2, 0, 2, 0);
        let (adj, fa, fb) = g.glued_coords(&a, &b).unwrap();
        assert_eq!(adj.tag(), "shared-vertex");
        // Both supports touch the shared corner at (1, 1) of the chart.
        assert!(fa.x.hi == 1.0 || fa.y.hi == 1.0);
        let d = PairGeometry::between(&fa, &fb).delta;
        let d3 = {
            let pa = g.charts[1].map([0.0, 0.25]);
            let pb = g.charts[2].map([0.25, 0.0]);
            dist3(&pa, &pb)
        };
        assert!(d <= d3 + 1e-12);
        let plates = PatchGeometry::parallel_plates();
        assert!(plates.glued_coords(&idx(0, 0, 0, 0, 0), &idx(1, 0, 0, 0, 0)).is_err());
        assert!(plates.surface_distances(&idx(0, 0, 0, 0, 0), &idx(1, 0, 0, 0, 0)).delta >= 1.0);
    }

    #[test]
    fn edge_glue_places_shared_edge_in_the_middle() {
        for preset in [Preset::TwoPatchScreen, Preset::LCorner, Preset::CylinderPair] {
            let g = PatchGeometry::preset(preset);
            for i in 0..g.patch_count() {
                for j in 0..g.patch_count() {
                    if let Adjacency::Edge(gl) = g.adjacency(i, j) {
                        for t in [0.1, 0.5, 0.9] {
                            let pa = gl.ta.invert([1.0, t]);
                            let pb = gl.tb.invert([0.0, t]);
                            let (xa, xb) = (g.charts[i].map(pa), g.charts[j].map(pb));
                            assert!(dist3(&xa, &xb) < 1e-12, "{preset} {i} {j}");
                        }
                    }
                }
            }
        }
    }
}
