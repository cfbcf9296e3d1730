//! Anisotropic multi-indices, level statistics and support distances.

use thiserror::Error;

use crate::basis1d::{Kind, Member1D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Tensor-product basis function `psi_x (x) psi_y` on one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub patch: u16,
    pub x: Member1D,
    pub y: Member1D,
}

impl MultiIndex {
    pub fn new(patch: u16, x: Member1D, y: Member1D) -> Self {
        MultiIndex { patch, x, y }
    }

    pub fn jx(&self) -> u32 {
        self.x.level
    }

    pub fn jy(&self) -> u32 {
        self.y.level
    }

    pub fn levels(&self) -> (u32, u32) {
        (self.x.level, self.y.level)
    }

    /// `|lambda|_inf`
    pub fn linf(&self) -> u32 {
        self.x.level.max(self.y.level)
    }

    /// `|lambda|_1`
    pub fn l1(&self) -> u32 {
        self.x.level + self.y.level
    }

    pub fn is_valid(&self) -> bool {
        let ok = |m: &Member1D| {
            m.k < (1u32 << m.level) && (m.kind == Kind::Wavelet || m.level == 0)
        };
        ok(&self.x) && ok(&self.y)
    }

    pub fn footprint(&self) -> Footprint2D {
        Footprint2D {
            x: Footprint1D::of(&self.x),
            y: Footprint1D::of(&self.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    pub m_x: u32,
    pub m_y: u32,
    pub m: u32,
    pub big_m_x: u32,
    pub big_m_y: u32,
    pub big_m: u32,
}

pub fn level_stats(j: (u32, u32), j2: (u32, u32)) -> LevelStats {
    let m_x = j.0.min(j2.0);
    let m_y = j.1.min(j2.1);
    let big_m_x = j.0.max(j2.0);
    let big_m_y = j.1.max(j2.1);
    LevelStats {
        m_x,
        m_y,
        m: m_x.min(m_y),
        big_m_x,
        big_m_y,
        big_m: big_m_x.max(big_m_y),
    }
}

/// Directional support interval with its breakpoints, in some chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint1D {
    pub lo: f64,
    pub hi: f64,
    pub level: u32,
    breaks: [f64; 3],
    n_breaks: u8,
}

impl Footprint1D {
    pub fn of(m: &Member1D) -> Self {
        let (lo, hi) = m.support();
        match m.kind {
            Kind::Scaling => Footprint1D { lo, hi, level: m.level, breaks: [lo, hi, hi], n_breaks: 2 },
            Kind::Wavelet => Footprint1D {
                lo,
                hi,
                level: m.level,
                breaks: [lo, 0.5 * (lo + hi), hi],
                n_breaks: 3,
            },
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks[..self.n_breaks as usize]
    }

    /// Image under `x -> shift + sign * x`; breakpoints stay ascending.
    pub fn mapped(&self, sign: f64, shift: f64) -> Self {
        let f = |x: f64| shift + sign * x;
        let (lo, hi) = if sign > 0.0 { (f(self.lo), f(self.hi)) } else { (f(self.hi), f(self.lo)) };
        let mut breaks = self.breaks;
        for b in breaks.iter_mut().take(self.n_breaks as usize) {
            *b = f(*b);
        }
        breaks[..self.n_breaks as usize].sort_by(|a, b| a.total_cmp(b));
        Footprint1D { lo, hi, level: self.level, breaks, n_breaks: self.n_breaks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint2D {
    pub x: Footprint1D,
    pub y: Footprint1D,
}

impl Footprint2D {
    pub fn levels(&self) -> (u32, u32) {
        (self.x.level, self.y.level)
    }
}

/// Distance between closed intervals.
#[inline]
pub fn interval_dist(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (a_lo - b_hi).max(b_lo - a_hi).max(0.0)
}

#[inline]
fn dist_to_points(lo: f64, hi: f64, pts: &[f64]) -> f64 {
    pts.iter()
        .map(|&p| interval_dist(lo, hi, p, p))
        .fold(f64::INFINITY, f64::min)
}

/// Directional sigma: distance from the finer member's support to the coarser
/// member's breakpoints; equal levels take the minimum of both branches.
pub fn sigma_1d(a: &Footprint1D, b: &Footprint1D) -> f64 {
    let ab = || dist_to_points(a.lo, a.hi, b.breakpoints());
    let ba = || dist_to_points(b.lo, b.hi, a.breakpoints());
    match a.level.cmp(&b.level) {
        std::cmp::Ordering::Greater => ab(),
        std::cmp::Ordering::Less => ba(),
        std::cmp::Ordering::Equal => ab().min(ba()),
    }
}

#[inline]
pub fn delta_1d(a: &Footprint1D, b: &Footprint1D) -> f64 {
    interval_dist(a.lo, a.hi, b.lo, b.hi)
}

/// All distance functionals of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub dx: f64,
    pub dy: f64,
    pub delta: f64,
    pub sx: f64,
    pub sy: f64,
}

impl PairGeometry {
    pub fn between(a: &Footprint2D, b: &Footprint2D) -> Self {
        let dx = delta_1d(&a.x, &b.x);
        let dy = delta_1d(&a.y, &b.y);
        PairGeometry::from_parts(dx, dy, sigma_1d(&a.x, &b.x), sigma_1d(&a.y, &b.y))
    }

    #[inline]
    pub fn from_parts(dx: f64, dy: f64, sx: f64, sy: f64) -> Self {
        PairGeometry { dx, dy, delta: (dx * dx + dy * dy).sqrt(), sx, sy }
    }
}

fn same_patch(a: &MultiIndex, b: &MultiIndex) -> Result<(), GeometryError> {
    if a.patch != b.patch {
        return Err(GeometryError::InvalidArgument(format!(
            "indices on patches {} and {}; use the manifold distance functions",
            a.patch, b.patch
        )));
    }
    Ok(())
}

pub fn delta(a: &MultiIndex, b: &MultiIndex) -> Result<f64, GeometryError> {
    same_patch(a, b)?;
    Ok(PairGeometry::between(&a.footprint(), &b.footprint()).delta)
}

pub fn delta_x(a: &MultiIndex, b: &MultiIndex) -> Result<f64, GeometryError> {
    same_patch(a, b)?;
    Ok(delta_1d(&Footprint1D::of(&a.x), &Footprint1D::of(&b.x)))
}

pub fn delta_y(a: &MultiIndex, b: &MultiIndex) -> Result<f64, GeometryError> {
    same_patch(a, b)?;
    Ok(delta_1d(&Footprint1D::of(&a.y), &Footprint1D::of(&b.y)))
}

pub fn sigma_x(a: &MultiIndex, b: &MultiIndex) -> Result<f64, GeometryError> {
    same_patch(a, b)?;
    Ok(sigma_1d(&Footprint1D::of(&a.x), &Footprint1D::of(&b.x)))
}

pub fn sigma_y(a: &MultiIndex, b: &MultiIndex) -> Result<f64, GeometryError> {
    same_patch(a, b)?;
    Ok(sigma_1d(&Footprint1D::of(&a.y), &Footprint1D::of(&b.y)))
}

pub fn pair_geometry(a: &MultiIndex, b: &MultiIndex) -> Result<PairGeometry, GeometryError> {
    same_patch(a, b)?;
    Ok(PairGeometry::between(&a.footprint(), &b.footprint()))
}
