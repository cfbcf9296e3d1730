//! Multi-stage keep/drop cascade and the compressibility rate calculator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index_geometry::{level_stats, LevelStats, MultiIndex, PairGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionParams {
    pub q: f64,
    pub d: u32,
    pub d_tilde: u32,
    pub gamma: f64,
    pub sigma_shift: f64,
    pub alpha: f64,
    pub xi: f64,
    pub theta: f64,
    pub r: u32,
}

pub const DEFAULT_ALPHA: f64 = 1.2;
pub const DEFAULT_XI: f64 = 0.75;
pub const DEFAULT_THETA: f64 = 0.75;
pub const DEFAULT_SIGMA_SHIFT: f64 = 10.0;

impl CompressionParams {
    /// Defaults for an orthonormal family with `d = d_tilde` and `gamma = 1/2`.
    pub fn new(d: u32, q: f64, r: u32) -> Self {
        CompressionParams {
            q,
            d,
            d_tilde: d,
            gamma: 0.5,
            sigma_shift: DEFAULT_SIGMA_SHIFT,
            alpha: DEFAULT_ALPHA,
            xi: DEFAULT_XI,
            theta: DEFAULT_THETA,
            r,
        }
    }

    pub fn with_r(self, r: u32) -> Self {
        CompressionParams { r, ..self }
    }

    pub fn validate(&self) -> Result<(), CompressionError> {
        let bad = |m: String| Err(CompressionError::InvalidArgument(m));
        if !(self.alpha > 1.0) {
            return bad(format!("alpha = {} must exceed 1", self.alpha));
        }
        if !(self.xi > 0.5 && self.xi < 1.0) {
            return bad(format!("xi = {} outside (1/2, 1)", self.xi));
        }
        if !(self.theta > 0.5 && self.theta < 1.0) {
            return bad(format!("theta = {} outside (1/2, 1)", self.theta));
        }
        if self.d_tilde as f64 + self.q < 0.0 {
            return bad(format!("d_tilde + q = {} is negative", self.d_tilde as f64 + self.q));
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive".into());
        }
        Ok(())
    }

    /// `(s_bar, nu)`.
    pub fn rate_params(&self) -> (f64, f64) {
        let d = self.d as f64;
        if self.q >= 0.0 {
            (d - self.q, self.gamma - self.q)
        } else {
            (d - 0.5 * self.q, self.gamma)
        }
    }

    pub fn s_star(&self) -> f64 {
        let (s_bar, nu) = self.rate_params();
        let third = self.d_tilde as f64 / 2.0 + self.q - (0.0f64).max(self.q * self.alpha * s_bar / nu);
        self.sigma_shift.min(self.alpha * s_bar).min(third)
    }

    /// Largest admissible level difference; infinite when `nu <= 0`.
    pub fn diagonal_threshold(&self) -> f64 {
        let (s_bar, nu) = self.rate_params();
        if nu <= 0.0 {
            f64::INFINITY
        } else {
            self.alpha * self.r as f64 * s_bar / nu
        }
    }
}

#[inline]
fn p2(x: f64) -> f64 {
    x.exp2()
}

fn linf_diff(j: (u32, u32), j2: (u32, u32)) -> f64 {
    (j.0 as i64 - j2.0 as i64).abs().max((j.1 as i64 - j2.1 as i64).abs()) as f64
}

fn dir_parts(j: (u32, u32), j2: (u32, u32), s: &LevelStats, dir: Dir) -> (f64, f64) {
    match dir {
        Dir::X => (s.m_x as f64, (j.0 as i64 - j2.0 as i64).abs() as f64),
        Dir::Y => (s.m_y as f64, (j.1 as i64 - j2.1 as i64).abs() as f64),
    }
}

pub fn cutoff_b(j: (u32, u32), j2: (u32, u32), p: &CompressionParams) -> f64 {
    let s = level_stats(j, j2);
    let r = p.r as f64;
    let a = p2(-(s.m as f64));
    let b = p2(-0.5 * (s.m_x + s.m_y) as f64) * p2(p.xi * (0.5 * r - linf_diff(j, j2)));
    a.max(b)
}

pub fn cutoff_d(j: (u32, u32), j2: (u32, u32), p: &CompressionParams, dir: Dir) -> f64 {
    let s = level_stats(j, j2);
    let (m, dj) = dir_parts(j, j2, &s, dir);
    p2(-m) * p2(p.theta * (0.5 * p.r as f64 - dj)).max(1.0)
}

pub fn cutoff_e(j: (u32, u32), j2: (u32, u32), p: &CompressionParams, dir: Dir) -> Result<f64, CompressionError> {
    let s = level_stats(j, j2);
    let (m, dj) = dir_parts(j, j2, &s, dir);
    if dj < 0.5 * p.r as f64 {
        return Err(CompressionError::InvalidArgument(format!(
            "level difference {dj} below r/2 = {}",
            0.5 * p.r as f64
        )));
    }
    Ok(p2(-m) * p2(0.5 * p.r as f64 - dj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FCase {
    AlignedX,
    AlignedY,
    Mixed,
}

pub fn f_case(j: (u32, u32), j2: (u32, u32)) -> FCase {
    let ax = j.0 >= j.1 && j2.0 >= j2.1;
    let ay = j.1 >= j.0 && j2.1 >= j2.0;
    if ax {
        FCase::AlignedX
    } else if ay {
        FCase::AlignedY
    } else {
        FCase::Mixed
    }
}

pub fn cutoff_f(j: (u32, u32), j2: (u32, u32), p: &CompressionParams, dir: Dir) -> f64 {
    let s = level_stats(j, j2);
    let r = p.r as f64;
    match f_case(j, j2) {
        FCase::AlignedX | FCase::AlignedY => {
            let (m, dj) = dir_parts(j, j2, &s, dir);
            p2(-m) * p2(0.5 * r - dj)
        }
        FCase::Mixed => {
            let l1 = (j.0 as i64 - j2.0 as i64).abs() + (j.1 as i64 - j2.1 as i64).abs();
            p2(-0.5 * (s.m_x + s.m_y) as f64) * p2(0.5 * (r - l1 as f64))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Diagonal,
    First,
    #[serde(rename = "mixed_43_x")]
    Mixed43X,
    #[serde(rename = "mixed_43_y")]
    Mixed43Y,
    #[serde(rename = "mixed_53_x")]
    Mixed53X,
    #[serde(rename = "mixed_53_y")]
    Mixed53Y,
    SecondX,
    SecondY,
    Kept,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Diagonal,
        Stage::First,
        Stage::Mixed43X,
        Stage::Mixed43Y,
        Stage::Mixed53X,
        Stage::Mixed53Y,
        Stage::SecondX,
        Stage::SecondY,
        Stage::Kept,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Diagonal => "diagonal",
            Stage::First => "first",
            Stage::Mixed43X => "mixed_43_x",
            Stage::Mixed43Y => "mixed_43_y",
            Stage::Mixed53X => "mixed_53_x",
            Stage::Mixed53Y => "mixed_53_y",
            Stage::SecondX => "second_x",
            Stage::SecondY => "second_y",
            Stage::Kept => "kept",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn is_kept(&self) -> bool {
        *self == Stage::Kept
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = CompressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .iter()
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| CompressionError::InvalidArgument(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeepDecision {
    pub kept: bool,
    pub stage: Stage,
}

impl From<Stage> for KeepDecision {
    fn from(stage: Stage) -> Self {
        KeepDecision { kept: stage.is_kept(), stage }
    }
}

/// Which rules may fire beyond stages 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSet {
    pub mixed: bool,
    pub second_x: bool,
    pub second_y: bool,
}

impl RuleSet {
    pub const ALL: RuleSet = RuleSet { mixed: true, second_x: true, second_y: true };
    pub const FIRST_ONLY: RuleSet = RuleSet { mixed: false, second_x: false, second_y: false };
}

/// All cutoffs of one level pair, precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCutoffs {
    pub diagonal_drop: bool,
    pub b: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub e_x: Option<f64>,
    pub e_y: Option<f64>,
    pub f_x: f64,
    pub f_y: f64,
    pub pm_x: f64,
    pub pm_y: f64,
}

impl LevelCutoffs {
    pub fn new(j: (u32, u32), j2: (u32, u32), p: &CompressionParams) -> Self {
        let s = level_stats(j, j2);
        LevelCutoffs {
            diagonal_drop: linf_diff(j, j2) > p.diagonal_threshold(),
            b: cutoff_b(j, j2, p),
            d_x: cutoff_d(j, j2, p, Dir::X),
            d_y: cutoff_d(j, j2, p, Dir::Y),
            e_x: cutoff_e(j, j2, p, Dir::X).ok(),
            e_y: cutoff_e(j, j2, p, Dir::Y).ok(),
            f_x: cutoff_f(j, j2, p, Dir::X),
            f_y: cutoff_f(j, j2, p, Dir::Y),
            pm_x: p2(-(s.m_x as f64)),
            pm_y: p2(-(s.m_y as f64)),
        }
    }

    /// The cascade; the first rule that fires names the stage.
    #[inline]
    pub fn decide(&self, g: &PairGeometry, rules: RuleSet) -> Stage {
        if self.diagonal_drop {
            return Stage::Diagonal;
        }
        if g.delta >= self.b {
            return Stage::First;
        }
        if rules.mixed {
            if g.dx >= self.d_x && g.dy <= self.pm_y {
                return Stage::Mixed43X;
            }
            if g.dy >= self.d_y && g.dx <= self.pm_x {
                return Stage::Mixed43Y;
            }
            if let Some(e) = self.e_x {
                if g.sx <= self.pm_x && g.sx >= e && g.dy >= self.pm_y {
                    return Stage::Mixed53X;
                }
            }
            if let Some(e) = self.e_y {
                if g.sy <= self.pm_y && g.sy >= e && g.dx >= self.pm_x {
                    return Stage::Mixed53Y;
                }
            }
        }
        if rules.second_x && g.sx <= self.pm_x && g.sx >= self.f_x && g.dy <= self.pm_y {
            return Stage::SecondX;
        }
        if rules.second_y && g.sy <= self.pm_y && g.sy >= self.f_y && g.dx <= self.pm_x {
            return Stage::SecondY;
        }
        Stage::Kept
    }
}

/// Keep/drop decision for two indices on the same chart.
pub fn keep_entry(a: &MultiIndex, b: &MultiIndex, p: &CompressionParams) -> KeepDecision {
    debug_assert_eq!(a.patch, b.patch);
    let g = PairGeometry::between(&a.footprint(), &b.footprint());
    LevelCutoffs::new(a.levels(), b.levels(), p).decide(&g, RuleSet::ALL).into()
}

/// Minimal integer `d_tilde` with `s_star > s_bar`, or `None` if no finite
/// value exists (`nu <= 0` with `q > 0`).
pub fn minimal_vanishing_moments(d: u32, q2: f64, alpha: f64, sigma: f64) -> Option<u32> {
    let gamma = d as f64 - 0.5;
    let q = 0.5 * q2;
    let base = CompressionParams {
        q,
        d,
        d_tilde: d,
        gamma,
        sigma_shift: sigma,
        alpha,
        xi: DEFAULT_XI,
        theta: DEFAULT_THETA,
        r: 0,
    };
    let (s_bar, nu) = base.rate_params();
    if nu <= 0.0 {
        return None;
    }
    (d..=64).find(|&dt| CompressionParams { d_tilde: dt, ..base }.s_star() > s_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: u32, q: f64, gamma: f64, dt: u32, alpha: f64) -> CompressionParams {
        CompressionParams { q, d, d_tilde: dt, gamma, alpha, ..CompressionParams::new(d, q, 0) }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(params(1, 0.0, 0.5, 1, 1.2).rate_params(), (1.0, 0.5));
        assert_eq!(params(1, -0.5, 0.5, 1, 1.2).rate_params(), (1.25, 0.5));
        assert_eq!(params(2, 0.5, 1.5, 2, 1.2).rate_params(), (1.5, 1.0));
    }

    #[test]
    fn s_star_examples() {
        assert!((params(1, 0.0, 0.5, 3, 1.2).s_star() - 1.2).abs() < 1e-15);
        let p = params(1, -0.5, 0.5, 4, 1.2);
        assert!((p.s_star() - 1.5).abs() < 1e-15);
        assert!((params(1, -0.5, 0.5, 3, 1.2).s_star() - 1.0).abs() < 1e-15);
        let p = params(2, 0.5, 1.5, 4, 1.1);
        assert!((p.s_star() - 1.65).abs() < 1e-12);
        let (s_bar, nu) = p.rate_params();
        let third = p.d_tilde as f64 / 2.0 + p.q - p.q * p.alpha * s_bar / nu;
        assert!((third - 1.675).abs() < 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        let p = CompressionParams::new(1, 0.0, 4);
        assert!((cutoff_b((3, 3), (3, 3), &p) - 0.35355339).abs() < 1e-8);
        assert_eq!(cutoff_b((3, 3), (7, 3), &p), 0.125);
        assert_eq!(cutoff_b((0, 0), (0, 0), &p.with_r(0)), 1.0);
        assert!((cutoff_d((0, 3), (0, 3), &p, Dir::Y) - 0.35355339).abs() < 1e-8);
        assert_eq!(cutoff_d((0, 1), (0, 5), &p, Dir::Y), 0.5);
        let p6 = CompressionParams { theta: 0.6, ..CompressionParams::new(1, 0.0, 6) };
        assert!((cutoff_d((0, 2), (0, 3), &p6, Dir::Y) - 0.574349).abs() < 1e-6);
        assert_eq!(cutoff_e((1, 0), (5, 0), &p, Dir::X).unwrap(), 0.125);
        assert_eq!(cutoff_e((0, 0), (2, 0), &p, Dir::X).unwrap(), 1.0);
        assert_eq!(cutoff_e((2, 0), (8, 0), &p.with_r(6), Dir::X).unwrap(), 0.03125);
        assert!(cutoff_e((2, 0), (3, 0), &p, Dir::X).is_err());
        assert_eq!(cutoff_f((5, 2), (3, 1), &p, Dir::X), 0.125);
        assert!((cutoff_f((5, 2), (1, 3), &p, Dir::X) - 0.25).abs() < 1e-15);
        assert_eq!(cutoff_f((2, 5), (1, 3), &p, Dir::Y), 0.125);
    }

    #[test]
    fn stage_strings_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
    }
}
