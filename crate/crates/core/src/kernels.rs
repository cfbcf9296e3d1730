//! Asymptotically smooth kernels and their derivative decay bounds.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("singular evaluation: coincident points")]
    Singular,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown kernel id {0:?}")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `1 / (4 pi r)`, order `2q = -1`.
    SingleLayer,
    /// `r^-(2 + 2q)` with `2q` in `[-1, 1]`.
    PowerLaw { order_2q: f64 },
    /// `-ln r`, the order-0 model.
    Log,
    /// `1`; a test kernel with no singularity.
    Constant,
}

#[inline]
pub fn dist3(x: &Point3, y: &Point3) -> f64 {
    let a = x[0] - y[0];
    let b = x[1] - y[1];
    let c = x[2] - y[2];
    (a * a + b * b + c * c).sqrt()
}

/// Embed a parameter-plane point into R^3.
#[inline]
pub fn lift(p: [f64; 2]) -> Point3 {
    [p[0], p[1], 0.0]
}

impl Kernel {
    pub fn order_2q(&self) -> f64 {
        match self {
            Kernel::SingleLayer => -1.0,
            Kernel::PowerLaw { order_2q } => *order_2q,
            Kernel::Log => 0.0,
            Kernel::Constant => -2.0,
        }
    }

    pub fn q(&self) -> f64 {
        0.5 * self.order_2q()
    }

    /// Exponent `2 + 2q` of the singularity.
    pub fn singular_strength(&self) -> f64 {
        2.0 + self.order_2q()
    }

    /// Whether the Galerkin integral over touching or overlapping surface
    /// supports exists as a Lebesgue integral.
    pub fn integrable_on_touching(&self) -> bool {
        match self {
            Kernel::PowerLaw { order_2q } => *order_2q < 0.0,
            _ => true,
        }
    }

    /// Kernel as a function of the distance; no check for `r = 0`.
    #[inline(always)]
    pub fn eval_dist(&self, r: f64) -> f64 {
        match self {
            Kernel::SingleLayer => 1.0 / (4.0 * PI * r),
            Kernel::PowerLaw { order_2q } => {
                if *order_2q == -1.0 {
                    1.0 / r
                } else {
                    r.powf(-(2.0 + order_2q))
                }
            }
            Kernel::Log => -r.ln(),
            Kernel::Constant => 1.0,
        }
    }

    pub fn eval(&self, x: &Point3, y: &Point3) -> Result<f64, KernelError> {
        let r = dist3(x, y);
        if r == 0.0 && !matches!(self, Kernel::Constant) {
            return Err(KernelError::Singular);
        }
        Ok(self.eval_dist(r))
    }

    /// Recorded `C_kappa` bounding all partial derivatives of total order `<= 3`
    /// (checked against finite-difference sampling in the test suite).
    pub fn bound_constant(&self) -> f64 {
        let power = |p: f64| (p * (p + 1.0) * (p + 2.0)).max(1.0);
        match self {
            Kernel::SingleLayer => power(1.0) / (4.0 * PI),
            Kernel::PowerLaw { order_2q } => power(2.0 + order_2q),
            Kernel::Log => 2.0,
            Kernel::Constant => 1.0,
        }
    }

    /// `C_kappa * dist^-(2 + 2q + |alpha| + |alpha2|)`; for the log kernel with
    /// `|alpha| = |alpha2| = 0` the bound is `C_kappa |ln dist|`.
    pub fn decay_bound(&self, alpha: [u32; 2], alpha2: [u32; 2], dist: f64) -> Result<f64, KernelError> {
        if !(dist > 0.0) {
            return Err(KernelError::InvalidArgument(format!("dist = {dist} must be positive")));
        }
        let n = (alpha[0] + alpha[1] + alpha2[0] + alpha2[1]) as f64;
        let expo = self.singular_strength() + n;
        if expo <= 0.0 {
            return Err(KernelError::InvalidArgument(format!(
                "decay exponent {expo} is not positive"
            )));
        }
        if matches!(self, Kernel::Log) && n == 0.0 {
            return Ok(self.bound_constant() * dist.ln().abs());
        }
        Ok(self.bound_constant() * dist.powf(-expo))
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::SingleLayer => write!(f, "single_layer"),
            Kernel::PowerLaw { order_2q } => write!(f, "power_law:{order_2q}"),
            Kernel::Log => write!(f, "log"),
            Kernel::Constant => write!(f, "constant"),
        }
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "single_layer" => return Ok(Kernel::SingleLayer),
            "log" => return Ok(Kernel::Log),
            "constant" => return Ok(Kernel::Constant),
            _ => {}
        }
        let Some(rest) = s.strip_prefix("power_law:") else {
            return Err(KernelError::UnknownId(s.to_string()));
        };
        let v: f64 = rest
            .trim()
            .parse()
            .map_err(|_| KernelError::InvalidArgument(format!("power_law order {rest:?} is not a number")))?;
        if !(-1.0..=1.0).contains(&v) {
            return Err(KernelError::InvalidArgument(format!(
                "power_law order 2q = {v} outside [-1, 1]"
            )));
        }
        Ok(Kernel::PowerLaw { order_2q: v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let k = Kernel::SingleLayer;
        let v = k.eval(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.0795775).abs() < 1e-7);
        let k = Kernel::PowerLaw { order_2q: 1.0 };
        assert!((k.eval(&[0.0; 3], &[0.5, 0.0, 0.0]).unwrap() - 8.0).abs() < 1e-12);
        let k = Kernel::PowerLaw { order_2q: -1.0 };
        assert!((k.eval(&[0.0; 3], &[3.0, 4.0, 0.0]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(k.eval(&[1.0; 3], &[1.0; 3]), Err(KernelError::Singular));
    }

    #[test]
    fn bound_examples() {
        let k = Kernel::SingleLayer;
        let c = k.bound_constant();
        assert!((k.decay_bound([0, 0], [0, 0], 2.0).unwrap() - c / 2.0).abs() < 1e-15);
        assert!((k.decay_bound([2, 0], [1, 0], 1.0).unwrap() - c).abs() < 1e-15);
        assert!(Kernel::Constant.decay_bound([0, 0], [0, 0], 1.0).is_err());
        assert!(k.decay_bound([0, 0], [0, 0], 0.0).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for id in ["single_layer", "log", "constant", "power_law:1", "power_law:-0.5"] {
            let k: Kernel = id.parse().unwrap();
            assert_eq!(k.id().parse::<Kernel>().unwrap(), k);
        }
        assert!("power_law:2".parse::<Kernel>().is_err());
        assert!("helmholtz".parse::<Kernel>().is_err());
        assert!("power_law:x".parse::<Kernel>().is_err());
    }
}
