//! The monotone nonlinearity `a(x, y)` of the state equation and its first
//! two `y`-derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::scalar::Real;

/// Catalog of nonlinearities. All members are `C²` in `y`, nondecreasing in
/// `y` and independent of `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nonlinearity {
    /// `a ≡ 0` (linear state equation).
    Zero,
    /// `a = c·y` with `c ≥ 0`.
    Linear(f64),
    /// `a = arctan(y)`.
    Arctan,
    /// `a = 10 y³ − 2`.
    A1,
    /// `a = 10 arctan(80 y) − 5`.
    A2,
    /// `a = 10 sinh(3 y) − 2`.
    A3,
}

impl Nonlinearity {
    #[inline]
    pub fn value<T: Real>(&self, _x: &[T], y: T) -> T {
        let l = T::lit;
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Linear(c) => l(c) * y,
            Nonlinearity::Arctan => y.atan(),
            Nonlinearity::A1 => l(10.0) * y * y * y - l(2.0),
            Nonlinearity::A2 => l(10.0) * (l(80.0) * y).atan() - l(5.0),
            Nonlinearity::A3 => l(10.0) * (l(3.0) * y).sinh() - l(2.0),
        }
    }

    /// `∂a/∂y`.
    #[inline]
    pub fn dy<T: Real>(&self, _x: &[T], y: T) -> T {
        let l = T::lit;
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Linear(c) => l(c),
            Nonlinearity::Arctan => T::one() / (T::one() + y * y),
            Nonlinearity::A1 => l(30.0) * y * y,
            Nonlinearity::A2 => l(800.0) / (T::one() + l(6400.0) * y * y),
            Nonlinearity::A3 => l(30.0) * (l(3.0) * y).cosh(),
        }
    }

    /// `∂²a/∂y²`.
    #[inline]
    pub fn d2y<T: Real>(&self, _x: &[T], y: T) -> T {
        let l = T::lit;
        match *self {
            Nonlinearity::Zero | Nonlinearity::Linear(_) => T::zero(),
            Nonlinearity::Arctan => {
                let s = T::one() + y * y;
                -l(2.0) * y / (s * s)
            }
            Nonlinearity::A1 => l(60.0) * y,
            Nonlinearity::A2 => {
                let s = T::one() + l(6400.0) * y * y;
                -l(10_240_000.0) * y / (s * s)
            }
            Nonlinearity::A3 => l(90.0) * (l(3.0) * y).sinh(),
        }
    }

    /// Polynomial degree in `y`, `None` for transcendental members.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Nonlinearity::Zero => Some(0),
            Nonlinearity::Linear(_) => Some(1),
            Nonlinearity::A1 => Some(3),
            _ => None,
        }
    }

    /// True when `a` is affine in `y`, so Newton converges in one step.
    pub fn is_affine(&self) -> bool {
        matches!(self, Nonlinearity::Zero | Nonlinearity::Linear(_))
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => write!(f, "zero"),
            Nonlinearity::Linear(c) => write!(f, "linear:{c}"),
            Nonlinearity::Arctan => write!(f, "arctan"),
            Nonlinearity::A1 => write!(f, "a1"),
            Nonlinearity::A2 => write!(f, "a2"),
            Nonlinearity::A3 => write!(f, "a3"),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "zero" => Nonlinearity::Zero,
            "arctan" => Nonlinearity::Arctan,
            "a1" => Nonlinearity::A1,
            "a2" => Nonlinearity::A2,
            "a3" => Nonlinearity::A3,
            other => match other.strip_prefix("linear:") {
                Some(c) => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad coefficient in `{other}`")))?;
                    if !(c >= 0.0) {
                        return Err(Error::InvalidArgument("linear coefficient must be nonnegative".into()));
                    }
                    Nonlinearity::Linear(c)
                }
                None => return Err(Error::Parse(format!("unknown nonlinearity `{other}`"))),
            },
        })
    }
}
