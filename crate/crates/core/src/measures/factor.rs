//! One-dimensional centred log-concave factors of product models.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A centred one-dimensional log-concave law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    /// N(0, scale²).
    Gaussian { scale: f64 },
    /// Uniform on [-side/2, side/2].
    Uniform { side: f64 },
    /// Exp(rate) shifted by its mean.
    Exponential { rate: f64 },
    /// Laplace with density e^{-|x|/scale} / (2 scale).
    Laplace { scale: f64 },
}

/// Value, first and second derivative of a log-Laplace transform.
pub type Jet = (f64, f64, f64);

/// `ln(sinh y / y)` with its first two derivatives.
pub fn ln_sinhc(y: f64) -> Jet {
    let a = y.abs();
    if a < 0.1 {
        let y2 = y * y;
        let v = y2 * (1.0 / 6.0 - y2 * (1.0 / 180.0 - y2 * (1.0 / 2835.0 - y2 * (1.0 / 37800.0 - y2 / 467_775.0))));
        let d1 = y * (1.0 / 3.0 - y2 * (1.0 / 45.0 - y2 * (2.0 / 945.0 - y2 * (1.0 / 4725.0 - 2.0 * y2 / 93555.0))));
        let d2 = 1.0 / 3.0 - y2 * (1.0 / 15.0 - y2 * (2.0 / 189.0 - y2 * (1.0 / 675.0 - 2.0 * y2 / 10395.0)));
        return (v, d1, d2);
    }
    let e = (-2.0 * a).exp();
    let v = if a < 20.0 { (a.sinh() / a).ln() } else { a + (-e).ln_1p() - std::f64::consts::LN_2 - a.ln() };
    // coth a - 1/a, and 1/a² - 1/sinh² a
    let coth = (1.0 + e) / (1.0 - e);
    let d1 = (coth - 1.0 / a).copysign(y);
    let csch2 = 4.0 * e / ((1.0 - e) * (1.0 - e));
    let d2 = 1.0 / (a * a) - csch2;
    (v, d1, d2)
}

impl Factor {
    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            Factor::Gaussian { scale } | Factor::Laplace { scale } => scale,
            Factor::Uniform { side } => side,
            Factor::Exponential { rate } => rate,
        };
        if p.is_finite() && p > 0.0 {
            Ok(())
        } else {
            Err(Error::input(format!("factor parameter must be positive and finite: {self:?}")))
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Factor::Gaussian { scale } => {
                let z = x / scale;
                -0.5 * z * z - scale.ln() - LN_SQRT_2PI
            }
            Factor::Uniform { side } => {
                if x.abs() <= 0.5 * side {
                    -side.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Factor::Exponential { rate } => {
                if rate * x >= -1.0 {
                    rate.ln() - rate * x - 1.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Factor::Laplace { scale } => -x.abs() / scale - (2.0 * scale).ln(),
        }
    }

    pub fn log_sup_density(&self) -> f64 {
        match *self {
            Factor::Exponential { rate } => rate.ln(),
            _ => self.log_density(0.0),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Factor::Gaussian { scale } => scale * scale,
            Factor::Uniform { side } => side * side / 12.0,
            Factor::Exponential { rate } => 1.0 / (rate * rate),
            Factor::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    /// `(ln A, B)` with `f(x) <= A e^{-B|x|}`.
    pub fn envelope(&self) -> (f64, f64) {
        match *self {
            Factor::Gaussian { scale } => (0.5 - scale.ln() - LN_SQRT_2PI, 1.0 / scale),
            Factor::Uniform { side } => (1.0 - side.ln(), 2.0 / side),
            Factor::Exponential { rate } => (rate.ln() + 1.0, rate),
            Factor::Laplace { scale } => (-(2.0 * scale).ln(), 1.0 / scale),
        }
    }

    pub fn is_even(&self) -> bool {
        !matches!(self, Factor::Exponential { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Factor::Gaussian { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            }
            Factor::Uniform { side } => side * (rng.random::<f64>() - 0.5),
            Factor::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                (e - 1.0) / rate
            }
            Factor::Laplace { scale } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
        }
    }

    /// Open interval of `ξ` where the log-Laplace transform is finite.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            Factor::Gaussian { .. } | Factor::Uniform { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Factor::Exponential { rate } => (f64::NEG_INFINITY, rate),
            Factor::Laplace { scale } => (-1.0 / scale, 1.0 / scale),
        }
    }

    /// Log-Laplace transform with derivatives, or `None` outside the domain.
    pub fn log_laplace(&self, xi: f64) -> Option<Jet> {
        match *self {
            Factor::Gaussian { scale } => {
                let s2 = scale * scale;
                Some((0.5 * s2 * xi * xi, s2 * xi, s2))
            }
            Factor::Uniform { side } => {
                let h = 0.5 * side;
                let (v, d1, d2) = ln_sinhc(h * xi);
                Some((v, h * d1, h * h * d2))
            }
            Factor::Exponential { rate } => {
                let u = xi / rate;
                if u >= 1.0 {
                    return None;
                }
                let v = -u - (-u).ln_1p();
                let d1 = u / (1.0 - u) / rate;
                let d2 = 1.0 / ((1.0 - u) * (1.0 - u) * rate * rate);
                Some((v, d1, d2))
            }
            Factor::Laplace { scale } => {
                let u = scale * xi;
                if u.abs() >= 1.0 {
                    return None;
                }
                let q = 1.0 - u * u;
                let v = -(-u * u).ln_1p();
                let d1 = 2.0 * scale * u / q;
                let d2 = 2.0 * scale * scale * (1.0 + u * u) / (q * q);
                Some((v, d1, d2))
            }
        }
    }
}
