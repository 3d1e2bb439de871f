//! Continuous truth values for comparisons and connectives.

use std::fmt;
use std::str::FromStr;

/// Sigmoid arguments are clamped to this magnitude before exponentiation.
pub const SIGMOID_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    /// Scaling factor `B`.
    pub scale: f64,
    /// Offset `ε`.
    pub offset: f64,
    /// Width of the Gaussian equality.
    pub sigma: f64,
}

impl MappingParams {
    pub fn new(scale: f64, offset: f64, sigma: f64) -> Option<Self> {
        (scale > 0.0 && offset > 0.0 && sigma > 0.0).then_some(MappingParams { scale, offset, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TNormKind {
    Lukasiewicz,
    Godel,
    Product,
}

impl TNormKind {
    pub const ALL: [TNormKind; 3] = [TNormKind::Godel, TNormKind::Lukasiewicz, TNormKind::Product];

    pub fn name(self) -> &'static str {
        match self {
            TNormKind::Lukasiewicz => "lukasiewicz",
            TNormKind::Godel => "godel",
            TNormKind::Product => "product",
        }
    }
}

impl fmt::Display for TNormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TNormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lukasiewicz" | "luk" => Ok(TNormKind::Lukasiewicz),
            "godel" | "goedel" | "min" => Ok(TNormKind::Godel),
            "product" | "prod" => Ok(TNormKind::Product),
            other => Err(format!("unknown t-norm `{other}`")),
        }
    }
}

/// `1 / (1 + e^{-z})`, evaluated without overflow on either side.
pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn c_gt(t: f64, u: f64, p: &MappingParams) -> f64 {
    sigmoid(p.scale * (t - u - p.offset))
}

pub fn c_ge(t: f64, u: f64, p: &MappingParams) -> f64 {
    sigmoid(p.scale * (t - u + p.offset))
}

pub fn c_lt(t: f64, u: f64, p: &MappingParams) -> f64 {
    c_neg(c_ge(t, u, p))
}

pub fn c_le(t: f64, u: f64, p: &MappingParams) -> f64 {
    c_neg(c_gt(t, u, p))
}

pub fn c_eq_sigmoid(t: f64, u: f64, p: &MappingParams, k: TNormKind) -> f64 {
    t_norm(k, c_ge(t, u, p), c_le(t, u, p))
}

pub fn c_eq_gauss(t: f64, u: f64, sigma: f64) -> f64 {
    let d = t - u;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

pub fn c_neg(a: f64) -> f64 {
    1.0 - a
}

pub fn t_norm(k: TNormKind, a: f64, b: f64) -> f64 {
    match k {
        TNormKind::Lukasiewicz => (a + b - 1.0).max(0.0),
        TNormKind::Godel => a.min(b),
        TNormKind::Product => a * b,
    }
}

pub fn t_conorm(k: TNormKind, a: f64, b: f64) -> f64 {
    match k {
        TNormKind::Lukasiewicz => (a + b).min(1.0),
        TNormKind::Godel => a.max(b),
        TNormKind::Product => a + b - a * b,
    }
}

/// Partial derivatives of `t_norm(k, a, b)`. Min ties route to `a`.
pub fn t_norm_grad(k: TNormKind, a: f64, b: f64) -> (f64, f64) {
    match k {
        TNormKind::Lukasiewicz => {
            if a + b - 1.0 > 0.0 {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        TNormKind::Godel => {
            if a <= b {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        }
        TNormKind::Product => (b, a),
    }
}

/// Partial derivatives of `t_conorm(k, a, b)`. Max ties route to `a`.
pub fn t_conorm_grad(k: TNormKind, a: f64, b: f64) -> (f64, f64) {
    match k {
        TNormKind::Lukasiewicz => {
            if a + b < 1.0 {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        TNormKind::Godel => {
            if a >= b {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        }
        TNormKind::Product => (1.0 - b, 1.0 - a),
    }
}
