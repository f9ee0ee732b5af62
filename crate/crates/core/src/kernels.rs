//! Characterization kernels and their first projections under the Exp(1) null.
//!
//! The projections `h1`, `Φ1` and their tail integrals `∫_u^∞ · e^{-x} dx`
//! are closed forms obtained by integrating the kernels against the unit
//! exponential density; `Φ1` needs the exponential integrals `E1` and `Ei`.

use std::fmt;
use std::str::FromStr;

use crate::error::{input, Error, Result};
use crate::special::{e1_scaled, ei_scaled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Characterization {
    /// `ψ(x, y) = |x - y|`.
    PuriRubin,
    /// `ψ(x, y) = 2 min(x, y)`.
    Desu,
}

impl Characterization {
    pub fn tag(self) -> &'static str {
        match self {
            Characterization::PuriRubin => "PR",
            Characterization::Desu => "D",
        }
    }

    #[inline]
    pub fn psi(self, x: f64, y: f64) -> f64 {
        match self {
            Characterization::PuriRubin => (x - y).abs(),
            Characterization::Desu => 2.0 * x.min(y),
        }
    }
}

impl fmt::Display for Characterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Characterization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pr" | "p" | "puri-rubin" | "purirubin" => Ok(Characterization::PuriRubin),
            "d" | "desu" => Ok(Characterization::Desu),
            other => input(format!("unknown characterization `{other}` (use PR or D)")),
        }
    }
}

#[inline]
pub(crate) fn phi_unchecked(ch: Characterization, x1: f64, x2: f64, a: f64) -> f64 {
    0.5 * (1.0 / (a + x1) + 1.0 / (a + x2) - 2.0 / (a + ch.psi(x1, x2)))
}

/// Kernel `Φ(x1, x2; a)` of the integral-type statistic.
pub fn phi_kernel(ch: Characterization, x1: f64, x2: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return input(format!("tuning parameter a must be positive, got {a}"));
    }
    Ok(phi_unchecked(ch, x1, x2, a))
}

/// Kernel `h(x1, x2; t)` of the U-empirical Laplace process.
pub fn h_kernel(ch: Characterization, x1: f64, x2: f64, t: f64) -> f64 {
    0.5 * ((-t * x1).exp() + (-t * x2).exp() - 2.0 * (-t * ch.psi(x1, x2)).exp())
}

/// `(e^{-p x} - e^{-q x}) / (q - p)` for `x >= 0`, stable as `q → p`.
fn exp_diff(p: f64, q: f64, x: f64) -> f64 {
    let z = (q - p) * x;
    if z.abs() < 1e-4 {
        // x e^{-p x} (1 - e^{-z}) / z
        let g = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z * z * z * z / 120.0;
        x * (-p * x).exp() * g
    } else {
        ((-p * x).exp() - (-q * x).exp()) / (q - p)
    }
}

/// `E e^{-t ψ(x, Y)}` for `Y ~ Exp(1)`.
fn mean_exp_psi(ch: Characterization, x: f64, t: f64) -> f64 {
    match ch {
        Characterization::PuriRubin => exp_diff(1.0, t, x) + (-x).exp() / (1.0 + t),
        Characterization::Desu => {
            let r = 1.0 + 2.0 * t;
            -(-r * x).exp_m1() / r + (-r * x).exp()
        }
    }
}

/// First projection `h1(x; t) = E h(x, Y; t)`, `Y ~ Exp(1)`.
pub fn h1_projection(ch: Characterization, x: f64, t: f64) -> f64 {
    0.5 * ((-t * x).exp() + 1.0 / (1.0 + t)) - mean_exp_psi(ch, x, t)
}

/// `∫_u^∞ h1(x; t) e^{-x} dx`.
pub fn h1_tail(ch: Characterization, u: f64, t: f64) -> f64 {
    let own = 0.5 * ((-(1.0 + t) * u).exp() + (-u).exp()) / (1.0 + t);
    let cross = match ch {
        Characterization::PuriRubin => ((-2.0 * u).exp() + exp_diff(2.0, 1.0 + t, u)) / (1.0 + t),
        Characterization::Desu => {
            let r = 1.0 + 2.0 * t;
            (-u).exp() / r + t * (-(2.0 + 2.0 * t) * u).exp() / ((1.0 + t) * r)
        }
    };
    own - cross
}

/// First projection `Φ1(x; a) = E Φ(x, Y; a)`, `Y ~ Exp(1)`.
pub fn phi1_projection(ch: Characterization, x: f64, a: f64) -> f64 {
    let e1a = e1_scaled(a);
    let ex = (-x).exp();
    let own = 0.5 * (1.0 / (a + x) + e1a);
    // E 1/(a + ψ(x, Y))
    let cross = match ch {
        Characterization::PuriRubin => ex * e1a + ei_scaled(a + x) - ex * ei_scaled(a),
        Characterization::Desu => {
            0.5 * (e1_scaled(0.5 * a) - ex * e1_scaled(0.5 * a + x)) + ex / (a + 2.0 * x)
        }
    };
    own - cross
}

/// `∫_u^∞ Φ1(x; a) e^{-x} dx`.
pub fn phi1_tail(ch: Characterization, u: f64, a: f64) -> f64 {
    let e1a = e1_scaled(a);
    let eu = (-u).exp();
    let e2u = (-2.0 * u).exp();
    match ch {
        Characterization::PuriRubin => {
            0.5 * (eu * e1a - e2u * e1a - eu * ei_scaled(a + u) + e2u * ei_scaled(a))
        }
        Characterization::Desu => {
            0.5 * eu * (e1_scaled(a + u) + e1a) - e2u * e1_scaled(a + 2.0 * u) - 0.5 * eu * e1_scaled(0.5 * a)
                + 0.5 * e2u * e1_scaled(0.5 * a + u)
        }
    }
}
