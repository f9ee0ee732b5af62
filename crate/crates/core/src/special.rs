//! Exponential integrals and normal-distribution helpers.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `e^x E1(x)` for `x > 0`, where `E1(x) = ∫_x^∞ e^{-s}/s ds`.
///
/// Equals `∫_0^∞ e^{-x t} / (1 + t) dt`.
pub fn e1_scaled(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= -x / k;
            let add = term / k;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }
}

/// `e^{-x} Ei(x)` for `x > 0`, where `Ei` is the principal-value exponential integral.
pub fn ei_scaled(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let cutoff = -(EPS.ln());
    if x <= cutoff {
        let mut sum = 0.0;
        let mut fact = 1.0;
        let mut k = 1.0;
        loop {
            fact *= x / k;
            let term = fact / k;
            sum += term;
            if term < EPS * sum {
                break;
            }
            k += 1.0;
        }
        (sum + x.ln() + EULER_GAMMA) * (-x).exp()
    } else {
        // Asymptotic series, truncated at its smallest term.
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            let prev = term;
            term *= k / x;
            if term < EPS {
                break;
            }
            if term >= prev {
                sum -= prev;
                break;
            }
            sum += term;
            k += 1.0;
        }
        (1.0 + sum) / x
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Inverse error function, Newton-polished to full double precision.
pub fn erf_inv(p: f64) -> f64 {
    let mut x = statrs::function::erf::erf_inv(p);
    for _ in 0..2 {
        if !x.is_finite() {
            break;
        }
        let d = TWO_OVER_SQRT_PI * (-x * x).exp();
        if d == 0.0 {
            break;
        }
        x -= (libm::erf(x) - p) / d;
    }
    x
}

/// Inverse complementary error function, Newton-polished.
pub fn erfc_inv(q: f64) -> f64 {
    let mut x = statrs::function::erf::erfc_inv(q);
    for _ in 0..2 {
        if !x.is_finite() {
            break;
        }
        let d = TWO_OVER_SQRT_PI * (-x * x).exp();
        if d == 0.0 {
            break;
        }
        x += (libm::erfc(x) - q) / d;
    }
    x
}
