//! Null and alternative lifetime laws, plus Koziol–Green censoring.
//!
//! Every family is represented through its survival function `S(x) = e^{-Λ(x)}`.
//! Sampling inverts the cumulative hazard: `X = Λ^{-1}(E)` with `E ~ Exp(1)`,
//! which also gives Koziol–Green censoring times directly, since
//! `K_c = S^β` has cumulative hazard `βΛ`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{input, Error, Result};
use crate::special::{norm_cdf, norm_quantile, norm_sf};
use crate::survival::CensoredSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `F = 1 - e^{-x/θ}` (θ is the mean).
    Exp,
    /// `F = 1 - exp(-x^θ)`.
    Weibull,
    /// Shape θ, unit rate.
    Gamma,
    /// `|N(0,1)|`.
    HalfNormal,
    /// `F = 1 - exp(2(1 - e^{x^θ}))`.
    Chen,
    /// `F = 1 - exp(-x - θx²/2)`.
    LinearFailureRate,
    /// `F = 1 - exp((1 - e^x)/θ)`.
    ModifiedExtremeValue,
    /// Log-mean 0, log-sd θ.
    LogNormal,
    /// `F = 1 - exp(-(ln(x+1))^{θ+1})`.
    Dhillon,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Exp,
        Family::Weibull,
        Family::Gamma,
        Family::HalfNormal,
        Family::Chen,
        Family::LinearFailureRate,
        Family::ModifiedExtremeValue,
        Family::LogNormal,
        Family::Dhillon,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Family::Exp => "exp",
            Family::Weibull => "weibull",
            Family::Gamma => "gamma",
            Family::HalfNormal => "hn",
            Family::Chen => "chen",
            Family::LinearFailureRate => "lfr",
            Family::ModifiedExtremeValue => "ev",
            Family::LogNormal => "lognormal",
            Family::Dhillon => "dhillon",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Family::Exp => "Exp",
            Family::Weibull => "W",
            Family::Gamma => "Gamma",
            Family::HalfNormal => "HN",
            Family::Chen => "CH",
            Family::LinearFailureRate => "LF",
            Family::ModifiedExtremeValue => "EV",
            Family::LogNormal => "LN",
            Family::Dhillon => "DL",
        }
    }

    fn uses_theta(self) -> bool {
        self != Family::HalfNormal
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let f = match s.trim().to_ascii_lowercase().as_str() {
            "exp" | "exponential" | "e" => Family::Exp,
            "weibull" | "w" => Family::Weibull,
            "gamma" | "g" => Family::Gamma,
            "hn" | "halfnormal" | "half-normal" => Family::HalfNormal,
            "chen" | "ch" => Family::Chen,
            "lfr" | "lf" | "linearfailurerate" => Family::LinearFailureRate,
            "ev" | "extremevalue" | "modifiedextremevalue" => Family::ModifiedExtremeValue,
            "lognormal" | "ln" => Family::LogNormal,
            "dhillon" | "dl" => Family::Dhillon,
            other => return input(format!("unknown distribution family `{other}`")),
        };
        Ok(f)
    }
}

/// A lifetime distribution on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSpec {
    pub family: Family,
    pub theta: f64,
}

impl DistSpec {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        if family.uses_theta() && !(theta.is_finite() && theta > 0.0) {
            return input(format!("{}: theta must be positive, got {theta}", family.key()));
        }
        let theta = if family.uses_theta() { theta } else { 0.0 };
        Ok(DistSpec { family, theta })
    }

    pub fn exp(mean: f64) -> Self {
        DistSpec::new(Family::Exp, mean).expect("exponential mean must be positive")
    }

    /// Label in the style of the power tables, e.g. `W(1.4)` or `HN`.
    pub fn label(&self) -> String {
        if self.family.uses_theta() {
            format!("{}({})", self.family.short(), self.theta)
        } else {
            self.family.short().to_string()
        }
    }

    /// Cumulative hazard `Λ(x) = -ln S(x)`.
    pub fn cum_hazard(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = self.theta;
        match self.family {
            Family::Exp => x / t,
            Family::Weibull => x.powf(t),
            Family::Chen => 2.0 * x.powf(t).exp_m1(),
            Family::LinearFailureRate => x + 0.5 * t * x * x,
            Family::ModifiedExtremeValue => x.exp_m1() / t,
            Family::Dhillon => x.ln_1p().powf(t + 1.0),
            Family::Gamma | Family::HalfNormal | Family::LogNormal => -self.sf(x).ln(),
        }
    }

    /// Inverse cumulative hazard: the `x` with `Λ(x) = l`.
    pub fn inv_cum_hazard(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        if l.is_infinite() {
            return f64::INFINITY;
        }
        let t = self.theta;
        match self.family {
            Family::Exp => t * l,
            Family::Weibull => l.powf(1.0 / t),
            Family::Chen => (0.5 * l).ln_1p().powf(1.0 / t),
            Family::LinearFailureRate => 2.0 * l / (1.0 + (1.0 + 2.0 * t * l).sqrt()),
            Family::ModifiedExtremeValue => (t * l).ln_1p(),
            Family::Dhillon => l.powf(1.0 / (t + 1.0)).exp_m1(),
            Family::Gamma | Family::HalfNormal | Family::LogNormal => self.isf((-l).exp()),
        }
    }

    /// Survival function `1 - F(x)`.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Gamma => gamma_ur(self.theta, x),
            Family::HalfNormal => libm::erfc(x / std::f64::consts::SQRT_2),
            Family::LogNormal => norm_sf(x.ln() / self.theta),
            _ => (-self.cum_hazard(x)).exp(),
        }
    }

    fn cdf_unchecked(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Gamma => gamma_lr(self.theta, x),
            Family::HalfNormal => libm::erf(x / std::f64::consts::SQRT_2),
            Family::LogNormal => norm_cdf(x.ln() / self.theta),
            _ => -(-self.cum_hazard(x)).exp_m1(),
        }
    }

    /// Distribution function.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return input(format!("cdf argument must be finite, got {x}"));
        }
        Ok(self.cdf_unchecked(x))
    }

    /// Quantile function on `[0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return input(format!("quantile level must lie in [0, 1), got {p}"));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let x = match self.family {
            Family::Gamma => {
                if p <= 0.5 {
                    gamma_root(self.theta, p, true)
                } else {
                    gamma_root(self.theta, 1.0 - p, false)
                }
            }
            Family::HalfNormal => std::f64::consts::SQRT_2 * crate::special::erf_inv(p),
            Family::LogNormal => (self.theta * norm_quantile(p)).exp(),
            _ => self.inv_cum_hazard(-(-p).ln_1p()),
        };
        Ok(x)
    }

    /// Inverse survival function: the `x` with `S(x) = s`, for `s ∈ [0, 1]`.
    pub fn isf(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        if s <= 0.0 {
            return f64::INFINITY;
        }
        match self.family {
            Family::Gamma => {
                if s >= 0.5 {
                    gamma_root(self.theta, 1.0 - s, true)
                } else {
                    gamma_root(self.theta, s, false)
                }
            }
            Family::HalfNormal => std::f64::consts::SQRT_2 * crate::special::erfc_inv(s),
            Family::LogNormal => (-self.theta * norm_quantile(s)).exp(),
            _ => self.inv_cum_hazard(-s.ln()),
        }
    }

    /// One draw by inverse transform.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inv_cum_hazard(unit_exponential(rng))
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        if n == 0 {
            return input("sample size must be at least 1");
        }
        Ok((0..n).map(|_| self.draw(rng)).collect())
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.family.uses_theta() {
            write!(f, "{}:{}", self.family.key(), self.theta)
        } else {
            write!(f, "{}", self.family.key())
        }
    }
}

impl FromStr for DistSpec {
    type Err = Error;

    /// Parses `family:theta`, e.g. `weibull:1.4`; `hn` takes no parameter.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, theta) = match s.split_once(':') {
            Some((name, theta)) => {
                let theta: f64 = theta
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("bad distribution parameter in `{s}`")))?;
                (name, Some(theta))
            }
            None => (s, None),
        };
        let family: Family = name.parse()?;
        match (family.uses_theta(), theta) {
            (true, Some(t)) => DistSpec::new(family, t),
            (true, None) => input(format!("distribution `{s}` needs a parameter, e.g. `{}:1`", family.key())),
            (false, _) => DistSpec::new(family, 0.0),
        }
    }
}

/// Draw from Exp(1) via `-ln U`, `U ∈ (0, 1]`.
pub(crate) fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// Solve `P(θ, x) = q` (lower tail) or `Q(θ, x) = q` (upper tail) for `x`.
///
/// Newton in `y = ln x` on the log of the tail probability, safeguarded by a bracket.
fn gamma_root(shape: f64, q: f64, lower: bool) -> f64 {
    let tail = |x: f64| if lower { gamma_lr(shape, x) } else { gamma_ur(shape, x) };
    let lq = q.ln();
    let lg = ln_gamma(shape);
    // g(y) is increasing in y for the lower tail and decreasing for the upper.
    let g = |y: f64| tail(y.exp()).ln() - lq;
    let sign = if lower { 1.0 } else { -1.0 };

    // Wilson–Hilferty starting point.
    let z = if lower { norm_quantile(q) } else { -norm_quantile(q) };
    let c = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
    let mut y = if wh > 0.0 { wh.ln() } else { ((q * shape * lg.exp()).ln() / shape).min(0.0) };
    if lower && q < 0.1 {
        // Small-x regime: P ≈ x^θ / Γ(θ+1).
        let small = (q.ln() + ln_gamma(shape + 1.0)) / shape;
        if small < y {
            y = small;
        }
    }

    let (mut lo, mut hi) = (y - 1.0, y + 1.0);
    while sign * g(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while sign * g(hi) < 0.0 {
        hi += 2.0 * (hi - lo);
    }
    y = y.clamp(lo, hi);

    for _ in 0..200 {
        let x = y.exp();
        let gy = g(y);
        if gy == 0.0 {
            break;
        }
        if sign * gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        // d/dy ln P(e^y) = x f(x) / P, with f the gamma density.
        let log_xf = shape * y - x - lg;
        let deriv = sign * (log_xf - tail(x).ln()).exp();
        let mut next = y - gy / deriv;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * y.abs().max(1.0) {
            y = next;
            break;
        }
        y = next;
        if hi - lo <= 1e-15 * y.abs().max(1.0) {
            break;
        }
    }
    y.exp()
}

/// Koziol–Green exponent `β` for a target censoring rate `p = β/(β+1)`.
pub fn censoring_beta_for_rate(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return input(format!("censoring rate must lie in [0, 1), got {p}"));
    }
    Ok(p / (1.0 - p))
}

/// Koziol–Green censoring: `K_c(x) = (1 - F(x))^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgCensoring {
    pub beta: f64,
    pub base: DistSpec,
}

impl KgCensoring {
    pub fn for_rate(base: DistSpec, rate: f64) -> Result<Self> {
        Ok(KgCensoring { beta: censoring_beta_for_rate(rate)?, base })
    }

    /// Censoring survival `K_c(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        (-self.beta * self.base.cum_hazard(x)).exp()
    }

    /// One censoring time; `+∞` when `β = 0`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.beta == 0.0 {
            // Still consume the draw so streams stay aligned across rates.
            let _ = unit_exponential(rng);
            return f64::INFINITY;
        }
        self.base.inv_cum_hazard(unit_exponential(rng) / self.beta)
    }
}

/// Draw a right-censored sample from `alt` under Koziol–Green censoring at
/// expected rate `target_rate`.
pub fn generate_censored_sample<R: Rng + ?Sized>(
    alt: &DistSpec,
    target_rate: f64,
    n: usize,
    rng: &mut R,
) -> Result<CensoredSample> {
    if n < 2 {
        return input("censored sample needs n >= 2");
    }
    if !(0.0..0.5).contains(&target_rate) {
        return input(format!(
            "censoring rate must lie in [0, 0.5) for the Koziol-Green model, got {target_rate}"
        ));
    }
    let kg = KgCensoring::for_rate(*alt, target_rate)?;
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let life = alt.draw(rng);
        let cens = kg.draw(rng);
        times.push(life.min(cens));
        events.push(life <= cens);
    }
    CensoredSample::new(times, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn all_specs() -> Vec<DistSpec> {
        [
            "exp:1", "weibull:1.4", "weibull:0.8", "gamma:2", "gamma:0.4", "hn", "chen:0.5",
            "chen:1", "chen:1.5", "lfr:2", "lfr:4", "ev:1.5", "lognormal:0.8", "lognormal:1.5",
            "dhillon:1", "dhillon:1.5",
        ]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
    }

    #[test]
    fn exponential_median_and_boundary() {
        let e = DistSpec::exp(1.0);
        assert!((e.cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        let w: DistSpec = "weibull:1.4".parse().unwrap();
        assert_eq!(w.cdf(0.0).unwrap(), 0.0);
        assert!(w.cdf(f64::NAN).is_err());
        assert!(w.cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn exponential_quantiles() {
        let e = DistSpec::exp(1.0);
        assert_eq!(e.quantile(0.0).unwrap(), 0.0);
        let q = e.quantile(1.0 - (-1.0f64).exp()).unwrap();
        assert!((q - 1.0).abs() < 1e-14);
        assert!(e.quantile(1.0).is_err());
        assert!(e.quantile(-0.1).is_err());
    }

    #[test]
    fn gamma_median_matches_bisection() {
        let g: DistSpec = "gamma:2".parse().unwrap();
        let q = g.quantile(0.5).unwrap();
        // independent bisection on the cdf
        let (mut lo, mut hi) = (0.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_lr(2.0, mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-12);
        assert!((g.cdf(q).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf_on_every_family() {
        for spec in all_specs() {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let x = spec.quantile(p).unwrap();
                let back = spec.cdf(x).unwrap();
                assert!((back - p).abs() < 1e-12, "{spec}: p={p} x={x} cdf={back}");
            }
        }
    }

    #[test]
    fn cdf_then_quantile_is_identity() {
        for spec in all_specs() {
            let hi = spec.quantile(0.99).unwrap();
            for k in 1..=100 {
                let x = hi * k as f64 / 100.0;
                let back = spec.quantile(spec.cdf(x).unwrap()).unwrap();
                assert!((back - x).abs() <= 1e-9 * x.max(1.0), "{spec}: x={x} back={back}");
            }
        }
    }

    #[test]
    fn isf_and_inv_cum_hazard_agree() {
        for spec in all_specs() {
            for s in [0.9, 0.5, 0.1, 1e-3, 1e-8] {
                let x = spec.isf(s);
                assert!((spec.sf(x) / s - 1.0).abs() < 1e-9, "{spec} s={s}");
                let y = spec.inv_cum_hazard(-s.ln());
                assert!((x - y).abs() <= 1e-9 * x.max(1.0), "{spec} s={s}");
            }
        }
    }

    #[test]
    fn chen_cdf_against_density_quadrature() {
        // F(1) for CH(0.5) by integrating the density 2θx^{θ-1}e^{x^θ}exp(2(1-e^{x^θ}))
        // with x = u², which removes the x^{-1/2} singularity.
        let theta = 0.5;
        let dens_u = |u: f64| {
            if u == 0.0 {
                return 2.0 * theta * 2.0; // limit of 2θ u^{-1} e^{u} ... * 2u
            }
            let x = u * u;
            let xt = x.powf(theta);
            2.0 * theta * x.powf(theta - 1.0) * xt.exp() * (2.0 * (1.0 - xt.exp())).exp() * 2.0 * u
        };
        let m = 20_000;
        let h = 1.0 / m as f64;
        let mut s = dens_u(0.0) + dens_u(1.0);
        for i in 1..m {
            s += dens_u(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = s * h / 3.0;
        let spec: DistSpec = "chen:0.5".parse().unwrap();
        assert!((spec.cdf(1.0).unwrap() - oracle).abs() < 1e-10, "{oracle}");
        // cross-check against the quantile inverse
        assert!((spec.quantile(oracle).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_sample_mean() {
        let mut rng = stream(11, &[]);
        let xs = DistSpec::exp(1.0).sample(100_000, &mut rng).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn weibull_median_hit_rate() {
        let spec: DistSpec = "weibull:0.8".parse().unwrap();
        let med = spec.quantile(0.5).unwrap();
        let mut rng = stream(12, &[]);
        let xs = spec.sample(100_000, &mut rng).unwrap();
        let frac = xs.iter().filter(|&&x| x <= med).count() as f64 / xs.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn single_draw_is_reproducible() {
        for spec in all_specs() {
            let a = spec.sample(1, &mut stream(5, &[1])).unwrap();
            let b = spec.sample(1, &mut stream(5, &[1])).unwrap();
            assert_eq!(a, b);
        }
        assert!(DistSpec::exp(1.0).sample(0, &mut stream(0, &[])).is_err());
    }

    #[test]
    fn ks_distance_small_for_every_family() {
        for (i, spec) in all_specs().into_iter().enumerate() {
            let mut rng = stream(99, &[i as u64]);
            let mut xs = spec.sample(100_000, &mut rng).unwrap();
            xs.sort_by(|a, b| a.total_cmp(b));
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let f = spec.cdf(x).unwrap();
                    (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 0.01, "{spec}: KS distance {d}");
        }
    }

    #[test]
    fn censoring_beta() {
        assert!((censoring_beta_for_rate(0.1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(censoring_beta_for_rate(0.0).unwrap(), 0.0);
        assert!((censoring_beta_for_rate(0.3).unwrap() - 3.0 / 7.0).abs() < 1e-15);
        assert!(censoring_beta_for_rate(1.0).is_err());
    }

    #[test]
    fn kg_censoring_survival_is_valid() {
        let kg = KgCensoring::for_rate("lognormal:0.8".parse().unwrap(), 0.3).unwrap();
        assert_eq!(kg.survival(0.0), 1.0);
        let mut prev = 1.0;
        for k in 1..200 {
            let s = kg.survival(k as f64 * 0.05);
            assert!(s <= prev && s >= 0.0);
            prev = s;
        }
    }

    #[test]
    fn censored_sample_rates() {
        let e = DistSpec::exp(1.0);
        let s = generate_censored_sample(&e, 0.0, 1000, &mut stream(1, &[])).unwrap();
        assert!(s.events().iter().all(|&d| d));

        let s = generate_censored_sample(&e, 0.2, 100_000, &mut stream(2, &[])).unwrap();
        let frac = s.events().iter().filter(|&&d| !d).count() as f64 / s.len() as f64;
        assert!((frac - 0.2).abs() < 0.01, "{frac}");

        let s = generate_censored_sample(&e, 0.1, 100_000, &mut stream(3, &[])).unwrap();
        let mean = s.times().iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.9).abs() < 0.01, "{mean}");

        assert!(generate_censored_sample(&e, 0.5, 10, &mut stream(3, &[])).is_err());
        assert!(generate_censored_sample(&e, 0.1, 1, &mut stream(3, &[])).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        for spec in all_specs() {
            let back: DistSpec = spec.to_string().parse().unwrap();
            assert_eq!(back, spec);
        }
        assert!("weibull".parse::<DistSpec>().is_err());
        assert!("weibull:-1".parse::<DistSpec>().is_err());
        assert!("cauchy:1".parse::<DistSpec>().is_err());
        assert_eq!("W:1.4".parse::<DistSpec>().unwrap().label(), "W(1.4)");
    }
}
