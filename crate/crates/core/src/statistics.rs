//! Test statistics: the IPCW characterization statistics `Ĵ` and `M̂`, and the
//! Cramér–von Mises, Akritas chi-square, maximal-correlation and DMTTF
//! competitors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{input, Error, Result};
use crate::kernels::Characterization;
use crate::quadrature::GaussLaguerre;
use crate::survival::{censored_exp_mle, censoring_survival_left, ipcw_weights, kaplan_meier, km_masses, CensoredSample, Target};

/// Null hypothesis: a fixed exponential mean, or exponential with unknown mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hypothesis {
    Simple { mu: f64 },
    Composite,
}

impl Hypothesis {
    pub fn is_composite(&self) -> bool {
        matches!(self, Hypothesis::Composite)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Hypothesis::Simple { .. } => "simple",
            Hypothesis::Composite => "composite",
        }
    }
}

/// How `M̂` integrates over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MMethod {
    /// Exact double sum over the exponential terms of `Û_c(t)`.
    ClosedForm,
    /// Gauss–Laguerre rule with the given number of nodes.
    Quadrature(usize),
}

impl Default for MMethod {
    fn default() -> Self {
        MMethod::Quadrature(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatKind {
    J,
    M,
    CvM,
    AkritasChi2,
    Qn,
    QnS,
    Delta,
}

/// Which statistic to compute and its tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticSpec {
    pub kind: StatKind,
    /// Used by `J` and `M` only.
    pub characterization: Characterization,
    /// Used by `J` and `M` only.
    pub a: f64,
    /// Cell count of the chi-square test.
    pub r: usize,
    pub m_method: MMethod,
}

impl StatisticSpec {
    fn base(kind: StatKind) -> Self {
        StatisticSpec { kind, characterization: Characterization::PuriRubin, a: 1.0, r: 3, m_method: MMethod::default() }
    }

    pub fn j(ch: Characterization, a: f64) -> Self {
        StatisticSpec { characterization: ch, a, ..Self::base(StatKind::J) }
    }

    pub fn m(ch: Characterization, a: f64) -> Self {
        StatisticSpec { characterization: ch, a, ..Self::base(StatKind::M) }
    }

    pub fn cvm() -> Self {
        Self::base(StatKind::CvM)
    }

    pub fn chi2(r: usize) -> Self {
        StatisticSpec { r, ..Self::base(StatKind::AkritasChi2) }
    }

    pub fn qn() -> Self {
        Self::base(StatKind::Qn)
    }

    pub fn qns() -> Self {
        Self::base(StatKind::QnS)
    }

    pub fn delta() -> Self {
        Self::base(StatKind::Delta)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StatKind::J | StatKind::M if !(self.a > 0.0 && self.a.is_finite()) => {
                input(format!("tuning parameter a must be positive, got {}", self.a))
            }
            StatKind::AkritasChi2 if self.r < 2 => input(format!("chi-square test needs r >= 2 cells, got {}", self.r)),
            StatKind::M if matches!(self.m_method, MMethod::Quadrature(0)) => input("quadrature needs at least one node"),
            _ => Ok(()),
        }
    }

    pub fn sidedness(&self) -> Sidedness {
        match self.kind {
            StatKind::J => Sidedness::Absolute,
            StatKind::Qn | StatKind::QnS => Sidedness::TwoSided,
            _ => Sidedness::Upper,
        }
    }

    /// Short plain-text label, e.g. `J^P_1` or `A_n3`.
    pub fn label(&self) -> String {
        let c = match self.characterization {
            Characterization::PuriRubin => "P",
            Characterization::Desu => "D",
        };
        match self.kind {
            StatKind::J => format!("J^{c}_{}", self.a),
            StatKind::M => format!("M^{c}_{}", self.a),
            StatKind::CvM => "omega^2".into(),
            StatKind::AkritasChi2 => format!("A_n{}", self.r),
            StatKind::Qn => "Q_n".into(),
            StatKind::QnS => "Q^S_n".into(),
            StatKind::Delta => "Delta_n".into(),
        }
    }

    /// LaTeX label in the style of the published power tables.
    pub fn latex_label(&self) -> String {
        let c = match self.characterization {
            Characterization::PuriRubin => "P",
            Characterization::Desu => "D",
        };
        match self.kind {
            StatKind::J => format!("$\\widehat{{J}}^{{\\mathcal{{{c}}}}}_{{c,{}}}$", self.a),
            StatKind::M => format!("$\\widehat{{M}}^{{\\mathcal{{{c}}}}}_{{c,{}}}$", self.a),
            StatKind::CvM => "$\\omega^2$".into(),
            StatKind::AkritasChi2 => format!("$A_{{n{}}}$", self.r),
            StatKind::Qn => "$Q_n$".into(),
            StatKind::QnS => "$Q^S_n$".into(),
            StatKind::Delta => "$\\Delta_n$".into(),
        }
    }

    /// Value of the statistic on `sample` under `hypothesis`.
    ///
    /// Composite mode divides the sample by the censored-exponential MLE and
    /// then tests against Exp(1); the chi-square test uses its own
    /// estimated-parameter quadratic form instead.
    pub fn evaluate(&self, sample: &CensoredSample, hypothesis: Hypothesis) -> Result<f64> {
        self.validate()?;
        if self.kind == StatKind::AkritasChi2 {
            return akritas_chi2(sample, hypothesis, self.r);
        }
        let (scaled, mu) = match hypothesis {
            Hypothesis::Simple { mu } => (None, mu),
            Hypothesis::Composite => {
                let mu_hat = censored_exp_mle(sample)?;
                (Some(sample.scaled(1.0 / mu_hat)), 1.0)
            }
        };
        let s = scaled.as_ref().unwrap_or(sample);
        match self.kind {
            StatKind::J => j_statistic(&s.scaled(1.0 / mu), self.characterization, self.a),
            StatKind::M => m_statistic(&s.scaled(1.0 / mu), self.characterization, self.a, self.m_method),
            StatKind::CvM => cvm_koziol(s, mu),
            StatKind::Qn => qn_raw(s, mu),
            StatKind::QnS => qn_statistic(s, mu),
            StatKind::Delta => delta_statistic(&s.scaled(1.0 / mu)),
            StatKind::AkritasChi2 => unreachable!(),
        }
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StatKind::J => write!(f, "J:{}:a={}", self.characterization, self.a),
            StatKind::M => {
                write!(f, "M:{}:a={}", self.characterization, self.a)?;
                match self.m_method {
                    MMethod::ClosedForm => write!(f, ":closed"),
                    MMethod::Quadrature(64) => Ok(()),
                    MMethod::Quadrature(k) => write!(f, ":quad={k}"),
                }
            }
            StatKind::CvM => write!(f, "cvm"),
            StatKind::AkritasChi2 => write!(f, "chi2:r={}", self.r),
            StatKind::Qn => write!(f, "qn"),
            StatKind::QnS => write!(f, "qns"),
            StatKind::Delta => write!(f, "delta"),
        }
    }
}

impl FromStr for StatisticSpec {
    type Err = Error;

    /// Parses `J:PR:a=1`, `M:D:a=2:quad=64`, `M:PR:a=1:closed`, `chi2:r=3`,
    /// `cvm`, `qn`, `qns` or `delta`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Input(format!("bad statistic spec `{s}`: {msg}"));
        let mut parts = s.trim().split(':').map(str::trim);
        let head = parts.next().unwrap_or("").to_ascii_lowercase();
        let mut spec = match head.as_str() {
            "j" => StatisticSpec::base(StatKind::J),
            "m" => StatisticSpec::base(StatKind::M),
            "cvm" | "omega2" | "w2" => StatisticSpec::cvm(),
            "chi2" | "a" | "akritas" => StatisticSpec::chi2(3),
            "qn" => StatisticSpec::qn(),
            "qns" => StatisticSpec::qns(),
            "delta" => StatisticSpec::delta(),
            _ => return Err(bad("unknown statistic")),
        };
        let mut saw_char = false;
        for p in parts {
            if let Some((k, v)) = p.split_once('=') {
                match k.trim().to_ascii_lowercase().as_str() {
                    "a" => spec.a = v.trim().parse().map_err(|_| bad("a must be a number"))?,
                    "r" => spec.r = v.trim().parse().map_err(|_| bad("r must be an integer"))?,
                    "quad" => {
                        spec.m_method = MMethod::Quadrature(v.trim().parse().map_err(|_| bad("quad must be an integer"))?)
                    }
                    _ => return Err(bad("unknown option")),
                }
            } else if p.eq_ignore_ascii_case("closed") {
                spec.m_method = MMethod::ClosedForm;
            } else if matches!(spec.kind, StatKind::J | StatKind::M) && !saw_char {
                spec.characterization = p.parse()?;
                saw_char = true;
            } else {
                return Err(bad("unexpected field"));
            }
        }
        if matches!(spec.kind, StatKind::J | StatKind::M) && !saw_char {
            return Err(bad("J and M need a characterization (PR or D)"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Which values of a statistic count as evidence against the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    /// Large values.
    Upper,
    /// Large absolute values.
    Absolute,
    /// Values in either tail of the null distribution.
    TwoSided,
}

/// Rejection region of a test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalValues {
    /// Reject when the statistic is at least `upper`.
    Upper { upper: f64 },
    /// Reject when the absolute value of the statistic is at least `upper`.
    Absolute { upper: f64 },
    /// Reject when the statistic is at most `lower` or at least `upper`.
    Band { lower: f64, upper: f64 },
}

impl CriticalValues {
    pub fn rejects(&self, stat: f64) -> bool {
        match *self {
            CriticalValues::Upper { upper } => stat >= upper,
            CriticalValues::Absolute { upper } => stat.abs() >= upper,
            CriticalValues::Band { lower, upper } => stat <= lower || stat >= upper,
        }
    }
}

/// Replication metadata attached to a test decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMeta {
    pub spec: String,
    pub method: String,
    pub hypothesis: String,
    pub mu: Option<f64>,
    pub alpha: f64,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    pub seed: Option<u64>,
    pub skipped: usize,
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical_values: CriticalValues,
    pub p_value: Option<f64>,
    pub reject: bool,
    pub meta: OutcomeMeta,
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.meta;
        writeln!(f, "statistic   {} = {:.6}", m.spec, self.statistic)?;
        match self.critical_values {
            CriticalValues::Upper { upper } => writeln!(f, "critical    reject if >= {upper:.6}")?,
            CriticalValues::Absolute { upper } => writeln!(f, "critical    reject if |stat| >= {upper:.6}")?,
            CriticalValues::Band { lower, upper } => {
                writeln!(f, "critical    reject if <= {lower:.6} or >= {upper:.6}")?
            }
        }
        if let Some(p) = self.p_value {
            writeln!(f, "p-value     {p:.4}")?;
        }
        write!(
            f,
            "decision    {} H0 at alpha = {} ({}, {} hypothesis, n = {})",
            if self.reject { "reject" } else { "do not reject" },
            m.alpha,
            m.method,
            m.hypothesis,
            m.n
        )
    }
}

/// Chi-square test against its asymptotic `χ²` reference.
pub fn chi2_asymptotic_test(sample: &CensoredSample, hypothesis: Hypothesis, r: usize, alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let stat = akritas_chi2(sample, hypothesis, r)?;
    let reference = ChiSquared::new(akritas_df(hypothesis, r)).map_err(|e| Error::Input(e.to_string()))?;
    let upper = reference.inverse_cdf(1.0 - alpha);
    Ok(TestOutcome {
        statistic: stat,
        critical_values: CriticalValues::Upper { upper },
        p_value: Some(reference.sf(stat)),
        reject: stat >= upper,
        meta: OutcomeMeta {
            spec: StatisticSpec::chi2(r).to_string(),
            method: "asymptotic-chi2".into(),
            hypothesis: hypothesis.name().into(),
            mu: match hypothesis {
                Hypothesis::Simple { mu } => Some(mu),
                Hypothesis::Composite => None,
            },
            alpha,
            n: sample.len(),
            b: None,
            seed: None,
            skipped: 0,
        },
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        input(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

/// Uncensored observations with positive IPCW weight, sorted by time.
fn weighted_events(sample: &CensoredSample) -> Result<Vec<(f64, f64)>> {
    let w = ipcw_weights(sample)?;
    let mut out: Vec<(f64, f64)> = sample
        .times()
        .iter()
        .zip(&w)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| (x, w))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1)) as f64 / 2.0
}

/// `Ĵ`: IPCW U-statistic with kernel `Φ(·, ·; a)`.
pub fn j_statistic(sample: &CensoredSample, ch: Characterization, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return input(format!("tuning parameter a must be positive, got {a}"));
    }
    let ev = weighted_events(sample)?;
    let total: f64 = ev.iter().map(|e| e.1).sum();
    // ½ Σ_{i<j} w_i w_j (1/(a+x_i) + 1/(a+x_j)) = ½ Σ_i w_i (S - w_i) / (a + x_i)
    let own: f64 = ev.iter().map(|&(x, w)| 0.5 * w * (total - w) / (a + x)).sum();
    let cross = match ch {
        Characterization::Desu => {
            // sorted: min(x_i, x_j) = x_i for i < j
            let mut suffix = total;
            let mut acc = 0.0;
            for &(x, w) in &ev {
                suffix -= w;
                acc += w * suffix / (a + 2.0 * x);
            }
            acc
        }
        Characterization::PuriRubin => {
            let mut acc = 0.0;
            for (i, &(xi, wi)) in ev.iter().enumerate() {
                let mut row = 0.0;
                for &(xj, wj) in &ev[i + 1..] {
                    row += wj / (a + xj - xi);
                }
                acc += wi * row;
            }
            acc
        }
    };
    Ok((own - cross) / pair_count(sample.len()))
}

/// `Û_c(t)` on a set of points, `O(m)` per point for sorted weighted events.
fn u_process(ev: &[(f64, f64)], ch: Characterization, pairs: f64, t: f64) -> f64 {
    let total: f64 = ev.iter().map(|e| e.1).sum();
    let mut own = 0.0;
    let mut cross = 0.0;
    match ch {
        Characterization::Desu => {
            let mut suffix = total;
            for &(x, w) in ev {
                let e = (-t * x).exp();
                own += w * (total - w) * e;
                suffix -= w;
                cross += w * suffix * e * e;
            }
        }
        Characterization::PuriRubin => {
            // acc_j = Σ_{i<j} w_i e^{-t (x_j - x_i)}
            let mut acc = 0.0;
            let mut prev_x = 0.0;
            let mut prev_w = 0.0;
            for (k, &(x, w)) in ev.iter().enumerate() {
                own += w * (total - w) * (-t * x).exp();
                if k > 0 {
                    acc = (-t * (x - prev_x)).exp() * (acc + prev_w);
                    cross += w * acc;
                }
                prev_x = x;
                prev_w = w;
            }
        }
    }
    (0.5 * own - cross) / pairs
}

/// `Û_c(t)`: the IPCW U-empirical Laplace process.
pub fn u_statistic_process(sample: &CensoredSample, ch: Characterization, t: f64) -> Result<f64> {
    let ev = weighted_events(sample)?;
    Ok(u_process(&ev, ch, pair_count(sample.len()), t))
}

/// Exponents and coefficients of `Û_c(t) = Σ_k coef_k e^{-c_k t}`.
fn exponential_terms(ev: &[(f64, f64)], ch: Characterization, pairs: f64) -> Vec<(f64, f64)> {
    let total: f64 = ev.iter().map(|e| e.1).sum();
    let mut terms: Vec<(f64, f64)> = ev.iter().map(|&(x, w)| (x, 0.5 * w * (total - w) / pairs)).collect();
    for (i, &(xi, wi)) in ev.iter().enumerate() {
        for &(xj, wj) in &ev[i + 1..] {
            terms.push((ch.psi(xi, xj), -wi * wj / pairs));
        }
    }
    terms
}

fn two_sum(x: f64, y: f64) -> (f64, f64) {
    let s = x + y;
    let z = s - x;
    (s, (x - (s - z)) + (y - z))
}

/// `bu bv / (a + cu + cv)` as an unevaluated sum `hi + lo`.
fn gram_term(bu: f64, bv: f64, cu: f64, cv: f64, a: f64) -> (f64, f64) {
    let (d1, e1) = two_sum(a, cu);
    let (d, e2) = two_sum(d1, cv);
    let d_lo = e1 + e2;
    let p = bu * bv;
    let p_lo = bu.mul_add(bv, -p);
    let q = p / d;
    let r = (-q).mul_add(d, p) + p_lo - q * d_lo;
    (q, r / d)
}

/// Neumaier-compensated accumulator.
#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `M̂`: `∫_0^∞ Û_c(t)² e^{-a t} dt`.
pub fn m_statistic(sample: &CensoredSample, ch: Characterization, a: f64, method: MMethod) -> Result<f64> {
    if !(a > 0.0) {
        return input(format!("tuning parameter a must be positive, got {a}"));
    }
    let ev = weighted_events(sample)?;
    let pairs = pair_count(sample.len());
    let value = match method {
        MMethod::ClosedForm => {
            // The Gram sum cancels down to a tiny value, so each term is kept in double-double.
            let terms = exponential_terms(&ev, ch, 1.0);
            let mut acc = Compensated::default();
            for (u, &(cu, bu)) in terms.iter().enumerate() {
                let (hi, lo) = gram_term(bu, bu, cu, cu, a);
                acc.add(hi);
                acc.add(lo);
                for &(cv, bv) in &terms[u + 1..] {
                    let (hi, lo) = gram_term(bu, bv, cu, cv, a);
                    acc.add(2.0 * hi);
                    acc.add(2.0 * lo);
                }
            }
            acc.value() / (pairs * pairs)
        }
        MMethod::Quadrature(k) => {
            if k == 0 {
                return input("quadrature needs at least one node");
            }
            let rule = GaussLaguerre::cached(k);
            rule.integrate(a, |t| {
                let u = u_process(&ev, ch, pairs, t);
                u * u
            })
        }
    };
    Ok(value.max(0.0))
}

/// Koziol–Green Cramér–von Mises statistic `∫ (F̃_n(t) - F_0(t))² dF_0(t)`
/// with `F_0` exponential of mean `mu` and `F̃_n` the Kaplan–Meier CDF set to
/// one from the largest observation on.
pub fn cvm_koziol(sample: &CensoredSample, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return input(format!("mu must be positive, got {mu}"));
    }
    let km = kaplan_meier(sample, Target::Event)?;
    let last = sample.times().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Pieces (start, survival value); the final piece from `last` has survival 0.
    let mut pieces = vec![(0.0, 1.0)];
    for (&p, &v) in km.jump_points().iter().zip(km.values()) {
        if p < last {
            pieces.push((p, v));
        }
    }
    pieces.push((last, 0.0));
    Ok(cvm_piecewise(&pieces, mu))
}

/// `∫ (e^{-t/μ} - v(t))² e^{-t/μ} dt` for a piecewise-constant survival `v`
/// given as `(start, value)` pieces, the last extending to infinity.
fn cvm_piecewise(pieces: &[(f64, f64)], mu: f64) -> f64 {
    let mut total = 0.0;
    for (k, &(start, v)) in pieces.iter().enumerate() {
        let ea = (-start / mu).exp();
        let eb = pieces.get(k + 1).map_or(0.0, |&(end, _)| (-end / mu).exp());
        total += mu * ((ea.powi(3) - eb.powi(3)) / 3.0 - v * (ea * ea - eb * eb) + v * v * (ea - eb));
    }
    total
}

/// Equiprobable exponential cells `[q_{j-1}, q_j)` and the quantities
/// `N_1j` (uncensored counts) and `b_j = ∫_{A_j} (1 - Ĥ)`.
fn chi2_cells(sample: &CensoredSample, mu: f64, r: usize) -> (Vec<f64>, Vec<f64>) {
    let bounds: Vec<f64> = (0..=r)
        .map(|j| if j == r { f64::INFINITY } else { -mu * (-(j as f64) / r as f64).ln_1p() })
        .collect();
    let n = sample.len() as f64;
    let mut counts = vec![0.0; r];
    let mut b = vec![0.0; r];
    for (&x, &d) in sample.times().iter().zip(sample.events()) {
        let cell = bounds[1..].partition_point(|&q| q <= x).min(r - 1);
        if d {
            counts[cell] += 1.0;
        }
        for j in 0..r {
            b[j] += (x.min(bounds[j + 1]) - x.min(bounds[j])) / n;
        }
    }
    (counts, b)
}

/// Akritas' Pearson-type chi-square statistic with `r` equiprobable cells.
///
/// Simple hypothesis: `Σ_j (N_1j - n p̂_1j)² / (n p̂_1j)`, asymptotically `χ²_r`.
/// Composite: the quadratic form `Ṽ' A Ṽ` with `A` the Moore–Penrose inverse of
/// `Σ̂ - B̂ Î B̂'`, asymptotically `χ²_{r-1}`.
pub fn akritas_chi2(sample: &CensoredSample, hypothesis: Hypothesis, r: usize) -> Result<f64> {
    if r < 2 {
        return input(format!("chi-square test needs r >= 2 cells, got {r}"));
    }
    let n = sample.len() as f64;
    match hypothesis {
        Hypothesis::Simple { mu } => {
            if !(mu > 0.0) {
                return input(format!("mu must be positive, got {mu}"));
            }
            let (counts, b) = chi2_cells(sample, mu, r);
            let mut stat = 0.0;
            for (j, (&nj, &bj)) in counts.iter().zip(&b).enumerate() {
                let expected = n * bj / mu;
                if !(expected > 0.0) {
                    return Err(Error::DegenerateCell { cell: j });
                }
                stat += (nj - expected).powi(2) / expected;
            }
            Ok(stat)
        }
        Hypothesis::Composite => {
            let mu = censored_exp_mle(sample)?;
            let rate = 1.0 / mu;
            let (counts, b) = chi2_cells(sample, mu, r);
            let p: Vec<f64> = b.iter().map(|bj| rate * bj).collect();
            if let Some(j) = p.iter().position(|&pj| !(pj > 0.0)) {
                return Err(Error::DegenerateCell { cell: j });
            }
            let frac_events = sample.event_count() as f64 / n;
            // Asymptotic variance of the rate MLE per observation.
            let inv_info = rate * rate / frac_events;
            let bv = DVector::from_vec(b);
            let cov = DMatrix::from_diagonal(&DVector::from_vec(p.clone())) - &bv * bv.transpose() * inv_info;
            let pinv = cov.pseudo_inverse(1e-10).map_err(|e| Error::Input(e.to_string()))?;
            let v = DVector::from_iterator(r, counts.iter().zip(&p).map(|(nj, pj)| (nj - n * pj) / n.sqrt()));
            Ok((v.transpose() * pinv * v)[(0, 0)].max(0.0))
        }
    }
}

/// Asymptotic reference degrees of freedom of the chi-square test.
pub fn akritas_df(hypothesis: Hypothesis, r: usize) -> f64 {
    if hypothesis.is_composite() {
        (r - 1) as f64
    } else {
        r as f64
    }
}

/// Maximal-correlation statistic `Q_n = Σ_{i≠j} ω_i ω_j k(Y_i, Y_j)` with
/// `Y_i = 1 - e^{-X_i/μ}` and `ω_i` the Kaplan–Meier masses.
pub fn qn_raw(sample: &CensoredSample, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return input(format!("mu must be positive, got {mu}"));
    }
    let w = km_masses(sample)?;
    let pts: Vec<(f64, f64)> = sample
        .times()
        .iter()
        .zip(&w)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| (-(-x / mu).exp_m1(), w))
        .collect();
    let mut q = 0.0;
    for (i, &(yi, wi)) in pts.iter().enumerate() {
        let mut row = 0.0;
        for (j, &(yj, wj)) in pts.iter().enumerate() {
            if i != j {
                row += wj * if yj <= yi { 6.0 * yi - 2.0 } else { -6.0 * yi };
            }
        }
        q += wi * row;
    }
    Ok(q)
}

/// Plug-in estimate of the asymptotic variance of `√n Q_n` under the null.
///
/// Uses the IPCW linearization of `∫ k1 dF_n` with the projection
/// `k1(y) = 3y² - 3y + 1/2` of the symmetrized kernel `3|y - y'| - 1`.
pub fn qn_variance(sample: &CensoredSample, mu: f64) -> Result<f64> {
    let n = sample.len();
    let k_left = censoring_survival_left(sample);
    let at_risk = sample.at_risk();
    let k1 = |y: f64| 3.0 * y * y - 3.0 * y + 0.5;
    // ∫_{v}^{1} k1 = -(v³ - 1.5 v² + 0.5 v)
    let tail = |v: f64| -(v * v * v - 1.5 * v * v + 0.5 * v);
    let order = sample.order();
    let times = sample.times();
    let events = sample.events();

    let mut omega = vec![0.0; n];
    for i in 0..n {
        if !events[i] {
            let v = -(-times[i] / mu).exp_m1();
            let denom = (1.0 - v) * k_left[i];
            if !(denom > 0.0) {
                return Err(Error::TailDomain { u: times[i] });
            }
            omega[i] = tail(v) / denom;
        }
    }
    let xi = influence_terms(times, events, &order, &k_left, &at_risk, &omega, |i| {
        k1(-(-times[i] / mu).exp_m1())
    })?;
    Ok(4.0 * variance(&xi))
}

/// Standardized maximal-correlation statistic `Q_n^S = √n Q_n / σ_n`.
pub fn qn_statistic(sample: &CensoredSample, mu: f64) -> Result<f64> {
    let q = qn_raw(sample, mu)?;
    let var = qn_variance(sample, mu)?;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok((sample.len() as f64).sqrt() * q / var.sqrt())
}

/// Per-unit IPCW influence terms
/// `g(X_i) δ_i / K̂_c(X_i-) + ω(X_i)(1 - δ_i) - Σ_j ω(X_j) 1{X_i ≥ X_j}(1 - δ_j)/Y(X_j)`.
///
/// `omega` must hold `ω(X_j)` at censored units (other entries are ignored).
pub(crate) fn influence_terms<G: Fn(usize) -> f64>(
    times: &[f64],
    events: &[bool],
    order: &[usize],
    k_left: &[f64],
    at_risk: &[usize],
    omega: &[f64],
    g: G,
) -> Result<Vec<f64>> {
    let n = times.len();
    let mut out = vec![0.0; n];
    let mut cum = 0.0;
    let mut k = 0;
    while k < n {
        let t = times[order[k]];
        let mut end = k;
        while end < n && times[order[end]] == t {
            let j = order[end];
            if !events[j] {
                cum += omega[j] / at_risk[j] as f64;
            }
            end += 1;
        }
        for &i in &order[k..end] {
            let direct = if events[i] {
                if !(k_left[i] > 0.0) {
                    return Err(Error::DegenerateWeight { time: times[i] });
                }
                g(i) / k_left[i]
            } else {
                omega[i]
            };
            out[i] = direct - cum;
        }
        k = end;
    }
    Ok(out)
}

pub(crate) fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| x * x).sum::<f64>() / n - mean * mean).max(0.0)
}

/// DMTTF statistic: `(1/C(n,2)) Σ_{i<j} δ_iδ_j/(K̂_c(X_i)K̂_c(X_j)) (2 min - (X_i+X_j)/2)`,
/// weighted by the censoring survival at `X_i` itself (not its left limit).
pub fn delta_statistic(sample: &CensoredSample) -> Result<f64> {
    let km = kaplan_meier(sample, Target::Censoring)?;
    let mut ev = Vec::with_capacity(sample.len());
    for (&x, &d) in sample.times().iter().zip(sample.events()) {
        if d {
            let k = km.eval(x);
            if !(k > 0.0) {
                return Err(Error::DegenerateWeight { time: x });
            }
            ev.push((x, 1.0 / k));
        }
    }
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = ev.iter().map(|e| e.1).sum();
    let mut suffix = total;
    let mut acc = 0.0;
    for &(x, w) in &ev {
        suffix -= w;
        // Σ_{i<j} w_i w_j 2 x_i  -  ½ Σ_{i<j} w_i w_j (x_i + x_j)
        acc += 2.0 * w * x * suffix - 0.5 * w * x * (total - w);
    }
    Ok(acc / pair_count(sample.len()))
}
