//! Large-sample approximations: influence terms of the IPCW statistics, the
//! covariance of the limiting process of `√n Û_c(t)`, the asymptotic variance
//! of `√n Ĵ` and the eigenvalues governing the limit law of `n M̂`.

use nalgebra::DMatrix;

use crate::error::{input, Error, Result};
use crate::kernels::{h1_projection, h1_tail, phi1_projection, phi1_tail, Characterization};
use crate::quadrature::GaussLaguerre;
use crate::special::{norm_quantile, norm_sf};
use crate::statistics::{
    check_alpha, influence_terms, j_statistic, variance, CriticalValues, Hypothesis, OutcomeMeta, StatisticSpec,
    TestOutcome,
};
use crate::survival::{censored_exp_mle, censoring_survival_left, kaplan_meier, CensoredSample, Target};

/// Estimated covariance of the limiting process on a grid of `t` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub t_grid: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// `ω̂(u; t) = ∫_u^∞ h1(x; t) dF(x) / ((1 - F(u)) K̂_c(u-))` under the Exp(1) null.
pub fn omega_hat(sample: &CensoredSample, ch: Characterization, u: f64, t: f64) -> Result<f64> {
    if !(u >= 0.0 && t >= 0.0) {
        return input(format!("u and t must be nonnegative, got u = {u}, t = {t}"));
    }
    let k = kaplan_meier(sample, Target::Censoring)?.eval_left(u);
    omega_with(u, k, |u| h1_tail(ch, u, t))
}

fn omega_with<T: Fn(f64) -> f64>(u: f64, k_left: f64, tail: T) -> Result<f64> {
    let denom = (-u).exp() * k_left;
    if !(denom > 0.0) {
        return Err(Error::TailDomain { u });
    }
    Ok(tail(u) / denom)
}

/// Influence terms for a projection `g` with Exp(1) tail integral `tail`.
fn zeta_generic<G, T>(sample: &CensoredSample, g: G, tail: T) -> Result<Vec<f64>>
where
    G: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let times = sample.times();
    let events = sample.events();
    let k_left = censoring_survival_left(sample);
    let mut omega = vec![0.0; times.len()];
    for i in 0..times.len() {
        if !events[i] {
            omega[i] = omega_with(times[i], k_left[i], &tail)?;
        }
    }
    influence_terms(times, events, &sample.order(), &k_left, &sample.at_risk(), &omega, |i| g(times[i]))
}

/// `ζ̂_i(t)` for every unit of the sample.
pub fn zeta_all(sample: &CensoredSample, ch: Characterization, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return input(format!("t must be nonnegative, got {t}"));
    }
    zeta_generic(sample, |x| h1_projection(ch, x, t), |u| h1_tail(ch, u, t))
}

/// `ζ̂_i(t) = h1(X_i;t) δ_i / K̂_c(X_i-) + ω̂(X_i;t)(1-δ_i) - Σ_j ω̂(X_j;t) 1{X_i ≥ X_j}(1-δ_j)/Y(X_j)`.
pub fn zeta_hat(sample: &CensoredSample, ch: Characterization, i: usize, t: f64) -> Result<f64> {
    if i >= sample.len() {
        return input(format!("index {i} out of range for a sample of size {}", sample.len()));
    }
    Ok(zeta_all(sample, ch, t)?[i])
}

/// `ĉov(η(t1), η(t2)) = (4/n) Σ_i ζ̂_i(t1) ζ̂_i(t2)`, projected onto the PSD cone.
pub fn covariance_estimate(sample: &CensoredSample, ch: Characterization, t_grid: &[f64]) -> Result<CovEstimate> {
    if t_grid.is_empty() {
        return input("covariance grid must be nonempty");
    }
    let n = sample.len();
    let cols = t_grid.iter().map(|&t| zeta_all(sample, ch, t)).collect::<Result<Vec<_>>>()?;
    let z = DMatrix::from_fn(n, t_grid.len(), |i, k| cols[k][i]);
    let raw = z.transpose() * &z * (4.0 / n as f64);
    Ok(CovEstimate { t_grid: t_grid.to_vec(), matrix: psd_projection(raw) })
}

fn psd_projection(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Estimated asymptotic variance of `√n Ĵ` under the null:
/// `4 (mean(ξ²) - mean(ξ)²)` with `ξ_i` the influence terms of `Φ1`.
pub fn sigma2_j(sample: &CensoredSample, ch: Characterization, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return input(format!("tuning parameter a must be positive, got {a}"));
    }
    let xi = zeta_generic(sample, |x| phi1_projection(ch, x, a), |u| phi1_tail(ch, u, a))?;
    Ok(4.0 * variance(&xi))
}

/// Normal-approximation test rejecting when `|√n Ĵ / σ̂| > z_{1-α/2}`.
///
/// The reported rejection band is on the scale of `Ĵ` itself. Under the
/// composite hypothesis the sample is rescaled by the censored MLE first; the
/// extra variability from estimating the scale is not accounted for.
pub fn j_asymptotic_test(
    sample: &CensoredSample,
    ch: Characterization,
    a: f64,
    alpha: f64,
    hypothesis: Hypothesis,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let n = sample.len();
    if n < 200 {
        log::warn!("normal approximation for J used with small n = {n}");
    }
    let (scaled, mu) = match hypothesis {
        Hypothesis::Simple { mu } => {
            if !(mu > 0.0) {
                return input(format!("mu must be positive, got {mu}"));
            }
            (sample.scaled(1.0 / mu), Some(mu))
        }
        Hypothesis::Composite => (sample.scaled(1.0 / censored_exp_mle(sample)?), None),
    };
    let stat = j_statistic(&scaled, ch, a)?;
    let s2 = sigma2_j(&scaled, ch, a)?;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let half = norm_quantile(1.0 - alpha / 2.0) * (s2 / n as f64).sqrt();
    let z = stat * (n as f64 / s2).sqrt();
    Ok(TestOutcome {
        statistic: stat,
        critical_values: CriticalValues::Absolute { upper: half },
        p_value: Some((2.0 * norm_sf(z.abs())).min(1.0)),
        reject: z.abs() > norm_quantile(1.0 - alpha / 2.0),
        meta: OutcomeMeta {
            spec: StatisticSpec::j(ch, a).to_string(),
            method: "asymptotic-normal".into(),
            hypothesis: hypothesis.name().into(),
            mu,
            alpha,
            n,
            b: None,
            seed: None,
            skipped: 0,
        },
    })
}

/// Gauss–Laguerre grid for weight `e^{-a t}` on which covariance estimates
/// must be built before calling [`limiting_eigenvalues`].
pub fn laguerre_grid(a: f64, nodes: usize) -> Vec<f64> {
    GaussLaguerre::cached(nodes).scaled(a).0
}

/// Leading eigenvalues of `A q(t1) = ∫ ĉov(t1, t2) q(t2) e^{-a t2} dt2` by
/// Nyström discretization on the Gauss–Laguerre grid of `cov`.
pub fn limiting_eigenvalues(cov: &CovEstimate, a: f64, k: usize) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return input(format!("tuning parameter a must be positive, got {a}"));
    }
    let m = cov.t_grid.len();
    if k > m {
        return input(format!("requested {k} eigenvalues from a grid of {m} nodes"));
    }
    if cov.matrix.nrows() != m || cov.matrix.ncols() != m {
        return input("covariance matrix does not match its grid");
    }
    let (nodes, weights) = GaussLaguerre::cached(m).scaled(a);
    let matches = nodes.iter().zip(&cov.t_grid).all(|(x, t)| (x - t).abs() <= 1e-12 * x.max(1.0));
    if !matches {
        return input("covariance grid is not the Gauss-Laguerre grid for this a");
    }
    let root: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    // Nodes far out in the tail carry weights down to 1e-160; the eigensolver
    // misbehaves on such graded matrices. For a PSD kernel, dropping nodes
    // whose weighted diagonal is negligible perturbs the spectrum by at most
    // their combined diagonal mass.
    let diag: Vec<f64> = (0..m).map(|i| weights[i] * cov.matrix[(i, i)]).collect();
    let top = diag.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Ok(vec![0.0; k]);
    }
    let keep: Vec<usize> = (0..m).filter(|&i| diag[i] > 1e-40 * top).collect();
    let op = DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
        let (p, q) = (keep[i], keep[j]);
        root[p] * cov.matrix[(p, q)] * root[q]
    });
    let mut eig: Vec<f64> = op.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0)).collect();
    eig.resize(m, 0.0);
    eig.sort_by(|x, y| y.total_cmp(x));
    eig.truncate(k);
    Ok(eig)
}

/// Discretized trace `∫ ĉov(t, t) e^{-a t} dt` on the grid of `cov`.
pub fn discretized_trace(cov: &CovEstimate, a: f64) -> f64 {
    let (_, weights) = GaussLaguerre::cached(cov.t_grid.len()).scaled(a);
    weights.iter().enumerate().map(|(i, w)| w * cov.matrix[(i, i)]).sum()
}
