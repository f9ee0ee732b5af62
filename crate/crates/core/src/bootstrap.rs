//! Parametric bootstrap calibration: exponential lifetimes under the null,
//! censoring resampled from the reversed-role Kaplan–Meier estimate.

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::unit_exponential;
use crate::error::{input, Error, Result};
use crate::rng::stream;
use crate::statistics::{check_alpha, CriticalValues, Hypothesis, OutcomeMeta, Sidedness, StatisticSpec, TestOutcome};
use crate::survival::{censored_exp_mle, kaplan_meier, CensoredSample, StepFn, Target};

/// Largest tolerated fraction of failed bootstrap iterations.
const MAX_SKIP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub b: usize,
    pub alpha: f64,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(b: usize, alpha: f64, hypothesis: Hypothesis, seed: u64) -> Result<Self> {
        let cfg = BootstrapConfig { b, alpha, hypothesis, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 100 {
            return input(format!("bootstrap needs B >= 100, got {}", self.b));
        }
        check_alpha(self.alpha)?;
        if let Hypothesis::Simple { mu } = self.hypothesis {
            if !(mu > 0.0 && mu.is_finite()) {
                return input(format!("mu must be positive, got {mu}"));
            }
        }
        Ok(())
    }
}

/// Bootstrap distribution of one statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    /// Successful replicates, sorted ascending.
    pub replicates: Vec<f64>,
    pub skipped: usize,
}

impl BootstrapDistribution {
    /// Critical value(s) by the order-statistic convention: the upper value is
    /// `T*_(⌈(1-α)(B+1)⌉)` for one-sided tests (taken over `|T*|` for absolute
    /// ones) and the band is `(T*_(⌊(α/2)(B+1)⌋), T*_(⌈(1-α/2)(B+1)⌉))`.
    pub fn critical_values(&self, alpha: f64, sidedness: Sidedness) -> CriticalValues {
        let b = self.replicates.len();
        let at = |v: &[f64], k: usize| v[k.clamp(1, b) - 1];
        let up = |q: f64| (q * (b + 1) as f64 - 1e-9).ceil() as usize;
        match sidedness {
            Sidedness::Upper => CriticalValues::Upper { upper: at(&self.replicates, up(1.0 - alpha)) },
            Sidedness::Absolute => CriticalValues::Absolute { upper: at(&self.absolute(), up(1.0 - alpha)) },
            Sidedness::TwoSided => {
                let lo = ((alpha / 2.0) * (b + 1) as f64 + 1e-9).floor() as usize;
                CriticalValues::Band {
                    lower: at(&self.replicates, lo),
                    upper: at(&self.replicates, up(1.0 - alpha / 2.0)),
                }
            }
        }
    }

    /// `(1 + #{T* ≥ T}) / (B + 1)`, on `|T|` for absolute tests; two-sided
    /// tests double the smaller tail.
    pub fn p_value(&self, stat: f64, sidedness: Sidedness) -> f64 {
        let b = self.replicates.len();
        let upper_tail = |v: &[f64], t: f64| (1 + b - v.partition_point(|&x| x < t)) as f64 / (b + 1) as f64;
        match sidedness {
            Sidedness::Upper => upper_tail(&self.replicates, stat),
            Sidedness::Absolute => upper_tail(&self.absolute(), stat.abs()),
            Sidedness::TwoSided => {
                let at_most = self.replicates.partition_point(|&v| v <= stat);
                let lower = (1 + at_most) as f64 / (b + 1) as f64;
                (2.0 * upper_tail(&self.replicates, stat).min(lower)).min(1.0)
            }
        }
    }

    fn absolute(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.replicates.iter().map(|x| x.abs()).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Censoring CDF `G_n = 1 - K̂_c`. It is defective when the largest
/// observation is a failure; the missing mass lies beyond every observation.
pub fn censoring_cdf(sample: &CensoredSample) -> Result<StepFn> {
    let km = kaplan_meier(sample, Target::Censoring)?;
    StepFn::new(km.jump_points().to_vec(), km.values().iter().map(|s| 1.0 - s).collect(), 0.0)
}

/// Exponential mean used to draw null lifetimes.
fn null_mean(sample: &CensoredSample, hypothesis: Hypothesis) -> Result<f64> {
    match hypothesis {
        Hypothesis::Simple { mu } => Ok(mu),
        Hypothesis::Composite => censored_exp_mle(sample),
    }
}

/// One bootstrap sample: `X* = min(X'*, C*)`, `δ* = 1{X'* ≤ C*}`.
fn resample<R: Rng + ?Sized>(g: &StepFn, mean: f64, n: usize, rng: &mut R) -> Result<CensoredSample> {
    let (times, events): (Vec<f64>, Vec<bool>) = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            // draws in the defective tail leave the unit uncensored
            let k = g.values().partition_point(|&v| v <= u);
            let c = g.jump_points().get(k).copied().unwrap_or(f64::INFINITY);
            let x = mean * unit_exponential(rng);
            if x <= c {
                (x, true)
            } else {
                (c, false)
            }
        })
        .unzip();
    CensoredSample::new(times, events)
}

/// Bootstrap distributions of several statistics computed on shared resamples.
///
/// Iteration `b` draws from the stream `(cfg.seed, b)`, so the result does not
/// depend on how iterations are scheduled across threads.
pub fn bootstrap_distributions(
    sample: &CensoredSample,
    specs: &[StatisticSpec],
    cfg: &BootstrapConfig,
) -> Result<Vec<BootstrapDistribution>> {
    bootstrap_distributions_each(sample, specs, cfg)?.into_iter().collect()
}

/// Like [`bootstrap_distributions`], with a separate outcome per statistic so
/// one degenerate statistic does not discard the others.
pub fn bootstrap_distributions_each(
    sample: &CensoredSample,
    specs: &[StatisticSpec],
    cfg: &BootstrapConfig,
) -> Result<Vec<Result<BootstrapDistribution>>> {
    cfg.validate()?;
    for spec in specs {
        spec.validate()?;
    }
    let g = censoring_cdf(sample)?;
    let mean = null_mean(sample, cfg.hypothesis)?;
    let n = sample.len();
    let rows: Vec<Vec<Option<f64>>> = (0..cfg.b)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(cfg.seed, &[b as u64]);
            match resample(&g, mean, n, &mut rng) {
                Ok(star) => specs
                    .iter()
                    .map(|spec| match spec.evaluate(&star, cfg.hypothesis) {
                        Ok(v) if v.is_finite() => Some(v),
                        Ok(v) => {
                            log::debug!("bootstrap iteration {b}: {spec} is not finite ({v})");
                            None
                        }
                        Err(e) => {
                            log::debug!("bootstrap iteration {b}: {spec} failed: {e}");
                            None
                        }
                    })
                    .collect(),
                Err(e) => {
                    log::debug!("bootstrap iteration {b}: resample failed: {e}");
                    vec![None; specs.len()]
                }
            }
        })
        .collect();
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut reps: Vec<f64> = rows.iter().filter_map(|r| r[k]).collect();
            let skipped = cfg.b - reps.len();
            if skipped > 0 {
                log::debug!("bootstrap for {spec}: skipped {skipped} of {} iterations", cfg.b);
            }
            if skipped as f64 > MAX_SKIP_FRACTION * cfg.b as f64 {
                return Err(Error::BootstrapDegenerate { skipped, total: cfg.b });
            }
            reps.sort_by(f64::total_cmp);
            Ok(BootstrapDistribution { replicates: reps, skipped })
        })
        .collect())
}

/// Bootstrap critical value(s) of `spec` for `sample`.
pub fn bootstrap_critical_values(
    sample: &CensoredSample,
    spec: &StatisticSpec,
    cfg: &BootstrapConfig,
) -> Result<CriticalValues> {
    let dist = bootstrap_distributions(sample, std::slice::from_ref(spec), cfg)?;
    Ok(dist[0].critical_values(cfg.alpha, spec.sidedness()))
}

/// Bootstrap tests of several statistics sharing the same resamples.
pub fn bootstrap_tests(
    sample: &CensoredSample,
    specs: &[StatisticSpec],
    cfg: &BootstrapConfig,
) -> Result<Vec<TestOutcome>> {
    bootstrap_tests_each(sample, specs, cfg)?.into_iter().collect()
}

/// Bootstrap tests with a separate outcome per statistic.
pub fn bootstrap_tests_each(
    sample: &CensoredSample,
    specs: &[StatisticSpec],
    cfg: &BootstrapConfig,
) -> Result<Vec<Result<TestOutcome>>> {
    let dists = bootstrap_distributions_each(sample, specs, cfg)?;
    Ok(specs
        .iter()
        .zip(dists)
        .map(|(spec, dist)| {
            let stat = spec.evaluate(sample, cfg.hypothesis)?;
            let dist = dist?;
            let side = spec.sidedness();
            let crit = dist.critical_values(cfg.alpha, side);
            Ok(TestOutcome {
                statistic: stat,
                critical_values: crit,
                p_value: Some(dist.p_value(stat, side)),
                reject: crit.rejects(stat),
                meta: OutcomeMeta {
                    spec: spec.to_string(),
                    method: "bootstrap".into(),
                    hypothesis: cfg.hypothesis.name().into(),
                    mu: match cfg.hypothesis {
                        Hypothesis::Simple { mu } => Some(mu),
                        Hypothesis::Composite => None,
                    },
                    alpha: cfg.alpha,
                    n: sample.len(),
                    b: Some(cfg.b),
                    seed: Some(cfg.seed),
                    skipped: dist.skipped,
                },
            })
        })
        .collect())
}

/// Bootstrap test of one statistic.
pub fn bootstrap_test(sample: &CensoredSample, spec: &StatisticSpec, cfg: &BootstrapConfig) -> Result<TestOutcome> {
    Ok(bootstrap_tests(sample, std::slice::from_ref(spec), cfg)?.remove(0))
}
