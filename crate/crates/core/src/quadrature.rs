//! Gauss–Laguerre quadrature for integrals against `e^{-a t}` on `[0, ∞)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;

/// Nodes and weights for `∫_0^∞ f(s) e^{-s} ds ≈ Σ w_k f(s_k)`.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Laguerre polynomials `(L_n(x), L_{n-1}(x))` by the three-term recurrence,
/// returned as `e^{log_scale}` times the first two fields.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    let mut log_scale = 0.0;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, log_scale)
}

impl GaussLaguerre {
    /// Build an `n`-point rule. Nodes start from the Golub–Welsch eigenvalues
    /// and are polished by Newton steps on `L_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Laguerre rule needs at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (2 * i + 1) as f64
            } else if i + 1 == j || j + 1 == i {
                (i.max(j)) as f64
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let nf = n as f64;
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..8 {
                let (ln, lm1, _) = laguerre_pair(n, *x);
                let deriv = nf * (ln - lm1) / *x;
                let step = ln / deriv;
                *x -= step;
                if step.abs() <= 1e-15 * x.abs() {
                    break;
                }
            }
            let (ln, lm1, log_scale) = laguerre_pair(n, *x);
            let deriv = nf * (ln - lm1) / *x;
            weights.push((-2.0 * log_scale).exp() / (*x * deriv * deriv));
        }
        GaussLaguerre { nodes, weights }
    }

    /// Shared, lazily built rule of size `n`.
    pub fn cached(n: usize) -> Arc<GaussLaguerre> {
        static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussLaguerre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(rule) = cache.read().expect("quadrature cache poisoned").get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussLaguerre::new(n));
        cache
            .write()
            .expect("quadrature cache poisoned")
            .entry(n)
            .or_insert(rule)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights rescaled for the weight function `e^{-a t}`.
    pub fn scaled(&self, a: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.nodes.iter().map(|s| s / a).collect(),
            self.weights.iter().map(|w| w / a).collect(),
        )
    }

    /// `∫_0^∞ f(t) e^{-a t} dt`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(s / a))
            .sum::<f64>()
            / a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_are_factorials() {
        for n in [8usize, 64, 100, 128, 512] {
            let rule = GaussLaguerre::new(n);
            let mut fact = 1.0;
            for k in 0..12 {
                if k > 0 {
                    fact *= k as f64;
                }
                let m: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k))
                    .sum();
                assert!((m / fact - 1.0).abs() < 1e-11, "n={n} k={k} m={m}");
            }
        }
    }

    #[test]
    fn scaled_weight_integrates_exponentials() {
        let rule = GaussLaguerre::cached(64);
        let v = rule.integrate(2.0, |t| (-3.0 * t).exp());
        assert!((v - 0.2).abs() < 1e-14);
    }
}
