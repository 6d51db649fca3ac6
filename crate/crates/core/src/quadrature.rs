//! Adaptive composite Gauss-Legendre quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// found by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct AdaptiveGaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveGaussLegendre {
    fn default() -> Self {
        Self::new(10, 1e-9)
    }
}

impl AdaptiveGaussLegendre {
    pub fn new(order: usize, rel_tol: f64) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights, rel_tol, abs_tol: 1e-300, max_depth: 40 }
    }

    fn rule<F: FnMut(f64) -> Result<f64>>(&self, f: &mut F, a: f64, b: f64) -> Result<f64> {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x)?;
        }
        Ok(s * h)
    }

    /// Integrates `f` over `[a, b]`. An interval is accepted when the rule on
    /// it and the sum over its two halves agree to within its share of the
    /// tolerance.
    pub fn integrate<F: FnMut(f64) -> Result<f64>>(&self, mut f: F, a: f64, b: f64) -> Result<Integral> {
        if a == b {
            return Ok(Integral { value: 0.0, error_estimate: 0.0, evaluations: 0 });
        }
        let n = self.nodes.len();
        let whole = self.rule(&mut f, a, b)?;
        let mut evaluations = n;
        let mut stack = vec![(a, b, whole, 0usize)];
        let mut value = 0.0;
        let mut error = 0.0;
        let mut scale = whole.abs();
        let mut failed = false;
        while let Some((lo, hi, est, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let left = self.rule(&mut f, lo, mid)?;
            let right = self.rule(&mut f, mid, hi)?;
            evaluations += 2 * n;
            let refined = left + right;
            let diff = (refined - est).abs();
            scale = scale.max(refined.abs());
            let share = (hi - lo) / (b - a).abs();
            let tol = (self.rel_tol * scale).max(self.abs_tol) * share;
            if diff <= tol || depth >= self.max_depth {
                failed |= diff > tol;
                value += refined;
                error += diff;
            } else {
                stack.push((mid, hi, right, depth + 1));
                stack.push((lo, mid, left, depth + 1));
            }
        }
        let requested = (self.rel_tol * value.abs()).max(self.abs_tol);
        if failed && error > requested {
            return Err(Error::QuadratureNonConvergence { achieved: error / value.abs().max(f64::MIN_POSITIVE), requested: self.rel_tol });
        }
        Ok(Integral { value, error_estimate: error, evaluations })
    }
}
