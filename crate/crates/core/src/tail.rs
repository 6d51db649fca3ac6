//! Chernoff-type tail bounds built from the cumulant exponent
//! `Psi(u) = u^2 c2^2 / 2 + lambda (E[e^{uY}] - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::JumpLaw;
use crate::model::ModelSpec;
use crate::quadrature::AdaptiveGaussLegendre;

/// Fraction of the MGF domain used as the upper end of the root bracket
/// when the domain is bounded.
const POLE_MARGIN: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Clone, Debug)]
pub struct PsiFunction {
    c2: f64,
    lambda: f64,
    law: JumpLaw,
    sup: f64,
}

impl PsiFunction {
    /// Fails for multivariate laws and for laws without an MGF near zero.
    pub fn new(c2: f64, lambda: f64, law: JumpLaw) -> Result<Self> {
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::invalid(format!("diffusion bound c2 must be positive, got {c2}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("jump rate must be non-negative, got {lambda}")));
        }
        if law.dimension() != 1 {
            return Err(Error::Unsupported(format!("tail bounds need a one-dimensional jump law, got {}", law.name())));
        }
        // Without jumps Psi is a parabola on the whole line.
        let sup = if lambda == 0.0 { f64::INFINITY } else { law.mgf_sup() };
        if !(sup > 0.0) {
            return Err(Error::invalid("tail bounds need an MGF that is finite near zero (s > 0)"));
        }
        Ok(Self { c2, lambda, law, sup })
    }

    pub fn from_model(spec: &ModelSpec) -> Result<Self> {
        Self::new(spec.diffusion_bound, spec.jump_rate, spec.jump_law.clone())
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn law(&self) -> &JumpLaw {
        &self.law
    }
    /// Supremum `s` of the MGF domain.
    pub fn domain_sup(&self) -> f64 {
        self.sup
    }

    fn mgf(&self, u: f64, order: u32) -> Result<f64> {
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        self.law.mgf_derivative(u, order)
    }

    pub fn psi(&self, u: f64) -> Result<f64> {
        Ok(0.5 * u * u * self.c2 * self.c2 + self.lambda * (self.mgf(u, 0)? - 1.0))
    }

    pub fn psi_prime(&self, u: f64) -> Result<f64> {
        Ok(u * self.c2 * self.c2 + self.lambda * self.mgf(u, 1)?)
    }

    pub fn psi_second(&self, u: f64) -> Result<f64> {
        Ok(self.c2 * self.c2 + self.lambda * self.mgf(u, 2)?)
    }

    /// Largest argument used by the root solver: `s (1 - 2^-40)` for a
    /// bounded domain, infinity otherwise.
    fn bracket_end(&self) -> f64 {
        if self.sup.is_finite() {
            self.sup * (1.0 - POLE_MARGIN)
        } else {
            f64::INFINITY
        }
    }
}

/// Inverse of `Psi'` on `(0, s)`.
#[derive(Clone, Debug)]
pub struct ThetaSolver {
    psi: PsiFunction,
    /// Residual tolerance, scaled by `max(1, xi)`.
    pub abs_tol: f64,
    pub max_iterations: usize,
}

impl ThetaSolver {
    pub fn new(psi: PsiFunction) -> Self {
        Self { psi, abs_tol: 1e-12, max_iterations: 400 }
    }

    pub fn psi(&self) -> &PsiFunction {
        &self.psi
    }

    /// `theta(xi)`: the `u` with `Psi'(u) = xi`.
    ///
    /// Safeguarded Newton on the bracket `(0, min(xi / c2^2, s (1 - 2^-40)))`:
    /// a Newton step is taken only if it stays inside the bracket, reduces
    /// the residual and is at most half the previous step, otherwise the
    /// bracket is bisected. When `Psi'` stays
    /// below `xi` on the whole domain, `theta` saturates at the bracket end.
    pub fn theta(&self, xi: f64) -> Result<f64> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::invalid(format!("theta needs xi > 0, got {xi}")));
        }
        let pf = &self.psi;
        let tol = self.abs_tol * xi.max(1.0);
        let end = pf.bracket_end();
        let mut hi = (xi / (pf.c2 * pf.c2)).min(end);
        if hi == end && pf.psi_prime(end)? < xi {
            return Ok(end);
        }
        let mut lo = 0.0;
        let residual = |u: f64| -> Result<f64> { Ok(pf.psi_prime(u)? - xi) };

        // Psi' is convex on u > 0 for symmetric laws, so xi / Psi''(0)
        // approaches the root from the right.
        let mut u = (xi / pf.psi_second(0.0)?).min(hi);
        let mut f = residual(u)?;
        let mut last_step = hi;
        for _ in 0..self.max_iterations {
            if f.abs() <= tol {
                return Ok(u);
            }
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                // Bracket exhausted at double precision.
                return if f.abs() <= tol * 16.0 {
                    Ok(u)
                } else {
                    Err(Error::RootSolver { target: xi, reason: format!("bracket collapsed with residual {f:e}") })
                };
            }
            let newton = u - f / pf.psi_second(u)?;
            let (mut next, mut fn_) = (mid, f64::NAN);
            // Newton must also at least halve the step length, or a far
            // start on the steep side creeps towards the root.
            if newton > lo && newton < hi && 2.0 * (newton - u).abs() <= last_step {
                let fnewton = residual(newton)?;
                if fnewton.abs() < f.abs() {
                    next = newton;
                    fn_ = fnewton;
                }
            }
            if fn_.is_nan() {
                fn_ = residual(next)?;
            }
            last_step = (next - u).abs();
            u = next;
            f = fn_;
        }
        Err(Error::RootSolver { target: xi, reason: "iteration limit reached".into() })
    }

    /// `int_0^z theta(xi) d xi` by adaptive Gauss-Legendre quadrature with
    /// relative tolerance `1e-9`.
    pub fn theta_integral(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) || !z.is_finite() {
            return Err(Error::invalid(format!("theta integral needs z >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        let q = AdaptiveGaussLegendre::default();
        Ok(q.integrate(|xi| self.theta(xi), 0.0, z)?.value)
    }
}

/// `min(1, 2 exp(-t int_0^{r/t - c1} theta))`, or 1 when `r/t <= c1`.
pub fn tail_bound(solver: &ThetaSolver, c1: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !(r >= 0.0) || !(c1 >= 0.0) {
        return Err(Error::invalid(format!("tail bound needs t > 0, r >= 0, c1 >= 0 (t={t}, r={r}, c1={c1})")));
    }
    let z = r / t - c1;
    if z <= 0.0 {
        return Ok(1.0);
    }
    let i = solver.theta_integral(z)?;
    Ok((2.0 * (-t * i).exp()).min(1.0))
}

/// Constants of the tail-driven density upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperConstants {
    pub c_q_t: f64,
    pub q: f64,
}

impl UpperConstants {
    pub fn new(c_q_t: f64, q: f64) -> Result<Self> {
        if !(c_q_t > 0.0 && c_q_t.is_finite() && q > 1.0 && q.is_finite()) {
            return Err(Error::invalid(format!("need C_qT > 0 and q > 1, got C_qT={c_q_t}, q={q}")));
        }
        Ok(Self { c_q_t, q })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeValue {
    pub value: f64,
    /// False for `d > 1`, where `t^{d/2}` replaces `sqrt(t)` without proof.
    pub rigorous: bool,
}

/// `C_qT / t^{d/2} * tail_bound^{1/q}`.
pub fn density_upper_envelope(
    solver: &ThetaSolver,
    c1: f64,
    t: f64,
    r: f64,
    constants: UpperConstants,
    dimension: usize,
) -> Result<EnvelopeValue> {
    UpperConstants::new(constants.c_q_t, constants.q)?;
    if dimension == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let tail = tail_bound(solver, c1, t, r)?;
    Ok(EnvelopeValue {
        value: constants.c_q_t / t.powf(dimension as f64 / 2.0) * tail.powf(1.0 / constants.q),
        rigorous: dimension == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_solver() -> ThetaSolver {
        ThetaSolver::new(PsiFunction::new(1.0, 1.0, JumpLaw::gaussian(1.0).unwrap()).unwrap())
    }

    fn laplace_solver(mu: f64) -> ThetaSolver {
        ThetaSolver::new(PsiFunction::new(1.0, 1.0, JumpLaw::laplace(mu).unwrap()).unwrap())
    }

    #[test]
    fn psi_values() {
        let g = gaussian_solver();
        assert_eq!(g.psi().psi(0.0).unwrap(), 0.0);
        assert_eq!(g.psi().psi_prime(0.0).unwrap(), 0.0);
        assert!((g.psi().psi(1.0).unwrap() - (0.5 + 0.5f64.exp() - 1.0)).abs() < 1e-15);
        let l = laplace_solver(2.0);
        assert!((l.psi().psi_prime(1.0).unwrap() - (1.0 + 8.0 / 9.0)).abs() < 1e-15);
        assert!(l.psi().psi(2.0).is_err());
    }

    #[test]
    fn theta_residual_and_bracket() {
        let g = gaussian_solver();
        let th = g.theta(2.0).unwrap();
        assert!((th * (1.0 + (th * th / 2.0).exp()) - 2.0).abs() <= 1e-12);
        assert!(th > 0.0 && th < 2.0);
        let l = laplace_solver(1.0);
        assert!(l.theta(1e6).unwrap() > 0.99);
        assert!(l.theta(1e6).unwrap() < 1.0);
        assert!(g.theta(0.0).is_err());
        assert!(g.theta(-1.0).is_err());
    }

    #[test]
    fn theta_converges_from_far_starts() {
        // xi / Psi''(0) lands deep on the steep side for mid-range xi.
        let g = gaussian_solver();
        for k in 0..400 {
            let xi = 10f64.powf(-3.0 + 9.0 * k as f64 / 399.0);
            let th = g.theta(xi).unwrap();
            assert!((g.psi().psi_prime(th).unwrap() - xi).abs() <= 1e-12 * xi.max(1.0), "xi={xi}");
        }
    }

    #[test]
    fn brownian_tail_is_gaussian_chernoff() {
        let s = ThetaSolver::new(PsiFunction::new(1.5, 0.0, JumpLaw::gaussian(1.0).unwrap()).unwrap());
        for r in [0.5f64, 2.0, 7.0] {
            let t = 0.8;
            let expected = (2.0_f64 * (-r * r / (2.0 * t * 2.25)).exp()).min(1.0);
            assert!((tail_bound(&s, 0.0, t, r).unwrap() - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn integral_matches_legendre_identity() {
        // int_0^z theta = z theta(z) - Psi(theta(z)).
        for s in [gaussian_solver(), laplace_solver(1.0)] {
            for z in [0.1, 3.0, 40.0] {
                let th = s.theta(z).unwrap();
                let legendre = z * th - s.psi().psi(th).unwrap();
                let i = s.theta_integral(z).unwrap();
                assert!((i - legendre).abs() < 1e-9 * legendre, "z={z}: {i} vs {legendre}");
            }
        }
    }

    #[test]
    fn vacuous_regime() {
        let g = gaussian_solver();
        assert_eq!(tail_bound(&g, 0.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(tail_bound(&g, 2.0, 1.0, 1.5).unwrap(), 1.0);
        let c = UpperConstants::new(3.0, 2.0).unwrap();
        let e = density_upper_envelope(&g, 0.0, 0.25, 0.0, c, 1).unwrap();
        assert_eq!(e.value, 6.0);
        assert!(e.rigorous);
        assert!(!density_upper_envelope(&g, 0.0, 0.25, 0.0, c, 2).unwrap().rigorous);
        assert!(UpperConstants::new(1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_multivariate_laws() {
        let law = JumpLaw::product_laplace(vec![1.0, 1.0]).unwrap();
        assert!(matches!(PsiFunction::new(1.0, 1.0, law), Err(Error::Unsupported(_))));
    }
}
