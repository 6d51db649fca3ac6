//! Jump-diffusion model definition and probe-grid validation of the
//! standing assumptions (bounded drift, bounded and uniformly elliptic
//! diffusion, non-negative jump rate).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::laws::JumpLaw;

/// Scalar coefficient families with known bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarProfile {
    Constant(f64),
    /// `clamp(slope * x + intercept, lower, upper)`.
    AffineClamped { slope: f64, intercept: f64, lower: f64, upper: f64 },
    /// `base + amplitude * sin(frequency * x + phase)`.
    Trig { base: f64, amplitude: f64, frequency: f64, phase: f64 },
}

impl ScalarProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarProfile::Constant(c) => c,
            ScalarProfile::AffineClamped { slope, intercept, lower, upper } => (slope * x + intercept).clamp(lower, upper),
            ScalarProfile::Trig { base, amplitude, frequency, phase } => base + amplitude * (frequency * x + phase).sin(),
        }
    }

    /// Supremum of `|f|` over the real line.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            ScalarProfile::Constant(c) => c.abs(),
            ScalarProfile::AffineClamped { slope, intercept, lower, upper } => {
                if slope == 0.0 {
                    intercept.clamp(lower, upper).abs()
                } else {
                    lower.abs().max(upper.abs())
                }
            }
            ScalarProfile::Trig { base, amplitude, .. } => base.abs() + amplitude.abs(),
        }
    }

    /// Infimum of `|f|` over the real line.
    pub fn inf_abs(&self) -> f64 {
        match *self {
            ScalarProfile::Constant(c) => c.abs(),
            ScalarProfile::AffineClamped { slope, intercept, lower, upper } => {
                if slope == 0.0 {
                    intercept.clamp(lower, upper).abs()
                } else if lower <= 0.0 && upper >= 0.0 {
                    0.0
                } else {
                    lower.abs().min(upper.abs())
                }
            }
            ScalarProfile::Trig { base, amplitude, .. } => (base.abs() - amplitude.abs()).max(0.0),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalarProfile::Constant(_) => 0.0,
            ScalarProfile::AffineClamped { slope, .. } => slope.abs(),
            ScalarProfile::Trig { amplitude, frequency, .. } => (amplitude * frequency).abs(),
        }
    }

    fn is_constant(&self, value: f64) -> bool {
        match *self {
            ScalarProfile::Constant(c) => c == value,
            _ => false,
        }
    }
}

/// `b(x)` written into `out`.
pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `sigma(x)` written into `out` as a row-major `d x d` matrix.
pub type DiffusionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Drift {
    /// `b_i(x) = profile(x_i)`.
    Componentwise(ScalarProfile),
    Callback(DriftFn),
}

#[derive(Clone)]
pub enum Diffusion {
    /// Diagonal `sigma_ii(x) = profile(x_i)`.
    Diagonal(ScalarProfile),
    /// Constant matrix.
    Matrix(DMatrix<f64>),
    Callback(DiffusionFn),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Componentwise(p) => f.debug_tuple("Componentwise").field(p).finish(),
            Drift::Callback(_) => f.write_str("Callback(..)"),
        }
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Diagonal(p) => f.debug_tuple("Diagonal").field(p).finish(),
            Diffusion::Matrix(m) => f.debug_tuple("Matrix").field(m).finish(),
            Diffusion::Callback(_) => f.write_str("Callback(..)"),
        }
    }
}

/// The additive jump diffusion
/// `X_t = x + int sigma(X) dB + int b(X) ds + sum_{T_i <= t} Y_i`.
///
/// Immutable after construction; the bound fields hold either the declared
/// values or the ones derived from the coefficient catalog.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub dimension: usize,
    pub drift: Drift,
    pub diffusion: Diffusion,
    /// `c1 >= sup |b|`.
    pub drift_bound: f64,
    /// `c2 >= sup ||sigma||`.
    pub diffusion_bound: f64,
    /// `rho <= inf_{|xi|=1} |sigma(x) xi|^2`.
    pub ellipticity: f64,
    pub jump_rate: f64,
    pub jump_law: JumpLaw,
    pub horizon: f64,
}

pub struct ModelBuilder {
    dimension: usize,
    drift: Drift,
    diffusion: Diffusion,
    drift_bound: Option<f64>,
    diffusion_bound: Option<f64>,
    ellipticity: Option<f64>,
    jump_rate: f64,
    jump_law: Option<JumpLaw>,
    horizon: f64,
}

impl ModelBuilder {
    pub fn drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }
    pub fn diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = diffusion;
        self
    }
    pub fn drift_bound(mut self, c1: f64) -> Self {
        self.drift_bound = Some(c1);
        self
    }
    pub fn diffusion_bound(mut self, c2: f64) -> Self {
        self.diffusion_bound = Some(c2);
        self
    }
    pub fn ellipticity(mut self, rho: f64) -> Self {
        self.ellipticity = Some(rho);
        self
    }
    pub fn jump_rate(mut self, rate: f64) -> Self {
        self.jump_rate = rate;
        self
    }
    pub fn jump_law(mut self, law: JumpLaw) -> Self {
        self.jump_law = Some(law);
        self
    }
    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let d = self.dimension;
        let derived = derive_bounds(d, &self.drift, &self.diffusion);
        let pick = |declared: Option<f64>, derived: Option<f64>, name: &str| {
            declared.or(derived).ok_or_else(|| Error::invalid(format!("{name} must be declared for callback coefficients")))
        };
        let (c1, c2, rho) = match derived {
            Some((c1, c2, rho)) => (
                self.drift_bound.unwrap_or(c1),
                self.diffusion_bound.unwrap_or(c2),
                self.ellipticity.unwrap_or(rho),
            ),
            None => {
                let (d1, d2, d3) = partial_bounds(d, &self.drift, &self.diffusion);
                (
                    pick(self.drift_bound, d1, "drift bound")?,
                    pick(self.diffusion_bound, d2, "diffusion bound")?,
                    pick(self.ellipticity, d3, "ellipticity")?,
                )
            }
        };
        let jump_law = self.jump_law.ok_or_else(|| Error::invalid("jump law is required"))?;
        let spec = ModelSpec {
            dimension: d,
            drift: self.drift,
            diffusion: self.diffusion,
            drift_bound: c1,
            diffusion_bound: c2,
            ellipticity: rho,
            jump_rate: self.jump_rate,
            jump_law,
            horizon: self.horizon,
        };
        spec.check_parameters()?;
        Ok(spec)
    }
}

fn partial_bounds(d: usize, drift: &Drift, diffusion: &Diffusion) -> (Option<f64>, Option<f64>, Option<f64>) {
    let c1 = match drift {
        Drift::Componentwise(p) => Some((d as f64).sqrt() * p.sup_abs()),
        Drift::Callback(_) => None,
    };
    let (c2, rho) = match diffusion {
        Diffusion::Diagonal(p) => (Some(p.sup_abs()), Some(p.inf_abs().powi(2))),
        Diffusion::Matrix(m) => {
            let sv = m.clone().singular_values();
            let max = sv.iter().cloned().fold(0.0_f64, f64::max);
            let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            (Some(max), Some(min * min))
        }
        Diffusion::Callback(_) => (None, None),
    };
    (c1, c2, rho)
}

fn derive_bounds(d: usize, drift: &Drift, diffusion: &Diffusion) -> Option<(f64, f64, f64)> {
    match partial_bounds(d, drift, diffusion) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    }
}

impl ModelSpec {
    pub fn builder(dimension: usize) -> ModelBuilder {
        ModelBuilder {
            dimension,
            drift: Drift::Componentwise(ScalarProfile::Constant(0.0)),
            diffusion: Diffusion::Diagonal(ScalarProfile::Constant(1.0)),
            drift_bound: None,
            diffusion_bound: None,
            ellipticity: None,
            jump_rate: 0.0,
            jump_law: None,
            horizon: 1.0,
        }
    }

    /// `b = 0`, `sigma = I`: the heat kernel is exact.
    pub fn linear(law: JumpLaw, jump_rate: f64, horizon: f64) -> Result<Self> {
        Self::builder(law.dimension()).jump_law(law).jump_rate(jump_rate).horizon(horizon).build()
    }

    pub fn is_linear(&self) -> bool {
        let drift_zero = matches!(&self.drift, Drift::Componentwise(p) if p.is_constant(0.0));
        let diff_id = match &self.diffusion {
            Diffusion::Diagonal(p) => p.is_constant(1.0),
            Diffusion::Matrix(m) => *m == DMatrix::identity(self.dimension, self.dimension),
            Diffusion::Callback(_) => false,
        };
        drift_zero && diff_id
    }

    pub(crate) fn check_parameters(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(self.jump_rate >= 0.0 && self.jump_rate.is_finite()) {
            return Err(Error::invalid(format!("jump rate must be non-negative, got {}", self.jump_rate)));
        }
        if !(self.ellipticity > 0.0) {
            return Err(Error::invalid(format!("ellipticity must be positive, got {}", self.ellipticity)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.drift_bound >= 0.0) || !(self.diffusion_bound > 0.0) {
            return Err(Error::invalid("drift bound must be >= 0 and diffusion bound > 0"));
        }
        if self.jump_law.dimension() != self.dimension {
            return Err(Error::invalid(format!(
                "jump law dimension {} does not match model dimension {}",
                self.jump_law.dimension(),
                self.dimension
            )));
        }
        if let Diffusion::Matrix(m) = &self.diffusion {
            if m.nrows() != self.dimension || m.ncols() != self.dimension {
                return Err(Error::invalid("diffusion matrix has the wrong shape"));
            }
        }
        Ok(())
    }

    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            Drift::Componentwise(p) => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = p.eval(*xi);
                }
            }
            Drift::Callback(f) => f(x, out),
        }
    }

    /// `out = sigma(x) z`. `scratch` must hold `d * d` numbers for callbacks.
    pub fn diffusion_apply(&self, x: &[f64], z: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let d = self.dimension;
        match &self.diffusion {
            Diffusion::Diagonal(p) => {
                for i in 0..d {
                    out[i] = p.eval(x[i]) * z[i];
                }
            }
            Diffusion::Matrix(m) => {
                for i in 0..d {
                    out[i] = (0..d).map(|j| m[(i, j)] * z[j]).sum();
                }
            }
            Diffusion::Callback(f) => {
                f(x, scratch);
                for i in 0..d {
                    out[i] = (0..d).map(|j| scratch[i * d + j] * z[j]).sum();
                }
            }
        }
    }

    pub fn diffusion_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dimension;
        match &self.diffusion {
            Diffusion::Diagonal(p) => DMatrix::from_fn(d, d, |i, j| if i == j { p.eval(x[i]) } else { 0.0 }),
            Diffusion::Matrix(m) => m.clone(),
            Diffusion::Callback(f) => {
                let mut buf = vec![0.0; d * d];
                f(x, &mut buf);
                DMatrix::from_row_slice(d, d, &buf)
            }
        }
    }
}

/// Declared Lipschitz constant of the coefficients and the probe spacing.
/// Validation then checks every bound with margin `lipschitz * spacing`, so
/// that a pass carries over to any refinement of the probe grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeMargin {
    pub lipschitz: f64,
    pub spacing: f64,
}

impl ProbeMargin {
    fn value(&self) -> f64 {
        self.lipschitz * self.spacing
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The declared (or derived) constant being checked.
    pub bound: f64,
    /// Worst value seen over the probes.
    pub observed: f64,
    /// First probe at which the check failed.
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const BOUND_RTOL: f64 = 1e-12;

/// Probes the standing assumptions on `probe_points`.
pub fn validate_model(spec: &ModelSpec, probe_points: &[Vec<f64>]) -> Result<ValidationReport> {
    validate_model_with_margin(spec, probe_points, None)
}

pub fn validate_model_with_margin(
    spec: &ModelSpec,
    probe_points: &[Vec<f64>],
    margin: Option<ProbeMargin>,
) -> Result<ValidationReport> {
    spec.check_parameters()?;
    if probe_points.is_empty() {
        return Err(Error::invalid("at least one probe point is required"));
    }
    let d = spec.dimension;
    if let Some(p) = probe_points.iter().find(|p| p.len() != d) {
        return Err(Error::invalid(format!("probe point {p:?} does not have dimension {d}")));
    }
    let m = margin.map(|m| m.value()).unwrap_or(0.0);

    let mut drift = Check::new("drift_bound", spec.drift_bound);
    let mut diff = Check::new("diffusion_bound", spec.diffusion_bound);
    let mut ell = Check::new("ellipticity", spec.ellipticity);
    let mut b = vec![0.0; d];
    for x in probe_points {
        spec.drift_at(x, &mut b);
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt() + m;
        drift.observe_upper(norm_b, x);

        let (smax, smin) = singular_extremes(&spec.diffusion_matrix(x));
        diff.observe_upper(smax + m, x);
        let lower = (smin - m).max(0.0);
        ell.observe_lower(lower * lower, x);
    }
    Ok(ValidationReport { checks: vec![drift.finish(), diff.finish(), ell.finish()] })
}

struct Check {
    name: &'static str,
    bound: f64,
    observed: Option<f64>,
    witness: Option<Vec<f64>>,
}

impl Check {
    fn new(name: &'static str, bound: f64) -> Self {
        Self { name, bound, observed: None, witness: None }
    }

    fn observe_upper(&mut self, v: f64, x: &[f64]) {
        self.observed = Some(self.observed.map_or(v, |o| o.max(v)));
        if self.witness.is_none() && !(v <= self.bound * (1.0 + BOUND_RTOL) + 1e-300) {
            self.witness = Some(x.to_vec());
        }
    }

    fn observe_lower(&mut self, v: f64, x: &[f64]) {
        self.observed = Some(self.observed.map_or(v, |o| o.min(v)));
        if self.witness.is_none() && !(v >= self.bound * (1.0 - BOUND_RTOL)) {
            self.witness = Some(x.to_vec());
        }
    }

    fn finish(self) -> AssumptionCheck {
        AssumptionCheck {
            name: self.name,
            passed: self.witness.is_none(),
            bound: self.bound,
            observed: self.observed.unwrap_or(f64::NAN),
            witness: self.witness,
        }
    }
}

fn singular_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 1 {
        let v = m[(0, 0)].abs();
        return (v, v);
    }
    let sv = m.clone().singular_values();
    (
        sv.iter().cloned().fold(0.0_f64, f64::max),
        sv.iter().cloned().fold(f64::INFINITY, f64::min),
    )
}

/// Aronson-type constants `A_T, a_T >= 1` bracketing the continuous part:
/// `1/(A (2 pi t)^{d/2}) e^{-a r^2/(2t)} <= p_t <= A/(2 pi t)^{d/2} e^{-r^2/(2 a t)}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianHeatKernelParams {
    pub big_a: f64,
    pub small_a: f64,
}

impl GaussianHeatKernelParams {
    pub fn new(big_a: f64, small_a: f64) -> Result<Self> {
        if !(big_a >= 1.0 && small_a >= 1.0 && big_a.is_finite() && small_a.is_finite()) {
            return Err(Error::invalid(format!("heat kernel constants must be >= 1, got A={big_a}, a={small_a}")));
        }
        Ok(Self { big_a, small_a })
    }

    /// `A = a = 1`: the exact heat kernel of the linear model.
    pub fn exact() -> Self {
        Self { big_a: 1.0, small_a: 1.0 }
    }

    pub fn lower(&self, t: f64, r: f64, d: usize) -> f64 {
        (-self.small_a * r * r / (2.0 * t)).exp() / (self.big_a * (2.0 * PI * t).powf(d as f64 / 2.0))
    }

    pub fn upper(&self, t: f64, r: f64, d: usize) -> f64 {
        self.big_a * (-r * r / (2.0 * self.small_a * t)).exp() / (2.0 * PI * t).powf(d as f64 / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_law() -> JumpLaw {
        JumpLaw::gaussian(1.0).unwrap()
    }

    fn probes(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64]).collect()
    }

    #[test]
    fn linear_model_passes() {
        let spec = ModelSpec::linear(gaussian_law(), 1.0, 1.0).unwrap();
        assert!(spec.is_linear());
        assert_eq!((spec.drift_bound, spec.diffusion_bound, spec.ellipticity), (0.0, 1.0, 1.0));
        let r = validate_model(&spec, &[vec![-10.0], vec![0.0], vec![10.0]]).unwrap();
        assert!(r.all_passed());
        assert!(r.checks.iter().all(|c| c.witness.is_none()));
    }

    #[test]
    fn violated_declared_diffusion_bound() {
        let spec = ModelSpec::builder(1)
            .diffusion(Diffusion::Diagonal(ScalarProfile::Trig { base: 2.0, amplitude: 1.0, frequency: 1.0, phase: 0.0 }))
            .diffusion_bound(2.0)
            .jump_law(gaussian_law())
            .build()
            .unwrap();
        // sin(1) > 0 so the first probe already violates c2 = 2.
        let r = validate_model(&spec, &[vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let c = r.check("diffusion_bound").unwrap();
        assert!(!c.passed);
        assert_eq!(c.witness, Some(vec![1.0]));
        assert!(r.check("drift_bound").unwrap().passed);
        // Probes where sin(x) <= 0 do not witness a failure.
        let ok = validate_model(&spec, &[vec![-1.0], vec![0.0], vec![4.0]]).unwrap();
        assert!(ok.check("diffusion_bound").unwrap().passed);
    }

    #[test]
    fn trig_model_with_declared_bounds_passes_dense_grid() {
        let spec = ModelSpec::builder(1)
            .drift(Drift::Componentwise(ScalarProfile::Trig { base: 0.0, amplitude: 0.3, frequency: 1.0, phase: PI / 2.0 }))
            .diffusion(Diffusion::Diagonal(ScalarProfile::Trig { base: 1.0, amplitude: 0.5, frequency: 1.0, phase: 0.0 }))
            .drift_bound(0.3)
            .diffusion_bound(1.5)
            .ellipticity(0.25)
            .jump_law(gaussian_law())
            .jump_rate(1.0)
            .build()
            .unwrap();
        let r = validate_model(&spec, &probes(-20.0, 20.0, 40_001)).unwrap();
        assert!(r.all_passed(), "{r:?}");
        // Dense-grid extremes reach the analytic bounds.
        assert!((r.check("drift_bound").unwrap().observed - 0.3).abs() < 1e-6);
        assert!((r.check("ellipticity").unwrap().observed - 0.25).abs() < 1e-6);
    }

    #[test]
    fn catalog_bounds_are_derived() {
        let spec = ModelSpec::builder(2)
            .drift(Drift::Componentwise(ScalarProfile::AffineClamped { slope: 2.0, intercept: 0.0, lower: -0.5, upper: 0.5 }))
            .diffusion(Diffusion::Diagonal(ScalarProfile::Trig { base: 1.0, amplitude: 0.5, frequency: 3.0, phase: 0.0 }))
            .jump_law(JumpLaw::product_laplace(vec![1.0, 1.0]).unwrap())
            .build()
            .unwrap();
        assert!((spec.drift_bound - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(spec.diffusion_bound, 1.5);
        assert_eq!(spec.ellipticity, 0.25);
    }

    #[test]
    fn callbacks_require_declared_bounds() {
        let f: DriftFn = Arc::new(|x, out| out[0] = x[0].tanh());
        let err = ModelSpec::builder(1).drift(Drift::Callback(f.clone())).jump_law(gaussian_law()).build();
        assert!(err.is_err());
        let ok = ModelSpec::builder(1).drift(Drift::Callback(f)).drift_bound(1.0).jump_law(gaussian_law()).build().unwrap();
        assert!(validate_model(&ok, &probes(-5.0, 5.0, 11)).unwrap().all_passed());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelSpec::builder(1).jump_law(gaussian_law()).jump_rate(-1.0).build().is_err());
        assert!(ModelSpec::builder(1).jump_law(gaussian_law()).ellipticity(0.0).build().is_err());
        assert!(ModelSpec::builder(0).jump_law(gaussian_law()).build().is_err());
        let mut spec = ModelSpec::linear(gaussian_law(), 1.0, 1.0).unwrap();
        assert!(validate_model(&spec, &[]).is_err());
        spec.jump_rate = -0.5;
        assert!(validate_model(&spec, &[vec![0.0]]).is_err());
        spec.jump_rate = 0.5;
        spec.dimension = 0;
        assert!(validate_model(&spec, &[vec![0.0]]).is_err());
    }

    #[test]
    fn margin_tightens_the_check() {
        let spec = ModelSpec::builder(1)
            .diffusion(Diffusion::Diagonal(ScalarProfile::Trig { base: 1.0, amplitude: 0.5, frequency: 1.0, phase: 0.0 }))
            .jump_law(gaussian_law())
            .build()
            .unwrap();
        let grid = probes(-10.0, 10.0, 201);
        assert!(validate_model(&spec, &grid).unwrap().all_passed());
        let m = ProbeMargin { lipschitz: 0.5, spacing: 0.1 };
        // Derived bounds are exact, so any positive margin fails.
        assert!(!validate_model_with_margin(&spec, &grid, Some(m)).unwrap().all_passed());
        let loose = ModelSpec { drift_bound: 0.1, diffusion_bound: 1.6, ellipticity: 0.2, ..spec.clone() };
        assert!(validate_model_with_margin(&loose, &grid, Some(m)).unwrap().all_passed());
    }

    #[test]
    fn heat_kernel_params() {
        assert!(GaussianHeatKernelParams::new(0.5, 1.0).is_err());
        let p = GaussianHeatKernelParams::exact();
        let v = p.lower(1.0, 0.0, 1);
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(p.lower(0.7, 1.3, 2), p.upper(0.7, 1.3, 2));
        let q = GaussianHeatKernelParams::new(2.0, 3.0).unwrap();
        assert!(q.lower(1.0, 1.0, 1) < q.upper(1.0, 1.0, 1));
    }
}
