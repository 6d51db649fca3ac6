//! Jump amplitude laws: densities, samplers, moment generating functions and
//! n-fold convolution powers on uniform grids.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{self, SampledDensity, UniformGrid};

/// User-supplied jump law.
///
/// The moment generating function and its first two derivatives must be
/// supplied in closed form; they are never estimated numerically.
pub trait CustomLaw: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize {
        1
    }
    fn density(&self, z: &[f64]) -> f64;
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);
    /// Supremum `s` of `{u : E[exp(uY)] < inf}` (may be infinite).
    fn mgf_sup(&self) -> f64;
    /// `E[Y^order exp(uY)]` for `order` in `0..=2`.
    fn mgf_derivative(&self, u: f64, order: u32) -> f64;
    fn variance(&self) -> f64;
    /// `f'(0+) - f'(0-)`, used to correct the quadrature mass at the origin.
    fn origin_slope_jump(&self) -> f64 {
        0.0
    }
    fn is_symmetric(&self) -> bool {
        false
    }
    fn name(&self) -> String {
        "custom".into()
    }
}

/// Centred multivariate Gaussian with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct MvGaussian {
    covariance: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl MvGaussian {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d {
            return Err(Error::invalid("covariance must be a non-empty square matrix"));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-12 * covariance.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let inverse = chol.inverse();
        Ok(Self { covariance, cholesky: l, inverse, log_det })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dimension(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Operator (spectral) norm of the inverse covariance.
    pub fn inverse_norm(&self) -> f64 {
        self.inverse.clone().symmetric_eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn density(&self, z: &[f64]) -> f64 {
        let d = self.dimension();
        let v = nalgebra::DVector::from_column_slice(z);
        let q = (v.transpose() * &self.inverse * &v)[(0, 0)];
        (-0.5 * q - 0.5 * self.log_det - 0.5 * d as f64 * (2.0 * PI).ln()).exp()
    }
}

#[derive(Clone, Debug)]
pub enum JumpLaw {
    /// Centred normal with variance `beta`.
    Gaussian { variance: f64 },
    /// Density `mu/2 * exp(-mu |z|)`.
    Laplace { rate: f64 },
    /// Product of independent one-dimensional Laplace marginals.
    ProductLaplace { rates: Vec<f64> },
    MultivariateGaussian(MvGaussian),
    Custom(Arc<dyn CustomLaw>),
}

impl JumpLaw {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!("Gaussian jump variance must be positive, got {variance}")));
        }
        Ok(JumpLaw::Gaussian { variance })
    }

    pub fn laplace(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(format!("Laplace rate must be positive, got {rate}")));
        }
        Ok(JumpLaw::Laplace { rate })
    }

    pub fn product_laplace(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("product Laplace rates must be non-empty and positive"));
        }
        Ok(JumpLaw::ProductLaplace { rates })
    }

    pub fn multivariate_gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        Ok(JumpLaw::MultivariateGaussian(MvGaussian::new(covariance)?))
    }

    pub fn custom(law: Arc<dyn CustomLaw>) -> Self {
        JumpLaw::Custom(law)
    }

    pub fn dimension(&self) -> usize {
        match self {
            JumpLaw::Gaussian { .. } | JumpLaw::Laplace { .. } => 1,
            JumpLaw::ProductLaplace { rates } => rates.len(),
            JumpLaw::MultivariateGaussian(g) => g.dimension(),
            JumpLaw::Custom(c) => c.dimension(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            JumpLaw::Gaussian { variance } => format!("gaussian(variance={variance})"),
            JumpLaw::Laplace { rate } => format!("laplace(rate={rate})"),
            JumpLaw::ProductLaplace { rates } => format!("product_laplace(rates={rates:?})"),
            JumpLaw::MultivariateGaussian(g) => format!("mv_gaussian(d={})", g.dimension()),
            JumpLaw::Custom(c) => c.name(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            JumpLaw::Custom(c) => c.is_symmetric(),
            _ => true,
        }
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        match self {
            JumpLaw::Gaussian { variance } => gaussian_pdf(z[0], *variance),
            JumpLaw::Laplace { rate } => 0.5 * rate * (-rate * z[0].abs()).exp(),
            JumpLaw::ProductLaplace { rates } => {
                rates.iter().zip(z).map(|(m, x)| 0.5 * m * (-m * x.abs()).exp()).product()
            }
            JumpLaw::MultivariateGaussian(g) => g.density(z),
            JumpLaw::Custom(c) => c.density(z),
        }
    }

    /// One-dimensional density.
    pub fn density_1d(&self, z: f64) -> f64 {
        self.density(&[z])
    }

    /// Supremum `s` of the MGF domain of a one-dimensional law.
    pub fn mgf_sup(&self) -> f64 {
        match self {
            JumpLaw::Gaussian { .. } => f64::INFINITY,
            JumpLaw::Laplace { rate } => *rate,
            JumpLaw::ProductLaplace { rates } => rates.iter().cloned().fold(f64::INFINITY, f64::min),
            JumpLaw::MultivariateGaussian(_) => f64::INFINITY,
            JumpLaw::Custom(c) => c.mgf_sup(),
        }
    }

    /// `E[exp(uY)]`.
    pub fn mgf(&self, u: f64) -> Result<f64> {
        self.mgf_derivative(u, 0)
    }

    /// `E[Y^order exp(uY)]` for `order` in `0..=2` (one-dimensional laws).
    pub fn mgf_derivative(&self, u: f64, order: u32) -> Result<f64> {
        if order > 2 {
            return Err(Error::Unsupported(format!("MGF derivative of order {order}")));
        }
        if self.dimension() != 1 {
            return Err(Error::Unsupported("MGF of a multivariate jump law".into()));
        }
        let s = self.mgf_sup();
        if !u.is_finite() || u.abs() >= s {
            return Err(Error::Domain { what: "jump MGF", value: u, sup: s });
        }
        Ok(match self {
            JumpLaw::Gaussian { variance: b } => {
                let m = (0.5 * u * u * b).exp();
                match order {
                    0 => m,
                    1 => u * b * m,
                    _ => (b + u * u * b * b) * m,
                }
            }
            JumpLaw::Laplace { rate: mu } => {
                // (mu - u)(mu + u) stays accurate near the pole at u = mu.
                let den = (mu - u) * (mu + u);
                let mu2 = mu * mu;
                match order {
                    0 => mu2 / den,
                    1 => 2.0 * u * mu2 / (den * den),
                    _ => 2.0 * mu2 * (mu2 + 3.0 * u * u) / (den * den * den),
                }
            }
            JumpLaw::Custom(c) => c.mgf_derivative(u, order),
            _ => unreachable!("multivariate laws rejected above"),
        })
    }

    /// Variance of a one-dimensional law (trace of the covariance otherwise).
    pub fn variance(&self) -> f64 {
        match self {
            JumpLaw::Gaussian { variance } => *variance,
            JumpLaw::Laplace { rate } => 2.0 / (rate * rate),
            JumpLaw::ProductLaplace { rates } => rates.iter().map(|m| 2.0 / (m * m)).sum(),
            JumpLaw::MultivariateGaussian(g) => g.covariance().trace(),
            JumpLaw::Custom(c) => c.variance(),
        }
    }

    /// `f'(0+) - f'(0-)` of a one-dimensional density.
    pub fn origin_slope_jump(&self) -> f64 {
        match self {
            JumpLaw::Laplace { rate } => -rate * rate,
            JumpLaw::Custom(c) => c.origin_slope_jump(),
            _ => 0.0,
        }
    }

    /// Writes one draw into `out` (length = dimension).
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            JumpLaw::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                out[0] = variance.sqrt() * z;
            }
            JumpLaw::Laplace { rate } => out[0] = laplace_draw(rng, *rate),
            JumpLaw::ProductLaplace { rates } => {
                for (o, m) in out.iter_mut().zip(rates) {
                    *o = laplace_draw(rng, *m);
                }
            }
            JumpLaw::MultivariateGaussian(g) => {
                let d = g.dimension();
                let mut z = [0.0_f64; 8];
                let mut zv = Vec::new();
                let zs: &mut [f64] = if d <= 8 {
                    &mut z[..d]
                } else {
                    zv.resize(d, 0.0);
                    &mut zv
                };
                for zi in zs.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for (i, o) in out.iter_mut().enumerate().take(d) {
                    *o = (0..=i).map(|j| g.cholesky[(i, j)] * zs[j]).sum();
                }
            }
            JumpLaw::Custom(c) => c.sample(rng, out),
        }
    }

    /// `count` draws, flattened row-major (`count * dimension` numbers).
    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let d = self.dimension();
        let mut out = vec![0.0; count * d];
        for chunk in out.chunks_mut(d) {
            self.sample_into(rng, chunk);
        }
        out
    }

    /// Default grid for `n`-fold convolution powers on a horizon `horizon`:
    /// half-width `12 * sqrt(n Var + horizon)`, `2^14` intervals.
    ///
    /// Exponential tails get an extra `40 / mu` so the base law leaks less
    /// than `e^-40` of its mass.
    pub fn default_grid(&self, n: usize, horizon: f64) -> Result<UniformGrid> {
        let g = UniformGrid::for_variance(n as f64 * self.variance() + horizon)?;
        match self {
            JumpLaw::Laplace { rate } => UniformGrid::new(g.half_width() + 40.0 / rate, g.intervals()),
            _ => Ok(g),
        }
    }

    /// The law sampled on `grid`, with quadrature masses corrected for a
    /// slope jump at the origin.
    pub fn sampled(&self, grid: &UniformGrid) -> Result<SampledDensity> {
        self.require_1d()?;
        let values: Vec<f64> = grid.nodes().iter().map(|&z| self.density_1d(z)).collect();
        let mut s = SampledDensity::with_origin_kink(*grid, values, self.origin_slope_jump())?;
        let leak = match self {
            JumpLaw::Gaussian { variance } => erfc(grid.half_width() / (2.0 * variance).sqrt()),
            JumpLaw::Laplace { rate } => (-rate * grid.half_width()).exp(),
            _ => (1.0 - s.total_mass()).max(0.0),
        };
        s.set_leak(leak);
        Ok(s)
    }

    /// `n`-fold convolution power of a one-dimensional law on `grid`.
    ///
    /// `n = 0` is a unit point mass at the origin. Gaussian powers use the
    /// closed form `N(0, n beta)`; all other laws are convolved by FFT.
    /// Fails when the mass estimated to leave the grid exceeds `leak_tol`.
    pub fn convolution_power(&self, n: usize, grid: &UniformGrid, leak_tol: f64) -> Result<SampledDensity> {
        self.require_1d()?;
        if n == 0 {
            return Ok(SampledDensity::point_mass(*grid));
        }
        let result = match self {
            JumpLaw::Gaussian { variance } => {
                let v = n as f64 * variance;
                let values = grid.nodes().iter().map(|&z| gaussian_pdf(z, v)).collect();
                let mut s = SampledDensity::from_values(*grid, values)?;
                s.set_leak(erfc(grid.half_width() / (2.0 * v).sqrt()));
                s
            }
            _ => {
                let base = self.sampled(grid)?;
                let mut acc = base.clone();
                for _ in 1..n {
                    acc = grid::convolve(&acc, &base)?;
                }
                acc
            }
        };
        if result.leak() > leak_tol {
            return Err(Error::GridTooNarrow { leak: result.leak(), tol: leak_tol });
        }
        Ok(result)
    }

    fn require_1d(&self) -> Result<()> {
        if self.dimension() != 1 {
            return Err(Error::Unsupported(format!("grid operations need a one-dimensional law, got {}", self.name())));
        }
        Ok(())
    }
}

fn laplace_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    if rng.random::<bool>() {
        e / rate
    } else {
        -e / rate
    }
}

/// Centred normal density with variance `v`.
pub fn gaussian_pdf(z: f64, v: f64) -> f64 {
    (-0.5 * z * z / v).exp() / (2.0 * PI * v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn densities_at_origin() {
        assert_eq!(JumpLaw::laplace(1.0).unwrap().density(&[0.0]), 0.5);
        let g = JumpLaw::gaussian(1.0).unwrap().density(&[0.0]);
        assert!((g - 0.398_942_280_401_432_7).abs() < 1e-15);
        let p = JumpLaw::product_laplace(vec![1.0, 2.0]).unwrap().density(&[0.0, 0.0]);
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mgf_values() {
        for law in [JumpLaw::gaussian(2.0).unwrap(), JumpLaw::laplace(3.0).unwrap()] {
            assert_eq!(law.mgf(0.0).unwrap(), 1.0);
            assert_eq!(law.mgf_derivative(0.0, 1).unwrap(), 0.0);
        }
        let g = JumpLaw::gaussian(1.0).unwrap().mgf(1.0).unwrap();
        assert!((g - 1.648_721_270_700_128_1).abs() < 1e-15);
        let l = JumpLaw::laplace(2.0).unwrap().mgf(1.0).unwrap();
        assert!((l - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn laplace_mgf_matches_partial_fraction_form() {
        let mu = 1.7;
        let law = JumpLaw::laplace(mu).unwrap();
        for &u in &[0.1, 0.9, 1.5, 1.69] {
            let pf = 0.5 * mu * (1.0 / (mu - u) + 1.0 / (mu + u));
            assert!((law.mgf(u).unwrap() - pf).abs() < 1e-12 * pf);
        }
    }

    #[test]
    fn mgf_derivatives_match_finite_differences() {
        for law in [JumpLaw::gaussian(0.7).unwrap(), JumpLaw::laplace(1.3).unwrap()] {
            for &u in &[-0.8, -0.2, 0.3, 0.9] {
                let h = 1e-5;
                for order in 0..2 {
                    let fd = (law.mgf_derivative(u + h, order).unwrap() - law.mgf_derivative(u - h, order).unwrap()) / (2.0 * h);
                    let an = law.mgf_derivative(u, order + 1).unwrap();
                    assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{law:?} u={u} order={order}");
                }
            }
        }
    }

    #[test]
    fn mgf_domain_errors() {
        let l = JumpLaw::laplace(2.0).unwrap();
        assert!(matches!(l.mgf(2.0), Err(Error::Domain { .. })));
        assert!(matches!(l.mgf(-2.5), Err(Error::Domain { .. })));
        assert!(JumpLaw::gaussian(1.0).unwrap().mgf(30.0).is_ok());
        assert_eq!(l.mgf_sup(), 2.0);
        assert_eq!(JumpLaw::gaussian(1.0).unwrap().mgf_sup(), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(JumpLaw::gaussian(0.0).is_err());
        assert!(JumpLaw::laplace(-1.0).is_err());
        assert!(JumpLaw::product_laplace(vec![]).is_err());
        let not_spd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(JumpLaw::multivariate_gaussian(not_spd), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn densities_integrate_to_one_with_zero_mean() {
        for law in [JumpLaw::gaussian(1.3).unwrap(), JumpLaw::laplace(0.8).unwrap()] {
            let grid = law.default_grid(1, 0.0).unwrap();
            let s = law.sampled(&grid).unwrap();
            assert!((s.total_mass() - 1.0).abs() < 1e-10, "{}", s.total_mass());
            assert!(s.leak() < 1e-12);
            let mean: f64 = grid.nodes().iter().zip(s.masses()).map(|(z, m)| z * m).sum();
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_power_closed_form() {
        let law = JumpLaw::gaussian(1.0).unwrap();
        let grid = law.default_grid(4, 1.0).unwrap();
        let p = law.convolution_power(4, &grid, 1e-9).unwrap();
        assert!((p.value_at(0.0).unwrap() - 1.0 / (8.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn first_power_is_the_density() {
        for law in [JumpLaw::gaussian(2.0).unwrap(), JumpLaw::laplace(1.0).unwrap()] {
            let grid = law.default_grid(1, 1.0).unwrap();
            let p = law.convolution_power(1, &grid, 1e-9).unwrap();
            for (z, v) in grid.nodes().iter().zip(p.values()) {
                assert!((law.density_1d(*z) - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zeroth_power_is_a_unit_cell() {
        let law = JumpLaw::laplace(1.0).unwrap();
        let grid = UniformGrid::new(4.0, 64).unwrap();
        let p = law.convolution_power(0, &grid, 1e-9).unwrap();
        assert!(p.is_point_mass());
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(p.values()[grid.center()], 1.0 / grid.spacing());
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let law = JumpLaw::laplace(1.0).unwrap();
        let grid = UniformGrid::new(5.0, 1000).unwrap();
        assert!(matches!(law.convolution_power(3, &grid, 1e-9), Err(Error::GridTooNarrow { .. })));
        let g = JumpLaw::gaussian(1.0).unwrap();
        assert!(matches!(g.convolution_power(9, &grid, 1e-9), Err(Error::GridTooNarrow { .. })));
    }

    #[test]
    fn laplace_second_power_at_origin() {
        let law = JumpLaw::laplace(1.0).unwrap();
        let grid = law.default_grid(2, 1.0).unwrap();
        let p = law.convolution_power(2, &grid, 1e-9).unwrap();
        assert!((p.value_at(0.0).unwrap() - 0.25).abs() < 1e-8);
        assert!((p.total_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = JumpLaw::laplace(1.0).unwrap();
        let a = law.sample(&mut ChaCha8Rng::seed_from_u64(7), 1000);
        let b = law.sample(&mut ChaCha8Rng::seed_from_u64(7), 1000);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sample_moments_laplace_and_gaussian() {
        let n = 1_000_000;
        // Var of the sample variance: (mu4 - sigma^4)/n; Laplace(1): mu4 = 24, sigma^2 = 2.
        let l = JumpLaw::laplace(1.0).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(11), n);
        let (m, v) = moments(&l);
        assert!(m.abs() < 4.0 * (2.0 / n as f64).sqrt());
        assert!((v - 2.0).abs() < 4.0 * ((24.0 - 4.0) / n as f64).sqrt(), "v={v}");
        // N(0, 4): mu4 = 48, sigma^4 = 16.
        let g = JumpLaw::gaussian(4.0).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(12), n);
        let (m, v) = moments(&g);
        assert!(m.abs() < 4.0 * (4.0 / n as f64).sqrt());
        assert!((v - 4.0).abs() < 4.0 * (32.0 / n as f64).sqrt(), "v={v}");
    }

    #[test]
    fn multivariate_gaussian_sampler_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let law = JumpLaw::multivariate_gaussian(cov).unwrap();
        let n = 200_000;
        let xs = law.sample(&mut ChaCha8Rng::seed_from_u64(3), n);
        let c01 = xs.chunks(2).map(|p| p[0] * p[1]).sum::<f64>() / n as f64;
        let c00 = xs.chunks(2).map(|p| p[0] * p[0]).sum::<f64>() / n as f64;
        assert!((c01 - 0.6).abs() < 0.02);
        assert!((c00 - 2.0).abs() < 0.04);
        let d0 = law.density(&[0.0, 0.0]);
        let det: f64 = 2.0 - 0.36;
        assert!((d0 - 1.0 / (2.0 * PI * det.sqrt())).abs() < 1e-14);
    }
}
