//! Transition density of the linear model `dX = dB + dJ` as a
//! Poisson-weighted mixture `f_t = sum_n w_n (Phi_t * phi^{*n})` with
//! `w_n = e^{-lambda t} (lambda t)^n / n!`.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use statrs::function::erf::erfc;

use crate::curve::{Abscissa, CurveMeta, DensityCurve, Method, SeriesTruncation};
use crate::error::{Error, Result};
use crate::fft::{pairwise_sum, pairwise_sum_arrays};
use crate::grid::{self, SampledDensity, UniformGrid, DEFAULT_LEAK_TOLERANCE};
use crate::laws::{gaussian_pdf, JumpLaw};
use crate::model::GaussianHeatKernelParams;

/// Poisson weights `w_0..=w_n` of mean `mean`, by upward recursion in log
/// space (no underflow of `e^{-mean}` for large means).
pub fn poisson_weights(mean: f64, n: usize) -> Vec<f64> {
    let ln_mean = mean.ln();
    let mut lw = -mean;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            lw += ln_mean - (k as f64).ln();
        }
        out.push(if mean == 0.0 { if k == 0 { 1.0 } else { 0.0 } } else { lw.exp() });
    }
    out
}

/// `tails[n] = sum_{k >= n} w_k`, summed from the top down, for
/// `n = 0..=n_hi` where the table ends once the weights are negligible.
fn poisson_tails(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0, 0.0];
    }
    // Past n > 2 mean consecutive weights at least halve, so once a weight
    // underflows the remainder is below the smallest subnormal.
    let mut n_hi = 1;
    let mut lw = -mean;
    let ln_mean = mean.ln();
    loop {
        lw += ln_mean - (n_hi as f64).ln();
        if n_hi as f64 > 2.0 * mean + 1.0 && lw < -745.0 {
            break;
        }
        n_hi += 1;
    }
    let w = poisson_weights(mean, n_hi);
    let mut tails = vec![0.0; n_hi + 2];
    for k in (0..=n_hi).rev() {
        tails[k] = tails[k + 1] + w[k];
    }
    tails
}

/// Smallest `N` whose dropped Poisson weight `sum_{n > N} w_n` is below `eps`.
pub fn poisson_truncation(mean: f64, eps: f64) -> Result<SeriesTruncation> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("truncation tolerance must be positive, got {eps}")));
    }
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("Poisson mean must be finite and non-negative, got {mean}")));
    }
    let tails = poisson_tails(mean);
    let n = (0..tails.len() - 1).find(|&n| tails[n + 1] < eps).unwrap_or(tails.len() - 2);
    Ok(SeriesTruncation { max_terms: n, tail_mass_bound: tails[n + 1], pointwise_bound: tails[n + 1] })
}

/// Truncation after a fixed number of terms.
pub fn truncation_for_terms(mean: f64, max_terms: usize) -> Result<SeriesTruncation> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("Poisson mean must be finite and non-negative, got {mean}")));
    }
    let tails = poisson_tails(mean);
    let tail = tails.get(max_terms + 1).copied().unwrap_or(0.0);
    Ok(SeriesTruncation { max_terms, tail_mass_bound: tail, pointwise_bound: tail })
}

fn with_sup(mut tr: SeriesTruncation, sup: f64) -> SeriesTruncation {
    tr.pointwise_bound = tr.tail_mass_bound * sup;
    tr
}

/// Kernel standing in for the continuous-part density `p_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeatKernel {
    /// `N(0, t I)`: the linear model.
    Exact,
    /// `A^{-1} (2 pi t)^{-d/2} e^{-a r^2 / 2t}`.
    Lower(GaussianHeatKernelParams),
    /// `A (2 pi t)^{-d/2} e^{-r^2 / 2at}`.
    Upper(GaussianHeatKernelParams),
}

impl HeatKernel {
    /// `(scale, v)` with kernel `= scale * N(0, v)` in one dimension.
    fn gaussian_form(&self, t: f64) -> (f64, f64) {
        match self {
            HeatKernel::Exact => (1.0, t),
            HeatKernel::Lower(p) => (1.0 / (p.big_a * p.small_a.sqrt()), t / p.small_a),
            HeatKernel::Upper(p) => (p.big_a * p.small_a.sqrt(), p.small_a * t),
        }
    }

    pub fn value(&self, t: f64, r: f64, d: usize) -> f64 {
        match self {
            HeatKernel::Exact => GaussianHeatKernelParams::exact().lower(t, r, d),
            HeatKernel::Lower(p) => p.lower(t, r, d),
            HeatKernel::Upper(p) => p.upper(t, r, d),
        }
    }
}

fn require_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    Ok(())
}

fn gaussian_on_grid(grid: &UniformGrid, scale: f64, v: f64) -> Result<SampledDensity> {
    let values = grid.nodes().iter().map(|&z| scale * gaussian_pdf(z, v)).collect();
    let mut s = SampledDensity::from_values(*grid, values)?;
    s.set_leak(scale * erfc(grid.half_width() / (2.0 * v).sqrt()));
    Ok(s)
}

fn grid_curve(t: f64, grid: &UniformGrid, values: Vec<f64>, method: Method, error: f64, outside: f64, meta: CurveMeta) -> DensityCurve {
    let n = values.len();
    DensityCurve {
        origin: vec![0.0],
        t,
        abscissa: Abscissa::Position,
        points: grid.nodes(),
        values,
        method,
        error_bound: vec![error; n],
        ci_half_width: None,
        outside_mass: outside,
        meta,
    }
}

/// `q_t = p_t * phi` on the nodes of `grid` (offsets `y - x`).
///
/// Gaussian jumps give the closed form `scale * N(0, v + beta)`; other laws
/// are convolved by FFT.
pub fn q_density(kernel: HeatKernel, law: &JumpLaw, t: f64, grid: &UniformGrid) -> Result<DensityCurve> {
    require_time(t)?;
    let (scale, v) = kernel.gaussian_form(t);
    let meta = CurveMeta { law: Some(law.name()), ..CurveMeta::default() };
    match law {
        JumpLaw::Gaussian { variance } => {
            let s = v + variance;
            let values = grid.nodes().iter().map(|&z| scale * gaussian_pdf(z, s)).collect();
            let outside = scale * erfc(grid.half_width() / (2.0 * s).sqrt());
            Ok(grid_curve(t, grid, values, Method::ClosedForm, 0.0, outside, meta))
        }
        _ => {
            let heat = gaussian_on_grid(grid, scale, v)?;
            let phi = law.sampled(grid)?;
            let q = grid::convolve(&heat, &phi)?;
            if q.leak() > DEFAULT_LEAK_TOLERANCE {
                return Err(Error::GridTooNarrow { leak: q.leak(), tol: DEFAULT_LEAK_TOLERANCE });
            }
            let leak = q.leak();
            Ok(grid_curve(t, grid, q.into_values(), Method::FftSeries, 0.0, leak, meta))
        }
    }
}

/// Series density of the linear model on the nodes of `grid`
/// (offsets `y - x`), truncated so the dropped Poisson weight is below `eps`.
pub fn linear_density_on_grid(law: &JumpLaw, lambda: f64, t: f64, grid: &UniformGrid, eps: f64) -> Result<DensityCurve> {
    require_time(t)?;
    check_rate(lambda)?;
    if law.dimension() != 1 {
        return Err(Error::Unsupported(format!("one-dimensional series needs a 1-d law, got {}", law.name())));
    }
    let sup = 1.0 / (2.0 * PI * t).sqrt();
    let tr = with_sup(poisson_truncation(lambda * t, eps)?, sup);
    let w = poisson_weights(lambda * t, tr.max_terms);
    let meta = CurveMeta { jump_rate: Some(lambda), law: Some(law.name()), truncation: Some(tr), ..CurveMeta::default() };
    if let JumpLaw::Gaussian { variance } = law {
        let nodes = grid.nodes();
        let values = gaussian_series(&w, t, *variance, &nodes);
        let outside = gaussian_outside(&w, t, *variance, -grid.half_width(), grid.half_width());
        return Ok(grid_curve(t, grid, values, Method::ClosedForm, tr.pointwise_bound, outside, meta));
    }

    let base = law.sampled(grid)?;
    let mut power = SampledDensity::point_mass(*grid);
    let mut terms = Vec::with_capacity(tr.max_terms + 1);
    let mut leak = 0.0;
    for (n, wn) in w.iter().enumerate() {
        if n > 0 {
            power = grid::convolve(&power, &base)?;
            if power.leak() > DEFAULT_LEAK_TOLERANCE {
                return Err(Error::GridTooNarrow { leak: power.leak(), tol: DEFAULT_LEAK_TOLERANCE });
            }
        }
        leak += wn * power.leak();
        terms.push(power.masses().iter().map(|m| wn * m).collect::<Vec<f64>>());
    }
    let mixture = SampledDensity::from_masses(*grid, pairwise_sum_arrays(&terms), leak)?;
    let heat = gaussian_on_grid(grid, 1.0, t)?;
    let f = grid::convolve(&mixture, &heat)?;
    if f.leak() > DEFAULT_LEAK_TOLERANCE {
        return Err(Error::GridTooNarrow { leak: f.leak(), tol: DEFAULT_LEAK_TOLERANCE });
    }
    let leak = f.leak();
    Ok(grid_curve(t, grid, f.into_values(), Method::FftSeries, tr.pointwise_bound + leak * sup, leak, meta))
}

/// Series density at arbitrary sorted offsets `points = y - x`.
///
/// For FFT laws the computation grid is refined so that uniformly spaced
/// points fall on nodes; other points are interpolated with cubic
/// Lagrange polynomials.
pub fn linear_density(law: &JumpLaw, lambda: f64, t: f64, points: &[f64], eps: f64) -> Result<DensityCurve> {
    require_time(t)?;
    check_rate(lambda)?;
    if points.is_empty() || points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("points must be non-empty and strictly increasing"));
    }
    if let JumpLaw::Gaussian { variance } = law {
        let sup = 1.0 / (2.0 * PI * t).sqrt();
        let tr = with_sup(poisson_truncation(lambda * t, eps)?, sup);
        let w = poisson_weights(lambda * t, tr.max_terms);
        let values = gaussian_series(&w, t, *variance, points);
        let outside = gaussian_outside(&w, t, *variance, points[0], points[points.len() - 1]);
        let meta = CurveMeta { jump_rate: Some(lambda), law: Some(law.name()), truncation: Some(tr), ..CurveMeta::default() };
        return Ok(DensityCurve {
            origin: vec![0.0],
            t,
            abscissa: Abscissa::Position,
            points: points.to_vec(),
            values,
            method: Method::ClosedForm,
            error_bound: vec![tr.pointwise_bound; points.len()],
            ci_half_width: None,
            outside_mass: outside,
            meta,
        });
    }
    let grid = series_grid(law, lambda, t, points, eps)?;
    let full = linear_density_on_grid(law, lambda, t, &grid, eps)?;
    if points.iter().all(|&p| grid.index_of(p).is_some()) {
        return full.restrict_to(points);
    }
    let h = grid.spacing();
    let values: Vec<f64> = points.iter().map(|&p| cubic_at(&full.values, &grid, p, h)).collect();
    let mut out = DensityCurve { points: points.to_vec(), values, error_bound: vec![full.error_bound[0]; points.len()], ..full.clone() };
    out.outside_mass = (full.outside_mass + full.integral() - out.integral()).max(0.0);
    Ok(out)
}

/// Grid for [`linear_density`]: default width for the truncation, spacing
/// refined to a divisor of the point spacing when the points are uniform.
pub fn series_grid(law: &JumpLaw, lambda: f64, t: f64, points: &[f64], eps: f64) -> Result<UniformGrid> {
    let tr = poisson_truncation(lambda * t, eps)?;
    let base = law.default_grid(tr.max_terms, t)?;
    let reach = points.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let half = base.half_width().max(reach + 10.0 * t.sqrt());
    let h0 = base.spacing();
    if points.len() >= 2 {
        let step = points[1] - points[0];
        let uniform = points.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
        let k = points[0] / step;
        if uniform && (k - k.round()).abs() < 1e-9 {
            let m = (step / h0 - 1e-9).ceil().max(1.0);
            return UniformGrid::with_spacing(step / m, half);
        }
    }
    UniformGrid::with_spacing(h0, half)
}

fn cubic_at(values: &[f64], grid: &UniformGrid, y: f64, h: f64) -> f64 {
    let pos = (y + grid.half_width()) / h;
    let k = (pos.floor() as isize).clamp(1, values.len() as isize - 3) as usize;
    let s = pos - k as f64;
    let (f0, f1, f2, f3) = (values[k - 1], values[k], values[k + 1], values[k + 2]);
    let l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    (f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3).max(0.0)
}

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("jump rate must be non-negative, got {lambda}")));
    }
    Ok(())
}

fn gaussian_series(w: &[f64], t: f64, beta: f64, points: &[f64]) -> Vec<f64> {
    let mut terms = vec![0.0; w.len()];
    points
        .iter()
        .map(|&z| {
            for (n, (term, wn)) in terms.iter_mut().zip(w).enumerate() {
                *term = wn * gaussian_pdf(z, t + n as f64 * beta);
            }
            pairwise_sum(&terms)
        })
        .collect()
}

fn gaussian_outside(w: &[f64], t: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    let parts: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(n, wn)| {
            let s = (2.0 * (t + n as f64 * beta)).sqrt();
            wn * 0.5 * (erfc(-lo / s) + erfc(hi / s))
        })
        .collect();
    pairwise_sum(&parts)
}

/// Series density of the `d`-dimensional linear model with Gaussian jumps
/// `N(0, Sigma)` along the ray `x + r u`: term `n` is `N(0, t I + n Sigma)`.
pub fn linear_density_multid(law: &JumpLaw, lambda: f64, t: f64, direction: &[f64], radii: &[f64], eps: f64) -> Result<DensityCurve> {
    require_time(t)?;
    check_rate(lambda)?;
    let cov = match law {
        JumpLaw::MultivariateGaussian(g) => g.covariance().clone(),
        JumpLaw::Gaussian { variance } => nalgebra::DMatrix::from_element(1, 1, *variance),
        other => return Err(Error::Unsupported(format!("closed-form multivariate series needs Gaussian jumps, got {}", other.name()))),
    };
    let d = cov.nrows();
    if direction.len() != d {
        return Err(Error::invalid(format!("direction has dimension {}, law has {d}", direction.len())));
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::invalid("direction must be non-zero"));
    }
    if radii.is_empty() || radii[0] < 0.0 || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("radii must be non-negative and strictly increasing"));
    }
    let eig = SymmetricEigen::new(cov);
    let u = nalgebra::DVector::from_iterator(d, direction.iter().map(|v| v / norm));
    // Components of u in the eigenbasis of Sigma.
    let proj: Vec<f64> = (eig.eigenvectors.transpose() * u).iter().map(|c| c * c).collect();
    let sup = 1.0 / (2.0 * PI * t).powf(d as f64 / 2.0);
    let tr = with_sup(poisson_truncation(lambda * t, eps)?, sup);
    let w = poisson_weights(lambda * t, tr.max_terms);
    let mut terms = vec![0.0; w.len()];
    let values = radii
        .iter()
        .map(|&r| {
            for (n, (term, wn)) in terms.iter_mut().zip(&w).enumerate() {
                let n = n as f64;
                let mut quad = 0.0;
                let mut log_det = 0.0;
                for (ev, p) in eig.eigenvalues.iter().zip(&proj) {
                    let s = t + n * ev;
                    quad += r * r * p / s;
                    log_det += s.ln();
                }
                *term = wn * (-0.5 * quad - 0.5 * log_det).exp() / (2.0 * PI).powf(d as f64 / 2.0);
            }
            pairwise_sum(&terms)
        })
        .collect();
    Ok(DensityCurve {
        origin: vec![0.0; d],
        t,
        abscissa: Abscissa::Radius { dimension: d },
        points: radii.to_vec(),
        values,
        method: Method::ClosedForm,
        error_bound: vec![tr.pointwise_bound; radii.len()],
        ci_half_width: None,
        outside_mass: 0.0,
        meta: CurveMeta { jump_rate: Some(lambda), law: Some(law.name()), truncation: Some(tr), ..CurveMeta::default() },
    })
}
