//! Two-sided density envelopes, explicit lower-bound series, calibration of
//! the envelope constants and containment checks.
//!
//! Gaussian jumps: `C^-1 (e^{-c g} + 1_{r=0} / sqrt t) <= f <= C / sqrt t e^{-g / c}`
//! with `g = r sqrt(ln_+(r / t))`. Laplace jumps use `g = r`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Abscissa, DensityCurve};
use crate::error::{Error, Result};
use crate::fft::pairwise_sum;
use crate::io::fmt_f64;
use crate::laws::MvGaussian;
use crate::model::{GaussianHeatKernelParams, ModelSpec};
use crate::series::poisson_weights;
use crate::tail::{tail_bound, ThetaSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    GaussianJump,
    LaplaceJump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    /// Heat-kernel constants `A_T`, `a_T`.
    pub big_a: f64,
    pub small_a: f64,
    /// Envelope constants `C_T`, `c_T`.
    pub big_c: f64,
    pub small_c: f64,
    /// Exponent and constant of the tail-driven upper bound.
    pub q: f64,
    pub c_q_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum Calibration {
    Fitted { safety: f64, reference: String },
    User,
}

/// Where containment was verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub times: Vec<f64>,
    pub r_max: f64,
    pub points_per_time: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSet {
    pub kind: EnvelopeKind,
    pub dimension: usize,
    pub horizon: f64,
    pub constants: EnvelopeConstants,
    pub calibration: Calibration,
    pub validity: Option<Validity>,
}

impl EnvelopeSet {
    /// User-supplied constants; `C_T, c_T, A_T, a_T > 1`, `q > 1`, `C_qT > 0`.
    pub fn new(kind: EnvelopeKind, horizon: f64, constants: EnvelopeConstants) -> Result<Self> {
        let set = Self { kind, dimension: 1, horizon, constants, calibration: Calibration::User, validity: None };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<()> {
        let k = &self.constants;
        if self.dimension != 1 {
            return Err(Error::Unsupported("two-sided envelopes are one-dimensional".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        for (name, v) in [("C_T", k.big_c), ("c_T", k.small_c), ("A_T", k.big_a), ("a_T", k.small_a), ("q", k.q)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and > 1, got {v}")));
            }
        }
        if !(k.c_q_t > 0.0 && k.c_q_t.is_finite()) {
            return Err(Error::invalid(format!("C_qT must be positive, got {}", k.c_q_t)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        set.check()?;
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("time {t} outside (0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// Envelope value at time `t` and distance `r`.
    pub fn evaluate(&self, t: f64, r: f64, side: Side) -> Result<f64> {
        self.check_time(t)?;
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("distance must be non-negative, got {r}")));
        }
        Ok(shape_value(self.kind, self.constants.big_c, self.constants.small_c, t, r, side))
    }
}

/// `ln_+(x) = max(ln x, 0)`.
pub fn ln_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

fn decay(kind: EnvelopeKind, t: f64, r: f64) -> f64 {
    match kind {
        EnvelopeKind::GaussianJump => r * ln_plus(r / t).sqrt(),
        EnvelopeKind::LaplaceJump => r,
    }
}

fn shape_value(kind: EnvelopeKind, big_c: f64, small_c: f64, t: f64, r: f64, side: Side) -> f64 {
    let g = decay(kind, t, r);
    match side {
        Side::Lower => {
            let spike = if r == 0.0 { 1.0 / t.sqrt() } else { 0.0 };
            ((-small_c * g).exp() + spike) / big_c
        }
        Side::Upper => big_c / t.sqrt() * (-g / small_c).exp(),
    }
}

pub fn gaussian_envelope(set: &EnvelopeSet, t: f64, r: f64, side: Side) -> Result<f64> {
    if set.kind != EnvelopeKind::GaussianJump {
        return Err(Error::invalid("envelope set is not of Gaussian-jump kind"));
    }
    set.evaluate(t, r, side)
}

pub fn laplace_envelope(set: &EnvelopeSet, t: f64, r: f64, side: Side) -> Result<f64> {
    if set.kind != EnvelopeKind::LaplaceJump {
        return Err(Error::invalid("envelope set is not of Laplace-jump kind"));
    }
    set.evaluate(t, r, side)
}

/// Lower bound on `f_t` for Gaussian jumps `N(0, beta)`:
/// `e^{-lambda t} sum_{n <= N} C^{n+1} N(0, t/a + n beta)(r) (lambda t)^n / n!`
/// with `C = 1 / (A sqrt a)`. Every term is positive, so each partial sum is
/// a lower bound.
pub fn gaussian_lower_series(params: GaussianHeatKernelParams, beta: f64, lambda: f64, t: f64, r: f64, n_max: usize) -> f64 {
    let c = 1.0 / (params.big_a * params.small_a.sqrt());
    let w = poisson_weights(lambda * t, n_max);
    let terms: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(n, wn)| {
            let v = t / params.small_a + n as f64 * beta;
            wn * c.powi(n as i32 + 1) * (-r * r / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
        })
        .collect();
    pairwise_sum(&terms)
}

/// `d`-dimensional lower bound for Gaussian jumps `N(0, Sigma)`:
/// `e^{-lambda t} sum_{1 <= n <= N} C^{n+1} e^{-r^2 |Sigma^-1| / 2n}
/// / ((2 pi)^{d/2} n^{d/2} sqrt(det(Sigma + T/a I))) (lambda t)^n / n!`
/// with `C = 1 / (A a^{d/2})`, plus the heat-kernel term
/// `e^{-lambda t} C / (2 pi t)^{d/2}` at `r = 0`.
pub fn gaussian_lower_series_multid(
    params: GaussianHeatKernelParams,
    sigma: &MvGaussian,
    lambda: f64,
    t: f64,
    horizon: f64,
    r: f64,
    n_max: usize,
) -> f64 {
    let d = sigma.dimension();
    let half_d = d as f64 / 2.0;
    let c = 1.0 / (params.big_a * params.small_a.powf(half_d));
    let shifted = sigma.covariance() + nalgebra::DMatrix::identity(d, d) * (horizon / params.small_a);
    let det = shifted.determinant();
    let inv_norm = sigma.inverse_norm();
    let w = poisson_weights(lambda * t, n_max);
    let mut terms: Vec<f64> = w
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, wn)| {
            let n = n as f64;
            wn * c.powi(n as i32 + 1) * (-r * r * inv_norm / (2.0 * n)).exp()
                / ((2.0 * PI).powf(half_d) * n.powf(half_d) * det.sqrt())
        })
        .collect();
    if r == 0.0 {
        terms.push(w[0] * c / (2.0 * PI * t).powf(half_d));
    }
    pairwise_sum(&terms)
}

/// Explicit Laplace-jump lower bound and the constants of its derivation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceLowerBound {
    pub value: f64,
    /// `mu / (2 A sqrt(2a))` in one dimension (product over coordinates,
    /// divided by `A` once, in `d` dimensions).
    pub c_t: f64,
    /// Coefficient of `e^{-4 |mu| r}` for `r > 0`.
    pub prefactor: f64,
    pub decay_rate: f64,
}

/// Lower bound on `f_t(x, y)` for (product) Laplace jumps with rates `mu`.
///
/// `r = 0`: the heat-kernel term `e^{-lambda T} / (A (2 pi t)^{d/2})`.
/// `r > 0`: each one-jump kernel satisfies
/// `q_t(z) >= (C_T/2) e^{-|mu|^2 t / 2a} e^{-2 sum mu_i |z_i|}`; convolving
/// `n` of them costs `(C_T/2) / prod(2 mu_i)` per extra factor, and the
/// final heat kernel is bounded through Jensen's inequality by
/// `e^{-2 sum mu_i sqrt(2T / (pi a))} / (A a^{d/2})`. Summing the series
/// over `n >= 1` gives `prefactor * e^{-2|mu| r}`, reported with the weaker
/// rate `4|mu|`.
pub fn laplace_lower_bound(params: GaussianHeatKernelParams, mu: &[f64], lambda: f64, t: f64, horizon: f64, r: f64) -> Result<LaplaceLowerBound> {
    if mu.is_empty() || mu.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::invalid("Laplace rates must be positive"));
    }
    if !(t > 0.0 && t <= horizon * (1.0 + 1e-12)) || !(r >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::invalid(format!("need 0 < t <= T, r >= 0, lambda >= 0 (t={t}, T={horizon}, r={r})")));
    }
    let d = mu.len() as f64;
    let (big_a, a) = (params.big_a, params.small_a);
    let mu_norm = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
    let c_t = mu.iter().map(|m| m / (2.0 * (2.0 * a).sqrt())).product::<f64>() / big_a;
    let half = 0.5 * c_t;
    let g = half / mu.iter().map(|m| 2.0 * m).product::<f64>();
    let jumps = mu.iter().map(|m| 2.0 * m).product::<f64>() * (g * lambda * t).exp_m1();
    let heat = (-2.0 * mu.iter().sum::<f64>() * (2.0 * horizon / (PI * a)).sqrt()).exp() / (big_a * a.powf(d / 2.0));
    let prefactor = (-lambda * t).exp() * jumps * (-mu_norm * mu_norm * t / (2.0 * a)).exp() * heat;
    let decay_rate = 4.0 * mu_norm;
    let value = if r == 0.0 {
        (-lambda * horizon).exp() / (big_a * (2.0 * PI * t).powf(d / 2.0))
    } else {
        prefactor * (-decay_rate * r).exp()
    };
    Ok(LaplaceLowerBound { value, c_t, prefactor, decay_rate })
}

/// Heat-kernel constants valid for every frozen-coefficient kernel
/// `N(0, s t)` with `s` in `[rho, c2^2]`; exactly `A = a = 1` for the linear
/// model.
pub fn frozen_heat_kernel_params(spec: &ModelSpec) -> GaussianHeatKernelParams {
    let (lo, hi) = (spec.ellipticity, spec.diffusion_bound * spec.diffusion_bound);
    let a = [lo, hi].iter().map(|s| s.max(1.0 / s)).fold(1.0, f64::max);
    let big_a = [lo, hi].iter().map(|s| s.sqrt().max(1.0 / s.sqrt())).fold(1.0, f64::max);
    GaussianHeatKernelParams { big_a, small_a: a }
}

/// Inputs of [`calibrate`].
pub struct CalibrationRequest<'a> {
    pub kind: EnvelopeKind,
    pub horizon: f64,
    /// Reference curves (one per time) on offsets `y - x`.
    pub references: &'a [DensityCurve],
    pub heat: GaussianHeatKernelParams,
    /// Tail solver and drift bound for `C_qT`.
    pub tail: (&'a ThetaSolver, f64),
    pub q: f64,
    /// Multiplier applied to every fitted constant (>= 1).
    pub safety: f64,
    pub reference_label: String,
}

#[derive(Clone, Copy, Debug)]
struct Point {
    t: f64,
    r: f64,
    f: f64,
}

fn reference_points(curves: &[DensityCurve]) -> Result<Vec<Point>> {
    let mut pts = Vec::new();
    for c in curves {
        if c.abscissa != Abscissa::Position {
            return Err(Error::Unsupported("calibration needs one-dimensional reference curves".into()));
        }
        for (y, f) in c.points.iter().zip(&c.values) {
            pts.push(Point { t: c.t, r: (y - c.origin[0]).abs(), f: *f });
        }
    }
    Ok(pts)
}

/// Smallest `C` for which every point is contained, given `c`, and the
/// point that requires it.
fn required_big_c(kind: EnvelopeKind, pts: &[Point], small_c: f64) -> (f64, usize, Side) {
    let mut best = (0.0f64, 0usize, Side::Lower);
    for (i, p) in pts.iter().enumerate() {
        let lower = shape_value(kind, 1.0, small_c, p.t, p.r, Side::Lower) / p.f;
        let upper = p.f / shape_value(kind, 1.0, small_c, p.t, p.r, Side::Upper);
        let lower = if lower.is_nan() { f64::INFINITY } else { lower };
        if lower > best.0 {
            best = (lower, i, Side::Lower);
        }
        if upper > best.0 {
            best = (upper, i, Side::Upper);
        }
    }
    best
}

fn feasible(kind: EnvelopeKind, pts: &[Point], big_c: f64, small_c: f64) -> bool {
    required_big_c(kind, pts, small_c).0 <= big_c
}

fn bisect_log(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if mid <= lo || mid >= hi || hi / lo < 1.0 + 1e-12 {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Fits `C_T, c_T` (and `C_qT`) to the reference curves.
///
/// 1. bisect a common `kappa = C_T = c_T` to feasibility;
/// 2. bisect `c_T` down with `C_T` at its least feasible value for `kappa`;
/// 3. reset `C_T` to its least feasible value for the new `c_T`;
/// 4. multiply every constant by the safety factor (which preserves
///    containment, as both requirements are monotone).
pub fn calibrate(req: &CalibrationRequest) -> Result<EnvelopeSet> {
    if !(req.safety >= 1.0 && req.safety.is_finite()) {
        return Err(Error::invalid(format!("safety factor must be >= 1, got {}", req.safety)));
    }
    if !(req.q > 1.0) {
        return Err(Error::invalid(format!("q must exceed 1, got {}", req.q)));
    }
    if req.references.is_empty() {
        return Err(Error::invalid("calibration needs at least one reference curve"));
    }
    for c in req.references {
        if !(c.t > 0.0 && c.t <= req.horizon * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("reference time {} outside (0, {}]", c.t, req.horizon)));
        }
    }
    let pts = reference_points(req.references)?;
    if let Some(p) = pts.iter().find(|p| !(p.f > 0.0) || !p.f.is_finite()) {
        return Err(Error::InfeasibleCalibration {
            t: p.t,
            r: p.r,
            side: "lower",
            detail: format!("reference density {} is not positive", p.f),
        });
    }
    let kind = req.kind;
    const KAPPA_MAX: f64 = 1e12;
    let mut hi = 2.0;
    while !feasible(kind, &pts, hi, hi) {
        hi *= 2.0;
        if hi > KAPPA_MAX {
            let (_, i, side) = required_big_c(kind, &pts, KAPPA_MAX);
            return Err(Error::InfeasibleCalibration {
                t: pts[i].t,
                r: pts[i].r,
                side: if side == Side::Lower { "lower" } else { "upper" },
                detail: "no constant below 1e12 contains the reference".into(),
            });
        }
    }
    let kappa = if feasible(kind, &pts, 1.0, 1.0) { 1.0 } else { bisect_log(1.0, hi, |k| feasible(kind, &pts, k, k)) };
    let big_c = required_big_c(kind, &pts, kappa).0.max(1.0);
    let small_c = if feasible(kind, &pts, big_c, 1.0) { 1.0 } else { bisect_log(1.0, kappa, |c| feasible(kind, &pts, big_c, c)) };
    let big_c = required_big_c(kind, &pts, small_c).0.max(1.0);

    let (solver, c1) = req.tail;
    let ratios: Vec<f64> = pts
        .par_iter()
        .map(|p| Ok(p.f * p.t.sqrt() / tail_bound(solver, c1, p.t, p.r)?.powf(1.0 / req.q)))
        .collect::<Result<Vec<f64>>>()?;
    let c_q_t = ratios.iter().cloned().fold(0.0, f64::max);

    let s = req.safety;
    let bump = |v: f64| (v * s).max(1.0 + 1e-9);
    let constants = EnvelopeConstants {
        big_a: bump(req.heat.big_a),
        small_a: bump(req.heat.small_a),
        big_c: bump(big_c),
        small_c: bump(small_c),
        q: req.q,
        c_q_t: c_q_t * s,
    };
    let mut times: Vec<f64> = req.references.iter().map(|c| c.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let set = EnvelopeSet {
        kind,
        dimension: 1,
        horizon: req.horizon,
        constants,
        calibration: Calibration::Fitted { safety: s, reference: req.reference_label.clone() },
        validity: Some(Validity {
            times,
            r_max: pts.iter().map(|p| p.r).fold(0.0, f64::max),
            points_per_time: req.references[0].len(),
            tolerance: 0.0,
        }),
    };
    set.check()?;
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentRow {
    pub t: f64,
    pub y: f64,
    pub r: f64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    /// `min(value + slack - lower, upper - (value - slack))`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub rows: Vec<ContainmentRow>,
    /// True when the curve is a Monte Carlo estimate.
    pub statistical: bool,
    pub slack_widths: f64,
}

impl ContainmentReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn first_violation(&self) -> Option<&ContainmentRow> {
        self.rows.iter().find(|r| !r.pass)
    }

    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn extend(&mut self, other: ContainmentReport) {
        self.statistical |= other.statistical;
        self.rows.extend(other.rows);
    }

    /// Columns `t,r,lower,value,upper,margin,pass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,r,lower,value,upper,margin,pass")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.r),
                fmt_f64(r.lower),
                fmt_f64(r.value),
                fmt_f64(r.upper),
                fmt_f64(r.margin),
                r.pass
            )?;
        }
        Ok(())
    }
}

/// Compares a curve with the envelope pair. Statistical curves get a slack
/// of `slack_widths` confidence half-widths on each side.
pub fn check_containment(set: &EnvelopeSet, curve: &DensityCurve, slack_widths: f64) -> Result<ContainmentReport> {
    set.check()?;
    curve.check()?;
    if curve.abscissa != Abscissa::Position {
        return Err(Error::GridMismatch("envelopes apply to one-dimensional curves".into()));
    }
    set.check_time(curve.t)?;
    if let Some(v) = &set.validity {
        if !v.times.iter().any(|s| (s - curve.t).abs() <= 1e-12 * s.max(1.0)) {
            return Err(Error::GridMismatch(format!("time {} is not among the validated times {:?}", curve.t, v.times)));
        }
        let reach = curve.points.iter().map(|y| (y - curve.origin[0]).abs()).fold(0.0, f64::max);
        if reach > v.r_max * (1.0 + 1e-12) {
            return Err(Error::GridMismatch(format!("curve reaches r = {reach}, envelopes were validated up to {}", v.r_max)));
        }
    }
    let statistical = curve.method.is_statistical();
    if statistical && curve.ci_half_width.is_none() {
        return Err(Error::invalid("statistical curve without confidence half-widths"));
    }
    let rows = curve
        .points
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = (y - curve.origin[0]).abs();
            let lower = set.evaluate(curve.t, r, Side::Lower)?;
            let upper = set.evaluate(curve.t, r, Side::Upper)?;
            let value = curve.values[i];
            let slack = curve.ci_half_width.as_ref().map_or(0.0, |c| slack_widths * c[i]);
            let margin = (value + slack - lower).min(upper - (value - slack));
            Ok(ContainmentRow { t: curve.t, y, r, lower, value, upper, margin, pass: margin >= 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContainmentReport { rows, statistical, slack_widths: if statistical { slack_widths } else { 0.0 } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(kind: EnvelopeKind, big_c: f64, small_c: f64) -> EnvelopeSet {
        EnvelopeSet::new(
            kind,
            1.0,
            EnvelopeConstants { big_a: 1.5, small_a: 1.5, big_c, small_c, q: 2.0, c_q_t: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn gaussian_shape_values() {
        let s = set(EnvelopeKind::GaussianJump, 2.0, 2.0);
        assert_eq!(gaussian_envelope(&s, 0.25, 0.0, Side::Lower).unwrap(), 1.5);
        assert_eq!(gaussian_envelope(&s, 0.25, 0.0, Side::Upper).unwrap(), 4.0);
        // ln_+ clamps: r/t <= 1 leaves the exponent at zero.
        assert_eq!(gaussian_envelope(&s, 1.0, 0.7, Side::Upper).unwrap(), 2.0);
        let up = gaussian_envelope(&s, 1.0, 4.0, Side::Upper).unwrap();
        assert!((up.ln() - (2f64.ln() - 0.5 * 4.0 * 4f64.ln().sqrt())).abs() < 1e-14);
        assert!(gaussian_envelope(&s, 1.5, 0.0, Side::Upper).is_err());
        assert!(laplace_envelope(&s, 0.5, 0.0, Side::Upper).is_err());
    }

    #[test]
    fn laplace_shape_values() {
        let s = set(EnvelopeKind::LaplaceJump, 3.0, 4.0);
        let t = 0.64;
        assert!((laplace_envelope(&s, t, 0.0, Side::Lower).unwrap() - (1.0 + 1.25) / 3.0).abs() < 1e-15);
        let gap = |r: f64| {
            laplace_envelope(&s, t, r, Side::Upper).unwrap().ln() - laplace_envelope(&s, t, r, Side::Lower).unwrap().ln()
        };
        assert!(((gap(3.0) - gap(2.0)) - (4.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn constants_must_exceed_one() {
        let k = EnvelopeConstants { big_a: 1.5, small_a: 1.5, big_c: 1.0, small_c: 2.0, q: 2.0, c_q_t: 1.0 };
        assert!(EnvelopeSet::new(EnvelopeKind::GaussianJump, 1.0, k).is_err());
        let s = set(EnvelopeKind::LaplaceJump, 2.0, 3.0);
        assert_eq!(EnvelopeSet::from_json(&s.to_json().unwrap()).unwrap(), s);
    }

    #[test]
    fn lower_series_collapses_without_jumps() {
        let p = GaussianHeatKernelParams::new(1.2, 1.1).unwrap();
        let v = gaussian_lower_series(p, 1.0, 0.0, 0.5, 0.3, 20);
        assert!((v - p.lower(0.5, 0.3, 1)).abs() < 1e-15);
        let sigma = MvGaussian::new(nalgebra::DMatrix::identity(2, 2)).unwrap();
        let v = gaussian_lower_series_multid(p, &sigma, 0.0, 0.5, 1.0, 0.0, 20);
        assert!((v - 1.0 / (1.2 * 1.1 * 2.0 * PI * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn laplace_lower_bound_shape() {
        let p = GaussianHeatKernelParams::exact();
        let b = laplace_lower_bound(p, &[1.0], 1.0, 0.5, 1.0, 0.0).unwrap();
        assert!((b.value - (-1.0f64).exp() / (2.0 * PI * 0.5).sqrt()).abs() < 1e-15);
        assert!((b.c_t - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        let b1 = laplace_lower_bound(p, &[1.0], 1.0, 0.5, 1.0, 1.0).unwrap();
        let b2 = laplace_lower_bound(p, &[1.0], 1.0, 0.5, 1.0, 2.0).unwrap();
        assert!(((b1.value / b2.value).ln() - 4.0).abs() < 1e-12);
        let b = laplace_lower_bound(p, &[3.0, 4.0], 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(b.decay_rate, 20.0);
    }
}
