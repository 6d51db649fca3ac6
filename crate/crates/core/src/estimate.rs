//! Density and tail estimates from simulated ensembles.
//!
//! Confidence intervals for the KDE come from batch means over 20
//! index-contiguous batches of the ensemble, floored at the resolution of a
//! single sample: where no sample lies within reach of a point the batch
//! spread is zero, yet the estimator cannot distinguish densities smaller
//! than `K(0) / (N h)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Abscissa, CurveMeta, DensityCurve, Method};
use crate::error::{Error, Result};
use crate::simulate::{PathEnsemble, Z_95};

/// Number of batches used for batch-means confidence intervals.
pub const BATCHES: usize = 20;

/// 97.5% quantile of Student's t with 19 degrees of freedom.
pub const T19_975: f64 = 2.093_024_054_408_263;

/// Kernel support used in evaluation, in bandwidths.
const KERNEL_REACH: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) N^{-1/5}`.
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    /// Evaluation points `y` (absolute positions).
    pub points: Vec<f64>,
}

fn std_normal(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        s[k] + frac * (s[(k + 1).min(s.len() - 1)] - s[k])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Samples sorted by value, each tagged with its batch.
fn sorted_with_batches(values: &[f64]) -> Vec<(f64, u8)> {
    let n = values.len();
    let mut v: Vec<(f64, u8)> = values.iter().enumerate().map(|(i, &x)| (x, (i * BATCHES / n) as u8)).collect();
    v.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

fn batch_sizes(n: usize) -> [f64; BATCHES] {
    let mut sizes = [0.0; BATCHES];
    for (b, s) in sizes.iter_mut().enumerate() {
        // Batch b holds indices i with floor(i B / n) = b.
        let start = (b * n).div_ceil(BATCHES);
        let end = ((b + 1) * n).div_ceil(BATCHES);
        *s = (end - start) as f64;
    }
    sizes
}

/// Estimate and 95% half-width from per-batch kernel sums.
fn batch_estimate(sums: &[f64; BATCHES], sizes: &[f64; BATCHES], n: f64, scale: f64, floor: f64) -> (f64, f64) {
    let total: f64 = sums.iter().sum();
    let est = total / (n * scale);
    let means: Vec<f64> = sums.iter().zip(sizes).map(|(s, m)| s / (m * scale)).collect();
    let mean = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (BATCHES - 1) as f64;
    let hw = T19_975 * (var / BATCHES as f64).sqrt();
    (est, hw.max(floor))
}

/// Gaussian-kernel density estimate of a one-dimensional ensemble.
pub fn kde(ens: &PathEnsemble, cfg: &KdeConfig) -> Result<DensityCurve> {
    if ens.dimension() != 1 {
        return Err(Error::Unsupported("kde needs a one-dimensional ensemble; use kde_2d or radial_histogram".into()));
    }
    if ens.len() < 100 {
        return Err(Error::invalid(format!("kde needs at least 100 samples, got {}", ens.len())));
    }
    if cfg.points.is_empty() || cfg.points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("evaluation points must be non-empty and strictly increasing"));
    }
    let h = match cfg.bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(ens.terminal_values()),
        Bandwidth::Fixed(h) => h,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("degenerate bandwidth {h}")));
    }
    let samples = sorted_with_batches(ens.terminal_values());
    let n = samples.len();
    let sizes = batch_sizes(n);
    let floor = Z_95 * std_normal(0.0) / (n as f64 * h);
    let (values, ci): (Vec<f64>, Vec<f64>) = cfg
        .points
        .par_iter()
        .map(|&y| {
            let lo = samples.partition_point(|s| s.0 < y - KERNEL_REACH * h);
            let hi = samples.partition_point(|s| s.0 <= y + KERNEL_REACH * h);
            let mut sums = [0.0; BATCHES];
            for &(x, b) in &samples[lo..hi] {
                sums[b as usize] += std_normal((y - x) / h);
            }
            batch_estimate(&sums, &sizes, n as f64, h, floor)
        })
        .unzip();
    let len = values.len();
    Ok(DensityCurve {
        origin: ens.origin().to_vec(),
        t: ens.time(),
        abscissa: Abscissa::Position,
        points: cfg.points.clone(),
        values,
        method: Method::Kde,
        error_bound: vec![0.0; len],
        ci_half_width: Some(ci),
        outside_mass: outside_fraction(&samples, cfg.points[0], cfg.points[len - 1]),
        meta: CurveMeta { bandwidth: Some(h), paths: Some(n), seed: Some(ens.provenance().seed), ..CurveMeta::default() },
    })
}

fn outside_fraction(sorted: &[(f64, u8)], lo: f64, hi: f64) -> f64 {
    let below = sorted.partition_point(|s| s.0 < lo);
    let above = sorted.len() - sorted.partition_point(|s| s.0 <= hi);
    (below + above) as f64 / sorted.len() as f64
}

/// Product-kernel estimate of a two-dimensional density on a tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density2d {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
    /// Row-major: `values[i * ys.len() + j]` is the estimate at `(xs[i], ys[j])`.
    pub values: Vec<f64>,
    pub ci_half_width: Vec<f64>,
}

pub fn kde_2d(ens: &PathEnsemble, xs: &[f64], ys: &[f64], h: f64) -> Result<Density2d> {
    if ens.dimension() != 2 {
        return Err(Error::Unsupported("kde_2d needs a two-dimensional ensemble".into()));
    }
    if ens.len() < 100 {
        return Err(Error::invalid(format!("kde needs at least 100 samples, got {}", ens.len())));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("degenerate bandwidth {h}")));
    }
    let n = ens.len();
    let mut samples: Vec<(f64, f64, u8)> =
        (0..n).map(|i| (ens.terminal(i)[0], ens.terminal(i)[1], (i * BATCHES / n) as u8)).collect();
    samples.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let sizes = batch_sizes(n);
    let floor = Z_95 * std_normal(0.0).powi(2) / (n as f64 * h * h);
    let cells: Vec<(f64, f64)> = xs
        .par_iter()
        .flat_map_iter(|&x| {
            let lo = samples.partition_point(|s| s.0 < x - KERNEL_REACH * h);
            let hi = samples.partition_point(|s| s.0 <= x + KERNEL_REACH * h);
            let window = &samples[lo..hi];
            ys.iter()
                .map(|&y| {
                    let mut sums = [0.0; BATCHES];
                    for &(a, b, k) in window {
                        if (b - y).abs() <= KERNEL_REACH * h {
                            sums[k as usize] += std_normal((x - a) / h) * std_normal((y - b) / h);
                        }
                    }
                    batch_estimate(&sums, &sizes, n as f64, h * h, floor)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (values, ci_half_width) = cells.into_iter().unzip();
    Ok(Density2d { xs: xs.to_vec(), ys: ys.to_vec(), bandwidth: h, values, ci_half_width })
}

/// Counts over `[edges[k], edges[k+1])` with multinomial 95% intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub density: Vec<f64>,
    pub ci_half_width: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Bin-average density as a curve at the bin centres.
    pub fn to_curve(&self, ens: &PathEnsemble) -> DensityCurve {
        let centres: Vec<f64> = self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let n = centres.len();
        let total = self.total() as f64;
        DensityCurve {
            origin: ens.origin().to_vec(),
            t: ens.time(),
            abscissa: Abscissa::Position,
            points: centres,
            values: self.density.clone(),
            method: Method::Histogram,
            error_bound: vec![0.0; n],
            ci_half_width: Some(self.ci_half_width.clone()),
            outside_mass: (self.underflow + self.overflow) as f64 / total,
            meta: CurveMeta { paths: Some(ens.len()), seed: Some(ens.provenance().seed), ..CurveMeta::default() },
        }
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("bin edges must be finite and strictly increasing (at least two)"));
    }
    Ok(())
}

fn proportion_ci(count: u64, n: f64, volume: f64) -> (f64, f64) {
    let p = count as f64 / n;
    (p / volume, Z_95 * (p * (1.0 - p) / n).sqrt() / volume)
}

pub fn histogram(ens: &PathEnsemble, edges: &[f64]) -> Result<Histogram> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if ens.dimension() != 1 {
        return Err(Error::Unsupported("histogram needs a one-dimensional ensemble; use radial_histogram".into()));
    }
    check_edges(edges)?;
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let (mut under, mut over) = (0u64, 0u64);
    for &x in ens.terminal_values() {
        if x < edges[0] {
            under += 1;
        } else if x >= edges[bins] {
            over += 1;
        } else {
            let k = edges.partition_point(|e| *e <= x) - 1;
            counts[k] += 1;
        }
    }
    let n = ens.len() as f64;
    let (density, ci_half_width) = counts.iter().zip(edges.windows(2)).map(|(c, w)| proportion_ci(*c, n, w[1] - w[0])).unzip();
    Ok(Histogram { edges: edges.to_vec(), counts, underflow: under, overflow: over, density, ci_half_width })
}

/// Density estimate averaged over the shell `r_lo <= |X - x| < r_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellEstimate {
    pub r_lo: f64,
    pub r_hi: f64,
    pub count: u64,
    pub density: f64,
    /// Standard error of `density`.
    pub std_error: f64,
    pub ci_half_width: f64,
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    crate::curve::sphere_area(d) / d as f64
}

/// Radial histogram over arbitrary (possibly non-adjacent) shells.
pub fn radial_histogram(ens: &PathEnsemble, x: &[f64], shells: &[(f64, f64)]) -> Result<Vec<ShellEstimate>> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if x.len() != ens.dimension() {
        return Err(Error::invalid("centre has the wrong dimension"));
    }
    if shells.iter().any(|(lo, hi)| !(*lo >= 0.0 && lo < hi && hi.is_finite())) {
        return Err(Error::invalid("shells need 0 <= r_lo < r_hi < inf"));
    }
    let mut dist = ens.distances_from(x);
    dist.par_sort_unstable_by(f64::total_cmp);
    let n = dist.len() as f64;
    let d = ens.dimension() as i32;
    let vd = unit_ball_volume(ens.dimension());
    Ok(shells
        .iter()
        .map(|&(lo, hi)| {
            let count = (dist.partition_point(|v| *v < hi) - dist.partition_point(|v| *v < lo)) as u64;
            let volume = vd * (hi.powi(d) - lo.powi(d));
            let (density, hw) = proportion_ci(count, n, volume);
            ShellEstimate { r_lo: lo, r_hi: hi, count, density, std_error: hw / Z_95, ci_half_width: hw }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(values: Vec<f64>) -> PathEnsemble {
        let n = values.len();
        PathEnsemble::from_parts(1, 1.0, vec![0.0], values, vec![0; n], 0).unwrap()
    }

    #[test]
    fn silverman_for_uniform_spacing() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let h = silverman_bandwidth(&v);
        let sd = (1000.0f64 * 1001.0 / 12.0).sqrt();
        let iqr = 499.5;
        assert!((h - 0.9 * sd.min(iqr / 1.34) * 1000f64.powf(-0.2)).abs() < 1e-9);
    }

    #[test]
    fn kde_of_a_single_cluster() {
        let ens = ensemble(vec![0.0; 200]);
        let c = kde(&ens, &KdeConfig { bandwidth: Bandwidth::Fixed(0.5), points: vec![-1.0, 0.0, 1.0] }).unwrap();
        assert!((c.values[1] - std_normal(0.0) / 0.5).abs() < 1e-12);
        assert!((c.values[0] - c.values[2]).abs() < 1e-15);
        // Identical batches: spread zero, so the floor applies.
        let floor = Z_95 * std_normal(0.0) / (200.0 * 0.5);
        assert_eq!(c.ci_half_width.as_ref().unwrap()[1], floor);
        assert!(kde(&ensemble(vec![0.0; 50]), &KdeConfig { bandwidth: Bandwidth::Fixed(0.5), points: vec![0.0] }).is_err());
        assert!(kde(&ens, &KdeConfig { bandwidth: Bandwidth::Fixed(0.0), points: vec![0.0] }).is_err());
    }

    #[test]
    fn kde_is_permutation_invariant() {
        let v: Vec<f64> = (0..400).map(|i| ((i * 7919) % 401) as f64 / 40.0 - 5.0).collect();
        let mut w = v.clone();
        w.reverse();
        let cfg = KdeConfig { bandwidth: Bandwidth::Fixed(0.3), points: vec![-2.0, 0.0, 2.0] };
        let a = kde(&ensemble(v), &cfg).unwrap();
        let b = kde(&ensemble(w), &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn histogram_conserves_counts() {
        let ens = ensemble(vec![-3.0, -0.5, 0.0, 0.2, 0.9, 1.0, 5.0]);
        let h = histogram(&ens, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.counts, vec![1, 3]);
        assert_eq!((h.underflow, h.overflow), (1, 2));
        assert_eq!(h.total(), 7);
        let empty = PathEnsemble::from_parts(1, 1.0, vec![0.0], vec![], vec![], 0).unwrap();
        assert!(matches!(histogram(&empty, &[0.0, 1.0]), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn radial_shell_volume() {
        let ens = PathEnsemble::from_parts(2, 1.0, vec![0.0, 0.0], vec![0.1, 0.0, 0.0, 0.3, 2.0, 2.0], vec![0; 3], 0).unwrap();
        let s = radial_histogram(&ens, &[0.0, 0.0], &[(0.0, 0.2), (0.25, 0.35)]).unwrap();
        assert_eq!(s[0].count, 1);
        assert!((s[0].density - (1.0 / 3.0) / (PI * 0.04)).abs() < 1e-12);
        assert!((s[1].density - (1.0 / 3.0) / (PI * (0.35f64.powi(2) - 0.25f64.powi(2)))).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-14);
    }
}
