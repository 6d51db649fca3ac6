//! Symmetric uniform grids and densities sampled on them.
//!
//! Every sampled density carries two arrays: point values of the density at
//! the grid nodes and the quadrature masses used when the density takes part
//! in a convolution. For smooth densities the masses are `h * value`; for a
//! density with a slope discontinuity at the origin (Laplace) the origin mass
//! carries the Euler-Maclaurin correction `h^2/12 * (f'(0+) - f'(0-))`, which
//! keeps the discrete convolution fourth-order accurate.

use crate::error::{Error, Result};
use crate::fft;

/// Number of intervals used when no grid is supplied.
pub const DEFAULT_INTERVALS: usize = 1 << 14;
/// Half-width multiplier applied to the standard deviation heuristic.
pub const DEFAULT_WIDTH_FACTOR: f64 = 12.0;
/// Largest mass allowed to be dropped off the grid by default.
pub const DEFAULT_LEAK_TOLERANCE: f64 = 1e-9;
/// Largest mass negative FFT ringing may remove before the operation fails.
pub const CLIP_LIMIT: f64 = 1e-9;

/// Grid with nodes `-L + k h`, `k = 0..=intervals`, `h = 2L / intervals`.
///
/// `intervals` is always even so the origin is a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformGrid {
    half_width: f64,
    intervals: usize,
}

impl UniformGrid {
    pub fn new(half_width: f64, intervals: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!("grid half-width must be positive, got {half_width}")));
        }
        if intervals < 2 || !intervals.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid interval count must be even and >= 2, got {intervals}")));
        }
        Ok(Self { half_width, intervals })
    }

    /// Grid with the given spacing whose half-width is the smallest multiple
    /// of the spacing that is at least `min_half_width`.
    pub fn with_spacing(spacing: f64, min_half_width: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        let half = (min_half_width / spacing - 1e-9).ceil().max(1.0) as usize;
        Self::new(half as f64 * spacing, 2 * half)
    }

    /// Default grid for a density whose variance is `variance`:
    /// half-width `12 * sqrt(variance)`, `2^14` intervals.
    pub fn for_variance(variance: f64) -> Result<Self> {
        Self::new(DEFAULT_WIDTH_FACTOR * variance.max(f64::MIN_POSITIVE).sqrt(), DEFAULT_INTERVALS)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.intervals as f64
    }

    pub fn center(&self) -> usize {
        self.intervals / 2
    }

    pub fn node(&self, k: usize) -> f64 {
        // Symmetric evaluation keeps node(center + j) == -node(center - j) exactly.
        let j = k as f64 - self.center() as f64;
        j * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `y` up to a small fraction of the spacing.
    pub fn index_of(&self, y: f64) -> Option<usize> {
        let pos = (y + self.half_width) / self.spacing();
        let k = pos.round();
        if k < 0.0 || k > self.intervals as f64 || (pos - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }
}

/// A density sampled on a [`UniformGrid`].
#[derive(Clone, Debug)]
pub struct SampledDensity {
    grid: UniformGrid,
    values: Vec<f64>,
    masses: Vec<f64>,
    point_mass: bool,
    leak: f64,
}

impl SampledDensity {
    /// Smooth density: masses are `h * value`.
    pub fn from_values(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let h = grid.spacing();
        let masses = values.iter().map(|v| v * h).collect();
        Ok(Self { grid, values, masses, point_mass: false, leak: 0.0 })
    }

    /// Density with a slope jump `f'(0+) - f'(0-)` at the origin.
    pub(crate) fn with_origin_kink(grid: UniformGrid, values: Vec<f64>, slope_jump: f64) -> Result<Self> {
        let mut s = Self::from_values(grid, values)?;
        let h = grid.spacing();
        s.masses[grid.center()] += h * h / 12.0 * slope_jump;
        Ok(s)
    }

    /// Density given by its quadrature masses; values are `mass / h`.
    pub(crate) fn from_masses(grid: UniformGrid, masses: Vec<f64>, leak: f64) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} masses for a grid of {} nodes", masses.len(), grid.len())));
        }
        let h = grid.spacing();
        let values = masses.iter().map(|m| m / h).collect();
        Ok(Self { grid, values, masses, point_mass: false, leak })
    }

    /// Unit point mass at the origin: one cell of height `1/h`.
    pub fn point_mass(grid: UniformGrid) -> Self {
        let h = grid.spacing();
        let mut values = vec![0.0; grid.len()];
        let mut masses = vec![0.0; grid.len()];
        values[grid.center()] = 1.0 / h;
        masses[grid.center()] = 1.0;
        Self { grid, values, masses, point_mass: true, leak: 0.0 }
    }

    pub(crate) fn set_leak(&mut self, leak: f64) {
        self.leak = leak;
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_point_mass(&self) -> bool {
        self.point_mass
    }

    /// Mass estimated to have left the grid while building this density.
    pub fn leak(&self) -> f64 {
        self.leak
    }

    /// Total quadrature mass on the grid.
    pub fn total_mass(&self) -> f64 {
        fft::pairwise_sum(&self.masses)
    }

    /// Value at node `y`, if `y` is a node.
    pub fn value_at(&self, y: f64) -> Option<f64> {
        self.grid.index_of(y).map(|k| self.values[k])
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self.masses.iter_mut().for_each(|m| *m *= factor);
    }
}

/// Linear (not circular) convolution of two densities on the same grid,
/// restricted back to that grid.
///
/// Mass falling outside the grid is accumulated into the result's `leak`.
/// Negative FFT ringing is clipped and the clipped mass restored by
/// rescaling; more than [`CLIP_LIMIT`] of clipped mass is an error.
pub fn convolve(a: &SampledDensity, b: &SampledDensity) -> Result<SampledDensity> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("convolution operands use different grids".into()));
    }
    if a.point_mass {
        let mut out = b.clone();
        out.leak += a.leak;
        return Ok(out);
    }
    if b.point_mass {
        let mut out = a.clone();
        out.leak += b.leak;
        return Ok(out);
    }
    let grid = a.grid;
    let full = fft::linear_convolve(&a.masses, &b.masses);
    let offset = grid.center();
    let mut masses: Vec<f64> = full[offset..offset + grid.len()].to_vec();
    let dropped = fft::pairwise_sum(&full[..offset]) + fft::pairwise_sum(&full[offset + grid.len()..]);
    let clipped = clip_negative(&mut masses);
    if clipped > CLIP_LIMIT {
        return Err(Error::ClippedMass { clipped, limit: CLIP_LIMIT });
    }
    let h = grid.spacing();
    let values = masses.iter().map(|m| m / h).collect();
    Ok(SampledDensity {
        grid,
        values,
        masses,
        point_mass: false,
        leak: a.leak + b.leak + dropped.max(0.0),
    })
}

/// Zeroes negative entries and rescales so that the total is unchanged.
/// Returns the clipped (negative) mass in absolute value.
pub(crate) fn clip_negative(masses: &mut [f64]) -> f64 {
    let total = fft::pairwise_sum(masses);
    let mut clipped = 0.0;
    for m in masses.iter_mut() {
        if *m < 0.0 {
            clipped -= *m;
            *m = 0.0;
        }
    }
    if clipped > 0.0 {
        let kept = total + clipped;
        if kept > 0.0 {
            let s = total / kept;
            masses.iter_mut().for_each(|m| *m *= s);
        }
    }
    clipped
}

/// Composite trapezoid integral of samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (fft::pairwise_sum(values) - 0.5 * (values[0] + values[n - 1])),
    }
}
