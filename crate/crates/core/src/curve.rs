//! Density curves with provenance, CSV export and a JSON sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::pairwise_sum;
use crate::io::{fmt_f64, parse_f64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    FftSeries,
    Kde,
    Histogram,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::FftSeries => "fft_series",
            Method::Kde => "kde",
            Method::Histogram => "histogram",
        }
    }

    pub fn is_statistical(&self) -> bool {
        matches!(self, Method::Kde | Method::Histogram)
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "closed_form" => Method::ClosedForm,
            "fft_series" => Method::FftSeries,
            "kde" => Method::Kde,
            "histogram" => Method::Histogram,
            other => return Err(Error::Format(format!("unknown curve method '{other}'"))),
        })
    }
}

/// What the curve's abscissa measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Abscissa {
    /// Positions `y` of a one-dimensional density.
    Position,
    /// Distances `|y - x|` along a ray of a `dimension`-dimensional density.
    Radius { dimension: usize },
}

/// Series truncation: the first `max_terms + 1` terms are kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub max_terms: usize,
    /// Poisson weight of the dropped terms.
    pub tail_mass_bound: f64,
    /// `tail_mass_bound` times the largest possible value of a dropped term.
    pub pointwise_bound: f64,
}

/// Provenance recorded in the sidecar.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<SeriesTruncation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Density values `f_t(x, .)` on a sorted set of abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityCurve {
    pub origin: Vec<f64>,
    pub t: f64,
    pub abscissa: Abscissa,
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub method: Method,
    /// Deterministic error bound per point (zero when unknown or statistical).
    pub error_bound: Vec<f64>,
    /// 95% confidence half-widths for statistical curves.
    pub ci_half_width: Option<Vec<f64>>,
    /// Mass of the represented law that lies outside the covered range.
    pub outside_mass: f64,
    pub meta: CurveMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSidecar {
    pub origin: Vec<f64>,
    pub t: f64,
    pub abscissa: Abscissa,
    pub method: Method,
    pub points: usize,
    pub outside_mass: f64,
    pub integral: f64,
    #[serde(flatten)]
    pub meta: CurveMeta,
}

impl DensityCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Structural checks: matching lengths, sorted abscissae, finite values.
    pub fn check(&self) -> Result<()> {
        let n = self.points.len();
        if self.values.len() != n || self.error_bound.len() != n || self.ci_half_width.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::GridMismatch("curve columns have different lengths".into()));
        }
        if self.points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::GridMismatch("curve abscissae must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("curve contains non-finite values".into()));
        }
        Ok(())
    }

    /// Integral over the covered range: `int f dy` for positions and
    /// `|S^{d-1}| int f(r) r^{d-1} dr` for radial curves.
    ///
    /// Uses the trapezoid rule with Euler-Maclaurin end corrections when the
    /// abscissae are uniformly spaced, plain trapezoid otherwise.
    pub fn integral(&self) -> f64 {
        let (weighted, factor): (Vec<f64>, f64) = match self.abscissa {
            Abscissa::Position => (self.values.clone(), 1.0),
            Abscissa::Radius { dimension } => (
                self.points.iter().zip(&self.values).map(|(r, v)| v * r.powi(dimension as i32 - 1)).collect(),
                sphere_area(dimension),
            ),
        };
        factor * integrate_samples(&self.points, &weighted)
    }

    /// `|integral + outside_mass - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        (self.integral() + self.outside_mass - 1.0).abs()
    }

    /// The curve at the given abscissae, which must be a subset of its points.
    pub fn restrict_to(&self, points: &[f64]) -> Result<DensityCurve> {
        let mut idx = Vec::with_capacity(points.len());
        let tol = 1e-9 * self.points.iter().fold(1.0f64, |m, p| m.max(p.abs()));
        for &p in points {
            let k = self.points.partition_point(|&q| q < p - tol);
            if k >= self.points.len() || (self.points[k] - p).abs() > tol {
                return Err(Error::GridMismatch(format!("point {p} is not on the curve")));
            }
            idx.push(k);
        }
        let pick = |v: &[f64]| idx.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        let inside = if idx.len() >= 2 {
            let lo = idx[0];
            let hi = idx[idx.len() - 1];
            let sub = DensityCurve {
                points: self.points[lo..=hi].to_vec(),
                values: self.values[lo..=hi].to_vec(),
                error_bound: vec![0.0; hi - lo + 1],
                ci_half_width: None,
                ..self.clone()
            };
            sub.integral()
        } else {
            0.0
        };
        Ok(DensityCurve {
            origin: self.origin.clone(),
            t: self.t,
            abscissa: self.abscissa,
            points: pick(&self.points),
            values: pick(&self.values),
            method: self.method,
            error_bound: pick(&self.error_bound),
            ci_half_width: self.ci_half_width.as_ref().map(|c| pick(c)),
            outside_mass: (self.outside_mass + self.integral() - inside).max(0.0),
            meta: self.meta.clone(),
        })
    }

    pub fn sidecar(&self) -> CurveSidecar {
        CurveSidecar {
            origin: self.origin.clone(),
            t: self.t,
            abscissa: self.abscissa,
            method: self.method,
            points: self.len(),
            outside_mass: self.outside_mass,
            integral: self.integral(),
            meta: self.meta.clone(),
        }
    }

    /// Columns `y,value,method,error_bound` (`r` instead of `y` for radial
    /// curves), plus `ci_lower,ci_upper` for statistical curves.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let head = match self.abscissa {
            Abscissa::Position => "y",
            Abscissa::Radius { .. } => "r",
        };
        match &self.ci_half_width {
            Some(_) => writeln!(w, "{head},value,method,error_bound,ci_lower,ci_upper")?,
            None => writeln!(w, "{head},value,method,error_bound")?,
        }
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{},{}",
                fmt_f64(self.points[i]),
                fmt_f64(self.values[i]),
                self.method.as_str(),
                fmt_f64(self.error_bound[i])
            )?;
            if let Some(ci) = &self.ci_half_width {
                write!(w, ",{},{}", fmt_f64(self.values[i] - ci[i]), fmt_f64(self.values[i] + ci[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a curve written by [`DensityCurve::write_csv`], taking the
    /// remaining fields from its sidecar.
    pub fn read_csv<R: BufRead>(r: R, sidecar: &CurveSidecar) -> Result<DensityCurve> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty curve CSV".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        let with_ci = match cols.as_slice() {
            [_, "value", "method", "error_bound"] => false,
            [_, "value", "method", "error_bound", "ci_lower", "ci_upper"] => true,
            _ => return Err(Error::Format(format!("unrecognised curve header '{header}'"))),
        };
        let mut c = DensityCurve {
            origin: sidecar.origin.clone(),
            t: sidecar.t,
            abscissa: sidecar.abscissa,
            points: vec![],
            values: vec![],
            method: sidecar.method,
            error_bound: vec![],
            ci_half_width: with_ci.then(Vec::new),
            outside_mass: sidecar.outside_mass,
            meta: sidecar.meta.clone(),
        };
        for (n, line) in lines.enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Format(format!("line {}: expected {} fields", n + 2, cols.len())));
            }
            c.points.push(parse_f64(f[0], n + 2)?);
            let v = parse_f64(f[1], n + 2)?;
            c.values.push(v);
            if Method::parse(f[2])? != c.method {
                return Err(Error::Format(format!("line {}: method differs from sidecar", n + 2)));
            }
            c.error_bound.push(parse_f64(f[3], n + 2)?);
            if let Some(ci) = c.ci_half_width.as_mut() {
                ci.push(0.5 * (parse_f64(f[5], n + 2)? - parse_f64(f[4], n + 2)?));
            }
        }
        c.check()?;
        Ok(c)
    }

    /// Writes `path` (CSV) and its sidecar; returns the sidecar path.
    pub fn write_files(&self, path: &Path) -> Result<PathBuf> {
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&side, json + "\n")?;
        Ok(side)
    }

    pub fn read_files(path: &Path) -> Result<DensityCurve> {
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side)?;
        let sidecar: CurveSidecar =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
        DensityCurve::read_csv(BufReader::new(File::open(path)?), &sidecar)
    }
}

/// `foo.csv` -> `foo.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

fn integrate_samples(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let uniform = x.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if !uniform {
        let parts: Vec<f64> = x.windows(2).zip(f.windows(2)).map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1])).collect();
        return pairwise_sum(&parts);
    }
    let trap = h * (pairwise_sum(f) - 0.5 * (f[0] + f[n - 1]));
    if n < 6 {
        return trap;
    }
    // Euler-Maclaurin: subtract h^2/12 (f'(b) - f'(a)) with one-sided
    // fourth-order differences.
    let one_sided = |g: [f64; 5]| (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]) / (12.0 * h);
    let da = one_sided([f[0], f[1], f[2], f[3], f[4]]);
    let db = -one_sided([f[n - 1], f[n - 2], f[n - 3], f[n - 4], f[n - 5]]);
    trap - h * h / 12.0 * (db - da)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_curve(lo: f64, hi: f64, n: usize) -> DensityCurve {
        let points: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let values = points.iter().map(|y| (-y * y / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()).collect();
        DensityCurve {
            origin: vec![0.0],
            t: 1.0,
            abscissa: Abscissa::Position,
            error_bound: vec![0.0; n],
            points,
            values,
            method: Method::ClosedForm,
            ci_half_width: None,
            outside_mass: 0.0,
            meta: CurveMeta::default(),
        }
    }

    #[test]
    fn corrected_trapezoid_on_truncated_range() {
        // P(-1 < Z < 2) for a standard normal.
        let c = normal_curve(-1.0, 2.0, 61);
        let exact = 0.818_594_614_120_363_7;
        assert!((c.integral() - exact).abs() < 1e-8, "{}", c.integral() - exact);
    }

    #[test]
    fn restriction_accounts_for_outside_mass() {
        let c = normal_curve(-10.0, 10.0, 401);
        assert!(c.normalization_defect() < 1e-12);
        let pts: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
        let r = c.restrict_to(&pts).unwrap();
        assert_eq!(r.len(), 41);
        assert!(r.normalization_defect() < 1e-7);
        assert!(c.restrict_to(&[0.01]).is_err());
    }

    #[test]
    fn radial_integral_of_planar_gaussian() {
        let n = 2001;
        let points: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let values = points.iter().map(|r| (-r * r / 2.0).exp() / (2.0 * std::f64::consts::PI)).collect();
        let c = DensityCurve {
            abscissa: Abscissa::Radius { dimension: 2 },
            points,
            values,
            ..normal_curve(0.0, 1.0, n)
        };
        assert!((c.integral() - 1.0).abs() < 1e-9);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip_with_ci() {
        let mut c = normal_curve(-2.0, 2.0, 9);
        c.method = Method::Kde;
        c.ci_half_width = Some(vec![0.125; 9]);
        c.meta.bandwidth = Some(0.02);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        c.write_files(&path).unwrap();
        let back = DensityCurve::read_files(&path).unwrap();
        assert_eq!(back.points, c.points);
        assert_eq!(back.values, c.values);
        assert_eq!(back.meta, c.meta);
        let ci = back.ci_half_width.unwrap();
        assert!(ci.iter().all(|w| (w - 0.125).abs() < 1e-15));
    }
}
