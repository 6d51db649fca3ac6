use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use jumpdens::envelope::frozen_heat_kernel_params;
use jumpdens::io::fmt_f64;
use jumpdens::{
    calibrate as fit_envelopes, check_containment, density_upper_envelope, kde, linear_density, linear_density_multid,
    simulate_terminal, tail_bound, Bandwidth, CalibrationRequest, Config, DensityCurve, EnvelopeKind, EnvelopeSet,
    JumpLaw, KdeConfig, ModelSpec, PathEnsemble, PsiFunction, Side, SimConfig, ThetaSolver, UpperConstants,
};
use serde_json::json;

use crate::manifest::Run;
use crate::{BoundsArgs, CalibrateArgs, CheckArgs, DensityArgs, DensityMethod, SimulateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

const DEFAULT_PATHS: usize = 100_000;
const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    Core(jumpdens::Error),
    Io(std::io::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use jumpdens::Error as E;
        match self {
            CliError::Core(
                E::GridTooNarrow { .. }
                | E::ClippedMass { .. }
                | E::QuadratureNonConvergence { .. }
                | E::RootSolver { .. }
                | E::InfeasibleCalibration { .. }
                | E::Domain { .. },
            ) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<jumpdens::Error> for CliError {
    fn from(e: jumpdens::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load(path: &Path) -> Result<(String, Config)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let config = Config::parse(&text)?;
    Ok((text, config))
}

fn resolve_seed(flag: Option<u64>, config: &Config) -> u64 {
    flag.or(config.defaults.seed).unwrap_or_else(|| {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        now.as_secs() ^ u64::from(now.subsec_nanos()) << 32
    })
}

fn start_point(flag: Option<Vec<f64>>, config: &Config, d: usize) -> Result<Vec<f64>> {
    match flag {
        Some(x) if x.len() != d => Err(CliError::Usage(format!("--x has {} coordinates, model dimension is {d}", x.len()))),
        Some(x) => Ok(x),
        None => Ok(config.start(d)?),
    }
}

/// `lo:hi:n` -> `n` equally spaced points.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("grid must be lo:hi:n with lo < hi and n >= 2, got '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || n < 2 || !hi.is_finite() || !lo.is_finite() {
        return Err(bad());
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn check_time(t: f64, spec: &ModelSpec) -> Result<()> {
    if !(t > 0.0 && t <= spec.horizon * (1.0 + 1e-12)) {
        return Err(CliError::Usage(format!("--t must lie in (0, {}], got {t}", spec.horizon)));
    }
    Ok(())
}

fn run_simulation(spec: &ModelSpec, x: &[f64], t: f64, steps: Option<usize>, paths: usize, seed: u64, config: &Config) -> Result<PathEnsemble> {
    let steps = steps.unwrap_or_else(|| (config.defaults.steps_per_unit() as f64 * t).ceil() as usize).max(1);
    let cfg = SimConfig::new(steps, paths, seed)?;
    Ok(simulate_terminal(spec, x, t, &cfg)?)
}

fn write_curve(run: &mut Run, name: &str, curve: &DensityCurve) -> Result<()> {
    let side = curve.write_files(&run.output(name))?;
    run.register(&side);
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<u8> {
    let (text, config) = load(&a.common.config)?;
    let spec = config.spec()?;
    check_time(a.t, &spec)?;
    let x = start_point(a.x, &config, spec.dimension)?;
    let seed = resolve_seed(a.seed, &config);
    let paths = a.paths.or(config.defaults.paths).unwrap_or(DEFAULT_PATHS);
    let mut run = Run::start(&a.common.out)?;
    let ens = run_simulation(&spec, &x, a.t, a.steps, paths, seed, &config)?;
    ens.write_csv(BufWriter::new(File::create(run.output("ensemble.csv"))?))?;
    ens.write_binary(BufWriter::new(File::create(run.output("ensemble.bin"))?))?;
    let mean_jumps = ens.jump_counts().iter().map(|&j| j as f64).sum::<f64>() / ens.len() as f64;
    println!("simulated {} paths to t = {}, mean jump count {mean_jumps:.4}", ens.len(), a.t);
    let params = json!({ "t": a.t, "x": x, "paths": paths, "steps": a.steps, "stream_rule": ens.provenance().stream_rule });
    run.finish("simulate", &a.common.config, text, params, Some(seed))?;
    Ok(EXIT_OK)
}

fn series_curve(spec: &ModelSpec, method: DensityMethod, t: f64, offsets: &[f64], tol: f64, x: &[f64]) -> Result<DensityCurve> {
    if !spec.is_linear() {
        return Err(CliError::Usage("series densities need the linear model (zero drift, identity diffusion)".into()));
    }
    let law = &spec.jump_law;
    let lambda = spec.jump_rate;
    if spec.dimension > 1 {
        if method != DensityMethod::Closed || !matches!(law, JumpLaw::MultivariateGaussian(_)) {
            return Err(CliError::Usage("multivariate densities need --method closed and Gaussian jumps".into()));
        }
        let mut direction = vec![0.0; spec.dimension];
        direction[0] = 1.0;
        let mut curve = linear_density_multid(law, lambda, t, &direction, offsets, tol)?;
        curve.origin = x.to_vec();
        return Ok(curve);
    }
    if method == DensityMethod::Closed && !matches!(law, JumpLaw::Gaussian { .. }) {
        return Err(CliError::Usage(format!("--method closed needs Gaussian jumps, got {}; use --method fft", law.name())));
    }
    let mut curve = linear_density(law, lambda, t, offsets, tol)?;
    // The linear model is translation invariant.
    curve.origin = x.to_vec();
    curve.points.iter_mut().for_each(|p| *p += x[0]);
    Ok(curve)
}

pub fn density(a: DensityArgs) -> Result<u8> {
    let (text, config) = load(&a.common.config)?;
    let spec = config.spec()?;
    check_time(a.t, &spec)?;
    let offsets = parse_grid(&a.grid)?;
    let tol = a.tol.or(config.defaults.tol).unwrap_or(DEFAULT_TOL);
    let x = start_point(a.x, &config, spec.dimension)?;
    let mut seed = None;
    let curve = match a.method {
        DensityMethod::Closed | DensityMethod::Fft => series_curve(&spec, a.method, a.t, &offsets, tol, &x)?,
        DensityMethod::Kde => {
            if spec.dimension != 1 {
                return Err(CliError::Usage("kde needs a one-dimensional model".into()));
            }
            let s = resolve_seed(a.seed, &config);
            seed = Some(s);
            let paths = a.paths.or(config.defaults.paths).unwrap_or(DEFAULT_PATHS);
            let ens = run_simulation(&spec, &x, a.t, None, paths, s, &config)?;
            let bandwidth = a.bandwidth.map_or(Bandwidth::Silverman, Bandwidth::Fixed);
            kde(&ens, &KdeConfig { bandwidth, points: offsets.iter().map(|z| z + x[0]).collect() })?
        }
    };
    let mut run = Run::start(&a.common.out)?;
    write_curve(&mut run, "density.csv", &curve)?;
    let peak = curve.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} points, method {}, peak {}, normalization defect {:.3e}",
        curve.len(),
        curve.method.as_str(),
        fmt_f64(peak),
        curve.normalization_defect()
    );
    let params = json!({
        "t": a.t, "grid": a.grid, "tol": tol, "method": curve.method.as_str(), "x": x,
        "truncation": curve.meta.truncation, "bandwidth": curve.meta.bandwidth, "paths": curve.meta.paths,
    });
    run.finish("density", &a.common.config, text, params, seed)?;
    Ok(EXIT_OK)
}

pub fn bounds(a: BoundsArgs) -> Result<u8> {
    let (text, config) = load(&a.common.config)?;
    let spec = config.spec()?;
    check_time(a.t, &spec)?;
    if !(a.rmax > 0.0) || a.points < 2 {
        return Err(CliError::Usage("need --rmax > 0 and --points >= 2".into()));
    }
    let set = a.envelopes.as_deref().map(EnvelopeSet::read).transpose()?;
    let constants = match &set {
        Some(s) => UpperConstants::new(s.constants.c_q_t, s.constants.q)?,
        None => UpperConstants::new(a.cqt, a.q)?,
    };
    let solver = ThetaSolver::new(PsiFunction::from_model(&spec)?);
    let c1 = spec.drift_bound;
    let mut run = Run::start(&a.common.out)?;
    let mut w = BufWriter::new(File::create(run.output("bounds.csv"))?);
    match set {
        Some(_) => writeln!(w, "r,tail_bound,density_envelope,envelope_lower,envelope_upper")?,
        None => writeln!(w, "r,tail_bound,density_envelope")?,
    }
    let mut rigorous = true;
    for i in 0..a.points {
        let r = a.rmax * i as f64 / (a.points - 1) as f64;
        let tail = tail_bound(&solver, c1, a.t, r)?;
        let env = density_upper_envelope(&solver, c1, a.t, r, constants, spec.dimension)?;
        rigorous &= env.rigorous;
        write!(w, "{},{},{}", fmt_f64(r), fmt_f64(tail), fmt_f64(env.value))?;
        if let Some(s) = &set {
            write!(w, ",{},{}", fmt_f64(s.evaluate(a.t, r, Side::Lower)?), fmt_f64(s.evaluate(a.t, r, Side::Upper)?))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    drop(w);
    let params = json!({
        "t": a.t, "rmax": a.rmax, "points": a.points, "q": constants.q, "c_q_t": constants.c_q_t,
        "envelopes": a.envelopes.as_ref().map(|p| p.display().to_string()), "rigorous": rigorous,
    });
    run.finish("bounds", &a.common.config, text, params, None)?;
    Ok(EXIT_OK)
}

pub fn calibrate(a: CalibrateArgs) -> Result<u8> {
    let (text, config) = load(&a.common.config)?;
    let spec = config.spec()?;
    let kind = match spec.jump_law {
        JumpLaw::Gaussian { .. } => EnvelopeKind::GaussianJump,
        JumpLaw::Laplace { .. } => EnvelopeKind::LaplaceJump,
        _ => return Err(CliError::Usage("calibration needs one-dimensional Gaussian or Laplace jumps".into())),
    };
    if a.times.is_empty() {
        return Err(CliError::Usage("--times is empty".into()));
    }
    for &t in &a.times {
        check_time(t, &spec)?;
    }
    let offsets = parse_grid(&a.grid)?;
    let tol = a.tol.or(config.defaults.tol).unwrap_or(DEFAULT_TOL);
    let (references, label, seed) = if spec.is_linear() {
        let refs = a
            .times
            .iter()
            .map(|&t| linear_density(&spec.jump_law, spec.jump_rate, t, &offsets, tol))
            .collect::<jumpdens::Result<Vec<_>>>()?;
        (refs, "series", None)
    } else {
        let seed = resolve_seed(a.seed, &config);
        let paths = a.paths.or(config.defaults.paths).unwrap_or(DEFAULT_PATHS);
        let mut refs = Vec::new();
        for &t in &a.times {
            let ens = run_simulation(&spec, &[0.0], t, None, paths, seed, &config)?;
            refs.push(kde(&ens, &KdeConfig { bandwidth: Bandwidth::Silverman, points: offsets.clone() })?);
        }
        (refs, "kde", Some(seed))
    };
    let solver = ThetaSolver::new(PsiFunction::from_model(&spec)?);
    let req = CalibrationRequest {
        kind,
        horizon: spec.horizon,
        references: &references,
        heat: frozen_heat_kernel_params(&spec),
        tail: (&solver, spec.drift_bound),
        q: a.q,
        safety: a.safety,
        reference_label: label.into(),
    };
    let set = fit_envelopes(&req)?;
    let mut run = Run::start(&a.common.out)?;
    for (i, c) in references.iter().enumerate() {
        write_curve(&mut run, &format!("reference_{i}.csv"), c)?;
    }
    set.write(&run.output("envelopes.json"))?;
    let k = set.constants;
    println!(
        "C_T = {}, c_T = {}, A_T = {}, a_T = {}, C_qT = {}, q = {}",
        fmt_f64(k.big_c),
        fmt_f64(k.small_c),
        fmt_f64(k.big_a),
        fmt_f64(k.small_a),
        fmt_f64(k.c_q_t),
        k.q
    );
    let params = json!({ "times": a.times, "grid": a.grid, "safety": a.safety, "q": a.q, "tol": tol, "reference": label });
    run.finish("calibrate", &a.common.config, text, params, seed)?;
    Ok(EXIT_OK)
}

pub fn check(a: CheckArgs) -> Result<u8> {
    let (text, _config) = load(&a.common.config)?;
    let set = EnvelopeSet::read(&a.envelopes)?;
    let curve = DensityCurve::read_files(&a.curve)?;
    let report = check_containment(&set, &curve, a.slack)?;
    let mut run = Run::start(&a.common.out)?;
    report.write_csv(BufWriter::new(File::create(run.output("containment.csv"))?))?;
    let code = match report.first_violation() {
        Some(row) => {
            eprintln!(
                "containment violated at t = {}, r = {} ({} of {} points; lower {}, value {}, upper {})",
                row.t,
                row.r,
                report.violations(),
                report.rows.len(),
                fmt_f64(row.lower),
                fmt_f64(row.value),
                fmt_f64(row.upper)
            );
            EXIT_VIOLATION
        }
        None => {
            println!("all {} points contained, worst margin {}", report.rows.len(), fmt_f64(report.worst_margin()));
            EXIT_OK
        }
    };
    let params = json!({
        "envelopes": a.envelopes.display().to_string(), "curve": a.curve.display().to_string(), "slack": a.slack,
        "violations": report.violations(),
    });
    run.finish("check", &a.common.config, text, params, None)?;
    Ok(code)
}
