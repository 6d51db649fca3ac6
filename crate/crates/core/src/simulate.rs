//! Monte Carlo simulation of the jump diffusion.
//!
//! Each path uses its own counter-derived ChaCha8 stream: the generator is
//! seeded from the run seed and the stream number is the path index, so the
//! ensemble does not depend on how paths are distributed over threads.
//! Jump times are drawn first (cumulative exponential inter-arrivals), then
//! merged into the uniform Euler grid; the diffusion is stepped between
//! consecutive event times and jump amplitudes are added at the jump times.

use std::io::{BufRead, Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64};
use crate::model::ModelSpec;

/// Euler steps per unit time used by [`SimConfig::for_time`].
pub const DEFAULT_STEPS_PER_UNIT: usize = 256;

const PATHS_PER_TASK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_count: usize,
    pub path_count: usize,
    pub seed: u64,
    pub record_paths: bool,
}

impl SimConfig {
    pub fn new(step_count: usize, path_count: usize, seed: u64) -> Result<Self> {
        let cfg = Self { step_count, path_count, seed, record_paths: false };
        cfg.check()?;
        Ok(cfg)
    }

    /// `ceil(256 t)` Euler steps on `[0, t]`.
    pub fn for_time(t: f64, path_count: usize, seed: u64) -> Result<Self> {
        let steps = (DEFAULT_STEPS_PER_UNIT as f64 * t).ceil().max(1.0) as usize;
        Self::new(steps, path_count, seed)
    }

    pub fn recording(mut self) -> Self {
        self.record_paths = true;
        self
    }

    fn check(&self) -> Result<()> {
        if self.step_count == 0 || self.path_count == 0 {
            return Err(Error::invalid("step and path counts must be at least 1"));
        }
        Ok(())
    }
}

/// How the per-path random streams were derived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub seed: u64,
    pub generator: String,
    pub stream_rule: String,
}

impl SeedProvenance {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            generator: "ChaCha8".into(),
            stream_rule: "seed_from_u64(seed), set_stream(path_index)".into(),
        }
    }
}

/// Event times and states of one recorded path (states flattened, `d` per time).
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedPath {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PathEnsemble {
    dimension: usize,
    t: f64,
    origin: Vec<f64>,
    terminal_values: Vec<f64>,
    jump_counts: Vec<u32>,
    provenance: SeedProvenance,
    paths: Option<Vec<RecordedPath>>,
}

impl PathEnsemble {
    /// Ensemble from raw terminal values (row-major, `dimension` per path).
    pub fn from_parts(
        dimension: usize,
        t: f64,
        origin: Vec<f64>,
        terminal_values: Vec<f64>,
        jump_counts: Vec<u32>,
        seed: u64,
    ) -> Result<Self> {
        if dimension == 0 || origin.len() != dimension || terminal_values.len() != dimension * jump_counts.len() {
            return Err(Error::invalid("inconsistent ensemble dimensions"));
        }
        Ok(Self {
            dimension,
            t,
            origin,
            terminal_values,
            jump_counts,
            provenance: SeedProvenance::new(seed),
            paths: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn len(&self) -> usize {
        self.jump_counts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.jump_counts.is_empty()
    }
    pub fn terminal_values(&self) -> &[f64] {
        &self.terminal_values
    }
    pub fn terminal(&self, i: usize) -> &[f64] {
        &self.terminal_values[i * self.dimension..(i + 1) * self.dimension]
    }
    pub fn jump_counts(&self) -> &[u32] {
        &self.jump_counts
    }
    pub fn provenance(&self) -> &SeedProvenance {
        &self.provenance
    }
    pub fn paths(&self) -> Option<&[RecordedPath]> {
        self.paths.as_deref()
    }

    /// Euclidean distances `|X_t^i - x|`.
    pub fn distances_from(&self, x: &[f64]) -> Vec<f64> {
        self.terminal_values
            .chunks(self.dimension)
            .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect()
    }

    /// One row per path: `path,x1,..,xd,jumps`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (1..=self.dimension).map(|i| format!("x{i}")).collect();
        writeln!(w, "path,{},jumps", cols.join(","))?;
        for (i, (p, j)) in self.terminal_values.chunks(self.dimension).zip(&self.jump_counts).enumerate() {
            let vals: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{i},{},{j}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, t: f64, origin: Vec<f64>, seed: u64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty ensemble CSV".into()))??;
        let d = header.split(',').count().checked_sub(2).filter(|d| *d > 0).ok_or_else(|| Error::Format("bad ensemble header".into()))?;
        let mut values = Vec::new();
        let mut jumps = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::Format(format!("line {}: expected {} fields", n + 2, d + 2)));
            }
            for f in &fields[1..=d] {
                values.push(parse_f64(f, n + 2)?);
            }
            jumps.push(fields[d + 1].trim().parse::<u32>().map_err(|e| Error::Format(e.to_string()))?);
        }
        Self::from_parts(d, t, origin, values, jumps, seed)
    }

    /// Compact little-endian binary format.
    ///
    /// Header (40 bytes): magic `b"JDEN"`, version `u16` (=1), reserved `u16`,
    /// path count `u64`, dimension `u32`, reserved `u32`, time `f64`, seed
    /// `u64`. Then the origin (`d` x `f64`), terminal values (`N d` x `f64`,
    /// row-major) and jump counts (`N` x `u32`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.provenance.seed.to_le_bytes())?;
        for v in self.origin.iter().chain(&self.terminal_values) {
            w.write_all(&v.to_le_bytes())?;
        }
        for j in &self.jump_counts {
            w.write_all(&j.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 40];
        r.read_exact(&mut header)?;
        if &header[0..4] != BINARY_MAGIC {
            return Err(Error::Format("bad ensemble magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != BINARY_VERSION {
            return Err(Error::Format(format!("unsupported ensemble version {version}")));
        }
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
        let t = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let seed = u64::from_le_bytes(header[32..40].try_into().unwrap());
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let origin = read_f64s(d)?;
        let values = read_f64s(n * d)?;
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)?;
        let jumps = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_parts(d, t, origin, values, jumps, seed)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"JDEN";
const BINARY_VERSION: u16 = 1;

/// The random stream of path `index`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `cfg.path_count` independent copies of `X_t^x`.
pub fn simulate_terminal(spec: &ModelSpec, x: &[f64], t: f64, cfg: &SimConfig) -> Result<PathEnsemble> {
    spec.check_parameters()?;
    cfg.check()?;
    if !(t > 0.0 && t <= spec.horizon * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("simulation time {t} must lie in (0, {}]", spec.horizon)));
    }
    let d = spec.dimension;
    if x.len() != d {
        return Err(Error::invalid(format!("start point has dimension {}, model has {d}", x.len())));
    }
    let n = cfg.path_count;
    let mut terminal = vec![0.0; n * d];
    let mut jumps = vec![0u32; n];
    let mut paths = if cfg.record_paths { Some(vec![RecordedPath { times: vec![], states: vec![] }; n]) } else { None };

    let task = |chunk_index: usize, out: &mut [f64], jc: &mut [u32], rec: Option<&mut [RecordedPath]>| {
        let mut ws = Workspace::new(d);
        let base = chunk_index * PATHS_PER_TASK;
        let mut rec = rec;
        for (k, (state, jump_count)) in out.chunks_mut(d).zip(jc.iter_mut()).enumerate() {
            let mut rng = path_stream(cfg.seed, (base + k) as u64);
            let recorder = rec.as_deref_mut().map(|r| &mut r[k]);
            *jump_count = simulate_path(spec, x, t, cfg.step_count, &mut rng, &mut ws, state, recorder);
        }
    };

    match paths.as_mut() {
        Some(p) => terminal
            .par_chunks_mut(PATHS_PER_TASK * d)
            .zip(jumps.par_chunks_mut(PATHS_PER_TASK))
            .zip(p.par_chunks_mut(PATHS_PER_TASK))
            .enumerate()
            .for_each(|(i, ((o, j), r))| task(i, o, j, Some(r))),
        None => terminal
            .par_chunks_mut(PATHS_PER_TASK * d)
            .zip(jumps.par_chunks_mut(PATHS_PER_TASK))
            .enumerate()
            .for_each(|(i, (o, j))| task(i, o, j, None)),
    }

    Ok(PathEnsemble {
        dimension: d,
        t,
        origin: x.to_vec(),
        terminal_values: terminal,
        jump_counts: jumps,
        provenance: SeedProvenance::new(cfg.seed),
        paths,
    })
}

struct Workspace {
    jump_times: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    shock: Vec<f64>,
    matrix: Vec<f64>,
    jump: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            jump_times: Vec::new(),
            drift: vec![0.0; d],
            noise: vec![0.0; d],
            shock: vec![0.0; d],
            matrix: vec![0.0; d * d],
            jump: vec![0.0; d],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_path(
    spec: &ModelSpec,
    x0: &[f64],
    t: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
    ws: &mut Workspace,
    state: &mut [f64],
    mut recorder: Option<&mut RecordedPath>,
) -> u32 {
    state.copy_from_slice(x0);
    ws.jump_times.clear();
    if spec.jump_rate > 0.0 {
        let mut tau = 0.0;
        loop {
            let e: f64 = rng.sample(Exp1);
            tau += e / spec.jump_rate;
            if tau > t {
                break;
            }
            ws.jump_times.push(tau);
        }
    }
    if let Some(r) = recorder.as_deref_mut() {
        r.times.push(0.0);
        r.states.extend_from_slice(state);
    }

    let dt_grid = t / steps as f64;
    let mut now = 0.0;
    let mut next_jump = 0;
    for k in 1..=steps {
        let node = if k == steps { t } else { k as f64 * dt_grid };
        while next_jump < ws.jump_times.len() && ws.jump_times[next_jump] <= node {
            let tj = ws.jump_times[next_jump];
            euler_step(spec, state, tj - now, rng, ws);
            spec.jump_law.sample_into(rng, &mut ws.jump);
            state.iter_mut().zip(&ws.jump).for_each(|(s, j)| *s += j);
            now = tj;
            next_jump += 1;
            if let Some(r) = recorder.as_deref_mut() {
                r.times.push(now);
                r.states.extend_from_slice(state);
            }
        }
        euler_step(spec, state, node - now, rng, ws);
        now = node;
        if let Some(r) = recorder.as_deref_mut() {
            r.times.push(now);
            r.states.extend_from_slice(state);
        }
    }
    ws.jump_times.len() as u32
}

fn euler_step(spec: &ModelSpec, state: &mut [f64], dt: f64, rng: &mut ChaCha8Rng, ws: &mut Workspace) {
    if dt <= 0.0 {
        return;
    }
    let sq = dt.sqrt();
    for z in ws.noise.iter_mut() {
        *z = rng.sample::<f64, _>(StandardNormal) * sq;
    }
    spec.drift_at(state, &mut ws.drift);
    spec.diffusion_apply(state, &ws.noise, &mut ws.shock, &mut ws.matrix);
    for ((s, b), w) in state.iter_mut().zip(&ws.drift).zip(&ws.shock) {
        *s += b * dt + w;
    }
}

/// Estimate of `P(|X_t - x| > r)` with a 95% normal-approximation half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub radius: f64,
    pub estimate: f64,
    pub half_width: f64,
}

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub fn empirical_tail(ens: &PathEnsemble, x: &[f64], radii: &[f64]) -> Result<Vec<TailEstimate>> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::invalid("radii must be non-negative"));
    }
    let mut dist = ens.distances_from(x);
    dist.par_sort_unstable_by(f64::total_cmp);
    let n = dist.len() as f64;
    Ok(radii
        .iter()
        .map(|&r| {
            let at_most = dist.partition_point(|&v| v <= r);
            let p = (dist.len() - at_most) as f64 / n;
            TailEstimate { radius: r, estimate: p, half_width: Z_95 * (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}
