//! Monte Carlo estimation of temperatures, heat contents and boundary functionals
//! by simulating the horizontal diffusion with generator Δ.
//!
//! Every path (or antithetic pair) owns a ChaCha8 stream selected by its index, so
//! results are bit-identical regardless of the number of worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain, Region, WeightSpec};
use crate::error::{Error, Result};
use crate::models::ModelSpace;
use crate::special::{gauss_legendre, singular_time_nodes};

const MAX_DIM: usize = 4;
const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    StratonovichHeun,
    EulerMaruyama,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stratonovich-heun" | "heun" => Ok(Scheme::StratonovichHeun),
            "euler-maruyama" | "euler" => Ok(Scheme::EulerMaruyama),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Integrator settings.
///
/// The step used on the way to a checkpoint `t` is `min(dt, t / steps_per_t)` when
/// `steps_per_t` is set, so every reported time is resolved by at least that many steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdeConfig {
    pub dt: f64,
    pub steps_per_t: Option<u32>,
    pub scheme: Scheme,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            dt: 1e-3,
            steps_per_t: Some(400),
            scheme: Scheme::StratonovichHeun,
            n_paths: 100_000,
            seed: 0,
            antithetic: false,
        }
    }
}

impl SdeConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SdeConfig {
            n_paths,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths < 100 {
            return Err(Error::Config(format!("n_paths must be at least 100, got {}", self.n_paths)));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::Config("antithetic sampling needs an even n_paths".into()));
        }
        if self.steps_per_t == Some(0) {
            return Err(Error::Config("steps_per_t must be positive".into()));
        }
        Ok(())
    }

    /// Step size used for the segment ending at checkpoint `t`.
    pub fn step_for(&self, t: f64) -> f64 {
        match self.steps_per_t {
            Some(k) => self.dt.min(t / k as f64),
            None => self.dt,
        }
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Which backend produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendTag {
    Mc,
    Grid,
    KernelExact,
}

impl BackendTag {
    pub fn name(self) -> &'static str {
        match self {
            BackendTag::Mc => "mc",
            BackendTag::Grid => "grid",
            BackendTag::KernelExact => "kernel-exact",
        }
    }

    /// Whether values carry statistical error bars.
    pub fn is_stochastic(self) -> bool {
        self == BackendTag::Mc
    }
}

impl fmt::Display for BackendTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mc" => Ok(BackendTag::Mc),
            "grid" => Ok(BackendTag::Grid),
            "kernel-exact" | "exact" => Ok(BackendTag::KernelExact),
            other => Err(Error::Config(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub backend: BackendTag,
}

impl Estimate {
    pub fn exact(value: f64, backend: BackendTag) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            n: 1,
            backend,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveKind {
    H,
    K,
    Q,
    #[serde(rename = "Hchi")]
    HChi,
    G,
    I,
    #[serde(rename = "Lambda")]
    Lambda,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::H => "H",
            CurveKind::K => "K",
            CurveKind::Q => "Q",
            CurveKind::HChi => "Hchi",
            CurveKind::G => "G",
            CurveKind::I => "I",
            CurveKind::Lambda => "Lambda",
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "H" | "h" => CurveKind::H,
            "K" | "k" => CurveKind::K,
            "Q" | "q" => CurveKind::Q,
            "Hchi" | "hchi" | "Hχ" => CurveKind::HChi,
            "G" | "g" => CurveKind::G,
            "I" | "i" => CurveKind::I,
            "Lambda" | "lambda" | "Λ" => CurveKind::Lambda,
            other => return Err(Error::Config(format!("unknown curve kind '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub model: String,
    pub domain: String,
    pub weight: Option<String>,
    /// Serialized backend configuration.
    pub config: String,
}

impl CurveMetadata {
    pub fn new(dom: &Domain, weight: Option<&WeightSpec>, config: String) -> Self {
        CurveMetadata {
            model: dom.model().name().to_string(),
            domain: dom.kind().to_string(),
            weight: weight.filter(|w| !w.is_unit()).map(|w| w.name().to_string()),
            config,
        }
    }
}

/// A quantity sampled on an increasing time grid by a single backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatContentCurve {
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Covariance of the estimates across the grid (common random numbers make
    /// neighbouring points strongly correlated).
    pub covariance: Option<Vec<Vec<f64>>>,
    pub metadata: CurveMetadata,
}

impl HeatContentCurve {
    pub fn new(
        kind: CurveKind,
        times: Vec<f64>,
        estimates: Vec<Estimate>,
        metadata: CurveMetadata,
    ) -> Result<Self> {
        check_grid(&times)?;
        if times.len() != estimates.len() {
            return Err(Error::invalid("one estimate per grid time required"));
        }
        if estimates.windows(2).any(|w| w[0].backend != w[1].backend) {
            return Err(Error::invalid("all estimates of a curve must share one backend"));
        }
        Ok(HeatContentCurve {
            kind,
            times,
            estimates,
            covariance: None,
            metadata,
        })
    }

    pub fn with_covariance(mut self, cov: Vec<Vec<f64>>) -> Self {
        self.covariance = Some(cov);
        self
    }

    pub fn backend(&self) -> BackendTag {
        self.estimates
            .first()
            .map(|e| e.backend)
            .unwrap_or(BackendTag::KernelExact)
    }

    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.stderr).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("grid times must be positive"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Geometric ladder of `count` times from `t_min` to `t_max`.
pub fn geometric_ladder(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || count < 2 {
        return Err(Error::Config(format!(
            "invalid ladder: t_min={t_min}, t_max={t_max}, count={count}"
        )));
    }
    let ratio = (t_max / t_min).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => t_min,
            i if i == count - 1 => t_max,
            i => t_min * (ratio * i as f64).exp(),
        })
        .collect())
}

/// The random stream owned by path (or antithetic pair) `index`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Integrates `dX = √2 Σ X_i(X) ∘ dBⁱ + b(X) dt`.
pub struct Stepper<'a> {
    model: &'a ModelSpace,
    scheme: Scheme,
    with_drift: bool,
    dim: usize,
    noise: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ModelSpace, scheme: Scheme) -> Self {
        Stepper {
            model,
            scheme,
            with_drift: !model.divergence_free(),
            dim: model.dim(),
            noise: model.frame_len(),
        }
    }

    fn increment(&self, x: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<()> {
        self.model.frame_combination(x, dw, out);
        if self.with_drift {
            let b = self.model.drift(x)?;
            for (o, bi) in out.iter_mut().zip(b) {
                *o += bi * h;
            }
        }
        Ok(())
    }

    /// One step of size `h` with Brownian increments `db` (standard normal × √h).
    pub fn step(&self, x: &mut [f64], h: f64, db: &[f64]) -> Result<()> {
        let d = self.dim;
        let mut dw = [0.0; MAX_DIM];
        for (w, b) in dw.iter_mut().zip(db) {
            *w = std::f64::consts::SQRT_2 * b;
        }
        let dw = &dw[..self.noise];
        let mut k1 = [0.0; MAX_DIM];
        self.increment(x, h, dw, &mut k1[..d])?;
        match self.scheme {
            Scheme::EulerMaruyama => {
                for i in 0..d {
                    x[i] += k1[i];
                }
            }
            Scheme::StratonovichHeun => {
                let mut xp = [0.0; MAX_DIM];
                for i in 0..d {
                    xp[i] = x[i] + k1[i];
                }
                let mut k2 = [0.0; MAX_DIM];
                self.increment(&xp[..d], h, dw, &mut k2[..d])?;
                for i in 0..d {
                    x[i] += 0.5 * (k1[i] + k2[i]);
                }
            }
        }
        Ok(())
    }

    /// Advances `x` through the increasing `times`, calling `visit(k, x, alive)` at each.
    /// With a `monitor` domain, `alive` turns false at the first step ending outside it.
    #[allow(clippy::too_many_arguments)]
    pub fn run<R: Rng>(
        &self,
        x: &mut [f64],
        times: &[f64],
        cfg: &SdeConfig,
        rng: &mut R,
        sign: f64,
        monitor: Option<&Domain>,
        mut visit: impl FnMut(usize, &[f64], bool),
    ) -> Result<()> {
        let mut now = 0.0;
        let mut alive = monitor.map_or(true, |d| d.contains(x));
        let mut db = [0.0; MAX_DIM];
        for (k, &tk) in times.iter().enumerate() {
            let h = cfg.step_for(tk);
            let span = tk - now;
            let full = (span / h).floor() as u64;
            let rem = span - full as f64 * h;
            let mut advance = |hh: f64, x: &mut [f64], rng: &mut R| -> Result<()> {
                let s = hh.sqrt() * sign;
                for b in db.iter_mut().take(self.noise) {
                    let z: f64 = rng.sample(StandardNormal);
                    *b = s * z;
                }
                self.step(x, hh, &db[..self.noise])
            };
            for _ in 0..full {
                advance(h, x, rng)?;
                if alive {
                    if let Some(d) = monitor {
                        alive = d.contains(x);
                    }
                }
            }
            if rem > 1e-9 * h {
                advance(rem, x, rng)?;
                if alive {
                    if let Some(d) = monitor {
                        alive = d.contains(x);
                    }
                }
            }
            now = tk;
            visit(k, x, alive);
        }
        Ok(())
    }
}

/// End state of one simulated path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEndpoint {
    pub endpoint: Vec<f64>,
    /// Whether the path left the monitored domain at a step (false when unmonitored).
    pub exited: bool,
}

/// Simulates one path from `x0` to time `t` using stream `stream` of `cfg.seed`.
pub fn simulate_path(
    m: &ModelSpace,
    x0: &[f64],
    t: f64,
    cfg: &SdeConfig,
    stream: u64,
    monitor: Option<&Domain>,
) -> Result<PathEndpoint> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    if x0.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: x0.len(),
        });
    }
    let mut rng = path_stream(cfg.seed, stream);
    let mut x = x0.to_vec();
    let mut exited = false;
    Stepper::new(m, cfg.scheme).run(&mut x, &[t], cfg, &mut rng, 1.0, monitor, |_, _, alive| {
        exited = !alive;
    })?;
    Ok(PathEndpoint { endpoint: x, exited })
}

/// First and second moments of per-unit output vectors.
#[derive(Clone, Debug)]
struct Moments {
    units: u64,
    sum: Vec<f64>,
    sq: Vec<f64>,
    cross: Option<Vec<f64>>,
}

impl Moments {
    fn new(m: usize, with_cross: bool) -> Self {
        Moments {
            units: 0,
            sum: vec![0.0; m],
            sq: vec![0.0; m],
            cross: with_cross.then(|| vec![0.0; m * m]),
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.units += 1;
        for (i, vi) in v.iter().enumerate() {
            self.sum[i] += vi;
            self.sq[i] += vi * vi;
        }
        if let Some(c) = &mut self.cross {
            let m = v.len();
            for i in 0..m {
                for j in 0..m {
                    c[i * m + j] += v[i] * v[j];
                }
            }
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.units += o.units;
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(&o.sq) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (&mut self.cross, &o.cross) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.units as f64
    }

    /// Standard error of the mean of output `i`.
    fn stderr(&self, i: usize) -> f64 {
        let n = self.units as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean(i);
        let var = ((self.sq[i] / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    fn covariance_of_means(&self) -> Option<Vec<Vec<f64>>> {
        let c = self.cross.as_ref()?;
        let m = self.sum.len();
        let n = self.units as f64;
        Some(
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            (c[i * m + j] / n - self.mean(i) * self.mean(j)) / (n - 1.0)
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Runs `cfg.n_paths` paths in deterministic chunks. `unit(rng, sign, out)` fills the
/// per-path outputs; antithetic pairs share a stream and are averaged into one unit.
fn run_units<F>(cfg: &SdeConfig, outputs: usize, with_cross: bool, unit: F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng, f64, &mut [f64]) -> Result<()> + Sync,
{
    cfg.validate()?;
    let units = cfg.units();
    let chunks = units.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut mom = Moments::new(outputs, with_cross);
            let mut a = vec![0.0; outputs];
            let mut b = vec![0.0; outputs];
            for u in c * CHUNK..((c + 1) * CHUNK).min(units) {
                let mut rng = path_stream(cfg.seed, u as u64);
                if cfg.antithetic {
                    let mut twin = rng.clone();
                    unit(&mut rng, 1.0, &mut a)?;
                    unit(&mut twin, -1.0, &mut b)?;
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x = 0.5 * (*x + y);
                    }
                } else {
                    unit(&mut rng, 1.0, &mut a)?;
                }
                mom.push(&a);
            }
            Ok(mom)
        })
        .collect();
    let mut total = Moments::new(outputs, with_cross);
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// Estimates `u(t, x)` at each time in `times` from common paths.
pub fn estimate_u_curve(
    m: &ModelSpace,
    dom: &Domain,
    times: &[f64],
    x: &[f64],
    cfg: &SdeConfig,
) -> Result<Vec<Estimate>> {
    check_grid(times)?;
    if x.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: x.len(),
        });
    }
    let stepper = Stepper::new(m, cfg.scheme);
    let mom = run_units(cfg, times.len(), false, |rng, sign, out| {
        let mut p = [0.0; MAX_DIM];
        p[..x.len()].copy_from_slice(x);
        stepper.run(&mut p[..x.len()], times, cfg, rng, sign, None, |k, y, _| {
            out[k] = if dom.contains(y) { 1.0 } else { 0.0 };
        })
    })?;
    Ok((0..times.len())
        .map(|k| Estimate {
            value: mom.mean(k),
            stderr: mom.stderr(k),
            n: cfg.n_paths as u64,
            backend: BackendTag::Mc,
        })
        .collect())
}

/// Probability that the path started at `x` lies in Ω at time `t`.
pub fn estimate_u(m: &ModelSpace, dom: &Domain, t: f64, x: &[f64], cfg: &SdeConfig) -> Result<Estimate> {
    Ok(estimate_u_curve(m, dom, &[t], x, cfg)?.remove(0))
}

/// `(u, u^c)` from the same paths: fractions ending inside and outside Ω.
pub fn estimate_u_and_complement(
    m: &ModelSpace,
    dom: &Domain,
    t: f64,
    x: &[f64],
    cfg: &SdeConfig,
) -> Result<(Estimate, Estimate)> {
    let stepper = Stepper::new(m, cfg.scheme);
    let mom = run_units(cfg, 2, false, |rng, sign, out| {
        let mut p = x.to_vec();
        stepper.run(&mut p, &[t], cfg, rng, sign, None, |_, y, _| {
            let inside = dom.contains(y);
            out[0] = if inside { 1.0 } else { 0.0 };
            out[1] = if inside { 0.0 } else { 1.0 };
        })
    })?;
    let est = |k| Estimate {
        value: mom.mean(k),
        stderr: mom.stderr(k),
        n: cfg.n_paths as u64,
        backend: BackendTag::Mc,
    };
    Ok((est(0), est(1)))
}

/// Rejection sampler for start points distributed as `|w| dω` on a box, where
/// `w` is a signed weight (already including any indicator restriction).
struct StartSampler<'a> {
    lo: Vec<f64>,
    hi: Vec<f64>,
    weight: Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>,
    bound: f64,
}

impl StartSampler<'_> {
    fn sample<R: Rng>(&self, rng: &mut R, x: &mut [f64]) -> Result<f64> {
        for _ in 0..10_000_000u32 {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = rng.gen_range(self.lo[i]..self.hi[i]);
            }
            let w = self.weight(x)?;
            if w != 0.0 {
                let u: f64 = rng.gen();
                if u * self.bound <= w.abs() {
                    return Ok(w.signum());
                }
            }
        }
        Err(Error::Numerical(
            "start-point rejection sampler failed to accept a sample".into(),
        ))
    }

    fn weight(&self, x: &[f64]) -> Result<f64> {
        (self.weight)(x)
    }
}

/// Upper bound for `|f|` on a box by dense sampling with a safety margin.
fn sampled_bound(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut rng = path_stream(0x5eed, u64::MAX);
    let mut best: f64 = 0.0;
    let mut x = vec![0.0; lo.len()];
    for _ in 0..20_000 {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = rng.gen_range(lo[i]..hi[i]);
        }
        best = best.max(f(&x)?.abs());
    }
    Ok(best * 1.25)
}

fn intersect_box(a: &[(f64, f64)], region: &Region, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo: Vec<f64> = a.iter().map(|p| p.0).collect();
    let mut hi: Vec<f64> = a.iter().map(|p| p.1).collect();
    if let Some(b) = &region.boxed {
        for i in 0..dim {
            lo[i] = lo[i].max(b[i].0);
            hi[i] = hi[i].min(b[i].1);
        }
    }
    if let Some((_, r)) = region.radial {
        for i in 0..dim {
            lo[i] = lo[i].max(-r);
            hi[i] = hi[i].min(r);
        }
    }
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::Support("sampling box must be bounded".into()));
    }
    if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
        return Err(Error::Support("weight support does not meet the sampling box".into()));
    }
    Ok((lo, hi))
}

fn support_box(region: &Region, dim: usize) -> Result<Vec<(f64, f64)>> {
    match (&region.boxed, region.radial) {
        (Some(b), _) => Ok(b.clone()),
        (None, Some((_, r))) => Ok(vec![(-r, r); dim]),
        (None, None) => Err(Error::Support("weight support must be bounded".into())),
    }
}

/// Whether `x ∈ Ω_r = {δ > r}`; points past the tubular band count as deep inside.
fn in_offset_domain(dom: &Domain, x: &[f64], r: f64) -> bool {
    if !dom.contains(x) {
        return false;
    }
    r <= 0.0 || dom.delta(x).map_or(true, |d| d > r)
}

/// Mass `∫_{Ω_r} |χ| dω` used to scale importance-sampled averages.
fn weighted_mass(dom: &Domain, chi: &WeightSpec, r: f64) -> Result<f64> {
    if chi.is_unit() && r == 0.0 && dom.model().has_lebesgue_measure() {
        return dom.volume();
    }
    let field = chi.field().clone();
    let abs = move |x: &[f64]| -> Result<f64> { Ok(field.value(x)?.abs()) };
    dom.volume_integral(&abs, r, chi.support())
}

fn sampler_on_domain<'a>(dom: &'a Domain, chi: &'a WeightSpec, r: f64) -> Result<StartSampler<'a>> {
    let m = dom.model();
    let (lo, hi) = intersect_box(&dom.bounding_box()?, chi.support(), dom.dim())?;
    let lebesgue = m.has_lebesgue_measure();
    let weight = move |x: &[f64]| -> Result<f64> {
        if !in_offset_domain(dom, x, r) {
            return Ok(0.0);
        }
        let c = if chi.is_unit() { 1.0 } else { chi.value(x)? };
        if lebesgue || c == 0.0 {
            Ok(c)
        } else {
            Ok(c * m.density_value(x)?)
        }
    };
    let bound = if chi.is_unit() && lebesgue {
        1.0
    } else {
        sampled_bound(&lo, &hi, &weight)?.max(chi.bound() * if lebesgue { 1.0 } else { 0.0 })
    };
    Ok(StartSampler {
        lo,
        hi,
        weight: Box::new(weight),
        bound,
    })
}

fn curve_from_moments(
    kind: CurveKind,
    times: &[f64],
    mom: &Moments,
    scale: f64,
    offset: f64,
    cfg: &SdeConfig,
    meta: CurveMetadata,
) -> Result<HeatContentCurve> {
    let estimates = (0..times.len())
        .map(|k| Estimate {
            value: offset + scale * mom.mean(k),
            stderr: scale.abs() * mom.stderr(k),
            n: cfg.n_paths as u64,
            backend: BackendTag::Mc,
        })
        .collect();
    let mut curve = HeatContentCurve::new(kind, times.to_vec(), estimates, meta)?;
    if let Some(cov) = mom.covariance_of_means() {
        curve = curve.with_covariance(
            cov.into_iter()
                .map(|row| row.into_iter().map(|c| c * scale * scale).collect())
                .collect(),
        );
    }
    Ok(curve)
}

fn metadata(dom: &Domain, chi: Option<&WeightSpec>, cfg: &SdeConfig) -> CurveMetadata {
    CurveMetadata::new(dom, chi, serde_json::to_string(cfg).unwrap_or_default())
}

/// Heat-content curves `H`, `K`, `Q` or `H^χ` with common random numbers across `times`.
pub fn estimate_heat_content(
    m: &ModelSpace,
    dom: &Domain,
    kind: CurveKind,
    chi: Option<&WeightSpec>,
    times: &[f64],
    cfg: &SdeConfig,
) -> Result<HeatContentCurve> {
    check_grid(times)?;
    let unit = WeightSpec::unit(dom.dim());
    let weight = match (kind, chi) {
        (CurveKind::HChi, Some(c)) => c,
        (CurveKind::HChi, None) => {
            return Err(Error::invalid("the weighted content Hchi needs a weight"));
        }
        (CurveKind::H | CurveKind::K | CurveKind::Q, _) => chi.unwrap_or(&unit),
        _ => {
            return Err(Error::invalid(format!(
                "'{kind}' is a boundary functional, not a heat content"
            )))
        }
    };
    if m.kind() != dom.model().kind() {
        return Err(Error::invalid("model does not match the domain's model"));
    }
    let mass = weighted_mass(dom, weight, 0.0)?;
    let sampler = sampler_on_domain(dom, weight, 0.0)?;
    let stepper = Stepper::new(m, cfg.scheme);
    let monitor = (kind == CurveKind::Q).then_some(dom);
    let d = dom.dim();
    let mom = run_units(cfg, times.len(), true, |rng, sign, out| {
        let mut x = [0.0; MAX_DIM];
        let s = sampler.sample(rng, &mut x[..d])?;
        stepper.run(&mut x[..d], times, cfg, rng, sign, monitor, |k, y, alive| {
            let inside = alive && dom.contains(y);
            out[k] = s * match kind {
                CurveKind::K => {
                    if inside {
                        0.0
                    } else {
                        1.0
                    }
                }
                _ => {
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        })
    })?;
    curve_from_moments(kind, times, &mom, mass, 0.0, cfg, metadata(dom, chi, cfg))
}

/// Which temperature enters a `G_v` functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GIntegrand {
    One,
    U,
    OneMinusU,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum BoundaryFunctional {
    /// `G_v[φ](t) = (1/(2√π)) ∫₀ᵗ ∫_∂Ω v(τ,·) φ dσ (t−τ)^{−1/2} dτ`.
    G { v: GIntegrand },
    /// `I_Ωφ(t, r) = ∫_{Ω_r} (1 − u) φ dω`.
    I { r: f64 },
    /// `Λ_Ωφ(t, r) = −∫_{∂Ω_r} (1 − u) φ dσ`.
    Lambda { r: f64 },
}

impl BoundaryFunctional {
    pub fn kind(&self) -> CurveKind {
        match self {
            BoundaryFunctional::G { .. } => CurveKind::G,
            BoundaryFunctional::I { .. } => CurveKind::I,
            BoundaryFunctional::Lambda { .. } => CurveKind::Lambda,
        }
    }
}

/// Number of Gauss–Legendre nodes in the substituted Duhamel time integral.
pub const TIME_NODES: usize = 24;

fn check_band_support(dom: &Domain, phi: &WeightSpec) -> Result<()> {
    if phi.is_unit() {
        return Ok(());
    }
    phi.verify_support(0).and_then(|_| {
        let rho = dom.tubular_radius();
        if !rho.is_finite() {
            return Ok(());
        }
        // probe the support box for nonzero values deep inside Ω or far outside
        let bx = support_box(phi.support(), dom.dim())?;
        if bx.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Ok(());
        }
        let (x, _) = gauss_legendre(6);
        let mut idx = vec![0usize; dom.dim()];
        loop {
            let p: Vec<f64> = idx
                .iter()
                .zip(&bx)
                .map(|(&i, (lo, hi))| 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[i])
                .collect();
            if phi.value(&p)? != 0.0 {
                if let Err(e) = dom.check_band(&p) {
                    return Err(Error::Support(format!(
                        "weight '{}' is nonzero outside the tubular band ({e})",
                        phi.name()
                    )));
                }
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return Ok(());
                }
                idx[k] += 1;
                if idx[k] < x.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    })
}

/// Boundary functionals `G`, `I`, `Λ` of a weight `φ` on a time grid.
pub fn estimate_boundary_functional(
    m: &ModelSpace,
    dom: &Domain,
    functional: BoundaryFunctional,
    phi: &WeightSpec,
    times: &[f64],
    cfg: &SdeConfig,
) -> Result<HeatContentCurve> {
    check_grid(times)?;
    cfg.validate()?;
    check_band_support(dom, phi)?;
    let stepper = Stepper::new(m, cfg.scheme);
    let meta = metadata(dom, Some(phi), cfg);
    let d = dom.dim();
    match functional {
        BoundaryFunctional::I { r } => {
            let mass = weighted_mass(dom, phi, r)?;
            let sampler = sampler_on_domain(dom, phi, r)?;
            let mom = run_units(cfg, times.len(), true, |rng, sign, out| {
                let mut x = [0.0; MAX_DIM];
                let s = sampler.sample(rng, &mut x[..d])?;
                stepper.run(&mut x[..d], times, cfg, rng, sign, None, |k, y, _| {
                    out[k] = if dom.contains(y) { 0.0 } else { s };
                })
            })?;
            curve_from_moments(CurveKind::I, times, &mom, mass, 0.0, cfg, meta)
        }
        BoundaryFunctional::Lambda { r } => {
            let nodes = dom.surface_nodes(r, dom.rule())?;
            let weights: Vec<f64> = nodes
                .iter()
                .map(|n| Ok(n.weight * phi.value(&n.point)?))
                .collect::<Result<_>>()?;
            let active: Vec<usize> = (0..nodes.len()).filter(|&i| weights[i] != 0.0).collect();
            let per_node = node_budget(cfg, active.len());
            let mut values = vec![0.0; times.len()];
            let mut vars = vec![0.0; times.len()];
            for (j, &i) in active.iter().enumerate() {
                let sub = SdeConfig {
                    n_paths: per_node,
                    seed: cfg.seed.wrapping_add((j as u64 + 1) << 32),
                    ..cfg.clone()
                };
                let us = estimate_u_curve(m, dom, times, &nodes[i].point, &sub)?;
                for (k, e) in us.iter().enumerate() {
                    values[k] -= weights[i] * (1.0 - e.value);
                    vars[k] += (weights[i] * e.stderr).powi(2);
                }
            }
            let est = values
                .iter()
                .zip(&vars)
                .map(|(v, s2)| Estimate {
                    value: *v,
                    stderr: s2.sqrt(),
                    n: (per_node * active.len()) as u64,
                    backend: BackendTag::Mc,
                })
                .collect();
            HeatContentCurve::new(CurveKind::Lambda, times.to_vec(), est, meta)
        }
        BoundaryFunctional::G { v } => {
            let nodes = dom.boundary_nodes()?;
            let weights: Vec<f64> = nodes
                .iter()
                .map(|n| Ok(n.weight * phi.value(&n.point)?))
                .collect::<Result<_>>()?;
            let norm = 1.0 / (2.0 * PI.sqrt());
            let rules: Vec<Vec<(f64, f64)>> =
                times.iter().map(|&t| singular_time_nodes(t, TIME_NODES)).collect();
            if v == GIntegrand::One {
                let total: f64 = weights.iter().sum();
                let est = rules
                    .iter()
                    .map(|rule| {
                        Estimate::exact(norm * total * rule.iter().map(|p| p.1).sum::<f64>(), BackendTag::Mc)
                    })
                    .collect();
                return HeatContentCurve::new(CurveKind::G, times.to_vec(), est, meta);
            }
            // every (t, τ-node) pair becomes a checkpoint; τ values are shared across paths
            let mut checkpoints: Vec<(f64, usize, usize)> = rules
                .iter()
                .enumerate()
                .flat_map(|(k, rule)| rule.iter().enumerate().map(move |(j, p)| (p.0, k, j)))
                .collect();
            checkpoints.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut taus: Vec<f64> = Vec::with_capacity(checkpoints.len());
            let mut slot = vec![0usize; checkpoints.len()];
            for (c, cp) in checkpoints.iter().enumerate() {
                if taus.last() != Some(&cp.0) {
                    taus.push(cp.0);
                }
                slot[c] = taus.len() - 1;
            }
            let active: Vec<usize> = (0..nodes.len()).filter(|&i| weights[i] != 0.0).collect();
            let per_node = node_budget(cfg, active.len());
            let mut values = vec![0.0; times.len()];
            let mut covs = vec![vec![0.0; times.len()]; times.len()];
            for (j, &i) in active.iter().enumerate() {
                let sub = SdeConfig {
                    n_paths: per_node,
                    seed: cfg.seed.wrapping_add((j as u64 + 1) << 32),
                    ..cfg.clone()
                };
                let start = &nodes[i].point;
                let mom = run_units(&sub, times.len(), true, |rng, sign, out| {
                    let mut ind = vec![0.0; taus.len()];
                    let mut x = [0.0; MAX_DIM];
                    x[..d].copy_from_slice(start);
                    stepper.run(&mut x[..d], &taus, &sub, rng, sign, None, |k, y, _| {
                        let inside = if dom.contains(y) { 1.0 } else { 0.0 };
                        ind[k] = match v {
                            GIntegrand::U => inside,
                            _ => 1.0 - inside,
                        };
                    })?;
                    out.iter_mut().for_each(|o| *o = 0.0);
                    for (c, cp) in checkpoints.iter().enumerate() {
                        out[cp.1] += rules[cp.1][cp.2].1 * ind[slot[c]];
                    }
                    Ok(())
                })?;
                let scale = norm * weights[i];
                let cov = mom.covariance_of_means().expect("cross moments requested");
                for k in 0..times.len() {
                    values[k] += scale * mom.mean(k);
                    for l in 0..times.len() {
                        covs[k][l] += scale * scale * cov[k][l];
                    }
                }
            }
            let est = values
                .iter()
                .enumerate()
                .map(|(k, v)| Estimate {
                    value: *v,
                    stderr: covs[k][k].max(0.0).sqrt(),
                    n: (per_node * active.len()) as u64,
                    backend: BackendTag::Mc,
                })
                .collect();
            Ok(HeatContentCurve::new(CurveKind::G, times.to_vec(), est, meta)?.with_covariance(covs))
        }
    }
}

fn node_budget(cfg: &SdeConfig, nodes: usize) -> usize {
    let mut per = (cfg.n_paths / nodes.max(1)).max(100);
    if cfg.antithetic && per % 2 == 1 {
        per += 1;
    }
    per
}

/// Inside, outside and difference curves `Iφ(t,0)`, `I^cφ(t,0)`, `Iφ − I^cφ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsideOutside {
    pub inside: HeatContentCurve,
    pub outside: HeatContentCurve,
    pub difference: HeatContentCurve,
}

/// Estimates inside and outside deficits from one set of paths started on both sides
/// of ∂Ω with density `|φ| dω`: inside starts contribute `1 − 𝟙_Ω(X_t)`, outside
/// starts contribute `𝟙_Ω(X_t)` (the complementary indicator).
pub fn estimate_inside_outside(
    m: &ModelSpace,
    dom: &Domain,
    phi: &WeightSpec,
    times: &[f64],
    cfg: &SdeConfig,
) -> Result<InsideOutside> {
    check_grid(times)?;
    check_band_support(dom, phi)?;
    let d = dom.dim();
    let bx = support_box(phi.support(), d)?;
    let (lo, hi) = intersect_box(&bx, &Region::everywhere(), d)?;
    let lebesgue = m.has_lebesgue_measure();
    let weight = |x: &[f64]| -> Result<f64> {
        let c = phi.value(x)?;
        if lebesgue || c == 0.0 {
            Ok(c)
        } else {
            Ok(c * m.density_value(x)?)
        }
    };
    let mass = box_integral(&lo, &hi, &|x| Ok(weight(x)?.abs()))?;
    let bound = sampled_bound(&lo, &hi, &weight)?.max(if lebesgue { phi.bound() } else { 0.0 });
    let sampler = StartSampler {
        lo,
        hi,
        weight: Box::new(weight),
        bound,
    };
    let stepper = Stepper::new(m, cfg.scheme);
    let n = times.len();
    let mom = run_units(cfg, 3 * n, false, |rng, sign, out| {
        let mut x = [0.0; MAX_DIM];
        let s = sampler.sample(rng, &mut x[..d])?;
        let started_inside = dom.contains(&x[..d]);
        stepper.run(&mut x[..d], times, cfg, rng, sign, None, |k, y, _| {
            let ends_inside = dom.contains(y);
            let (i, o) = match (started_inside, ends_inside) {
                (true, false) => (s, 0.0),
                (false, true) => (0.0, s),
                _ => (0.0, 0.0),
            };
            out[k] = i;
            out[n + k] = o;
            out[2 * n + k] = i - o;
        })
    })?;
    let meta = metadata(dom, Some(phi), cfg);
    let part = |offset: usize| -> Result<HeatContentCurve> {
        let est = (0..n)
            .map(|k| Estimate {
                value: mass * mom.mean(offset + k),
                stderr: mass * mom.stderr(offset + k),
                n: cfg.n_paths as u64,
                backend: BackendTag::Mc,
            })
            .collect();
        HeatContentCurve::new(CurveKind::I, times.to_vec(), est, meta.clone())
    };
    Ok(InsideOutside {
        inside: part(0)?,
        outside: part(n)?,
        difference: part(2 * n)?,
    })
}

/// Tensor Gauss–Legendre integral over a box (8 nodes × 24 panels per axis).
pub(crate) fn box_integral(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let (x, w) = gauss_legendre(8);
    let panels = match lo.len() {
        1 => 64,
        2 => 24,
        _ => 10,
    };
    let axis: Vec<Vec<(f64, f64)>> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let h = (b - a) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let mid = a + (p as f64 + 0.5) * h;
                    x.iter()
                        .zip(&w)
                        .map(move |(xi, wi)| (mid + 0.5 * h * xi, 0.5 * h * wi))
                })
                .collect()
        })
        .collect();
    let d = lo.len();
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut wt = 1.0;
        for k in 0..d {
            p[k] = axis[k][idx[k]].0;
            wt *= axis[k][idx[k]].1;
        }
        total += wt * f(&p)?;
        let mut k = 0;
        loop {
            if k == d {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < axis[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Factor;

    fn cfg(n: usize) -> SdeConfig {
        SdeConfig::new(n, 7)
    }

    #[test]
    fn config_validation() {
        assert!(SdeConfig::new(50, 0).validate().is_err());
        assert!(SdeConfig { dt: 0.0, ..cfg(1000) }.validate().is_err());
        assert!(SdeConfig { antithetic: true, ..cfg(1001) }.validate().is_err());
        assert_eq!(cfg(1000).step_for(0.4), 1e-3);
        assert_eq!(cfg(1000).step_for(0.04), 1e-4);
    }

    #[test]
    fn ladder_is_geometric_and_exact_at_ends() {
        let l = geometric_ladder(2.5e-4, 4e-3, 12).unwrap();
        assert_eq!(l[0], 2.5e-4);
        assert_eq!(l[11], 4e-3);
        let r = l[1] / l[0];
        assert!(l.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
        assert!(geometric_ladder(1.0, 0.5, 4).is_err());
    }

    #[test]
    fn euclid1_variance_is_2t() {
        let m = ModelSpace::euclid(1).unwrap();
        let c = SdeConfig { dt: 0.05, steps_per_t: None, ..cfg(100_000) };
        let samples: Vec<f64> = (0..c.n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_path(&m, &[0.0], 1.0, &c, i, None).unwrap().endpoint[0])
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1)
        let se = (2.0 * 4.0 / (n - 1.0)).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn partial_final_step_reaches_t() {
        // constant-coefficient paths: endpoint variance pins the total elapsed time
        let m = ModelSpace::euclid(1).unwrap();
        let c = SdeConfig { dt: 0.3, steps_per_t: None, ..cfg(40_000) };
        let sq: f64 = (0..c.n_paths as u64)
            .map(|i| simulate_path(&m, &[0.0], 1.0, &c, i, None).unwrap().endpoint[0].powi(2))
            .sum::<f64>()
            / c.n_paths as f64;
        assert!((sq - 2.0).abs() < 3.0 * (8.0 / c.n_paths as f64).sqrt());
    }

    #[test]
    fn heisenberg_vertical_mean_vanishes() {
        let m = ModelSpace::heisenberg();
        let c = SdeConfig { dt: 0.01, steps_per_t: None, ..cfg(20_000) };
        let z: Vec<f64> = (0..c.n_paths as u64)
            .map(|i| simulate_path(&m, &[0.0; 3], 1.0, &c, i, None).unwrap().endpoint[2])
            .collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn u_examples() {
        let dom = Domain::parse("interval a=0 b=1").unwrap();
        let m = dom.model().clone();
        let deep = estimate_u(&m, &dom, 1e-3, &[0.5], &cfg(20_000)).unwrap();
        assert_eq!(deep.value, 1.0);
        let e = estimate_u(&m, &dom, 0.01, &[0.2], &cfg(100_000)).unwrap();
        assert!((e.value - 0.9214).abs() < 3.0 * e.stderr, "{e:?}");
        let (u, uc) = estimate_u_and_complement(&m, &dom, 0.02, &[0.1], &cfg(2000)).unwrap();
        assert_eq!(u.value + uc.value, 1.0);
    }

    #[test]
    fn determinism_and_thread_independence() {
        let dom = Domain::parse("disc R=1").unwrap();
        let m = dom.model().clone();
        let times = [1e-3, 2e-3];
        let a = estimate_heat_content(&m, &dom, CurveKind::H, None, &times, &cfg(3000)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool
            .install(|| estimate_heat_content(&m, &dom, CurveKind::H, None, &times, &cfg(3000)))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn h_plus_k_and_q_below_h() {
        let dom = Domain::parse("disc R=1").unwrap();
        let m = dom.model().clone();
        let times = [1e-3, 4e-3, 1e-2];
        let c = cfg(4000);
        let h = estimate_heat_content(&m, &dom, CurveKind::H, None, &times, &c).unwrap();
        let k = estimate_heat_content(&m, &dom, CurveKind::K, None, &times, &c).unwrap();
        let q = estimate_heat_content(&m, &dom, CurveKind::Q, None, &times, &c).unwrap();
        for i in 0..times.len() {
            let (hv, kv, qv) = (h.estimates[i].value, k.estimates[i].value, q.estimates[i].value);
            assert!((hv + kv - PI).abs() < 1e-13);
            assert!(qv <= hv);
        }
        assert!(estimate_heat_content(&m, &dom, CurveKind::H, None, &[], &c).is_err());
    }

    #[test]
    fn g_of_one_is_analytic() {
        let dom = Domain::parse("disc R=1").unwrap();
        let m = dom.model().clone();
        let phi = WeightSpec::unit(2);
        let t = 2e-3;
        let g = estimate_boundary_functional(&m, &dom, BoundaryFunctional::G { v: GIntegrand::One }, &phi, &[t], &cfg(1000))
            .unwrap();
        let expect = 2.0 * PI * t.sqrt() / PI.sqrt();
        assert!((g.estimates[0].value - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn lambda_tends_to_minus_half_perimeter() {
        let dom = Domain::parse("interval a=0 b=1").unwrap();
        let m = dom.model().clone();
        let l = estimate_boundary_functional(&m, &dom, BoundaryFunctional::Lambda { r: 0.0 }, &WeightSpec::unit(1), &[1e-4], &cfg(20_000))
            .unwrap();
        let e = l.estimates[0];
        assert!((e.value + 1.0).abs() < 3.0 * e.stderr + 1e-3, "{e:?}");
    }

    #[test]
    fn support_violations_are_reported() {
        let dom = Domain::parse("disc R=1").unwrap();
        let m = dom.model().clone();
        let wide = WeightSpec::product("wide", 2, vec![Factor::RadialPlateau { inner: (0.0, 1.2), outer: (-0.1, 1.4) }]).unwrap();
        let r = estimate_boundary_functional(&m, &dom, BoundaryFunctional::I { r: 0.0 }, &wide, &[1e-3], &cfg(200));
        assert!(matches!(r, Err(Error::Support(_))), "{r:?}");
    }
}
