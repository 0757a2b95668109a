//! Finite-difference solution of `∂_t u = Δu` from `u(0) = 𝟙_Ω` on Euclid1, Euclid2
//! and the Grushin plane, as a deterministic cross-check of the other backends.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain, DomainKind, WeightSpec};
use crate::error::{Error, Result};
use crate::mc::{check_grid, BackendTag, CurveKind, CurveMetadata, Estimate, HeatContentCurve};
use crate::models::{ModelKind, ModelSpace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    Explicit,
    /// Backward Euler; alternating-direction (Lie) splitting in 2D.
    #[default]
    Implicit,
}

/// Cell-centred tensor grid on a box with homogeneous Dirichlet far field.
///
/// Axes flagged in `no_flux` (those along which Ω is translation invariant, so the
/// solution does not decay) get reflecting box edges instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub dt: f64,
    pub padding: f64,
    pub scheme: GridScheme,
    #[serde(default)]
    pub no_flux: Vec<bool>,
}

/// Padding in units of `√T · (max frame norm)`; the minimum accepted is 6.
pub const PADDING_FACTOR: f64 = 10.0;
const MIN_PADDING_FACTOR: f64 = 6.0;

fn require_grid_model(m: &ModelSpace) -> Result<()> {
    match m.kind() {
        ModelKind::Euclid1 | ModelKind::Euclid2 | ModelKind::Grushin if m.has_lebesgue_measure() => Ok(()),
        _ => Err(Error::unsupported(m.name(), "finite-difference grids")),
    }
}

impl GridSpec {
    /// Grid of spacing ≈ `h` around the domain window, padded by `10√t_max` (scaled
    /// by the largest frame coefficient on the box for Grushin).
    pub fn for_domain(dom: &Domain, t_max: f64, h: f64, dt: f64) -> Result<GridSpec> {
        require_grid_model(dom.model())?;
        if !(h > 0.0 && dt > 0.0 && t_max > 0.0) {
            return Err(Error::Config("grid spacing, time step and horizon must be positive".into()));
        }
        let bbox = dom.bounding_box()?;
        let pad = PADDING_FACTOR * t_max.sqrt();
        let mut lo: Vec<f64> = bbox.iter().map(|b| b.0 - pad).collect();
        let mut hi: Vec<f64> = bbox.iter().map(|b| b.1 + pad).collect();
        if dom.model().kind() == ModelKind::Grushin {
            let xmax = lo[0].abs().max(hi[0].abs());
            lo[1] = bbox[1].0 - pad * xmax;
            hi[1] = bbox[1].1 + pad * xmax;
        }
        let cells = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| ((b - a) / h).ceil() as usize)
            .collect();
        let no_flux = match dom.kind() {
            DomainKind::GrushinStrip { .. } => vec![false, true],
            _ => Vec::new(),
        };
        Ok(GridSpec {
            lo,
            hi,
            cells,
            dt,
            padding: pad,
            scheme: GridScheme::Implicit,
            no_flux,
        })
    }

    pub fn is_no_flux(&self, axis: usize) -> bool {
        self.no_flux.get(axis).copied().unwrap_or(false)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    pub fn center(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i as f64 + 0.5) * self.h(axis)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).product()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, m: &ModelSpace) -> Result<()> {
        require_grid_model(m)?;
        let d = m.dim();
        if self.lo.len() != d || self.hi.len() != d || self.cells.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.cells.len(),
            });
        }
        if self.cells.iter().any(|&c| c < 3) || self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b) {
            return Err(Error::Config("grid needs at least 3 cells on a non-empty box".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("grid time step must be positive".into()));
        }
        Ok(())
    }
}

/// Second-order divergence-form stencil for `Σ X_i²` on a [`GridSpec`].
///
/// Cells are stored x-major: index `i * ny + j`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub spec: GridSpec,
    /// Coefficient of the y-second difference per x-column (1 for Euclid2, x² for Grushin).
    y_coef: Vec<f64>,
}

/// Builds the stencil; errors for the explicit scheme when the time step violates CFL.
pub fn assemble_operator(m: &ModelSpace, grid: &GridSpec) -> Result<DiscreteOperator> {
    grid.validate(m)?;
    let y_coef = match m.kind() {
        ModelKind::Euclid1 => vec![],
        ModelKind::Euclid2 => vec![1.0; grid.cells[0]],
        _ => (0..grid.cells[0]).map(|i| grid.center(0, i).powi(2)).collect(),
    };
    let op = DiscreteOperator {
        spec: grid.clone(),
        y_coef,
    };
    if grid.scheme == GridScheme::Explicit {
        let limit = op.stable_dt();
        if grid.dt > limit {
            return Err(Error::Cfl {
                dt: grid.dt,
                suggested: 0.9 * limit,
            });
        }
    }
    Ok(op)
}

impl DiscreteOperator {
    /// Largest stable explicit step `1 / Σ_axis (2 a_max / h²)`.
    pub fn stable_dt(&self) -> f64 {
        let hx = self.spec.h(0);
        let mut rate = 2.0 / (hx * hx);
        if self.spec.dim() == 2 {
            let hy = self.spec.h(1);
            let amax = self.y_coef.iter().cloned().fold(0.0, f64::max);
            rate += 2.0 * amax / (hy * hy);
        }
        1.0 / rate
    }

    pub fn y_coefficient(&self, column: usize) -> f64 {
        self.y_coef.get(column).copied().unwrap_or(0.0)
    }

    /// `A u` with zero (Dirichlet) or mirrored (no-flux) ghost values.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let s = &self.spec;
        let nx = s.cells[0];
        let hx2 = s.h(0).powi(2);
        let (gx, gy) = (s.is_no_flux(0) as u8 as f64, s.is_no_flux(1) as u8 as f64);
        if s.dim() == 1 {
            return (0..nx)
                .map(|i| {
                    let l = if i > 0 { u[i - 1] } else { gx * u[i] };
                    let r = if i + 1 < nx { u[i + 1] } else { gx * u[i] };
                    (l - 2.0 * u[i] + r) / hx2
                })
                .collect();
        }
        let ny = s.cells[1];
        let hy2 = s.h(1).powi(2);
        let mut out = vec![0.0; u.len()];
        out.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
            let a = self.y_coef[i];
            for j in 0..ny {
                let c = u[i * ny + j];
                let l = if i > 0 { u[(i - 1) * ny + j] } else { gx * c };
                let r = if i + 1 < nx { u[(i + 1) * ny + j] } else { gx * c };
                let d = if j > 0 { u[i * ny + j - 1] } else { gy * c };
                let up = if j + 1 < ny { u[i * ny + j + 1] } else { gy * c };
                col[j] = (l - 2.0 * c + r) / hx2 + a * (d - 2.0 * c + up) / hy2;
            }
        });
        out
    }

    /// Advances `u` by `dt` with the configured scheme.
    pub fn step(&self, u: &mut [f64], dt: f64) {
        match self.spec.scheme {
            GridScheme::Explicit => {
                let au = self.apply(u);
                for (v, a) in u.iter_mut().zip(au) {
                    *v += dt * a;
                }
            }
            GridScheme::Implicit => self.implicit_step(u, dt),
        }
    }

    fn implicit_step(&self, u: &mut [f64], dt: f64) {
        let s = &self.spec;
        let nx = s.cells[0];
        let rx = dt / s.h(0).powi(2);
        if s.dim() == 1 {
            solve_tridiagonal_constant(u, rx, s.is_no_flux(0), &mut vec![0.0; nx]);
            return;
        }
        let ny = s.cells[1];
        let ry = dt / s.h(1).powi(2);
        // x-sweeps: gather each row (fixed j), solve, scatter back
        let rows: Vec<Vec<f64>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let mut row: Vec<f64> = (0..nx).map(|i| u[i * ny + j]).collect();
                solve_tridiagonal_constant(&mut row, rx, s.is_no_flux(0), &mut vec![0.0; nx]);
                row
            })
            .collect();
        for (j, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                u[i * ny + j] = *v;
            }
        }
        // y-sweeps on contiguous columns
        u.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
            let r = ry * self.y_coef[i];
            if r > 0.0 {
                solve_tridiagonal_constant(col, r, s.is_no_flux(1), &mut vec![0.0; ny]);
            }
        });
    }
}

/// Solves `(1 + 2r) v_i − r (v_{i−1} + v_{i+1}) = b_i` in place (Thomas algorithm);
/// with `no_flux` the end rows use mirrored ghosts, `(1 + r) v_0 − r v_1 = b_0`.
fn solve_tridiagonal_constant(b: &mut [f64], r: f64, no_flux: bool, scratch: &mut [f64]) {
    let n = b.len();
    let diag = 1.0 + 2.0 * r;
    let end = if no_flux { 1.0 + r } else { diag };
    let mut denom = end;
    scratch[0] = -r / denom;
    b[0] /= denom;
    for i in 1..n {
        denom = if i + 1 == n { end } else { diag } + r * scratch[i - 1];
        scratch[i] = -r / denom;
        b[i] = (b[i] + r * b[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        b[i] -= scratch[i] * b[i + 1];
    }
}

/// Fraction of each cell inside Ω (exact in 1D, sub-sampled on cut cells in 2D).
pub fn cell_fractions(dom: &Domain, spec: &GridSpec) -> Vec<f64> {
    let nx = spec.cells[0];
    let hx = spec.h(0);
    if spec.dim() == 1 {
        let (a, b) = match dom.kind() {
            DomainKind::Interval { a, b } => (*a, *b),
            _ => unreachable!("1D grids only carry intervals"),
        };
        return (0..nx)
            .map(|i| {
                let lo = spec.lo[0] + i as f64 * hx;
                ((b.min(lo + hx) - a.max(lo)).max(0.0)) / hx
            })
            .collect();
    }
    let ny = spec.cells[1];
    let hy = spec.h(1);
    const SUB: usize = 48;
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
        let x0 = spec.lo[0] + i as f64 * hx;
        for (j, f) in col.iter_mut().enumerate() {
            let y0 = spec.lo[1] + j as f64 * hy;
            let probes = [
                [x0, y0],
                [x0 + hx, y0],
                [x0, y0 + hy],
                [x0 + hx, y0 + hy],
                [x0 + 0.5 * hx, y0 + 0.5 * hy],
            ];
            let inside = probes.iter().filter(|p| dom.contains(&p[..])).count();
            *f = match inside {
                5 => 1.0,
                0 => 0.0,
                _ => {
                    let mut c = 0usize;
                    for a in 0..SUB {
                        for b in 0..SUB {
                            let p = [
                                x0 + (a as f64 + 0.5) * hx / SUB as f64,
                                y0 + (b as f64 + 0.5) * hy / SUB as f64,
                            ];
                            c += dom.contains(&p) as usize;
                        }
                    }
                    c as f64 / (SUB * SUB) as f64
                }
            };
        }
    });
    out
}

/// Result of a grid solve: requested curves plus conservation diagnostics.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub h: HeatContentCurve,
    pub k: HeatContentCurve,
    pub weighted: Option<HeatContentCurve>,
    /// Initial total mass `Σ u h^n`.
    pub initial_mass: f64,
    /// Total mass at each grid time.
    pub mass: Vec<f64>,
    /// Final state (for snapshots).
    pub state: Vec<f64>,
    pub spec: GridSpec,
}

impl GridSolution {
    /// Largest relative mass loss over the grid times.
    pub fn max_leakage(&self) -> f64 {
        self.mass
            .iter()
            .map(|m| (self.initial_mass - m).abs() / self.initial_mass)
            .fold(0.0, f64::max)
    }
}

/// Solves from the indicator and records `H`, `K` (and `H^χ` when `chi` is given).
///
/// For translation-invariant domains the contents are accumulated over the reporting
/// patch only, while the initial datum fills the whole padded box.
pub fn solve_heat(
    m: &ModelSpace,
    dom: &Domain,
    grid: &GridSpec,
    times: &[f64],
    chi: Option<&WeightSpec>,
) -> Result<GridSolution> {
    check_grid(times)?;
    if m.kind() != dom.model().kind() {
        return Err(Error::invalid("model does not match the domain's model"));
    }
    let op = assemble_operator(m, grid)?;
    let t_max = *times.last().expect("non-empty grid");
    let bbox = dom.bounding_box()?;
    // the box must contain Ω plus a diffusion-length margin up to the last time
    let xmax = grid.lo[0].abs().max(grid.hi[0].abs());
    let needed = MIN_PADDING_FACTOR * t_max.sqrt();
    for (axis, b) in bbox.iter().enumerate() {
        let scale = if m.kind() == ModelKind::Grushin && axis == 1 { xmax } else { 1.0 };
        if grid.lo[axis] > b.0 - needed * scale || grid.hi[axis] < b.1 + needed * scale {
            return Err(Error::Config(format!(
                "grid box too small for t = {t_max}: axis {axis} needs padding ≥ {:.4}",
                needed * scale
            )));
        }
    }
    let frac = cell_fractions(dom, grid);
    let cv = grid.cell_volume();
    let n = grid.len();
    let ny = if grid.dim() == 2 { grid.cells[1] } else { 1 };
    let center = |idx: usize| -> Vec<f64> {
        if grid.dim() == 1 {
            vec![grid.center(0, idx)]
        } else {
            vec![grid.center(0, idx / ny), grid.center(1, idx % ny)]
        }
    };
    // reporting window weights: whole box, or the patch columns for translation-invariant Ω
    let window: Vec<f64> = if dom.is_translation_invariant() {
        let (plo, phi) = bbox[1];
        let hy = grid.h(1);
        (0..n)
            .map(|idx| {
                let y0 = grid.lo[1] + (idx % ny) as f64 * hy;
                ((phi.min(y0 + hy) - plo.max(y0)).max(0.0)) / hy
            })
            .collect()
    } else {
        vec![1.0; n]
    };
    let chi_vals: Option<Vec<f64>> = match chi {
        Some(c) if !c.is_unit() => Some((0..n).map(|i| c.value(&center(i))).collect::<Result<_>>()?),
        _ => None,
    };
    let mut u = frac.clone();
    let mass_of = |u: &[f64]| u.iter().sum::<f64>() * cv;
    let initial_mass = mass_of(&u);
    let (mut hv, mut kv, mut wv, mut masses) = (vec![], vec![], vec![], vec![]);
    let mut now = 0.0;
    for &t in times {
        let span = t - now;
        let steps = (span / grid.dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            op.step(&mut u, h);
        }
        now = t;
        let mut inside = 0.0;
        let mut outside = 0.0;
        let mut weighted = 0.0;
        for idx in 0..n {
            let w = window[idx] * u[idx] * cv;
            inside += w * frac[idx];
            outside += w * (1.0 - frac[idx]);
            if let Some(c) = &chi_vals {
                weighted += w * frac[idx] * c[idx];
            }
        }
        hv.push(inside);
        kv.push(outside);
        wv.push(weighted);
        masses.push(mass_of(&u));
    }
    let meta = CurveMetadata::new(dom, chi, serde_json::to_string(grid).unwrap_or_default());
    let curve = |kind, vals: &[f64]| {
        HeatContentCurve::new(
            kind,
            times.to_vec(),
            vals.iter().map(|v| Estimate::exact(*v, BackendTag::Grid)).collect(),
            meta.clone(),
        )
    };
    Ok(GridSolution {
        h: curve(CurveKind::H, &hv)?,
        k: curve(CurveKind::K, &kv)?,
        weighted: match chi_vals {
            Some(_) => Some(curve(CurveKind::HChi, &wv)?),
            None => None,
        },
        initial_mass,
        mass: masses,
        state: u,
        spec: grid.clone(),
    })
}

/// Writes `state` as little-endian f64 to `<stem>.bin` with a text header `<stem>.txt`.
pub fn write_snapshot(stem: &Path, spec: &GridSpec, t: f64, state: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(state.len() * 8);
    for v in state {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(stem.with_extension("bin"), bytes)?;
    let mut header = fs::File::create(stem.with_extension("txt"))?;
    writeln!(header, "dims = {:?}", spec.cells)?;
    writeln!(header, "lo = {:?}", spec.lo)?;
    writeln!(header, "hi = {:?}", spec.hi)?;
    writeln!(header, "t = {t:e}")?;
    writeln!(header, "layout = x-major little-endian f64")?;
    Ok(())
}
