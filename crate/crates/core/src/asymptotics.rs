//! Fitting small-time power expansions, comparing them with predictions, and the
//! Duhamel / inside–outside residual checks.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domains::{coeff_a, Domain, WeightSpec};
use crate::error::{Error, Result};
use crate::kernels::exact_temperature;
use crate::mc::{
    check_grid, estimate_boundary_functional, estimate_inside_outside, BackendTag,
    BoundaryFunctional, CurveKind, CurveMetadata, Estimate, GIntegrand, HeatContentCurve, SdeConfig,
    TIME_NODES,
};
use crate::models::ModelSpace;
use crate::special::{gauss_legendre, singular_time_nodes};

/// Exponents allowed in the expansion basis.
pub const ALLOWED_EXPONENTS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const MAX_CONDITION: f64 = 1e12;

/// Default fit window and ladder size.
pub const DEFAULT_WINDOW: (f64, f64) = (2.5e-4, 4e-3);
pub const DEFAULT_POINTS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub window: (f64, f64),
    /// Value `c₀` was pinned to, if any.
    pub pinned: Option<f64>,
    pub points: usize,
    pub condition: f64,
    /// Largest |residual| / stderr (deterministic curves: / RMS residual).
    pub max_standardized_residual: f64,
    /// Log–log slope of `|y − c₀|` over the window (leading-order exponent).
    pub tail_slope: f64,
    pub backend: BackendTag,
}

impl AsymptoticFit {
    pub fn coefficient(&self, exponent: f64) -> Option<(f64, f64)> {
        self.exponents
            .iter()
            .position(|e| (e - exponent).abs() < 1e-12)
            .map(|i| (self.coefficients[i], self.stderrs[i]))
    }

    /// `key=value` text record.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        for (i, e) in self.exponents.iter().enumerate() {
            s.push_str(&format!(
                "coef[{e}]={:.12e} stderr[{e}]={:.6e}\n",
                self.coefficients[i], self.stderrs[i]
            ));
        }
        s.push_str(&format!(
            "window={:e},{:e}\npoints={}\ncondition={:.3e}\nmax_std_residual={:.4}\ntail_slope={:.5}\nbackend={}\n",
            self.window.0,
            self.window.1,
            self.points,
            self.condition,
            self.max_standardized_residual,
            self.tail_slope,
            self.backend
        ));
        s
    }
}

fn check_exponents(exps: &[f64]) -> Result<()> {
    if exps.is_empty() {
        return Err(Error::invalid("empty fit basis"));
    }
    for e in exps {
        if !ALLOWED_EXPONENTS.iter().any(|a| (a - e).abs() < 1e-12) {
            return Err(Error::invalid(format!(
                "exponent {e} not in the expansion basis {{0, 1/2, 1, 3/2, 2}}"
            )));
        }
    }
    if exps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("fit exponents must be strictly increasing"));
    }
    Ok(())
}

/// Weighted least squares in the basis `{t^e}` over the window.
///
/// MC curves are weighted by `1/stderr²`; when the curve carries a covariance (common
/// random numbers) the coefficient covariance uses the sandwich form so correlated
/// errors are accounted for. Deterministic curves get unit weights and a
/// residual-based covariance. With `pin = Some(c₀)` the constant term is fixed.
pub fn fit_sqrt_t(
    curve: &HeatContentCurve,
    exponents: &[f64],
    window: Option<(f64, f64)>,
    pin: Option<f64>,
) -> Result<AsymptoticFit> {
    check_exponents(exponents)?;
    let window = window.unwrap_or_else(|| {
        (
            *curve.times.first().unwrap_or(&0.0),
            *curve.times.last().unwrap_or(&0.0),
        )
    });
    let idx: Vec<usize> = (0..curve.len())
        .filter(|&i| curve.times[i] >= window.0 * (1.0 - 1e-12) && curve.times[i] <= window.1 * (1.0 + 1e-12))
        .collect();
    let pinned = pin.filter(|_| exponents[0] == 0.0);
    let free: Vec<f64> = exponents
        .iter()
        .copied()
        .filter(|e| !(pinned.is_some() && *e == 0.0))
        .collect();
    if idx.len() < 2 * exponents.len() {
        return Err(Error::invalid(format!(
            "fit needs at least {} points in the window, found {}",
            2 * exponents.len(),
            idx.len()
        )));
    }
    let backend = curve.backend();
    let n = idx.len();
    let p = free.len();
    let stochastic = backend.is_stochastic() && idx.iter().all(|&i| curve.estimates[i].stderr > 0.0);
    let sigma: Vec<f64> = idx
        .iter()
        .map(|&i| if stochastic { curve.estimates[i].stderr } else { 1.0 })
        .collect();
    let c0 = pinned.unwrap_or(0.0);
    let y: Vec<f64> = idx.iter().map(|&i| curve.estimates[i].value - c0).collect();
    let t: Vec<f64> = idx.iter().map(|&i| curve.times[i]).collect();

    let mut a = DMatrix::<f64>::zeros(n, p);
    for (r, &ti) in t.iter().enumerate() {
        for (c, &e) in free.iter().enumerate() {
            a[(r, c)] = ti.powf(e) / sigma[r];
        }
    }
    // equilibrate columns before judging conditioning
    let scales: Vec<f64> = (0..p).map(|c| a.column(c).norm()).collect();
    for (c, s) in scales.iter().enumerate() {
        if *s == 0.0 {
            return Err(Error::IllConditioned { cond: f64::INFINITY });
        }
        a.column_mut(c).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(n, y.iter().zip(&sigma).map(|(v, s)| v / s));
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond: condition });
    }
    let beta_s = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let ata_inv = (a.transpose() * &a)
        .try_inverse()
        .ok_or(Error::IllConditioned { cond: condition })?;
    let resid: Vec<f64> = (0..n).map(|r| b[r] - (a.row(r) * &beta_s)[0]).collect();

    let mut cov_s = if stochastic {
        match &curve.covariance {
            Some(full) => {
                // sandwich with the whitened correlation matrix
                let mut corr = DMatrix::<f64>::zeros(n, n);
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        corr[(r, c)] = full[i][j] / (sigma[r] * sigma[c]);
                    }
                }
                &ata_inv * a.transpose() * corr * &a * &ata_inv
            }
            None => ata_inv.clone(),
        }
    } else {
        let dof = n.saturating_sub(p).max(1) as f64;
        let s2 = resid.iter().map(|r| r * r).sum::<f64>() / dof;
        &ata_inv * s2
    };
    // undo column scaling
    for r in 0..p {
        for c in 0..p {
            cov_s[(r, c)] /= scales[r] * scales[c];
        }
    }
    let beta: Vec<f64> = (0..p).map(|c| beta_s[c] / scales[c]).collect();

    let mut coefficients = Vec::with_capacity(exponents.len());
    let mut positions = Vec::with_capacity(exponents.len());
    let mut k = 0;
    for e in exponents {
        if pinned.is_some() && *e == 0.0 {
            coefficients.push(c0);
            positions.push(None);
        } else {
            coefficients.push(beta[k]);
            positions.push(Some(k));
            k += 1;
        }
    }
    let m = exponents.len();
    let covariance: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| match (positions[r], positions[c]) {
                    (Some(i), Some(j)) => cov_s[(i, j)],
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let stderrs = (0..m).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let max_standardized_residual = if stochastic {
        resid.iter().fold(0.0f64, |acc, r| acc.max(r.abs()))
    } else if rms > 0.0 {
        resid.iter().fold(0.0f64, |acc, r| acc.max(r.abs())) / rms
    } else {
        0.0
    };
    let base = pinned.unwrap_or_else(|| {
        exponents
            .iter()
            .position(|e| *e == 0.0)
            .map_or(0.0, |i| coefficients[i])
    });
    let tail: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (curve.times[i], (curve.estimates[i].value - base).abs()))
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let tail_slope = loglog_slope(&tail).unwrap_or(f64::NAN);

    Ok(AsymptoticFit {
        exponents: exponents.to_vec(),
        coefficients,
        stderrs,
        covariance,
        window,
        pinned,
        points: n,
        condition,
        max_standardized_residual,
        tail_slope,
        backend,
    })
}

/// Least-squares slope of `log y` against `log t`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (t, y) in points {
        let (lx, ly) = (t.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let den = n * sxx - sx * sx;
    (den != 0.0).then(|| (n * sxy - sx * sy) / den)
}

/// Thresholds for [`compare`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Maximum |z| for stochastic fits.
    pub z_max: f64,
    /// Maximum relative error for deterministic fits.
    pub rel_max: f64,
    /// Absolute tolerance used when the prediction is (near) zero.
    pub abs_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            z_max: 3.0,
            rel_max: 1e-3,
            abs_floor: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub exponent: f64,
    pub predicted: f64,
    pub fitted: f64,
    pub stderr: f64,
    pub z: Option<f64>,
    pub rel_error: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub stochastic: bool,
    pub thresholds: Thresholds,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, exponent: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| (r.exponent - exponent).abs() < 1e-12)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            write!(
                f,
                "exponent={} predicted={:.9e} fitted={:.9e} stderr={:.3e}",
                r.exponent,
                r.predicted + 0.0,
                r.fitted + 0.0,
                r.stderr
            )?;
            if let Some(z) = r.z {
                write!(f, " z={z:.3}")?;
            }
            if let Some(e) = r.rel_error {
                write!(f, " rel_error={e:.3e}")?;
            }
            writeln!(f, " verdict={}", if r.pass { "pass" } else { "fail" })?;
        }
        Ok(())
    }
}

/// Compares fitted coefficients with predictions (one per basis exponent).
pub fn compare(fit: &AsymptoticFit, predicted: &[f64], thresholds: Thresholds) -> Result<ComparisonReport> {
    if predicted.len() != fit.coefficients.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} fitted coefficients",
            predicted.len(),
            fit.coefficients.len()
        )));
    }
    let stochastic = fit.backend.is_stochastic();
    let rows = fit
        .exponents
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let (p, c, s) = (predicted[i], fit.coefficients[i], fit.stderrs[i]);
            let diff = c - p;
            let z = (s > 0.0).then(|| diff / s);
            let rel = (p != 0.0).then(|| (diff / p).abs());
            let pass = if stochastic && fit.pinned.map_or(true, |_| e != 0.0) {
                match z {
                    Some(z) => z.abs() <= thresholds.z_max,
                    None => diff == 0.0,
                }
            } else {
                diff.abs() <= (thresholds.rel_max * p.abs()).max(thresholds.abs_floor * (p == 0.0) as u8 as f64)
                    || diff == 0.0
            };
            ComparisonRow {
                exponent: e,
                predicted: p,
                fitted: c,
                stderr: s,
                z,
                rel_error: rel,
                pass,
            }
        })
        .collect();
    Ok(ComparisonReport {
        rows,
        stochastic,
        thresholds,
    })
}

/// Source of the temperature `u` in the residual checks.
#[derive(Clone, Debug, PartialEq)]
pub enum TemperatureBackend {
    Exact,
    Mc(SdeConfig),
}

/// `(∫_Ω (1−u)φ dω, ∫_{Ω^c} u φ dω)` with the exact temperature, integrating over
/// offset surfaces `{δ = s}` (coarea with `‖∇δ‖ = 1` in the band).
pub fn exact_deficits(dom: &Domain, phi: &WeightSpec, t: f64) -> Result<(f64, f64)> {
    let rho = dom.tubular_radius();
    let reach = (14.0 * t.sqrt()).min(0.999 * rho);
    let s_unit = t.sqrt();
    let mut breaks = vec![0.0];
    let mut k = 0.25;
    while k * s_unit < reach {
        breaks.push(k * s_unit);
        k *= 2.0;
    }
    breaks.push(reach);
    let (x, w) = gauss_legendre(16);
    let mut inside = 0.0;
    let mut outside = 0.0;
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            let ws = 0.5 * (hi - lo) * wi;
            inside += ws * dom.offset_integral(s, |y| {
                let f = phi.value(y)?;
                if f == 0.0 {
                    return Ok(0.0);
                }
                Ok((1.0 - exact_temperature(dom, t, y)?) * f)
            })?;
            outside += ws * dom.offset_integral(-s, |y| {
                let f = phi.value(y)?;
                if f == 0.0 {
                    return Ok(0.0);
                }
                Ok(exact_temperature(dom, t, y)? * f)
            })?;
        }
    }
    Ok((inside, outside))
}

/// `G_v[φ](t)` with the exact temperature.
pub fn exact_g_functional(dom: &Domain, phi: &WeightSpec, v: GIntegrand, t: f64) -> Result<f64> {
    let nodes = dom.boundary_nodes()?;
    let weights: Vec<(Vec<f64>, f64)> = nodes
        .into_iter()
        .map(|n| Ok((n.point.clone(), n.weight * phi.value(&n.point)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let mut total = 0.0;
    for (tau, wt) in singular_time_nodes(t, TIME_NODES) {
        let mut inner = 0.0;
        for (p, w) in &weights {
            let val = match v {
                GIntegrand::One => 1.0,
                GIntegrand::U => exact_temperature(dom, tau, p)?,
                GIntegrand::OneMinusU => 1.0 - exact_temperature(dom, tau, p)?,
            };
            inner += w * val;
        }
        total += wt * inner;
    }
    Ok(total / (2.0 * PI.sqrt()))
}

/// Both sides of the first-order Duhamel identity at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelPoint {
    pub t: f64,
    /// `Iφ(t, 0)`.
    pub lhs: Estimate,
    /// `(1/√π) ∫₀ᵗ ∫_∂Ω (1−u) φ dσ (t−τ)^{−1/2} dτ`.
    pub rhs: Estimate,
    pub residual: f64,
}

pub fn duhamel_point(
    m: &ModelSpace,
    dom: &Domain,
    phi: &WeightSpec,
    t: f64,
    backend: &TemperatureBackend,
) -> Result<DuhamelPoint> {
    let (lhs, rhs) = match backend {
        TemperatureBackend::Exact => {
            let (inside, _) = exact_deficits(dom, phi, t)?;
            let g = exact_g_functional(dom, phi, GIntegrand::OneMinusU, t)?;
            (
                Estimate::exact(inside, BackendTag::KernelExact),
                Estimate::exact(2.0 * g, BackendTag::KernelExact),
            )
        }
        TemperatureBackend::Mc(cfg) => {
            let i = estimate_boundary_functional(m, dom, BoundaryFunctional::I { r: 0.0 }, phi, &[t], cfg)?;
            let g = estimate_boundary_functional(
                m,
                dom,
                BoundaryFunctional::G {
                    v: GIntegrand::OneMinusU,
                },
                phi,
                &[t],
                cfg,
            )?;
            let ge = g.estimates[0];
            (
                i.estimates[0],
                Estimate {
                    value: 2.0 * ge.value,
                    stderr: 2.0 * ge.stderr,
                    ..ge
                },
            )
        }
    };
    Ok(DuhamelPoint {
        t,
        lhs,
        rhs,
        residual: (lhs.value - rhs.value).abs(),
    })
}

/// `|Iφ(t,0) − (1/√π)∫₀ᵗ∫_∂Ω(1−u)φ dσ (t−τ)^{−1/2}dτ|`.
pub fn duhamel_first_order_residual(
    m: &ModelSpace,
    dom: &Domain,
    phi: &WeightSpec,
    t: f64,
    backend: &TemperatureBackend,
) -> Result<f64> {
    Ok(duhamel_point(m, dom, phi, t, backend)?.residual)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub points: Vec<DuhamelPoint>,
    /// Log–log slope of the residuals against t.
    pub exponent: f64,
}

/// Residuals on a ladder and their fitted decay exponent.
pub fn duhamel_ladder(
    m: &ModelSpace,
    dom: &Domain,
    phi: &WeightSpec,
    ladder: &[f64],
    backend: &TemperatureBackend,
) -> Result<LadderReport> {
    check_grid(ladder)?;
    let points = ladder
        .iter()
        .map(|&t| duhamel_point(m, dom, phi, t, backend))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.residual > 0.0)
        .map(|p| (p.t, p.residual))
        .collect();
    Ok(LadderReport {
        exponent: loglog_slope(&pairs).unwrap_or(f64::NAN),
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsideOutsidePoint {
    pub t: f64,
    pub inside: Estimate,
    pub outside: Estimate,
    /// `Iφ − I^cφ`.
    pub difference: Estimate,
    /// `Σ_{i≤k} a_i(φ) tⁱ`.
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsideOutsideReport {
    pub order: usize,
    pub a: Vec<f64>,
    pub points: Vec<InsideOutsidePoint>,
    /// Log–log slope of |residual| (NaN when all residuals vanish).
    pub exponent: f64,
}

impl InsideOutsideReport {
    /// Whether every |residual| is within `k` standard errors (plus `floor`).
    pub fn within_noise(&self, k: f64, floor: f64) -> bool {
        self.points
            .iter()
            .all(|p| p.residual <= k * p.difference.stderr + floor)
    }

    pub fn to_curve(&self, meta: CurveMetadata) -> Result<HeatContentCurve> {
        HeatContentCurve::new(
            CurveKind::I,
            self.points.iter().map(|p| p.t).collect(),
            self.points.iter().map(|p| p.difference).collect(),
            meta,
        )
    }
}

/// `Iφ(t,0) − I^cφ(t,0) − Σ_{i≤k} a_i(φ) tⁱ` on a ladder (`order = k ≤ 3`).
pub fn inside_outside_check(
    m: &ModelSpace,
    dom: &Domain,
    phi: &WeightSpec,
    ladder: &[f64],
    order: usize,
    backend: &TemperatureBackend,
) -> Result<InsideOutsideReport> {
    check_grid(ladder)?;
    let a = (1..=order)
        .map(|i| coeff_a(dom, phi, i))
        .collect::<Result<Vec<_>>>()?;
    let poly = |t: f64| {
        a.iter()
            .enumerate()
            .map(|(i, ai)| ai * t.powi(i as i32 + 1))
            .sum::<f64>()
    };
    let triples: Vec<(Estimate, Estimate, Estimate)> = match backend {
        TemperatureBackend::Exact => ladder
            .iter()
            .map(|&t| {
                let (i, o) = exact_deficits(dom, phi, t)?;
                let e = |v| Estimate::exact(v, BackendTag::KernelExact);
                Ok((e(i), e(o), e(i - o)))
            })
            .collect::<Result<_>>()?,
        TemperatureBackend::Mc(cfg) => {
            let io = estimate_inside_outside(m, dom, phi, ladder, cfg)?;
            (0..ladder.len())
                .map(|k| (io.inside.estimates[k], io.outside.estimates[k], io.difference.estimates[k]))
                .collect()
        }
    };
    let points: Vec<InsideOutsidePoint> = ladder
        .iter()
        .zip(triples)
        .map(|(&t, (inside, outside, difference))| {
            let predicted = poly(t);
            InsideOutsidePoint {
                t,
                inside,
                outside,
                difference,
                predicted,
                residual: (difference.value - predicted).abs(),
            }
        })
        .collect();
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.residual > 0.0)
        .map(|p| (p.t, p.residual))
        .collect();
    Ok(InsideOutsideReport {
        order,
        a,
        exponent: loglog_slope(&pairs).unwrap_or(f64::NAN),
        points,
    })
}

/// `G_u[φ]` curve from the exact temperature.
/// Leading `(√t, t)` coefficients of `G_v[φ]`: with `A = ∫φ dσ` and `B = ∫φΔδ dσ`,
/// `G_1 ≈ A/√π·√t`, `G_u ≈ A/(2√π)·√t + B/8·t` and `G_{1−u} = G_1 − G_u`.
pub fn predict_g_coefficients(dom: &Domain, phi: &WeightSpec, v: GIntegrand) -> Result<[f64; 2]> {
    dom.ensure_noncharacteristic()?;
    let dom = &dom.adapted_to(phi);
    let m = dom.model();
    let field = phi.field().clone();
    let a = dom.boundary_integral(|x| field.value(x))?;
    let b = dom.boundary_integral(|x| {
        let p = field.value(x)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok(p * m.sublaplacian_jet(&dom.delta_jet(x, 2)?)?.value())
    })?;
    let sp = PI.sqrt();
    Ok(match v {
        GIntegrand::One => [a / sp, 0.0],
        GIntegrand::U => [a / (2.0 * sp), b / 8.0],
        GIntegrand::OneMinusU => [a / (2.0 * sp), -b / 8.0],
    })
}

pub fn exact_g_curve(dom: &Domain, phi: &WeightSpec, v: GIntegrand, times: &[f64]) -> Result<HeatContentCurve> {
    check_grid(times)?;
    let est = times
        .iter()
        .map(|&t| Ok(Estimate::exact(exact_g_functional(dom, phi, v, t)?, BackendTag::KernelExact)))
        .collect::<Result<Vec<_>>>()?;
    HeatContentCurve::new(
        CurveKind::G,
        times.to_vec(),
        est,
        CurveMetadata::new(dom, Some(phi), "kernel-exact".into()),
    )
}
