//! Heat kernels, half-space temperatures, the Neumann half-line kernel, and
//! exact temperatures / heat contents on built-in domains.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::domains::{Domain, DomainKind, WeightSpec};
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpace};
use crate::special::{erf, erfc, i0e, integrate_adaptive, integrate_breaks, integrate_gl};

/// How a kernel or temperature value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    ClosedForm,
    OscillatoryIntegral,
    /// Closed-form transverse marginal of the diffusion.
    Marginal,
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// Heat kernel evaluator with an optional value cache for the Heisenberg integral.
pub struct KernelEvaluator {
    model: ModelSpace,
    rel_tol: f64,
    cache: Option<Mutex<HashMap<(u64, u64, u64), f64>>>,
}

impl KernelEvaluator {
    pub fn new(model: &ModelSpace) -> Result<Self> {
        match model.kind() {
            ModelKind::Grushin => Err(Error::unsupported("grushin", "heat kernel evaluation")),
            _ if !model.has_lebesgue_measure() => Err(Error::unsupported(
                model.name(),
                "heat kernels for non-Lebesgue measures",
            )),
            _ => Ok(KernelEvaluator {
                model: model.clone(),
                rel_tol: 1e-11,
                cache: None,
            }),
        }
    }

    /// Enables memoization keyed by `(t, r², |z|)` of the group difference.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(Mutex::new(HashMap::new()));
        self
    }

    pub fn method(&self) -> KernelMethod {
        match self.model.kind() {
            ModelKind::Heisenberg => KernelMethod::OscillatoryIntegral,
            _ => KernelMethod::ClosedForm,
        }
    }

    /// `p_t(x, y)` for the generator Δ.
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        check_t(t)?;
        let n = self.model.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len().min(y.len()),
            });
        }
        match self.model.kind() {
            ModelKind::Heisenberg => {
                // group difference x^{-1} y
                let g = [
                    y[0] - x[0],
                    y[1] - x[1],
                    y[2] - x[2] - 0.5 * (x[0] * y[1] - x[1] * y[0]),
                ];
                let r2 = g[0] * g[0] + g[1] * g[1];
                let z = g[2].abs();
                match &self.cache {
                    None => Ok(heisenberg_kernel_origin(t, r2, z, self.rel_tol)),
                    Some(cache) => {
                        let key = (t.to_bits(), r2.to_bits(), z.to_bits());
                        if let Some(v) = cache.lock().expect("kernel cache").get(&key) {
                            return Ok(*v);
                        }
                        let v = heisenberg_kernel_origin(t, r2, z, self.rel_tol);
                        cache.lock().expect("kernel cache").insert(key, v);
                        Ok(v)
                    }
                }
            }
            _ => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok((4.0 * PI * t).powf(-(n as f64) / 2.0) * (-d2 / (4.0 * t)).exp())
            }
        }
    }
}

/// `p_t(x, y)` for the generator Δ on Euclidean models and the Heisenberg group.
pub fn heat_kernel(m: &ModelSpace, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    KernelEvaluator::new(m)?.eval(t, x, y)
}

/// Heisenberg kernel from the origin to a point with `x² + y² = r2` and vertical
/// coordinate `z`:
/// `(1/π) ∫₀^∞ cos(λz) λ / (4π sinh λt) · exp(−(λ r²/4) coth λt) dλ`.
pub fn heisenberg_kernel_origin(t: f64, r2: f64, z: f64, rel_tol: f64) -> f64 {
    let integrand = |lambda: f64| -> f64 {
        if lambda == 0.0 {
            return (1.0 / (4.0 * PI * t)) * (-r2 / (4.0 * t)).exp();
        }
        let lt = lambda * t;
        let (prefactor, coth) = if lt > 20.0 {
            // sinh and coth in overflow-safe form
            (2.0 * lambda / (4.0 * PI) * (-lt).exp() / (1.0 - (-2.0 * lt).exp()), 1.0 / lt.tanh())
        } else {
            (lambda / (4.0 * PI * lt.sinh()), 1.0 / lt.tanh())
        };
        (lambda * z).cos() * prefactor * (-(lambda * r2 / 4.0) * coth).exp()
    };
    // the integrand decays like exp(−λ (t + r²/4)) for large λ
    let rate = t + r2 / 4.0;
    let upper = 60.0 / rate;
    let scale = (1.0 / (4.0 * PI * t)) / PI;
    let pieces = (1.0 + upper * z / (2.0 * PI)).ceil().min(4000.0) as usize;
    let h = upper / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        total += integrate_adaptive(
            integrand,
            k as f64 * h,
            (k + 1) as f64 * h,
            1e-17 * scale / t,
            rel_tol,
        );
    }
    total / PI
}

/// Temperature `u(t, x)` of the half-space `{z₁ > 0}` at signed distance `delta`.
///
/// Euclidean models: `(1/2) erfc(−δ/(2√t))`. Heisenberg with the plane `{x = 0}`:
/// the `x`-coordinate of the diffusion is `√2 B`, so the same profile holds
/// exactly (method [`KernelMethod::Marginal`]).
pub fn halfspace_temperature(m: &ModelSpace, t: f64, delta: f64) -> Result<(f64, KernelMethod)> {
    check_t(t)?;
    let v = 0.5 * erfc(-delta / (2.0 * t.sqrt()));
    match m.kind() {
        ModelKind::Euclid1 | ModelKind::Euclid2 | ModelKind::Euclid3 => {
            Ok((v, KernelMethod::ClosedForm))
        }
        ModelKind::Heisenberg => Ok((v, KernelMethod::Marginal)),
        ModelKind::Grushin => Err(Error::unsupported(
            "grushin",
            "half-space temperature (use the strip profile)",
        )),
    }
}

/// `∫_{x > 0} p_t(q, y) dy` on the Heisenberg group by direct quadrature of the
/// oscillatory-integral kernel (slow; used as a cross-check of the marginal form).
pub fn heisenberg_halfspace_quadrature(t: f64, q: &[f64; 3], nodes: usize) -> Result<f64> {
    check_t(t)?;
    let ev = KernelEvaluator::new(&ModelSpace::heisenberg())?;
    let s = t.sqrt();
    let (x_hi, y_w, z_w) = (q[0] + 9.0 * s, 9.0 * s, 12.0 * t + 5.0 * s * (q[0].abs() + q[1].abs()));
    let x_lo = 0.0f64.max(q[0] - 9.0 * s);
    // the kernel varies on a scale ~t in the vertical direction
    let z_panels = ((4.0 * z_w / t).ceil() as usize).clamp(2, 400);
    if x_hi <= 0.0 {
        return Ok(0.0);
    }
    let inner = |x: f64| -> f64 {
        integrate_gl(
            |y| {
                // in group coordinates the vertical offset relative to q is sheared
                let shift = q[2] + 0.5 * (q[0] * y - q[1] * x);
                integrate_gl(
                    |z| ev.eval(t, q, &[x, y, z]).unwrap_or(0.0),
                    shift - z_w,
                    shift + z_w,
                    nodes,
                    z_panels,
                )
            },
            q[1] - y_w,
            q[1] + y_w,
            nodes,
            2,
        )
    };
    Ok(integrate_gl(inner, x_lo, x_hi, nodes, 2))
}

/// Neumann heat kernel of the half-line `(4πt)^{−1/2}(e^{−(r−s)²/4t} + e^{−(r+s)²/4t})`.
pub fn neumann_halfline_kernel(t: f64, r: f64, s: f64) -> Result<f64> {
    check_t(t)?;
    Ok((4.0 * PI * t).powf(-0.5)
        * ((-(r - s) * (r - s) / (4.0 * t)).exp() + (-(r + s) * (r + s) / (4.0 * t)).exp()))
}

/// Exact temperature `u(t, x) = ∫_Ω p_t(x, y) dω(y)` on built-in domains with a
/// closed-form or one-dimensional-integral representation.
pub fn exact_temperature(dom: &Domain, t: f64, x: &[f64]) -> Result<f64> {
    check_t(t)?;
    let s = 2.0 * t.sqrt();
    let strip = |lo: f64, hi: f64, v: f64| 0.5 * (erf((v - lo) / s) + erf((hi - v) / s));
    match dom.kind() {
        DomainKind::Interval { a, b } => Ok(strip(*a, *b, x[0])),
        DomainKind::HeisSlab { width, .. } => Ok(strip(0.0, *width, x[0])),
        DomainKind::GrushinStrip { offset, width, .. } => Ok(strip(*offset, offset + width, x[0])),
        DomainKind::HeisHalfspace { .. } => Ok(0.5 * erfc(-x[0] / s)),
        DomainKind::Disc { radius } => Ok(disc_temperature(t, *radius, x[0].hypot(x[1]))),
        DomainKind::Ball { radius } => {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(ball_temperature(t, *radius, r))
        }
        DomainKind::Annulus { inner, outer } => {
            let r = x[0].hypot(x[1]);
            Ok(disc_temperature(t, *outer, r) - disc_temperature(t, *inner, r))
        }
        DomainKind::HeisBall { .. } => Err(Error::unsupported(
            "heisenberg",
            "exact temperature of the Heisenberg ball",
        )),
    }
}

/// Disc temperature at radius `r`:
/// `∫₀^R (ρ/2t) e^{−(ρ−r)²/4t} i0e(ρr/2t) dρ`.
pub fn disc_temperature(t: f64, radius: f64, r: f64) -> f64 {
    let w = 40.0 * t.sqrt();
    let lo = (r - w).max(0.0);
    let hi = (r + w).min(radius);
    if hi <= lo {
        return if r < radius { 1.0 } else { 0.0 };
    }
    let f = |rho: f64| {
        rho / (2.0 * t) * (-(rho - r) * (rho - r) / (4.0 * t)).exp() * i0e(rho * r / (2.0 * t))
    };
    // resolve the peak near ρ = r with extra breakpoints
    let mut breaks = vec![lo];
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        let b = r + k * t.sqrt();
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.push(hi);
    integrate_breaks(f, &breaks, 32)
}

/// Disc temperature on the boundary circle, `(1/2)(1 − i0e(R²/2t))`.
pub fn disc_boundary_temperature(t: f64, radius: f64) -> f64 {
    0.5 * (1.0 - i0e(radius * radius / (2.0 * t)))
}

/// Ball temperature at radius `r` (closed form).
pub fn ball_temperature(t: f64, radius: f64, r: f64) -> f64 {
    let s = 2.0 * t.sqrt();
    if r < 1e-12 {
        return erf(radius / s) - radius / (PI * t).sqrt() * (-radius * radius / (4.0 * t)).exp();
    }
    0.5 * (erf((radius - r) / s) + erf((radius + r) / s))
        - t.sqrt() / (r * PI.sqrt())
            * ((-(radius - r).powi(2) / (4.0 * t)).exp() - (-(radius + r).powi(2) / (4.0 * t)).exp())
}

/// `L erf(L/2√t) − 2√(t/π)(1 − e^{−L²/4t})`: relative heat content of an interval of length L.
pub fn interval_heat_content(t: f64, length: f64) -> f64 {
    length * erf(length / (2.0 * t.sqrt()))
        - 2.0 * (t / PI).sqrt() * (1.0 - (-length * length / (4.0 * t)).exp())
}

/// Dirichlet heat content of an interval of length L (Fourier series).
pub fn interval_dirichlet_heat_content(t: f64, length: f64) -> f64 {
    // for small t the series converges slowly; use the image expansion instead
    if t < 0.05 * length * length {
        let mut total = length - 4.0 * (t / PI).sqrt();
        // Σ_{k≥1} (−1)^{k+1} 8 √t · ierfc(kL/(2√t)) with ierfc(x) = e^{−x²}/√π − x erfc(x)
        for k in 1..50 {
            let x = k as f64 * length / (2.0 * t.sqrt());
            let ierfc = (-x * x).exp() / PI.sqrt() - x * erfc(x);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * 8.0 * t.sqrt() * ierfc;
            if ierfc < 1e-300 {
                break;
            }
        }
        total
    } else {
        let mut total = 0.0;
        for j in 0..200 {
            let k = (2 * j + 1) as f64;
            total += 8.0 * length / (k * k * PI * PI) * (-k * k * PI * PI * t / (length * length)).exp();
        }
        total
    }
}

/// Exact relative heat content `H_Ω(t)` on built-in domains (per reporting patch for
/// translation-invariant ones).
pub fn exact_heat_content(dom: &Domain, t: f64) -> Result<f64> {
    check_t(t)?;
    match dom.kind() {
        DomainKind::Interval { a, b } => Ok(interval_heat_content(t, b - a)),
        DomainKind::HeisSlab { width, patch } => Ok(interval_heat_content(t, *width)
            * (patch[0].1 - patch[0].0)
            * (patch[1].1 - patch[1].0)),
        DomainKind::GrushinStrip { width, patch, .. } => {
            Ok(interval_heat_content(t, *width) * (patch.1 - patch.0))
        }
        DomainKind::Disc { radius } => {
            let r = *radius;
            let autocorrelation = |d: f64| {
                2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).max(0.0).sqrt()
            };
            let f = |rho: f64| rho / (2.0 * t) * (-rho * rho / (4.0 * t)).exp() * autocorrelation(rho);
            Ok(gaussian_radial_integral(f, t, 2.0 * r))
        }
        DomainKind::Ball { radius } => {
            let r = *radius;
            let lens = |d: f64| PI * (4.0 * r + d) * (2.0 * r - d).powi(2) / 12.0;
            let f = |rho: f64| {
                4.0 * PI * rho * rho * (4.0 * PI * t).powf(-1.5) * (-rho * rho / (4.0 * t)).exp() * lens(rho)
            };
            Ok(gaussian_radial_integral(f, t, 2.0 * r))
        }
        _ => Err(Error::unsupported(
            dom.model().name(),
            format!("exact heat content of '{}'", dom.kind().name()),
        )),
    }
}

fn gaussian_radial_integral(f: impl Fn(f64) -> f64, t: f64, cap: f64) -> f64 {
    let hi = cap.min(40.0 * t.sqrt());
    let s = t.sqrt();
    let mut breaks = vec![0.0];
    for k in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0] {
        if k * s < hi {
            breaks.push(k * s);
        }
    }
    breaks.push(hi);
    breaks
        .windows(2)
        .map(|w| integrate_adaptive(&f, w[0], w[1], 1e-16, 1e-14))
        .sum()
}

/// Exact weighted content `∫_Ω u χ dω` by volume quadrature of the exact temperature.
pub fn exact_weighted_content(dom: &Domain, chi: &WeightSpec, t: f64) -> Result<f64> {
    Ok(exact_weighted_content_curve(dom, chi, &[t])?[0])
}

/// [`exact_weighted_content`] on several times, sharing the weight quadrature.
///
/// On slabs, half-spaces and strips the temperature depends on `x` only, so χ is first
/// integrated over the transverse window and the remaining `x` integral uses panels
/// refined geometrically toward the boundary.
pub fn exact_weighted_content_curve(dom: &Domain, chi: &WeightSpec, times: &[f64]) -> Result<Vec<f64>> {
    for &t in times {
        check_t(t)?;
    }
    if chi.is_unit() {
        return times.iter().map(|&t| exact_heat_content(dom, t)).collect();
    }
    let (x_range, transverse, walls) = match dom.kind() {
        DomainKind::HeisSlab { width, patch } => ((0.0, *width), patch.to_vec(), vec![0.0, *width]),
        DomainKind::HeisHalfspace { patch } => ((0.0, f64::INFINITY), patch.to_vec(), vec![0.0]),
        DomainKind::GrushinStrip { offset, width, patch } => {
            ((*offset, offset + width), vec![*patch], vec![*offset, offset + width])
        }
        _ => {
            let field = chi.field().clone();
            return times
                .iter()
                .map(|&t| {
                    let f = |x: &[f64]| -> Result<f64> {
                        let c = field.value(x)?;
                        if c == 0.0 {
                            return Ok(0.0);
                        }
                        Ok(c * exact_temperature(dom, t, x)?)
                    };
                    dom.volume_integral(&f, 0.0, chi.support())
                })
                .collect();
        }
    };
    if !dom.model().has_lebesgue_measure() {
        return Err(Error::unsupported(dom.model().name(), "exact weighted content with a density"));
    }
    let support = chi.support().boxed.clone();
    let clip = |axis: usize, (lo, hi): (f64, f64)| match &support {
        Some(b) => (lo.max(b[axis].0), hi.min(b[axis].1)),
        None => (lo, hi),
    };
    let (xa, xb) = clip(0, x_range);
    if !xb.is_finite() {
        return Err(Error::Support("half-space weights need a bounded x-support".into()));
    }
    if xb <= xa {
        return Ok(vec![0.0; times.len()]);
    }
    let box_t: Vec<(f64, f64)> = transverse.iter().enumerate().map(|(i, &r)| clip(i + 1, r)).collect();
    if box_t.iter().any(|(a, b)| b <= a) {
        return Ok(vec![0.0; times.len()]);
    }
    let field = chi.field().clone();
    let failed = std::sync::atomic::AtomicBool::new(false);
    let value = |p: &[f64]| match field.value(p) {
        Ok(v) => v,
        Err(_) => {
            failed.store(true, std::sync::atomic::Ordering::Relaxed);
            0.0
        }
    };
    // separable product weights: the transverse integral is a product of 1D integrals
    let separable = chi
        .product_description()
        .filter(|pw| pw.factors.iter().all(|f| f.axis().is_some()));
    let transverse_factor = separable.map(|pw| {
        let dim = dom.dim();
        (1..dim)
            .map(|a| {
                let fs: Vec<_> = pw.factors.iter().filter(|f| f.axis() == Some(a)).collect();
                let mut edges = vec![box_t[a - 1].0];
                edges.extend(fs.iter().flat_map(|f| f.breakpoints(a)).filter(|&b| b > box_t[a - 1].0 && b < box_t[a - 1].1));
                edges.push(box_t[a - 1].1);
                edges.sort_by(f64::total_cmp);
                let g = |v: f64| {
                    let mut p = vec![0.0; dim];
                    p[a] = v;
                    fs.iter().map(|f| f.value(&p)).product::<f64>()
                };
                edges.windows(2).map(|w| integrate_adaptive(g, w[0], w[1], 1e-16, 1e-14)).sum::<f64>()
            })
            .product::<f64>()
    });
    let marginal = |x: f64| -> f64 {
        if let (Some(pw), Some(tf)) = (separable, transverse_factor) {
            let mut p = vec![0.0; dom.dim()];
            p[0] = x;
            return tf * pw.factors.iter().filter(|f| f.axis() == Some(0)).map(|f| f.value(&p)).product::<f64>();
        }
        match box_t.len() {
            1 => integrate_adaptive(|y| value(&[x, y]), box_t[0].0, box_t[0].1, 1e-15, 1e-13),
            _ => integrate_adaptive(
                |y| integrate_adaptive(|z| value(&[x, y, z]), box_t[1].0, box_t[1].1, 1e-15, 1e-13),
                box_t[0].0,
                box_t[0].1,
                1e-15,
                1e-13,
            ),
        }
    };
    let mut breaks = vec![xa, xb];
    for &w in &walls {
        let mut d = 1e-4;
        while d < xb - xa {
            for p in [w - d, w + d] {
                if p > xa && p < xb {
                    breaks.push(p);
                }
            }
            d *= 2.0;
        }
    }
    if let Some(pw) = chi.product_description() {
        breaks.extend(pw.factors.iter().flat_map(|f| f.breakpoints(0)).filter(|&b| b > xa && b < xb));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (gx, gw) = crate::special::gauss_legendre(20);
    let mut nodes = Vec::new();
    for seg in breaks.windows(2) {
        let (c, h) = (0.5 * (seg[0] + seg[1]), 0.5 * (seg[1] - seg[0]));
        for (xi, wi) in gx.iter().zip(&gw) {
            let x = c + h * xi;
            let m = marginal(x);
            if m != 0.0 {
                nodes.push((x, h * wi * m));
            }
        }
    }
    if failed.load(std::sync::atomic::Ordering::Relaxed) {
        return Err(Error::Numerical(format!("weight '{}' failed to evaluate", chi.name())));
    }
    let probe: Vec<f64> = vec![0.0; dom.dim()];
    times
        .iter()
        .map(|&t| {
            let mut p = probe.clone();
            let mut total = 0.0;
            for &(x, w) in &nodes {
                p[0] = x;
                total += w * exact_temperature(dom, t, &p)?;
            }
            Ok(total)
        })
        .collect()
}

/// Exact boundary temperature where it is constant along ∂Ω (disc, interval-type domains).
pub fn exact_boundary_temperature(dom: &Domain, t: f64) -> Result<f64> {
    check_t(t)?;
    match dom.kind() {
        DomainKind::Disc { radius } => Ok(disc_boundary_temperature(t, *radius)),
        DomainKind::Interval { a, b } => Ok(0.5 * erf((b - a) / (2.0 * t.sqrt()))),
        DomainKind::HeisSlab { width, .. } | DomainKind::GrushinStrip { width, .. } => {
            Ok(0.5 * erf(width / (2.0 * t.sqrt())))
        }
        DomainKind::HeisHalfspace { .. } => Ok(0.5),
        _ => Err(Error::unsupported(
            dom.model().name(),
            format!("closed-form boundary temperature of '{}'", dom.kind().name()),
        )),
    }
}
