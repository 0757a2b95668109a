//! Boundary operators and the predicted small-time coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Domain, Region, WeightSpec};
use crate::error::{Error, Result};
use crate::jets::{Field, Jet};
use crate::models::{ModelKind, ModelSpace};

/// Jet of `Nφ = 2 g(∇φ, ∇δ) + φ Δδ`.
pub fn n_jet(m: &ModelSpace, delta: &Jet, phi: &Jet) -> Result<Jet> {
    let pairing = m.metric_pairing_jet(phi, delta)?.scale(2.0);
    let lap_delta = m.sublaplacian_jet(delta)?;
    pairing.try_add(&phi.try_mul(&lap_delta)?)
}

/// `N^power φ(x)`.
pub fn operator_n(dom: &Domain, phi: &Field, x: &[f64], power: usize) -> Result<f64> {
    if !(1..=3).contains(&power) {
        return Err(Error::invalid(format!("N power must be 1, 2 or 3, got {power}")));
    }
    dom.check_band(x)?;
    let delta = dom.delta_jet(x, power + 1)?;
    let mut jet = phi.jet(x, power)?;
    for _ in 0..power {
        jet = n_jet(dom.model(), &delta, &jet)?;
    }
    Ok(jet.value())
}

/// Predicted coefficients of `H^χ(t) ≈ c₀ + c₁√t + c₂t + c₃t^{3/2} + c₄t²`,
/// with the boundary integrals they were assembled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedCoefficients {
    pub c: [f64; 5],
    /// Named integrals, e.g. `("int_chi_dsigma", 6.28)`.
    pub integrals: Vec<(String, f64)>,
}

impl PredictedCoefficients {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.integrals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Predicted c₀…c₄ for the weighted heat content with weight χ.
pub fn predict_coefficients(dom: &Domain, chi: &WeightSpec) -> Result<PredictedCoefficients> {
    dom.ensure_noncharacteristic()?;
    let dom = &dom.adapted_to(chi);
    let m = dom.model();
    let nodes = dom.boundary_nodes()?;
    let mut sums = [0.0f64; 6];
    for node in &nodes {
        let x = &node.point;
        let delta = dom.delta_jet(x, 3)?;
        let lap_delta = m.sublaplacian_jet(&delta)?;
        let chi_jet = chi.field().jet(x, 3)?;
        let pairing = m.metric_pairing_jet(&chi_jet, &delta)?;
        let lap_chi = m.sublaplacian_jet(&chi_jet)?;
        let n1 = n_jet(m, &delta, &chi_jet)?;
        let n2 = n_jet(m, &delta, &n1)?;
        let lap_pairing = m.metric_pairing_jet(&lap_chi, &delta)?;
        let w = node.weight;
        sums[0] += w * chi_jet.value();
        sums[1] += w * pairing.value();
        sums[2] += w * (4.0 * lap_chi.value() + n2.value());
        sums[3] += w * n1.value() * lap_delta.value();
        sums[4] += w * lap_pairing.value();
        sums[5] += w;
    }
    let volume = if chi.is_unit() {
        dom.volume()?
    } else {
        let f = chi.field().clone();
        dom.volume_integral(&move |x: &[f64]| f.value(x), 0.0, chi.support())?
    };
    let sqrt_pi = PI.sqrt();
    let c = [
        volume,
        -sums[0] / sqrt_pi,
        -0.5 * sums[1],
        -sums[2] / (12.0 * sqrt_pi) + sums[3] / (6.0 * sqrt_pi),
        -0.5 * sums[4],
    ];
    let integrals = vec![
        ("int_chi_domega".to_string(), volume),
        ("int_chi_dsigma".to_string(), sums[0]),
        ("int_g_grad_chi_grad_delta_dsigma".to_string(), sums[1]),
        ("int_4lap_plus_n2_chi_dsigma".to_string(), sums[2]),
        ("int_n_chi_lap_delta_dsigma".to_string(), sums[3]),
        ("int_g_grad_lap_chi_grad_delta_dsigma".to_string(), sums[4]),
        ("perimeter".to_string(), sums[5]),
    ];
    Ok(PredictedCoefficients { c, integrals })
}

/// Classical curvature form of c₃ for Euclidean domains:
/// `((n−1)²/(12√π)) ∫ (H² + 2c/(n−1)²) dA` with H the mean curvature and c = Σ κᵢ².
pub fn euclidean_curvature_coefficient(dom: &Domain) -> Result<f64> {
    if !matches!(
        dom.model().kind(),
        ModelKind::Euclid1 | ModelKind::Euclid2 | ModelKind::Euclid3
    ) {
        return Err(Error::unsupported(
            dom.model().name(),
            "the Euclidean curvature formula",
        ));
    }
    let mut total = 0.0;
    for node in dom.boundary_nodes()? {
        let d = node.params.len();
        if d == 0 {
            continue;
        }
        let p = Jet::coordinates(&node.params, 2)?;
        let e = dom.embed(node.piece, 0.0, &p)?;
        let grad = dom.level_jet(&node.point, 1)?.gradient();
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let normal: Vec<f64> = grad.iter().map(|v| v / gnorm).collect();
        let tangent = |i: usize| -> Vec<f64> { e.iter().map(|c| c.partial(i)).collect() };
        let second = |i: usize, j: usize| -> f64 {
            let mut alpha = vec![0; d];
            alpha[i] += 1;
            alpha[j] += 1;
            e.iter()
                .zip(&normal)
                .map(|(c, nv)| c.derivative(&alpha) * nv)
                .sum()
        };
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let (sum_k, sum_k2) = if d == 1 {
            let t = tangent(0);
            let k = second(0, 0) / dot(&t, &t);
            (k, k * k)
        } else {
            let (t0, t1) = (tangent(0), tangent(1));
            let g = [[dot(&t0, &t0), dot(&t0, &t1)], [dot(&t0, &t1), dot(&t1, &t1)]];
            let b = [[second(0, 0), second(0, 1)], [second(0, 1), second(1, 1)]];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let gi = [
                [g[1][1] / det, -g[0][1] / det],
                [-g[1][0] / det, g[0][0] / det],
            ];
            let mut s = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] = gi[i][0] * b[0][j] + gi[i][1] * b[1][j];
                }
            }
            let tr = s[0][0] + s[1][1];
            let tr2 = s[0][0] * s[0][0] + 2.0 * s[0][1] * s[1][0] + s[1][1] * s[1][1];
            (tr, tr2)
        };
        total += node.weight * (sum_k * sum_k + 2.0 * sum_k2);
    }
    Ok(total / (12.0 * PI.sqrt()))
}

/// `a_i(φ) = ∫_{∂Ω} g(∇(Δ^{i−1}φ), ∇δ) dσ` for `i ∈ {1, 2, 3}`.
pub fn coeff_a(dom: &Domain, phi: &WeightSpec, i: usize) -> Result<f64> {
    if !(1..=3).contains(&i) {
        return Err(Error::invalid(format!("a_i is available for i = 1..3, got {i}")));
    }
    let order = 2 * i - 1;
    if order > crate::jets::MAX_ORDER {
        return Err(Error::OrderTooHigh {
            requested: order,
            max: crate::jets::MAX_ORDER,
        });
    }
    let m = dom.model();
    dom.boundary_integral(|x| {
        let delta = dom.delta_jet(x, 1)?;
        let mut jet = phi.field().jet(x, order)?;
        for _ in 1..i {
            jet = m.sublaplacian_jet(&jet)?;
        }
        Ok(m.metric_pairing_jet(&jet, &delta)?.value())
    })
}

/// `|F''(r) − ∫_{Ω_r} Δv dω − ∫_{∂Ω_r} v div(ν_r) dσ|` with `F(r) = ∫_{Ω_r} v dω`,
/// F'' by a five-point stencil of step `1e-3`.
pub fn mean_value_residual(dom: &Domain, v: &Field, r: f64, region: &Region) -> Result<f64> {
    let h = 1e-3;
    let rho = dom.tubular_radius();
    if r < 0.0 || r + 2.0 * h >= rho || (r - 2.0 * h).abs() >= rho {
        return Err(Error::OutsideBand {
            point: vec![r],
            distance: r + 2.0 * h,
            radius: rho,
        });
    }
    let m = dom.model();
    let value = {
        let v = v.clone();
        move |x: &[f64]| v.value(x)
    };
    let big_f = |s: f64| dom.volume_integral(&value, s, region);
    let f2 = (-big_f(r + 2.0 * h)? + 16.0 * big_f(r + h)? - 30.0 * big_f(r)?
        + 16.0 * big_f(r - h)?
        - big_f(r - 2.0 * h)?)
        / (12.0 * h * h);
    let lap = {
        let v = v.clone();
        let m = m.clone();
        move |x: &[f64]| Ok(m.sublaplacian_jet(&v.jet(x, 2)?)?.value())
    };
    let interior = dom.volume_integral(&lap, r, region)?;
    let flux = dom.offset_integral(r, |x| {
        let lap_delta = m.sublaplacian_jet(&dom.delta_jet(x, 2)?)?.value();
        Ok(-v.value(x)? * lap_delta)
    })?;
    Ok((f2 - interior - flux).abs())
}

/// Follows `ẋ = ∇δ(x)` for time `t` from `x0` (RK4 with `steps` steps).
pub fn flow_along_distance_gradient(dom: &Domain, x0: &[f64], t: f64, steps: usize) -> Result<Vec<f64>> {
    let m = dom.model();
    let field = |x: &[f64]| -> Result<Vec<f64>> {
        let d = dom.delta_jet(x, 1)?;
        let coeffs: Vec<f64> = m.apply_frame(&d)?.iter().map(Jet::value).collect();
        let mut out = vec![0.0; x.len()];
        m.frame_combination(x, &coeffs, &mut out);
        Ok(out)
    };
    let h = t / steps as f64;
    let mut x = x0.to_vec();
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
    };
    for _ in 0..steps {
        let k1 = field(&x)?;
        let k2 = field(&axpy(&x, 0.5 * h, &k1))?;
        let k3 = field(&axpy(&x, 0.5 * h, &k2))?;
        let k4 = field(&axpy(&x, h, &k3))?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(x)
}
