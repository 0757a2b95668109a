//! Model sub-Riemannian spaces: generating frames, measure, dilations, and the
//! horizontal gradient / sub-Laplacian built on jets.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{directional_derivative, Field, Jet};

/// Built-in model spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Euclid1,
    Euclid2,
    Euclid3,
    Heisenberg,
    Grushin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Euclid1,
        ModelKind::Euclid2,
        ModelKind::Euclid3,
        ModelKind::Heisenberg,
        ModelKind::Grushin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Euclid1 => "euclid1",
            ModelKind::Euclid2 => "euclid2",
            ModelKind::Euclid3 => "euclid3",
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Grushin => "grushin",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::Euclid1 => "R^1, frame d/dx, Lebesgue measure, Q = 1",
            ModelKind::Euclid2 => "R^2, frame d/dx_i, Lebesgue measure, Q = 2",
            ModelKind::Euclid3 => "R^3, frame d/dx_i, Lebesgue measure, Q = 3",
            ModelKind::Heisenberg => {
                "H^1, X = dx - (y/2)dz, Y = dy + (x/2)dz, Lebesgue measure, weights (1,1,2), Q = 4"
            }
            ModelKind::Grushin => "Grushin plane, X = dx, Y = x dy, Lebesgue measure, singular set {x = 0}",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// A generating frame with measure density and dilation structure.
#[derive(Clone)]
pub struct ModelSpace {
    kind: ModelKind,
    density: Option<Field>,
}

impl fmt::Debug for ModelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpace")
            .field("kind", &self.kind)
            .field("density", &self.density.as_ref().map(|d| d.name().to_string()))
            .finish()
    }
}

/// Horizontal tangent vector with its minimal-norm frame coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl TangentVector {
    /// Sub-Riemannian norm `sqrt(Σ u_i²)`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|u| u * u).sum::<f64>().sqrt()
    }

    /// Builds the minimal-norm representation of a coordinate vector `v` at `base`.
    pub fn from_components(m: &ModelSpace, base: &[f64], v: &[f64]) -> Result<TangentVector> {
        let frame = m.frame_matrix(base);
        let a = DMatrix::from_fn(m.dim(), m.frame_len(), |r, c| frame[c][r]);
        let target = DVector::from_column_slice(v);
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let u = &pinv * &target;
        let back = &a * &u;
        let miss = (back - &target).norm();
        if miss > 1e-9 * (1.0 + target.norm()) {
            return Err(Error::invalid(format!(
                "vector {v:?} is not horizontal at {base:?}"
            )));
        }
        Ok(TangentVector {
            base: base.to_vec(),
            components: v.to_vec(),
            coeffs: u.iter().copied().collect(),
        })
    }
}

impl ModelSpace {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpace {
            kind,
            density: None,
        }
    }

    pub fn euclid(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Self::new(ModelKind::Euclid1)),
            2 => Ok(Self::new(ModelKind::Euclid2)),
            3 => Ok(Self::new(ModelKind::Euclid3)),
            _ => Err(Error::invalid(format!("no built-in Euclidean model of dimension {n}"))),
        }
    }

    pub fn heisenberg() -> Self {
        Self::new(ModelKind::Heisenberg)
    }

    pub fn grushin() -> Self {
        Self::new(ModelKind::Grushin)
    }

    /// Replaces the Lebesgue density by a positive smooth density.
    pub fn with_density(mut self, density: Field) -> Self {
        self.density = Some(density);
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn has_lebesgue_measure(&self) -> bool {
        self.density.is_none()
    }

    pub fn density_value(&self, x: &[f64]) -> Result<f64> {
        match &self.density {
            None => Ok(1.0),
            Some(d) => d.value(x),
        }
    }

    /// Coordinate dimension n.
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Euclid1 => 1,
            ModelKind::Euclid2 | ModelKind::Grushin => 2,
            ModelKind::Euclid3 | ModelKind::Heisenberg => 3,
        }
    }

    /// Number of frame fields N.
    pub fn frame_len(&self) -> usize {
        match self.kind {
            ModelKind::Euclid1 => 1,
            ModelKind::Euclid2 | ModelKind::Grushin | ModelKind::Heisenberg => 2,
            ModelKind::Euclid3 => 3,
        }
    }

    /// Dilation weights of the coordinates.
    pub fn weights(&self) -> Vec<u32> {
        match self.kind {
            ModelKind::Euclid1 => vec![1],
            ModelKind::Euclid2 => vec![1, 1],
            ModelKind::Euclid3 => vec![1, 1, 1],
            ModelKind::Heisenberg => vec![1, 1, 2],
            ModelKind::Grushin => vec![1, 2],
        }
    }

    /// Homogeneous dimension Q = Σ w_i.
    pub fn homogeneous_dim(&self) -> u32 {
        self.weights().iter().sum()
    }

    /// Whether the model is a Carnot group with dilation-homogeneous frame.
    pub fn is_carnot(&self) -> bool {
        !matches!(self.kind, ModelKind::Grushin) && self.density.is_none()
    }

    /// Frame field values `X_i(x)` as coordinate vectors.
    pub fn frame_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.kind {
            ModelKind::Euclid1 => vec![vec![1.0]],
            ModelKind::Euclid2 => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ModelKind::Euclid3 => vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            ModelKind::Heisenberg => vec![
                vec![1.0, 0.0, -0.5 * x[1]],
                vec![0.0, 1.0, 0.5 * x[0]],
            ],
            ModelKind::Grushin => vec![vec![1.0, 0.0], vec![0.0, x[0]]],
        }
    }

    /// `Σ_i c_i X_i(x)` written into `out` (length `dim`).
    #[inline]
    pub fn frame_combination(&self, x: &[f64], c: &[f64], out: &mut [f64]) {
        match self.kind {
            ModelKind::Euclid1 => out[0] = c[0],
            ModelKind::Euclid2 => {
                out[0] = c[0];
                out[1] = c[1];
            }
            ModelKind::Euclid3 => {
                out[0] = c[0];
                out[1] = c[1];
                out[2] = c[2];
            }
            ModelKind::Heisenberg => {
                out[0] = c[0];
                out[1] = c[1];
                out[2] = 0.5 * (x[0] * c[1] - x[1] * c[0]);
            }
            ModelKind::Grushin => {
                out[0] = c[0];
                out[1] = x[0] * c[1];
            }
        }
    }

    /// Frame fields as component jets at `x` of the given order.
    pub fn frame_jets(&self, x: &[f64], order: usize) -> Result<Vec<Vec<Jet>>> {
        self.check_point(x)?;
        let z = Jet::coordinates(x, order)?;
        let c = |v: f64| Jet::constant(x, order, v);
        Ok(match self.kind {
            ModelKind::Euclid1 | ModelKind::Euclid2 | ModelKind::Euclid3 => {
                let n = self.dim();
                (0..n)
                    .map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
                    .collect::<Result<_>>()?
            }
            ModelKind::Heisenberg => vec![
                vec![c(1.0)?, c(0.0)?, z[1].scale(-0.5)],
                vec![c(0.0)?, c(1.0)?, z[0].scale(0.5)],
            ],
            ModelKind::Grushin => vec![vec![c(1.0)?, c(0.0)?], vec![c(0.0)?, z[0].clone()]],
        })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Jets `X_i f` for every frame field, each of order `order(f) - 1`.
    pub fn apply_frame(&self, f: &Jet) -> Result<Vec<Jet>> {
        let frame = self.frame_jets(f.center(), f.order())?;
        frame
            .iter()
            .map(|field| directional_derivative(field, f))
            .collect()
    }

    /// Jets of `div_ω X_i` (coordinate divergence plus `X_i log ρ`).
    pub fn divergence_jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let frame = self.frame_jets(x, order + 1)?;
        let mut out = Vec::with_capacity(frame.len());
        for field in &frame {
            let mut div = Jet::constant(x, order, 0.0)?;
            for (axis, comp) in field.iter().enumerate() {
                div = div.try_add(&comp.partial_jet(axis)?)?;
            }
            if let Some(density) = &self.density {
                let log_rho = density.jet(x, order + 1)?.ln()?;
                div = div.try_add(&directional_derivative(field, &log_rho)?)?;
            }
            out.push(div);
        }
        Ok(out)
    }

    /// Jet of `Δf = Σ X_i² f + (div X_i) X_i f`, two orders lower than `f`.
    pub fn sublaplacian_jet(&self, f: &Jet) -> Result<Jet> {
        if f.order() < 2 {
            return Err(Error::OrderTooHigh {
                requested: 2,
                max: f.order(),
            });
        }
        let x = f.center().to_vec();
        let first = self.apply_frame(f)?;
        let frame = self.frame_jets(&x, f.order())?;
        let mut acc = Jet::constant(&x, f.order() - 2, 0.0)?;
        for (field, xf) in frame.iter().zip(&first) {
            acc = acc.try_add(&directional_derivative(field, xf)?)?;
        }
        if !self.divergence_free() {
            let divs = self.divergence_jets(&x, f.order() - 2)?;
            for (d, xf) in divs.iter().zip(&first) {
                acc = acc.try_add(&d.try_mul(xf)?)?;
            }
        }
        Ok(acc)
    }

    /// Whether every `div_ω X_i` vanishes identically.
    pub fn divergence_free(&self) -> bool {
        // the built-in frames have zero coordinate divergence
        self.density.is_none()
    }

    /// Jet of `g(∇f, ∇h) = Σ X_i f · X_i h`.
    pub fn metric_pairing_jet(&self, f: &Jet, h: &Jet) -> Result<Jet> {
        let xf = self.apply_frame(f)?;
        let xh = self.apply_frame(h)?;
        let mut acc = Jet::constant(f.center(), f.order().min(h.order()) - 1, 0.0)?;
        for (a, b) in xf.iter().zip(&xh) {
            acc = acc.try_add(&a.try_mul(b)?)?;
        }
        Ok(acc)
    }

    /// Stratonovich drift `Σ (div_ω X_i) X_i(x)` needed so that the diffusion has
    /// generator Δ; zero for the built-in Lebesgue models.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        if self.divergence_free() {
            return Ok(out);
        }
        let divs = self.divergence_jets(x, 0)?;
        let frame = self.frame_matrix(x);
        for (d, field) in divs.iter().zip(&frame) {
            for (o, v) in out.iter_mut().zip(field) {
                *o += d.value() * v;
            }
        }
        Ok(out)
    }
}

/// Horizontal gradient `∇f = Σ X_i(f) X_i` at `x`.
pub fn horizontal_gradient(m: &ModelSpace, f: &Field, x: &[f64]) -> Result<TangentVector> {
    let jet = f.jet(x, 1)?;
    let coeffs: Vec<f64> = m.apply_frame(&jet)?.iter().map(Jet::value).collect();
    let mut components = vec![0.0; m.dim()];
    m.frame_combination(x, &coeffs, &mut components);
    Ok(TangentVector {
        base: x.to_vec(),
        components,
        coeffs,
    })
}

/// `Δ^k f(x)` for `k >= 1`.
pub fn sublaplacian(m: &ModelSpace, f: &Field, x: &[f64], k: usize) -> Result<f64> {
    Ok(sublaplacian_power_jet(m, f, x, k, 0)?.value())
}

/// Jet of `Δ^k f` of order `extra` at `x`.
pub fn sublaplacian_power_jet(
    m: &ModelSpace,
    f: &Field,
    x: &[f64],
    k: usize,
    extra: usize,
) -> Result<Jet> {
    if k == 0 {
        return Err(Error::invalid("sub-Laplacian power must be at least 1"));
    }
    let order = 2 * k + extra;
    if order > crate::jets::MAX_ORDER {
        return Err(Error::OrderTooHigh {
            requested: order,
            max: crate::jets::MAX_ORDER,
        });
    }
    let mut jet = f.jet(x, order)?;
    for _ in 0..k {
        jet = m.sublaplacian_jet(&jet)?;
    }
    Ok(jet)
}

/// Anisotropic dilation `δ_ε(z)`.
pub fn dilate(m: &ModelSpace, eps: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !m.is_carnot() {
        return Err(Error::unsupported(m.name(), "dilations (not a Carnot group)"));
    }
    if eps == 0.0 {
        return Err(Error::invalid("dilation factor must be nonzero"));
    }
    m.check_point(z)?;
    Ok(z.iter()
        .zip(m.weights())
        .map(|(zi, w)| eps.powi(w as i32) * zi)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::ExprField;
    use approx::assert_abs_diff_eq;

    fn coord(i: usize) -> Field {
        ExprField::new(format!("z{i}"), move |z: &[Jet]| Ok(z[i].clone())).shared()
    }

    #[test]
    fn gradient_examples() {
        let e2 = ModelSpace::euclid(2).unwrap();
        let g = horizontal_gradient(&e2, &coord(0), &[0.3, 0.2]).unwrap();
        assert_eq!(g.components, vec![1.0, 0.0]);
        assert_eq!(g.norm(), 1.0);

        let h = ModelSpace::heisenberg();
        let g = horizontal_gradient(&h, &coord(0), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.coeffs, vec![1.0, 0.0]);
        assert_eq!(g.components, vec![1.0, 0.0, 0.0]);

        let gr = ModelSpace::grushin();
        let g = horizontal_gradient(&gr, &coord(1), &[2.0, 0.5]).unwrap();
        assert_eq!(g.coeffs, vec![0.0, 2.0]);
        assert_eq!(g.norm(), 2.0);
    }

    #[test]
    fn sublaplacian_examples() {
        let e2 = ModelSpace::euclid(2).unwrap();
        let r2 = ExprField::new("r2", |z: &[Jet]| Ok(&(&z[0] * &z[0]) + &(&z[1] * &z[1]))).shared();
        assert_abs_diff_eq!(sublaplacian(&e2, &r2, &[0.4, -1.2], 1).unwrap(), 4.0, epsilon = 1e-13);

        let h = ModelSpace::heisenberg();
        assert_abs_diff_eq!(sublaplacian(&h, &coord(0), &[0.3, 0.7, -2.0], 1).unwrap(), 0.0);

        let delta = ExprField::new("1-r", |z: &[Jet]| {
            let r = (&(&z[0] * &z[0]) + &(&z[1] * &z[1])).sqrt()?;
            Ok((-&r).add_scalar(1.0))
        })
        .shared();
        assert_abs_diff_eq!(sublaplacian(&e2, &delta, &[0.5, 0.0], 1).unwrap(), -2.0, epsilon = 1e-13);
    }

    #[test]
    fn heisenberg_sublaplacian_of_quadratic() {
        // Δ(x² + y² + z²) = 4 + (x² + y²)/2 on H^1
        let h = ModelSpace::heisenberg();
        let f = ExprField::new("q", |z: &[Jet]| {
            Ok(&(&(&z[0] * &z[0]) + &(&z[1] * &z[1])) + &(&z[2] * &z[2]))
        })
        .shared();
        let p = [0.4, -0.3, 1.1];
        let v = sublaplacian(&h, &f, &p, 1).unwrap();
        assert_abs_diff_eq!(v, 4.0 + 0.5 * (0.16 + 0.09), epsilon = 1e-13);
    }

    #[test]
    fn dilation_examples() {
        let h = ModelSpace::heisenberg();
        assert_eq!(dilate(&h, 2.0, &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 4.0]);
        assert_eq!(dilate(&h, 1.0, &[0.3, 0.2, 0.1]).unwrap(), vec![0.3, 0.2, 0.1]);
        assert_eq!(dilate(&h, -1.0, &[1.0, 0.0, 0.0]).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(dilate(&h, -1.0, &[0.0, 0.0, 3.0]).unwrap(), vec![0.0, 0.0, 3.0]);
        assert!(matches!(
            dilate(&ModelSpace::grushin(), 2.0, &[1.0, 1.0]),
            Err(Error::Unsupported { .. })
        ));
        assert_eq!(h.homogeneous_dim(), 4);
    }

    #[test]
    fn weighted_density_adds_drift_term() {
        // ρ = e^{x} on R^1: Δf = f'' + f'
        let e1 = ModelSpace::euclid(1)
            .unwrap()
            .with_density(ExprField::new("exp", |z: &[Jet]| z[0].exp()).shared());
        let f = ExprField::new("x2", |z: &[Jet]| Ok(&z[0] * &z[0])).shared();
        let v = sublaplacian(&e1, &f, &[0.7], 1).unwrap();
        assert_abs_diff_eq!(v, 2.0 + 1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(e1.drift(&[0.7]).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minimal_norm_representation() {
        let h = ModelSpace::heisenberg();
        let base = [0.5, 1.0, 0.0];
        let v = [1.0, 2.0, 0.5 * (0.5 * 2.0 - 1.0 * 1.0)];
        let t = TangentVector::from_components(&h, &base, &v).unwrap();
        assert_abs_diff_eq!(t.coeffs[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.coeffs[1], 2.0, epsilon = 1e-10);
        assert!(TangentVector::from_components(&h, &base, &[0.0, 0.0, 1.0]).is_err());
    }
}
