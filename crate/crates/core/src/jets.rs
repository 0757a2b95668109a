//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores every partial derivative `∂^α f(center)` with `|α| <= order`
//! (not the Taylor-normalized `∂^α f / α!`), densely, in a graded order shared by
//! all jets of the same dimension. Arithmetic truncates to the smaller order of the
//! operands, so any polynomial expression in coordinate jets reproduces exact
//! derivatives up to the jet order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Highest supported jet order.
pub const MAX_ORDER: usize = 6;
/// Highest supported coordinate dimension.
pub const MAX_DIM: usize = 4;

type MultiIndex = [u8; MAX_DIM];

/// Multi-index bookkeeping for one dimension, sized for [`MAX_ORDER`].
struct IndexTable {
    alphas: Vec<MultiIndex>,
    /// `counts[k]` = number of multi-indices with degree `<= k`.
    counts: Vec<usize>,
    /// `raise[i][j]` = index of `alphas[i] + e_j` (if its degree is still `<= MAX_ORDER`).
    raise: Vec<[Option<usize>; MAX_DIM]>,
    /// Leibniz expansion of `∂^γ(fg)`: `(index α, index γ-α, Π C(γ_i, α_i))`.
    leibniz: Vec<Vec<(usize, usize, f64)>>,
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c
}

impl IndexTable {
    fn build(dim: usize) -> Self {
        let mut alphas: Vec<MultiIndex> = Vec::new();
        let mut counts = Vec::with_capacity(MAX_ORDER + 1);
        for degree in 0..=MAX_ORDER {
            let mut current = [0u8; MAX_DIM];
            enumerate_degree(dim, 0, degree as u8, &mut current, &mut alphas);
            counts.push(alphas.len());
            if dim == 0 {
                // only the empty multi-index exists
                for c in counts.iter_mut() {
                    *c = 1;
                }
            }
        }
        if dim == 0 {
            alphas.truncate(1);
            counts = vec![1; MAX_ORDER + 1];
        }
        let find = |a: &MultiIndex| alphas.iter().position(|b| b == a);
        let raise = alphas
            .iter()
            .map(|a| {
                let mut out = [None; MAX_DIM];
                for (j, slot) in out.iter_mut().enumerate().take(dim) {
                    let mut b = *a;
                    b[j] += 1;
                    *slot = find(&b);
                }
                out
            })
            .collect();
        let leibniz = alphas
            .iter()
            .map(|gamma| {
                let mut terms = Vec::new();
                for (ia, alpha) in alphas.iter().enumerate() {
                    if (0..dim).all(|i| alpha[i] <= gamma[i]) {
                        let mut rest = *gamma;
                        let mut weight = 1.0;
                        for i in 0..dim {
                            rest[i] -= alpha[i];
                            weight *= binomial(gamma[i], alpha[i]);
                        }
                        let ib = find(&rest).expect("complement multi-index exists");
                        terms.push((ia, ib, weight));
                    }
                }
                terms
            })
            .collect();
        IndexTable {
            alphas,
            counts,
            raise,
            leibniz,
        }
    }

    fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        let mut key = [0u8; MAX_DIM];
        for (k, &a) in key.iter_mut().zip(alpha) {
            *k = u8::try_from(a).ok()?;
        }
        self.alphas.iter().position(|b| *b == key)
    }
}

fn enumerate_degree(
    dim: usize,
    axis: usize,
    remaining: u8,
    current: &mut MultiIndex,
    out: &mut Vec<MultiIndex>,
) {
    if dim == 0 {
        if remaining == 0 {
            out.push(*current);
        }
        return;
    }
    if axis == dim - 1 {
        current[axis] = remaining;
        out.push(*current);
        current[axis] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[axis] = k;
        enumerate_degree(dim, axis + 1, remaining - k, current, out);
    }
    current[axis] = 0;
}

fn table(dim: usize) -> &'static IndexTable {
    static TABLES: [OnceLock<IndexTable>; MAX_DIM + 1] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    TABLES[dim].get_or_init(|| IndexTable::build(dim))
}

/// Number of stored coefficients of a jet of `order` in `dim` coordinates.
pub fn coefficient_count(dim: usize, order: usize) -> usize {
    table(dim).counts[order]
}

/// Truncated Taylor jet of a scalar field at a point.
#[derive(Clone, PartialEq)]
pub struct Jet {
    center: Vec<f64>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("center", &self.center)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn check_shape(center: &[f64], order: usize) -> Result<()> {
    if center.len() > MAX_DIM {
        return Err(Error::DimensionMismatch {
            expected: MAX_DIM,
            got: center.len(),
        });
    }
    if order > MAX_ORDER {
        return Err(Error::OrderTooHigh {
            requested: order,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

impl Jet {
    /// Constant field `value`.
    pub fn constant(center: &[f64], order: usize, value: f64) -> Result<Jet> {
        check_shape(center, order)?;
        let mut coeffs = vec![0.0; coefficient_count(center.len(), order)];
        coeffs[0] = value;
        Ok(Jet {
            center: center.to_vec(),
            order,
            coeffs,
        })
    }

    /// Coordinate function `z_axis`.
    pub fn variable(center: &[f64], order: usize, axis: usize) -> Result<Jet> {
        if axis >= center.len() {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for dimension {}",
                center.len()
            )));
        }
        let mut jet = Jet::constant(center, order, center[axis])?;
        if order >= 1 {
            let mut alpha = vec![0usize; center.len()];
            alpha[axis] = 1;
            let i = table(center.len()).index_of(&alpha).expect("first-order index");
            jet.coeffs[i] = 1.0;
        }
        Ok(jet)
    }

    /// All coordinate functions at `center`.
    pub fn coordinates(center: &[f64], order: usize) -> Result<Vec<Jet>> {
        (0..center.len())
            .map(|i| Jet::variable(center, order, i))
            .collect()
    }

    /// Builds a jet from a derivative callback `α ↦ ∂^α f(center)`.
    pub fn from_fn(center: &[f64], order: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Jet> {
        check_shape(center, order)?;
        let dim = center.len();
        let t = table(dim);
        let coeffs = t.alphas[..t.counts[order]]
            .iter()
            .map(|a| {
                let alpha: Vec<usize> = a[..dim].iter().map(|&x| x as usize).collect();
                f(&alpha)
            })
            .collect();
        Ok(Jet {
            center: center.to_vec(),
            order,
            coeffs,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw coefficient slice in the crate's graded multi-index order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Partial derivative `∂^α f(center)`; zero when `|α|` exceeds the order.
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        if alpha.len() != self.dim() || alpha.iter().sum::<usize>() > self.order {
            return 0.0;
        }
        table(self.dim())
            .index_of(alpha)
            .map_or(0.0, |i| self.coeffs[i])
    }

    /// First partial `∂_axis f(center)`.
    pub fn partial(&self, axis: usize) -> f64 {
        let mut alpha = vec![0; self.dim()];
        alpha[axis] = 1;
        self.derivative(&alpha)
    }

    /// Gradient `(∂_1 f, ..., ∂_n f)` at the center.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.partial(i)).collect()
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let n = coefficient_count(self.dim(), order);
        Jet {
            center: self.center.clone(),
            order,
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    fn compatible(&self, other: &Jet) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if self.center != other.center {
            return Err(Error::CenterMismatch(
                self.center.clone(),
                other.center.clone(),
            ));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.compatible(other)?;
        let order = self.order.min(other.order);
        let n = coefficient_count(self.dim(), order);
        let coeffs = (0..n).map(|i| self.coeffs[i] + other.coeffs[i]).collect();
        Ok(Jet {
            center: self.center.clone(),
            order,
            coeffs,
        })
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.try_add(&other.scale(-1.0))
    }

    /// Product by the truncated Leibniz rule.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.compatible(other)?;
        let order = self.order.min(other.order);
        let t = table(self.dim());
        let n = t.counts[order];
        let coeffs = t.leibniz[..n]
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|&(ia, ib, w)| w * self.coeffs[ia] * other.coeffs[ib])
                    .sum()
            })
            .collect();
        Ok(Jet {
            center: self.center.clone(),
            order,
            coeffs,
        })
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            center: self.center.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Jet of `∂_axis f`, one order lower.
    pub fn partial_jet(&self, axis: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::ZeroOrder);
        }
        if axis >= self.dim() {
            return Err(Error::invalid(format!("axis {axis} out of range")));
        }
        let t = table(self.dim());
        let n = t.counts[self.order - 1];
        let coeffs = (0..n)
            .map(|i| t.raise[i][axis].map_or(0.0, |j| self.coeffs[j]))
            .collect();
        Ok(Jet {
            center: self.center.clone(),
            order: self.order - 1,
            coeffs,
        })
    }

    /// Composition `f ∘ self` with a smooth univariate function.
    pub fn compose(&self, f: Univariate) -> Result<Jet> {
        let a0 = self.value();
        let derivs = f.derivatives(a0, self.order)?;
        // h = self - a0 has zero value, so h^k only feeds degrees >= k
        let h = self.add_scalar(-a0);
        let mut result = Jet::constant(&self.center, self.order, derivs[0])?;
        let mut power = Jet::constant(&self.center, self.order, 1.0)?;
        let mut factorial = 1.0;
        for (k, dk) in derivs.iter().enumerate().skip(1) {
            power = power.try_mul(&h)?;
            factorial *= k as f64;
            result = result.try_add(&power.scale(dk / factorial))?;
        }
        Ok(result)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.compose(Univariate::Sqrt)
    }

    pub fn recip(&self) -> Result<Jet> {
        self.compose(Univariate::Reciprocal)
    }

    pub fn exp(&self) -> Result<Jet> {
        self.compose(Univariate::Exp)
    }

    pub fn ln(&self) -> Result<Jet> {
        self.compose(Univariate::Ln)
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.try_mul(&other.recip()?)
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        self.compose(Univariate::Powi(n))
    }
}

/// Applies the vector field with component jets `field` to `f`: `Σ_j X^j ∂_j f`.
///
/// The result has order `order(f) - 1` (or lower if the components are shorter).
pub fn directional_derivative(field: &[Jet], f: &Jet) -> Result<Jet> {
    if f.order() == 0 {
        return Err(Error::ZeroOrder);
    }
    if field.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: field.len(),
        });
    }
    let mut acc = Jet::constant(f.center(), f.order() - 1, 0.0)?;
    for (axis, component) in field.iter().enumerate() {
        let term = component.try_mul(&f.partial_jet(axis)?)?;
        acc = acc.try_add(&term)?;
    }
    Ok(acc)
}

/// Smooth univariate functions available for jet composition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Univariate {
    Sqrt,
    Reciprocal,
    Exp,
    Ln,
    Erf,
    Sin,
    Cos,
    Powf(f64),
    Powi(i32),
}

impl Univariate {
    /// `[f(x), f'(x), ..., f^(n)(x)]`.
    pub fn derivatives(self, x: f64, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n + 1);
        match self {
            Univariate::Sqrt => {
                if x <= 0.0 {
                    return Err(Error::JetDomain {
                        function: "sqrt",
                        value: x,
                    });
                }
                return Univariate::Powf(0.5).derivatives(x, n);
            }
            Univariate::Reciprocal => {
                if x == 0.0 {
                    return Err(Error::JetDomain {
                        function: "reciprocal",
                        value: x,
                    });
                }
                return Univariate::Powi(-1).derivatives(x, n);
            }
            Univariate::Ln => {
                if x <= 0.0 {
                    return Err(Error::JetDomain {
                        function: "ln",
                        value: x,
                    });
                }
                out.push(x.ln());
                // d^k/dx^k ln x = (-1)^(k-1) (k-1)! x^-k
                let mut fact = 1.0;
                for k in 1..=n {
                    if k > 1 {
                        fact *= (k - 1) as f64;
                    }
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    out.push(sign * fact * x.powi(-(k as i32)));
                }
            }
            Univariate::Exp => {
                out.resize(n + 1, x.exp());
            }
            Univariate::Sin | Univariate::Cos => {
                let (s, c) = x.sin_cos();
                let cycle = [s, c, -s, -c];
                let shift = if matches!(self, Univariate::Sin) { 0 } else { 1 };
                for k in 0..=n {
                    out.push(cycle[(k + shift) % 4]);
                }
            }
            Univariate::Erf => {
                out.push(crate::special::erf(x));
                // erf^(k+1)(x) = (2/√π) (-1)^k H_k(x) e^{-x²}, physicists' Hermite H_k
                let g = 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp();
                let (mut h_prev, mut h) = (0.0, 1.0);
                for k in 0..n {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    out.push(sign * g * h);
                    let next = 2.0 * x * h - 2.0 * k as f64 * h_prev;
                    h_prev = h;
                    h = next;
                }
            }
            Univariate::Powf(p) => {
                if x <= 0.0 {
                    return Err(Error::JetDomain {
                        function: "powf",
                        value: x,
                    });
                }
                let mut c = 1.0;
                for k in 0..=n {
                    out.push(c * x.powf(p - k as f64));
                    c *= p - k as f64;
                }
            }
            Univariate::Powi(p) => {
                if p < 0 && x == 0.0 {
                    return Err(Error::JetDomain {
                        function: "powi",
                        value: x,
                    });
                }
                let mut c = 1.0;
                for k in 0..=n {
                    let e = p - k as i32;
                    out.push(if c == 0.0 { 0.0 } else { c * x.powi(e) });
                    c *= f64::from(e);
                }
            }
        }
        Ok(out)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet addition on incompatible jets")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet subtraction on incompatible jets")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet product on incompatible jets")
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Scalar field that can be expanded into a jet at any point.
pub trait ScalarField: Send + Sync {
    /// Jet centered at `x` of the requested order.
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet>;

    fn name(&self) -> &str;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 0)?.value())
    }
}

pub type Field = Arc<dyn ScalarField>;

type JetExpr = dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync;

/// Scalar field given as an expression in the coordinate jets.
#[derive(Clone)]
pub struct ExprField {
    name: String,
    expr: Arc<JetExpr>,
}

impl ExprField {
    pub fn new(
        name: impl Into<String>,
        expr: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    ) -> Self {
        ExprField {
            name: name.into(),
            expr: Arc::new(expr),
        }
    }

    pub fn shared(self) -> Field {
        Arc::new(self)
    }
}

impl ScalarField for ExprField {
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        let z = Jet::coordinates(x, order)?;
        let out = (self.expr)(&z)?;
        Ok(out.truncate(order))
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Constant scalar field.
pub fn constant_field(value: f64) -> Field {
    ExprField::new(format!("const({value})"), move |z: &[Jet]| {
        let center: Vec<f64> = z.first().map_or_else(Vec::new, |j| j.center().to_vec());
        let order = z.first().map_or(MAX_ORDER, Jet::order);
        Jet::constant(&center, order, value)
    })
    .shared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bilinear_monomial() {
        let c = [0.3, -0.7];
        let a = Jet::variable(&c, 2, 0).unwrap();
        let b = Jet::variable(&c, 2, 1).unwrap();
        let p = &a * &b;
        assert_eq!(p.derivative(&[1, 1]), 1.0);
        assert_eq!(p.derivative(&[2, 0]), 0.0);
        assert_eq!(p.derivative(&[0, 2]), 0.0);
        let zero = Jet::constant(&c, 2, 0.0).unwrap();
        assert_eq!(&a + &zero, a);
    }

    #[test]
    fn fifth_power_by_product() {
        let c = [1.0];
        let z = Jet::variable(&c, 4, 0).unwrap();
        let sq = &z * &z;
        let cube = &sq * &z;
        let p = &sq * &cube;
        // z^5 at 1: 1, 5, 20
        assert_abs_diff_eq!(p.value(), 1.0);
        assert_abs_diff_eq!(p.derivative(&[1]), 5.0);
        assert_abs_diff_eq!(p.derivative(&[2]), 20.0);
        assert_abs_diff_eq!(p.derivative(&[3]), 60.0);
        assert_abs_diff_eq!(p.derivative(&[4]), 120.0);
    }

    #[test]
    fn mismatched_jets_error() {
        let a = Jet::variable(&[0.0, 0.0], 2, 0).unwrap();
        let b = Jet::variable(&[1.0, 0.0], 2, 0).unwrap();
        assert!(matches!(a.try_mul(&b), Err(Error::CenterMismatch(..))));
        let c = Jet::variable(&[0.0], 2, 0).unwrap();
        assert!(matches!(
            a.try_add(&c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sqrt_of_radius_squared() {
        let c = [1.0, 0.0];
        let z = Jet::coordinates(&c, 2).unwrap();
        let r2 = &(&z[0] * &z[0]) + &(&z[1] * &z[1]);
        let r = r2.sqrt().unwrap();
        assert_abs_diff_eq!(r.value(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.derivative(&[1, 0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.derivative(&[0, 1]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.derivative(&[0, 2]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.derivative(&[2, 0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exp_of_zero_constant() {
        let j = Jet::constant(&[], 0, 0.0).unwrap().exp().unwrap();
        assert_eq!(j.value(), 1.0);
    }

    #[test]
    fn reciprocal_derivatives() {
        let z = Jet::variable(&[2.0], 3, 0).unwrap();
        let r = z.recip().unwrap();
        assert_abs_diff_eq!(r.value(), 0.5);
        assert_abs_diff_eq!(r.derivative(&[1]), -0.25);
        assert_abs_diff_eq!(r.derivative(&[2]), 0.25);
        assert_abs_diff_eq!(r.derivative(&[3]), -0.375);
    }

    #[test]
    fn composition_domain_errors() {
        let neg = Jet::constant(&[0.0], 2, -1.0).unwrap();
        assert!(matches!(neg.sqrt(), Err(Error::JetDomain { .. })));
        let zero = Jet::constant(&[0.0], 2, 0.0).unwrap();
        assert!(matches!(zero.recip(), Err(Error::JetDomain { .. })));
    }

    #[test]
    fn erf_and_trig_derivatives_match_finite_differences() {
        let x0 = 0.37;
        for f in [Univariate::Erf, Univariate::Sin, Univariate::Cos, Univariate::Ln] {
            let d = f.derivatives(x0, 3).unwrap();
            let h = 1e-4;
            let v = |x: f64| f.derivatives(x, 0).unwrap()[0];
            let fd1 = (v(x0 + h) - v(x0 - h)) / (2.0 * h);
            let fd2 = (v(x0 + h) - 2.0 * v(x0) + v(x0 - h)) / (h * h);
            assert_abs_diff_eq!(d[1], fd1, epsilon = 1e-7);
            assert_abs_diff_eq!(d[2], fd2, epsilon = 1e-5);
        }
    }

    #[test]
    fn heisenberg_field_on_z() {
        // X = ∂_x - (y/2) ∂_z applied to f = z at (0, 1, 0)
        let c = [0.0, 1.0, 0.0];
        let z = Jet::coordinates(&c, 2).unwrap();
        let comps = [
            Jet::constant(&c, 2, 1.0).unwrap(),
            Jet::constant(&c, 2, 0.0).unwrap(),
            z[1].scale(-0.5),
        ];
        let out = directional_derivative(&comps, &z[2]).unwrap();
        assert_abs_diff_eq!(out.value(), -0.5);
        assert_eq!(out.order(), 1);
    }

    #[test]
    fn grushin_field_on_y() {
        let c = [3.0, 0.4];
        let z = Jet::coordinates(&c, 1).unwrap();
        let comps = [Jet::constant(&c, 1, 0.0).unwrap(), z[0].clone()];
        let out = directional_derivative(&comps, &z[1]).unwrap();
        assert_abs_diff_eq!(out.value(), 3.0);
        let flat = Jet::constant(&c, 0, 1.0).unwrap();
        assert!(matches!(
            directional_derivative(&comps, &flat),
            Err(Error::ZeroOrder)
        ));
    }

    #[test]
    fn unit_field_on_coordinate() {
        let c = [0.2, 0.1];
        let z = Jet::coordinates(&c, 1).unwrap();
        let comps = [
            Jet::constant(&c, 1, 1.0).unwrap(),
            Jet::constant(&c, 1, 0.0).unwrap(),
        ];
        let out = directional_derivative(&comps, &z[0]).unwrap();
        assert_eq!(out.value(), 1.0);
        assert_eq!(out.order(), 0);
    }

    /// Exact partial derivative of a monomial `Π z_i^{p_i}` at `c`.
    fn monomial_derivative(powers: &[usize], alpha: &[usize], c: &[f64]) -> f64 {
        powers
            .iter()
            .zip(alpha)
            .zip(c)
            .map(|((&p, &a), &x)| {
                if a > p {
                    return 0.0;
                }
                let falling: f64 = (0..a).map(|k| (p - k) as f64).product();
                falling * x.powi((p - a) as i32)
            })
            .product()
    }

    fn monomial_jet(powers: &[usize], c: &[f64], order: usize) -> Jet {
        let z = Jet::coordinates(c, order).unwrap();
        let mut acc = Jet::constant(c, order, 1.0).unwrap();
        for (zi, &p) in z.iter().zip(powers) {
            for _ in 0..p {
                acc = &acc * zi;
            }
        }
        acc
    }

    fn random_poly(coeffs: &[f64], c: &[f64], order: usize) -> Jet {
        // fixed family of low-degree monomials in 3 variables
        let monos: [[usize; 3]; 6] = [
            [0, 0, 0],
            [1, 0, 0],
            [0, 1, 1],
            [2, 0, 1],
            [1, 2, 0],
            [0, 0, 3],
        ];
        let mut acc = Jet::constant(c, order, 0.0).unwrap();
        for (m, &k) in monos.iter().zip(coeffs) {
            acc = &acc + &monomial_jet(m, c, order).scale(k);
        }
        acc
    }

    proptest! {
        #[test]
        fn monomial_jets_are_exact(
            p0 in 0usize..3, p1 in 0usize..3, p2 in 0usize..2,
            x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5,
        ) {
            let powers = [p0, p1, p2];
            let c = [x, y, z];
            let jet = monomial_jet(&powers, &c, 4);
            for a0 in 0..=4usize {
                for a1 in 0..=(4 - a0) {
                    for a2 in 0..=(4 - a0 - a1) {
                        let alpha = [a0, a1, a2];
                        let expect = monomial_derivative(&powers, &alpha, &c);
                        prop_assert!((jet.derivative(&alpha) - expect).abs() < 1e-10);
                    }
                }
            }
        }

        #[test]
        fn product_rule_for_fields(
            f in proptest::collection::vec(-2.0f64..2.0, 6),
            g in proptest::collection::vec(-2.0f64..2.0, 6),
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
        ) {
            let c = [x, y, z];
            let order = 4;
            let fj = random_poly(&f, &c, order);
            let gj = random_poly(&g, &c, order);
            let coords = Jet::coordinates(&c, order).unwrap();
            let field = [
                Jet::constant(&c, order, 1.0).unwrap(),
                Jet::constant(&c, order, 0.0).unwrap(),
                coords[1].scale(-0.5),
            ];
            let lhs = directional_derivative(&field, &(&fj * &gj)).unwrap();
            let rhs = &(&directional_derivative(&field, &fj).unwrap() * &gj)
                + &(&fj * &directional_derivative(&field, &gj).unwrap());
            for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn sqrt_of_square_roundtrip(
            f in proptest::collection::vec(-1.0f64..1.0, 6),
            x in -0.5f64..0.5, y in -0.5f64..0.5, z in -0.5f64..0.5,
        ) {
            let c = [x, y, z];
            let a = random_poly(&f, &c, 4).add_scalar(3.0);
            let back = (&a * &a).sqrt().unwrap();
            for (u, v) in a.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((u - v).abs() < 1e-11 * (1.0 + u.abs()));
            }
        }
    }
}
