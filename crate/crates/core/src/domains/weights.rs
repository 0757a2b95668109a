//! Smooth weights and cutoffs (χ, φ) with declared supports.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Field, Jet, ScalarField};

/// Region carrying a weight's support: an optional Cartesian box and an optional
/// radial shell `lo <= |z| <= hi`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub boxed: Option<Vec<(f64, f64)>>,
    pub radial: Option<(f64, f64)>,
}

impl Region {
    pub fn everywhere() -> Self {
        Region::default()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if let Some(b) = &self.boxed {
            if x.iter().zip(b).any(|(xi, (lo, hi))| xi < lo || xi > hi) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.radial {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < lo || r > hi {
                return false;
            }
        }
        true
    }

    pub fn is_bounded(&self) -> bool {
        self.boxed.is_some() || self.radial.is_some()
    }
}

/// One factor of a product weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    /// Equal to 1 on `[inner.0, inner.1]`, 0 outside `[outer.0, outer.1]`, C^∞ in between.
    Plateau {
        axis: usize,
        inner: (f64, f64),
        outer: (f64, f64),
    },
    /// Compactly supported C^∞ bump of value 1 at `center`, support `center ± radius`.
    Bump { axis: usize, center: f64, radius: f64 },
    /// Plateau in the radial variable `|z|`.
    RadialPlateau { inner: (f64, f64), outer: (f64, f64) },
    /// Polynomial `Σ c_k z_axis^k`.
    Polynomial { axis: usize, coeffs: Vec<f64> },
    /// `R - |z|`, the signed distance to a sphere of radius R.
    RadialDistance { radius: f64 },
}

/// Smooth transition: 0 for `u <= 0`, 1 for `u >= 1`.
fn smoothstep_jet(u: &Jet) -> Result<Jet> {
    let v = u.value();
    if v <= 0.0 {
        return Jet::constant(u.center(), u.order(), 0.0);
    }
    if v >= 1.0 {
        return Jet::constant(u.center(), u.order(), 1.0);
    }
    let a = u.recip()?.scale(-1.0).exp()?;
    let b = (-u).add_scalar(1.0).recip()?.scale(-1.0).exp()?;
    a.try_div(&a.try_add(&b)?)
}

fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

fn plateau_jet(s: &Jet, inner: (f64, f64), outer: (f64, f64)) -> Result<Jet> {
    let v = s.value();
    if v <= outer.0 || v >= outer.1 {
        return Jet::constant(s.center(), s.order(), 0.0);
    }
    let mut out = Jet::constant(s.center(), s.order(), 1.0)?;
    if v < inner.0 {
        let u = s.add_scalar(-outer.0).scale(1.0 / (inner.0 - outer.0));
        out = smoothstep_jet(&u)?;
    }
    if v > inner.1 {
        let u = (-s).add_scalar(outer.1).scale(1.0 / (outer.1 - inner.1));
        out = out.try_mul(&smoothstep_jet(&u)?)?;
    }
    Ok(out)
}

fn plateau(s: f64, inner: (f64, f64), outer: (f64, f64)) -> f64 {
    if s <= outer.0 || s >= outer.1 {
        return 0.0;
    }
    let mut out = 1.0;
    if s < inner.0 {
        out = smoothstep((s - outer.0) / (inner.0 - outer.0));
    }
    if s > inner.1 {
        out *= smoothstep((outer.1 - s) / (outer.1 - inner.1));
    }
    out
}

impl Factor {
    fn check(&self) -> Result<()> {
        let ok = match self {
            Factor::Plateau { inner, outer, .. } | Factor::RadialPlateau { inner, outer } => {
                outer.0 < inner.0 && inner.0 <= inner.1 && inner.1 < outer.1
            }
            Factor::Bump { radius, .. } => *radius > 0.0,
            Factor::Polynomial { coeffs, .. } => !coeffs.is_empty(),
            Factor::RadialDistance { radius } => *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed weight factor {self:?}")))
        }
    }

    fn jet(&self, z: &[Jet]) -> Result<Jet> {
        match self {
            Factor::Plateau { axis, inner, outer } => plateau_jet(&z[*axis], *inner, *outer),
            Factor::Bump {
                axis,
                center,
                radius,
            } => plateau_jet(
                &z[*axis],
                (*center, *center),
                (center - radius, center + radius),
            ),
            Factor::RadialPlateau { inner, outer } => {
                let r2 = radius_squared(z)?;
                if r2.value() <= outer.0.max(0.0).powi(2) || r2.value() >= outer.1 * outer.1 {
                    return Jet::constant(z[0].center(), z[0].order(), 0.0);
                }
                plateau_jet(&r2.sqrt()?, *inner, *outer)
            }
            Factor::Polynomial { axis, coeffs } => {
                let x = &z[*axis];
                let mut acc = Jet::constant(x.center(), x.order(), 0.0)?;
                for c in coeffs.iter().rev() {
                    acc = acc.try_mul(x)?.add_scalar(*c);
                }
                Ok(acc)
            }
            Factor::RadialDistance { radius } => {
                let r = radius_squared(z)?.sqrt()?;
                Ok((-&r).add_scalar(*radius))
            }
        }
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match self {
            Factor::Plateau { axis, inner, outer } => plateau(x[*axis], *inner, *outer),
            Factor::Bump {
                axis,
                center,
                radius,
            } => plateau(
                x[*axis],
                (*center, *center),
                (center - radius, center + radius),
            ),
            Factor::RadialPlateau { inner, outer } => plateau(norm(x), *inner, *outer),
            Factor::Polynomial { axis, coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x[*axis] + c)
            }
            Factor::RadialDistance { radius } => radius - norm(x),
        }
    }

    /// The single coordinate this factor depends on, if any.
    pub(crate) fn axis(&self) -> Option<usize> {
        match self {
            Factor::Plateau { axis, .. } | Factor::Bump { axis, .. } | Factor::Polynomial { axis, .. } => Some(*axis),
            Factor::RadialPlateau { .. } | Factor::RadialDistance { .. } => None,
        }
    }

    /// Coordinates along `axis` where this factor is not analytic.
    pub(crate) fn breakpoints(&self, axis: usize) -> Vec<f64> {
        match self {
            Factor::Plateau { axis: a, inner, outer } if *a == axis => vec![outer.0, inner.0, inner.1, outer.1],
            Factor::Bump { axis: a, center, radius } if *a == axis => vec![center - radius, *center, center + radius],
            _ => Vec::new(),
        }
    }

    /// Support implied by this factor alone.
    fn support(&self, dim: usize) -> Region {
        let mut boxed = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
        match self {
            Factor::Plateau { axis, outer, .. } => {
                boxed[*axis] = *outer;
                Region {
                    boxed: Some(boxed),
                    radial: None,
                }
            }
            Factor::Bump {
                axis,
                center,
                radius,
            } => {
                boxed[*axis] = (center - radius, center + radius);
                Region {
                    boxed: Some(boxed),
                    radial: None,
                }
            }
            Factor::RadialPlateau { outer, .. } => Region {
                boxed: None,
                radial: Some((outer.0.max(0.0), outer.1)),
            },
            Factor::Polynomial { .. } | Factor::RadialDistance { .. } => Region::everywhere(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn radius_squared(z: &[Jet]) -> Result<Jet> {
    let mut acc = Jet::constant(z[0].center(), z[0].order(), 0.0)?;
    for zi in z {
        acc = acc.try_add(&zi.try_mul(zi)?)?;
    }
    Ok(acc)
}

fn intersect(a: Region, b: Region) -> Region {
    let boxed = match (a.boxed, b.boxed) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(
            x.iter()
                .zip(&y)
                .map(|(p, q)| (p.0.max(q.0), p.1.min(q.1)))
                .collect(),
        ),
    };
    let radial = match (a.radial, b.radial) {
        (None, x) | (x, None) => x,
        (Some(p), Some(q)) => Some((p.0.max(q.0), p.1.min(q.1))),
    };
    Region { boxed, radial }
}

/// Product weight `χ = Π factors` in `dim` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductWeight {
    pub name: String,
    pub dim: usize,
    pub factors: Vec<Factor>,
}

impl ScalarField for ProductWeight {
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let z = Jet::coordinates(x, order)?;
        let mut acc = Jet::constant(x, order, 1.0)?;
        for f in &self.factors {
            let fj = f.jet(&z)?;
            if fj.coeffs().iter().all(|&c| c == 0.0) {
                return Jet::constant(x, order, 0.0);
            }
            acc = acc.try_mul(&fj)?;
        }
        Ok(acc)
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = 1.0;
        for f in &self.factors {
            v *= f.value(x);
            if v == 0.0 {
                break;
            }
        }
        Ok(v)
    }
}

/// A weight χ together with its declared support and a bound on `|χ|`.
#[derive(Clone)]
pub struct WeightSpec {
    field: Field,
    support: Region,
    bound: f64,
    unit: bool,
    description: Option<ProductWeight>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("name", &self.field.name())
            .field("support", &self.support)
            .field("bound", &self.bound)
            .finish()
    }
}

impl WeightSpec {
    /// χ ≡ 1.
    pub fn unit(dim: usize) -> Self {
        let pw = ProductWeight {
            name: "1".into(),
            dim,
            factors: Vec::new(),
        };
        WeightSpec {
            field: Arc::new(pw.clone()),
            support: Region::everywhere(),
            bound: 1.0,
            unit: true,
            description: Some(pw),
        }
    }

    /// Product weight; the support is derived from the factors and the bound
    /// `max |χ|` is estimated on a sampling lattice of the support (with a safety margin).
    pub fn product(name: impl Into<String>, dim: usize, factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            f.check()?;
            if let Factor::Plateau { axis, .. }
            | Factor::Bump { axis, .. }
            | Factor::Polynomial { axis, .. } = f
            {
                if *axis >= dim {
                    return Err(Error::invalid(format!("factor axis {axis} >= dimension {dim}")));
                }
            }
        }
        let support = factors
            .iter()
            .fold(Region::everywhere(), |acc, f| intersect(acc, f.support(dim)));
        let pw = ProductWeight {
            name: name.into(),
            dim,
            factors,
        };
        let bound = product_bound(&pw, &support);
        Ok(WeightSpec {
            field: Arc::new(pw.clone()),
            support,
            bound,
            unit: false,
            description: Some(pw),
        })
    }

    /// Arbitrary field with an explicitly declared support and bound.
    pub fn custom(field: Field, support: Region, bound: f64) -> Self {
        WeightSpec {
            field,
            support,
            bound,
            unit: false,
            description: None,
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn name(&self) -> &str {
        self.field.name()
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn product_description(&self) -> Option<&ProductWeight> {
        self.description.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.field.value(x)
    }

    /// Verifies `|χ| < 1e-12` at sample points just outside the declared support box.
    pub fn verify_support(&self, samples: usize) -> Result<()> {
        let Some(b) = &self.support.boxed else {
            return Ok(());
        };
        let dim = b.len();
        for k in 0..samples {
            for axis in 0..dim {
                for side in [0, 1] {
                    let mut x: Vec<f64> = b
                        .iter()
                        .enumerate()
                        .map(|(i, (lo, hi))| {
                            let (lo, hi) = (lo.max(-10.0), hi.min(10.0));
                            let frac = ((k * (i + 3) + 1) as f64 * 0.618_033_988_75).fract();
                            lo + frac * (hi - lo)
                        })
                        .collect();
                    let (lo, hi) = b[axis];
                    x[axis] = if side == 0 { lo - 1e-9 } else { hi + 1e-9 };
                    if !x[axis].is_finite() {
                        continue;
                    }
                    let v = self.value(&x)?;
                    if v.abs() >= 1e-12 {
                        return Err(Error::Support(format!(
                            "weight '{}' is {v:e} at {x:?}, outside its declared support",
                            self.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn product_bound(pw: &ProductWeight, support: &Region) -> f64 {
    // Plateau/bump factors are bounded by 1; polynomial and distance factors are
    // bounded on the support box (or a generous default box) by sampling.
    let needs_sampling = pw
        .factors
        .iter()
        .any(|f| matches!(f, Factor::Polynomial { .. } | Factor::RadialDistance { .. }));
    if !needs_sampling {
        return 1.0;
    }
    let b: Vec<(f64, f64)> = match (&support.boxed, support.radial) {
        (Some(b), _) => b
            .iter()
            .map(|&(lo, hi)| (lo.max(-4.0), hi.min(4.0)))
            .collect(),
        (None, Some((_, r))) => vec![(-r, r); pw.dim],
        (None, None) => vec![(-4.0, 4.0); pw.dim],
    };
    let per_axis = match pw.dim {
        1 => 2001,
        2 => 201,
        _ => 41,
    };
    let mut idx = vec![0usize; pw.dim];
    let mut best: f64 = 0.0;
    let mut x = vec![0.0; pw.dim];
    loop {
        for i in 0..pw.dim {
            let (lo, hi) = b[i];
            x[i] = lo + (hi - lo) * idx[i] as f64 / (per_axis - 1) as f64;
        }
        if let Ok(v) = pw.value(&x) {
            best = best.max(v.abs());
        }
        let mut i = 0;
        while i < pw.dim {
            idx[i] += 1;
            if idx[i] < per_axis {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == pw.dim {
            break;
        }
    }
    best * 1.05 + 1e-12
}
