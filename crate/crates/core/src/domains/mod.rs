//! Domains: signed distance with jets, boundary parametrization and perimeter
//! quadrature, characteristic-point detection, and predicted expansion coefficients.

mod coefficients;
pub mod weights;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{ExprField, Field, Jet, Univariate};
use crate::models::{ModelKind, ModelSpace};
use crate::special::gauss_legendre;

pub use coefficients::{
    coeff_a, euclidean_curvature_coefficient, flow_along_distance_gradient, mean_value_residual,
    n_jet, operator_n, predict_coefficients, PredictedCoefficients,
};
pub use weights::{Factor, ProductWeight, Region, WeightSpec};

/// Built-in domain shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainKind {
    /// `(a, b) ⊂ R`.
    Interval { a: f64, b: f64 },
    /// Disc of radius `radius` centered at the origin of R².
    Disc { radius: f64 },
    /// Ball of radius `radius` centered at the origin of R³.
    Ball { radius: f64 },
    /// `inner < |z| < outer` in R².
    Annulus { inner: f64, outer: f64 },
    /// `{0 < x < width}` in the Heisenberg group; `patch` is the `(y, z)` window
    /// over which boundary and volume quantities are reported.
    HeisSlab { width: f64, patch: [(f64, f64); 2] },
    /// `{x > 0}` in the Heisenberg group with a `(y, z)` reporting window.
    HeisHalfspace { patch: [(f64, f64); 2] },
    /// `{offset < x < offset + width}` in the Grushin plane with a `y` window.
    GrushinStrip {
        offset: f64,
        width: f64,
        patch: (f64, f64),
    },
    /// Euclidean-round ball in the Heisenberg group (has characteristic points).
    HeisBall { radius: f64 },
}

impl DomainKind {
    pub fn model_kind(&self) -> ModelKind {
        match self {
            DomainKind::Interval { .. } => ModelKind::Euclid1,
            DomainKind::Disc { .. } | DomainKind::Annulus { .. } => ModelKind::Euclid2,
            DomainKind::Ball { .. } => ModelKind::Euclid3,
            DomainKind::HeisSlab { .. }
            | DomainKind::HeisHalfspace { .. }
            | DomainKind::HeisBall { .. } => ModelKind::Heisenberg,
            DomainKind::GrushinStrip { .. } => ModelKind::Grushin,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Interval { .. } => "interval",
            DomainKind::Disc { .. } => "disc",
            DomainKind::Ball { .. } => "ball",
            DomainKind::Annulus { .. } => "annulus",
            DomainKind::HeisSlab { .. } => "heis_slab",
            DomainKind::HeisHalfspace { .. } => "heis_halfspace",
            DomainKind::GrushinStrip { .. } => "grushin_strip",
            DomainKind::HeisBall { .. } => "heis_ball",
        }
    }
}

/// Parameter schemas of the built-in domains, for listings.
pub const DOMAIN_SCHEMAS: [(&str, &str, &str); 9] = [
    ("interval", "euclid1", "a=0 b=1"),
    ("disc", "euclid2", "R=1"),
    ("annulus", "euclid2", "R1=0.5 R2=1"),
    ("ball", "euclid3", "R=1"),
    ("sphere", "euclid3", "R=2 (alias of ball)"),
    ("heis_slab", "heisenberg", "L=2 patch=[-1,1]^2"),
    ("heis_halfspace", "heisenberg", "patch=[-1,1]^2"),
    ("grushin_strip", "grushin", "a=0 L=1 patch=[-1,1]"),
    ("heis_ball", "heisenberg", "R=1 (characteristic; detection only)"),
];

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Interval { a, b } => write!(f, "interval a={a} b={b}"),
            DomainKind::Disc { radius } => write!(f, "disc R={radius}"),
            DomainKind::Ball { radius } => write!(f, "ball R={radius}"),
            DomainKind::Annulus { inner, outer } => write!(f, "annulus R1={inner} R2={outer}"),
            DomainKind::HeisSlab { width, patch } => write!(
                f,
                "heis_slab L={width} patch=[{},{}]x[{},{}]",
                patch[0].0, patch[0].1, patch[1].0, patch[1].1
            ),
            DomainKind::HeisHalfspace { patch } => write!(
                f,
                "heis_halfspace patch=[{},{}]x[{},{}]",
                patch[0].0, patch[0].1, patch[1].0, patch[1].1
            ),
            DomainKind::GrushinStrip {
                offset,
                width,
                patch,
            } => write!(
                f,
                "grushin_strip a={offset} L={width} patch=[{},{}]",
                patch.0, patch.1
            ),
            DomainKind::HeisBall { radius } => write!(f, "heis_ball R={radius}"),
        }
    }
}

/// Tensor Gauss–Legendre rule on boundary parameter rectangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRule {
    pub nodes: usize,
    pub panels: usize,
}

impl Default for BoundaryRule {
    fn default() -> Self {
        BoundaryRule {
            nodes: 64,
            panels: 1,
        }
    }
}

impl BoundaryRule {
    pub fn doubled(self) -> Self {
        BoundaryRule {
            nodes: self.nodes * 2,
            panels: self.panels,
        }
    }
}

/// Composite Gauss–Legendre rule for volume integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeRule {
    pub nodes: usize,
    pub panels: usize,
    pub angular: usize,
}

impl Default for VolumeRule {
    fn default() -> Self {
        VolumeRule {
            nodes: 16,
            panels: 8,
            angular: 128,
        }
    }
}

/// A quadrature node on a boundary (or offset) surface.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryNode {
    pub piece: usize,
    pub params: Vec<f64>,
    pub point: Vec<f64>,
    /// Quadrature weight times perimeter density (times measure density).
    pub weight: f64,
}

/// Result of [`Domain::detect_characteristic`].
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicReport {
    pub min_norm: f64,
    pub offending: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl CharacteristicReport {
    pub fn is_characteristic(&self) -> bool {
        !self.offending.is_empty()
    }
}

/// A domain in a model space.
#[derive(Clone, Debug)]
pub struct Domain {
    kind: DomainKind,
    model: ModelSpace,
    rule: BoundaryRule,
    volume_rule: VolumeRule,
    /// Extra panel breakpoints per boundary parameter (see [`Domain::adapted_to`]).
    param_breaks: Vec<Vec<f64>>,
    /// Extra panel breakpoints per coordinate for Cartesian volume integrals.
    volume_breaks: Vec<Vec<f64>>,
}

struct Piece {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn parse_number(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("parameter '{key}': cannot parse '{v}' as a number")))
}

/// Parses `[lo,hi]` or `[lo,hi]^2` into a list of intervals.
fn parse_box(v: &str, dims: usize) -> Result<Vec<(f64, f64)>> {
    let v = v.trim();
    let (body, power) = match v.split_once('^') {
        Some((b, p)) => (
            b.trim(),
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad exponent in '{v}'")))?,
        ),
        None => (v, 1),
    };
    let mut intervals = Vec::new();
    for part in body.split(['x', '×']) {
        let inner = part
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| Error::Config(format!("expected [lo,hi] in '{v}'")))?;
        let (lo, hi) = inner
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("expected [lo,hi] in '{v}'")))?;
        let (lo, hi) = (parse_number("patch", lo)?, parse_number("patch", hi)?);
        if lo >= hi {
            return Err(Error::Config(format!("empty interval [{lo},{hi}]")));
        }
        intervals.push((lo, hi));
    }
    let intervals: Vec<(f64, f64)> = if intervals.len() == 1 {
        vec![intervals[0]; power.max(1)]
    } else {
        intervals
    };
    if intervals.len() != dims {
        return Err(Error::Config(format!(
            "patch '{v}' has {} factors, expected {dims}",
            intervals.len()
        )));
    }
    Ok(intervals)
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Domain> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match &kind {
            DomainKind::Interval { a, b } => {
                if !(a < b) {
                    return Err(Error::Config(format!("interval needs a < b, got ({a}, {b})")));
                }
            }
            DomainKind::Disc { radius }
            | DomainKind::Ball { radius }
            | DomainKind::HeisBall { radius } => positive("radius", *radius)?,
            DomainKind::Annulus { inner, outer } => {
                positive("inner radius", *inner)?;
                if outer <= inner {
                    return Err(Error::Config("annulus needs R1 < R2".into()));
                }
            }
            DomainKind::HeisSlab { width, .. } => positive("slab width", *width)?,
            DomainKind::HeisHalfspace { .. } => {}
            DomainKind::GrushinStrip { width, .. } => positive("strip width", *width)?,
        }
        Ok(Domain {
            model: ModelSpace::new(kind.model_kind()),
            kind,
            rule: BoundaryRule::default(),
            volume_rule: VolumeRule::default(),
            param_breaks: Vec::new(),
            volume_breaks: Vec::new(),
        })
    }

    /// Parses specifications like `"disc R=1.0"` or `"heis_slab L=2.0 patch=[-1,1]^2"`.
    pub fn parse(spec: &str) -> Result<Domain> {
        let mut tokens = spec.split_whitespace();
        let name = tokens
            .next()
            .ok_or_else(|| Error::Config("empty domain specification".into()))?
            .to_ascii_lowercase();
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))?;
            params.insert(k.to_string(), v.to_string());
        }
        let mut take = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.remove(key) {
                Some(v) => parse_number(key, &v),
                None => default.ok_or_else(|| Error::Config(format!("missing parameter '{key}'"))),
            }
        };
        let kind = match name.as_str() {
            "interval" => DomainKind::Interval {
                a: take("a", Some(0.0))?,
                b: take("b", Some(1.0))?,
            },
            "disc" => DomainKind::Disc {
                radius: take("R", Some(1.0))?,
            },
            "ball" | "sphere" => DomainKind::Ball {
                radius: take("R", Some(1.0))?,
            },
            "annulus" => DomainKind::Annulus {
                inner: take("R1", Some(0.5))?,
                outer: take("R2", Some(1.0))?,
            },
            "heis_ball" => DomainKind::HeisBall {
                radius: take("R", Some(1.0))?,
            },
            "heis_slab" | "heis_halfspace" | "grushin_strip" => {
                let width = if name == "heis_halfspace" {
                    0.0
                } else {
                    take("L", Some(if name == "heis_slab" { 2.0 } else { 1.0 }))?
                };
                let offset = if name == "grushin_strip" {
                    take("a", Some(0.0))?
                } else {
                    0.0
                };
                let patch_dims = if name == "grushin_strip" { 1 } else { 2 };
                let patch = match params.remove("patch") {
                    Some(v) => parse_box(&v, patch_dims)?,
                    None => vec![(-1.0, 1.0); patch_dims],
                };
                match name.as_str() {
                    "heis_slab" => DomainKind::HeisSlab {
                        width,
                        patch: [patch[0], patch[1]],
                    },
                    "heis_halfspace" => DomainKind::HeisHalfspace {
                        patch: [patch[0], patch[1]],
                    },
                    _ => DomainKind::GrushinStrip {
                        offset,
                        width,
                        patch: patch[0],
                    },
                }
            }
            other => return Err(Error::Config(format!("unknown domain '{other}'"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(Error::Config(format!("unknown parameter '{k}' for domain '{name}'")));
        }
        Domain::new(kind)
    }

    pub fn with_rule(mut self, rule: BoundaryRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_volume_rule(mut self, rule: VolumeRule) -> Self {
        self.volume_rule = rule;
        self
    }

    /// Copy whose boundary rule splits its panels where the weight's factors are not
    /// analytic (plateau and bump transitions), on boundaries parametrised by
    /// coordinates (slabs, half-spaces, strips). Other domains are returned unchanged.
    pub fn adapted_to(&self, weight: &WeightSpec) -> Domain {
        let axes: &[usize] = match self.kind {
            DomainKind::HeisSlab { .. } | DomainKind::HeisHalfspace { .. } => &[1, 2],
            DomainKind::GrushinStrip { .. } => &[1],
            _ => &[],
        };
        let mut out = self.clone();
        if let Some(pw) = weight.product_description() {
            out.volume_breaks = (0..self.dim())
                .map(|a| {
                    let mut b: Vec<f64> = pw.factors.iter().flat_map(|f| f.breakpoints(a)).collect();
                    b.sort_by(f64::total_cmp);
                    b.dedup();
                    b
                })
                .collect();
            out.param_breaks = axes
                .iter()
                .map(|&a| {
                    let mut b: Vec<f64> = pw.factors.iter().flat_map(|f| f.breakpoints(a)).collect();
                    b.sort_by(f64::total_cmp);
                    b.dedup();
                    b
                })
                .collect();
        }
        out
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }

    pub fn rule(&self) -> BoundaryRule {
        self.rule
    }

    pub fn volume_rule(&self) -> VolumeRule {
        self.volume_rule
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Whether the heat content is reported per transverse patch (translation-invariant domains).
    pub fn is_translation_invariant(&self) -> bool {
        matches!(
            self.kind,
            DomainKind::HeisSlab { .. }
                | DomainKind::HeisHalfspace { .. }
                | DomainKind::GrushinStrip { .. }
        )
    }

    /// Level function F with Ω = {F > 0}.
    pub fn level_jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        let z = Jet::coordinates(x, order)?;
        let sq = |j: &Jet| j.try_mul(j);
        let r2 = || -> Result<Jet> {
            let mut acc = Jet::constant(x, order, 0.0)?;
            for zi in &z {
                acc = acc.try_add(&sq(zi)?)?;
            }
            Ok(acc)
        };
        match &self.kind {
            DomainKind::Interval { a, b } => z[0].add_scalar(-a).try_mul(&(-&z[0]).add_scalar(*b)),
            DomainKind::Disc { radius }
            | DomainKind::Ball { radius }
            | DomainKind::HeisBall { radius } => Ok((-&r2()?).add_scalar(radius * radius)),
            DomainKind::Annulus { inner, outer } => {
                let r2 = r2()?;
                r2.add_scalar(-inner * inner)
                    .try_mul(&(-&r2).add_scalar(outer * outer))
            }
            DomainKind::HeisSlab { width, .. } => z[0].try_mul(&(-&z[0]).add_scalar(*width)),
            DomainKind::HeisHalfspace { .. } => Ok(z[0].clone()),
            DomainKind::GrushinStrip { offset, width, .. } => z[0]
                .add_scalar(-offset)
                .try_mul(&(-&z[0]).add_scalar(offset + width)),
        }
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        let r2 = || x.iter().map(|v| v * v).sum::<f64>();
        match &self.kind {
            DomainKind::Interval { a, b } => (x[0] - a) * (b - x[0]),
            DomainKind::Disc { radius }
            | DomainKind::Ball { radius }
            | DomainKind::HeisBall { radius } => radius * radius - r2(),
            DomainKind::Annulus { inner, outer } => {
                let r2 = r2();
                (r2 - inner * inner) * (outer * outer - r2)
            }
            DomainKind::HeisSlab { width, .. } => x[0] * (width - x[0]),
            DomainKind::HeisHalfspace { .. } => x[0],
            DomainKind::GrushinStrip { offset, width, .. } => {
                (x[0] - offset) * (offset + width - x[0])
            }
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) > 0.0
    }

    /// Half-width ρ₀ of the band on which δ is smooth and eikonal.
    pub fn tubular_radius(&self) -> f64 {
        match &self.kind {
            DomainKind::Interval { a, b } => 0.4 * (b - a),
            DomainKind::Disc { radius } | DomainKind::Ball { radius } => 0.5 * radius,
            DomainKind::Annulus { inner, outer } => 0.9 * inner.min(0.5 * (outer - inner)),
            DomainKind::HeisSlab { width, .. } => 0.4 * width,
            DomainKind::HeisHalfspace { .. } => f64::INFINITY,
            DomainKind::GrushinStrip { width, .. } => 0.4 * width,
            DomainKind::HeisBall { .. } => 0.0,
        }
    }

    /// Signed distance δ (positive inside) at `x`.
    pub fn delta(&self, x: &[f64]) -> Result<f64> {
        let r = || x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(match &self.kind {
            DomainKind::Interval { a, b } => (x[0] - a).min(b - x[0]),
            DomainKind::Disc { radius } | DomainKind::Ball { radius } => radius - r(),
            DomainKind::Annulus { inner, outer } => (r() - inner).min(outer - r()),
            DomainKind::HeisSlab { width, .. } => x[0].min(width - x[0]),
            DomainKind::HeisHalfspace { .. } => x[0],
            DomainKind::GrushinStrip { offset, width, .. } => {
                (x[0] - offset).min(offset + width - x[0])
            }
            DomainKind::HeisBall { .. } => {
                return Err(Error::unsupported(
                    "heisenberg",
                    "signed distance of a domain with characteristic points",
                ))
            }
        })
    }

    /// Jet of δ at `x`; on piecewise domains the branch nearest to `x` is used.
    pub fn delta_jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        let z = Jet::coordinates(x, order)?;
        let radius_jet = || -> Result<Jet> {
            let mut acc = Jet::constant(x, order, 0.0)?;
            for zi in &z {
                acc = acc.try_add(&zi.try_mul(zi)?)?;
            }
            acc.sqrt()
        };
        let nearest = |lo: f64, hi: f64| -> Jet {
            if z[0].value() - lo <= hi - z[0].value() {
                z[0].add_scalar(-lo)
            } else {
                (-&z[0]).add_scalar(hi)
            }
        };
        match &self.kind {
            DomainKind::Interval { a, b } => Ok(nearest(*a, *b)),
            DomainKind::Disc { radius } | DomainKind::Ball { radius } => {
                Ok((-&radius_jet()?).add_scalar(*radius))
            }
            DomainKind::Annulus { inner, outer } => {
                let r = radius_jet()?;
                if r.value() - inner <= outer - r.value() {
                    Ok(r.add_scalar(-inner))
                } else {
                    Ok((-&r).add_scalar(*outer))
                }
            }
            DomainKind::HeisSlab { width, .. } => Ok(nearest(0.0, *width)),
            DomainKind::HeisHalfspace { .. } => Ok(z[0].clone()),
            DomainKind::GrushinStrip { offset, width, .. } => Ok(nearest(*offset, offset + width)),
            DomainKind::HeisBall { .. } => Err(Error::unsupported(
                "heisenberg",
                "signed distance of a domain with characteristic points",
            )),
        }
    }

    /// δ as a shareable scalar field.
    pub fn delta_field(&self) -> Field {
        let dom = self.clone();
        ExprField::new(format!("delta[{}]", self.kind), move |z: &[Jet]| {
            let x: Vec<f64> = z[0].center().to_vec();
            dom.delta_jet(&x, z[0].order())
        })
        .shared()
    }

    /// Errors unless `x` lies in the tubular band.
    pub fn check_band(&self, x: &[f64]) -> Result<f64> {
        let d = self.delta(x)?;
        let rho = self.tubular_radius();
        if d.abs() >= rho {
            return Err(Error::OutsideBand {
                point: x.to_vec(),
                distance: d.abs(),
                radius: rho,
            });
        }
        Ok(d)
    }

    /// ω(Ω) (per reporting patch for translation-invariant domains).
    pub fn volume(&self) -> Result<f64> {
        Ok(match &self.kind {
            DomainKind::Interval { a, b } => b - a,
            DomainKind::Disc { radius } => PI * radius * radius,
            DomainKind::Ball { radius } | DomainKind::HeisBall { radius } => {
                4.0 / 3.0 * PI * radius.powi(3)
            }
            DomainKind::Annulus { inner, outer } => PI * (outer * outer - inner * inner),
            DomainKind::HeisSlab { width, patch } => {
                width * (patch[0].1 - patch[0].0) * (patch[1].1 - patch[1].0)
            }
            DomainKind::GrushinStrip { width, patch, .. } => width * (patch.1 - patch.0),
            DomainKind::HeisHalfspace { .. } => {
                return Err(Error::unsupported("heisenberg", "volume of a half-space"))
            }
        })
    }

    /// Bounding box of Ω (of the reporting window for translation-invariant domains).
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>> {
        Ok(match &self.kind {
            DomainKind::Interval { a, b } => vec![(*a, *b)],
            DomainKind::Disc { radius } => vec![(-radius, *radius); 2],
            DomainKind::Annulus { outer, .. } => vec![(-outer, *outer); 2],
            DomainKind::Ball { radius } | DomainKind::HeisBall { radius } => {
                vec![(-radius, *radius); 3]
            }
            DomainKind::HeisSlab { width, patch } => vec![(0.0, *width), patch[0], patch[1]],
            DomainKind::GrushinStrip {
                offset,
                width,
                patch,
            } => vec![(*offset, offset + width), *patch],
            DomainKind::HeisHalfspace { .. } => {
                return Err(Error::unsupported("heisenberg", "bounded sampling of a half-space"))
            }
        })
    }

    fn pieces(&self) -> Vec<Piece> {
        let tau = 2.0 * PI;
        let none = || Piece {
            lo: vec![],
            hi: vec![],
        };
        match &self.kind {
            DomainKind::Interval { .. } => vec![none(), none()],
            DomainKind::Disc { .. } => vec![Piece {
                lo: vec![0.0],
                hi: vec![tau],
            }],
            DomainKind::Annulus { .. } => vec![
                Piece {
                    lo: vec![0.0],
                    hi: vec![tau],
                },
                Piece {
                    lo: vec![0.0],
                    hi: vec![tau],
                },
            ],
            DomainKind::Ball { .. } | DomainKind::HeisBall { .. } => vec![Piece {
                lo: vec![0.0, 0.0],
                hi: vec![PI, tau],
            }],
            DomainKind::HeisSlab { patch, .. } => {
                let p = || Piece {
                    lo: vec![patch[0].0, patch[1].0],
                    hi: vec![patch[0].1, patch[1].1],
                };
                vec![p(), p()]
            }
            DomainKind::HeisHalfspace { patch } => vec![Piece {
                lo: vec![patch[0].0, patch[1].0],
                hi: vec![patch[0].1, patch[1].1],
            }],
            DomainKind::GrushinStrip { patch, .. } => {
                let p = || Piece {
                    lo: vec![patch.0],
                    hi: vec![patch.1],
                };
                vec![p(), p()]
            }
        }
    }

    /// Number of boundary pieces.
    pub fn piece_count(&self) -> usize {
        self.pieces().len()
    }

    /// Embedding of the offset surface `{δ = s}` of boundary piece `piece`,
    /// as coordinate jets in the parameter jets `p`.
    pub fn embed(&self, piece: usize, s: f64, p: &[Jet]) -> Result<Vec<Jet>> {
        let (center, order): (Vec<f64>, usize) = match p.first() {
            Some(j) => (j.center().to_vec(), j.order()),
            None => (vec![], crate::jets::MAX_ORDER),
        };
        let c = |v: f64| Jet::constant(&center, order, v);
        let circle = |rho: f64| -> Result<Vec<Jet>> {
            Ok(vec![
                p[0].compose(Univariate::Cos)?.scale(rho),
                p[0].compose(Univariate::Sin)?.scale(rho),
            ])
        };
        let sphere = |rho: f64| -> Result<Vec<Jet>> {
            let (st, ct) = (p[0].compose(Univariate::Sin)?, p[0].compose(Univariate::Cos)?);
            let (sp, cp) = (p[1].compose(Univariate::Sin)?, p[1].compose(Univariate::Cos)?);
            Ok(vec![
                st.try_mul(&cp)?.scale(rho),
                st.try_mul(&sp)?.scale(rho),
                ct.scale(rho),
            ])
        };
        match &self.kind {
            DomainKind::Interval { a, b } => Ok(vec![c(if piece == 0 { a + s } else { b - s })?]),
            DomainKind::Disc { radius } => circle(radius - s),
            DomainKind::Annulus { inner, outer } => {
                circle(if piece == 0 { inner + s } else { outer - s })
            }
            DomainKind::Ball { radius } => sphere(radius - s),
            DomainKind::HeisBall { radius } => {
                if s != 0.0 {
                    return Err(Error::unsupported(
                        "heisenberg",
                        "offset surfaces of a domain with characteristic points",
                    ));
                }
                sphere(*radius)
            }
            DomainKind::HeisSlab { width, .. } => Ok(vec![
                c(if piece == 0 { s } else { width - s })?,
                p[0].clone(),
                p[1].clone(),
            ]),
            DomainKind::HeisHalfspace { .. } => Ok(vec![c(s)?, p[0].clone(), p[1].clone()]),
            DomainKind::GrushinStrip { offset, width, .. } => Ok(vec![
                c(if piece == 0 { offset + s } else { offset + width - s })?,
                p[0].clone(),
            ]),
        }
    }

    /// Point of the offset surface `{δ = s}` at parameters `params`.
    pub fn surface_point(&self, piece: usize, s: f64, params: &[f64]) -> Result<Vec<f64>> {
        let p = Jet::coordinates(params, 0)?;
        Ok(self.embed(piece, s, &p)?.iter().map(Jet::value).collect())
    }

    /// Euclidean area element of the parametrization.
    fn area_element(&self, piece: usize, s: f64, params: &[f64]) -> Result<(Vec<f64>, f64)> {
        if params.is_empty() {
            return Ok((self.surface_point(piece, s, params)?, 1.0));
        }
        let p = Jet::coordinates(params, 1)?;
        let e = self.embed(piece, s, &p)?;
        let point: Vec<f64> = e.iter().map(Jet::value).collect();
        let d = params.len();
        let tangents: Vec<Vec<f64>> = (0..d)
            .map(|k| e.iter().map(|c| c.partial(k)).collect())
            .collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let area = match d {
            1 => dot(&tangents[0], &tangents[0]).sqrt(),
            2 => {
                let g11 = dot(&tangents[0], &tangents[0]);
                let g12 = dot(&tangents[0], &tangents[1]);
                let g22 = dot(&tangents[1], &tangents[1]);
                (g11 * g22 - g12 * g12).max(0.0).sqrt()
            }
            _ => return Err(Error::invalid("unsupported parameter dimension")),
        };
        Ok((point, area))
    }

    /// `(‖∇_H G‖_g, |∇G|)` for the level function G (F on the boundary, δ off it).
    pub fn gradient_norms(&self, x: &[f64], use_delta: bool) -> Result<(f64, f64)> {
        let g = if use_delta {
            self.delta_jet(x, 1)?
        } else {
            self.level_jet(x, 1)?
        };
        let horizontal = self
            .model
            .apply_frame(&g)?
            .iter()
            .map(|j| j.value() * j.value())
            .sum::<f64>()
            .sqrt();
        let euclid = g.gradient().iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((horizontal, euclid))
    }

    fn axis_rule(&self, lo: f64, hi: f64, rule: BoundaryRule) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(rule.nodes);
        let h = (hi - lo) / rule.panels as f64;
        let mut out = Vec::with_capacity(rule.nodes * rule.panels);
        for p in 0..rule.panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
            }
        }
        out
    }

    fn volume_axis_rule(&self, axis: usize, (lo, hi): (f64, f64), rule: BoundaryRule) -> Vec<(f64, f64)> {
        match self.volume_breaks.get(axis).filter(|b| !b.is_empty()) {
            Some(breaks) => {
                let mut edges = vec![lo];
                edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
                edges.push(hi);
                let sub = BoundaryRule {
                    nodes: rule.nodes,
                    panels: (rule.panels / 4).max(1),
                };
                edges.windows(2).flat_map(|w| self.axis_rule(w[0], w[1], sub)).collect()
            }
            None => self.axis_rule(lo, hi, rule),
        }
    }

    fn tensor_params(&self, piece: &Piece, rule: BoundaryRule) -> Vec<(Vec<f64>, f64)> {
        let axes: Vec<Vec<(f64, f64)>> = piece
            .lo
            .iter()
            .zip(&piece.hi)
            .enumerate()
            .map(|(k, (&lo, &hi))| match self.param_breaks.get(k).filter(|b| !b.is_empty()) {
                Some(breaks) => {
                    let mut edges = vec![lo];
                    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
                    edges.push(hi);
                    let sub = BoundaryRule {
                        nodes: (rule.nodes / 2).max(24),
                        panels: rule.panels,
                    };
                    edges.windows(2).flat_map(|w| self.axis_rule(w[0], w[1], sub)).collect()
                }
                None => self.axis_rule(lo, hi, rule),
            })
            .collect();
        let mut out = vec![(Vec::new(), 1.0)];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for (params, w) in &out {
                for &(x, wx) in axis {
                    let mut p = params.clone();
                    p.push(x);
                    next.push((p, w * wx));
                }
            }
            out = next;
        }
        out
    }

    /// Quadrature nodes on `{δ = s}` (the boundary when `s = 0`).
    pub fn surface_nodes(&self, s: f64, rule: BoundaryRule) -> Result<Vec<BoundaryNode>> {
        let mut nodes = Vec::new();
        for (k, piece) in self.pieces().iter().enumerate() {
            for (params, w) in self.tensor_params(piece, rule) {
                let (point, area) = self.area_element(k, s, &params)?;
                let (h, e) = self.gradient_norms(&point, s != 0.0)?;
                if h < 1e-9 {
                    return Err(Error::Characteristic { point, norm: h });
                }
                let density = self.model.density_value(&point)?;
                nodes.push(BoundaryNode {
                    piece: k,
                    params,
                    weight: w * area * (h / e) * density,
                    point,
                });
            }
        }
        Ok(nodes)
    }

    pub fn boundary_nodes(&self) -> Result<Vec<BoundaryNode>> {
        self.surface_nodes(0.0, self.rule)
    }

    /// `∫_{∂Ω} f dσ` with the domain's default rule.
    pub fn boundary_integral(&self, f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        self.boundary_integral_with(self.rule, f)
    }

    pub fn boundary_integral_with(
        &self,
        rule: BoundaryRule,
        f: impl Fn(&[f64]) -> Result<f64>,
    ) -> Result<f64> {
        let mut total = 0.0;
        for node in self.surface_nodes(0.0, rule)? {
            total += node.weight * f(&node.point)?;
        }
        Ok(total)
    }

    /// `∫_{δ = s} f dσ_s`.
    pub fn offset_integral(&self, s: f64, f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for node in self.surface_nodes(s, self.rule)? {
            total += node.weight * f(&node.point)?;
        }
        Ok(total)
    }

    /// Perimeter σ(∂Ω) (per reporting window).
    pub fn perimeter(&self) -> Result<f64> {
        self.boundary_integral(|_| Ok(1.0))
    }

    /// Minimum of `‖∇_H F‖_g / |∇F|` over quadrature nodes and the edges of the
    /// parameter rectangles.
    pub fn detect_characteristic(&self) -> Result<CharacteristicReport> {
        let threshold = 1e-6;
        let mut min_norm = f64::INFINITY;
        let mut offending = Vec::new();
        let rule = BoundaryRule {
            nodes: self.rule.nodes.min(64),
            panels: 1,
        };
        for (k, piece) in self.pieces().iter().enumerate() {
            let axes: Vec<Vec<f64>> = piece
                .lo
                .iter()
                .zip(&piece.hi)
                .map(|(&lo, &hi)| {
                    let mut v = vec![lo];
                    v.extend(self.axis_rule(lo, hi, rule).into_iter().map(|(x, _)| x));
                    v.push(hi);
                    v
                })
                .collect();
            let mut grid = vec![Vec::new()];
            for axis in &axes {
                grid = grid
                    .into_iter()
                    .flat_map(|p: Vec<f64>| {
                        axis.iter().map(move |&x| {
                            let mut q = p.clone();
                            q.push(x);
                            q
                        })
                    })
                    .collect();
            }
            for params in grid {
                let point = self.surface_point(k, 0.0, &params)?;
                let (h, e) = self.gradient_norms(&point, false)?;
                let ratio = if e > 0.0 { h / e } else { 0.0 };
                min_norm = min_norm.min(ratio);
                if ratio <= threshold && !offending.iter().any(|q: &Vec<f64>| close(q, &point)) {
                    offending.push(point);
                }
            }
        }
        Ok(CharacteristicReport {
            min_norm,
            offending,
            threshold,
        })
    }

    /// Errors with the first characteristic point if there is one.
    pub fn ensure_noncharacteristic(&self) -> Result<()> {
        let report = self.detect_characteristic()?;
        if let Some(p) = report.offending.first() {
            return Err(Error::Characteristic {
                point: p.clone(),
                norm: report.min_norm,
            });
        }
        Ok(())
    }

    /// `∫_{Ω_r ∩ region} f dω` where `Ω_r = {δ > r}`.
    pub fn volume_integral(
        &self,
        f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
        r: f64,
        region: &Region,
    ) -> Result<f64> {
        let rule = self.volume_rule;
        let clip = |lo: f64, hi: f64, axis: usize| -> (f64, f64) {
            match &region.boxed {
                Some(b) => (lo.max(b[axis].0), hi.min(b[axis].1)),
                None => (lo, hi),
            }
        };
        let radial_clip = |lo: f64, hi: f64| -> (f64, f64) {
            match region.radial {
                Some((a, b)) => (lo.max(a), hi.min(b)),
                None => (lo, hi),
            }
        };
        let density = |x: &[f64]| self.model.density_value(x);
        let weighted = |x: &[f64]| -> Result<f64> { Ok(f(x)? * density(x)?) };
        let br = BoundaryRule {
            nodes: rule.nodes,
            panels: rule.panels,
        };
        let ang = BoundaryRule {
            nodes: rule.angular,
            panels: 1,
        };
        match &self.kind {
            DomainKind::Interval { a, b } => {
                let (lo, hi) = clip(a + r, b - r, 0);
                cartesian(&[(lo, hi)], br, &weighted, |k, q| self.volume_axis_rule(k, q, br))
            }
            DomainKind::HeisSlab { width, patch } => {
                let bx = [clip(r, width - r, 0), clip(patch[0].0, patch[0].1, 1), clip(patch[1].0, patch[1].1, 2)];
                cartesian(&bx, br, &weighted, |k, q| self.volume_axis_rule(k, q, br))
            }
            DomainKind::HeisHalfspace { patch } => {
                let upper = region
                    .boxed
                    .as_ref()
                    .map(|b| b[0].1)
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Support("half-space volume integrals need a bounded x-support".into()))?;
                let bx = [clip(r, upper, 0), clip(patch[0].0, patch[0].1, 1), clip(patch[1].0, patch[1].1, 2)];
                cartesian(&bx, br, &weighted, |k, q| self.volume_axis_rule(k, q, br))
            }
            DomainKind::GrushinStrip {
                offset,
                width,
                patch,
            } => {
                let bx = [clip(offset + r, offset + width - r, 0), clip(patch.0, patch.1, 1)];
                cartesian(&bx, br, &weighted, |k, q| self.volume_axis_rule(k, q, br))
            }
            DomainKind::Disc { radius } | DomainKind::Annulus { outer: radius, .. } => {
                let inner = match &self.kind {
                    DomainKind::Annulus { inner, .. } => inner + r,
                    _ => 0.0,
                };
                let (lo, hi) = radial_clip(inner.max(0.0), radius - r);
                if hi <= lo {
                    return Ok(0.0);
                }
                let radial = self.axis_rule(lo, hi, br);
                let theta = self.axis_rule(0.0, 2.0 * PI, ang);
                let mut total = 0.0;
                for &(rho, wr) in &radial {
                    let mut ring = 0.0;
                    for &(th, wt) in &theta {
                        ring += wt * weighted(&[rho * th.cos(), rho * th.sin()])?;
                    }
                    total += wr * rho * ring;
                }
                Ok(total)
            }
            DomainKind::Ball { radius } | DomainKind::HeisBall { radius } => {
                if r != 0.0 && matches!(self.kind, DomainKind::HeisBall { .. }) {
                    return Err(Error::unsupported("heisenberg", "offset domains of the Heisenberg ball"));
                }
                let (lo, hi) = radial_clip(0.0, radius - r);
                if hi <= lo {
                    return Ok(0.0);
                }
                let radial = self.axis_rule(lo, hi, br);
                let polar = self.axis_rule(0.0, PI, BoundaryRule { nodes: rule.angular / 2, panels: 1 });
                let azim = self.axis_rule(0.0, 2.0 * PI, ang);
                let mut total = 0.0;
                for &(rho, wr) in &radial {
                    for &(th, wt) in &polar {
                        let (st, ct) = th.sin_cos();
                        let mut ring = 0.0;
                        for &(ph, wp) in &azim {
                            let (sp, cp) = ph.sin_cos();
                            ring += wp * weighted(&[rho * st * cp, rho * st * sp, rho * ct])?;
                        }
                        total += wr * wt * rho * rho * st * ring;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Point at signed distance `s` above boundary parameters `params` of piece `piece`.
    pub fn band_point(&self, piece: usize, params: &[f64], s: f64) -> Result<Vec<f64>> {
        self.surface_point(piece, s, params)
    }

    /// Parameter rectangle of a piece.
    pub fn piece_bounds(&self, piece: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let pieces = self.pieces();
        let p = pieces
            .get(piece)
            .ok_or_else(|| Error::invalid(format!("no boundary piece {piece}")))?;
        Ok((p.lo.clone(), p.hi.clone()))
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

fn cartesian(
    bx: &[(f64, f64)],
    _rule: BoundaryRule,
    f: &dyn Fn(&[f64]) -> Result<f64>,
    axis_rule: impl Fn(usize, (f64, f64)) -> Vec<(f64, f64)>,
) -> Result<f64> {
    if bx.iter().any(|(lo, hi)| hi <= lo) {
        return Ok(0.0);
    }
    let axes: Vec<Vec<(f64, f64)>> = bx.iter().enumerate().map(|(k, &q)| axis_rule(k, q)).collect();
    let dim = axes.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..dim {
            let (xi, wi) = axes[i][idx[i]];
            x[i] = xi;
            w *= wi;
        }
        total += w * f(&x)?;
        let mut i = 0;
        while i < dim {
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == dim {
            break;
        }
    }
    Ok(total)
}

/// Shared handle to a domain.
pub type DomainRef = Arc<Domain>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn parse_round_trip() {
        let d = Domain::parse("heis_slab L=2.0 patch=[-1,1]^2").unwrap();
        assert_eq!(
            d.kind(),
            &DomainKind::HeisSlab {
                width: 2.0,
                patch: [(-1.0, 1.0), (-1.0, 1.0)]
            }
        );
        let d = Domain::parse("disc R=1.0").unwrap();
        assert_eq!(d.kind(), &DomainKind::Disc { radius: 1.0 });
        assert!(Domain::parse("disc R=-1").is_err());
        assert!(Domain::parse("moon R=1").is_err());
        assert!(Domain::parse("disc Q=1").is_err());
        let s = Domain::parse("grushin_strip a=0.5 L=1 patch=[-2,2]").unwrap();
        assert_eq!(
            s.kind(),
            &DomainKind::GrushinStrip {
                offset: 0.5,
                width: 1.0,
                patch: (-2.0, 2.0)
            }
        );
    }

    #[test]
    fn perimeters() {
        let disc = Domain::parse("disc R=1").unwrap();
        assert_relative_eq!(disc.perimeter().unwrap(), 2.0 * PI, max_relative = 1e-12);
        let interval = Domain::parse("interval").unwrap();
        assert_eq!(interval.perimeter().unwrap(), 2.0);
        let slab = Domain::parse("heis_slab L=2 patch=[-1,1]^2").unwrap();
        let patch = slab.boundary_integral(|x| Ok(if x[0] == 0.0 { 1.0 } else { 0.0 })).unwrap();
        assert_relative_eq!(patch, 4.0, max_relative = 1e-12);
        let ball = Domain::parse("ball R=1").unwrap();
        assert_relative_eq!(ball.perimeter().unwrap(), 4.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn halving_the_rule_is_converged() {
        for spec in ["disc R=1", "ball R=1", "annulus R1=0.5 R2=1", "heis_slab L=2", "grushin_strip a=0.5 L=1"] {
            let d = Domain::parse(spec).unwrap();
            let full = d.perimeter().unwrap();
            let half = d
                .boundary_integral_with(BoundaryRule { nodes: 32, panels: 1 }, |_| Ok(1.0))
                .unwrap();
            assert!(full > 0.0);
            assert!((full - half).abs() < 1e-8, "{spec}: {full} vs {half}");
        }
    }

    #[test]
    fn characteristic_detection() {
        let slab = Domain::parse("heis_slab L=2").unwrap();
        let r = slab.detect_characteristic().unwrap();
        assert_abs_diff_eq!(r.min_norm, 1.0, epsilon = 1e-12);
        assert!(!r.is_characteristic());
        let disc = Domain::parse("disc").unwrap();
        assert_abs_diff_eq!(disc.detect_characteristic().unwrap().min_norm, 1.0, epsilon = 1e-12);
        let hb = Domain::parse("heis_ball R=1").unwrap();
        let r = hb.detect_characteristic().unwrap();
        assert!(r.is_characteristic());
        assert!(r.offending.iter().any(|p| close(p, &[0.0, 0.0, 1.0])));
        assert!(r.offending.iter().any(|p| close(p, &[0.0, 0.0, -1.0])));
        assert!(hb.perimeter().is_err() || hb.ensure_noncharacteristic().is_err());
    }

    #[test]
    fn delta_vanishes_on_boundary_nodes() {
        for spec in ["interval", "disc R=1", "ball R=1", "annulus R1=0.5 R2=1", "heis_slab L=2", "heis_halfspace", "grushin_strip a=0.5 L=1"] {
            let d = Domain::parse(spec).unwrap();
            for node in d.boundary_nodes().unwrap().iter().step_by(7) {
                assert!(d.delta(&node.point).unwrap().abs() < 1e-10, "{spec}");
            }
        }
    }

    #[test]
    fn volume_quadrature_matches_closed_forms() {
        for spec in ["interval", "disc R=1", "annulus R1=0.5 R2=1", "heis_slab L=2", "grushin_strip a=0.5 L=1"] {
            let d = Domain::parse(spec).unwrap();
            let v = d.volume_integral(&|_| Ok(1.0), 0.0, &Region::everywhere()).unwrap();
            assert_relative_eq!(v, d.volume().unwrap(), max_relative = 1e-12);
        }
        let ball = Domain::parse("ball R=1")
            .unwrap()
            .with_volume_rule(VolumeRule { nodes: 8, panels: 1, angular: 32 });
        let v = ball.volume_integral(&|_| Ok(1.0), 0.0, &Region::everywhere()).unwrap();
        assert_relative_eq!(v, 4.0 / 3.0 * PI, max_relative = 1e-12);
    }
}
