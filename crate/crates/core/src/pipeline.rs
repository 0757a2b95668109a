//! Config-driven experiments: one TOML file describes the model, domain, weight,
//! backend, time ladder and fit; results are written as CSV plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    compare, exact_deficits, exact_g_curve, fit_sqrt_t, predict_g_coefficients, AsymptoticFit,
    ComparisonReport, Thresholds,
};
use crate::domains::{predict_coefficients, Domain, Factor, PredictedCoefficients, WeightSpec};
use crate::error::{Error, Result};
use crate::kernels::{exact_heat_content, exact_weighted_content_curve, interval_dirichlet_heat_content};
use crate::mc::{
    estimate_boundary_functional, estimate_heat_content, geometric_ladder, BackendTag,
    BoundaryFunctional, CurveKind, CurveMetadata, Estimate, GIntegrand, HeatContentCurve, SdeConfig,
};
use crate::domains::DomainKind;
use crate::models::ModelKind;
use crate::pdegrid::{solve_heat, GridScheme, GridSpec};

/// Version string embedded in every results file.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// CSV header of results files.
pub const CSV_HEADER: &str = "t,value,stderr,n,kind,backend";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Optional; when given it must match the domain's model.
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Domain specification, e.g. `"disc R=1"`.
    pub spec: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Width {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSection {
    Unit,
    /// Product of one-dimensional bumps, 1 at `center`, supported in `center ± width`.
    Bump { center: Vec<f64>, width: Width },
    /// Explicit product of factors.
    Product { label: Option<String>, factors: Vec<Factor> },
}

impl WeightSection {
    pub fn resolve(&self, dim: usize) -> Result<WeightSpec> {
        match self {
            WeightSection::Unit => Ok(WeightSpec::unit(dim)),
            WeightSection::Bump { center, width } => {
                if center.len() != dim {
                    return Err(Error::Config(format!(
                        "bump center has {} coordinates, the domain has dimension {dim}",
                        center.len()
                    )));
                }
                let widths = match width {
                    Width::Uniform(w) => vec![*w; dim],
                    Width::PerAxis(w) if w.len() == dim => w.clone(),
                    Width::PerAxis(w) => {
                        return Err(Error::Config(format!("bump width has {} entries, expected {dim}", w.len())))
                    }
                };
                if widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Config("bump widths must be positive".into()));
                }
                let factors = (0..dim)
                    .map(|axis| Factor::Bump {
                        axis,
                        center: center[axis],
                        radius: widths[axis],
                    })
                    .collect();
                WeightSpec::product("bump", dim, factors).map_err(config_error)
            }
            WeightSection::Product { label, factors } => {
                WeightSpec::product(label.clone().unwrap_or_else(|| "product".into()), dim, factors.clone())
                    .map_err(config_error)
            }
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub backend: BackendTag,
    pub kind: CurveKind,
    /// Temperature entering `G`.
    pub integrand: GIntegrand,
    /// Offset of the shrunken domain for `I` and `Λ`.
    pub r: f64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            backend: BackendTag::KernelExact,
            kind: CurveKind::H,
            integrand: GIntegrand::U,
            r: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    pub dt: f64,
    pub scheme: GridScheme,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            h: 0.01,
            dt: 1e-4,
            scheme: GridScheme::Implicit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl Default for LadderSection {
    fn default() -> Self {
        LadderSection {
            t_min: 2.5e-4,
            t_max: 4e-3,
            count: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub exponents: Vec<f64>,
    /// Fix `c₀` to its predicted value.
    pub pin_c0: bool,
    /// Exponents whose comparison decides `verify`; all fitted ones when empty.
    pub check: Vec<f64>,
    pub window: Option<(f64, f64)>,
    pub thresholds: Thresholds,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            exponents: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            pin_c0: false,
            check: Vec::new(),
            window: None,
            thresholds: Thresholds::default(),
        }
    }
}

/// One experiment per file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Overrides `sde.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub weight: Option<WeightSection>,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub sde: SdeConfig,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub fit: FitSection,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read '{}': {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seed actually used by stochastic backends.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.sde.seed)
    }
}

/// A validated configuration with its references resolved.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub domain: Domain,
    pub weight: Option<WeightSpec>,
    pub times: Vec<f64>,
}

impl Experiment {
    pub fn new(mut config: ExperimentConfig) -> Result<Self> {
        let domain = Domain::parse(&config.domain.spec).map_err(config_error)?;
        if let Some(name) = &config.model.name {
            let kind: ModelKind = name.parse()?;
            if kind != domain.model().kind() {
                return Err(Error::Config(format!(
                    "model '{name}' does not match domain '{}' (model '{}')",
                    domain.kind().name(),
                    domain.model().name()
                )));
            }
        }
        let weight = match &config.weight {
            None | Some(WeightSection::Unit) => None,
            Some(w) => Some(w.resolve(domain.dim())?),
        };
        if config.estimate.kind == CurveKind::HChi && weight.is_none() {
            return Err(Error::Config("kind 'Hchi' needs a [weight] section".into()));
        }
        let l = &config.ladder;
        let times = geometric_ladder(l.t_min, l.t_max, l.count).map_err(config_error)?;
        config.sde.seed = config.effective_seed();
        if config.estimate.backend == BackendTag::Mc {
            config.sde.validate()?;
        }
        Ok(Experiment {
            config,
            domain,
            weight,
            times,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::new(ExperimentConfig::from_toml(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ExperimentConfig::load(path)?)
    }

    fn weight_or_unit(&self) -> WeightSpec {
        self.weight.clone().unwrap_or_else(|| WeightSpec::unit(self.domain.dim()))
    }

    /// Predicted c₀…c₄ for the configured weight.
    pub fn predict(&self) -> Result<PredictedCoefficients> {
        predict_coefficients(&self.domain, &self.weight_or_unit())
    }

    /// Predictions matching the configured fit basis for the configured curve kind.
    pub fn predicted_for_fit(&self) -> Result<Vec<f64>> {
        let exps = &self.config.fit.exponents;
        let index = |e: f64| (e * 2.0).round() as usize;
        match self.config.estimate.kind {
            CurveKind::H | CurveKind::HChi | CurveKind::K => {
                let c = self.predict()?.c;
                let sign = if self.config.estimate.kind == CurveKind::K { -1.0 } else { 1.0 };
                Ok(exps
                    .iter()
                    .map(|&e| if e == 0.0 && sign < 0.0 { 0.0 } else { sign * c[index(e)] })
                    .collect())
            }
            CurveKind::G => {
                let g = predict_g_coefficients(&self.domain, &self.weight_or_unit(), self.config.estimate.integrand)?;
                exps.iter()
                    .map(|&e| match index(e) {
                        0 => Ok(0.0),
                        1 => Ok(g[0]),
                        2 => Ok(g[1]),
                        _ => Err(Error::Config(format!(
                            "no prediction for the t^{e} coefficient of G; fit exponents 0.5 and 1 only"
                        ))),
                    })
                    .collect()
            }
            other => Err(Error::Config(format!("no coefficient prediction for curve kind '{other}'"))),
        }
    }

    fn metadata(&self, backend_config: String) -> CurveMetadata {
        CurveMetadata::new(&self.domain, self.weight.as_ref(), backend_config)
    }

    /// The configured curve, plus its complement (`K` for `H` and vice versa) for unweighted contents.
    pub fn estimate(&self) -> Result<Vec<HeatContentCurve>> {
        let kind = self.config.estimate.kind;
        let primary = match self.config.estimate.backend {
            BackendTag::KernelExact => self.estimate_exact()?,
            BackendTag::Mc => self.estimate_mc()?,
            BackendTag::Grid => return self.estimate_grid(),
        };
        let mut out = vec![primary];
        if matches!(kind, CurveKind::H | CurveKind::K) && self.weight.is_none() {
            let comp = complement(&out[0], self.domain.volume()?)?;
            out.push(comp);
        }
        Ok(out)
    }

    fn estimate_exact(&self) -> Result<HeatContentCurve> {
        let dom = &self.domain;
        let kind = self.config.estimate.kind;
        let one = |f: &dyn Fn(f64) -> Result<f64>| -> Result<Vec<Estimate>> {
            self.times
                .iter()
                .map(|&t| Ok(Estimate::exact(f(t)?, BackendTag::KernelExact)))
                .collect()
        };
        let est = match kind {
            CurveKind::H => one(&|t| exact_heat_content(dom, t))?,
            CurveKind::K => {
                let vol = dom.volume()?;
                one(&|t| Ok(vol - exact_heat_content(dom, t)?))?
            }
            CurveKind::HChi => {
                let values = exact_weighted_content_curve(dom, &self.weight_or_unit(), &self.times)?;
                values.into_iter().map(|v| Estimate::exact(v, BackendTag::KernelExact)).collect()
            }
            CurveKind::Q => match dom.kind() {
                DomainKind::Interval { a, b } => one(&|t| Ok(interval_dirichlet_heat_content(t, b - a)))?,
                _ => {
                    return Err(Error::unsupported(
                        dom.model().name(),
                        format!("exact Dirichlet content of '{}'", dom.kind().name()),
                    ))
                }
            },
            CurveKind::G => {
                let mut c = exact_g_curve(dom, &self.weight_or_unit(), self.config.estimate.integrand, &self.times)?;
                c.metadata = self.metadata("kernel-exact".into());
                return Ok(c);
            }
            CurveKind::I if self.config.estimate.r == 0.0 => {
                let w = self.weight_or_unit();
                one(&|t| Ok(exact_deficits(dom, &w, t)?.0))?
            }
            other => {
                return Err(Error::unsupported(
                    dom.model().name(),
                    format!("exact '{other}' curves with r != 0"),
                ))
            }
        };
        HeatContentCurve::new(kind, self.times.clone(), est, self.metadata("kernel-exact".into()))
    }

    fn estimate_mc(&self) -> Result<HeatContentCurve> {
        let dom = &self.domain;
        let m = dom.model();
        let cfg = &self.config.sde;
        let e = &self.config.estimate;
        match e.kind {
            CurveKind::H | CurveKind::K | CurveKind::Q | CurveKind::HChi => {
                estimate_heat_content(m, dom, e.kind, self.weight.as_ref(), &self.times, cfg)
            }
            CurveKind::G | CurveKind::I | CurveKind::Lambda => {
                let functional = match e.kind {
                    CurveKind::G => BoundaryFunctional::G { v: e.integrand },
                    CurveKind::I => BoundaryFunctional::I { r: e.r },
                    _ => BoundaryFunctional::Lambda { r: e.r },
                };
                estimate_boundary_functional(m, dom, functional, &self.weight_or_unit(), &self.times, cfg)
            }
        }
    }

    fn estimate_grid(&self) -> Result<Vec<HeatContentCurve>> {
        let g = &self.config.grid;
        let t_max = *self.times.last().expect("non-empty ladder");
        let mut spec = GridSpec::for_domain(&self.domain, t_max, g.h, g.dt)?;
        spec.scheme = g.scheme;
        let sol = solve_heat(self.domain.model(), &self.domain, &spec, &self.times, self.weight.as_ref())?;
        let meta = self.metadata(serde_json::to_string(&spec).unwrap_or_default());
        let with_meta = |mut c: HeatContentCurve| {
            c.metadata = meta.clone();
            c
        };
        match self.config.estimate.kind {
            CurveKind::H => Ok(vec![with_meta(sol.h), with_meta(sol.k)]),
            CurveKind::K => Ok(vec![with_meta(sol.k), with_meta(sol.h)]),
            CurveKind::HChi => Ok(vec![with_meta(sol.weighted.expect("weight given"))]),
            other => Err(Error::unsupported(
                self.domain.model().name(),
                format!("grid estimates of '{other}'"),
            )),
        }
    }

    /// Fits the configured basis to `curve`, pinning `c₀` to its prediction if asked.
    pub fn fit(&self, curve: &HeatContentCurve) -> Result<AsymptoticFit> {
        let f = &self.config.fit;
        let pin = if f.pin_c0 {
            let exps = [0.0];
            let mut probe = self.clone();
            probe.config.fit.exponents = exps.to_vec();
            Some(probe.predicted_for_fit()?[0])
        } else {
            None
        };
        let window = f.window.or(Some((self.config.ladder.t_min, self.config.ladder.t_max)));
        fit_sqrt_t(curve, &f.exponents, window, pin)
    }

    /// Fit plus comparison; passes iff every checked exponent passes.
    pub fn verify(&self, curve: &HeatContentCurve) -> Result<Verification> {
        let fit = self.fit(curve)?;
        let predicted = self.predicted_for_fit()?;
        let report = compare(&fit, &predicted, self.config.fit.thresholds)?;
        let checked: Vec<f64> = if self.config.fit.check.is_empty() {
            fit.exponents.clone()
        } else {
            self.config.fit.check.clone()
        };
        for e in &checked {
            if report.row(*e).is_none() {
                return Err(Error::Config(format!("checked exponent {e} is not in the fit basis")));
            }
        }
        let pass = checked.iter().all(|e| report.row(*e).map_or(false, |r| r.pass));
        Ok(Verification {
            fit,
            report,
            checked,
            pass,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` (plus `<stem>.dat` when asked) into `dir`.
    pub fn write_results(&self, dir: &Path, curves: &[HeatContentCurve], plot_data: bool) -> Result<ResultsFile> {
        fs::create_dir_all(dir)?;
        let stem = dir.join(&self.config.name);
        let mut csv = String::new();
        for (i, c) in curves.iter().enumerate() {
            csv.push_str(&curve_csv(c, i == 0));
        }
        fs::write(stem.with_extension("csv"), csv)?;
        let record = ResultsFile {
            version: CODE_VERSION.into(),
            config: self.config.clone(),
            curves: curves.to_vec(),
            fit: None,
            report: None,
        };
        record.save(&stem.with_extension("json"))?;
        if plot_data {
            if let Some(c) = curves.first() {
                fs::write(stem.with_extension("dat"), plot_data_text(c))?;
            }
        }
        Ok(record)
    }

    pub fn results_path(&self, dir: &Path) -> PathBuf {
        dir.join(&self.config.name).with_extension("json")
    }
}

/// `ω − y` on the same samples; error bars and covariance carry over unchanged.
fn complement(curve: &HeatContentCurve, total: f64) -> Result<HeatContentCurve> {
    let kind = match curve.kind {
        CurveKind::H => CurveKind::K,
        CurveKind::K => CurveKind::H,
        other => return Err(Error::invalid(format!("'{other}' has no complement"))),
    };
    let est = curve
        .estimates
        .iter()
        .map(|e| Estimate {
            value: total - e.value,
            ..*e
        })
        .collect();
    let mut out = HeatContentCurve::new(kind, curve.times.clone(), est, curve.metadata.clone())?;
    out.covariance = curve.covariance.clone();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub fit: AsymptoticFit,
    pub report: ComparisonReport,
    pub checked: Vec<f64>,
    pub pass: bool,
}

/// JSON sidecar: resolved config, version, curves and (after `fit`/`verify`) the reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub version: String,
    pub config: ExperimentConfig,
    pub curves: Vec<HeatContentCurve>,
    pub fit: Option<AsymptoticFit>,
    pub report: Option<Verification>,
}

impl ResultsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad results file '{}': {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// CSV rows `t,value,stderr,n,kind,backend` (shortest round-trip float formatting).
pub fn curve_csv(curve: &HeatContentCurve, header: bool) -> String {
    let mut s = String::new();
    if header {
        s.push_str(CSV_HEADER);
        s.push('\n');
    }
    for (t, e) in curve.times.iter().zip(&curve.estimates) {
        s.push_str(&format!("{t:e},{:e},{:e},{},{},{}\n", e.value, e.stderr, e.n, curve.kind, e.backend));
    }
    s
}

/// Two-column `t value` text for gnuplot.
pub fn plot_data_text(curve: &HeatContentCurve) -> String {
    let mut s = format!("# t {}\n", curve.kind);
    for (t, e) in curve.times.iter().zip(&curve.estimates) {
        s.push_str(&format!("{t:e} {:e}\n", e.value));
    }
    s
}

/// Process exit code for an error: 2 for configuration problems, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Unsupported { .. }
        | Error::Characteristic { .. }
        | Error::Support(_)
        | Error::Cfl { .. }
        | Error::DimensionMismatch { .. }
        | Error::OutsideBand { .. }
        | Error::Io(_) => 2,
        _ => 3,
    }
}

/// Text listing of built-in models, domains and weights.
pub fn list_builtins() -> String {
    let mut s = String::from("models:\n");
    for k in ModelKind::ALL {
        s.push_str(&format!("  {:<12} {}\n", k.name(), k.description()));
    }
    s.push_str("domains:\n");
    for (name, model, params) in crate::domains::DOMAIN_SCHEMAS {
        s.push_str(&format!("  {name:<16} model={model:<11} {params}\n"));
    }
    s.push_str("weights:\n");
    s.push_str("  unit             chi = 1\n");
    s.push_str("  bump             center=[..] width=w | [..]  (product of C^inf bumps)\n");
    s.push_str("  product          factors=[{type=plateau|bump|radial_plateau|polynomial|radial_distance, ..}]\n");
    s.push_str("backends:\n  kernel-exact mc grid\n");
    s.push_str("curve kinds:\n  H K Q Hchi G I Lambda\n");
    s
}

/// Predicted coefficient table with the boundary integrals used.
pub fn prediction_table(p: &PredictedCoefficients) -> String {
    let mut s = String::new();
    // adding 0.0 turns −0.0 into 0.0
    for (i, c) in p.c.iter().map(|c| c + 0.0).enumerate() {
        s.push_str(&format!("c{i} = {c:.6}  ({c:.12e})\n"));
    }
    for (name, v) in &p.integrals {
        let v = v + 0.0;
        s.push_str(&format!("  {name} = {v:.9}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const DISC: &str = r#"
name = "disc"
[domain]
spec = "disc R=1"
[estimate]
backend = "kernel-exact"
kind = "H"
[fit]
exponents = [0.0, 0.5, 1.0, 1.5, 2.0]
check = [0.5, 1.5]
[fit.thresholds]
z_max = 3.0
rel_max = 1e-2
abs_floor = 1e-2
"#;

    #[test]
    fn parses_and_resolves() {
        let e = Experiment::from_toml(DISC).unwrap();
        assert_eq!(e.times.len(), 12);
        assert_eq!(e.domain.kind().name(), "disc");
        let back = ExperimentConfig::from_toml(&e.config.to_toml()).unwrap();
        assert_eq!(back, e.config);
    }

    #[test]
    fn config_errors_are_reported() {
        assert!(matches!(Experiment::from_toml("[domain]\nspec='blob'"), Err(Error::Config(_))));
        assert!(matches!(
            Experiment::from_toml("[model]\nname='heisenberg'\n[domain]\nspec='disc'"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Experiment::from_toml("[domain]\nspec='disc'\nbogus=1"),
            Err(Error::Config(_))
        ));
        let e = Experiment::from_toml("[domain]\nspec='disc'\n[ladder]\nt_min=1e-2\nt_max=1e-3\ncount=4");
        assert_eq!(exit_code(&e.unwrap_err()), 2);
    }

    #[test]
    fn exact_disc_pipeline_verifies() {
        let e = Experiment::from_toml(DISC).unwrap();
        let curves = e.estimate().unwrap();
        assert_eq!(curves[1].kind, CurveKind::K);
        for (h, k) in curves[0].estimates.iter().zip(&curves[1].estimates) {
            assert!((h.value + k.value - PI).abs() < 1e-12);
        }
        let v = e.verify(&curves[0]).unwrap();
        assert!(v.pass, "{}", v.report);
        let mut scaled = e.clone();
        scaled.config.fit.thresholds.rel_max = 1e-3;
        let wrong: Vec<f64> = e.predicted_for_fit().unwrap().iter().map(|p| 1.1 * p).collect();
        let rep = compare(&v.fit, &wrong, scaled.config.fit.thresholds).unwrap();
        assert!(!rep.row(0.5).unwrap().pass);
    }

    #[test]
    fn csv_is_stable() {
        let e = Experiment::from_toml("[domain]\nspec='interval a=0 b=1'\n[ladder]\nt_min=1e-3\nt_max=1e-2\ncount=3").unwrap();
        let c = e.estimate().unwrap();
        let text = curve_csv(&c[0], true);
        assert!(text.starts_with("t,value,stderr,n,kind,backend\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().ends_with(",0e0,1,H,kernel-exact"));
    }

    #[test]
    fn characteristic_domain_is_refused() {
        let e = Experiment::from_toml("[domain]\nspec='heis_ball R=1'").unwrap();
        let err = e.predict().unwrap_err();
        assert!(matches!(err, Error::Characteristic { .. }));
        assert_ne!(exit_code(&err), 0);
    }
}
