//! Experiment configuration: TOML parsing, defaults and up-front validation.
//!
//! A config is a flat list of keys plus an optional `[shape]` table.
//! Every error carries the line of the offending key.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use condbridge::airy::K_MAX;
use condbridge::barrier::{build_lower_approx, build_upper_approx, canonical, power_parabola, semicircle, ShapeFunction};
use condbridge::fsdiff::DiffusionConfig;
use condbridge::kernel::{finite_t_deviation, transfer_window, FCoefficient, SpectralTruncation};
use condbridge::mc::MAX_LATTICE_N;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AiryTable,
    Simulate,
    SampleBridge,
    Density,
    EntranceLaw,
    ScalingStudy,
    Monotonicity,
    Report,
}

impl Experiment {
    pub const ALL: [Self; 8] = [
        Self::AiryTable,
        Self::Simulate,
        Self::SampleBridge,
        Self::Density,
        Self::EntranceLaw,
        Self::ScalingStudy,
        Self::Monotonicity,
        Self::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::AiryTable => "airy-table",
            Self::Simulate => "simulate",
            Self::SampleBridge => "sample-bridge",
            Self::Density => "density",
            Self::EntranceLaw => "entrance-law",
            Self::ScalingStudy => "scaling-study",
            Self::Monotonicity => "monotonicity",
            Self::Report => "report",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Keys beyond the common ones that this experiment reads.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::AiryTable => &["modes"],
            Self::Simulate => &["dt", "n_steps", "n_paths", "record_every", "x0", "ks_threshold"],
            Self::SampleBridge => &[
                "n_steps",
                "n_paths",
                "max_attempts",
                "crossing_correction",
                "refinement_check",
                "refinement_attempts",
                "start",
                "end",
                "shape",
            ],
            Self::Density => &[
                "density",
                "modes",
                "window",
                "grid_max",
                "grid_panels",
                "tolerance",
                "f_coefficient",
                "start",
                "t_start",
                "t_end",
                "shape",
            ],
            Self::EntranceLaw => &["modes", "window", "horizons", "grid_max", "grid_points", "tolerance", "shape"],
            Self::ScalingStudy => &["horizons", "taus", "export_points", "containment_points"],
            Self::Monotonicity => &["lattice_n", "random_instances"],
            Self::Report => &["input_dir"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// `Ω²`.
    Stationary,
    /// Limit entrance/exit law `Ω G_{2N} Ω`.
    JointLimit,
    /// Entrance/exit law of the bridge above a power parabola.
    JointFinite,
    /// One-point law at `τT` above a power parabola.
    Marginal,
    /// Killed propagator above a power parabola.
    Killed,
    /// Transfer-operator entrance/exit law above a piecewise approximation.
    Transfer,
}

impl DensityKind {
    const ALL: [Self; 6] =
        [Self::Stationary, Self::JointLimit, Self::JointFinite, Self::Marginal, Self::Killed, Self::Transfer];

    pub fn name(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::JointLimit => "joint-limit",
            Self::JointFinite => "joint-finite",
            Self::Marginal => "marginal",
            Self::Killed => "killed",
            Self::Transfer => "transfer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Semicircle,
    PowerParabola,
    Tent,
    FlatTop,
    ConvexDip,
    CurvatureJump,
    UpperApprox,
    LowerApprox,
}

impl ShapeKind {
    const ALL: [Self; 8] = [
        Self::Semicircle,
        Self::PowerParabola,
        Self::Tent,
        Self::FlatTop,
        Self::ConvexDip,
        Self::CurvatureJump,
        Self::UpperApprox,
        Self::LowerApprox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Semicircle => "semicircle",
            Self::PowerParabola => "power-parabola",
            Self::Tent => "tent",
            Self::FlatTop => "flat-top",
            Self::ConvexDip => "convex-dip",
            Self::CurvatureJump => "curvature-jump",
            Self::UpperApprox => "upper-approx",
            Self::LowerApprox => "lower-approx",
        }
    }

    fn on_unit_interval(self) -> bool {
        matches!(self, Self::Tent | Self::FlatTop | Self::ConvexDip | Self::CurvatureJump)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Half-width `T` of the domain `[-T, T]`.
    pub t_horizon: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl ShapeSpec {
    pub fn build(&self) -> condbridge::Result<ShapeFunction> {
        let t = self.t_horizon;
        Ok(match self.kind {
            ShapeKind::Semicircle => semicircle(t)?,
            ShapeKind::PowerParabola => power_parabola(t, self.gamma)?,
            ShapeKind::Tent => canonical::tent(),
            ShapeKind::FlatTop => canonical::flat_top(),
            ShapeKind::ConvexDip => canonical::convex_dip(),
            ShapeKind::CurvatureJump => canonical::curvature_jump(),
            ShapeKind::UpperApprox => build_upper_approx(t, self.tau)?.to_shape_function(),
            ShapeKind::LowerApprox => build_lower_approx(t, self.tau)?.to_shape_function(),
        })
    }
}

/// Where a config came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File(PathBuf),
    CommandLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: Origin,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.origin, self.line, &self.key) {
            (Origin::CommandLine, _, Some(k)) => write!(f, "--{}: {}", flag_name(k), self.message),
            (Origin::CommandLine, _, None) => write!(f, "{}", self.message),
            (Origin::File(p), Some(l), Some(k)) => write!(f, "{}:{l}: `{k}`: {}", p.display(), self.message),
            (Origin::File(p), Some(l), None) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Origin::File(p), None, _) => write!(f, "{}: {}", p.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Command-line flag carrying config key `key`.
pub fn flag_name(key: &str) -> String {
    match key {
        "kind" => "shape".into(),
        "T" => "horizon".into(),
        k => k.replace('_', "-"),
    }
}

type Field<T> = Option<Spanned<T>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    kind: Spanned<String>,
    #[serde(rename = "T")]
    t_horizon: Field<f64>,
    tau: Field<f64>,
    gamma: Field<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Spanned<String>,
    seed: Field<u64>,
    test_mode: Field<bool>,
    output_dir: Field<String>,
    workers: Field<usize>,
    modes: Field<usize>,
    dt: Field<f64>,
    n_steps: Field<usize>,
    n_paths: Field<usize>,
    record_every: Field<usize>,
    x0: Field<f64>,
    ks_threshold: Field<f64>,
    max_attempts: Field<u64>,
    crossing_correction: Field<bool>,
    refinement_check: Field<bool>,
    refinement_attempts: Field<u64>,
    density: Field<String>,
    window: Field<f64>,
    grid_max: Field<f64>,
    grid_panels: Field<usize>,
    grid_points: Field<usize>,
    tolerance: Field<f64>,
    f_coefficient: Field<String>,
    start: Field<f64>,
    end: Field<f64>,
    t_start: Field<f64>,
    t_end: Field<f64>,
    horizons: Field<Vec<f64>>,
    taus: Field<Vec<f64>>,
    export_points: Field<usize>,
    containment_points: Field<usize>,
    lattice_n: Field<Vec<usize>>,
    random_instances: Field<usize>,
    input_dir: Field<String>,
    shape: Field<RawShape>,
}

impl RawConfig {
    /// `(key, span)` of every key that is present.
    fn present(&self) -> Vec<(&'static str, Range<usize>)> {
        macro_rules! collect {
            ($($k:ident),*) => {{
                let mut v = Vec::new();
                $(if let Some(s) = &self.$k { v.push((stringify!($k), s.span())); })*
                v
            }};
        }
        collect!(
            seed, test_mode, output_dir, workers, modes, dt, n_steps, n_paths, record_every, x0, ks_threshold,
            max_attempts, crossing_correction, refinement_check, refinement_attempts, density, window, grid_max,
            grid_panels, grid_points, tolerance, f_coefficient, start, end, t_start, t_end, horizons, taus,
            export_points, containment_points, lattice_n, random_instances, input_dir, shape
        )
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: Experiment,
    pub origin: Origin,
    /// Exact source text; its SHA-256 is the config hash.
    pub text: String,
    pub seed: u64,
    pub test_mode: bool,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub modes: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub record_every: usize,
    pub x0: Option<f64>,
    pub ks_threshold: Option<f64>,
    pub max_attempts: u64,
    pub crossing_correction: bool,
    pub refinement_check: bool,
    pub refinement_attempts: u64,
    pub density: DensityKind,
    pub window: f64,
    pub grid_max: f64,
    pub grid_panels: usize,
    pub grid_points: usize,
    pub tolerance: f64,
    pub f_coefficient: FCoefficient,
    pub start: f64,
    /// Height above the barrier at the right end of a sampled bridge.
    pub end: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub horizons: Vec<f64>,
    pub taus: Vec<f64>,
    pub export_points: usize,
    pub containment_points: usize,
    pub lattice_n: Vec<usize>,
    pub random_instances: usize,
    pub input_dir: Option<PathBuf>,
    pub shape: Option<ShapeSpec>,
}

struct Ctx<'a> {
    src: &'a str,
    origin: &'a Origin,
}

impl Ctx<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err(&self, key: &str, span: &Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.clone(),
            line: Some(self.line(span)),
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn get<T: Clone>(&self, field: &Field<T>, default: T) -> T {
        field.as_ref().map_or(default, |s| s.get_ref().clone())
    }

    fn positive(&self, key: &str, field: &Field<f64>, default: f64) -> Result<f64, ConfigError> {
        match field {
            Some(s) if !(*s.get_ref() > 0.0 && s.get_ref().is_finite()) => {
                Err(self.err(key, &s.span(), format!("must be a positive finite number, got {}", s.get_ref())))
            }
            _ => Ok(self.get(field, default)),
        }
    }

    fn count(&self, key: &str, field: &Field<usize>, default: usize, min: usize, max: usize) -> Result<usize, ConfigError> {
        let v = self.get(field, default);
        if v < min || v > max {
            let span = field.as_ref().map(|s| s.span()).unwrap_or(0..0);
            return Err(self.err(key, &span, format!("must lie in {min}..={max}, got {v}")));
        }
        Ok(v)
    }
}

impl Config {
    /// Parses and validates `src`. Nothing is touched on disk.
    pub fn parse(src: &str, origin: Origin) -> Result<Self, ConfigError> {
        let ctx = Ctx { src, origin: &origin };
        let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: e.span().map(|s| ctx.line(&s)),
            key: None,
            message: e.message().trim().to_string(),
        })?;
        let exp_span = raw.experiment.span();
        let experiment = Experiment::parse(raw.experiment.get_ref()).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            ctx.err(
                "experiment",
                &exp_span,
                format!("unknown experiment `{}`; expected one of {}", raw.experiment.get_ref(), names.join(", ")),
            )
        })?;
        const COMMON: [&str; 4] = ["seed", "test_mode", "output_dir", "workers"];
        for (key, span) in raw.present() {
            if !COMMON.contains(&key) && !experiment.keys().contains(&key) {
                return Err(ctx.err(key, &span, format!("not used by experiment `{}`", experiment.name())));
            }
        }
        Self::build(raw, experiment, &ctx).map(|mut c| {
            c.text = src.to_string();
            c
        })
    }

    fn build(raw: RawConfig, experiment: Experiment, ctx: &Ctx) -> Result<Self, ConfigError> {
        use Experiment as E;
        let density_default = DensityKind::JointLimit;
        let density = match &raw.density {
            None => density_default,
            Some(s) => DensityKind::ALL.into_iter().find(|d| d.name() == s.get_ref()).ok_or_else(|| {
                let names: Vec<&str> = DensityKind::ALL.iter().map(|d| d.name()).collect();
                ctx.err("density", &s.span(), format!("unknown density `{}`; expected one of {}", s.get_ref(), names.join(", ")))
            })?,
        };
        let f_coefficient = match &raw.f_coefficient {
            None => FCoefficient::Dimensional,
            Some(s) => match s.get_ref().as_str() {
                "dimensional" => FCoefficient::Dimensional,
                "cube-root" => FCoefficient::CubeRoot,
                other => {
                    return Err(ctx.err(
                        "f_coefficient",
                        &s.span(),
                        format!("unknown variant `{other}`; expected `dimensional` or `cube-root`"),
                    ))
                }
            },
        };
        let (n_steps_default, n_paths_default) = match experiment {
            E::Simulate => (10_000, 100),
            _ => (1000, 1),
        };
        let (horizons_default, grid_panels_default, tolerance_default) = match experiment {
            E::ScalingStudy => (vec![1e4, 1e5, 1e6], 24, 0.0),
            E::EntranceLaw => (vec![10.0, 30.0, 100.0], 24, 1e-3),
            E::Density if density == DensityKind::Transfer => (vec![], 40, 1e-4),
            _ => (vec![], 24, 1e-6),
        };
        let mut cfg = Config {
            experiment,
            origin: ctx.origin.clone(),
            text: String::new(),
            seed: ctx.get(&raw.seed, 0),
            test_mode: ctx.get(&raw.test_mode, false),
            output_dir: PathBuf::from(ctx.get(&raw.output_dir, "condbridge-out".to_string())),
            workers: ctx.count("workers", &raw.workers, 1, 1, 1024)?,
            modes: ctx.count("modes", &raw.modes, 64, 2, K_MAX - 1)?,
            dt: ctx.positive("dt", &raw.dt, 1e-3)?,
            n_steps: ctx.count("n_steps", &raw.n_steps, n_steps_default, 2, 100_000_000)?,
            n_paths: ctx.count("n_paths", &raw.n_paths, n_paths_default, 1, 100_000_000)?,
            record_every: ctx.count("record_every", &raw.record_every, 1, 1, usize::MAX)?,
            x0: raw.x0.as_ref().map(|_| ctx.positive("x0", &raw.x0, 1.0)).transpose()?,
            ks_threshold: raw.ks_threshold.as_ref().map(|_| ctx.positive("ks_threshold", &raw.ks_threshold, 1.0)).transpose()?,
            max_attempts: ctx.get(&raw.max_attempts, 1_000_000),
            crossing_correction: ctx.get(&raw.crossing_correction, false),
            refinement_check: ctx.get(&raw.refinement_check, true),
            refinement_attempts: ctx.get(&raw.refinement_attempts, 20_000),
            density,
            window: ctx.positive("window", &raw.window, 1.0)?,
            grid_max: ctx.positive("grid_max", &raw.grid_max, if experiment == E::EntranceLaw { 6.0 } else { 8.0 })?,
            grid_panels: ctx.count("grid_panels", &raw.grid_panels, grid_panels_default, 2, 10_000)?,
            grid_points: ctx.count("grid_points", &raw.grid_points, 25, 2, 10_000)?,
            tolerance: match &raw.tolerance {
                Some(_) => ctx.positive("tolerance", &raw.tolerance, 1.0)?,
                None => tolerance_default,
            },
            f_coefficient,
            start: ctx.get(&raw.start, if experiment == E::SampleBridge { 0.0 } else { 0.5 }),
            end: ctx.get(&raw.end, 0.0),
            t_start: ctx.get(&raw.t_start, 0.0),
            t_end: ctx.get(&raw.t_end, 1.0),
            horizons: ctx.get(&raw.horizons, horizons_default),
            taus: ctx.get(&raw.taus, vec![0.0, -0.5]),
            export_points: ctx.get(&raw.export_points, 0),
            containment_points: ctx.count("containment_points", &raw.containment_points, 100_000, 2, 100_000_000)?,
            lattice_n: ctx.get(&raw.lattice_n, vec![4, 6, 8]),
            random_instances: ctx.get(&raw.random_instances, 200),
            input_dir: raw.input_dir.as_ref().map(|s| PathBuf::from(s.get_ref())),
            shape: None,
        };
        if cfg.max_attempts == 0 {
            return Err(ctx.err("max_attempts", &span(&raw.max_attempts), "must be positive"));
        }
        if cfg.refinement_attempts == 0 {
            return Err(ctx.err("refinement_attempts", &span(&raw.refinement_attempts), "must be positive"));
        }
        if cfg.export_points == 1 {
            return Err(ctx.err("export_points", &span(&raw.export_points), "must be 0 (no export) or at least 2"));
        }
        cfg.shape = raw.shape.as_ref().map(|s| shape_spec(s, ctx)).transpose()?;

        match experiment {
            E::Simulate => {
                DiffusionConfig::new(cfg.dt, cfg.n_steps)
                    .map_err(|e| ctx.err("dt", &span(&raw.dt), e.to_string()))?;
            }
            E::SampleBridge => {
                let s = cfg.shape.as_ref().ok_or_else(|| missing(ctx, "shape", "sample-bridge needs a [shape] table"))?;
                s.build().map_err(|e| ctx.err("shape", &span(&raw.shape), e.to_string()))?;
                for (key, v, f) in [("start", cfg.start, &raw.start), ("end", cfg.end, &raw.end)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(ctx.err(key, &span(f), format!("height above the barrier must be finite and >= 0, got {v}")));
                    }
                }
                if (cfg.n_paths as u64) > cfg.max_attempts {
                    return Err(ctx.err("n_paths", &span(&raw.n_paths), "exceeds max_attempts"));
                }
            }
            E::Density => cfg.check_density(&raw, ctx)?,
            E::EntranceLaw => cfg.check_entrance_law(&raw, ctx)?,
            E::ScalingStudy => cfg.check_scaling_study(&raw, ctx)?,
            E::Monotonicity => {
                let bad = cfg.lattice_n.iter().find(|&&n| n == 0 || n > MAX_LATTICE_N);
                if cfg.lattice_n.is_empty() || bad.is_some() {
                    return Err(ctx.err(
                        "lattice_n",
                        &span(&raw.lattice_n),
                        format!("needs one or more sizes in 1..={MAX_LATTICE_N}"),
                    ));
                }
            }
            E::Report => {
                if cfg.input_dir.is_none() {
                    return Err(missing(ctx, "input_dir", "report needs `input_dir`"));
                }
            }
            E::AiryTable => {}
        }
        Ok(cfg)
    }

    fn check_density(&mut self, raw: &RawConfig, ctx: &Ctx) -> Result<(), ConfigError> {
        let shape_span = raw.shape.as_ref().map(Spanned::span).unwrap_or(0..0);
        let need = |kinds: &[ShapeKind]| -> Result<&ShapeSpec, ConfigError> {
            let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
            match &self.shape {
                None => Err(missing(ctx, "shape", format!("density `{}` needs a [shape] table", self.density.name()))),
                Some(s) if !kinds.contains(&s.kind) => Err(ctx.err(
                    "shape",
                    &shape_span,
                    format!("density `{}` needs shape kind {}", self.density.name(), names.join(" or ")),
                )),
                Some(s) => Ok(s),
            }
        };
        match self.density {
            DensityKind::Stationary | DensityKind::JointLimit => {
                if self.shape.is_some() {
                    return Err(ctx.err("shape", &shape_span, format!("density `{}` takes no shape", self.density.name())));
                }
            }
            DensityKind::JointFinite | DensityKind::Marginal => {
                let s = need(&[ShapeKind::PowerParabola])?;
                let tr = SpectralTruncation::new(self.modes).map_err(|e| ctx.err("modes", &(0..0), e.to_string()))?;
                let n = if self.density == DensityKind::Marginal { 1e-9 } else { self.window };
                finite_t_deviation(1.0, 1.0, n, s.t_horizon, s.tau, s.gamma, &tr)
                    .map_err(|e| ctx.err("shape", &shape_span, e.to_string()))?;
            }
            DensityKind::Killed => {
                let s = need(&[ShapeKind::PowerParabola])?;
                let ok = -s.t_horizon <= self.t_start && self.t_start < self.t_end && self.t_end <= s.t_horizon;
                if !ok {
                    let sp = raw.t_end.as_ref().or(raw.t_start.as_ref()).map(Spanned::span).unwrap_or(0..0);
                    return Err(ctx.err("t_end", &sp, format!("need -T <= t_start < t_end <= T with T = {}", s.t_horizon)));
                }
                if !(self.start >= 0.0) {
                    let sp = raw.start.as_ref().map(Spanned::span).unwrap_or(0..0);
                    return Err(ctx.err("start", &sp, "start height must be nonnegative"));
                }
            }
            DensityKind::Transfer => {
                let s = need(&[ShapeKind::UpperApprox, ShapeKind::LowerApprox])?;
                let ps = match s.kind {
                    ShapeKind::UpperApprox => build_upper_approx(s.t_horizon, s.tau),
                    _ => build_lower_approx(s.t_horizon, s.tau),
                }
                .map_err(|e| ctx.err("shape", &shape_span, e.to_string()))?;
                transfer_window(&ps, s.tau * s.t_horizon, self.window)
                    .map_err(|e| ctx.err("shape", &shape_span, e.to_string()))?;
            }
        }
        Ok(())
    }

    fn check_entrance_law(&mut self, raw: &RawConfig, ctx: &Ctx) -> Result<(), ConfigError> {
        let shape_span = raw.shape.as_ref().map(Spanned::span).unwrap_or(0..0);
        let spec = match &self.shape {
            None => ShapeSpec { kind: ShapeKind::PowerParabola, t_horizon: 1.0, tau: 0.0, gamma: 2.0 },
            Some(s) if s.kind != ShapeKind::PowerParabola => {
                return Err(ctx.err("shape", &shape_span, "entrance-law needs shape kind power-parabola"))
            }
            Some(s) => s.clone(),
        };
        if raw.shape.as_ref().is_some_and(|s| s.get_ref().t_horizon.is_some()) {
            return Err(ctx.err("shape", &shape_span, "entrance-law takes T from `horizons`; drop `T` from [shape]"));
        }
        self.shape = Some(spec.clone());
        let hspan = raw.horizons.as_ref().map(Spanned::span).unwrap_or(0..0);
        if self.horizons.len() < 2 {
            return Err(ctx.err("horizons", &hspan, "needs at least two horizons"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ctx.err("horizons", &hspan, "must be strictly increasing"));
        }
        let tr = SpectralTruncation::new(self.modes).map_err(|e| ctx.err("modes", &(0..0), e.to_string()))?;
        for &t in &self.horizons {
            finite_t_deviation(1.0, 1.0, self.window, t, spec.tau, spec.gamma, &tr)
                .map_err(|e| ctx.err("horizons", &hspan, format!("T = {t}: {e}")))?;
        }
        Ok(())
    }

    fn check_scaling_study(&self, raw: &RawConfig, ctx: &Ctx) -> Result<(), ConfigError> {
        let hspan = raw.horizons.as_ref().map(Spanned::span).unwrap_or(0..0);
        let tspan = raw.taus.as_ref().map(Spanned::span).unwrap_or(0..0);
        if self.horizons.is_empty() {
            return Err(ctx.err("horizons", &hspan, "needs at least one horizon"));
        }
        if self.taus.is_empty() {
            return Err(ctx.err("taus", &tspan, "needs at least one tau"));
        }
        for &t in &self.horizons {
            for &tau in &self.taus {
                build_upper_approx(t, tau)
                    .and_then(|_| build_lower_approx(t, tau))
                    .map_err(|e| ctx.err("taus", &tspan, format!("T = {t}, tau = {tau}: {e}")))?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the source text, lowercase hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        format!("{:x}", Sha256::digest(self.text.as_bytes()))
    }
}

fn span<T>(f: &Field<T>) -> Range<usize> {
    f.as_ref().map(Spanned::span).unwrap_or(0..0)
}

fn missing(ctx: &Ctx, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { origin: ctx.origin.clone(), line: None, key: Some(key.into()), message: message.into() }
}

fn shape_spec(raw: &Spanned<RawShape>, ctx: &Ctx) -> Result<ShapeSpec, ConfigError> {
    let s = raw.get_ref();
    let kind = ShapeKind::ALL.into_iter().find(|k| k.name() == s.kind.get_ref()).ok_or_else(|| {
        let names: Vec<&str> = ShapeKind::ALL.iter().map(|k| k.name()).collect();
        ctx.err("kind", &s.kind.span(), format!("unknown shape `{}`; expected one of {}", s.kind.get_ref(), names.join(", ")))
    })?;
    let t_default = if kind.on_unit_interval() { 1.0 } else { 10.0 };
    let t_horizon = ctx.positive("T", &s.t_horizon, t_default)?;
    if kind.on_unit_interval() && t_horizon != 1.0 {
        let sp = s.t_horizon.as_ref().map(Spanned::span).unwrap_or(0..0);
        return Err(ctx.err("T", &sp, format!("shape `{}` lives on [-1, 1]; T must be 1", kind.name())));
    }
    let tau = ctx.get(&s.tau, 0.0);
    if !(tau > -1.0 && tau < 1.0) {
        let sp = s.tau.as_ref().map(Spanned::span).unwrap_or(0..0);
        return Err(ctx.err("tau", &sp, format!("must lie in (-1, 1), got {tau}")));
    }
    let gamma = ctx.get(&s.gamma, 2.0);
    if !gamma.is_finite() {
        let sp = s.gamma.as_ref().map(Spanned::span).unwrap_or(0..0);
        return Err(ctx.err("gamma", &sp, "must be finite"));
    }
    Ok(ShapeSpec { kind, t_horizon, tau, gamma })
}
