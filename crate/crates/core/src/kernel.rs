//! Spectral kernels of the half-line Airy operator.
//!
//! The operator `H = -½∂² + ½x - ½ω_1` on `[0, ∞)` with Dirichlet boundary
//! has eigenfunctions `Ω_k(x) = Ai(x - ω_{k+1}) / Ai'(-ω_{k+1})` and
//! eigenvalues `(ω_{k+1} - ω_1)/2`, so `HΩ = 0` and `G_t Ω = Ω`. All kernels
//! here are truncated eigen-expansions over a shared [`SpectralTruncation`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::airy::{ai, ai_prime, airy_zero, ground_state, omega1, AiryTable, K_MAX};
use crate::barrier::{PiecewiseShape, ScalingFrame, ShapeFunction};
use crate::error::{domain, Error, Result};
use crate::quad::Axis;

/// Magnitude below which truncation-induced negative kernel values are
/// clamped silently (but counted).
pub const CLAMP_LIMIT: f64 = 1e-8;

/// Remainder-bound constant used by the tests and reports.
pub const REMAINDER_A: f64 = 0.3;

#[derive(Debug, Default)]
struct ClampCounters {
    small: AtomicU64,
    large: AtomicU64,
}

/// `K` retained modes plus a Gauss–Legendre grid on `[0, x_max]` with
/// `x_max = ω_{K+1} + 10`, 32 nodes per unit length.
#[derive(Debug, Clone)]
pub struct SpectralTruncation {
    zeros: Vec<f64>,
    derivs: Vec<f64>,
    x_max: f64,
    axis: Axis,
    counters: Arc<ClampCounters>,
}

/// Clamp counters of a [`SpectralTruncation`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClampDiagnostics {
    /// Negative values of magnitude at most [`CLAMP_LIMIT`] set to 0.
    pub clamped: u64,
    /// Negative values larger than [`CLAMP_LIMIT`] (also set to 0).
    pub large_negatives: u64,
}

impl SpectralTruncation {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k + 1 > K_MAX {
            return domain(format!("truncation order {k} outside 1..{K_MAX}"));
        }
        Self::from_table(&AiryTable::new(k + 1)?, k)
    }

    /// Uses the first `k` modes of `table`, which must hold at least
    /// `k + 1` zeros.
    pub fn from_table(table: &AiryTable, k: usize) -> Result<Self> {
        if k == 0 || table.len() < k + 1 {
            return domain(format!("truncation order {k} needs a table of {} zeros", k + 1));
        }
        let zeros = table.zeros()[..k].to_vec();
        let derivs = table.deriv_at_zeros()[..k].to_vec();
        let x_max = table.omega(k + 1) + 10.0;
        let panels = (2.0 * x_max).ceil() as usize;
        let axis = Axis::composite(0.0, x_max, panels, 16);
        Ok(Self { zeros, derivs, x_max, axis, counters: Arc::default() })
    }

    /// Number of retained modes `K`.
    pub fn k(&self) -> usize {
        self.zeros.len()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Quadrature grid on `[0, x_max]`.
    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    /// `ω_j`, 1-based.
    pub fn omega(&self, j: usize) -> f64 {
        self.zeros[j - 1]
    }

    /// Eigenvalue `(ω_{k+1} - ω_1)/2` of mode `k` (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        0.5 * (self.zeros[k] - self.zeros[0])
    }

    /// `Ω_k(x)` for a retained mode.
    pub fn mode(&self, k: usize, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        ai(x - self.zeros[k]) / self.derivs[k]
    }

    /// `Ω_0(x), …, Ω_{K-1}(x)`.
    pub fn modes(&self, x: f64) -> Vec<f64> {
        (0..self.k()).map(|k| self.mode(k, x)).collect()
    }

    /// `e^{-λ_k t}` for every mode.
    pub fn decay(&self, t: f64) -> Vec<f64> {
        (0..self.k()).map(|k| (-self.eigenvalue(k) * t).exp()).collect()
    }

    pub fn diagnostics(&self) -> ClampDiagnostics {
        ClampDiagnostics {
            clamped: self.counters.small.load(Ordering::Relaxed),
            large_negatives: self.counters.large.load(Ordering::Relaxed),
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        if v >= 0.0 {
            return v;
        }
        if v >= -CLAMP_LIMIT {
            self.counters.small.fetch_add(1, Ordering::Relaxed);
        } else {
            self.counters.large.fetch_add(1, Ordering::Relaxed);
        }
        0.0
    }

    fn spectral_sum(&self, x: f64, y: f64, weights: &[f64]) -> f64 {
        weights.iter().enumerate().map(|(k, w)| w * (self.mode(k, x) * self.mode(k, y))).sum()
    }
}

/// Tabulated one- or two-point density. Two-point values are stored
/// row-major with `x` as the row index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub x_weights: Vec<f64>,
    pub ys: Option<Vec<f64>>,
    pub y_weights: Option<Vec<f64>>,
    pub values: Vec<f64>,
    pub metadata: DensityMetadata,
}

/// Numerical provenance of a [`DensityGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMetadata {
    pub modes: usize,
    pub resolution: usize,
    pub f_coefficient: Option<FCoefficient>,
    pub clamps: ClampDiagnostics,
    /// Estimated discretization error (relative change of the first two
    /// moments under halved resolution), when computed.
    pub discretization_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub converged: bool,
}

impl DensityGrid {
    pub fn one_point(axis: &Axis, values: Vec<f64>, metadata: DensityMetadata) -> Result<Self> {
        if values.len() != axis.len() || values.iter().any(|v| !(*v >= 0.0)) {
            return domain("density values must be nonnegative and match the grid");
        }
        Ok(Self {
            xs: axis.points.clone(),
            x_weights: axis.weights.clone(),
            ys: None,
            y_weights: None,
            values,
            metadata,
        })
    }

    pub fn two_point(xa: &Axis, ya: &Axis, values: Vec<f64>, metadata: DensityMetadata) -> Result<Self> {
        if values.len() != xa.len() * ya.len() || values.iter().any(|v| !(*v >= 0.0)) {
            return domain("density values must be nonnegative and match the grid");
        }
        Ok(Self {
            xs: xa.points.clone(),
            x_weights: xa.weights.clone(),
            ys: Some(ya.points.clone()),
            y_weights: Some(ya.weights.clone()),
            values,
            metadata,
        })
    }

    pub fn is_joint(&self) -> bool {
        self.ys.is_some()
    }

    /// Value at grid indices `(i, j)`; `j` is ignored for one-point grids.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match &self.ys {
            Some(ys) => self.values[i * ys.len() + j],
            None => self.values[i],
        }
    }

    /// Quadrature mass.
    pub fn mass(&self) -> f64 {
        match &self.y_weights {
            Some(wy) => self
                .x_weights
                .iter()
                .enumerate()
                .map(|(i, wx)| wx * wy.iter().enumerate().map(|(j, w)| w * self.at(i, j)).sum::<f64>())
                .sum(),
            None => self.x_weights.iter().zip(&self.values).map(|(w, v)| w * v).sum(),
        }
    }

    /// Marginal of the first variable (the grid itself for one-point data).
    pub fn marginal_x(&self) -> Vec<f64> {
        match &self.y_weights {
            Some(wy) => (0..self.xs.len())
                .map(|i| wy.iter().enumerate().map(|(j, w)| w * self.at(i, j)).sum())
                .collect(),
            None => self.values.clone(),
        }
    }

    /// Marginal of the second variable; `None` for one-point data.
    pub fn marginal_y(&self) -> Option<Vec<f64>> {
        let ys = self.ys.as_ref()?;
        Some(
            (0..ys.len())
                .map(|j| self.x_weights.iter().enumerate().map(|(i, w)| w * self.at(i, j)).sum())
                .collect(),
        )
    }
}

/// `Ω_k(x) = Ai(x - ω_{k+1}) / Ai'(-ω_{k+1})`, `k ≥ 0`.
pub fn eigenfunction(k: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return domain(format!("eigenfunction needs x >= 0, got {x}"));
    }
    if k + 1 > K_MAX {
        return domain(format!("mode {k} beyond the zero table"));
    }
    let w = airy_zero(k + 1)?;
    Ok(ai(x - w) / ai_prime(-w))
}

fn check_points(pts: &[f64]) -> Result<()> {
    match pts.iter().find(|p| !(**p >= 0.0)) {
        Some(p) => domain(format!("kernel arguments must be >= 0, got {p}")),
        None => Ok(()),
    }
}

/// Heat kernel `G(x, y; t) = Σ_k e^{-(ω_{k+1} - ω_1)t/2} Ω_k(x) Ω_k(y)`.
pub fn heat_kernel(x: f64, y: f64, t: f64, trunc: &SpectralTruncation) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    check_points(&[x, y])?;
    Ok(trunc.clamp(trunc.spectral_sum(x, y, &trunc.decay(t))))
}

/// `G(x_i, y_j; t)` for all pairs, row-major in `x`.
pub fn heat_kernel_matrix(xs: &[f64], ys: &[f64], t: f64, trunc: &SpectralTruncation) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    check_points(xs)?;
    check_points(ys)?;
    let decay = trunc.decay(t);
    let my: Vec<Vec<f64>> = ys.par_iter().map(|&y| trunc.modes(y)).collect();
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let mx = trunc.modes(x);
            my.iter()
                .map(|m| trunc.clamp(decay.iter().zip(&mx).zip(m).map(|((d, a), b)| d * (a * b)).sum()))
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// `lim_{ε→0} G(ε, x; t)/ε = Σ_k e^{-λ_k t} Ω_k(x)`, using `Ω_k'(0) = 1`.
pub fn boundary_kernel(x: f64, t: f64, trunc: &SpectralTruncation) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("boundary kernel needs t > 0, got {t}"));
    }
    check_points(&[x])?;
    let d = trunc.decay(t);
    Ok(trunc.clamp(d.iter().enumerate().map(|(k, w)| w * trunc.mode(k, x)).sum()))
}

/// `lim_{ε→0} G(ε, ε; t)/ε² = Σ_k e^{-λ_k t}`.
pub fn boundary_mass(t: f64, trunc: &SpectralTruncation) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("boundary kernel needs t > 0, got {t}"));
    }
    Ok(trunc.decay(t).iter().sum())
}

/// Coefficient of the cubic slope bracket in the Girsanov exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FCoefficient {
    /// `1/(6κ)`, from `∫ g'² dt = -[g'³]/(3κ)` when `g'' = -κ`.
    #[default]
    Dimensional,
    /// `1/(6κ^{1/3})`.
    CubeRoot,
}

impl FCoefficient {
    pub fn value(self, kappa: f64) -> f64 {
        match self {
            Self::Dimensional => 1.0 / (6.0 * kappa),
            Self::CubeRoot => 1.0 / (6.0 * kappa.cbrt()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dimensional => "dimensional",
            Self::CubeRoot => "cube-root",
        }
    }
}

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(t2 > t1) {
        return domain(format!("need t1 < t2, got t1 = {t1}, t2 = {t2}"));
    }
    Ok(())
}

/// `Ŵ(x_2, t_2 | x_1, t_1) = v_s Σ_k e^{-ω_k Γ} Ai(v_s x_1 - ω_k) Ai(v_s x_2 - ω_k) / Ai'(-ω_k)²`
/// with `Γ = ½(t_2 - t_1) h_s`.
pub fn w_hat(x1: f64, t1: f64, x2: f64, t2: f64, frame: &ScalingFrame, trunc: &SpectralTruncation) -> Result<f64> {
    check_times(t1, t2)?;
    check_points(&[x1, x2])?;
    let gamma = 0.5 * (t2 - t1) * frame.h_s;
    Ok(frame.v_s * (-omega1() * gamma).exp() * scaled_sum(x1, x2, gamma, frame.v_s, trunc))
}

fn scaled_sum(x1: f64, x2: f64, gamma: f64, v: f64, trunc: &SpectralTruncation) -> f64 {
    trunc.clamp(trunc.spectral_sum(v * x1, v * x2, &trunc.decay(2.0 * gamma)))
}

/// Girsanov exponent for a parabolic barrier `g` with `g'' = -κ`:
/// `F = x_1 g'(t_1) - x_2 g'(t_2) - C(κ) [g'(t_1)³ - g'(t_2)³]`.
pub fn f_exponent(
    x1: f64,
    t1: f64,
    x2: f64,
    t2: f64,
    shape: &ShapeFunction,
    variant: FCoefficient,
) -> Result<f64> {
    check_times(t1, t2)?;
    let kappa = -shape.d2(0.5 * (t1 + t2))?;
    if !(kappa > 0.0) {
        return Err(Error::Regime(format!("barrier is not concave between {t1} and {t2}")));
    }
    let (g1, g2) = (shape.d1_sided(t1)?.1, shape.d1_sided(t2)?.0);
    Ok(x1 * g1 - x2 * g2 - variant.value(kappa) * (g1.powi(3) - g2.powi(3)))
}

/// Killed propagator `W = Ŵ e^F` of Brownian motion above a parabolic
/// barrier, in heights above the barrier. Its mass in `x_2` is the
/// survival probability, not 1.
pub fn w_density(
    x1: f64,
    t1: f64,
    x2: f64,
    t2: f64,
    shape: &ShapeFunction,
    variant: FCoefficient,
    trunc: &SpectralTruncation,
) -> Result<f64> {
    check_points(&[x1, x2])?;
    let f = f_exponent(x1, t1, x2, t2, shape, variant)?;
    let kappa = -shape.d2(0.5 * (t1 + t2))?;
    let frame = ScalingFrame::from_curvature(0.0, 0.0, kappa)?;
    let gamma = 0.5 * (t2 - t1) * frame.h_s;
    let s = scaled_sum(x1, x2, gamma, frame.v_s, trunc);
    Ok(frame.v_s * s * (f - omega1() * gamma).exp())
}

/// `R⁰_Γ(y) = min{y e^{-aΓ}, e^{-a y Γ^{1/3}}}`.
pub fn remainder_bound(y: f64, gamma: f64, a: f64) -> f64 {
    (y * (-a * gamma).exp()).min((-a * y * gamma.cbrt()).exp())
}

/// `R_Γ(y_1, y_2) = Σ_{k≥2} Φ_k(y_1) Φ_k(y_2)` over the retained modes,
/// `Φ_k(y) = e^{-(ω_k - ω_1)Γ/2} Ai(y - ω_k) / Ai'(-ω_k)`.
pub fn remainder_tail(y1: f64, y2: f64, gamma: f64, trunc: &SpectralTruncation) -> f64 {
    let d = trunc.decay(2.0 * gamma);
    (1..trunc.k()).map(|k| d[k] * trunc.mode(k, y1) * trunc.mode(k, y2)).sum()
}

/// Limit entrance/exit density `ρ_A(ξ_1, ξ_2) = Ω(ξ_2) G(ξ_2, ξ_1; 2N) Ω(ξ_1)`.
pub fn joint_entrance_exit_density(xi1: f64, xi2: f64, n: f64, trunc: &SpectralTruncation) -> Result<f64> {
    if !(n > 0.0) {
        return domain(format!("window half-width must be positive, got {n}"));
    }
    Ok(ground_state(xi2) * heat_kernel(xi2, xi1, 2.0 * n, trunc)? * ground_state(xi1))
}

/// Effective times of a bridge above `g_{T,γ}` pinned on the barrier at
/// `±T`, in the frame at `τT`: `(T(1+τ)h_s, T(1-τ)h_s)`, time spent before
/// and after `τT`.
fn parabola_times(t_horizon: f64, tau: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(t_horizon > 0.0) || !(tau > -1.0 && tau < 1.0) {
        return domain(format!("need T > 0 and tau in (-1, 1), got T = {t_horizon}, tau = {tau}"));
    }
    let kappa = 2.0 * t_horizon.powf(gamma - 2.0);
    let frame = ScalingFrame::from_curvature(t_horizon, tau, kappa)?;
    Ok((t_horizon * (1.0 + tau) * frame.h_s, t_horizon * (1.0 - tau) * frame.h_s))
}

struct FiniteT {
    before: Vec<f64>,
    after: Vec<f64>,
    total: f64,
}

fn finite_t_parts(n: f64, t_horizon: f64, tau: f64, gamma: f64, trunc: &SpectralTruncation) -> Result<FiniteT> {
    let (tb, ta) = parabola_times(t_horizon, tau, gamma)?;
    if !(tb - n > 0.0 && ta - n > 0.0) {
        return domain(format!("window N = {n} exceeds the available time ({tb}, {ta})"));
    }
    Ok(FiniteT { before: trunc.decay(tb - n), after: trunc.decay(ta - n), total: trunc.decay(tb + ta).iter().sum() })
}

fn weighted_modes(x: f64, w: &[f64], trunc: &SpectralTruncation, skip_ground: bool) -> f64 {
    let start = usize::from(skip_ground);
    (start..trunc.k()).map(|k| w[k] * trunc.mode(k, x)).sum()
}

/// Entrance/exit density at `τT ∓ N/h_s` (rescaled) of a Brownian bridge
/// from `(-T, 0)` to `(T, 0)` conditioned above `g_{T,γ}`. The pinned
/// endpoints are handled through the slope-normalized limits, never a
/// small-ε division.
pub fn finite_t_joint_density(
    xi1: f64,
    xi2: f64,
    n: f64,
    t_horizon: f64,
    tau: f64,
    gamma: f64,
    trunc: &SpectralTruncation,
) -> Result<f64> {
    check_points(&[xi1, xi2])?;
    let p = finite_t_parts(n, t_horizon, tau, gamma, trunc)?;
    let g = heat_kernel(xi2, xi1, 2.0 * n, trunc)?;
    let a = weighted_modes(xi2, &p.after, trunc, false);
    let b = weighted_modes(xi1, &p.before, trunc, false);
    Ok(trunc.clamp(a * g * b / p.total))
}

/// `ρ_T - ρ_A` evaluated from the excited-mode parts only, so that it stays
/// accurate far below the rounding level of either density.
pub fn finite_t_deviation(
    xi1: f64,
    xi2: f64,
    n: f64,
    t_horizon: f64,
    tau: f64,
    gamma: f64,
    trunc: &SpectralTruncation,
) -> Result<f64> {
    check_points(&[xi1, xi2])?;
    let p = finite_t_parts(n, t_horizon, tau, gamma, trunc)?;
    let g = heat_kernel(xi2, xi1, 2.0 * n, trunc)?;
    let (o1, o2) = (ground_state(xi1), ground_state(xi2));
    let da = weighted_modes(xi2, &p.after, trunc, true);
    let db = weighted_modes(xi1, &p.before, trunc, true);
    let dd = p.total - 1.0;
    Ok(g * (o2 * db + o1 * da + da * db - o1 * o2 * dd) / p.total)
}

/// One-point density of the rescaled height at `τT`.
pub fn finite_t_marginal(xi: f64, t_horizon: f64, tau: f64, gamma: f64, trunc: &SpectralTruncation) -> Result<f64> {
    check_points(&[xi])?;
    let (tb, ta) = parabola_times(t_horizon, tau, gamma)?;
    let a = weighted_modes(xi, &trunc.decay(ta), trunc, false);
    let b = weighted_modes(xi, &trunc.decay(tb), trunc, false);
    Ok(trunc.clamp(a * b / boundary_mass(ta + tb, trunc)?))
}

/// Mean height above `g_{T,γ}` at `τT` in the original (unrescaled)
/// units: `E[ξ] / v_s`.
pub fn unrescaled_mean_height(t_horizon: f64, tau: f64, gamma: f64, trunc: &SpectralTruncation) -> Result<f64> {
    let kappa = 2.0 * t_horizon.powf(gamma - 2.0);
    let frame = ScalingFrame::from_curvature(t_horizon, tau, kappa)?;
    let mut mean = 0.0;
    for (x, w) in trunc.axis().points.iter().zip(&trunc.axis().weights) {
        mean += w * x * finite_t_marginal(*x, t_horizon, tau, gamma, trunc)?;
    }
    Ok(mean / frame.v_s)
}

/// Doob-transformed transition density `Ω(y) G(y, x; t - u) / Ω(x)` of the
/// stationary Airy-drift diffusion.
pub fn doob_transition(y: f64, t: f64, x: f64, u: f64, n: f64, trunc: &SpectralTruncation) -> Result<f64> {
    if !(-n <= u && u < t && t <= n) {
        return domain(format!("need -N <= u < t <= N, got u = {u}, t = {t}, N = {n}"));
    }
    if !(x > 0.0 && y > 0.0) {
        return domain(format!("doob transition needs x, y > 0, got x = {x}, y = {y}"));
    }
    Ok(ground_state(y) * heat_kernel(y, x, t - u, trunc)? / ground_state(x))
}

/// Resolution of the transfer-operator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferOptions {
    /// Gauss–Legendre panels per node grid.
    pub panels: usize,
    /// Nodes per panel.
    pub order: usize,
    /// Retained modes.
    pub modes: usize,
    /// Target for the estimated discretization error.
    pub tolerance: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self { panels: 40, order: 8, modes: 64, tolerance: 1e-4 }
    }
}

struct Segment {
    v: f64,
    gamma: f64,
}

struct Chain {
    segments: Vec<Segment>,
    /// Ridge gap at each interior node (`segments.len() - 1` of them).
    nu: Vec<f64>,
}

/// Builds the segments between consecutive node times.
fn chain(shape: &PiecewiseShape, times: &[f64]) -> Chain {
    let segments = times
        .windows(2)
        .map(|w| {
            let p = &shape.pieces()[shape.piece_index(0.5 * (w[0] + w[1]))];
            Segment { v: p.v(), gamma: 0.5 * p.h() * (w[1] - w[0]) }
        })
        .collect();
    let nu = times[1..times.len() - 1]
        .iter()
        .map(|&t| {
            let (l, r) = shape.slope_sided(t);
            (l - r).max(0.0)
        })
        .collect();
    Chain { segments, nu }
}

fn node_axis(v: f64, extra: f64, opts: &TransferOptions) -> Axis {
    Axis::composite(0.0, (omega1() + 10.0) / v + extra, opts.panels, opts.order)
}

/// Propagates from a fixed start height through the segments of `chain`,
/// returning the (scale-free) density of the height at the last node on
/// `axes.last()`.
fn sweep(start: f64, chain: &Chain, axes: &[Axis], trunc: &SpectralTruncation) -> Vec<f64> {
    let first = &chain.segments[0];
    let d = trunc.decay(2.0 * first.gamma);
    let coeffs: Vec<f64> = if start == 0.0 {
        d.clone()
    } else {
        (0..trunc.k()).map(|k| d[k] * trunc.mode(k, first.v * start)).collect()
    };
    let eval = |coeffs: &[f64], v: f64, axis: &Axis| -> Vec<f64> {
        axis.points
            .par_iter()
            .map(|&z| coeffs.iter().enumerate().map(|(k, c)| c * trunc.mode(k, v * z)).sum::<f64>().max(0.0))
            .collect()
    };
    let mut values = eval(&coeffs, first.v, &axes[0]);
    for (j, seg) in chain.segments.iter().enumerate().skip(1) {
        let axis = &axes[j - 1];
        let nu = chain.nu[j - 1];
        let d = trunc.decay(2.0 * seg.gamma);
        let weighted: Vec<f64> = axis
            .points
            .iter()
            .zip(&axis.weights)
            .zip(&values)
            .map(|((z, w), f)| w * f * (-nu * z).exp())
            .collect();
        let coeffs: Vec<f64> = (0..trunc.k())
            .into_par_iter()
            .map(|k| {
                d[k] * axis.points.iter().zip(&weighted).map(|(z, w)| w * trunc.mode(k, seg.v * z)).sum::<f64>()
            })
            .collect();
        values = eval(&coeffs, seg.v, &axes[j]);
        let peak = values.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            values.iter_mut().for_each(|v| *v /= peak);
        }
    }
    values
}

/// Observation window `[t_c - N/h_s, t_c + N/h_s]` of the transfer
/// density, checked to lie strictly inside the domain and inside a single
/// parabola of `shape`.
pub fn transfer_window(shape: &PiecewiseShape, t_center: f64, n: f64) -> Result<(f64, f64)> {
    let (t_in, t_fin) = shape.domain();
    let h_s = shape.pieces()[shape.piece_index(t_center)].h();
    let (t_minus, t_plus) = (t_center - n / h_s, t_center + n / h_s);
    let smooth_inside = shape.pieces().windows(2).all(|w| {
        let t = w[0].hi;
        let same = (w[0].c - w[1].c).abs() <= 1e-12 * w[0].c && (w[0].slope(t) - w[1].slope(t)).abs() <= 1e-12;
        t <= t_minus || t >= t_plus || same
    });
    if !(t_minus > t_in && t_plus < t_fin && smooth_inside) {
        return domain(format!("window [{t_minus}, {t_plus}] is not inside one parabola"));
    }
    Ok((t_minus, t_plus))
}

fn transfer_once(
    shape: &PiecewiseShape,
    x_in: f64,
    x_fin: f64,
    t_center: f64,
    n: f64,
    opts: &TransferOptions,
    trunc: &SpectralTruncation,
) -> Result<(Axis, Axis, Vec<f64>)> {
    let (t_in, t_fin) = shape.domain();
    let piece = &shape.pieces()[shape.piece_index(t_center)];
    let v_s = piece.v();
    let (t_minus, t_plus) = transfer_window(shape, t_center, n)?;
    let junctions = shape.junctions();
    let mut left: Vec<f64> = vec![t_in];
    left.extend(junctions.iter().filter(|&&t| t < t_minus));
    left.push(t_minus);
    let mut right: Vec<f64> = vec![t_fin];
    right.extend(junctions.iter().rev().filter(|&&t| t > t_plus));
    right.push(t_plus);
    let extra = x_in.max(x_fin);

    let build = |times: &[f64], mirror: bool| {
        let ordered: Vec<f64> = if mirror { times.iter().rev().cloned().collect() } else { times.to_vec() };
        let mut c = chain(shape, &ordered);
        if mirror {
            c.segments.reverse();
            c.nu.reverse();
        }
        c
    };
    let lc = build(&left, false);
    let rc = build(&right, true);
    let axes_for = |c: &Chain| -> Vec<Axis> {
        (0..c.segments.len())
            .map(|j| {
                let next = c.segments.get(j + 1).map_or(v_s, |s| s.v);
                node_axis(c.segments[j].v.min(next), extra, opts)
            })
            .collect()
    };
    let mut la = axes_for(&lc);
    let mut ra = axes_for(&rc);
    let window = node_axis(v_s, extra, opts);
    *la.last_mut().expect("at least one segment") = window.clone();
    *ra.last_mut().expect("at least one segment") = window.clone();

    let lv = sweep(x_in, &lc, &la, trunc);
    let rv = sweep(x_fin, &rc, &ra, trunc);
    let vx: Vec<f64> = window.points.iter().map(|x| v_s * x).collect();
    let g = heat_kernel_matrix(&vx, &vx, 2.0 * n, trunc)?;
    let m = window.len();
    let mut values: Vec<f64> = (0..m * m).map(|idx| lv[idx / m] * g[idx] * rv[idx % m]).collect();
    let mass: f64 = (0..m * m).map(|idx| window.weights[idx / m] * window.weights[idx % m] * values[idx]).sum();
    if !(mass > 0.0) {
        return Err(Error::Construction("transfer operator produced zero mass".into()));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok((window.clone(), window, values))
}

fn moments(axis: &Axis, marginal: &[f64]) -> [f64; 2] {
    let mut m = [0.0; 2];
    for ((x, w), p) in axis.points.iter().zip(&axis.weights).zip(marginal) {
        m[0] += w * x * p;
        m[1] += w * x * x * p;
    }
    m
}

/// Joint density of the heights above `shape` at `t_∓ = t_center ∓ N/h_s`
/// for a Brownian bridge from `s(t_in) + x_in` to `s(t_fin) + x_fin`
/// conditioned to stay above `shape`, by chaining killed propagators piece
/// by piece. Ridges enter as weights `e^{-ν z}` at the junctions.
///
/// Heights are in the original units. The discretization error is
/// estimated from a run at half resolution and reported in the metadata.
pub fn piecewise_entrance_exit_density(
    shape: &PiecewiseShape,
    x_in: f64,
    x_fin: f64,
    t_center: f64,
    n: f64,
    opts: &TransferOptions,
) -> Result<DensityGrid> {
    if !(n > 0.0) || !(x_in >= 0.0) || !(x_fin >= 0.0) {
        return domain("need N > 0 and nonnegative start and end heights");
    }
    if opts.panels < 2 || opts.order < 2 {
        return domain("transfer grid needs at least 2 panels of 2 nodes");
    }
    let trunc = SpectralTruncation::new(opts.modes)?;
    let (xa, ya, values) = transfer_once(shape, x_in, x_fin, t_center, n, opts, &trunc)?;
    let coarse_opts = TransferOptions { panels: opts.panels / 2, ..*opts };
    let (ca, _, cv) = transfer_once(shape, x_in, x_fin, t_center, n, &coarse_opts, &trunc)?;
    let marg = |axis: &Axis, v: &[f64]| -> Vec<f64> {
        let m = axis.len();
        (0..m).map(|i| (0..m).map(|j| axis.weights[j] * v[i * m + j]).sum()).collect()
    };
    let fine = moments(&xa, &marg(&xa, &values));
    let coarse = moments(&ca, &marg(&ca, &cv));
    let err = fine.iter().zip(&coarse).map(|(f, c)| ((f - c) / f).abs()).fold(0.0, f64::max);
    let metadata = DensityMetadata {
        modes: trunc.k(),
        resolution: xa.len(),
        f_coefficient: None,
        clamps: trunc.diagnostics(),
        discretization_error: Some(err),
        tolerance: Some(opts.tolerance),
        converged: err <= opts.tolerance,
    };
    DensityGrid::two_point(&xa, &ya, values, metadata)
}
