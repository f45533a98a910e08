//! Barrier profiles, local scaling frames and piecewise-parabolic shapes.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Local rescaling at the reference time `τT`: vertical scale
/// `v_s = (2κ)^{1/3}` and time scale `h_s = v_s²`, with `κ = -g''(τT)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFrame {
    pub t_horizon: f64,
    pub tau: f64,
    pub kappa: f64,
    pub v_s: f64,
    pub h_s: f64,
}

impl ScalingFrame {
    pub fn from_curvature(t_horizon: f64, tau: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Regime(format!(
                "scaling frame needs negative curvature, got -g'' = {kappa}"
            )));
        }
        let v_s = (2.0 * kappa).cbrt();
        Ok(Self { t_horizon, tau, kappa, v_s, h_s: v_s * v_s })
    }

    /// Frame with `v_s = h_s = 1` (`κ = 1/2`).
    pub fn identity(t_horizon: f64, tau: f64) -> Self {
        Self { t_horizon, tau, kappa: 0.5, v_s: 1.0, h_s: 1.0 }
    }

    /// Reference time `τT`.
    pub fn reference_time(&self) -> f64 {
        self.tau * self.t_horizon
    }
}

type PieceFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
struct SmoothPiece {
    lo: f64,
    hi: f64,
    f: PieceFn,
}

/// Continuous barrier on `[lo, hi]` made of `C²` pieces. Each piece
/// returns value, first and second derivative, so one-sided derivatives
/// are available at the breakpoints.
#[derive(Clone)]
pub struct ShapeFunction {
    name: String,
    pieces: Vec<SmoothPiece>,
}

impl fmt::Debug for ShapeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShapeFunction")
            .field("name", &self.name)
            .field("domain", &self.domain())
            .field("breakpoints", &self.breakpoints())
            .finish()
    }
}

impl ShapeFunction {
    /// Single smooth piece on `[lo, hi]`.
    pub fn smooth(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), pieces: vec![SmoothPiece { lo, hi, f: Arc::new(f) }] }
    }

    /// Contiguous pieces `(lo, hi, f)` in increasing order.
    pub fn piecewise(name: impl Into<String>, pieces: Vec<(f64, f64, PieceFnBox)>) -> Result<Self> {
        if pieces.is_empty() {
            return domain("shape needs at least one piece");
        }
        for w in pieces.windows(2) {
            if (w[0].1 - w[1].0).abs() > 1e-12 * (1.0 + w[0].1.abs()) {
                return domain("shape pieces must be contiguous");
            }
        }
        if pieces.iter().any(|p| !(p.1 > p.0)) {
            return domain("shape pieces must have positive length");
        }
        Ok(Self {
            name: name.into(),
            pieces: pieces.into_iter().map(|(lo, hi, f)| SmoothPiece { lo, hi, f: Arc::from(f) }).collect(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    /// Interior breakpoints between pieces.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces[..self.pieces.len() - 1].iter().map(|p| p.hi).collect()
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return domain(format!("t = {t} outside shape domain [{lo}, {hi}]"));
        }
        Ok(())
    }

    fn left_piece(&self, t: f64) -> &SmoothPiece {
        self.pieces.iter().find(|p| t <= p.hi).unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    fn right_piece(&self, t: f64) -> &SmoothPiece {
        self.pieces.iter().find(|p| t < p.hi).unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    fn eval_left(&self, t: f64) -> [f64; 3] {
        let p = self.left_piece(t);
        (p.f)(t.clamp(p.lo, p.hi))
    }

    fn eval_right(&self, t: f64) -> [f64; 3] {
        let p = self.right_piece(t);
        (p.f)(t.clamp(p.lo, p.hi))
    }

    /// `g(t)`.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.eval_left(t)[0])
    }

    /// Value without the domain check; clamps `t` into the domain.
    pub fn value_clamped(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        self.eval_left(t.clamp(lo, hi))[0]
    }

    /// `g'(t)`, taken from the right at breakpoints.
    pub fn d1(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.eval_right(t)[1])
    }

    /// `g''(t)`, taken from the right at breakpoints.
    pub fn d2(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.eval_right(t)[2])
    }

    /// `(g'(t⁻), g'(t⁺))`.
    pub fn d1_sided(&self, t: f64) -> Result<(f64, f64)> {
        self.check(t)?;
        Ok((self.eval_left(t)[1], self.eval_right(t)[1]))
    }

    /// `(g''(t⁻), g''(t⁺))`.
    pub fn d2_sided(&self, t: f64) -> Result<(f64, f64)> {
        self.check(t)?;
        Ok((self.eval_left(t)[2], self.eval_right(t)[2]))
    }
}

/// Boxed piece evaluator accepted by [`ShapeFunction::piecewise`].
pub type PieceFnBox = Box<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Semicircle `c_T(t) = √(T² - t²)` on `[-T, T]`.
pub fn semicircle(t_horizon: f64) -> Result<ShapeFunction> {
    if !(t_horizon > 0.0) {
        return domain(format!("semicircle needs T > 0, got {t_horizon}"));
    }
    let tt = t_horizon;
    Ok(ShapeFunction::smooth("semicircle", -tt, tt, move |t| {
        let c = ((tt - t) * (tt + t)).max(0.0).sqrt();
        [c, -t / c, -tt * tt / (c * c * c)]
    }))
}

/// Power parabola `g_{T,γ}(t) = T^γ (1 - (t/T)²)` on `[-T, T]`.
pub fn power_parabola(t_horizon: f64, gamma: f64) -> Result<ShapeFunction> {
    if !(t_horizon > 0.0) {
        return domain(format!("parabola needs T > 0, got {t_horizon}"));
    }
    let tt = t_horizon;
    let amp = tt.powf(gamma);
    Ok(ShapeFunction::smooth("power-parabola", -tt, tt, move |t| {
        let r = t / tt;
        [amp * (1.0 - r * r), -2.0 * amp * t / (tt * tt), -2.0 * amp / (tt * tt)]
    }))
}

/// `κ = -g''(τT)` and the derived frame.
pub fn scaling_frame(shape: &ShapeFunction, t_horizon: f64, tau: f64) -> Result<ScalingFrame> {
    if !(tau > -1.0 && tau < 1.0) {
        return domain(format!("tau must lie in (-1, 1), got {tau}"));
    }
    let d2 = shape.d2(tau * t_horizon)?;
    ScalingFrame::from_curvature(t_horizon, tau, -d2)
}

/// Parabola `a + b t - ½ c t²` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParabolicPiece {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ParabolicPiece {
    pub fn new(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Construction(format!("piece curvature must be positive, got {c}")));
        }
        if !(hi > lo) {
            return Err(Error::Construction(format!("degenerate piece interval [{lo}, {hi}]")));
        }
        Ok(Self { a, b, c, lo, hi })
    }

    /// Parabola through `(t0, y0)` with slope `m` and second derivative
    /// `-c` there.
    pub fn osculating(t0: f64, y0: f64, m: f64, c: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(y0 - m * t0 - 0.5 * c * t0 * t0, m + c * t0, c, lo, hi)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.a + self.b * t - 0.5 * self.c * t * t
    }

    pub fn slope(&self, t: f64) -> f64 {
        self.b - self.c * t
    }

    /// `v_j = (2 c_j)^{1/3}`.
    pub fn v(&self) -> f64 {
        (2.0 * self.c).cbrt()
    }

    /// `h_j = v_j²`.
    pub fn h(&self) -> f64 {
        self.v().powi(2)
    }

    /// `Γ_j = ½ h_j (hi - lo)`.
    pub fn gamma(&self) -> f64 {
        0.5 * self.h() * (self.hi - self.lo)
    }

    /// Same parabola reflected through `t = 0`.
    pub fn mirrored(&self) -> Self {
        Self { a: self.a, b: -self.b, c: self.c, lo: -self.hi, hi: -self.lo }
    }
}

/// Continuous concave piecewise-parabolic barrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseShape {
    pieces: Vec<ParabolicPiece>,
}

impl PiecewiseShape {
    /// Validates contiguity, continuity (relative jump ≤ 1e-9) and
    /// concavity (`ν ≥ 0`) at every junction.
    pub fn new(pieces: Vec<ParabolicPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Construction("shape needs at least one piece".into()));
        }
        let scale = pieces
            .iter()
            .flat_map(|p| [p.value(p.lo).abs(), p.value(p.hi).abs(), p.lo.abs(), p.hi.abs()])
            .fold(1.0_f64, f64::max);
        for (j, w) in pieces.windows(2).enumerate() {
            let (l, r) = (&w[0], &w[1]);
            if (l.hi - r.lo).abs() > 1e-12 * scale {
                return Err(Error::Construction(format!("gap between pieces {j} and {}", j + 1)));
            }
            let jump = (l.value(l.hi) - r.value(r.lo)).abs();
            if jump > 1e-9 * scale {
                return Err(Error::Construction(format!(
                    "discontinuity {jump:e} at junction t = {}",
                    l.hi
                )));
            }
            let nu = l.slope(l.hi) - r.slope(r.lo);
            let slope_scale = l.slope(l.hi).abs().max(r.slope(r.lo).abs()).max(1e-300);
            if nu < -1e-9 * slope_scale {
                return Err(Error::Construction(format!("negative ridge gap {nu:e} at t = {}", l.hi)));
            }
        }
        Ok(Self { pieces })
    }

    /// Builds the half `[-T, 0]` and completes it by `s(t) = s(-t)`.
    pub fn mirrored_from_left(left: Vec<ParabolicPiece>) -> Result<Self> {
        let mut all = left.clone();
        all.extend(left.iter().rev().map(ParabolicPiece::mirrored));
        Self::new(all)
    }

    pub fn pieces(&self) -> &[ParabolicPiece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    /// Junction times between consecutive pieces.
    pub fn junctions(&self) -> Vec<f64> {
        self.pieces[..self.pieces.len() - 1].iter().map(|p| p.hi).collect()
    }

    /// Ridge gaps `ν(t_j) = s'(t_j⁻) - s'(t_j⁺)` at the junctions.
    pub fn ridge_gaps(&self) -> Vec<f64> {
        self.pieces.windows(2).map(|w| (w[0].slope(w[0].hi) - w[1].slope(w[1].lo)).max(0.0)).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.pieces.iter().map(ParabolicPiece::v).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.pieces.iter().map(ParabolicPiece::gamma).collect()
    }

    /// `Γ̄ = min_j Γ_j`.
    pub fn gamma_bar(&self) -> f64 {
        self.gammas().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Index of the piece containing `t` (left piece at junctions).
    pub fn piece_index(&self, t: f64) -> usize {
        self.pieces.iter().position(|p| t <= p.hi).unwrap_or(self.pieces.len() - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].value(t)
    }

    /// Slope from the left and from the right.
    pub fn slope_sided(&self, t: f64) -> (f64, f64) {
        let l = &self.pieces[self.piece_index(t)];
        let r = self.pieces.iter().find(|p| t < p.hi).unwrap_or(&self.pieces[self.pieces.len() - 1]);
        (l.slope(t), r.slope(t))
    }

    /// Local `v` at `t` (right piece at junctions).
    pub fn v_at(&self, t: f64) -> f64 {
        let r = self.pieces.iter().find(|p| t < p.hi).unwrap_or(&self.pieces[self.pieces.len() - 1]);
        r.v()
    }

    /// Converts into a [`ShapeFunction`] with one smooth piece per parabola.
    pub fn to_shape_function(&self) -> ShapeFunction {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let q = *p;
                let f: PieceFnBox = Box::new(move |t| [q.value(t), q.slope(t), -q.c]);
                (p.lo, p.hi, f)
            })
            .collect();
        ShapeFunction::piecewise("piecewise-parabolic", pieces).expect("validated pieces are contiguous")
    }
}

/// Result of comparing `lower ≤ middle ≤ upper` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub grid_size: usize,
    pub tolerance: f64,
    /// `max (lower - middle)`; nonpositive when the lower shape is contained.
    pub max_lower_excess: f64,
    /// `max (middle - upper)`.
    pub max_upper_excess: f64,
    pub violations: usize,
}

impl ContainmentReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `lower(t) ≤ middle(t) ≤ upper(t)` at `grid_size` equally spaced
/// points of `[lo, hi]` (endpoints included), with slack `tolerance`.
pub fn containment_check(
    lower: impl Fn(f64) -> f64 + Sync,
    middle: impl Fn(f64) -> f64 + Sync,
    upper: impl Fn(f64) -> f64 + Sync,
    (lo, hi): (f64, f64),
    grid_size: usize,
    tolerance: f64,
) -> ContainmentReport {
    use rayon::prelude::*;
    let n = grid_size.max(2);
    let h = (hi - lo) / (n - 1) as f64;
    let (el, eu, v) = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = if i == n - 1 { hi } else { lo + i as f64 * h };
            let m = middle(t);
            let dl = lower(t) - m;
            let du = m - upper(t);
            (dl, du, usize::from(dl > tolerance) + usize::from(du > tolerance))
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::NEG_INFINITY, 0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 + b.2),
        );
    ContainmentReport { grid_size: n, tolerance, max_lower_excess: el, max_upper_excess: eu, violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semicircle_values_and_curvature() {
        let t = 50.0;
        let c = semicircle(t).unwrap();
        assert_eq!(c.value(0.0).unwrap(), t);
        assert_eq!(c.value(t).unwrap(), 0.0);
        assert_eq!(c.value(-t).unwrap(), 0.0);
        assert!(c.value(t * 1.01).is_err());
        for tau in [-0.7, -0.2, 0.0, 0.4] {
            let k = -c.d2(tau * t).unwrap();
            let expected = 1.0 / (t * (1.0 - tau * tau).powf(1.5));
            assert!((k / expected - 1.0).abs() < 1e-13);
        }
        // Second derivative against a symbolic oracle: d/dt (-t/c) = -(c² + t²)/c³.
        let x = 13.0;
        let cx = (t * t - x * x).sqrt();
        assert!((c.d2(x).unwrap() + (cx * cx + x * x) / cx.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn parabola_frames() {
        for tt in [10.0, 1e3, 1e5] {
            let g = power_parabola(tt, 2.0).unwrap();
            assert!((g.value(3.0).unwrap() - (tt * tt - 9.0)).abs() < 1e-9 * tt * tt);
            let f = scaling_frame(&g, tt, 0.3).unwrap();
            assert!((f.kappa - 2.0).abs() < 1e-12);
            assert!((f.v_s - 4f64.cbrt()).abs() < 1e-12);
            assert!((f.v_s - 1.5874).abs() < 1e-4);
        }
        let g = power_parabola(1e3, 1.5).unwrap();
        let f = scaling_frame(&g, 1e3, 0.0).unwrap();
        assert!((f.v_s / (4f64.cbrt() * 1e3f64.powf(-0.5 / 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semicircle_frames() {
        let tt = 1e4;
        let c = semicircle(tt).unwrap();
        let f0 = scaling_frame(&c, tt, 0.0).unwrap();
        assert!((f0.v_s / (2f64.cbrt() * tt.powf(-1.0 / 3.0)) - 1.0).abs() < 1e-12);
        let tau = -0.6;
        let f = scaling_frame(&c, tt, tau).unwrap();
        let expected = 2f64.cbrt() * (1.0 - tau * tau).powf(-0.5) * tt.powf(-1.0 / 3.0);
        assert!((f.v_s / expected - 1.0).abs() < 1e-12);
        assert!((f.h_s - f.v_s * f.v_s).abs() < 1e-15);
    }

    #[test]
    fn flat_shape_has_no_frame() {
        let g = ShapeFunction::smooth("line", -1.0, 1.0, |t| [1.0 - t, -1.0, 0.0]);
        assert!(matches!(scaling_frame(&g, 1.0, 0.0), Err(Error::Regime(_))));
    }

    #[test]
    fn piecewise_validation() {
        let p1 = ParabolicPiece::new(1.0, 0.0, 2.0, -1.0, 0.0).unwrap();
        let p2 = ParabolicPiece::new(1.0, 0.0, 2.0, 0.0, 1.0).unwrap();
        let s = PiecewiseShape::new(vec![p1, p2]).unwrap();
        assert_eq!(s.ridge_gaps(), vec![0.0]);
        // Tent: slopes +1 then -1 gives ν = 2.
        let l = ParabolicPiece::new(1.0, 1.0, 1e-9, -1.0, 0.0).unwrap();
        let r = ParabolicPiece::new(1.0, -1.0, 1e-9, 0.0, 1.0).unwrap();
        let tent = PiecewiseShape::new(vec![l, r]).unwrap();
        assert!((tent.ridge_gaps()[0] - 2.0).abs() < 1e-12);
        // Convex kink is rejected.
        let vl = ParabolicPiece::new(1.0, -1.0, 1e-9, -1.0, 0.0).unwrap();
        let vr = ParabolicPiece::new(1.0, 1.0, 1e-9, 0.0, 1.0).unwrap();
        assert!(PiecewiseShape::new(vec![vl, vr]).is_err());
        // Discontinuity is rejected.
        let q = ParabolicPiece::new(2.0, 0.0, 2.0, 0.0, 1.0).unwrap();
        assert!(PiecewiseShape::new(vec![p1, q]).is_err());
        assert!(ParabolicPiece::new(0.0, 0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn osculating_piece_matches_data() {
        let p = ParabolicPiece::osculating(3.0, 5.0, -0.5, 0.2, 0.0, 6.0).unwrap();
        assert!((p.value(3.0) - 5.0).abs() < 1e-14);
        assert!((p.slope(3.0) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn containment_against_itself_is_tight() {
        let c = semicircle(100.0).unwrap();
        let f = |t: f64| c.value_clamped(t);
        let r = containment_check(f, f, f, (-100.0, 100.0), 1001, 0.0);
        assert!(r.pass());
        assert_eq!(r.max_lower_excess, 0.0);
        assert_eq!(r.max_upper_excess, 0.0);
    }

    #[test]
    fn shape_function_sided_derivatives() {
        let tent = ShapeFunction::piecewise(
            "tent",
            vec![
                (-1.0, 0.0, Box::new(|t: f64| [1.0 + t, 1.0, 0.0]) as PieceFnBox),
                (0.0, 1.0, Box::new(|t: f64| [1.0 - t, -1.0, 0.0]) as PieceFnBox),
            ],
        )
        .unwrap();
        assert_eq!(tent.d1_sided(0.0).unwrap(), (1.0, -1.0));
        assert_eq!(tent.breakpoints(), vec![0.0]);
        assert_eq!(tent.value(0.5).unwrap(), 0.5);
    }
}
