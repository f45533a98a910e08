//! Upper and lower piecewise-parabolic approximations of the semicircle
//! `c_T(t) = √(T² - t²)` around a reference time `τT`, and the diagnostics
//! comparing them with the semicircle in the local frame.
//!
//! Shapes are built on `[-T, 0]` for `τ ≤ 0` and mirrored by
//! `s(t) = s(-t)`; since the result is symmetric, `τ > 0` gives the same
//! shape as `-τ`.

use serde::Serialize;

use super::shape::{containment_check, ParabolicPiece, PiecewiseShape, ScalingFrame};
use crate::error::{domain, Error, Result};
use crate::quad::bisect;

fn circle(tt: f64, t: f64) -> f64 {
    ((tt - t) * (tt + t)).max(0.0).sqrt()
}

fn circle_slope(tt: f64, t: f64) -> f64 {
    -t / circle(tt, t)
}

fn circle_curvature(tt: f64, t: f64) -> f64 {
    let c = circle(tt, t);
    tt * tt / (c * c * c)
}

/// Symmetric parabola `a - ½ c t²` through `(t1, y1)` and `(t2, y2)`.
fn symmetric_through(t1: f64, y1: f64, t2: f64, y2: f64, lo: f64, hi: f64) -> Result<ParabolicPiece> {
    let c = 2.0 * (y2 - y1) / (t1 * t1 - t2 * t2);
    let a = y1 + 0.5 * c * t1 * t1;
    ParabolicPiece::new(a, 0.0, c, lo, hi)
}

fn check_tau(t_horizon: f64, tau: f64) -> Result<f64> {
    if !(t_horizon > 1.0) {
        return domain(format!("approximations need T > 1, got {t_horizon}"));
    }
    if !(tau > -1.0 && tau < 1.0) {
        return domain(format!("tau must lie in (-1, 1), got {tau}"));
    }
    Ok(-tau.abs())
}

fn ordered(points: &[f64]) -> Result<()> {
    if points.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::Construction(format!("junction times out of order: {points:?}")))
    }
}

fn finish(left: Vec<ParabolicPiece>, t_horizon: f64, upper: bool) -> Result<PiecewiseShape> {
    let shape = PiecewiseShape::mirrored_from_left(left)?;
    let c = |t: f64| circle(t_horizon, t);
    let s = |t: f64| shape.value(t);
    let tol = 1e-12 * t_horizon;
    let report = if upper {
        containment_check(c, c, s, (-t_horizon, 0.0), 4001, tol)
    } else {
        containment_check(s, c, c, (-t_horizon, 0.0), 4001, tol)
    };
    if !report.pass() {
        return Err(Error::Construction(format!(
            "{} approximation crosses the semicircle: lower excess {:e}, upper excess {:e}",
            if upper { "upper" } else { "lower" },
            report.max_lower_excess,
            report.max_upper_excess
        )));
    }
    Ok(shape)
}

/// Piecewise-parabolic `s_+ ≥ c_T` on `[-T, T]`.
///
/// `τ = 0`: the single parabola `T - t²/(2T)`. `τ ≠ 0`: a parabola with
/// the circle's value and slope at `τT` and curvature reduced by the factor
/// `1 - T^{-1/4}`, joined at `u_2` (slope match) to a shifted symmetric
/// parabola through the circle at `τT` and at the first crossing `u*`.
pub fn build_upper_approx(t_horizon: f64, tau: f64) -> Result<PiecewiseShape> {
    let tau = check_tau(t_horizon, tau)?;
    let tt = t_horizon;
    if tau == 0.0 {
        let f1 = ParabolicPiece::new(tt, 0.0, 1.0 / tt, -tt, 0.0)?;
        return finish(vec![f1], tt, true);
    }
    let eps = tt.powf(-0.25);
    let u1 = tau * tt;
    let (c0, m0, k0) = (circle(tt, u1), circle_slope(tt, u1), circle_curvature(tt, u1));
    let k = k0 * (1.0 - eps);
    let f2 = |t: f64| c0 + m0 * (t - u1) - 0.5 * k * (t - u1) * (t - u1);
    let gap = |t: f64| f2(t) - circle(tt, t);

    // First crossing of f2 below the circle to the right of u1.
    let mut prev = u1;
    let mut delta = tt.powf(0.4);
    let mut bracket = None;
    while u1 + delta < 0.0 {
        let t = u1 + delta;
        if gap(t) < 0.0 {
            bracket = Some((prev, t));
            break;
        }
        prev = t;
        delta *= 1.25;
    }
    if bracket.is_none() && gap(0.0) < 0.0 {
        bracket = Some((prev, 0.0));
    }
    let (lo, hi) = bracket.ok_or_else(|| {
        Error::Construction(format!("osculating parabola never crosses the semicircle right of {u1}; T is too small for this tau"))
    })?;
    let u_star = bisect(gap, lo, hi, 1e-13 * tt).expect("bracket has a sign change");

    let star = symmetric_through(u1, c0, u_star, circle(tt, u_star), -tt, 0.0)?;
    // f2'(t) = f*'(t): m0 - k (t - u1) = -c* t.
    let u2 = (m0 + k * u1) / (k - star.c);
    ordered(&[-tt, u1, u2, u_star, 0.0])?;

    let p1 = ParabolicPiece::osculating(u1, c0, m0, k, -tt, u1)?;
    let p2 = ParabolicPiece { lo: u1, hi: u2, ..p1 };
    let shift = f2(u2) - star.value(u2);
    let p3 = ParabolicPiece::new(star.a + shift, 0.0, star.c, u2, 0.0)?;
    finish(vec![p1, p2, p3], tt, true)
}

/// Piecewise-parabolic `s_- ≤ c_T` on `[-T, T]`.
///
/// `τ = 0`: symmetric parabolas through `(-T, 0)`, `(u_1, c_T(u_1))` and
/// `(0, T)` with `u_1 = -T^{3/4}`. `τ ≠ 0`: a parabola with the circle's
/// value and slope at `τT` and curvature increased by `1 + T^{-1/4}`,
/// preceded by a symmetric parabola from `(-T, 0)` to its crossing `u_1`
/// and followed, from `u_3 = τT(1 - T^{-1/4})`, by the symmetric parabola
/// through `(u_3, f_3(u_3))` and `(0, T)`, which leaves a ridge at `u_3`.
pub fn build_lower_approx(t_horizon: f64, tau: f64) -> Result<PiecewiseShape> {
    let tau = check_tau(t_horizon, tau)?;
    let tt = t_horizon;
    if tau == 0.0 {
        let u1 = -tt.powf(0.75);
        let cu = circle(tt, u1);
        let f1 = symmetric_through(-tt, 0.0, u1, cu, -tt, u1)?;
        let f2 = ParabolicPiece::new(tt, 0.0, 2.0 * (tt - cu) / (u1 * u1), u1, 0.0)?;
        ordered(&[-tt, u1, 0.0])?;
        return finish(vec![f1, f2], tt, false);
    }
    let eps = tt.powf(-0.25);
    let u2 = tau * tt;
    let (c0, m0, k0) = (circle(tt, u2), circle_slope(tt, u2), circle_curvature(tt, u2));
    let k = k0 * (1.0 + eps);
    let f2 = ParabolicPiece::osculating(u2, c0, m0, k, -tt, u2)?;
    let gap = |t: f64| f2.value(t) - circle(tt, t);

    // Crossing of f2 above the circle to the left of u2.
    let mut prev = u2;
    let mut delta = tt.powf(0.4);
    let mut bracket = None;
    while u2 - delta > -tt {
        let t = u2 - delta;
        if gap(t) > 0.0 {
            bracket = Some((t, prev));
            break;
        }
        prev = t;
        delta *= 1.25;
    }
    if bracket.is_none() && gap(-tt) > 0.0 {
        bracket = Some((-tt, prev));
    }
    let (lo, hi) = bracket.ok_or_else(|| {
        Error::Construction(format!("osculating parabola stays below the semicircle left of {u2}"))
    })?;
    let u1 = bisect(gap, lo, hi, 1e-13 * tt).expect("bracket has a sign change");
    let u3 = u2 * (1.0 - eps);
    ordered(&[-tt, u1, u2, u3, 0.0])?;

    let p1 = symmetric_through(-tt, 0.0, u1, circle(tt, u1), -tt, u1)?;
    let p2 = ParabolicPiece { lo: u1, hi: u2, ..f2 };
    let p3 = ParabolicPiece { lo: u2, hi: u3, ..f2 };
    // Matching the slope at u3 as well cannot keep f4 below the circle
    // without a convex kink at 0; pass through the apex (0, T) instead.
    let c4 = 2.0 * (tt - f2.value(u3)) / (u3 * u3);
    let p4 = ParabolicPiece::new(tt, 0.0, c4, u3, 0.0)?;
    finish(vec![p1, p2, p3, p4], tt, false)
}

/// Pieces of a mirrored approximation lying in `[-T, 0]`.
pub fn left_half(shape: &PiecewiseShape) -> &[ParabolicPiece] {
    &shape.pieces()[..shape.pieces().len() / 2]
}

/// Which side of the semicircle an approximation lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Upper,
    Lower,
}

/// Leading large-`T` behaviour of `(v_j, Γ_j)` for the left-half pieces,
/// as `(name, value)` pairs in piece order.
///
/// Derived directly from the constructions: `v_j = (2c_j)^{1/3}` and
/// `Γ_j = ½ v_j² |I_j|`, with the leading orders of `c_j` and of the
/// junction times.
pub fn predicted_coefficients(side: Side, t_horizon: f64, tau: f64) -> Vec<(String, f64)> {
    let t = t_horizon;
    let beta = tau.abs();
    let lam = 1.0 - beta * beta;
    let c2 = 2f64.cbrt();
    let tm13 = t.powf(-1.0 / 3.0);
    let t13 = t.powf(1.0 / 3.0);
    let t112 = t.powf(1.0 / 12.0);
    let vals: Vec<f64> = match (side, beta == 0.0) {
        (Side::Upper, true) => vec![c2 * tm13, t13 / c2],
        (Side::Lower, true) => vec![c2 * c2 * tm13, c2 * t13, c2 * tm13, t112 / c2],
        (Side::Upper, false) => vec![
            c2 * lam.powf(-0.5) * tm13,
            t13 / (c2 * (1.0 + beta)),
            c2 * lam.powf(-0.5) * tm13,
            t112 / (2.0 * c2 * beta),
            c2 * lam.powf(-1.0 / 6.0) * tm13,
            beta * lam.powf(-1.0 / 3.0) * t13 / c2,
        ],
        (Side::Lower, false) => vec![
            c2 * c2 * lam.powf(-1.0 / 6.0) * tm13,
            c2 * (1.0 - beta) * lam.powf(-1.0 / 3.0) * t13,
            c2 * lam.powf(-0.5) * tm13,
            t112 / (c2 * beta),
            c2 * lam.powf(-0.5) * tm13,
            beta * t112 / (c2 * lam),
            (4.0 / (1.0 + lam.sqrt())).cbrt() * tm13,
            0.5 * (4.0 / (1.0 + lam.sqrt())).powf(2.0 / 3.0) * beta * t13,
        ],
    };
    vals.chunks(2)
        .enumerate()
        .flat_map(|(j, p)| [(format!("v{}", j + 1), p[0]), (format!("Gamma{}", j + 1), p[1])])
        .collect()
}

/// Measured `(v_j, Γ_j)` of the left-half pieces, named as in
/// [`predicted_coefficients`].
pub fn measured_coefficients(shape: &PiecewiseShape) -> Vec<(String, f64)> {
    left_half(shape)
        .iter()
        .enumerate()
        .flat_map(|(j, p)| [(format!("v{}", j + 1), p.v()), (format!("Gamma{}", j + 1), p.gamma())])
        .collect()
}

/// Frame of the semicircle at `τT`.
pub fn circle_frame(t_horizon: f64, tau: f64) -> Result<ScalingFrame> {
    if !(tau > -1.0 && tau < 1.0) {
        return domain(format!("tau must lie in (-1, 1), got {tau}"));
    }
    ScalingFrame::from_curvature(t_horizon, tau, circle_curvature(t_horizon, tau * t_horizon))
}

/// Discrepancy between the approximations and the semicircle in the
/// semicircle's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    /// `λ_± = v_{s±} / v_c` at `τT`.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `sup_{|t| ≤ N} |v_c (s_±(τT + t/h_c) - c_T(τT + t/h_c))|`.
    pub sup_g_plus: f64,
    pub sup_g_minus: f64,
}

pub fn approx_discrepancy(t_horizon: f64, tau: f64, n_window: f64) -> Result<Discrepancy> {
    let frame = circle_frame(t_horizon, tau)?;
    let upper = build_upper_approx(t_horizon, tau)?;
    let lower = build_lower_approx(t_horizon, tau)?;
    let t0 = frame.reference_time();
    let sup = |s: &PiecewiseShape| {
        let n = 2001;
        (0..n)
            .map(|i| {
                let t = -n_window + 2.0 * n_window * i as f64 / (n - 1) as f64;
                let x = t0 + t / frame.h_s;
                (frame.v_s * (s.value(x) - circle(t_horizon, x))).abs()
            })
            .fold(0.0_f64, f64::max)
    };
    Ok(Discrepancy {
        lambda_plus: upper.v_at(t0) / frame.v_s,
        lambda_minus: lower.v_at(t0) / frame.v_s,
        sup_g_plus: sup(&upper),
        sup_g_minus: sup(&lower),
    })
}

/// The semicircle seen from the chord through `τT ± N/h_s`, in the local
/// frame: `c̃(t) = v_s (c_T(τT + t/h_s) - L(τT + t/h_s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalChordFrame {
    pub frame: ScalingFrame,
    pub n_window: f64,
    left: (f64, f64),
    right: (f64, f64),
    pub sup_diff: f64,
}

impl LocalChordFrame {
    fn chord(&self, x: f64) -> f64 {
        let (x0, y0) = self.left;
        let (x1, y1) = self.right;
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `c̃(t)` for `|t| ≤ N`.
    pub fn c_tilde(&self, t: f64) -> f64 {
        let x = self.frame.reference_time() + t / self.frame.h_s;
        let diff = if t == -self.n_window || t == self.n_window {
            0.0
        } else {
            circle(self.frame.t_horizon, x) - self.chord(x)
        };
        self.frame.v_s * diff
    }

    /// `s(t) = ¼ (N² - t²)`.
    pub fn s(&self, t: f64) -> f64 {
        0.25 * (self.n_window * self.n_window - t * t)
    }
}

pub fn local_chord_frame(t_horizon: f64, tau: f64, n_window: f64) -> Result<LocalChordFrame> {
    let frame = circle_frame(t_horizon, tau)?;
    let t0 = frame.reference_time();
    let (xl, xr) = (t0 - n_window / frame.h_s, t0 + n_window / frame.h_s);
    if !(xl > -t_horizon && xr < t_horizon) {
        return domain(format!(
            "chord endpoints [{xl}, {xr}] do not both meet the semicircle of radius {t_horizon}"
        ));
    }
    let mut out = LocalChordFrame {
        frame,
        n_window,
        left: (xl, circle(t_horizon, xl)),
        right: (xr, circle(t_horizon, xr)),
        sup_diff: 0.0,
    };
    let n = 2001;
    out.sup_diff = (0..n)
        .map(|i| {
            let t = -n_window + 2.0 * n_window * i as f64 / (n - 1) as f64;
            (out.c_tilde(t) - out.s(t)).abs()
        })
        .fold(0.0_f64, f64::max);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::fit_power_law;

    fn within(measured: &[(String, f64)], predicted: &[(String, f64)], rel: f64) {
        assert_eq!(measured.len(), predicted.len());
        for ((n, m), (_, p)) in measured.iter().zip(predicted) {
            assert!(((m - p) / p).abs() <= rel, "{n}: measured {m}, predicted {p}");
        }
    }

    #[test]
    fn upper_tau_zero_is_single_parabola() {
        let t = 1e6;
        let s = build_upper_approx(t, 0.0).unwrap();
        let p = left_half(&s);
        assert_eq!(p.len(), 1);
        assert!((p[0].c - 1.0 / t).abs() < 1e-20);
        within(&measured_coefficients(&s), &predicted_coefficients(Side::Upper, t, 0.0), 1e-12);
    }

    #[test]
    fn lower_tau_zero_coefficients() {
        let t = 1e6;
        let s = build_lower_approx(t, 0.0).unwrap();
        let p = left_half(&s);
        assert!((p[0].c * t / 2.0 - 1.0).abs() < 3.0 * t.powf(-0.5));
        assert!((p[0].a - t / (1.0 - t.powf(-0.5)).sqrt()).abs() < 1e-9 * t);
        let g2 = p[1].gamma();
        assert!((g2 / (t.powf(1.0 / 12.0) / 2f64.cbrt()) - 1.0).abs() < 3.0 * t.powf(-0.5));
        within(&measured_coefficients(&s), &predicted_coefficients(Side::Lower, t, 0.0), 10.0 * t.powf(-0.25));
        // Ridge at u1 = -T^{3/4}.
        let nu = s.ridge_gaps();
        assert!(nu[0] > 0.0);
    }

    #[test]
    fn tau_negative_coefficients() {
        let t = 1e6;
        for tau in [-0.5, -0.3, 0.5] {
            let up = build_upper_approx(t, tau).unwrap();
            let lo = build_lower_approx(t, tau).unwrap();
            assert_eq!(left_half(&up).len(), 3);
            assert_eq!(left_half(&lo).len(), 4);
            let tol = 10.0 * t.powf(-0.25);
            within(&measured_coefficients(&up), &predicted_coefficients(Side::Upper, t, tau), tol);
            within(&measured_coefficients(&lo), &predicted_coefficients(Side::Lower, t, tau), tol);
        }
    }

    #[test]
    fn junction_estimates() {
        // u* and u2 (upper), u1 (lower) against their two leading orders.
        let t: f64 = 1e8;
        let beta = 0.5;
        let lam = 1.0 - beta * beta;
        let up = build_upper_approx(t, -beta).unwrap();
        let u2 = left_half(&up)[1].hi;
        let lead = -beta * t;
        let corr = lam / beta * t.powf(0.75);
        assert!(((u2 - lead) / (0.5 * corr) - 1.0).abs() < 0.1);
        let lo = build_lower_approx(t, -beta).unwrap();
        let u1 = left_half(&lo)[0].hi;
        assert!(((u1 - lead) / (-corr) - 1.0).abs() < 0.1);
    }

    #[test]
    fn containment_on_fine_grids() {
        for (t, tau) in [(1e4, 0.0), (1e6, -0.5), (1e7, -0.2)] {
            let up = build_upper_approx(t, tau).unwrap();
            let lo = build_lower_approx(t, tau).unwrap();
            let r = containment_check(
                |x| lo.value(x),
                |x| circle(t, x),
                |x| up.value(x),
                (-t, t),
                100_000,
                1e-12 * t,
            );
            assert!(r.pass(), "T = {t}, tau = {tau}: {r:?}");
        }
    }

    #[test]
    fn reflection_symmetry() {
        let t = 1e5;
        let a = build_lower_approx(t, -0.4).unwrap();
        let b = build_lower_approx(t, 0.4).unwrap();
        for i in 0..=100 {
            let x = -t + 2.0 * t * i as f64 / 100.0;
            assert!((a.value(x) - b.value(-x)).abs() <= 1e-12 * t);
            assert!((a.value(x) - a.value(-x)).abs() <= 1e-12 * t);
        }
    }

    #[test]
    fn discrepancy_orders() {
        let ts = [1e4, 1e5, 1e6];
        let d0: Vec<Discrepancy> = ts.iter().map(|&t| approx_discrepancy(t, 0.0, 1.0).unwrap()).collect();
        assert!(d0.iter().all(|d| d.lambda_plus == 1.0));
        let gp: Vec<f64> = d0.iter().map(|d| d.sup_g_plus).collect();
        let gm: Vec<f64> = d0.iter().map(|d| d.sup_g_minus).collect();
        assert!((fit_power_law(&ts, &gp).unwrap().slope + 2.0 / 3.0).abs() < 0.05);
        assert!((fit_power_law(&ts, &gm).unwrap().slope + 0.5).abs() < 0.05);
        let d1: Vec<Discrepancy> = ts.iter().map(|&t| approx_discrepancy(t, -0.5, 1.0).unwrap()).collect();
        let lp: Vec<f64> = d1.iter().map(|d| (d.lambda_plus - 1.0).abs()).collect();
        let lm: Vec<f64> = d1.iter().map(|d| (d.lambda_minus - 1.0).abs()).collect();
        assert!((fit_power_law(&ts, &lp).unwrap().slope + 0.25).abs() < 0.05);
        assert!((fit_power_law(&ts, &lm).unwrap().slope + 0.25).abs() < 0.05);
        let gp: Vec<f64> = d1.iter().map(|d| d.sup_g_plus).collect();
        assert!((fit_power_law(&ts, &gp).unwrap().slope + 0.25).abs() < 0.05);
    }

    #[test]
    fn chord_frame() {
        let n = 1.0;
        let f = local_chord_frame(1e5, -0.5, n).unwrap();
        assert_eq!(f.c_tilde(-n), 0.0);
        assert_eq!(f.c_tilde(n), 0.0);
        assert_eq!(f.s(n), 0.0);
        assert_eq!(f.s(0.0), 0.25);
        let ts = [1e4, 1e5, 1e6];
        let sup: Vec<f64> = ts.iter().map(|&t| local_chord_frame(t, -0.5, n).unwrap().sup_diff).collect();
        assert!((fit_power_law(&ts, &sup).unwrap().slope + 1.0 / 3.0).abs() < 0.05);
        assert!(local_chord_frame(2.0, 0.9, 5.0).is_err());
    }
}
