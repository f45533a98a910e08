//! Fluctuation regime of a general barrier at a reference point, and the
//! limit laws of the ridge and curvature-jump cases.

use serde::Serialize;

use super::shape::{ScalingFrame, ShapeFunction};
use crate::airy::ground_state;
use crate::error::{domain, Result};
use crate::quad::adaptive;

/// Regime of the conditioned bridge near the reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// Strictly concave and smooth: Airy-diffusion fluctuations in `frame`.
    Concave { frame: ScalingFrame },
    /// Linear stretch of the concave majorant touched by `g`: excursion.
    Flat { interval: (f64, f64) },
    /// `g` strictly below its concave majorant: free bridge over the gap.
    ConvexGap { interval: (f64, f64) },
    /// Concave kink with slope drop `nu > 0`.
    Ridge { nu: f64 },
    /// Continuous slope, jump in curvature; `v_± = (-2g''(τ±))^{1/3}`.
    CurvatureJump { v_minus: f64, v_plus: f64 },
}

/// Tuning of the concave-majorant search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub grid_size: usize,
    /// Relative tolerance for contact, slope and curvature comparisons.
    pub tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { grid_size: 4001, tolerance: 1e-9 }
    }
}

/// [`classify_with`] with default options.
pub fn classify(g: &ShapeFunction, tau: f64) -> Result<Regime> {
    classify_with(g, tau, ClassifyOptions::default())
}

/// Classifies `g` at the point `τ` of its domain `[lo, hi]`, where
/// `τ ∈ (-1, 1)` maps affinely onto the domain.
pub fn classify_with(g: &ShapeFunction, tau: f64, opts: ClassifyOptions) -> Result<Regime> {
    if !(tau > -1.0 && tau < 1.0) {
        return domain(format!("tau must lie in (-1, 1), got {tau}"));
    }
    let (lo, hi) = g.domain();
    let half = 0.5 * (hi - lo);
    let t = lo + (tau + 1.0) * half;

    let mut xs: Vec<f64> = (0..opts.grid_size).map(|i| lo + (hi - lo) * i as f64 / (opts.grid_size - 1) as f64).collect();
    xs.extend(g.breakpoints());
    xs.push(t);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ys: Vec<f64> = xs.iter().map(|&x| g.value_clamped(x)).collect();
    let scale = ys.iter().fold(half, |m, y| m.max(y.abs()));
    let tol = opts.tolerance * scale;
    let hull = upper_hull(&xs, &ys, tol);

    let ti = xs.iter().position(|&x| x == t).expect("reference point is on the grid");
    let at_vertex = hull.contains(&ti);
    if !at_vertex {
        let k = hull.windows(2).position(|w| xs[w[0]] < t && t < xs[w[1]]).expect("hull spans the domain");
        let (ia, ib) = (hull[k], hull[k + 1]);
        let line = |x: f64| ys[ia] + (ys[ib] - ys[ia]) * (x - xs[ia]) / (xs[ib] - xs[ia]);
        let max_gap = (ia..=ib).map(|i| line(xs[i]) - ys[i]).fold(0.0_f64, f64::max);
        let gap_here = line(t) - ys[ti];
        if max_gap <= tol {
            return Ok(Regime::Flat { interval: (xs[ia], xs[ib]) });
        }
        if gap_here > tol {
            let (a, b) = refine_bitangent(g, xs[ia], xs[ib], xs[1] - xs[0]);
            return Ok(Regime::ConvexGap { interval: (a, b) });
        }
    }

    let (d1m, d1p) = g.d1_sided(t)?;
    let (d2m, d2p) = g.d2_sided(t)?;
    if ![d1m, d1p, d2m, d2p].iter().all(|v| v.is_finite()) {
        return domain(format!("one-sided derivatives undefined at t = {t}"));
    }
    let slope_scale = d1m.abs().max(d1p.abs()).max(scale / half);
    let nu = d1m - d1p;
    if nu > opts.tolerance * slope_scale {
        return Ok(Regime::Ridge { nu });
    }
    let curv_scale = d2m.abs().max(d2p.abs()).max(scale / (half * half));
    let ctol = opts.tolerance.sqrt() * curv_scale;
    if d2m < -ctol && d2p < -ctol {
        if (d2m - d2p).abs() > ctol {
            return Ok(Regime::CurvatureJump { v_minus: (-2.0 * d2m).cbrt(), v_plus: (-2.0 * d2p).cbrt() });
        }
        let frame = ScalingFrame::from_curvature(half, tau, -0.5 * (d2m + d2p))?;
        return Ok(Regime::Concave { frame });
    }
    if d2m > ctol && d2p > ctol {
        return Ok(Regime::ConvexGap { interval: (t, t) });
    }
    Ok(Regime::Flat { interval: (t, t) })
}

/// Indices of the upper concave hull of the points, collinear points dropped.
fn upper_hull(xs: &[f64], ys: &[f64], tol: f64) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            // Drop b unless it lies strictly above the chord a–i.
            let chord = ys[a] + (ys[i] - ys[a]) * (xs[b] - xs[a]) / (xs[i] - xs[a]);
            if ys[b] <= chord + tol {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// Moves grid-level contact points `a < b` of a majorant edge onto the
/// tangent points of `g`.
fn refine_bitangent(g: &ShapeFunction, mut a: f64, mut b: f64, h: f64) -> (f64, f64) {
    let (lo, hi) = g.domain();
    let search = |centre: f64, key: &dyn Fn(f64) -> f64| {
        let n = 400;
        (0..=n)
            .map(|i| (centre - h + 2.0 * h * i as f64 / n as f64).clamp(lo, hi))
            .min_by(|x, y| key(*x).total_cmp(&key(*y)))
            .unwrap_or(centre)
    };
    for _ in 0..3 {
        let gb = g.value_clamped(b);
        a = search(a, &|x| if x < b { (gb - g.value_clamped(x)) / (b - x) } else { f64::INFINITY });
        let ga = g.value_clamped(a);
        b = search(b, &|x| if x > a { -(g.value_clamped(x) - ga) / (x - a) } else { f64::INFINITY });
    }
    (a, b)
}

/// Gamma(3, ν) density `½ ν³ x² e^{-νx}` of the height above a ridge.
pub fn ridge_density(nu: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        0.5 * nu.powi(3) * x * x * (-nu * x).exp()
    }
}

/// `Ω(v_- x) Ω(v_+ x) / Z` with `Z` the integral over `(0, ∞)`.
pub fn curvature_jump_density(v_minus: f64, v_plus: f64, x: f64) -> Result<f64> {
    if !(v_minus > 0.0 && v_plus > 0.0) {
        return domain("curvature-jump scales must be positive");
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let z = curvature_jump_norm(v_minus, v_plus);
    Ok(ground_state(v_minus * x) * ground_state(v_plus * x) / z)
}

fn curvature_jump_norm(v_minus: f64, v_plus: f64) -> f64 {
    let upper = 40.0 / v_minus.min(v_plus);
    adaptive(|x| ground_state(v_minus * x) * ground_state(v_plus * x), 0.0, upper, 1e-14)
}

/// Canonical test shapes on `[-1, 1]`.
pub mod canonical {
    use super::super::shape::{PieceFnBox, ShapeFunction};

    /// `1 - |t|`.
    pub fn tent() -> ShapeFunction {
        ShapeFunction::piecewise(
            "tent",
            vec![
                (-1.0, 0.0, Box::new(|t: f64| [1.0 + t, 1.0, 0.0]) as PieceFnBox),
                (0.0, 1.0, Box::new(|t: f64| [1.0 - t, -1.0, 0.0]) as PieceFnBox),
            ],
        )
        .expect("contiguous pieces")
    }

    /// Constant `0.49` on `[-0.3, 0.3]`, closed by `0.49 - (|t| - 0.3)²`.
    pub fn flat_top() -> ShapeFunction {
        ShapeFunction::piecewise(
            "flat-top",
            vec![
                (-1.0, -0.3, Box::new(|t: f64| [0.49 - (t + 0.3).powi(2), -2.0 * (t + 0.3), -2.0]) as PieceFnBox),
                (-0.3, 0.3, Box::new(|_: f64| [0.49, 0.0, 0.0]) as PieceFnBox),
                (0.3, 1.0, Box::new(|t: f64| [0.49 - (t - 0.3).powi(2), -2.0 * (t - 0.3), -2.0]) as PieceFnBox),
            ],
        )
        .expect("contiguous pieces")
    }

    /// `(1 - t²)(1 - ½ e^{-t²/0.02})`: concave flanks with a convex dip at 0.
    pub fn convex_dip() -> ShapeFunction {
        ShapeFunction::smooth("convex-dip", -1.0, 1.0, |t| {
            let s = 0.02;
            let e = (-t * t / s).exp();
            let p = 1.0 - t * t;
            let q = 1.0 - 0.5 * e;
            let (dp, ddp) = (-2.0 * t, -2.0);
            let dq = 0.5 * e * 2.0 * t / s;
            let ddq = 0.5 * e * (2.0 / s - 4.0 * t * t / (s * s));
            [p * q, dp * q + p * dq, ddp * q + 2.0 * dp * dq + p * ddq]
        })
    }

    /// Two parabolas meeting at 0 with matching slope and curvatures
    /// `-2` (left) and `-6` (right), vanishing at `±1`.
    pub fn curvature_jump() -> ShapeFunction {
        // Left: a - t², right: a - 3t², both with slope 0 at 0; the outer
        // quadratic terms make g(±1) = 0.
        ShapeFunction::piecewise(
            "curvature-jump",
            vec![
                (-1.0, 0.0, Box::new(|t: f64| [1.0 - t * t, -2.0 * t, -2.0]) as PieceFnBox),
                (0.0, 1.0, Box::new(|t: f64| [1.0 - t * t * (3.0 - 2.0 * t), -6.0 * t + 6.0 * t * t, -6.0 + 12.0 * t]) as PieceFnBox),
            ],
        )
        .expect("contiguous pieces")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::shape::{power_parabola, semicircle};
    use crate::fsdiff::stationary_pdf;

    #[test]
    fn smooth_concave_shapes() {
        let c = semicircle(1.0).unwrap();
        for tau in [-0.9, -0.3, 0.0, 0.5] {
            match classify(&c, tau).unwrap() {
                Regime::Concave { frame } => {
                    let expected = (2.0 / (1.0 - tau * tau).powf(1.5)).cbrt();
                    assert!((frame.v_s / expected - 1.0).abs() < 1e-9);
                }
                r => panic!("semicircle at {tau}: {r:?}"),
            }
        }
        let p = power_parabola(1.0, 1.5).unwrap();
        assert!(matches!(classify(&p, 0.2).unwrap(), Regime::Concave { .. }));
    }

    #[test]
    fn tent_is_ridge() {
        match classify(&canonical::tent(), 0.0).unwrap() {
            Regime::Ridge { nu } => assert!((nu - 2.0).abs() < 1e-12),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn flat_top_interval() {
        match classify(&canonical::flat_top(), 0.1).unwrap() {
            Regime::Flat { interval } => {
                assert!((interval.0 + 0.3).abs() < 1e-3 && (interval.1 - 0.3).abs() < 1e-3, "{interval:?}");
            }
            r => panic!("{r:?}"),
        }
        assert!(matches!(classify(&canonical::flat_top(), 0.7).unwrap(), Regime::Concave { .. }));
    }

    #[test]
    fn convex_dip_gap() {
        match classify(&canonical::convex_dip(), 0.0).unwrap() {
            Regime::ConvexGap { interval } => {
                assert!(interval.0 < -0.05 && interval.1 > 0.05);
                assert!((interval.0 + interval.1).abs() < 1e-3);
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn curvature_jump_shape() {
        match classify(&canonical::curvature_jump(), 0.0).unwrap() {
            Regime::CurvatureJump { v_minus, v_plus } => {
                assert!((v_minus - 4f64.cbrt()).abs() < 1e-12);
                assert!((v_plus - 12f64.cbrt()).abs() < 1e-12);
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn stable_under_tiny_perturbation() {
        let base = canonical::convex_dip();
        let pert = ShapeFunction::smooth("perturbed", -1.0, 1.0, move |t| {
            let v = base.value_clamped(t);
            let (d1, _) = base.d1_sided(t).unwrap();
            let (d2, _) = base.d2_sided(t).unwrap();
            [v + 1e-12 * (t * 7.0).sin(), d1 + 7e-12 * (t * 7.0).cos(), d2 - 49e-12 * (t * 7.0).sin()]
        });
        for tau in [0.0, 0.6] {
            let a = classify(&canonical::convex_dip(), tau).unwrap();
            let b = classify(&pert, tau).unwrap();
            assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b));
        }
    }

    #[test]
    fn ridge_law_moments() {
        for nu in [0.5, 1.0, 3.0] {
            let upper = 200.0 / nu;
            let mass = adaptive(|x| ridge_density(nu, x), 0.0, upper, 1e-14);
            let mean = adaptive(|x| x * ridge_density(nu, x), 0.0, upper, 1e-14);
            assert!((mass - 1.0).abs() < 1e-10);
            assert!((mean - 3.0 / nu).abs() < 1e-10);
        }
    }

    #[test]
    fn curvature_jump_reduces_to_stationary_law() {
        for x in [0.1, 1.0, 2.5, 6.0] {
            let d = curvature_jump_density(1.0, 1.0, x).unwrap();
            assert!((d - stationary_pdf(x)).abs() < 1e-10);
        }
        let m = adaptive(|x| curvature_jump_density(0.7, 1.9, x).unwrap(), 0.0, 60.0, 1e-12);
        assert!((m - 1.0).abs() < 1e-9);
    }
}
