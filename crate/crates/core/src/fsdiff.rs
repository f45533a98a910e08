//! The stationary Airy-drift diffusion `dA = a(A) dt + db` on `(0, ∞)`.
//!
//! Drift `a(x) = Ai'(-ω_1 + x) / Ai(-ω_1 + x)`, stationary density
//! `Ω(x)²`. Paths are generated with Euler–Maruyama; the singular drift at
//! the origin is clamped and steps that would leave `(0, ∞)` are redrawn.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::airy::{ai, ai_log_derivative, ai_prime, ai_prime_at_omega1, ground_state, omega1};
use crate::error::{domain, Result};
use crate::quad::gauss_legendre;

/// Sample trajectory: strictly increasing times with one value each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Path {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return domain(format!("path has {} times but {} values", times.len(), values.len()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("path times must be strictly increasing");
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation at `t`; `None` outside `[times[0], times[last]]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == n {
            return Some(self.values[n - 1]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }
}

/// Euler–Maruyama discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Bound on `|drift|` inside one step.
    pub drift_cap: f64,
}

impl DiffusionConfig {
    /// Configuration with `drift_cap = 0.4 / dt`, the largest round value
    /// compatible with `drift_cap * dt < 0.5`.
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        Self::with_cap(dt, n_steps, 0.4 / dt)
    }

    pub fn with_cap(dt: f64, n_steps: usize, drift_cap: f64) -> Result<Self> {
        let cfg = Self { dt, n_steps, drift_cap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return domain(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.drift_cap >= 0.0) {
            return domain(format!("drift_cap must be nonnegative, got {}", self.drift_cap));
        }
        if self.drift_cap * self.dt >= 0.5 {
            return domain(format!(
                "drift_cap * dt = {} must be below 0.5",
                self.drift_cap * self.dt
            ));
        }
        Ok(())
    }
}

/// `a(x) = Ai'(-ω_1 + x) / Ai(-ω_1 + x)` for `x > 0`.
pub fn drift(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("drift requires x > 0, got {x}"));
    }
    Ok(drift_unchecked(x))
}

fn drift_unchecked(x: f64) -> f64 {
    ai_log_derivative(x - omega1())
}

/// Stationary density `Ω(x)²` on `x > 0`, zero elsewhere.
pub fn stationary_pdf(x: f64) -> f64 {
    if x > 0.0 {
        let o = ground_state(x);
        o * o
    } else {
        0.0
    }
}

/// Stationary distribution function `∫_0^x Ω²`.
///
/// Below `x = 1` the integral is a 24-point Gauss–Legendre sum; above, the
/// tail `∫_x^∞ Ω² = (Ai'(z)² - z Ai(z)²) / Ai'(-ω_1)²` with `z = x - ω_1`
/// is subtracted from one.
pub fn stationary_cdf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x <= 1.0 {
        let (gx, gw) = gl24();
        let half = 0.5 * x;
        let s: f64 = gx.iter().zip(gw).map(|(&g, &w)| w * stationary_pdf(half * (g + 1.0))).sum();
        return (s * half).clamp(0.0, 1.0);
    }
    (1.0 - stationary_tail(x)).clamp(0.0, 1.0)
}

fn stationary_tail(x: f64) -> f64 {
    let z = x - omega1();
    let d = ai_prime_at_omega1();
    let (a, ap) = (ai(z), ai_prime(z));
    ((ap * ap - z * a * a) / (d * d)).max(0.0)
}

fn gl24() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(24))
}

struct InverseCdf {
    u: Vec<f64>,
    x: Vec<f64>,
}

const SAMPLER_NODES: usize = 4096;
const SAMPLER_GEOMETRIC: usize = 512;
const SAMPLER_XMAX: f64 = 40.0;

fn inverse_cdf() -> &'static InverseCdf {
    static T: OnceLock<InverseCdf> = OnceLock::new();
    T.get_or_init(|| {
        let mut x = Vec::with_capacity(SAMPLER_NODES);
        x.push(0.0);
        let (lo, mid) = (1e-4_f64, 0.5_f64);
        let ratio = (mid / lo).powf(1.0 / (SAMPLER_GEOMETRIC - 1) as f64);
        for i in 0..SAMPLER_GEOMETRIC {
            x.push(lo * ratio.powi(i as i32));
        }
        let rest = SAMPLER_NODES - x.len();
        let h = (SAMPLER_XMAX - mid) / rest as f64;
        for i in 1..=rest {
            x.push(mid + i as f64 * h);
        }
        let u = x.iter().map(|&v| stationary_cdf(v)).collect();
        InverseCdf { u, x }
    })
}

/// Draws from `Ω²` by linear interpolation of the inverse distribution
/// function on a fixed 4096-node grid.
pub fn stationary_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let table = inverse_cdf();
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let i = table.u.partition_point(|&c| c < u).clamp(1, table.u.len() - 1);
    let (u0, u1) = (table.u[i - 1], table.u[i]);
    let (x0, x1) = (table.x[i - 1], table.x[i]);
    if u1 <= u0 {
        return x1;
    }
    let x = x0 + (x1 - x0) * (u - u0) / (u1 - u0);
    if x > 0.0 {
        x
    } else {
        table.x[1] * 0.5
    }
}

/// One Euler–Maruyama step from `x > 0`. Proposals at or below zero are
/// redrawn up to 100 times; after that the chain holds at `x`.
pub fn step_em<R: Rng + ?Sized>(x: f64, cfg: &DiffusionConfig, rng: &mut R) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("step_em requires x > 0, got {x}"));
    }
    Ok(step_unchecked(x, cfg, rng))
}

fn step_unchecked<R: Rng + ?Sized>(x: f64, cfg: &DiffusionConfig, rng: &mut R) -> f64 {
    let a = drift_unchecked(x).clamp(-cfg.drift_cap, cfg.drift_cap);
    let mean = x + a * cfg.dt;
    let sd = cfg.dt.sqrt();
    for _ in 0..100 {
        let z: f64 = rng.sample(StandardNormal);
        let next = mean + sd * z;
        if next > 0.0 {
            return next;
        }
    }
    x
}

/// Runs `cfg.n_steps` steps from `x0`; the path has `n_steps + 1` points
/// at times `0, dt, …`.
pub fn simulate_path<R: Rng + ?Sized>(x0: f64, cfg: &DiffusionConfig, rng: &mut R) -> Result<Path> {
    if !(x0 > 0.0) {
        return domain(format!("initial value must be positive, got {x0}"));
    }
    cfg.validate()?;
    let mut times = Vec::with_capacity(cfg.n_steps + 1);
    let mut values = Vec::with_capacity(cfg.n_steps + 1);
    let mut x = x0;
    times.push(0.0);
    values.push(x);
    for i in 1..=cfg.n_steps {
        x = step_unchecked(x, cfg, rng);
        times.push(i as f64 * cfg.dt);
        values.push(x);
    }
    Ok(Path { times, values })
}

/// Final value after `cfg.n_steps` steps, without storing the path.
pub fn simulate_endpoint<R: Rng + ?Sized>(x0: f64, cfg: &DiffusionConfig, rng: &mut R) -> Result<f64> {
    if !(x0 > 0.0) {
        return domain(format!("initial value must be positive, got {x0}"));
    }
    cfg.validate()?;
    let mut x = x0;
    for _ in 0..cfg.n_steps {
        x = step_unchecked(x, cfg, rng);
    }
    Ok(x)
}

/// Independent generator for replica `index` under `seed`. Streams for
/// different indices do not overlap.
pub fn replica_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Endpoints of `n_paths` independent stationary-start replicas. The
/// result is ordered by replica index and does not depend on the thread
/// schedule.
pub fn stationary_endpoints(n_paths: usize, cfg: &DiffusionConfig, seed: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let x0 = stationary_sample(&mut rng);
            let mut x = x0;
            for _ in 0..cfg.n_steps {
                x = step_unchecked(x, cfg, &mut rng);
            }
            x
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy::MU;
    use crate::quad::{adaptive, golden_max};

    #[test]
    fn drift_limits() {
        assert!((drift(1e-6).unwrap() * 1e-6 - 1.0).abs() < 1e-4);
        let x = 50.0;
        assert!((drift(x).unwrap() / (x - omega1()).sqrt() + 1.0).abs() < 0.01);
        assert!(drift(omega1() - MU).unwrap().abs() < 1e-8);
        assert!(drift(0.0).is_err());
        assert!(drift(-1.0).is_err());
    }

    #[test]
    fn drift_is_log_derivative_of_ground_state() {
        let h = 1e-5;
        let mut x = 0.1;
        while x <= 10.0 {
            let fd = ((stationary_pdf(x + h)).ln() - (stationary_pdf(x - h)).ln()) / (4.0 * h);
            assert!((drift(x).unwrap() - fd).abs() < 1e-6, "x = {x}");
            x += 0.137;
        }
    }

    #[test]
    fn stationary_density_normalized_and_peaked() {
        let mass = adaptive(stationary_pdf, 0.0, 40.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-8);
        assert_eq!(stationary_pdf(0.0), 0.0);
        assert_eq!(stationary_pdf(-1.0), 0.0);
        let m = golden_max(stationary_pdf, 0.1, 5.0, 1e-10);
        assert!((m - (omega1() - MU)).abs() < 1e-4);
        assert!((m - 1.3193).abs() < 1e-3);
        assert!((stationary_pdf(m) - 0.5836).abs() < 1e-3);
    }

    #[test]
    fn cdf_matches_quadrature() {
        for x in [1e-3, 0.3, 0.99, 1.0, 1.01, 2.0, 3.5, 7.0, 15.0] {
            let q = adaptive(stationary_pdf, 0.0, x, 1e-14);
            assert!((stationary_cdf(x) - q).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(stationary_cdf(0.0), 0.0);
        assert!((stationary_cdf(40.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        let mut x = 0.0;
        while x < 45.0 {
            let c = stationary_cdf(x);
            assert!(c >= prev, "x = {x}");
            prev = c;
            x += 1e-3;
        }
    }

    #[test]
    fn sampler_matches_cdf() {
        let mut rng = replica_rng(7, 0);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| stationary_sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        xs.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = stationary_cdf(x);
            d = d.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
        }
        assert!(d <= 1.63 / (n as f64).sqrt() * 1.5, "D = {d}");
    }

    #[test]
    fn config_invariants() {
        assert!(DiffusionConfig::new(1e-3, 10).is_ok());
        assert!(DiffusionConfig::with_cap(1e-3, 10, 1e4).is_err());
        assert!(DiffusionConfig::new(0.0, 10).is_err());
    }

    #[test]
    fn paths_stay_positive_and_reproduce() {
        let cfg = DiffusionConfig::new(1e-3, 20_000).unwrap();
        let p1 = simulate_path(1e-3, &cfg, &mut replica_rng(3, 1)).unwrap();
        let p2 = simulate_path(1e-3, &cfg, &mut replica_rng(3, 1)).unwrap();
        assert_eq!(p1, p2);
        assert!(p1.values.iter().all(|&v| v > 0.0));
        assert_eq!(p1.len(), 20_001);
        assert!(simulate_path(0.0, &cfg, &mut replica_rng(3, 1)).is_err());
    }

    #[test]
    fn zero_cap_is_driftless() {
        // Start far from the origin so redraws never trigger.
        let cfg = DiffusionConfig::with_cap(1e-2, 100, 0.0).unwrap();
        let n = 20_000;
        let x0 = 50.0;
        let sum: f64 = (0..n)
            .map(|i| simulate_endpoint(x0, &cfg, &mut replica_rng(11, i)).unwrap() - x0)
            .sum();
        let mean = sum / n as f64;
        let sigma = 1.0; // sqrt(100 * 0.01)
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn detailed_balance_at_stationarity() {
        // Antisymmetric two-point statistic with bounded monotone f, g.
        let cfg = DiffusionConfig::new(1e-3, 1).unwrap();
        let f = |x: f64| x.min(3.0);
        let g = |x: f64| 1.0 / (1.0 + x);
        let n = 400_000;
        let mut rng = replica_rng(5, 0);
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let x = stationary_sample(&mut rng);
            let y = step_em(x, &cfg, &mut rng).unwrap();
            let v = f(x) * g(y) - g(x) * f(y);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se + 1e-5, "mean {mean} se {se}");
    }

    #[test]
    fn path_interpolation() {
        let p = Path::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 6.0]).unwrap();
        assert_eq!(p.value_at(2.0), Some(4.0));
        assert_eq!(p.value_at(3.0), Some(6.0));
        assert_eq!(p.value_at(-0.1), None);
        assert!(Path::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Path::new(vec![0.0], vec![]).is_err());
    }
}
