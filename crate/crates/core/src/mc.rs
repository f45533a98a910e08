//! Monte Carlo bridges conditioned above barriers, rescaling, and exact
//! lattice-bridge enumeration for monotonicity checks.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::barrier::{ScalingFrame, ShapeFunction};
use crate::error::{domain, Error, Result};
use crate::fsdiff::{replica_rng, Path};

/// Statistics of a rejection-sampling run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionReport {
    pub attempts: u64,
    pub accepts: u64,
    pub acceptance_rate: f64,
    /// Final value of every accepted path, in acceptance order.
    pub endpoints: Vec<f64>,
    /// Retained accepted paths (at most the requested number).
    pub paths: Vec<Path>,
}

impl RejectionReport {
    fn new(attempts: u64, endpoints: Vec<f64>, paths: Vec<Path>) -> Self {
        let accepts = endpoints.len() as u64;
        let acceptance_rate = if attempts == 0 { 0.0 } else { accepts as f64 / attempts as f64 };
        Self { attempts, accepts, acceptance_rate, endpoints, paths }
    }
}

/// Terminal condition of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EndPin {
    /// Bridge pinned to the given value.
    Fixed(f64),
    /// Free Brownian endpoint.
    Free,
}

/// Brownian path on `[t_start, t_end]` started at `start`, conditioned on
/// staying above a barrier at the grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub start: f64,
    pub end: EndPin,
    /// Also reject with the straight-chord crossing probability
    /// `exp(-2 d_i d_{i+1} / Δt)` inside each cell.
    pub crossing_correction: bool,
    pub target_accepts: u64,
    pub max_attempts: u64,
    pub retain_paths: usize,
}

impl ConditioningSpec {
    /// Bridge from `(-T, 0)` to `(T, 0)`.
    pub fn bridge(t_horizon: f64, n_steps: usize) -> Self {
        Self {
            t_start: -t_horizon,
            t_end: t_horizon,
            n_steps,
            start: 0.0,
            end: EndPin::Fixed(0.0),
            crossing_correction: false,
            target_accepts: 1,
            max_attempts: 1_000_000,
            retain_paths: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return domain(format!("need at least 2 steps, got {}", self.n_steps));
        }
        if !(self.t_end > self.t_start) {
            return domain("time interval must have positive length");
        }
        if !self.start.is_finite() {
            return domain("start value must be finite");
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        let dt = (self.t_end - self.t_start) / self.n_steps as f64;
        (0..=self.n_steps)
            .map(|i| if i == self.n_steps { self.t_end } else { self.t_start + i as f64 * dt })
            .collect()
    }
}

/// One attempt: sequential exact sampling with early rejection. The same
/// random stream is consumed step by step regardless of the barrier, so
/// paired runs share their randomness up to the first rejection.
fn attempt(spec: &ConditioningSpec, times: &[f64], barrier: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let n = spec.n_steps;
    let mut values = Vec::with_capacity(n + 1);
    let mut x = spec.start;
    values.push(x);
    if x < barrier[0] {
        return None;
    }
    let t_end = spec.t_end;
    for i in 0..n {
        let dt = times[i + 1] - times[i];
        let z: f64 = rng.sample(StandardNormal);
        let next = match spec.end {
            EndPin::Free => x + dt.sqrt() * z,
            EndPin::Fixed(target) if i + 1 == n => target,
            EndPin::Fixed(target) => {
                let rest = t_end - times[i];
                let mean = x + (target - x) * dt / rest;
                let var = dt * (t_end - times[i + 1]) / rest;
                mean + var.sqrt() * z
            }
        };
        let u: f64 = if spec.crossing_correction { rng.random() } else { 1.0 };
        if next < barrier[i + 1] {
            return None;
        }
        if spec.crossing_correction {
            let (d0, d1) = (x - barrier[i], next - barrier[i + 1]);
            if u < (-2.0 * d0 * d1 / dt).exp() {
                return None;
            }
        }
        x = next;
        values.push(x);
    }
    Some(values)
}

fn barrier_on(times: &[f64], barrier: &(dyn Fn(f64) -> f64 + Sync)) -> Vec<f64> {
    times.iter().map(|&t| barrier(t)).collect()
}

const BATCH: u64 = 4096;

fn run(
    spec: &ConditioningSpec,
    barrier: &(dyn Fn(f64) -> f64 + Sync),
    seed: u64,
    stop_at_target: bool,
) -> Result<RejectionReport> {
    spec.validate()?;
    let times = spec.times();
    let bar = barrier_on(&times, barrier);
    let mut endpoints = Vec::new();
    let mut paths = Vec::new();
    let mut done = 0u64;
    while done < spec.max_attempts {
        let hi = (done + BATCH).min(spec.max_attempts);
        let batch: Vec<Option<Vec<f64>>> = (done..hi)
            .into_par_iter()
            .map(|i| attempt(spec, &times, &bar, &mut replica_rng(seed, i)))
            .collect();
        for (offset, res) in batch.into_iter().enumerate() {
            if let Some(values) = res {
                endpoints.push(*values.last().expect("paths are nonempty"));
                if paths.len() < spec.retain_paths {
                    paths.push(Path { times: times.clone(), values });
                }
                if stop_at_target && endpoints.len() as u64 >= spec.target_accepts {
                    return Ok(RejectionReport::new(done + offset as u64 + 1, endpoints, paths));
                }
            }
        }
        done = hi;
    }
    let report = RejectionReport::new(done, endpoints, paths);
    if stop_at_target {
        return Err(Error::Exhausted(Box::new(report)));
    }
    Ok(report)
}

/// Samples until `target_accepts` paths stay above `barrier` on the grid.
/// Attempt `i` uses stream `i` of `seed`, and acceptances are taken in
/// attempt order, so the result does not depend on the thread schedule.
pub fn rejection_sample(
    spec: &ConditioningSpec,
    barrier: &(dyn Fn(f64) -> f64 + Sync),
    seed: u64,
) -> Result<RejectionReport> {
    run(spec, barrier, seed, true)
}

/// Runs exactly `max_attempts` attempts and reports the acceptance
/// statistics.
pub fn acceptance_run(
    spec: &ConditioningSpec,
    barrier: &(dyn Fn(f64) -> f64 + Sync),
    seed: u64,
) -> Result<RejectionReport> {
    run(spec, barrier, seed, false)
}

/// Exact skeleton of a Brownian bridge on `[-T, T]` with `b(±T) = 0`, by
/// sequential conditional Gaussian sampling.
pub fn sample_bridge(n_steps: usize, t_horizon: f64, rng: &mut ChaCha8Rng) -> Result<Path> {
    if !(t_horizon > 0.0) {
        return domain(format!("bridge needs T > 0, got {t_horizon}"));
    }
    let spec = ConditioningSpec::bridge(t_horizon, n_steps);
    spec.validate()?;
    let times = spec.times();
    let bar = vec![f64::NEG_INFINITY; times.len()];
    let values = attempt(&spec, &times, &bar, rng).expect("no barrier");
    Path::new(times, values)
}

/// First bridge from `(-T, 0)` to `(T, 0)` staying above `shape` on the
/// grid. Exhausting `max_attempts` is an error carrying the report.
pub fn rejection_condition(
    n_steps: usize,
    t_horizon: f64,
    shape: &ShapeFunction,
    max_attempts: u64,
    seed: u64,
) -> Result<(Path, RejectionReport)> {
    let spec = ConditioningSpec { max_attempts, ..ConditioningSpec::bridge(t_horizon, n_steps) };
    let (lo, hi) = shape.domain();
    if lo > -t_horizon || hi < t_horizon {
        return domain(format!("shape domain [{lo}, {hi}] does not cover [-T, T]"));
    }
    let barrier = |t: f64| shape.value_clamped(t);
    let mut report = rejection_sample(&spec, &barrier, seed)?;
    let path = report.paths.remove(0);
    report.paths.push(path.clone());
    Ok((path, report))
}

/// `t ↦ v_s (path(τT + t/h_s) - shape(τT + t/h_s))` for `t ∈ [-N, N]`,
/// on the path's own grid points inside the window plus the interpolated
/// window edges.
pub fn rescale(path: &Path, frame: &ScalingFrame, shape: &ShapeFunction, n: f64) -> Result<Path> {
    if !(n > 0.0) || path.is_empty() {
        return domain("rescale needs N > 0 and a nonempty path");
    }
    let center = frame.reference_time();
    let (lo, hi) = (center - n / frame.h_s, center + n / frame.h_s);
    let (p0, p1) = (path.times[0], path.times[path.len() - 1]);
    if lo < p0 || hi > p1 {
        return domain(format!("window [{lo}, {hi}] outside the path domain [{p0}, {p1}]"));
    }
    let mut raw: Vec<f64> = vec![lo];
    raw.extend(path.times.iter().filter(|&&t| t > lo && t < hi));
    raw.push(hi);
    let mut times = Vec::with_capacity(raw.len());
    let mut values = Vec::with_capacity(raw.len());
    for t in raw {
        let x = path.value_at(t).expect("inside the path domain");
        times.push(frame.h_s * (t - center));
        values.push(frame.v_s * (x - shape.value(t)?));
    }
    Path::new(times, values)
}

/// Simple-random-walk bridge of `2N` steps. Bit `i` of `mask` is 1 for an
/// up-step at step `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeBridge {
    pub n: usize,
    pub start: i64,
    pub mask: u32,
}

/// Largest `N` accepted by [`rw_enumerate`].
pub const MAX_LATTICE_N: usize = 12;

impl LatticeBridge {
    pub fn steps(&self) -> impl Iterator<Item = i64> + '_ {
        (0..2 * self.n).map(|i| if self.mask >> i & 1 == 1 { 1 } else { -1 })
    }

    /// Heights `ξ(0), …, ξ(2N)` in lattice units.
    pub fn heights(&self) -> Vec<i64> {
        let mut h = Vec::with_capacity(2 * self.n + 1);
        let mut x = self.start;
        h.push(x);
        for s in self.steps() {
            x += s;
            h.push(x);
        }
        h
    }

    /// `Δt = 1/(2N)`.
    pub fn dt(&self) -> f64 {
        1.0 / (2 * self.n) as f64
    }

    /// `Δx = √Δt`.
    pub fn dx(&self) -> f64 {
        self.dt().sqrt()
    }

    /// `B_N(kΔt) = Δx ξ(k)` at the lattice times.
    pub fn values(&self) -> Vec<f64> {
        let dx = self.dx();
        self.heights().iter().map(|&h| dx * h as f64).collect()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Every bridge of `2N` steps from `start` (in lattice units) to 0, each
/// exactly once, in increasing mask order (Gosper's hack).
pub fn rw_enumerate_from(n: usize, start: i64) -> Result<Vec<LatticeBridge>> {
    if n == 0 || n > MAX_LATTICE_N {
        return domain(format!("lattice N must lie in 1..={MAX_LATTICE_N}, got {n}"));
    }
    let len = 2 * n as i64;
    if start.abs() > len || (len - start) % 2 != 0 {
        return domain(format!("no bridge of {len} steps from {start} to 0"));
    }
    let ups = ((len - start) / 2) as u32;
    let total = binomial(len as u64, ups as u64) as usize;
    let mut out = Vec::with_capacity(total);
    if ups == 0 {
        out.push(LatticeBridge { n, start, mask: 0 });
        return Ok(out);
    }
    let limit: u64 = 1 << len;
    let mut v: u64 = (1u64 << ups) - 1;
    while v < limit {
        out.push(LatticeBridge { n, start, mask: v as u32 });
        let t = v | (v - 1);
        let tz = v.trailing_zeros();
        v = (t + 1) | (((!t & (t + 1)) - 1) >> (tz + 1));
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

/// All `C(2N, N)` bridges from 0 to 0.
pub fn rw_enumerate(n: usize) -> Result<Vec<LatticeBridge>> {
    rw_enumerate_from(n, 0)
}

/// Lattice barrier: `ξ(k) ≥ min_height[k]`, `None` meaning no constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatticeBarrier {
    pub min_height: Vec<Option<i64>>,
}

impl LatticeBarrier {
    /// `s ≡ -∞`.
    pub fn none(n: usize) -> Self {
        Self { min_height: vec![None; 2 * n + 1] }
    }

    /// `ξ ≥ h` everywhere.
    pub fn constant(n: usize, h: i64) -> Self {
        Self { min_height: vec![Some(h); 2 * n + 1] }
    }

    /// `B_N(kΔt) ≥ s(kΔt)`, i.e. `ξ(k) ≥ ⌈s(kΔt)/Δx⌉`; infinite or NaN
    /// values of `s` are unconstrained.
    pub fn from_fn(n: usize, s: impl Fn(f64) -> f64) -> Self {
        let dt = 1.0 / (2 * n) as f64;
        let dx = dt.sqrt();
        let min_height = (0..=2 * n)
            .map(|k| {
                let v = s(k as f64 * dt) / dx;
                v.is_finite().then(|| v.ceil() as i64)
            })
            .collect();
        Self { min_height }
    }

    pub fn n(&self) -> usize {
        (self.min_height.len() - 1) / 2
    }

    pub fn admits(&self, heights: &[i64]) -> bool {
        heights.iter().zip(&self.min_height).all(|(h, m)| m.is_none_or(|m| *h >= m))
    }

    /// Pointwise `self ≤ other` (an absent constraint is `-∞`).
    pub fn below(&self, other: &Self) -> bool {
        self.min_height.iter().zip(&other.min_height).all(|(a, b)| match (a, b) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a <= b,
        })
    }
}

/// Path functional with rational values.
#[derive(Clone)]
pub enum Functional {
    /// Constant 1.
    One,
    /// `ξ(k)`.
    Coordinate(usize),
    /// `max_k ξ(k)`.
    RunningMax,
    /// `Σ_k ξ(k)`.
    PathSum,
    /// Any rational-valued functional of the heights.
    Custom(PathFunctional),
}

/// Shared rational-valued map on lattice height sequences.
pub type PathFunctional = Arc<dyn Fn(&[i64]) -> BigRational + Send + Sync>;

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::One => write!(f, "One"),
            Self::Coordinate(k) => write!(f, "Coordinate({k})"),
            Self::RunningMax => write!(f, "RunningMax"),
            Self::PathSum => write!(f, "PathSum"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Functional {
    /// The built-in increasing functionals.
    pub fn monotone_family(n: usize) -> Vec<Self> {
        vec![Self::Coordinate(n), Self::RunningMax, Self::PathSum]
    }

    pub fn name(&self) -> String {
        match self {
            Self::One => "one".into(),
            Self::Coordinate(k) => format!("coordinate-{k}"),
            Self::RunningMax => "running-max".into(),
            Self::PathSum => "path-sum".into(),
            Self::Custom(_) => "custom".into(),
        }
    }

    fn integer(&self, h: &[i64]) -> Option<i64> {
        match self {
            Self::One => Some(1),
            Self::Coordinate(k) => Some(h[*k]),
            Self::RunningMax => h.iter().copied().max(),
            Self::PathSum => Some(h.iter().sum()),
            Self::Custom(_) => None,
        }
    }

    pub fn eval(&self, h: &[i64]) -> BigRational {
        match self {
            Self::Custom(f) => f(h),
            other => BigRational::from_integer(BigInt::from(other.integer(h).expect("integer functional"))),
        }
    }
}

/// Exact `Σ_{b ≥ s} f(b) / #{b ≥ s}` over the bridges of `2N` steps from
/// `start` (lattice units) to 0, together with the number of admissible
/// bridges.
pub fn rw_conditional_expectation_from(
    n: usize,
    start: i64,
    barrier: &LatticeBarrier,
    f: &Functional,
) -> Result<(BigRational, u64)> {
    if barrier.n() != n {
        return domain(format!("barrier has {} points, expected {}", barrier.min_height.len(), 2 * n + 1));
    }
    if let Functional::Coordinate(k) = f {
        if *k > 2 * n {
            return domain(format!("coordinate {k} beyond the path length {}", 2 * n));
        }
    }
    let paths = rw_enumerate_from(n, start)?;
    let mut count = 0u64;
    let mut int_sum: i128 = 0;
    let mut rat_sum = BigRational::zero();
    for b in &paths {
        let h = b.heights();
        if !barrier.admits(&h) {
            continue;
        }
        count += 1;
        match f.integer(&h) {
            Some(v) => int_sum += v as i128,
            None => rat_sum += f.eval(&h),
        }
    }
    if count == 0 {
        return Err(Error::EmptyConstraint(format!("no lattice bridge of N = {n} from {start} satisfies the barrier")));
    }
    let total = rat_sum + BigRational::from_integer(BigInt::from(int_sum));
    Ok((total / BigRational::from_integer(BigInt::from(count)), count))
}

/// [`rw_conditional_expectation_from`] for bridges from 0.
pub fn rw_conditional_expectation(n: usize, barrier: &LatticeBarrier, f: &Functional) -> Result<BigRational> {
    Ok(rw_conditional_expectation_from(n, 0, barrier, f)?.0)
}

/// Exact probability that a uniform lattice bridge satisfies `barrier`.
pub fn rw_probability(n: usize, barrier: &LatticeBarrier) -> Result<BigRational> {
    let total = binomial(2 * n as u64, n as u64);
    let admitted = match rw_conditional_expectation_from(n, 0, barrier, &Functional::One) {
        Ok((_, c)) => c,
        Err(Error::EmptyConstraint(_)) => 0,
        Err(e) => return Err(e),
    };
    Ok(BigRational::new(BigInt::from(admitted), BigInt::from(total)))
}

/// Two exact conditional expectations and whether `first ≤ second`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingVerdict {
    pub first: String,
    pub second: String,
    pub first_value: f64,
    pub second_value: f64,
    pub ordered: bool,
    pub equal: bool,
}

impl CouplingVerdict {
    fn new(a: &BigRational, b: &BigRational) -> Self {
        let f = |r: &BigRational| {
            use num_traits::ToPrimitive;
            r.to_f64().unwrap_or(f64::NAN)
        };
        Self {
            first: a.to_string(),
            second: b.to_string(),
            first_value: f(a),
            second_value: f(b),
            ordered: a <= b,
            equal: a == b,
        }
    }
}

/// Checks `E^{s_1}[f] ≤ E^{s_2}[f]` for `s_1 ≤ s_2`, starting from
/// `start` (lattice units, `start = 0` for the plain bridge).
pub fn coupling_check(
    n: usize,
    start: i64,
    s1: &LatticeBarrier,
    s2: &LatticeBarrier,
    f: &Functional,
) -> Result<CouplingVerdict> {
    if !s1.below(s2) {
        return Err(Error::Precondition("coupling check needs s1 <= s2 on the lattice".into()));
    }
    let (a, _) = rw_conditional_expectation_from(n, start, s1, f)?;
    let (b, _) = rw_conditional_expectation_from(n, start, s2, f)?;
    Ok(CouplingVerdict::new(&a, &b))
}

/// Checks `E^{(0)}[f] ≤ E^{(z)}[f]` for bridges above `s` started at 0 and
/// at `z ≥ 0` (both in lattice units).
pub fn shifted_start_check(n: usize, z: i64, s: &LatticeBarrier, f: &Functional) -> Result<CouplingVerdict> {
    if z < 0 {
        return Err(Error::Precondition(format!("shifted start must be >= 0, got {z}")));
    }
    let (a, _) = rw_conditional_expectation_from(n, 0, s, f)?;
    let (b, _) = rw_conditional_expectation_from(n, z, s, f)?;
    Ok(CouplingVerdict::new(&a, &b))
}

/// Discrete law on lattice start points: `(start, weight)` pairs with
/// rational weights summing to 1.
pub type StartLaw = Vec<(i64, BigRational)>;

fn check_law(g: &StartLaw) -> Result<()> {
    if g.is_empty() || g.iter().any(|(_, w)| *w < BigRational::zero()) {
        return Err(Error::Precondition("start law needs nonnegative weights".into()));
    }
    let total: BigRational = g.iter().map(|(_, w)| w.clone()).sum();
    if total != BigRational::one() {
        return Err(Error::Precondition(format!("start law weights sum to {total}, not 1")));
    }
    Ok(())
}

fn cdf_at(g: &StartLaw, x: i64) -> BigRational {
    g.iter().filter(|(s, _)| *s <= x).map(|(_, w)| w.clone()).sum()
}

/// `g1` is first-order stochastically dominated by `g2`:
/// `F_1(x) ≥ F_2(x)` for every `x`.
pub fn dominated_by(g1: &StartLaw, g2: &StartLaw) -> bool {
    g1.iter().chain(g2).all(|(x, _)| cdf_at(g1, *x) >= cdf_at(g2, *x))
}

/// Checks `E_{g_1}[E^{(x)}[f | b ≥ s]] ≤ E_{g_2}[E^{(x)}[f | b ≥ s]]` for
/// start laws with `g_1` dominated by `g_2`, as an exact mixture over start
/// points. A failed dominance precondition is a [`Error::Precondition`],
/// distinct from an unordered verdict.
pub fn dominance_transfer_check(
    g1: &StartLaw,
    g2: &StartLaw,
    s: &LatticeBarrier,
    f: &Functional,
    n: usize,
) -> Result<CouplingVerdict> {
    check_law(g1)?;
    check_law(g2)?;
    if !dominated_by(g1, g2) {
        return Err(Error::Precondition("g1 is not stochastically dominated by g2".into()));
    }
    let mix = |g: &StartLaw| -> Result<BigRational> {
        let mut acc = BigRational::zero();
        for (x, w) in g {
            if w.is_zero() {
                continue;
            }
            acc += w * rw_conditional_expectation_from(n, *x, s, f)?.0;
        }
        Ok(acc)
    };
    Ok(CouplingVerdict::new(&mix(g1)?, &mix(g2)?))
}

/// Random concave lattice barrier pair `s_1 ≤ s_2` with `s_2(0), s_2(1) ≤ 0`:
/// `s_2(t) = a - ½c(t - t_0)²` lowered until both ends are `≤ 0`, and
/// `s_1` a lower, more curved parabola with the same apex time. Pairs
/// that no bridge of `2N` steps can satisfy are redrawn.
pub fn random_concave_pair(n: usize, rng: &mut impl Rng) -> (LatticeBarrier, LatticeBarrier) {
    loop {
        let c: f64 = rng.random_range(0.5..8.0);
        let t0: f64 = rng.random_range(0.2..0.8);
        let a: f64 = rng.random_range(-0.3..0.6);
        let end = (a - 0.5 * c * t0 * t0).max(a - 0.5 * c * (1.0 - t0) * (1.0 - t0));
        let top = a - end.max(0.0);
        let drop: f64 = rng.random_range(0.0..0.5);
        let c1 = c + rng.random_range(0.0..4.0);
        let s2 = LatticeBarrier::from_fn(n, |t| top - 0.5 * c * (t - t0) * (t - t0));
        let s1 = LatticeBarrier::from_fn(n, |t| top - drop - 0.5 * c1 * (t - t0) * (t - t0));
        if rw_probability(n, &s2).is_ok_and(|p| !p.is_zero()) {
            return (s1, s2);
        }
    }
}

/// Acceptance rate of uniform random lattice bridges under `barrier`,
/// estimated from `attempts` shuffles.
pub fn lattice_acceptance(n: usize, barrier: &LatticeBarrier, attempts: u64, seed: u64) -> Result<RejectionReport> {
    if n == 0 || barrier.n() != n {
        return domain("lattice barrier does not match N");
    }
    let accepts: u64 = (0..attempts)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let mut steps: Vec<i64> = (0..2 * n).map(|j| if j < n { 1 } else { -1 }).collect();
            for j in (1..steps.len()).rev() {
                let k = rng.random_range(0..=j);
                steps.swap(j, k);
            }
            let mut h = vec![0i64];
            for s in steps {
                h.push(h[h.len() - 1] + s);
            }
            u64::from(barrier.admits(&h))
        })
        .sum();
    let mut report = RejectionReport::new(attempts, Vec::new(), Vec::new());
    report.accepts = accepts;
    report.acceptance_rate = accepts as f64 / attempts.max(1) as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::ShapeFunction;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn bridge_endpoints_and_reproducibility() {
        let p = sample_bridge(100, 2.0, &mut replica_rng(4, 0)).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p.values[100], 0.0);
        assert_eq!(p.times[0], -2.0);
        assert_eq!(p.times[100], 2.0);
        let q = sample_bridge(100, 2.0, &mut replica_rng(4, 0)).unwrap();
        assert_eq!(p, q);
        assert!(sample_bridge(1, 1.0, &mut replica_rng(0, 0)).is_err());
    }

    #[test]
    fn bridge_midpoint_variance() {
        let n = 100_000;
        let t = 3.0;
        let mids: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| sample_bridge(8, t, &mut replica_rng(11, i)).unwrap().values[4])
            .collect();
        let var = mids.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - t / 2.0).abs() <= 3.0 * (t / 2.0) * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn bridge_covariance() {
        let n = 200_000u64;
        let t = 1.0;
        let paths: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| sample_bridge(6, t, &mut replica_rng(12, i)).unwrap().values)
            .collect();
        let times = sample_bridge(6, t, &mut replica_rng(0, 0)).unwrap().times;
        for i in 1..6 {
            for j in 1..6 {
                let (s, u) = (times[i], times[j]);
                let exact = (s.min(u) + t) - (s + t) * (u + t) / (2.0 * t);
                let est = paths.iter().map(|p| p[i] * p[j]).sum::<f64>() / n as f64;
                assert!((est - exact).abs() < 6.0 * 0.5 / (n as f64).sqrt() + 1e-3, "({i},{j}) {est} vs {exact}");
            }
        }
    }

    #[test]
    fn rejection_without_barrier_accepts_everything() {
        let spec = ConditioningSpec { max_attempts: 500, ..ConditioningSpec::bridge(1.0, 50) };
        let r = acceptance_run(&spec, &|_| f64::NEG_INFINITY, 3).unwrap();
        assert_eq!(r.acceptance_rate, 1.0);
        assert_eq!(r.accepts, r.attempts);
    }

    #[test]
    fn exhaustion_is_reported() {
        let spec = ConditioningSpec { max_attempts: 100, ..ConditioningSpec::bridge(1.0, 50) };
        match rejection_sample(&spec, &|_| 10.0, 1) {
            Err(Error::Exhausted(rep)) => {
                assert_eq!(rep.attempts, 100);
                assert_eq!(rep.accepts, 0);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn rejection_condition_stays_above() {
        let shape = ShapeFunction::smooth("dip", -1.0, 1.0, |t| [-0.2 - 0.1 * t * t, -0.2 * t, -0.2]);
        let (path, report) = rejection_condition(200, 1.0, &shape, 100_000, 9).unwrap();
        assert_eq!(report.accepts, 1);
        for (t, v) in path.times.iter().zip(&path.values) {
            assert!(*v >= shape.value(*t).unwrap());
        }
    }

    #[test]
    fn acceptance_is_monotone_in_the_barrier() {
        let spec = ConditioningSpec { max_attempts: 20_000, ..ConditioningSpec::bridge(1.0, 100) };
        let low = acceptance_run(&spec, &|t: f64| -0.3 - 0.2 * t * t, 5).unwrap();
        let high = acceptance_run(&spec, &|t: f64| -0.2 - 0.2 * t * t, 5).unwrap();
        assert!(high.accepts <= low.accepts);
    }

    #[test]
    fn rescale_identity_restricts() {
        let p = sample_bridge(40, 2.0, &mut replica_rng(1, 0)).unwrap();
        let zero = ShapeFunction::smooth("zero", -2.0, 2.0, |_| [0.0; 3]);
        let q = rescale(&p, &ScalingFrame::identity(2.0, 0.0), &zero, 1.0).unwrap();
        assert_eq!(q.times[0], -1.0);
        assert_eq!(q.times[q.len() - 1], 1.0);
        for (t, v) in q.times.iter().zip(&q.values) {
            assert!((v - p.value_at(*t).unwrap()).abs() < 1e-12);
        }
        assert!(rescale(&p, &ScalingFrame::identity(2.0, 0.0), &zero, 3.0).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(rw_enumerate(2).unwrap().len(), 6);
        let all = rw_enumerate(6).unwrap();
        assert_eq!(all.len(), 924);
        assert!(all.iter().all(|b| b.steps().sum::<i64>() == 0));
        let distinct: std::collections::HashSet<_> = all.iter().map(|b| b.mask).collect();
        assert_eq!(distinct.len(), 924);
        assert_eq!(rw_enumerate_from(3, 2).unwrap().len(), 15);
        assert!(rw_enumerate(13).is_err());
        assert!(rw_enumerate_from(3, 1).is_err());
    }

    #[test]
    fn ballot_probability() {
        for n in 1..=8 {
            let p = rw_probability(n, &LatticeBarrier::constant(n, 0)).unwrap();
            assert_eq!(p, r(1, n as i64 + 1));
        }
        assert_eq!(
            rw_conditional_expectation(4, &LatticeBarrier::none(4), &Functional::One).unwrap(),
            BigRational::one()
        );
    }

    #[test]
    fn lattice_rejection_matches_ballot() {
        let rep = lattice_acceptance(6, &LatticeBarrier::constant(6, 0), 200_000, 2).unwrap();
        let p: f64 = 1.0 / 7.0;
        let sigma = (p * (1.0 - p) / 200_000.0).sqrt();
        assert!((rep.acceptance_rate - p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn conditioned_max_is_locked() {
        let e = rw_conditional_expectation(6, &LatticeBarrier::constant(6, 0), &Functional::RunningMax).unwrap();
        // Brute-force count over the 132 nonnegative bridges of 12 steps.
        assert_eq!(e, r(139, 44));
    }

    #[test]
    fn coupling_orders_and_equalities() {
        let n = 6;
        let none = LatticeBarrier::none(n);
        let zero = LatticeBarrier::constant(n, 0);
        let v = coupling_check(n, 0, &none, &zero, &Functional::PathSum).unwrap();
        assert!(v.ordered && !v.equal);
        let v = coupling_check(n, 0, &zero, &zero, &Functional::RunningMax).unwrap();
        assert!(v.equal);
        assert!(matches!(coupling_check(n, 0, &zero, &none, &Functional::PathSum), Err(Error::Precondition(_))));
        let v = shifted_start_check(n, 2, &zero, &Functional::Coordinate(n)).unwrap();
        assert!(v.ordered);
    }

    #[test]
    fn dominance_transfer() {
        let n = 5;
        let zero = LatticeBarrier::constant(n, 0);
        let f = Functional::RunningMax;
        let point = |x: i64| vec![(x, BigRational::one())];
        assert!(dominance_transfer_check(&point(0), &point(0), &zero, &f, n).unwrap().equal);
        let a = dominance_transfer_check(&point(0), &point(2), &zero, &f, n).unwrap();
        let b = shifted_start_check(n, 2, &zero, &f).unwrap();
        assert_eq!(a, b);
        let uniform = vec![(0, r(1, 2)), (2, r(1, 2))];
        assert!(dominance_transfer_check(&uniform, &point(2), &zero, &f, n).unwrap().ordered);
        assert!(matches!(
            dominance_transfer_check(&point(2), &uniform, &zero, &f, n),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn randomized_concave_couplings() {
        let mut rng = replica_rng(2024, 0);
        for i in 0..200 {
            let n = 4 + i % 5;
            let (s1, s2) = random_concave_pair(n, &mut rng);
            assert!(s1.below(&s2));
            for f in Functional::monotone_family(n) {
                let v = coupling_check(n, 0, &s1, &s2, &f).unwrap();
                assert!(v.ordered, "instance {i}, {}: {} > {}", f.name(), v.first, v.second);
            }
        }
    }
}
