//! One runner per experiment kind. Runners compute everything in memory
//! and hand back the artifacts; nothing touches the disk here.

use std::path::{Path as FsPath, PathBuf};

use condbridge::airy::{ground_state, AiryTable};
use condbridge::barrier::{
    build_lower_approx, build_upper_approx, circle_frame, containment_check, measured_coefficients,
    predicted_coefficients, semicircle, Side,
};
use condbridge::fsdiff::{replica_rng, simulate_path, stationary_cdf, stationary_sample, DiffusionConfig, Path};
use condbridge::kernel::{
    finite_t_deviation, finite_t_joint_density, finite_t_marginal, heat_kernel_matrix,
    piecewise_entrance_exit_density, w_density, DensityGrid, DensityMetadata, SpectralTruncation, TransferOptions,
};
use condbridge::mc::{
    acceptance_run, coupling_check, dominance_transfer_check, random_concave_pair, rejection_sample,
    rw_probability, shifted_start_check, ConditioningSpec, CouplingVerdict, EndPin, Functional, LatticeBarrier,
};
use condbridge::quad::Axis;
use condbridge::stats::ks_distance;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Config, DensityKind, Experiment, ShapeKind, ShapeSpec};
use crate::output::{fmt12, num, Artifact, Csv, Verdict};

/// Everything a run produces besides the manifest.
#[derive(Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug)]
pub struct RunError(pub String);

impl<E: std::fmt::Display> From<E> for RunError {
    fn from(e: E) -> Self {
        Self(e.to_string())
    }
}

type Run = Result<Outcome, RunError>;

pub fn run(cfg: &Config) -> Run {
    match cfg.experiment {
        Experiment::AiryTable => airy_table(cfg),
        Experiment::Simulate => simulate(cfg),
        Experiment::SampleBridge => sample_bridge(cfg),
        Experiment::Density => density(cfg),
        Experiment::EntranceLaw => entrance_law(cfg),
        Experiment::ScalingStudy => scaling_study(cfg),
        Experiment::Monotonicity => monotonicity(cfg),
        Experiment::Report => report(cfg),
    }
}

fn airy_table(cfg: &Config) -> Run {
    let table = AiryTable::new(cfg.modes)?;
    let mut csv = Csv::new(&["k", "omega_k", "ai_prime_at_minus_omega_k"]);
    for k in 1..=table.len() {
        csv.row(&[k.to_string(), fmt12(table.omega(k)), fmt12(table.deriv(k))]);
    }
    let check = table.validate();
    Ok(Outcome {
        artifacts: vec![Artifact::csv("airy_table.csv", csv)],
        verdicts: vec![Verdict::new(
            "table-invariants",
            check.is_ok(),
            check.err().unwrap_or_else(|| format!("{} zeros increasing, gap bound and derivative signs hold", table.len())),
        )],
    })
}

fn simulate(cfg: &Config) -> Run {
    let dc = DiffusionConfig::new(cfg.dt, cfg.n_steps)?;
    let paths: Vec<Path> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(cfg.seed, i);
            let x0 = cfg.x0.unwrap_or_else(|| stationary_sample(&mut rng));
            simulate_path(x0, &dc, &mut rng)
        })
        .collect::<condbridge::Result<_>>()?;
    let mut csv = Csv::new(&["path_id", "t", "x"]);
    for (id, p) in paths.iter().enumerate() {
        let last = p.len() - 1;
        for i in (0..p.len()).filter(|i| i % cfg.record_every == 0 || *i == last) {
            csv.row(&[id.to_string(), fmt12(p.times[i]), fmt12(p.values[i])]);
        }
    }
    let mut verdicts = Vec::new();
    if cfg.x0.is_none() && cfg.n_paths >= 10 {
        let ends: Vec<f64> = paths.iter().map(|p| p.values[p.len() - 1]).collect();
        // 0.1% critical value of the one-sample KS statistic.
        let threshold = cfg.ks_threshold.unwrap_or(1.95 / (cfg.n_paths as f64).sqrt());
        let ks = ks_distance(&ends, stationary_cdf, threshold)?;
        verdicts.push(Verdict::new(
            "stationarity-ks",
            ks.pass,
            format!("KS {} over {} endpoints, threshold {}", fmt12(ks.statistic), ks.n, fmt12(threshold)),
        ));
    }
    Ok(Outcome { artifacts: vec![Artifact::csv("paths.csv", csv)], verdicts })
}

fn sample_bridge(cfg: &Config) -> Run {
    let spec_shape = cfg.shape.as_ref().expect("validated");
    let shape = spec_shape.build()?;
    let t = shape.domain().1;
    let barrier = |x: f64| shape.value_clamped(x);
    let spec = ConditioningSpec {
        start: barrier(-t) + cfg.start,
        end: EndPin::Fixed(barrier(t) + cfg.end),
        max_attempts: cfg.max_attempts,
        target_accepts: cfg.n_paths as u64,
        retain_paths: cfg.n_paths,
        crossing_correction: cfg.crossing_correction,
        ..ConditioningSpec::bridge(t, cfg.n_steps)
    };
    let report = rejection_sample(&spec, &barrier, cfg.seed)?;
    let mut csv = Csv::new(&["path_id", "t", "x", "barrier"]);
    for (id, p) in report.paths.iter().enumerate() {
        for (t, x) in p.times.iter().zip(&p.values) {
            csv.row(&[id.to_string(), fmt12(*t), fmt12(*x), fmt12(barrier(*t))]);
        }
    }
    let mut stats = Map::new();
    stats.insert("seed".into(), json!(cfg.seed));
    stats.insert("shape".into(), json!(spec_shape.kind.name()));
    stats.insert("T".into(), num(t));
    stats.insert("n_steps".into(), json!(cfg.n_steps));
    stats.insert("start_height".into(), num(cfg.start));
    stats.insert("end_height".into(), num(cfg.end));
    stats.insert("crossing_correction".into(), json!(cfg.crossing_correction));
    stats.insert("attempts".into(), json!(report.attempts));
    stats.insert("accepts".into(), json!(report.accepts));
    stats.insert("acceptance_rate".into(), num(report.acceptance_rate));
    stats.insert("grid_caveat".into(), json!("acceptance is checked on the time grid only"));
    let mut verdicts = Vec::new();
    if cfg.refinement_check {
        let coarse = ConditioningSpec { max_attempts: cfg.refinement_attempts, ..spec.clone() };
        let fine = ConditioningSpec { n_steps: 2 * cfg.n_steps, ..coarse.clone() };
        let r1 = acceptance_run(&coarse, &barrier, cfg.seed)?;
        let r2 = acceptance_run(&fine, &barrier, cfg.seed)?;
        let change = if r1.accepts == 0 { f64::INFINITY } else { (r2.acceptance_rate / r1.acceptance_rate - 1.0).abs() };
        let (p1, p2) = (r1.acceptance_rate, r2.acceptance_rate);
        let n = cfg.refinement_attempts as f64;
        // Three standard errors of the difference of two independent rates.
        let noise = 3.0 * ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / n).sqrt();
        let stable = (p2 - p1).abs() <= (0.1 * p1).max(noise) && r1.accepts > 0;
        stats.insert(
            "refinement".into(),
            json!({
                "attempts": cfg.refinement_attempts,
                "rate": num(r1.acceptance_rate),
                "rate_doubled_steps": num(r2.acceptance_rate),
                "relative_change": num(change),
                "sampling_noise": num(noise),
            }),
        );
        verdicts.push(Verdict::new(
            "grid-refinement",
            stable,
            format!(
                "acceptance {} at {} steps, {} at {} steps (relative change {}, sampling noise {})",
                fmt12(p1),
                cfg.n_steps,
                fmt12(p2),
                2 * cfg.n_steps,
                fmt12(change),
                fmt12(noise)
            ),
        ));
    }
    Ok(Outcome {
        artifacts: vec![Artifact::csv("bridges.csv", csv), Artifact::json("bridge_stats.json", "condbridge.bridge-stats/1", stats)],
        verdicts,
    })
}

fn metadata(cfg: &Config, axis: &Axis, trunc: Option<&SpectralTruncation>) -> DensityMetadata {
    DensityMetadata {
        modes: trunc.map_or(0, |t| t.k()),
        resolution: axis.len(),
        f_coefficient: (cfg.density == DensityKind::Killed).then_some(cfg.f_coefficient),
        clamps: trunc.map(|t| t.diagnostics()).unwrap_or_default(),
        discretization_error: None,
        tolerance: None,
        converged: true,
    }
}

fn joint<F>(axis: &Axis, f: F) -> condbridge::Result<Vec<f64>>
where
    F: Fn(f64, f64) -> condbridge::Result<f64> + Sync,
{
    let pts = &axis.points;
    let rows: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|&x| pts.iter().map(|&y| f(x, y)).collect::<condbridge::Result<Vec<f64>>>())
        .collect::<condbridge::Result<_>>()?;
    Ok(rows.concat())
}

fn density(cfg: &Config) -> Run {
    let axis = Axis::composite(0.0, cfg.grid_max, cfg.grid_panels, 8);
    let shape: Option<&ShapeSpec> = cfg.shape.as_ref();
    let trunc = SpectralTruncation::new(cfg.modes)?;
    let grid = match cfg.density {
        DensityKind::Stationary => {
            let v = axis.points.iter().map(|&x| ground_state(x).powi(2)).collect();
            DensityGrid::one_point(&axis, v, metadata(cfg, &axis, None))?
        }
        DensityKind::JointLimit => {
            let g = heat_kernel_matrix(&axis.points, &axis.points, 2.0 * cfg.window, &trunc)?;
            let o: Vec<f64> = axis.points.iter().map(|&x| ground_state(x)).collect();
            let n = o.len();
            let v = (0..n * n).map(|k| trunc_nonneg(o[k / n] * g[k] * o[k % n])).collect();
            DensityGrid::two_point(&axis, &axis, v, metadata(cfg, &axis, Some(&trunc)))?
        }
        DensityKind::JointFinite => {
            let s = shape.expect("validated");
            let v = joint(&axis, |x, y| finite_t_joint_density(x, y, cfg.window, s.t_horizon, s.tau, s.gamma, &trunc))?;
            DensityGrid::two_point(&axis, &axis, v, metadata(cfg, &axis, Some(&trunc)))?
        }
        DensityKind::Marginal => {
            let s = shape.expect("validated");
            let v = axis
                .points
                .iter()
                .map(|&x| finite_t_marginal(x, s.t_horizon, s.tau, s.gamma, &trunc))
                .collect::<condbridge::Result<_>>()?;
            DensityGrid::one_point(&axis, v, metadata(cfg, &axis, Some(&trunc)))?
        }
        DensityKind::Killed => {
            let s = shape.expect("validated");
            let g = s.build()?;
            let v = axis
                .points
                .iter()
                .map(|&x| w_density(cfg.start, cfg.t_start, x, cfg.t_end, &g, cfg.f_coefficient, &trunc))
                .collect::<condbridge::Result<_>>()?;
            DensityGrid::one_point(&axis, v, metadata(cfg, &axis, Some(&trunc)))?
        }
        DensityKind::Transfer => {
            let s = shape.expect("validated");
            let ps = match s.kind {
                ShapeKind::UpperApprox => build_upper_approx(s.t_horizon, s.tau)?,
                _ => build_lower_approx(s.t_horizon, s.tau)?,
            };
            let opts = TransferOptions { panels: cfg.grid_panels, order: 8, modes: cfg.modes, tolerance: cfg.tolerance };
            piecewise_entrance_exit_density(&ps, 0.0, 0.0, s.tau * s.t_horizon, cfg.window, &opts)?
        }
    };
    let mass = grid.mass();
    let mut csv = if grid.is_joint() { Csv::new(&["x", "y", "value"]) } else { Csv::new(&["x", "value"]) };
    match &grid.ys {
        Some(ys) => {
            for (i, x) in grid.xs.iter().enumerate() {
                for (j, y) in ys.iter().enumerate() {
                    csv.row(&[fmt12(*x), fmt12(*y), fmt12(grid.at(i, j))]);
                }
            }
        }
        None => {
            for (i, x) in grid.xs.iter().enumerate() {
                csv.row(&[fmt12(*x), fmt12(grid.at(i, 0))]);
            }
        }
    }
    let m = &grid.metadata;
    let mut meta = Map::new();
    meta.insert("density".into(), json!(cfg.density.name()));
    meta.insert("points".into(), json!(if grid.is_joint() { "two" } else { "one" }));
    meta.insert("modes".into(), json!(m.modes));
    meta.insert("resolution".into(), json!(m.resolution));
    meta.insert("f_coefficient".into(), m.f_coefficient.map_or(Value::Null, |f| json!(f.name())));
    meta.insert("clamps".into(), json!({"clamped": m.clamps.clamped, "large_negatives": m.clamps.large_negatives}));
    meta.insert("discretization_error".into(), m.discretization_error.map_or(Value::Null, num));
    meta.insert("tolerance".into(), m.tolerance.map_or(Value::Null, num));
    meta.insert("converged".into(), json!(m.converged));
    meta.insert("mass".into(), num(mass));
    meta.insert("window".into(), num(cfg.window));
    if let Some(s) = shape {
        meta.insert(
            "shape".into(),
            json!({"kind": s.kind.name(), "T": num(s.t_horizon), "tau": num(s.tau), "gamma": num(s.gamma)}),
        );
    }
    let mut verdicts = Vec::new();
    if cfg.density == DensityKind::Killed {
        verdicts.push(Verdict::new(
            "survival-mass",
            mass > 0.0 && mass <= 1.0 + 1e-9,
            format!("mass {} is the survival probability ({} coefficient)", fmt12(mass), cfg.f_coefficient.name()),
        ));
    } else {
        let tol = if cfg.density == DensityKind::Transfer { cfg.tolerance.max(1e-6) } else { cfg.tolerance };
        verdicts.push(Verdict::new(
            "normalization",
            (mass - 1.0).abs() <= tol,
            format!("mass {} (tolerance {})", fmt12(mass), fmt12(tol)),
        ));
    }
    if cfg.density == DensityKind::Transfer {
        verdicts.push(Verdict::new(
            "transfer-converged",
            m.converged,
            format!("estimated discretization error {}", m.discretization_error.map_or("n/a".into(), fmt12)),
        ));
    }
    Ok(Outcome {
        artifacts: vec![
            Artifact::csv("density.csv", csv),
            Artifact::json("density_meta.json", "condbridge.density/1", meta),
        ],
        verdicts,
    })
}

fn trunc_nonneg(v: f64) -> f64 {
    v.max(0.0)
}

fn entrance_law(cfg: &Config) -> Run {
    let s = cfg.shape.as_ref().expect("validated");
    let trunc = SpectralTruncation::new(cfg.modes)?;
    let grid: Vec<f64> =
        (0..cfg.grid_points).map(|i| cfg.grid_max * i as f64 / (cfg.grid_points - 1) as f64).collect();
    let mut csv = Csv::new(&["T", "sup_difference", "marginal_sup_difference"]);
    let mut sups = Vec::new();
    for &t in &cfg.horizons {
        let rows: Vec<f64> = grid
            .par_iter()
            .map(|&a| {
                grid.iter()
                    .map(|&b| finite_t_deviation(a, b, cfg.window, t, s.tau, s.gamma, &trunc).map(f64::abs))
                    .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))
            })
            .collect::<condbridge::Result<_>>()?;
        let sup = rows.into_iter().fold(0.0, f64::max);
        let mut marg: f64 = 0.0;
        for &x in &grid {
            marg = marg.max((finite_t_marginal(x, t, s.tau, s.gamma, &trunc)? - ground_state(x).powi(2)).abs());
        }
        csv.row(&[fmt12(t), fmt12(sup), fmt12(marg)]);
        sups.push(sup);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let last = *sups.last().expect("two or more horizons");
    let table: Vec<String> = cfg.horizons.iter().zip(&sups).map(|(t, s)| format!("T={} {}", fmt12(*t), fmt12(*s))).collect();
    Ok(Outcome {
        artifacts: vec![Artifact::csv("entrance_law.csv", csv)],
        verdicts: vec![
            Verdict::new("strictly-decreasing", decreasing, table.join(", ")),
            Verdict::new(
                "final-sup-difference",
                last <= cfg.tolerance,
                format!("{} at T = {} (tolerance {})", fmt12(last), fmt12(*cfg.horizons.last().unwrap()), fmt12(cfg.tolerance)),
            ),
        ],
    })
}

fn scaling_study(cfg: &Config) -> Run {
    let mut csv = Csv::new(&["T", "tau", "quantity", "value", "predicted_leading"]);
    let mut artifacts = Vec::new();
    let mut verdicts = Vec::new();
    let mut index = 0;
    for &t in &cfg.horizons {
        for &tau in &cfg.taus {
            let up = build_upper_approx(t, tau)?;
            let lo = build_lower_approx(t, tau)?;
            let tol = 10.0 * t.powf(-0.25);
            let mut worst: f64 = 0.0;
            for (side, shape) in [(Side::Upper, &up), (Side::Lower, &lo)] {
                let label = if side == Side::Upper { "upper" } else { "lower" };
                let measured = measured_coefficients(shape);
                let predicted = predicted_coefficients(side, t, tau);
                for ((name, m), (_, p)) in measured.iter().zip(&predicted) {
                    csv.row(&[fmt12(t), fmt12(tau), format!("{label}.{name}"), fmt12(*m), fmt12(*p)]);
                    worst = worst.max(((m - p) / p).abs());
                }
                if measured.len() != predicted.len() {
                    worst = f64::INFINITY;
                }
            }
            let frame = circle_frame(t, tau)?;
            csv.row(&[fmt12(t), fmt12(tau), "circle.v_s".to_string(), fmt12(frame.v_s), fmt12(frame.v_s)]);
            let circle = semicircle(t)?;
            let r = containment_check(
                |x| lo.value(x),
                |x| circle.value_clamped(x),
                |x| up.value(x),
                (-t, t),
                cfg.containment_points,
                1e-12 * t,
            );
            let at = format!("T={} tau={}", fmt12(t), fmt12(tau));
            verdicts.push(Verdict::new(
                format!("containment {at}"),
                r.pass(),
                format!(
                    "{} violations on {} points; max lower excess {}, max upper excess {}",
                    r.violations,
                    r.grid_size,
                    fmt12(r.max_lower_excess),
                    fmt12(r.max_upper_excess)
                ),
            ));
            verdicts.push(Verdict::new(
                format!("coefficients {at}"),
                worst <= tol,
                format!("worst relative deviation {} (tolerance {})", fmt12(worst), fmt12(tol)),
            ));
            if cfg.export_points >= 2 {
                let n = cfg.export_points;
                for (label, f) in [
                    ("circle", &(|x: f64| circle.value_clamped(x)) as &dyn Fn(f64) -> f64),
                    ("upper", &|x| up.value(x)),
                    ("lower", &|x| lo.value(x)),
                ] {
                    let mut s = Csv::new(&["t", "value"]);
                    for i in 0..n {
                        let x = -t + 2.0 * t * i as f64 / (n - 1) as f64;
                        s.row(&[fmt12(x), fmt12(f(x))]);
                    }
                    artifacts.push(Artifact::csv(format!("shape_{index}_{label}.csv"), s));
                }
            }
            index += 1;
        }
    }
    artifacts.insert(0, Artifact::csv("scaling.csv", csv));
    Ok(Outcome { artifacts, verdicts })
}

fn verdict_json(kind: &str, n: usize, f: &Functional, case: &str, v: &CouplingVerdict) -> Value {
    json!({
        "kind": kind,
        "n": n,
        "functional": f.name(),
        "case": case,
        "first": v.first,
        "second": v.second,
        "ordered": v.ordered,
        "equal": v.equal,
    })
}

fn monotonicity(cfg: &Config) -> Run {
    let mut instances = Vec::new();
    let point = |x: i64| vec![(x, BigRational::one())];
    let half = BigRational::new(1.into(), 2.into());
    let mixed = vec![(0, half.clone()), (2, half)];
    let mut ballot_ok = true;
    let mut ballots = Vec::new();
    for &n in &cfg.lattice_n {
        let none = LatticeBarrier::none(n);
        let zero = LatticeBarrier::constant(n, 0);
        let bump = LatticeBarrier::from_fn(n, |t| 0.25 * (1.0 - (2.0 * t - 1.0).powi(2)));
        let barriers = [("none", &none), ("zero", &zero), ("bump", &bump)];
        for f in Functional::monotone_family(n) {
            for (i, (na, a)) in barriers.iter().enumerate() {
                for (nb, b) in &barriers[i..] {
                    if a.below(b) {
                        let v = coupling_check(n, 0, a, b, &f)?;
                        instances.push(verdict_json("coupling", n, &f, &format!("{na} <= {nb}"), &v));
                    }
                }
            }
            for (name, s) in [("zero", &zero), ("bump", &bump)] {
                for z in [2, 4] {
                    let v = shifted_start_check(n, z, s, &f)?;
                    instances.push(verdict_json("shifted-start", n, &f, &format!("{name}, start {z}"), &v));
                }
                for (case, g1, g2) in [("0 vs 2", point(0), point(2)), ("mixed vs 2", mixed.clone(), point(2)), ("0 vs mixed", point(0), mixed.clone())] {
                    let v = dominance_transfer_check(&g1, &g2, s, &f, n)?;
                    instances.push(verdict_json("dominance", n, &f, &format!("{name}, {case}"), &v));
                }
            }
        }
        let p = rw_probability(n, &zero)?;
        let expected = BigRational::new(1.into(), (n as i64 + 1).into());
        ballot_ok &= p == expected;
        ballots.push(json!({"n": n, "probability": p.to_string(), "expected": expected.to_string()}));
    }
    let mut rng = replica_rng(cfg.seed, 0);
    for i in 0..cfg.random_instances {
        let n = cfg.lattice_n[i % cfg.lattice_n.len()].max(2);
        let (s1, s2) = random_concave_pair(n, &mut rng);
        for f in Functional::monotone_family(n) {
            let v = coupling_check(n, 0, &s1, &s2, &f)?;
            instances.push(verdict_json("coupling", n, &f, &format!("random {i}"), &v));
        }
    }
    let violated = instances.iter().filter(|v| v["ordered"] == json!(false)).count();
    let total = instances.len();
    let mut body = Map::new();
    body.insert("seed".into(), json!(cfg.seed));
    body.insert("lattice_n".into(), json!(cfg.lattice_n));
    body.insert("random_instances".into(), json!(cfg.random_instances));
    body.insert("ballot".into(), Value::Array(ballots));
    body.insert("all_ordered".into(), json!(violated == 0));
    body.insert("instances".into(), Value::Array(instances));
    Ok(Outcome {
        artifacts: vec![Artifact::json("monotonicity.json", "condbridge.monotonicity/1", body)],
        verdicts: vec![
            Verdict::new("ordered", violated == 0, format!("{total} exact comparisons, {violated} out of order")),
            Verdict::new("ballot", ballot_ok, "positive-excursion probability equals 1/(N+1) for every N"),
        ],
    })
}

fn json_files(dir: &FsPath, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            json_files(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    Ok(())
}

fn report(cfg: &Config) -> Run {
    let dir = cfg.input_dir.as_ref().expect("validated");
    let mut files = Vec::new();
    json_files(dir, &mut files).map_err(|e| RunError(format!("{}: {e}", dir.display())))?;
    files.sort();
    let mut entries = Vec::new();
    let (mut n_pass, mut n_fail) = (0usize, 0usize);
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| RunError(format!("{}: {e}", f.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| RunError(format!("{}: {e}", f.display())))?;
        let Some(list) = v.get("verdicts").and_then(Value::as_array) else { continue };
        let failed: Vec<String> = list
            .iter()
            .filter(|x| x.get("pass") != Some(&json!(true)))
            .map(|x| x.get("name").and_then(Value::as_str).unwrap_or("?").to_string())
            .collect();
        n_pass += list.len() - failed.len();
        n_fail += failed.len();
        let rel = f.strip_prefix(dir).unwrap_or(f);
        entries.push(json!({
            "file": rel.display().to_string(),
            "experiment": v.get("experiment").cloned().unwrap_or(Value::Null),
            "verdicts": list.len(),
            "failed": failed,
        }));
    }
    let files_with_verdicts = entries.len();
    let mut body = Map::new();
    body.insert("input_dir".into(), json!(dir.display().to_string()));
    body.insert("files".into(), Value::Array(entries));
    body.insert("passed".into(), json!(n_pass));
    body.insert("failed".into(), json!(n_fail));
    Ok(Outcome {
        artifacts: vec![Artifact::json("report.json", "condbridge.report/1", body)],
        verdicts: vec![Verdict::new(
            "aggregate",
            n_fail == 0 && files_with_verdicts > 0,
            format!("{files_with_verdicts} files, {n_pass} verdicts passed, {n_fail} failed"),
        )],
    })
}
