use condbridge::barrier::power_parabola;
use condbridge::kernel::{w_density, FCoefficient, SpectralTruncation};
use condbridge::mc::{rejection_sample, ConditioningSpec, EndPin};
use condbridge::quad::Axis;
use condbridge::stats::ks_distance;

fn endpoints(n_steps: usize, target: u64, seed: u64) -> (Vec<f64>, f64) {
    let g = power_parabola(1.0, 2.0).unwrap();
    let spec = ConditioningSpec {
        t_start: 0.0,
        t_end: 1.0,
        n_steps,
        start: 1.5,
        end: EndPin::Free,
        crossing_correction: false,
        target_accepts: target,
        max_attempts: 10 * target,
        retain_paths: 0,
    };
    let r = rejection_sample(&spec, &|t| g.value_clamped(t), seed).unwrap();
    (r.endpoints, r.acceptance_rate)
}

#[test]
fn endpoint_law_and_survival_mass() {
    let g = power_parabola(1.0, 2.0).unwrap();
    let tr = SpectralTruncation::new(64).unwrap();
    let axis = Axis::composite(0.0, 8.0, 160, 8);
    let dens = |v: FCoefficient| -> Vec<f64> {
        axis.points.iter().map(|&x| w_density(0.5, 0.0, x, 1.0, &g, v, &tr).unwrap()).collect()
    };
    let wd = dens(FCoefficient::Dimensional);
    let wc = dens(FCoefficient::CubeRoot);
    let mass = |w: &[f64]| w.iter().zip(&axis.weights).map(|(a, b)| a * b).sum::<f64>();
    let (md, mc) = (mass(&wd), mass(&wc));
    let cdf = |x: f64| {
        let mut acc = 0.0;
        for ((p, w), d) in axis.points.iter().zip(&axis.weights).zip(&wd) {
            if *p <= x {
                acc += w * d;
            }
        }
        acc / md
    };
    let (e1, rate1) = endpoints(4000, 20_000, 77);
    let (e2, rate2) = endpoints(8000, 20_000, 78);
    let ks1 = ks_distance(&e1, cdf, 0.02).unwrap();
    let ks2 = ks_distance(&e2, cdf, 0.02).unwrap();
    println!("mass dimensional {md} cube-root {mc} rates {rate1} {rate2} ks {} {}", ks1.statistic, ks2.statistic);
    assert!(ks1.pass && ks2.pass);
    assert!((ks1.statistic - ks2.statistic).abs() <= 0.005);
    assert!((rate1 - md).abs() < (rate1 - mc).abs());
}
