use condbridge::airy::ground_state;
use condbridge::barrier::{build_lower_approx, ParabolicPiece, PiecewiseShape};
use condbridge::kernel::{
    finite_t_joint_density, heat_kernel, piecewise_entrance_exit_density, SpectralTruncation, TransferOptions,
};

fn single_parabola(t: f64, gamma: f64) -> PiecewiseShape {
    let amp = t.powf(gamma);
    PiecewiseShape::new(vec![ParabolicPiece::new(amp, 0.0, 2.0 * amp / (t * t), -t, t).unwrap()]).unwrap()
}

#[test]
fn single_parabola_matches_exact_density() {
    let tr = SpectralTruncation::new(64).unwrap();
    for (t, gamma) in [(3.0, 2.0), (20.0, 1.5)] {
        let shape = single_parabola(t, gamma);
        let v = shape.pieces()[0].v();
        let d = piecewise_entrance_exit_density(&shape, 0.0, 0.0, 0.0, 1.0, &TransferOptions::default()).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-4);
        assert!(d.metadata.converged, "{:?}", d.metadata);
        let ys = d.ys.as_ref().unwrap();
        let mut worst: f64 = 0.0;
        for i in (0..d.xs.len()).step_by(7) {
            for j in (0..ys.len()).step_by(7) {
                let exact = finite_t_joint_density(v * d.xs[i], v * ys[j], 1.0, t, 0.0, gamma, &tr).unwrap();
                worst = worst.max((d.at(i, j) / (v * v) - exact).abs());
            }
        }
        assert!(worst < 1e-4, "T = {t}, gamma = {gamma}: {worst:e}");
    }
}

#[test]
fn off_center_window_and_raised_endpoints() {
    let shape = single_parabola(5.0, 2.0);
    let d = piecewise_entrance_exit_density(&shape, 0.3, 0.1, -2.0, 0.5, &TransferOptions::default()).unwrap();
    assert!((d.mass() - 1.0).abs() < 1e-4);
    assert!(d.values.iter().all(|v| *v >= 0.0));
    assert!(piecewise_entrance_exit_density(&shape, 0.0, 0.0, 4.9, 1.0, &TransferOptions::default()).is_err());
}

#[test]
fn leading_form_improves_with_gamma_bar() {
    let tr = SpectralTruncation::new(64).unwrap();
    let mut sups = Vec::new();
    let mut gbars = Vec::new();
    for t in [1e4, 1e6, 1e8] {
        let shape = build_lower_approx(t, 0.0).unwrap();
        gbars.push(shape.gamma_bar());
        let v = shape.v_at(0.0);
        let d = piecewise_entrance_exit_density(&shape, 0.0, 0.0, 0.0, 1.0, &TransferOptions::default()).unwrap();
        let ys = d.ys.as_ref().unwrap();
        let mut worst: f64 = 0.0;
        for i in (0..d.xs.len()).step_by(5) {
            for j in (0..ys.len()).step_by(5) {
                let (a, b) = (v * d.xs[i], v * ys[j]);
                let lead = ground_state(a) * heat_kernel(a, b, 2.0, &tr).unwrap() * ground_state(b);
                worst = worst.max((d.at(i, j) / (v * v) - lead).abs());
            }
        }
        sups.push(worst);
    }
    assert!(gbars.windows(2).all(|w| w[1] > w[0]), "{gbars:?}");
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}
