//! Discrete heat kernels and the heat/conjugate duality residual.
//!
//! The propagated delta on a sampled circle matches the theta-series form of
//! the circle heat kernel; pairing it against a test function reproduces the
//! dynamic conjugate propagator, up to a residual that shrinks as the
//! schedule refines.

use weakflow::averaging::OperatorKind;
use weakflow::field::ScalarField;
use weakflow::propagators::{duality_gap, heat_kernel, weighted_total, ChernoffSchedule};
use weakflow::spaces::{
    make_flat_torus, make_round_sphere, FlowLaw, Orientation, SamplingStrategy,
};

fn main() -> weakflow::Result<()> {
    // kernel on the 256-point circle against the wrapped-Gaussian series
    let circle =
        make_flat_torus(1, 1.0, FlowLaw::Static)?.sample(256, 0, SamplingStrategy::QuasiUniform)?;
    let t = 0.05;
    let k = heat_kernel(
        &circle,
        0.0,
        t,
        0,
        &ChernoffSchedule::single_limit(50, OperatorKind::Nu),
    )?;
    let mut sup_err = 0.0_f64;
    for i in 0..256 {
        let x = circle.coords_of(i).unwrap()[0];
        let mut p = 1.0;
        for m in 1..=6 {
            let lam = (2.0 * std::f64::consts::PI * m as f64).powi(2);
            p += 2.0 * (-lam * t).exp() * (2.0 * std::f64::consts::PI * m as f64 * x).cos();
        }
        sup_err = sup_err.max((k.values()?[i] - p).abs());
    }
    println!("circle kernel vs theta series: sup error {sup_err:.3e}");
    println!("kernel mass: {:.9}", weighted_total(&circle, t, &k)?);

    // duality residual on the shrinking sphere, refined once
    let sphere = make_round_sphere(2, 1.0, FlowLaw::RicciBackward)?
        .with_interval(0.0, 0.0625)?
        .sample(200, 7, SamplingStrategy::QuasiUniform)?;
    let g_vals: Vec<f64> = (0..200)
        .map(|i| 1.0 + 0.3 * sphere.coords_of(i).unwrap()[2])
        .collect();
    let g = ScalarField::from_samples(&sphere, 0.0, g_vals)?;
    for (m, j) in [(2, 2), (4, 4)] {
        let sched = ChernoffSchedule::double_limit(m, j, OperatorKind::Beta);
        let gap = duality_gap(&sphere, 0.0, 0.05, &g, 77, &sched)?;
        println!("sphere duality gap at m = j = {m}: {gap:.3e}");
    }

    // the static circle pairing is nearly self-adjoint
    let backward = make_flat_torus(1, 1.0, FlowLaw::Static)?
        .with_orientation(Orientation::Backward)
        .sample(64, 0, SamplingStrategy::QuasiUniform)?;
    let g_vals: Vec<f64> = (0..64)
        .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * backward.coords_of(i).unwrap()[0]).cos())
        .collect();
    let g = ScalarField::from_samples(&backward, 0.0, g_vals)?;
    let sched = ChernoffSchedule::double_limit(8, 4, OperatorKind::Beta);
    println!(
        "static circle duality gap: {:.3e}",
        duality_gap(&backward, 0.0, 0.1, &g, 5, &sched)?
    );
    Ok(())
}
