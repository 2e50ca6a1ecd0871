//! Lipschitz-monotonicity verdicts for three model flows.
//!
//! Heat solutions on static spheres and tori have nonincreasing Lipschitz
//! constants; a circle whose metric collapses at rate 80 (faster than the
//! lowest heat mode can smooth) is caught with a witness step.

use weakflow::averaging::OperatorKind;
use weakflow::field::ScalarField;
use weakflow::propagators::{dynamic_heat, ChernoffSchedule};
use weakflow::spaces::{make_flat_torus, make_round_sphere, FlowLaw, SamplingStrategy, ScaleLaw};
use weakflow::verify::check_wsrf;

fn main() -> weakflow::Result<()> {
    // static sphere
    let sphere = make_round_sphere(2, 1.0, FlowLaw::Static)?.sample(
        1000,
        12,
        SamplingStrategy::QuasiUniform,
    )?;
    let seed_vals: Vec<f64> = (0..1000)
        .map(|i| {
            let c = sphere.coords_of(i).unwrap();
            0.8 * c[0] + 0.5 * c[1] * c[2] - 0.3 * c[2]
        })
        .collect();
    let seed_field = ScalarField::from_samples(&sphere, 0.0, seed_vals)?;
    let sched = ChernoffSchedule::single_limit(1, OperatorKind::Nu);
    // one burn-in application; the monitored trajectory is itself a heat image
    let f0 = dynamic_heat(&sphere, 0.0, 0.0125, &sched, &seed_field)?.field;
    let grid: Vec<f64> = (1..=5).map(|k| 0.0125 * k as f64).collect();
    let report = check_wsrf(&sphere, &f0, &grid, &sched, None)?;
    print_case("static sphere", &report);

    // static circle
    let circle =
        make_flat_torus(1, 1.0, FlowLaw::Static)?.sample(256, 0, SamplingStrategy::QuasiUniform)?;
    let vals: Vec<f64> = (0..256)
        .map(|i| (2.0 * std::f64::consts::PI * circle.coords_of(i).unwrap()[0]).cos())
        .collect();
    let f0 = ScalarField::from_samples(&circle, 0.0, vals.clone())?;
    let sched = ChernoffSchedule::double_limit(2, 2, OperatorKind::Nu);
    let grid: Vec<f64> = (0..=5).map(|k| 0.002 * k as f64).collect();
    let report = check_wsrf(&circle, &f0, &grid, &sched, None)?;
    print_case("static circle", &report);

    // collapsing circle: phi(t) = exp(-80 t)
    let collapsing = make_flat_torus(
        1,
        1.0,
        FlowLaw::CustomScale(ScaleLaw::Exponential { rate: -80.0 }),
    )?
    .with_interval(0.0, 0.012)?
    .sample(256, 0, SamplingStrategy::QuasiUniform)?;
    let f0 = ScalarField::from_samples(&collapsing, 0.0, vals)?;
    let report = check_wsrf(&collapsing, &f0, &grid, &sched, None)?;
    print_case("collapsing circle", &report);
    Ok(())
}

fn print_case(name: &str, report: &weakflow::verify::VerdictReport) {
    let lips = report
        .series
        .iter()
        .find(|(n, _)| n == "lipschitz")
        .map(|(_, v)| v.clone())
        .unwrap_or_default();
    let seq = lips
        .iter()
        .map(|l| format!("{l:.4}"))
        .collect::<Vec<_>>()
        .join(" -> ");
    println!("{name}: {:?}", report.verdict);
    println!("  Lipschitz: {seq}");
    for w in &report.witnesses {
        println!("  witness at t = {}: {}", w.time, w.detail);
    }
}
