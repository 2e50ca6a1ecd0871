//! Conjugate-heat products along the backward Ricci flow of the round
//! sphere.
//!
//! Constants solve `du/dtau = -scal(tau) u` with `scal(tau) = 2/(1 + 2 tau)`
//! on the n = 2 sphere with unit initial radius, so `u(0.1) = 1/1.2`. The
//! dynamic beta product reproduces this, and the measure `u * weight` stays
//! constant on a sampled slice family.

use weakflow::averaging::OperatorKind;
use weakflow::field::{FieldData, ScalarField};
use weakflow::propagators::{dynamic_conjugate, ChernoffSchedule};
use weakflow::spaces::{make_round_sphere, FlowLaw, SamplingStrategy};

fn main() -> weakflow::Result<()> {
    let sphere = make_round_sphere(2, 1.0, FlowLaw::RicciBackward)?;
    let sampled = sphere.sample(500, 7, SamplingStrategy::QuasiUniform)?;
    let sched = ChernoffSchedule::double_limit(16, 64, OperatorKind::Beta);

    let mut field = ScalarField::uniform(&sphere, 0.0, 1.0);
    let mut tau = 0.0;
    println!("tau      u(tau)     exact      mass(u * weight)");
    for _ in 0..4 {
        let next = tau + 0.025;
        field = dynamic_conjugate(&sphere, tau, next, &sched, &field)?.field;
        tau = next;
        let u = match field.data {
            FieldData::Uniform(u) => u,
            _ => unreachable!("constants stay uniform"),
        };
        let exact = 1.0 / (1.0 + 2.0 * tau);
        let mass = u * sampled.total_measure(tau)?;
        println!("{tau:.3}    {u:.6}   {exact:.6}   {mass:.6}");
    }
    println!("terminal error: {:.2e}", {
        let u = match field.data {
            FieldData::Uniform(u) => u,
            _ => unreachable!(),
        };
        (u - 1.0 / 1.2).abs()
    });
    Ok(())
}
