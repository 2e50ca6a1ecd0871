//! Coupled contraction of formal dynamic diffusions.
//!
//! Two delta-initialized diffusions on the static circle: the optimal total
//! transport cost between them is nonincreasing in backward time, for the
//! distance cost and its square. A rapidly expanding flow violates the
//! contraction and is caught with a witness slice.

use weakflow::averaging::OperatorKind;
use weakflow::propagators::ChernoffSchedule;
use weakflow::spaces::{make_flat_torus, FlowLaw, Orientation, SamplingStrategy, ScaleLaw};
use weakflow::transport::{make_diffusion, ot_cost, CostSpec, DiffusionInit, OtSolver};
use weakflow::verify::{check_coupled_contraction, Verdict};

fn main() -> weakflow::Result<()> {
    let circle = make_flat_torus(1, 1.0, FlowLaw::Static)?
        .with_orientation(Orientation::Backward)
        .sample(128, 0, SamplingStrategy::QuasiUniform)?;
    let grid: Vec<f64> = (0..5).map(|k| 0.004 * k as f64).collect();
    let sched = ChernoffSchedule::double_limit(2, 2, OperatorKind::Beta);

    let d1 = make_diffusion(&circle, DiffusionInit::Delta(0), &grid, &sched)?;
    let d2 = make_diffusion(&circle, DiffusionInit::Delta(32), &grid, &sched)?;
    println!("static circle, deltas a quarter turn apart:");
    println!("tau       W2^2 cost      W1 cost");
    for (k, &tau) in grid.iter().enumerate() {
        let m1 = d1.measure_at(&circle, k)?;
        let m2 = d2.measure_at(&circle, k)?;
        let (c2, _) = ot_cost(
            &circle,
            tau,
            &m1,
            &m2,
            &CostSpec::distance_squared(),
            OtSolver::Exact,
        )?;
        let (c1, _) = ot_cost(
            &circle,
            tau,
            &m1,
            &m2,
            &CostSpec::distance(),
            OtSolver::Exact,
        )?;
        println!("{tau:.3}     {c2:.8}    {c1:.8}");
    }

    let expanding = make_flat_torus(
        1,
        1.0,
        FlowLaw::CustomScale(ScaleLaw::Exponential { rate: 80.0 }),
    )?
    .with_orientation(Orientation::Backward)
    .with_interval(0.0, 0.02)?
    .sample(128, 0, SamplingStrategy::QuasiUniform)?;
    let report = check_coupled_contraction(
        &expanding,
        DiffusionInit::Delta(0),
        DiffusionInit::Delta(32),
        &CostSpec::distance_squared(),
        &grid,
        &sched,
        Some(1e-6),
    )?;
    println!("expanding flow verdict: {:?}", report.verdict);
    if report.verdict == Verdict::Fail {
        let w = &report.witnesses[0];
        println!(
            "  witness slice tau = {}: cost rose by {:.3e}",
            w.time, w.value
        );
    }
    Ok(())
}
