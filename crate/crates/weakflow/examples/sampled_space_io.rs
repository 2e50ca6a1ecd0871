//! Sampled-space JSON round trip and the virtually-psc ball audit.
//!
//! Sampled spaces serialize to a JSON container with per-slice distance
//! matrices and weights. External data loaded from that container supports
//! the same queries; here the ball-volume bound `m(B_r) <= omega_n r^n` is
//! audited before and after tampering with the weights.

use weakflow::spaces::{make_flat_torus, FlowLaw, SamplingStrategy, Space};
use weakflow::verify::{check_virtually_psc, Verdict};

fn main() -> weakflow::Result<()> {
    let torus =
        make_flat_torus(2, 1.0, FlowLaw::Static)?.sample(400, 3, SamplingStrategy::QuasiUniform)?;
    let json = torus.to_sampled_json(&[0.0, 0.5, 1.0])?;
    let text = serde_json::to_string(&json)?;
    println!(
        "serialized container: {} bytes, {} slices",
        text.len(),
        json.time_grid.len()
    );

    let loaded = Space::from_sampled_json(&serde_json::from_str(&text)?)?;
    println!(
        "loaded: {} points, pseudo-metric: {}",
        loaded.n_points(),
        loaded.is_pseudo_metric()
    );
    println!(
        "worst triangle defect: {:.2e}",
        loaded.audit_metric(0.5, 4000, 1)?
    );

    let report = check_virtually_psc(&loaded, &[0.0], &[0.25, 0.35])?;
    println!("ball-volume bound on honest weights: {:?}", report.verdict);

    // double every weight of the first slice and audit again
    let mut tampered = json.clone();
    for w in tampered.weights[0].iter_mut() {
        *w *= 2.0;
    }
    let tampered = Space::from_sampled_json(&tampered)?;
    let report = check_virtually_psc(&tampered, &[0.0], &[0.25, 0.35])?;
    println!("ball-volume bound on doubled weights: {:?}", report.verdict);
    if report.verdict == Verdict::Fail {
        let w = &report.witnesses[0];
        println!("  witness: point {:?} with ratio {:.3}", w.points, w.value);
    }
    Ok(())
}
