//! Small-radius expansions of the averaging operators.
//!
//! On a slice with scalar curvature `scal`, the ball/sphere averages expand
//! as `f + c2 r^2 + ...` with `c2` tied to the Laplacian of the field, and
//! the ratio multipliers with `c2` tied to the curvature. This example fits
//! the coefficients on the unit sphere and the flat torus and compares them
//! with the slice predictions.

use weakflow::averaging::{expansion_fit, FieldInput, OperatorKind};
use weakflow::spaces::{make_flat_torus, make_round_sphere, FlowLaw, Site};

fn main() -> weakflow::Result<()> {
    let ladder: Vec<f64> = (0..6).map(|k| 0.2 / 2.0_f64.powi(k)).collect();

    println!("unit sphere (n = 2, scal = 2), f = 1:");
    let sphere = make_round_sphere(2, 1.0, FlowLaw::Static)?;
    let one = |_: &[f64]| 1.0;
    let pole = [0.0, 0.0, 1.0];
    for kind in [
        OperatorKind::Theta,
        OperatorKind::Eta,
        OperatorKind::Alpha,
        OperatorKind::Beta,
    ] {
        let fit = expansion_fit(
            kind,
            &sphere,
            0.0,
            Site::Coords(&pole),
            &FieldInput::Analytic(&one),
            &ladder,
        )?;
        let predicted = kind.expected_c2(2, 0.0, 2.0, 1.0);
        println!(
            "  {:6}  c2 = {:+.6}   predicted {:+.6}   residual {:.1e}",
            kind.name(),
            fit.c2,
            predicted,
            fit.residual
        );
    }

    println!("flat torus (n = 2, scal = 0), f = cos(2 pi x1) at the origin:");
    let torus = make_flat_torus(2, 1.0, FlowLaw::Static)?;
    let wave = |y: &[f64]| (2.0 * std::f64::consts::PI * y[0]).cos();
    let origin = [0.0, 0.0];
    for kind in [OperatorKind::Nu, OperatorKind::Sigma] {
        let fit = expansion_fit(
            kind,
            &torus,
            0.0,
            Site::Coords(&origin),
            &FieldInput::Analytic(&wave),
            &ladder,
        )?;
        // laplacian of the wave at the origin is -4 pi^2
        let predicted = kind.expected_c2(2, -4.0 * std::f64::consts::PI.powi(2), 0.0, 1.0);
        println!(
            "  {:6}  c2 = {:+.6}   predicted {:+.6}   residual {:.1e}",
            kind.name(),
            fit.c2,
            predicted,
            fit.residual
        );
    }
    Ok(())
}
