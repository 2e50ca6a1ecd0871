//! Euclidean normalizers and small quadrature helpers shared by the model
//! geometries.
//!
//! `omega(n)` is the volume of the unit n-ball, `sphere_area(n - 1)` the area
//! of its boundary, computed by the two-step recurrence so they stay exact in
//! f64 for every dimension we care about.

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_0 = 1, omega_1 = 2, omega_n = omega_{n-2} * 2 pi / n
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / (n as f64),
    }
}

/// Area of the unit sphere `S^{n-1}` bounding the unit n-ball: `n * omega_n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    (n as f64) * unit_ball_volume(n)
}

/// `\int_0^theta sin^k(t) dt` by the standard reduction formula.
pub fn sin_power_integral(k: usize, theta: f64) -> f64 {
    match k {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            let k_f = k as f64;
            (-theta.sin().powi(k as i32 - 1) * theta.cos()
                + (k_f - 1.0) * sin_power_integral(k - 2, theta))
                / k_f
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial. Deterministic to the last bit.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(order, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k_f = k as f64;
        let p2 = ((2.0 * k_f - 1.0) * x * p1 - (k_f - 1.0) * p0) / k_f;
        p0 = p1;
        p1 = p2;
    }
    let dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate a callable over `[a, b]` with a fixed-order Gauss rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    xs.iter()
        .zip(ws.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Volume of `{x in R^n : |x| <= r, |x_i| <= half_side}` — the ball of a flat
/// torus with side `2 * half_side` seen in the centered fundamental domain.
///
/// Exact for n = 1, 2; recursive quadrature above that.
pub fn ball_box_volume(n: usize, r: f64, half_side: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    match n {
        1 => (2.0 * r).min(2.0 * half_side),
        2 => disc_square_area(r, half_side),
        _ => {
            let cap = r.min(half_side);
            2.0 * integrate(
                |u| ball_box_volume(n - 1, (r * r - u * u).max(0.0).sqrt(), half_side),
                0.0,
                cap,
                64,
            )
        }
    }
}

/// Area of the intersection of a disc of radius `r` with a centered square of
/// half-side `h`.
fn disc_square_area(r: f64, h: f64) -> f64 {
    use std::f64::consts::PI;
    if r <= h {
        return PI * r * r;
    }
    if r * r >= 2.0 * h * h {
        return 4.0 * h * h;
    }
    // Four circular segments stick out past the edges; they are disjoint
    // until the circle reaches the corners at r = h * sqrt(2).
    let seg = r * r * (h / r).acos() - h * (r * r - h * h).sqrt();
    PI * r * r - 4.0 * seg
}

/// Area of `{x in R^n : |x| = r}` clipped to the centered box, i.e. the
/// boundary-sphere area of a flat-torus ball. Derivative of
/// [`ball_box_volume`] in `r`; exact below the injectivity radius, central
/// difference beyond.
pub fn sphere_box_area(n: usize, r: f64, half_side: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r <= half_side {
        return unit_sphere_area(n) * r.powi(n as i32 - 1);
    }
    let dr = 1e-5 * half_side;
    (ball_box_volume(n, r + dr, half_side) - ball_box_volume(n, r - dr, half_side)) / (2.0 * dr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_volumes_match_closed_forms() {
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn sin_power_integrals() {
        assert_relative_eq!(sin_power_integral(1, PI), 2.0);
        // int_0^pi sin^2 = pi/2
        assert_relative_eq!(sin_power_integral(2, PI), PI / 2.0, max_relative = 1e-14);
        // int sin^3 over [0, pi] = 4/3
        assert_relative_eq!(sin_power_integral(3, PI), 4.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let v = integrate(|x| x * x * x * x, 0.0, 1.0, 8);
        assert_relative_eq!(v, 0.2, max_relative = 1e-14);
        let v = integrate(|x| (3.0 * x).sin(), 0.0, 2.0, 32);
        assert_relative_eq!(v, (1.0 - (6.0_f64).cos()) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn torus_ball_volume_regimes() {
        // below injectivity radius: plain disc
        assert_relative_eq!(
            ball_box_volume(2, 0.1, 0.5),
            PI * 0.01,
            max_relative = 1e-14
        );
        // whole torus once r covers the half-diagonal
        assert_relative_eq!(ball_box_volume(2, 0.75, 0.5), 1.0, max_relative = 1e-12);
        // between: monotone, bracketed by disc and square
        let a = ball_box_volume(2, 0.55, 0.5);
        assert!(a < PI * 0.55 * 0.55 && a > PI * 0.25);
        // n = 3 quadrature agrees with the sphere below injectivity
        assert_relative_eq!(
            ball_box_volume(3, 0.3, 0.5),
            4.0 * PI / 3.0 * 0.027,
            max_relative = 1e-9
        );
        assert_relative_eq!(ball_box_volume(3, 0.9, 0.5), 1.0, max_relative = 1e-6);
    }
}
