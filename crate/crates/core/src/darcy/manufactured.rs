use std::f64::consts::PI;

/// Closed-form solution on the unit square for `K⁻¹ = Id` and the source
/// `2 cos(πx) cos(πy)`; returns `([u_x, u_y], p)`.
pub fn manufactured_solution(x: f64, y: f64) -> ([f64; 2], f64) {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    ([sx * cy / PI, cx * sy / PI], cx * cy / (PI * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_points() {
        let (u, p) = manufactured_solution(0.5, 0.5);
        assert!(u[0].abs() < 1e-16 && u[1].abs() < 1e-16 && p.abs() < 1e-16);
        let (u, p) = manufactured_solution(0.0, 0.0);
        assert_eq!(u, [0.0, 0.0]);
        assert!((p - 1.0 / (PI * PI)).abs() < 1e-16);
    }

    #[test]
    fn normal_velocity_vanishes_on_boundary() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!(manufactured_solution(0.0, t).0[0].abs() < 1e-15);
            assert!(manufactured_solution(1.0, t).0[0].abs() < 1e-15);
            assert!(manufactured_solution(t, 0.0).0[1].abs() < 1e-15);
            assert!(manufactured_solution(t, 1.0).0[1].abs() < 1e-15);
        }
    }

    #[test]
    fn satisfies_darcy_equations() {
        // u = -∇p and ∇·u = 2 cos cos, checked by central differences
        let h = 1e-5;
        for &(x, y) in &[(0.2, 0.7), (0.55, 0.1), (0.9, 0.35)] {
            let p = |x, y| manufactured_solution(x, y).1;
            let (u, _) = manufactured_solution(x, y);
            let dpx = (p(x + h, y) - p(x - h, y)) / (2.0 * h);
            let dpy = (p(x, y + h) - p(x, y - h)) / (2.0 * h);
            assert!((u[0] + dpx).abs() < 1e-9 && (u[1] + dpy).abs() < 1e-9);
            let div = (manufactured_solution(x + h, y).0[0] - manufactured_solution(x - h, y).0[0]
                + manufactured_solution(x, y + h).0[1]
                - manufactured_solution(x, y - h).0[1])
                / (2.0 * h);
            assert!((div - 2.0 * (PI * x).cos() * (PI * y).cos()).abs() < 1e-8);
        }
    }
}
