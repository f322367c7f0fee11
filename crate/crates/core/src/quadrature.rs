//! One-dimensional quadrature rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(count, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(count, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out.push((mid - half * z, half * w));
    }
    out
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Periodic trapezoid rule on `[0, 2π)` with the first node at `offset`.
pub fn periodic(count: usize, offset: f64) -> Vec<(f64, f64)> {
    let h = 2.0 * PI / count as f64;
    (0..count).map(|i| (offset + h * i as f64, h)).collect()
}

/// Midpoint rule on `[a, b]`.
pub fn midpoint(count: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = (b - a) / count as f64;
    (0..count).map(|i| (a + h * (i as f64 + 0.5), h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 32] {
            let rule = gauss_legendre(n, -1.0, 2.0);
            for deg in 0..(2 * n) as i32 {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(deg)).sum();
                let exact = (2f64.powi(deg + 1) - (-1f64).powi(deg + 1)) / (deg + 1) as f64;
                assert!(
                    (q - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                    "n={n} deg={deg}"
                );
            }
        }
    }

    #[test]
    fn legendre_nodes_inside_and_weights_positive() {
        let rule = gauss_legendre(40, 0.0, 1.0);
        assert!(rule.iter().all(|&(x, w)| x > 0.0 && x < 1.0 && w > 0.0));
        let total: f64 = rule.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_is_spectral_for_trig() {
        let rule = periodic(16, 0.1);
        let q: f64 = rule.iter().map(|(t, w)| w * t.cos().powi(4)).sum();
        assert!((q - 0.75 * PI).abs() < 1e-13);
    }
}
