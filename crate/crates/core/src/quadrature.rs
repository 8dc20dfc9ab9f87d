//! Gauss-Legendre rules on the unit interval.

use crate::scalar::Scalar;

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
///
/// Nodes come from Newton iteration on the Legendre three-term recurrence,
/// carried out in `f64` and converted once.
pub fn gauss_legendre_unit<S: Scalar>(n: usize) -> (Vec<S>, Vec<S>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (
        nodes.into_iter().map(S::lit).collect(),
        weights.into_iter().map(S::lit).collect(),
    )
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_rule_matches_closed_form() {
        let (x, w) = gauss_legendre_unit::<f64>(3);
        let h = 0.5 * (3.0f64 / 5.0).sqrt();
        assert!((x[0] - (0.5 - h)).abs() < 1e-15);
        assert!((x[1] - 0.5).abs() < 1e-15);
        assert!((x[2] - (0.5 + h)).abs() < 1e-15);
        assert!((w[0] - 5.0 / 18.0).abs() < 1e-15);
        assert!((w[1] - 8.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn n_point_rule_integrates_degree_2n_minus_1() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre_unit::<f64>(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }
}
