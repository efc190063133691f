//! Quadrature on triangles in barycentric form.
//!
//! Weights are normalised to sum to one, so an integral over a physical
//! triangle is `area * sum(w_q * f(x_q))`.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    /// The symmetric 7-point rule, exact for polynomials of degree 5.
    pub fn seven_point() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = (155.0 - s15) / 1200.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        Self {
            points: vec![
                [third, third, third],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![0.225, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }

    /// Collapsed Gauss-Legendre product rule exact to at least `degree`.
    ///
    /// Maps the unit square onto the triangle through `(s, t) -> (s, t(1-s))`;
    /// `m` points per direction integrate degree `2m - 2` exactly once the
    /// Jacobian `1 - s` is accounted for.
    pub fn collapsed(degree: usize) -> Self {
        let m = (degree + 3) / 2;
        let (nodes, gw) = gauss_legendre_unit(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (s, ws) in nodes.iter().zip(&gw) {
            for (t, wt) in nodes.iter().zip(&gw) {
                let x = *s;
                let y = t * (1.0 - s);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * ws * wt * (1.0 - s));
            }
        }
        Self { points, weights, degree: 2 * m - 2 }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `P_m(x)` and its derivative by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle divided by its
    /// area: 2 * a! b! / (a+b+2)!.
    fn monomial_mean(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check_exactness(rule: &QuadratureRule) {
        let d = rule.degree() as u32;
        for a in 0..=d {
            for b in 0..=(d - a) {
                let q: f64 = rule.iter().map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                let exact = monomial_mean(a, b);
                assert!(
                    ((q - exact) / exact).abs() < 1e-14,
                    "degree {} monomial x^{a} y^{b}: {q} vs {exact}",
                    rule.degree()
                );
            }
        }
    }

    #[test]
    fn seven_point_is_degree_five() {
        let r = QuadratureRule::seven_point();
        assert_eq!(r.len(), 7);
        assert!(r.weights().iter().all(|w| *w > 0.0));
        assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        check_exactness(&r);
        // not exact at degree 6
        let q: f64 = r.iter().map(|(l, w)| w * l[1].powi(6)).sum();
        assert!((q - monomial_mean(6, 0)).abs() > 1e-6);
    }

    #[test]
    fn collapsed_rules_hit_requested_degree() {
        for d in [1usize, 4, 8, 10, 12, 16] {
            let r = QuadratureRule::collapsed(d);
            assert!(r.degree() >= d);
            assert!(r.weights().iter().all(|w| *w > 0.0));
            assert!(r.points().iter().all(|l| l.iter().all(|v| (0.0..=1.0).contains(v))));
            check_exactness(&r);
        }
    }

    #[test]
    fn gauss_legendre_small_cases() {
        let (x, w) = gauss_legendre_unit(1);
        assert!((x[0] - 0.5).abs() < 1e-15 && (w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre_unit(2);
        let mut x = x;
        x.sort_by(f64::total_cmp);
        let off = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - off)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }
}
