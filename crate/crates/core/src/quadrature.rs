//! Quadrature rules on the reference triangle and reference edge.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1); weights sum to
//! its area 1/2. The reference edge is the unit interval; weights sum to 1.

/// Rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriQuadrature {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl TriQuadrature {
    /// Centroid rule, exact for degree 1.
    pub fn one_point() -> Self {
        TriQuadrature {
            points: vec![(1.0 / 3.0, 1.0 / 3.0)],
            weights: vec![0.5],
        }
    }

    /// Seven-point rule, exact for degree 5.
    pub fn seven_point() -> Self {
        let s15 = 15.0_f64.sqrt();
        let b1 = (6.0 - s15) / 21.0;
        let a1 = (9.0 + 2.0 * s15) / 21.0;
        let b2 = (6.0 + s15) / 21.0;
        let a2 = (9.0 - 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0 * 0.5;
        let w2 = (155.0 + s15) / 1200.0 * 0.5;
        let wc = 9.0 / 40.0 * 0.5;
        TriQuadrature {
            points: vec![
                (1.0 / 3.0, 1.0 / 3.0),
                (a1, b1),
                (b1, a1),
                (b1, b1),
                (a2, b2),
                (b2, a2),
                (b2, b2),
            ],
            weights: vec![wc, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Hat-function values at a reference point.
    pub fn shape_values(xi: f64, eta: f64) -> [f64; 3] {
        [1.0 - xi - eta, xi, eta]
    }
}

/// Rule on the reference edge [0, 1].
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeQuadrature {
    /// Three-point Gauss rule, exact for degree 5.
    pub fn gauss_3() -> Self {
        let r = (3.0_f64 / 5.0).sqrt();
        EdgeQuadrature {
            points: vec![0.5 * (1.0 - r), 0.5, 0.5 * (1.0 + r)],
            weights: vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
        }
    }

    /// Edge hat-function values at a reference point.
    pub fn shape_values(s: f64) -> [f64; 2] {
        [1.0 - s, s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact integral of xi^p * eta^q over the reference triangle.
    fn tri_monomial(p: u32, q: u32) -> f64 {
        factorial(p) * factorial(q) / factorial(p + q + 2)
    }

    fn integrate_tri(rule: &TriQuadrature, p: u32, q: u32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&(x, y), &w)| w * x.powi(p as i32) * y.powi(q as i32))
            .sum()
    }

    #[test]
    fn one_point_rule_exact_for_linears() {
        let rule = TriQuadrature::one_point();
        for (p, q) in [(0, 0), (1, 0), (0, 1)] {
            assert_relative_eq!(
                integrate_tri(&rule, p, q),
                tri_monomial(p, q),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn seven_point_rule_exact_for_degree_five() {
        let rule = TriQuadrature::seven_point();
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-15);
        for p in 0..=5u32 {
            for q in 0..=(5 - p) {
                assert_relative_eq!(
                    integrate_tri(&rule, p, q),
                    tri_monomial(p, q),
                    epsilon = 1e-14,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn gauss3_exact_for_degree_five() {
        let rule = EdgeQuadrature::gauss_3();
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for p in 0..=5u32 {
            let num: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| w * x.powi(p as i32))
                .sum();
            assert_relative_eq!(num, 1.0 / (p as f64 + 1.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn shape_values_partition_unity() {
        let tri = TriQuadrature::seven_point();
        for &(x, y) in &tri.points {
            let v = TriQuadrature::shape_values(x, y);
            assert_relative_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
        let edge = EdgeQuadrature::gauss_3();
        for &s in &edge.points {
            let v = EdgeQuadrature::shape_values(s);
            assert_relative_eq!(v[0] + v[1], 1.0, epsilon = 1e-15);
        }
    }
}
