//! Quadrature on triangles, in barycentric coordinates with weights
//! normalized to sum to one: `int_T f = |T| * sum_q w_q f(x_q)`.

use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Weights, summing to 1.
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric 6-point rule, exact through degree 4. Used for all
    /// assembly integrands (gradients of P2 against P1 are degree 2).
    pub fn assembly() -> Self {
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (a, w) in [
            (0.445948490915965, 0.223381589678011),
            (0.091576213509771, 0.109951743655322),
        ] {
            let b = 1.0 - 2.0 * a;
            points.push([b, a, a]);
            points.push([a, b, a]);
            points.push([a, a, b]);
            weights.push(w);
            weights.push(w);
            weights.push(w);
        }
        QuadratureRule {
            points,
            weights,
            degree: 4,
        }
    }

    /// Conical-product rule of arbitrary degree: a tensor Gauss-Legendre
    /// grid on the unit square collapsed onto the triangle through
    /// `(x, y) = (u, v (1 - u))`, with the Jacobian `1 - u` folded into the
    /// weights. `ceil((degree + 2) / 2)` points per direction make the rule
    /// exact for total degree `degree`.
    pub fn with_degree(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter(
                "quadrature degree must be at least 1".into(),
            ));
        }
        // u-direction carries the Jacobian, so its integrand has degree
        // `degree + 1`; n Gauss points are exact through degree 2n - 1.
        let n = (degree + 3) / 2;
        let (nodes, gl_weights) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = nodes[i];
            for j in 0..n {
                let v = nodes[j];
                let x = u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                // factor 2 renormalizes from the reference area 1/2
                weights.push(2.0 * gl_weights[i] * gl_weights[j] * (1.0 - u));
            }
        }
        Ok(QuadratureRule {
            points,
            weights,
            degree,
        })
    }

    /// Default rule for error norms; high degree for boundary-layer data.
    pub fn error_norms() -> Self {
        Self::with_degree(10).expect("degree 10 is valid")
    }

    /// Physical location of point `q` inside the triangle `p`.
    pub fn physical_point(&self, p: &[Point2; 3], q: usize) -> Point2 {
        let lam = self.points[q];
        p[0] * lam[0] + p[1] * lam[1] + p[2] * lam[2]
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]; weights halve
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n` and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `x^a y^b` over the reference triangle with vertices
    /// (0,0), (1,0), (0,1), divided by the reference area 1/2:
    /// `2 a! b! / (a + b + 2)!`.
    fn normalized_moment(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n as u64).product::<u64>() as f64;
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check_rule(rule: &QuadratureRule) {
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14, "weights sum to {sum}");
        for a in 0..=rule.degree as u32 {
            for b in 0..=(rule.degree as u32 - a) {
                let mut acc = 0.0;
                for (lam, w) in rule.points.iter().zip(&rule.weights) {
                    let x = lam[1];
                    let y = lam[2];
                    acc += w * x.powi(a as i32) * y.powi(b as i32);
                }
                let exact = normalized_moment(a, b);
                assert!(
                    (acc - exact).abs() <= 1e-14 * exact.max(1.0),
                    "degree {} rule: x^{a} y^{b}: {acc} vs {exact}",
                    rule.degree
                );
            }
        }
    }

    #[test]
    fn assembly_rule_exact_to_degree_4() {
        check_rule(&QuadratureRule::assembly());
    }

    #[test]
    fn conical_rules_exact() {
        for degree in [1, 2, 3, 4, 5, 6, 8, 10, 12, 14] {
            check_rule(&QuadratureRule::with_degree(degree).unwrap());
        }
    }

    #[test]
    fn degree_10_detects_higher_moments() {
        // sanity: the degree-10 rule is not accidentally exact at degree 12
        let rule = QuadratureRule::with_degree(10).unwrap();
        let mut acc = 0.0;
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            acc += w * lam[1].powi(12);
        }
        let exact = normalized_moment(12, 0);
        assert!((acc - exact).abs() > 1e-13);
    }
}
