//! Gauss quadrature on reference segments and triangles.
//!
//! Segment rules are Gauss-Legendre on [0, 1]. Triangle rules are built by
//! collapsing a tensor Gauss-Legendre grid onto the reference triangle
//! {x, y >= 0, x + y <= 1}; the collapse keeps all weights positive and gives
//! controlled polynomial exactness: a rule of declared degree `p` integrates
//! every bivariate monomial of total degree <= p exactly.

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are computed by Newton iteration on the Legendre polynomial; for the
/// sizes used here (n <= 32) this converges to machine precision in a few
/// steps from the Chebyshev initial guess.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature on the reference segment [0, 1].
#[derive(Debug, Clone)]
pub struct SegmentRule {
    /// Points in [0, 1].
    pub points: Vec<f64>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
    /// Declared polynomial exactness degree.
    pub degree: usize,
}

impl SegmentRule {
    /// Rule exact for univariate polynomials of degree <= `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let n = degree / 2 + 1; // 2n - 1 >= degree
        let (x, w) = gauss_legendre(n);
        SegmentRule {
            points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|wi| 0.5 * wi).collect(),
            degree,
        }
    }
}

/// Quadrature on the reference triangle with vertices (0,0), (1,0), (0,1).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric-free reference coordinates (x, y).
    pub points: Vec<(f64, f64)>,
    /// Weights summing to 1/2 (the reference area).
    pub weights: Vec<f64>,
    /// Declared polynomial exactness degree.
    pub degree: usize,
}

impl TriangleRule {
    /// Rule exact for bivariate polynomials of total degree <= `degree`.
    pub fn with_degree(degree: usize) -> Self {
        // Collapsed map (a, b) -> (a, b(1-a)) with Jacobian (1-a): a monomial
        // x^α y^β pulls back to a^α (1-a)^{β+1} b^β, so the a-direction needs
        // exactness degree + 1 and the b-direction needs degree.
        let na = (degree + 1) / 2 + 1;
        let nb = degree / 2 + 1;
        let (xa, wa) = gauss_legendre(na);
        let (xb, wb) = gauss_legendre(nb);
        let mut points = Vec::with_capacity(na * nb);
        let mut weights = Vec::with_capacity(na * nb);
        for (i, &ai) in xa.iter().enumerate() {
            let a = 0.5 * (ai + 1.0);
            for (j, &bj) in xb.iter().enumerate() {
                let b = 0.5 * (bj + 1.0);
                points.push((a, b * (1.0 - a)));
                weights.push(0.25 * wa[i] * wb[j] * (1.0 - a));
            }
        }
        TriangleRule {
            points,
            weights,
            degree,
        }
    }

    /// Integrate `f` over the physical triangle (p0, p1, p2).
    pub fn integrate(
        &self,
        p0: [f64; 2],
        p1: [f64; 2],
        p2: [f64; 2],
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> f64 {
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let mut acc = 0.0;
        for (&(u, v), &w) in self.points.iter().zip(&self.weights) {
            let x = p0[0] + (p1[0] - p0[0]) * u + (p2[0] - p0[0]) * v;
            let y = p0[1] + (p1[1] - p0[1]) * u + (p2[1] - p0[1]) * v;
            acc += w * f(x, y);
        }
        acc * det
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
    }

    #[test]
    fn segment_rule_integrates_monomials() {
        for degree in 0..=12 {
            let rule = SegmentRule::with_degree(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in 0..=degree {
                let exact = 1.0 / (p as f64 + 1.0);
                let got: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * x.powi(p as i32))
                    .sum();
                assert!(
                    (got - exact).abs() <= 1e-14 * exact.abs(),
                    "deg {degree} monomial {p}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // \int_T x^a y^b = a! b! / (a + b + 2)!
        for degree in 0..=10 {
            let rule = TriangleRule::with_degree(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&(x, y), &w)| w * x.powi(a as i32) * y.powi(b as i32))
                        .sum();
                    assert!(
                        (got - exact).abs() <= 1e-14 * exact.abs().max(1.0),
                        "deg {degree} monomial ({a},{b}): {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn physical_triangle_area() {
        let rule = TriangleRule::with_degree(2);
        let area = rule.integrate([0.0, 0.0], [2.0, 0.0], [0.0, 3.0], |_, _| 1.0);
        assert!((area - 3.0).abs() < 1e-14);
    }
}
