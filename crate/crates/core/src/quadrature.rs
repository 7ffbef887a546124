//! Composite Gauss–Legendre rules.

use std::f64::consts::PI;

/// Points per panel used throughout operator assembly.
pub const PANEL_ORDER: usize = 8;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A flattened composite rule: nodes and weights over a union of panels.
#[derive(Debug, Clone, Default)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// Builds panels between consecutive `breakpoints` (ascending), each
    /// interval subdivided uniformly so no panel is wider than `max_width`.
    pub fn from_breakpoints(breakpoints: &[f64], max_width: f64, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut rule = CompositeRule::default();
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            let pieces = if max_width.is_finite() && max_width > 0.0 {
                (len / max_width).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = len / pieces as f64;
            for p in 0..pieces {
                let lo = a + p as f64 * h;
                let hi = if p + 1 == pieces { b } else { lo + h };
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                for (xi, wi) in x.iter().zip(&w) {
                    rule.nodes.push(mid + half * xi);
                    rule.weights.push(half * wi);
                }
            }
        }
        rule
    }

    /// Uniform panels on `[a, b]`.
    pub fn uniform(a: f64, b: f64, max_width: f64, order: usize) -> Self {
        Self::from_breakpoints(&[a, b], max_width, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], step: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            step * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for order in 1..=20 {
            let (_, w) = gauss_legendre(order);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "degree {deg}: {got} vs {exact}");
        }
    }

    #[test]
    fn order_eight_nodes_match_tables() {
        let (x, w) = gauss_legendre(8);
        assert_relative_eq!(x[7], 0.960_289_856_497_536_3, epsilon = 1e-15);
        assert_relative_eq!(w[7], 0.101_228_536_290_376_3, epsilon = 1e-15);
        assert_relative_eq!(x[4], 0.183_434_642_495_649_8, epsilon = 1e-15);
    }

    #[test]
    fn composite_rule_respects_breakpoints() {
        let rule = CompositeRule::from_breakpoints(&[0.0, 1.0, 3.0], 0.5, 4);
        // 2 panels on [0,1], 4 on [1,3]
        assert_eq!(rule.len(), 24);
        assert_relative_eq!(rule.integrate(|x| x.sin()), 1.0 - 3f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let s: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        assert_relative_eq!(trapezoid(&s, 0.1), 0.5, epsilon = 1e-14);
    }
}
