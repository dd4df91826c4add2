//! Gauss–Legendre rules on `[0, 1]`.

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `order`-point Gauss–Legendre rule mapped to `[0, 1]`; exact for
    /// polynomials of degree `2·order - 1`.
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::QuadratureOrder(order));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // roots are symmetric about 0 on [-1, 1]; solve for the positive half
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = 1.0 / ((1.0 - x * x) * dp * dp);
            // map x ∈ [-1, 1] to ξ ∈ [0, 1]; weights 2/(...) halve to 1/(...)
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.5;
        }
        Ok(Self { nodes, weights })
    }

    /// Composite rule: an `order`-point Gauss–Legendre rule on each panel
    /// `[breaks[i], breaks[i+1]]`. Breakpoints must increase from 0 to 1.
    pub fn composite(order: usize, breaks: &[f64]) -> Result<Self> {
        let ok = breaks.len() >= 2
            && breaks[0] == 0.0
            && breaks[breaks.len() - 1] == 1.0
            && breaks.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::QuadratureRule(format!("breakpoints {breaks:?} must increase from 0 to 1")));
        }
        let base = Self::gauss_legendre(order)?;
        let mut nodes = Vec::with_capacity(order * (breaks.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let h = w[1] - w[0];
            for (x, wt) in base.iter() {
                nodes.push(w[0] + h * x);
                weights.push(h * wt);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Composite rule whose panels shrink geometrically by `ratio` over
    /// `levels` steps towards both ends of `[0, 1]`. Resolves integrands that
    /// are analytic on the interval but nearly singular just outside an end.
    pub fn graded(order: usize, levels: usize, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::QuadratureRule(format!("grading ratio {ratio} outside (0, 1)")));
        }
        let mut left: Vec<f64> = (1..=levels).rev().map(|k| 0.5 * ratio.powi(k as i32)).collect();
        left.insert(0, 0.0);
        let mut breaks = left.clone();
        breaks.push(0.5);
        breaks.extend(left.iter().rev().map(|x| 1.0 - x));
        Self::composite(order, &breaks)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

// P_n(x) and P_n'(x) by the three-term recurrence.
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

    #[test]
    fn weights_sum_to_one_and_nodes_are_interior() {
        for order in 1..=40 {
            let q = QuadratureRule::gauss_legendre(order).unwrap();
            let sum: f64 = q.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "order {order}: {sum}");
            assert!(q.nodes().iter().all(|&x| x > 0.0 && x < 1.0));
            assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for order in [1, 2, 3, 4, 8, 16] {
            let q = QuadratureRule::gauss_legendre(order).unwrap();
            for deg in 0..2 * order {
                let approx: f64 = q.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-14, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn known_two_point_rule() {
        let q = QuadratureRule::gauss_legendre(2).unwrap();
        let r = 0.5 / 3f64.sqrt();
        assert!((q.nodes()[0] - (0.5 - r)).abs() < 1e-16);
        assert!((q.nodes()[1] - (0.5 + r)).abs() < 1e-16);
        assert_eq!(q.weights()[0], q.weights()[1]);
    }

    #[test]
    fn composite_rules_integrate_polynomials() {
        let q = QuadratureRule::composite(3, &[0.0, 0.2, 0.7, 1.0]).unwrap();
        assert_eq!(q.order(), 9);
        let g = QuadratureRule::graded(4, 6, 0.2).unwrap();
        assert_eq!(g.order(), 4 * 14);
        for rule in [&q, &g] {
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            for deg in 0..6 {
                let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(deg)).sum();
                assert!((approx - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14);
            }
        }
        assert!(QuadratureRule::composite(3, &[0.0, 0.5]).is_err());
        assert!(QuadratureRule::graded(3, 4, 1.5).is_err());
    }

    #[test]
    fn graded_rule_resolves_endpoint_near_singularity() {
        // 1/(x + δ) has a pole just left of 0
        let delta: f64 = 1e-4;
        let exact = ((1.0 + delta) / delta).ln();
        let plain: f64 = QuadratureRule::gauss_legendre(40).unwrap().iter().map(|(x, w)| w / (x + delta)).sum();
        let graded: f64 = QuadratureRule::graded(20, 10, 0.2).unwrap().iter().map(|(x, w)| w / (x + delta)).sum();
        assert!((plain - exact).abs() > 1e-3);
        assert!((graded - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn zero_order_rejected() {
        assert_eq!(QuadratureRule::gauss_legendre(0), Err(Error::QuadratureOrder(0)));
    }
}
