//! Composite Gauss–Legendre quadrature on an interval.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Fixed nodes and weights of a composite Gauss–Legendre rule on `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CompositeRule {
    /// `panels` equal sub-intervals with `points` nodes each.
    pub fn new(a: f64, b: f64, panels: usize, points: usize) -> Self {
        let panels = panels.max(1);
        let rule = GaussLegendre::new(NonZeroUsize::new(points.max(1)).unwrap());
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * points);
        let mut weights = Vec::with_capacity(panels * points);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for &(x, w) in rule.as_node_weight_pairs() {
                nodes.push(lo + 0.5 * width * (x + 1.0));
                weights.push(0.5 * width * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = CompositeRule::new(0.0, 2.0, 3, 4);
        assert_eq!(rule.len(), 12);
        assert_relative_eq!(
            rule.integrate(|x| x.powi(7)),
            2f64.powi(8) / 8.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(rule.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn integrates_oscillatory_function() {
        let rule = CompositeRule::new(0.0, 1.0, 4, 16);
        let exact = (1.0 - (20.0f64).cos()) / 20.0;
        assert_relative_eq!(rule.integrate(|x| (20.0 * x).sin()), exact, epsilon = 1e-14);
    }
}
