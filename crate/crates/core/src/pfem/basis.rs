use crate::quadrature::legendre_all;

/// Hierarchic shape functions on [-1, 1]: two nodal linears followed by the
/// integrated-Legendre bubbles of degree 2..=p.
///
/// Bubble `k` is `(P_k - P_{k-2}) / sqrt(2(2k-1))`, times an optional per-mode
/// scale. The scale does not change the condensed nodal stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicBasis {
    degree: usize,
    mode_scale: Vec<f64>,
}

impl HierarchicBasis {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "degree must be >= 1");
        Self { degree, mode_scale: vec![1.0; degree.saturating_sub(1)] }
    }

    /// Same space with the bubble of degree `k` multiplied by `scales[k - 2]`.
    pub fn with_mode_scale(degree: usize, scales: Vec<f64>) -> Self {
        assert_eq!(scales.len(), degree.saturating_sub(1));
        assert!(scales.iter().all(|s| *s != 0.0));
        Self { degree, mode_scale: scales }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_modes(&self) -> usize {
        self.degree + 1
    }

    pub fn num_internal(&self) -> usize {
        self.degree - 1
    }

    pub fn values(&self, xi: f64) -> Vec<f64> {
        let p = self.degree;
        let leg = legendre_all(p, xi);
        let mut out = Vec::with_capacity(p + 1);
        out.push(0.5 * (1.0 - xi));
        out.push(0.5 * (1.0 + xi));
        for k in 2..=p {
            let kf = k as f64;
            let norm = (2.0 * (2.0 * kf - 1.0)).sqrt();
            out.push(self.mode_scale[k - 2] * (leg[k] - leg[k - 2]) / norm);
        }
        out
    }

    pub fn derivatives(&self, xi: f64) -> Vec<f64> {
        let p = self.degree;
        let leg = legendre_all(p.saturating_sub(1), xi);
        let mut out = Vec::with_capacity(p + 1);
        out.push(-0.5);
        out.push(0.5);
        for k in 2..=p {
            let kf = k as f64;
            out.push(self.mode_scale[k - 2] * ((2.0 * kf - 1.0) / 2.0).sqrt() * leg[k - 1]);
        }
        out
    }
}
