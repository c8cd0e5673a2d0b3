//! Symmetric quadrature rules on triangles, written in barycentric coordinates.

/// Barycentric points and weights normalized to sum to 1 (multiply by the area).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Three interior points, exact for quadratics.
    pub fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        TriangleRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Seven-point Radon rule, exact for quintics.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let r = (6.0 - s15) / 21.0;
        let s = (6.0 + s15) / 21.0;
        let wr = (155.0 - s15) / 1200.0;
        let ws = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        TriangleRule {
            points: vec![
                [third, third, third],
                [1.0 - 2.0 * r, r, r],
                [r, 1.0 - 2.0 * r, r],
                [r, r, 1.0 - 2.0 * r],
                [1.0 - 2.0 * s, s, s],
                [s, 1.0 - 2.0 * s, s],
                [s, s, 1.0 - 2.0 * s],
            ],
            weights: vec![9.0 / 40.0, wr, wr, wr, ws, ws, ws],
            degree: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
