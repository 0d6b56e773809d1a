//! Gauss-Legendre rules on the reference interval `[-1, 1]`.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("Gauss-Legendre rules are tabulated for 1 to 5 points, got {0}")]
pub struct UnsupportedOrder(pub usize);

impl QuadratureRule {
    /// `n`-point Gauss-Legendre rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss(n: usize) -> Result<Self, UnsupportedOrder> {
        let (points, weights): (Vec<f64>, Vec<f64>) = match n {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let a = 1.0 / 3f64.sqrt();
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = (3.0f64 / 5.0).sqrt();
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => {
                let r = (6.0f64 / 5.0).sqrt() * 2.0 / 7.0;
                let a = (3.0 / 7.0 - r).sqrt();
                let b = (3.0 / 7.0 + r).sqrt();
                let wa = (18.0 + 30f64.sqrt()) / 36.0;
                let wb = (18.0 - 30f64.sqrt()) / 36.0;
                (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
            }
            5 => {
                let r = 2.0 * (10.0f64 / 7.0).sqrt();
                let a = (5.0 - r).sqrt() / 3.0;
                let b = (5.0 + r).sqrt() / 3.0;
                let s = 13.0 * 70f64.sqrt();
                let wa = (322.0 + s) / 900.0;
                let wb = (322.0 - s) / 900.0;
                (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
            }
            _ => return Err(UnsupportedOrder(n)),
        };
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&p, &w)| (mid + half * p, half * w))
    }
}
