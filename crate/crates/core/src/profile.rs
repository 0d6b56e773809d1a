//! Piecewise-polynomial functions of one variable.
//!
//! Base states, initial data and targets are all described this way so they
//! can be evaluated at quadrature points, differentiated and integrated
//! exactly. Each piece stores coefficients of a polynomial in the local
//! coordinate `x - start`.

/// One polynomial piece on `[start, next piece's start)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: f64,
    /// Coefficients in increasing degree of `(x - start)`.
    pub coeffs: Vec<f64>,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        let s = x - self.start;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }
}

/// A right-continuous piecewise polynomial. Points left of the first
/// breakpoint evaluate with the first piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    pieces: Vec<Piece>,
}

impl Piecewise {
    /// Builds from pieces sorted by strictly increasing start.
    pub fn new(pieces: Vec<Piece>) -> Self {
        assert!(!pieces.is_empty(), "piecewise function needs at least one piece");
        assert!(
            pieces.windows(2).all(|w| w[0].start < w[1].start),
            "piece starts must be strictly increasing"
        );
        Self { pieces }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Piece { start: 0.0, coeffs: vec![c] }])
    }

    /// Polynomial `sum c_k x^k` on the whole line.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(vec![Piece { start: 0.0, coeffs }])
    }

    /// Piecewise constant: `values[i]` on `[starts[i], starts[i+1])`.
    pub fn piecewise_constant(starts: &[f64], values: &[f64]) -> Self {
        assert_eq!(starts.len(), values.len());
        Self::new(
            starts
                .iter()
                .zip(values)
                .map(|(&start, &v)| Piece { start, coeffs: vec![v] })
                .collect(),
        )
    }

    /// Continuous piecewise-linear interpolant through `(xs[i], ys[i])`.
    pub fn linear_interpolant(xs: &[f64], ys: &[f64]) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len());
        Self::new(
            xs.windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| Piece {
                    start: x[0],
                    coeffs: vec![y[0], (y[1] - y[0]) / (x[1] - x[0])],
                })
                .collect(),
        )
    }

    /// `sum c_k (x - centre)^k` on `[start, end)` and zero elsewhere on `x >= 0`.
    pub fn local_polynomial(start: f64, end: f64, centre: f64, coeffs: &[f64]) -> Self {
        assert!(start < end, "empty support");
        let mut pieces = Vec::with_capacity(3);
        if start > 0.0 {
            pieces.push(Piece { start: 0.0, coeffs: vec![0.0] });
        }
        pieces.push(Piece {
            start,
            coeffs: shift_poly(coeffs, start - centre),
        });
        pieces.push(Piece { start: end, coeffs: vec![0.0] });
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Interior breakpoints (piece starts after the first).
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().skip(1).map(|p| p.start)
    }

    fn locate(&self, x: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.start <= x);
        &self.pieces[idx.saturating_sub(1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.locate(x).eval(x)
    }

    /// Value approached from the left at `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let idx = self.pieces.partition_point(|p| p.start < x);
        self.pieces[idx.saturating_sub(1)].eval(x)
    }

    /// Piecewise derivative.
    pub fn derivative(&self) -> Self {
        Self::new(
            self.pieces
                .iter()
                .map(|p| {
                    let coeffs: Vec<f64> = if p.coeffs.len() <= 1 {
                        vec![0.0]
                    } else {
                        p.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
                    };
                    Piece { start: p.start, coeffs }
                })
                .collect(),
        )
    }

    /// Continuous antiderivative anchored at `value_at_origin` for `x = origin`.
    ///
    /// `origin` must not lie left of the first piece start.
    pub fn antiderivative(&self, origin: f64, value_at_origin: f64) -> Self {
        let first = self.pieces[0].start;
        assert!(origin >= first, "origin must lie inside the described range");
        let mut out = Vec::with_capacity(self.pieces.len());
        let mut acc = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let mut coeffs = vec![acc];
            coeffs.extend(p.coeffs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)));
            let piece = Piece { start: p.start, coeffs };
            if let Some(next) = self.pieces.get(i + 1) {
                acc = piece.eval(next.start);
            }
            out.push(piece);
        }
        let mut f = Self::new(out);
        let shift = value_at_origin - f.eval(origin);
        for p in &mut f.pieces {
            p.coeffs[0] += shift;
        }
        f
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let anti = self.antiderivative(self.pieces[0].start, 0.0);
        anti.eval_left(b) - anti.eval(a)
    }

    /// `self + other * scale`, merging breakpoints.
    pub fn add_scaled(&self, other: &Piecewise, scale: f64) -> Self {
        let mut starts: Vec<f64> = self.pieces.iter().chain(&other.pieces).map(|p| p.start).collect();
        starts.sort_by(f64::total_cmp);
        starts.dedup();
        let pieces = starts
            .iter()
            .map(|&s| {
                let a = self.locate(s);
                let b = other.locate(s);
                let ca = shift_poly(&a.coeffs, s - a.start);
                let cb = shift_poly(&b.coeffs, s - b.start);
                let n = ca.len().max(cb.len());
                let coeffs = (0..n)
                    .map(|k| ca.get(k).copied().unwrap_or(0.0) + scale * cb.get(k).copied().unwrap_or(0.0))
                    .collect();
                Piece { start: s, coeffs }
            })
            .collect();
        Self::new(pieces)
    }
}

/// Re-expands `sum c_k s^k` around `s = shift`.
fn shift_poly(coeffs: &[f64], shift: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (k, &c) in coeffs.iter().enumerate() {
        // c (t + shift)^k = c sum_j binom(k, j) shift^(k-j) t^j
        let mut binom = 1.0;
        for j in 0..=k {
            out[j] += c * binom * shift.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_derivative() {
        let f = Piecewise::polynomial(vec![1.0, -2.0, 3.0]);
        assert!((f.eval(2.0) - 9.0).abs() < 1e-14);
        assert!((f.derivative().eval(2.0) - 10.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_constant_is_right_continuous() {
        let f = Piecewise::piecewise_constant(&[0.0, 0.5], &[1.0, 3.0]);
        assert_eq!(f.eval(0.5), 3.0);
        assert_eq!(f.eval_left(0.5), 1.0);
        assert_eq!(f.eval(0.49), 1.0);
        assert_eq!(f.eval(-1.0), 1.0);
    }

    #[test]
    fn antiderivative_is_continuous() {
        let f = Piecewise::piecewise_constant(&[0.0, 0.3, 0.7], &[2.0, 0.0, 1.0]);
        let u = f.antiderivative(0.0, 0.0);
        for b in [0.3, 0.7] {
            assert!((u.eval(b) - u.eval_left(b)).abs() < 1e-15);
        }
        assert!((u.eval(1.0) - (0.6 + 0.3)).abs() < 1e-15);
        assert!((f.integral(0.0, 1.0) - 0.9).abs() < 1e-15);
        assert!((f.integral(0.2, 0.8) - (0.2 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn add_scaled_merges_breaks() {
        let f = Piecewise::piecewise_constant(&[0.0, 0.5], &[1.0, 3.0]);
        let g = Piecewise::polynomial(vec![0.0, 1.0]);
        let h = f.add_scaled(&g, 2.0);
        for x in [0.1, 0.4, 0.6, 0.9] {
            assert!((h.eval(x) - (f.eval(x) + 2.0 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn local_polynomial_is_supported_on_its_interval() {
        let f = Piecewise::local_polynomial(0.2, 0.6, 0.4, &[1.0, 0.0, -25.0]);
        assert_eq!(f.eval(0.1), 0.0);
        assert_eq!(f.eval(0.7), 0.0);
        assert!((f.eval(0.4) - 1.0).abs() < 1e-14);
        assert!(f.eval(0.2).abs() < 1e-14 && f.eval_left(0.6).abs() < 1e-14);
        assert!((f.eval(0.5) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn linear_interpolant_hits_nodes() {
        let f = Piecewise::linear_interpolant(&[0.0, 0.25, 1.0], &[0.0, 1.0, -1.0]);
        assert_eq!(f.eval(0.25), 1.0);
        assert!((f.eval(1.0) + 1.0).abs() < 1e-15);
        assert!((f.eval(0.625) - 0.0).abs() < 1e-15);
    }
}
