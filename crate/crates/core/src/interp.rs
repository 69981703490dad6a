//! Piecewise cubic interpolation on strictly increasing abscissae.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("abscissae are not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("table lengths differ")]
    LengthMismatch,
}

/// Cubic Hermite interpolant with prescribed slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Hermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ds: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() || xs.len() != ds.len() {
            return Err(InterpError::LengthMismatch);
        }
        if xs.len() < 2 {
            return Err(InterpError::TooFewPoints(xs.len()));
        }
        if let Some(i) = xs.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(InterpError::NotIncreasing(i + 1));
        }
        Ok(Hermite { xs, ys, ds })
    }

    /// Monotone piecewise cubic (Fritsch–Carlson slopes).
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() {
            return Err(InterpError::LengthMismatch);
        }
        if xs.len() < 2 {
            return Err(InterpError::TooFewPoints(xs.len()));
        }
        let n = xs.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut ds = vec![0.0; n];
        ds[0] = delta[0];
        ds[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Hermite::new(xs, ys, ds)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.ds
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&v| v <= x);
        i.clamp(1, self.xs.len() - 1) - 1
    }

    /// Value at `x`; outside the table the end cubics are extended.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_slope(x).0
    }

    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.ds[i] * h, self.ds[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let slope = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (value, slope)
    }
}
