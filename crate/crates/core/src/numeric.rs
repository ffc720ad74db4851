//! Small numerical kernels shared by the designers and propagators:
//! cumulative trapezoid quadrature, shape-preserving cubic interpolation and
//! the Hurwitz zeta tails used by the ring coupling renormalization.

use crate::error::{Error, Result};

/// Running trapezoid integral of `y` over the abscissae `x`, starting at zero.
/// `x` may be increasing or decreasing; the sign of each panel follows `x`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..x.len() {
        acc += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
        out.push(acc);
    }
    out
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    cumulative_trapezoid(x, y).last().copied().unwrap_or(0.0)
}

/// `n` equally spaced samples from `a` to `b`, with both endpoints exact.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|k| a + step * k as f64).collect();
            v[n - 1] = b;
            v
        }
    }
}

/// Centered finite-difference derivative on a (possibly non-uniform) grid,
/// second-order one-sided at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let mut g = vec![0.0; n];
    for k in 1..n - 1 {
        let h0 = x[k] - x[k - 1];
        let h1 = x[k + 1] - x[k];
        g[k] = (h0 * h0 * y[k + 1] - h1 * h1 * y[k - 1] + (h1 * h1 - h0 * h0) * y[k])
            / (h0 * h1 * (h0 + h1));
    }
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    g[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0] + (h0 + h1) / (h0 * h1) * y[1]
        - h0 / (h1 * (h0 + h1)) * y[2];
    let (h0, h1) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    g[n - 1] = h1 / (h0 * (h0 + h1)) * y[n - 3] - (h0 + h1) / (h0 * h1) * y[n - 2]
        + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * y[n - 1];
    g
}

/// Piecewise-cubic Hermite interpolant with Fritsch-Carlson slopes. Monotone
/// data produce a monotone interpolant; nodes are reproduced exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::with_slopes(x, y, vec![f64::NAN; n])
    }

    /// Hermite interpolant with given node slopes. Non-finite entries are
    /// replaced by Fritsch-Carlson estimates, and every interval is limited
    /// so the result stays monotone on monotone data.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut slope: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || slope.len() != n {
            return Err(Error::InvalidInput(
                "interpolation needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite interpolation node".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let estimate = estimated_slopes(&h, &delta);
        for (m, e) in slope.iter_mut().zip(estimate) {
            if !m.is_finite() {
                *m = e;
            }
        }
        for k in 0..n - 1 {
            if delta[k] == 0.0 {
                slope[k] = 0.0;
                slope[k + 1] = 0.0;
                continue;
            }
            let (mut a, mut b) = (slope[k] / delta[k], slope[k + 1] / delta[k]);
            if a < 0.0 {
                slope[k] = 0.0;
                a = 0.0;
            }
            if b < 0.0 {
                slope[k + 1] = 0.0;
                b = 0.0;
            }
            let r = a.hypot(b);
            if r > 3.0 {
                slope[k] = 3.0 / r * a * delta[k];
                slope[k + 1] = 3.0 / r * b * delta[k];
            }
        }
        Ok(Self { x, y, slope })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value at `t`, clamped to the node range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.y[k]
            + (u3 - 2.0 * u2 + u) * h * self.slope[k]
            + (-2.0 * u3 + 3.0 * u2) * self.y[k + 1]
            + (u3 - u2) * h * self.slope[k + 1]
    }

    /// First derivative at `t` (one-sided at the ends).
    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let u2 = u * u;
        ((6.0 * u2 - 6.0 * u) * self.y[k]
            + (3.0 * u2 - 4.0 * u + 1.0) * h * self.slope[k]
            + (-6.0 * u2 + 6.0 * u) * self.y[k + 1]
            + (3.0 * u2 - 2.0 * u) * h * self.slope[k + 1])
            / h
    }
}

fn estimated_slopes(h: &[f64], delta: &[f64]) -> Vec<f64> {
    let n = h.len() + 1;
    let mut slope = vec![0.0; n];
    if n == 2 {
        slope[0] = delta[0];
        slope[1] = delta[0];
        return slope;
    }
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            slope[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    slope
}

// Three-point end slope, limited so the end segment stays monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Hurwitz zeta `sum_{n>=0} (q + n)^(-s)` for integer `s >= 2` and `q > 0`.
/// Ten direct terms followed by an Euler-Maclaurin tail.
pub fn hurwitz_zeta(s: u32, q: f64) -> f64 {
    const DIRECT: usize = 10;
    let sf = s as f64;
    let mut sum = 0.0;
    for n in 0..DIRECT {
        sum += (q + n as f64).powi(-(s as i32));
    }
    let a = q + DIRECT as f64;
    // Bernoulli numbers B2, B4, B6, B8, B10 over (2j)!
    const COEF: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut tail = a.powf(1.0 - sf) / (sf - 1.0) + 0.5 * a.powf(-sf);
    // rising factorial s (s+1) ... (s+2j-2) times a^(-s-2j+1)
    let mut rising = sf;
    let mut power = a.powf(-sf - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        tail += c * rising * power;
        let m = sf + (2 * j + 1) as f64;
        rising *= m * (m + 1.0);
        power /= a * a;
    }
    sum + tail
}
