//! Monotone-preserving cubic Hermite interpolation on a uniform grid.
//!
//! Node slopes come from fourth-order finite differences and are then
//! limited with the Fritsch-Carlson conditions, so smooth data is
//! reproduced to fourth order while monotone data never overshoots.

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    /// Interpolant through `(x0 + i*h, y[i])`. Needs at least two nodes.
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        assert!(y.len() >= 2, "interpolation needs at least two nodes");
        assert!(h > 0.0, "grid step must be positive");
        let mut slope = raw_slopes(&y, h);
        limit(&y, h, &mut slope);
        Self { x0, h, y, slope }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.y
            .iter()
            .enumerate()
            .map(move |(i, &y)| (self.x0 + self.h * i as f64, y))
    }

    /// Value at `x`; outside the grid the end cubic is continued.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.x0) / self.h;
        let k = (pos.floor().max(0.0) as usize).min(self.y.len() - 2);
        let t = pos - k as f64;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (d0, d1) = (self.slope[k] * self.h, self.slope[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    }
}

fn raw_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    if n < 5 {
        // Three-point differences; one-sided at the ends.
        return (0..n)
            .map(|i| match i {
                0 => (y[1] - y[0]) / h,
                i if i == n - 1 => (y[n - 1] - y[n - 2]) / h,
                i => (y[i + 1] - y[i - 1]) / (2.0 * h),
            })
            .collect();
    }
    let c = 12.0 * h;
    (0..n)
        .map(|i| match i {
            0 => (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / c,
            1 => (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / c,
            i if i == n - 2 => {
                (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) / c
            }
            i if i == n - 1 => {
                (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
                    + 3.0 * y[n - 5])
                    / c
            }
            i => (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / c,
        })
        .collect()
}

fn limit(y: &[f64], h: f64, slope: &mut [f64]) {
    let n = y.len();
    let secant: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h).collect();
    for i in 1..n - 1 {
        if secant[i - 1] * secant[i] <= 0.0 {
            slope[i] = 0.0;
        }
    }
    for k in 0..n - 1 {
        let delta = secant[k];
        if delta == 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        let mut alpha = slope[k] / delta;
        let mut beta = slope[k + 1] / delta;
        if alpha < 0.0 {
            slope[k] = 0.0;
            alpha = 0.0;
        }
        if beta < 0.0 {
            slope[k + 1] = 0.0;
            beta = 0.0;
        }
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            slope[k] = tau * alpha * delta;
            slope[k + 1] = tau * beta * delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes() {
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).exp()).collect();
        let c = MonotoneCubic::new(0.0, 0.3, y.clone());
        for (i, v) in y.iter().enumerate() {
            assert!((c.eval(i as f64 * 0.3) - v).abs() < 1e-14 * v);
        }
    }

    #[test]
    fn fourth_order_on_smooth_data() {
        let f = |x: f64| (0.7 * x).sin() + 0.1 * x * x;
        let err = |h: f64| {
            let n = (4.0 / h) as usize + 1;
            let c = MonotoneCubic::new(0.0, h, (0..n).map(|i| f(i as f64 * h)).collect());
            (0..n - 1)
                .map(|i| {
                    let x = (i as f64 + 0.5) * h;
                    (c.eval(x) - f(x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(0.1), err(0.05));
        assert!(coarse / fine > 10.0, "{coarse} {fine}");
    }

    #[test]
    fn monotone_data_never_overshoots() {
        let y = vec![0.0, 0.0, 0.1, 5.0, 5.01, 5.02, 9.0, 9.0];
        let c = MonotoneCubic::new(0.0, 1.0, y);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=700 {
            let v = c.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-12);
            assert!((0.0..=9.0 + 1e-12).contains(&v));
            prev = v;
        }
    }
}
