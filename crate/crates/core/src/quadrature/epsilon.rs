//! Wynn's epsilon algorithm over a sliding window of partial sums.

/// Streaming extrapolation of a sequence of partial sums.
///
/// Each push re-runs the epsilon table on the most recent `window` partial
/// sums and returns the highest even-column entry of the last antidiagonal.
/// The error estimate compares this value with the two previous ones.
#[derive(Debug, Clone)]
pub struct EpsilonTable {
    window: usize,
    sums: Vec<f64>,
    estimates: [f64; 3],
    pushed: usize,
}

impl EpsilonTable {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(3),
            sums: Vec::with_capacity(window.max(3)),
            estimates: [f64::NAN; 3],
            pushed: 0,
        }
    }

    /// Adds the next partial sum; returns `(estimate, error)`.
    pub fn push(&mut self, partial_sum: f64) -> (f64, f64) {
        if self.sums.len() == self.window {
            self.sums.remove(0);
        }
        self.sums.push(partial_sum);
        let estimate = wynn_limit(&self.sums);
        self.estimates = [self.estimates[1], self.estimates[2], estimate];
        self.pushed += 1;
        let error = if self.pushed < 3 {
            f64::INFINITY
        } else {
            (estimate - self.estimates[1]).abs() + (estimate - self.estimates[0]).abs()
        };
        (estimate, error.max(4.0 * f64::EPSILON * estimate.abs()))
    }

    pub fn last_partial_sums(&self) -> [f64; 3] {
        let n = self.sums.len();
        let at = |k: usize| if n > k { self.sums[n - 1 - k] } else { f64::NAN };
        [at(2), at(1), at(0)]
    }
}

/// Epsilon-table limit of `seq`.
pub fn wynn_limit(seq: &[f64]) -> f64 {
    let n = seq.len();
    let Some(&last) = seq.last() else {
        return f64::NAN;
    };
    if n < 3 {
        return last;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = seq.to_vec();
    let mut best = last;
    let mut column = 0;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            let scale = cur[i + 1].abs().max(cur[i].abs());
            if !(d.abs() > 1e-15 * scale) {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        column += 1;
        if column % 2 == 0 {
            let v = cur[cur.len() - 1];
            if !v.is_finite() {
                return best;
            }
            best = v;
        }
    }
    best
}
