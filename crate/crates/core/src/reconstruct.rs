//! Reconstruction of the scaling function from the exact solution.
//!
//! Inverting the automodel form pointwise gives
//! `Q_W(rho, t) = ((gamma t / (2 f))^(1/(gamma+1)) - 1) / rho`, which equals
//! `g(s)` wherever the automodel is exact. Its time average at fixed `s`
//! estimates `g`, and the spread around that average measures the collapse.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automodel::GCurve;
use crate::error::{require_positive, Error, Result};
use crate::exact::ExactField;
use crate::kernel::KernelParams;
use crate::meshes::LogMesh;
use crate::numfmt::fmt17;

/// Minimum number of nodes in the large-`s` slope window.
pub const MIN_FIT_POINTS: usize = 10;

/// Width of the slope window in decades, measured down from the top of the mesh.
pub const FIT_WINDOW_DECADES: f64 = 0.5;

/// Weight of each time in the average of `Q_W` over `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWeighting {
    /// Time integral by the trapezoid rule in `t`, divided by `t_max - t_min`.
    #[default]
    Linear,
    /// Plain mean over the log-spaced mesh times.
    Logarithmic,
}

/// `Q_W = ((gamma t / (2 f))^(1/(gamma+1)) - 1) / rho`.
pub fn q_w(params: KernelParams, rho: f64, t: f64, f: f64) -> Result<f64> {
    require_positive("distance rho", rho)?;
    require_positive("time t", t)?;
    require_positive("density f", f)?;
    Ok(q_w_unchecked(params.gamma(), rho, t, f))
}

#[inline]
pub(crate) fn q_w_unchecked(gamma: f64, rho: f64, t: f64, f: f64) -> f64 {
    let power = gamma + 1.0;
    let target = gamma * t / (2.0 * f);
    // One Newton step against the exact exponent removes the rounding of
    // 1/(gamma+1), which is amplified by ln(target) when the base is large.
    let root = target.powf(1.0 / power);
    let root = root * (1.0 + (target / root.powf(power) - 1.0) / power);
    (root - 1.0) / rho
}

/// `Q_W` over the `(t, s)` grid with its per-`s` time average and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    gamma: f64,
    t_mesh: LogMesh,
    s_mesh: LogMesh,
    /// Row-major like [`ExactField`].
    q_values: Vec<f64>,
    q_avg: Vec<f64>,
    spread: Vec<f64>,
}

impl QField {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_mesh(&self) -> &LogMesh {
        &self.t_mesh
    }

    pub fn s_mesh(&self) -> &LogMesh {
        &self.s_mesh
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q_values[i * self.s_mesh.len() + j]
    }

    pub fn q_avg(&self) -> &[f64] {
        &self.q_avg
    }

    /// `max_t |Q_W / q_avg - 1|` per `s`.
    pub fn spread(&self) -> &[f64] {
        &self.spread
    }

    /// Spread restricted to rows `first_row..`, still relative to the full average.
    pub fn spread_from(&self, first_row: usize) -> Vec<f64> {
        let n = self.s_mesh.len();
        (0..n)
            .map(|j| {
                (first_row..self.t_mesh.len())
                    .map(|i| (self.q_values[i * n + j] / self.q_avg[j] - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Rows `t,s,q_w,q_norm` with `q_norm = Q_W / q_avg`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# gamma={} t_mesh={} s_mesh={}\nt,s,q_w,q_norm\n",
            fmt17(self.gamma),
            self.t_mesh,
            self.s_mesh
        );
        for (i, t) in self.t_mesh.values().iter().enumerate() {
            for (j, s) in self.s_mesh.values().iter().enumerate() {
                let q = self.get(i, j);
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt17(*t),
                    fmt17(*s),
                    fmt17(q),
                    fmt17(q / self.q_avg[j])
                );
            }
        }
        out
    }
}

/// Neumaier-compensated sum in iteration order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let next = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - next) + v
        } else {
            (v - next) + sum
        };
        sum = next;
    }
    sum + carry
}

/// Fixed-order average of one column under the given weighting.
fn time_average(column: &[f64], times: &[f64], weighting: TimeWeighting) -> f64 {
    let n = column.len();
    if n == 1 {
        return column[0];
    }
    match weighting {
        TimeWeighting::Logarithmic => compensated_sum(column.iter().copied()) / n as f64,
        TimeWeighting::Linear => {
            let area = compensated_sum(
                (0..n - 1).map(|i| 0.5 * (column[i] + column[i + 1]) * (times[i + 1] - times[i])),
            );
            area / (times[n - 1] - times[0])
        }
    }
}

/// [`q_field_weighted`] with the default weighting.
pub fn q_field(field: &ExactField) -> Result<QField> {
    q_field_weighted(field, TimeWeighting::default())
}

pub fn q_field_weighted(field: &ExactField, weighting: TimeWeighting) -> Result<QField> {
    let gamma = field.gamma();
    let (t_mesh, s_mesh) = (field.t_mesh(), field.s_mesh());
    let (rows, cols) = (t_mesh.len(), s_mesh.len());
    if let Some(k) = field.values().iter().position(|f| !(*f > 0.0)) {
        return Err(Error::NonPositiveDensity {
            t: t_mesh.values()[k / cols],
            s: s_mesh.values()[k % cols],
            value: field.values()[k],
        });
    }
    let q_values: Vec<f64> = (0..rows * cols)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / cols, k % cols);
            q_w_unchecked(gamma, field.rho(i, j), t_mesh.values()[i], field.values()[k])
        })
        .collect();
    if let Some(k) = q_values.iter().position(|q| !(q.is_finite() && *q > 0.0)) {
        return Err(Error::Domain {
            what: "reconstructed Q_W",
            constraint: "positive and finite",
            value: q_values[k],
        });
    }
    let column_stats: Vec<(f64, f64)> = (0..cols)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = (0..rows).map(|i| q_values[i * cols + j]).collect();
            let avg = time_average(&column, t_mesh.values(), weighting);
            let spread = column.iter().map(|q| (q / avg - 1.0).abs()).fold(0.0, f64::max);
            (avg, spread)
        })
        .collect();
    let (q_avg, spread) = column_stats.into_iter().unzip();
    Ok(QField {
        gamma,
        t_mesh: t_mesh.clone(),
        s_mesh: s_mesh.clone(),
        q_values,
        q_avg,
        spread,
    })
}

/// Large-`s` slope: least squares of `ln g = ln alpha + ln s` over the top
/// half-decade, i.e. the geometric mean of `g / s` there.
pub fn fit_alpha(s_mesh: &LogMesh, g: &[f64]) -> Result<f64> {
    let s = s_mesh.values();
    let threshold = s_mesh.hi() * 10f64.powf(-FIT_WINDOW_DECADES) * (1.0 - 1e-9);
    let window: Vec<f64> = s
        .iter()
        .zip(g)
        .filter(|(s, _)| **s >= threshold)
        .map(|(s, g)| (g / s).ln())
        .collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::FitWindow {
            needed: MIN_FIT_POINTS,
            found: window.len(),
        });
    }
    Ok((compensated_sum(window.iter().copied()) / window.len() as f64).exp())
}

/// Scaling function with `g_values = q_avg` and the fitted large-`s` slope.
pub fn g_curve_from(qf: &QField) -> Result<GCurve> {
    let alpha = fit_alpha(&qf.s_mesh, &qf.q_avg)?;
    GCurve::new(qf.gamma, qf.s_mesh.clone(), qf.q_avg.clone(), alpha)
}

/// Nodes where the reconstructed `g` decreases with `s`.
pub fn monotonicity_violations(curve: &GCurve) -> Vec<usize> {
    curve
        .g_values()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0])
        .map(|(j, _)| j + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::step_pdf;

    #[test]
    fn single_flight_gives_unit_q() {
        let p = KernelParams::new(1.0).unwrap();
        assert_eq!(q_w(p, 2.0, 1.0, 1.0 / 18.0).unwrap(), 1.0);
        for &(gamma, t, rho) in &[(0.5, 30.0, 4.0), (1.3, 1e5, 0.2), (1.9, 7.0, 1e3)] {
            let p = KernelParams::new(gamma).unwrap();
            let f = t * step_pdf(p, rho).unwrap();
            assert!((q_w(p, rho, t, f).unwrap() - 1.0).abs() < 1e-13);
        }
        assert!(q_w(p, 0.0, 1.0, 1.0).is_err());
        assert!(q_w(p, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn compensated_sum_is_exact_on_cancelling_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v.into_iter()), 2.0);
    }

    #[test]
    fn weightings() {
        let t = [1.0, 2.0, 4.0];
        let q = [3.0, 6.0, 12.0];
        assert_eq!(time_average(&q, &t, TimeWeighting::Logarithmic), 7.0);
        assert_eq!(time_average(&q, &t, TimeWeighting::Linear), (4.5 + 18.0) / 3.0);
        assert_eq!(time_average(&[5.0], &[1.0], TimeWeighting::Linear), 5.0);
    }

    #[test]
    fn fit_window_size() {
        let mesh = crate::meshes::log_mesh(0.01, 1000.0, 10).unwrap();
        let g: Vec<f64> = mesh.values().to_vec();
        assert!(matches!(fit_alpha(&mesh, &g), Err(Error::FitWindow { found: 6, .. })));
        let mesh = crate::meshes::log_mesh(0.01, 1000.0, 25).unwrap();
        let g: Vec<f64> = mesh.values().iter().map(|s| 3.0 * s).collect();
        assert!((fit_alpha(&mesh, &g).unwrap() - 3.0).abs() < 1e-14);
    }
}
