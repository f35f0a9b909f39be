//! Integration engine for slowly decaying oscillatory integrands on
//! `[0, inf)`.
//!
//! The half line is cut at consecutive zeros of the oscillating factor. Each
//! cell is integrated by adaptive Gauss-Kronrod bisection, and the sequence
//! of partial sums over cells is extrapolated with Wynn's epsilon algorithm.
//! For a monotonically decaying envelope the cell contributions alternate in
//! sign, which is the regime where the epsilon algorithm is most effective.

mod epsilon;
mod gauss_kronrod;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use epsilon::{wynn_limit, EpsilonTable};
pub use gauss_kronrod::integrate_adaptive;

/// Number of partial sums kept in the epsilon table.
const EPSILON_WINDOW: usize = 30;

/// Cells integrated before any convergence test is trusted.
const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(
        "panel refinement exhausted on [{a}, {b}]: best estimate {estimate:e}, error bound {error:e}"
    )]
    PanelDepthExhausted {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },
    #[error(
        "extrapolation did not converge within {cells} cells; last partial sums {last_partial_sums:?}"
    )]
    MaxCells {
        cells: usize,
        last_partial_sums: [f64; 3],
        estimate: f64,
    },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
}

/// Tolerances and work limits for one integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cells: usize,
    pub max_panel_depth: u32,
}

impl QuadratureConfig {
    /// Settings for the exponent integral inside the Fourier kernel.
    pub fn inner() -> Self {
        Self {
            rel_tol: 1e-10,
            ..Self::default()
        }
    }

    /// Settings for the Fourier inversion over `p`.
    pub fn outer() -> Self {
        Self {
            rel_tol: 1e-8,
            ..Self::default()
        }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.rel_tol) {
            return Err(QuadError::InvalidConfig(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if !unit(self.abs_tol) {
            return Err(QuadError::InvalidConfig(format!(
                "abs_tol must lie in (0, 1), got {}",
                self.abs_tol
            )));
        }
        if self.max_cells < 8 {
            return Err(QuadError::InvalidConfig(format!(
                "max_cells must be at least 8, got {}",
                self.max_cells
            )));
        }
        if self.max_panel_depth == 0 {
            return Err(QuadError::InvalidConfig(
                "max_panel_depth must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-250,
            max_cells: 4000,
            max_panel_depth: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wave {
    Sine,
    Cosine,
}

/// The oscillating factor `sin(freq * x)` or `cos(freq * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    pub wave: Wave,
    pub frequency: f64,
}

impl Oscillator {
    pub fn sine(frequency: f64) -> Self {
        Self {
            wave: Wave::Sine,
            frequency,
        }
    }

    pub fn cosine(frequency: f64) -> Self {
        Self {
            wave: Wave::Cosine,
            frequency,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.wave {
            Wave::Sine => (self.frequency * x).sin(),
            Wave::Cosine => (self.frequency * x).cos(),
        }
    }

    /// Bounds of cell `k`: the stretch between consecutive zeros of the
    /// oscillator (the first cosine cell starts at the origin).
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let h = PI / self.frequency;
        match self.wave {
            Wave::Sine => (k as f64 * h, (k + 1) as f64 * h),
            Wave::Cosine if k == 0 => (0.0, FRAC_PI_2 / self.frequency),
            Wave::Cosine => ((k as f64 - 0.5) * h, (k as f64 + 0.5) * h),
        }
    }

    fn check(&self) -> Result<(), QuadError> {
        if self.frequency.is_finite() && self.frequency > 0.0 {
            Ok(())
        } else {
            Err(QuadError::InvalidConfig(format!(
                "oscillator frequency must be positive, got {}",
                self.frequency
            )))
        }
    }
}

/// Value, error bound and cost of an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub cells: usize,
}

/// `integral_a^b envelope(x) * osc(x) dx` by adaptive Gauss-Kronrod.
pub fn integrate_cell<F: Fn(f64) -> f64>(
    envelope: F,
    oscillator: Oscillator,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate, QuadError> {
    cfg.validate()?;
    oscillator.check()?;
    integrate_adaptive(|x| envelope(x) * oscillator.eval(x), a, b, cfg)
}

/// Integrals of the first `n` oscillator cells.
pub fn cell_contributions<F: Fn(f64) -> f64>(
    envelope: F,
    oscillator: Oscillator,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>, QuadError> {
    cfg.validate()?;
    oscillator.check()?;
    (0..n)
        .map(|k| {
            let (a, b) = oscillator.cell(k);
            integrate_adaptive(|x| envelope(x) * oscillator.eval(x), a, b, cfg).map(|e| e.value)
        })
        .collect()
}

/// `integral_0^inf envelope(x) * osc(x) dx` for an envelope that eventually
/// decays monotonically to zero.
///
/// Converges when either the latest cell is below tolerance (the alternating
/// remainder is then bounded by it) or the extrapolated limit has settled.
pub fn integrate_semi_infinite_oscillatory<F: Fn(f64) -> f64>(
    envelope: F,
    oscillator: Oscillator,
    cfg: &QuadratureConfig,
) -> Result<Estimate, QuadError> {
    cfg.validate()?;
    oscillator.check()?;
    let integrand = |x: f64| envelope(x) * oscillator.eval(x);
    sum_cells(|k| oscillator.cell(k), integrand, cfg)
}

/// `integral_0^inf f(x) dx` for a non-oscillating, eventually monotone `f`.
///
/// Cells double in width after the first one (`[0, w], [w, 2w], [2w, 4w], ..`),
/// so algebraic tails produce a near-geometric sequence of partial sums.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    first_width: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate, QuadError> {
    cfg.validate()?;
    if !(first_width.is_finite() && first_width > 0.0) {
        return Err(QuadError::InvalidConfig(format!(
            "first cell width must be positive, got {first_width}"
        )));
    }
    let bounds = |k: usize| {
        if k == 0 {
            (0.0, first_width)
        } else {
            let lo = first_width * 2f64.powi(k as i32 - 1);
            (lo, 2.0 * lo)
        }
    };
    sum_cells(bounds, f, cfg)
}

fn sum_cells<B, F>(bounds: B, integrand: F, cfg: &QuadratureConfig) -> Result<Estimate, QuadError>
where
    B: Fn(usize) -> (f64, f64),
    F: Fn(f64) -> f64,
{
    let mut table = EpsilonTable::new(EPSILON_WINDOW);
    let mut partial = 0.0;
    let mut cell_error = 0.0;
    let mut evaluations = 0;
    let mut previous_cell = f64::INFINITY;
    let mut estimate = 0.0;

    for k in 0..cfg.max_cells {
        let (a, b) = bounds(k);
        let cell = integrate_adaptive(&integrand, a, b, cfg)?;
        evaluations += cell.evaluations;
        cell_error += cell.error;
        partial += cell.value;
        let (extrapolated, extrapolation_error) = table.push(partial);
        estimate = extrapolated;
        if k + 1 < MIN_CELLS {
            previous_cell = cell.value.abs();
            continue;
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * partial.abs());
        let done = |value: f64, error: f64| Estimate {
            value,
            error: error + cell_error,
            evaluations,
            cells: k + 1,
        };
        if cell.value.abs() <= tol && previous_cell <= tol {
            return Ok(done(partial, cell.value.abs()));
        }
        if extrapolation_error <= cfg.abs_tol.max(cfg.rel_tol * extrapolated.abs()) {
            return Ok(done(extrapolated, extrapolation_error));
        }
        previous_cell = cell.value.abs();
    }
    Err(QuadError::MaxCells {
        cells: cfg.max_cells,
        last_partial_sums: table.last_partial_sums(),
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn sine_over_half_period() {
        let r = integrate_cell(|_| 1.0, Oscillator::sine(1.0), 0.0, PI, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cosine_over_full_period() {
        let r = integrate_cell(|_| 1.0, Oscillator::cosine(1.0), 0.0, 2.0 * PI, &cfg()).unwrap();
        assert!(r.value.abs() < 1e-13);
    }

    #[test]
    fn laplace_transform_of_sine() {
        let r =
            integrate_semi_infinite_oscillatory(|x: f64| (-x).exp(), Oscillator::sine(1.0), &cfg())
                .unwrap();
        assert!((r.value - 0.5).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn cosine_cells_start_at_origin() {
        let osc = Oscillator::cosine(2.0);
        assert_eq!(osc.cell(0), (0.0, FRAC_PI_2 / 2.0));
        let (a, b) = osc.cell(3);
        assert!((osc.eval(a)).abs() < 1e-15 && (osc.eval(b)).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_integral() {
        // Kronrod nodes are interior, so 1/x is never evaluated at 0.
        let r = integrate_semi_infinite_oscillatory(|x: f64| 1.0 / x, Oscillator::sine(1.0), &cfg())
            .unwrap();
        assert!((r.value - FRAC_PI_2).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn algebraic_tail_without_oscillation() {
        // integral_0^inf (1+x)^-2 dx = 1
        let r = integrate_semi_infinite(|x: f64| (1.0 + x).powi(-2), 1.0, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn max_cells_error_carries_diagnostics() {
        let tight = QuadratureConfig {
            rel_tol: 1e-15,
            max_cells: 8,
            ..cfg()
        };
        let err = integrate_semi_infinite_oscillatory(
            |x: f64| (1.0 + x).powf(-0.1) * (1.0 + 0.3 * (0.7 * x).sin()),
            Oscillator::sine(1.0),
            &tight,
        )
        .unwrap_err();
        match err {
            QuadError::MaxCells {
                cells,
                last_partial_sums,
                ..
            } => {
                assert_eq!(cells, 8);
                assert!(last_partial_sums.iter().all(|v| v.is_finite()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = QuadratureConfig {
            rel_tol: 2.0,
            ..cfg()
        };
        assert!(matches!(
            integrate_semi_infinite_oscillatory(|_| 1.0, Oscillator::sine(1.0), &bad),
            Err(QuadError::InvalidConfig(_))
        ));
        assert!(matches!(
            integrate_semi_infinite_oscillatory(|_| 1.0, Oscillator::sine(0.0), &cfg()),
            Err(QuadError::InvalidConfig(_))
        ));
    }
}
