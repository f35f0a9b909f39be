//! Logarithmic and linear grids over time, similarity variable and exponent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Relative slack used when deciding whether a ratio or quotient sits on an
/// integer boundary.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Descriptor of a decade-uniform mesh, as written in sweep files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogMeshSpec {
    pub lo: f64,
    pub hi: f64,
    pub points_per_decade: u32,
}

impl LogMeshSpec {
    pub fn build(&self) -> Result<LogMesh, MeshError> {
        log_mesh(self.lo, self.hi, self.points_per_decade)
    }
}

/// Points `lo * 10^(i / points_per_decade)` for `i = 0..count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMesh {
    lo: f64,
    hi: f64,
    points_per_decade: u32,
    values: Vec<f64>,
}

impl LogMesh {
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn points_per_decade(&self) -> u32 {
        self.points_per_decade
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec(&self) -> LogMeshSpec {
        LogMeshSpec {
            lo: self.lo,
            hi: self.hi,
            points_per_decade: self.points_per_decade,
        }
    }

    /// Index of the mesh node closest to `value` in log space.
    pub fn nearest_index(&self, value: f64) -> usize {
        let pos = (value / self.lo).log10() * f64::from(self.points_per_decade);
        (pos.round().max(0.0) as usize).min(self.values.len() - 1)
    }
}

impl fmt::Display for LogMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "log({},{},{})",
            self.lo, self.hi, self.points_per_decade
        )
    }
}

/// Descriptor of an evenly spaced mesh, as written in sweep files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMeshSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl LinearMeshSpec {
    pub fn build(&self) -> Result<LinearMesh, MeshError> {
        linear_mesh(self.lo, self.hi, self.step)
    }
}

/// Evenly spaced points with both endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMesh {
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
}

impl LinearMesh {
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl fmt::Display for LinearMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lin({},{},{})", self.lo, self.hi, self.step)
    }
}

/// Builds a decade-uniform mesh starting exactly at `lo`.
///
/// Nodes are generated from integer indices as `lo * 10^(i/ppd)`, so the
/// spacing in `log10` is exactly `1/ppd` and no drift accumulates. The count
/// is `floor(ppd * log10(hi/lo)) + 1`; the last node therefore lies within
/// one step below `hi` (and equals `hi` when the range is a whole number of
/// steps).
pub fn log_mesh(lo: f64, hi: f64, points_per_decade: u32) -> Result<LogMesh, MeshError> {
    if !(lo.is_finite() && lo > 0.0) {
        return Err(MeshError::NonPositiveLower(lo));
    }
    if !(hi.is_finite() && hi > lo) {
        return Err(MeshError::EmptyRange { lo, hi });
    }
    if points_per_decade == 0 {
        return Err(MeshError::ZeroDensity);
    }
    let ppd = f64::from(points_per_decade);
    let steps = ppd * (hi / lo).log10();
    let count = (steps + BOUNDARY_SLACK).floor() as usize + 1;
    let values = (0..count)
        .map(|i| lo * 10f64.powf(i as f64 / ppd))
        .collect();
    Ok(LogMesh {
        lo,
        hi,
        points_per_decade,
        values,
    })
}

/// Builds `lo, lo + step, ..., hi`; `step` must divide the range. A
/// degenerate range `lo == hi` gives the single node `lo`.
pub fn linear_mesh(lo: f64, hi: f64, step: f64) -> Result<LinearMesh, MeshError> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(MeshError::EmptyRange { lo, hi });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(MeshError::NonPositiveStep(step));
    }
    if hi == lo {
        return Ok(LinearMesh {
            lo,
            hi,
            step,
            values: vec![lo],
        });
    }
    let quotient = (hi - lo) / step;
    let intervals = quotient.round();
    if intervals < 1.0 || (quotient - intervals).abs() > BOUNDARY_SLACK * intervals.max(1.0) {
        return Err(MeshError::NonDividingStep { lo, hi, step });
    }
    let n = intervals as usize;
    let values = (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (n as f64)
            }
        })
        .collect();
    Ok(LinearMesh {
        lo,
        hi,
        step,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_mesh_has_653_points() {
        let m = log_mesh(30.0, 1e8, 100).unwrap();
        assert_eq!(m.len(), 653);
        assert_eq!(m.values()[0], 30.0);
        assert!(*m.values().last().unwrap() <= 1e8);
    }

    #[test]
    fn similarity_mesh_has_501_points() {
        let m = log_mesh(0.01, 1000.0, 100).unwrap();
        assert_eq!(m.len(), 501);
        let last = *m.values().last().unwrap();
        assert!((last / 1000.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_decade() {
        let m = log_mesh(1.0, 10.0, 1).unwrap();
        assert_eq!(m.values(), &[1.0, 10.0]);
    }

    #[test]
    fn log_mesh_rejects_bad_input() {
        assert!(matches!(
            log_mesh(0.0, 1.0, 10),
            Err(MeshError::NonPositiveLower(_))
        ));
        assert!(matches!(
            log_mesh(2.0, 1.0, 10),
            Err(MeshError::EmptyRange { .. })
        ));
        assert!(matches!(log_mesh(1.0, 10.0, 0), Err(MeshError::ZeroDensity)));
    }

    #[test]
    fn decades_are_exact() {
        let m = log_mesh(30.0, 1e8, 100).unwrap();
        let v = m.values();
        for k in 0..=6 {
            let ratio = v[k * 100] / v[0];
            let expect = 10f64.powi(k as i32);
            assert!((ratio - expect).abs() <= 4.0 * f64::EPSILON * expect, "k={k}");
        }
    }

    #[test]
    fn gamma_mesh() {
        let m = linear_mesh(0.5, 1.5, 0.01).unwrap();
        assert_eq!(m.len(), 101);
        assert_eq!(m.values()[0], 0.5);
        assert_eq!(m.values()[100], 1.5);
        assert_eq!(linear_mesh(0.5, 1.5, 0.5).unwrap().values(), &[0.5, 1.0, 1.5]);
        assert_eq!(linear_mesh(1.0, 1.0, 0.1).unwrap().values(), &[1.0]);
        assert!(linear_mesh(1.0, 0.9, 0.1).is_err());
    }

    #[test]
    fn non_dividing_step_is_rejected() {
        assert!(matches!(
            linear_mesh(0.0, 1.0, 0.3),
            Err(MeshError::NonDividingStep { .. })
        ));
    }

    #[test]
    fn nearest_index_round_trips() {
        let m = log_mesh(30.0, 1e6, 100).unwrap();
        for (i, &v) in m.values().iter().enumerate() {
            assert_eq!(m.nearest_index(v), i);
        }
    }
}
