//! Accuracy of the automodel solution against the exact one.

use std::fmt;
use std::fmt::Write as _;

use crate::automodel::{density_from_spread, GCurve};
use crate::error::{Error, Result};
use crate::exact::ExactField;
use crate::meshes::LogMesh;
use crate::numfmt::fmt17;

/// Half-width of the acceptance band around a ratio of one.
pub const BAND: f64 = 0.1;

/// `f_auto / f_exact` over the `(t, s)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioField {
    gamma: f64,
    t_mesh: LogMesh,
    s_mesh: LogMesh,
    values: Vec<f64>,
}

impl RatioField {
    pub fn from_parts(gamma: f64, t_mesh: LogMesh, s_mesh: LogMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != t_mesh.len() * s_mesh.len() {
            return Err(Error::Config(format!(
                "ratio field has {} values for a {}x{} grid",
                values.len(),
                t_mesh.len(),
                s_mesh.len()
            )));
        }
        Ok(Self {
            gamma,
            t_mesh,
            s_mesh,
            values,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_mesh(&self) -> &LogMesh {
        &self.t_mesh
    }

    pub fn s_mesh(&self) -> &LogMesh {
        &self.s_mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.s_mesh.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.s_mesh.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// `max_s |ratio - 1|` for row `i`.
    pub fn row_error(&self, i: usize) -> f64 {
        self.row(i).iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Entrywise `f_auto / f_reg` on the field's nodes.
pub fn ratio_field(field: &ExactField, curve: &GCurve) -> Result<RatioField> {
    let gamma = field.gamma();
    if gamma != curve.gamma() {
        return Err(Error::GammaMismatch(gamma, curve.gamma()));
    }
    let (t_mesh, s_mesh) = (field.t_mesh(), field.s_mesh());
    let shared_mesh = curve.s_mesh() == s_mesh;
    let cols = s_mesh.len();
    let mut values = Vec::with_capacity(field.values().len());
    for (i, &t) in t_mesh.values().iter().enumerate() {
        for (j, &s) in s_mesh.values().iter().enumerate() {
            let exact = field.values()[i * cols + j];
            if !(exact > 0.0) {
                return Err(Error::NonPositiveDensity { t, s, value: exact });
            }
            let g = if shared_mesh {
                curve.g_values()[j]
            } else {
                curve.g(s)
            };
            let auto = density_from_spread(gamma, t, field.rho(i, j) * g);
            values.push(auto / exact);
        }
    }
    RatioField::from_parts(gamma, t_mesh.clone(), s_mesh.clone(), values)
}

/// Index of the earliest mesh time from which every later row stays inside
/// `1 +- band`, or `None` when the last row already leaves it.
pub fn t10_boundary(ratio: &RatioField, band: f64) -> Option<usize> {
    let mut first = None;
    for i in (0..ratio.t_mesh.len()).rev() {
        if ratio.row_error(i) > band {
            break;
        }
        first = Some(i);
    }
    first
}

/// Node of largest `|ratio - 1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Locus {
    pub t_index: usize,
    pub s_index: usize,
    pub t: f64,
    pub s: f64,
    pub error: f64,
}

/// Argmax of `|ratio - 1|` over rows `first_row..`; ties go to the smallest
/// `t`, then the smallest `s`.
pub fn error_locus(ratio: &RatioField, first_row: usize) -> Option<Locus> {
    let cols = ratio.s_mesh.len();
    let mut best: Option<Locus> = None;
    for i in first_row..ratio.t_mesh.len() {
        for j in 0..cols {
            let error = (ratio.get(i, j) - 1.0).abs();
            if best.is_none_or(|b| error > b.error) {
                best = Some(Locus {
                    t_index: i,
                    s_index: j,
                    t: ratio.t_mesh.values()[i],
                    s: ratio.s_mesh.values()[j],
                    error,
                });
            }
        }
    }
    best
}

/// Boundary time, or the flag that the band is never entered for good.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Reached { index: usize, t: f64 },
    NotReached,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Reached { t, .. } => f.write_str(&fmt17(*t)),
            Boundary::NotReached => f.write_str("not_reached"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub gamma: f64,
    pub ratio: RatioField,
    pub t10: Boundary,
    /// Over rows from the boundary on, or over all rows when it is not reached.
    pub locus: Locus,
}

impl AccuracyReport {
    /// `max |ratio - 1|` over rows from the boundary on.
    pub fn max_error_after_t10(&self) -> Option<f64> {
        match self.t10 {
            Boundary::Reached { .. } => Some(self.locus.error),
            Boundary::NotReached => None,
        }
    }

    /// One `gamma,t10,t_star,s_star,max_error_after_t10` line.
    pub fn boundary_row(&self) -> String {
        let max_error = self
            .max_error_after_t10()
            .map_or_else(|| "not_reached".to_string(), fmt17);
        format!(
            "{},{},{},{},{}",
            fmt17(self.gamma),
            self.t10,
            fmt17(self.locus.t),
            fmt17(self.locus.s),
            max_error
        )
    }
}

pub const BOUNDARY_COLUMNS: &str = "gamma,t10,t_star,s_star,max_error_after_t10";

pub fn accuracy_report(field: &ExactField, curve: &GCurve) -> Result<AccuracyReport> {
    let ratio = ratio_field(field, curve)?;
    Ok(report_from_ratio(ratio))
}

pub fn report_from_ratio(ratio: RatioField) -> AccuracyReport {
    let t10 = match t10_boundary(&ratio, BAND) {
        Some(index) => Boundary::Reached {
            index,
            t: ratio.t_mesh.values()[index],
        },
        None => Boundary::NotReached,
    };
    let first_row = match t10 {
        Boundary::Reached { index, .. } => index,
        Boundary::NotReached => 0,
    };
    let locus = error_locus(&ratio, first_row).expect("meshes are never empty");
    AccuracyReport {
        gamma: ratio.gamma,
        ratio,
        t10,
        locus,
    }
}

/// Boundary table sorted by `gamma`.
pub fn boundary_table(reports: &[&AccuracyReport]) -> String {
    let mut rows: Vec<&&AccuracyReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let mut out = format!("{BOUNDARY_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.boundary_row());
    }
    out
}
