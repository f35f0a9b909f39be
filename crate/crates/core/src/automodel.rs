//! Self-similar approximation of the Green's function.
//!
//! `f_auto(rho, t) = t gamma / (2 (1 + rho g(s))^(gamma + 1))` with the
//! similarity variable `s = rho_fr(t) / rho` and the front
//! `rho_fr(t) = (t + 1)^(1/gamma) - 1`. The scaling function `g` tends to 1
//! far ahead of the front and grows linearly, `g ~ alpha s`, far behind it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{require_positive, Error, Result};
use crate::interp::MonotoneCubic;
use crate::kernel::{levy_constant, KernelParams};
use crate::meshes::{log_mesh, LogMesh};
use crate::numfmt::fmt17;
use crate::quadrature::QuadratureConfig;

/// `rho_fr(t) = (t + 1)^(1/gamma) - 1`.
pub fn front_position(params: KernelParams, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "time t",
            constraint: "non-negative and finite",
            value: t,
        });
    }
    Ok(front_unchecked(params.gamma(), t))
}

#[inline]
pub(crate) fn front_unchecked(gamma: f64, t: f64) -> f64 {
    (t.ln_1p() / gamma).exp_m1()
}

/// `s(rho, t) = rho_fr(t) / rho`.
pub fn similarity_from(params: KernelParams, rho: f64, t: f64) -> Result<f64> {
    require_positive("distance rho", rho)?;
    Ok(front_position(params, t)? / rho)
}

/// `rho(t, s) = rho_fr(t) / s`.
pub fn rho_from(params: KernelParams, t: f64, s: f64) -> Result<f64> {
    require_positive("similarity variable s", s)?;
    Ok(front_position(params, t)? / s)
}

/// `t(rho, s) = (1 + s rho)^gamma - 1`, the inverse of the front law.
pub fn time_from(params: KernelParams, rho: f64, s: f64) -> Result<f64> {
    require_positive("distance rho", rho)?;
    require_positive("similarity variable s", s)?;
    Ok(((s * rho).ln_1p() * params.gamma()).exp_m1())
}

/// Large-`s` slope `alpha(gamma) = 2^(1/gamma) [gamma pi / 2 I^(1/gamma)]^(1/(gamma+1))`
/// with `I = lim G(p)/p^gamma`.
pub fn alpha_coefficient(params: KernelParams, cfg: &QuadratureConfig) -> Result<f64> {
    let gamma = params.gamma();
    let levy = levy_constant(params, cfg)?;
    Ok(alpha_from_levy(gamma, levy))
}

pub(crate) fn alpha_from_levy(gamma: f64, levy: f64) -> f64 {
    2f64.powf(1.0 / gamma) * (gamma * PI / 2.0 * levy.powf(1.0 / gamma)).powf(1.0 / (gamma + 1.0))
}

/// Tabulated scaling function with its two asymptotic continuations.
#[derive(Debug, Clone)]
pub struct GCurve {
    gamma: f64,
    s_mesh: LogMesh,
    g_values: Vec<f64>,
    alpha: f64,
    interp: MonotoneCubic,
}

impl GCurve {
    pub fn new(gamma: f64, s_mesh: LogMesh, g_values: Vec<f64>, alpha: f64) -> Result<Self> {
        KernelParams::new(gamma)?;
        require_positive("slope alpha", alpha)?;
        if g_values.len() != s_mesh.len() || g_values.len() < 2 {
            return Err(Error::Config(format!(
                "scaling function has {} values for {} mesh nodes",
                g_values.len(),
                s_mesh.len()
            )));
        }
        if let Some((j, &g)) = g_values
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::Domain {
                what: if j == 0 { "g at first node" } else { "g at mesh node" },
                constraint: "positive and finite",
                value: g,
            });
        }
        let h = std::f64::consts::LN_10 / f64::from(s_mesh.points_per_decade());
        let interp = MonotoneCubic::new(
            s_mesh.lo().ln(),
            h,
            g_values.iter().map(|g| g.ln()).collect(),
        );
        Ok(Self {
            gamma,
            s_mesh,
            g_values,
            alpha,
            interp,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s_mesh(&self) -> &LogMesh {
        &self.s_mesh
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    /// `g(s)`: 1 below the mesh, `alpha s` above it, log-log monotone cubic
    /// in between.
    pub fn g(&self, s: f64) -> f64 {
        let values = self.s_mesh.values();
        if s < values[0] {
            1.0
        } else if s > values[values.len() - 1] {
            self.alpha * s
        } else {
            self.interp.eval(s.ln()).exp()
        }
    }

    /// Relative jumps of `g` where the two continuations take over.
    pub fn extension_mismatch(&self) -> (f64, f64) {
        let first = self.g_values[0];
        let last = self.g_values[self.g_values.len() - 1];
        let s_last = self.s_mesh.values()[self.g_values.len() - 1];
        ((first - 1.0).abs(), (last / (self.alpha * s_last) - 1.0).abs())
    }

    /// Text form: header `# gamma=.. alpha=.. s_mesh=log(lo,hi,ppd)` then `s,g`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# gamma={} alpha={} s_mesh={}\ns,g\n",
            fmt17(self.gamma),
            fmt17(self.alpha),
            self.s_mesh
        );
        for (s, g) in self.s_mesh.values().iter().zip(&self.g_values) {
            let _ = writeln!(out, "{},{}", fmt17(*s), fmt17(*g));
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            kind: "g-curve",
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| bad("missing header".into()))?;
        let fields = crate::numfmt::header_fields(header);
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("header lacks {key}")))
        };
        let gamma: f64 = get("gamma")?.parse().map_err(|e| bad(format!("gamma: {e}")))?;
        let alpha: f64 = get("alpha")?.parse().map_err(|e| bad(format!("alpha: {e}")))?;
        let mesh = crate::numfmt::parse_log_mesh(get("s_mesh")?)
            .ok_or_else(|| bad("unreadable s_mesh".into()))?;
        let mesh = log_mesh(mesh.lo, mesh.hi, mesh.points_per_decade)?;
        if lines.next() != Some("s,g") {
            return Err(bad("missing column line".into()));
        }
        let g_values = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .nth(1)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad row {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(gamma, mesh, g_values, alpha)
    }
}

/// `f_auto` at distance `|x|` and time `t`.
///
/// On the axis the linear continuation makes `rho g(rho_fr/rho) -> alpha rho_fr`,
/// which defines the plateau value there.
pub fn automodel_density(curve: &GCurve, x: f64, t: f64) -> Result<f64> {
    require_positive("time t", t)?;
    let gamma = curve.gamma;
    let front = front_unchecked(gamma, t);
    let rho = x.abs();
    let spread = if rho == 0.0 {
        curve.alpha * front
    } else {
        rho * curve.g(front / rho)
    };
    Ok(density_from_spread(gamma, t, spread))
}

/// `t gamma / 2 * (1 + spread)^-(gamma + 1)` where `spread = rho g(s)`.
#[inline]
pub(crate) fn density_from_spread(gamma: f64, t: f64, spread: f64) -> f64 {
    0.5 * t * gamma * (1.0 + spread).powf(-(gamma + 1.0))
}
