//! The exact Green's function of the transport equation.
//!
//! `f(x, t) = e^(-t) delta(x) + f_reg(|x|, t)` with
//!
//! ```text
//! f_reg(rho, t) = (1/pi) integral_0^inf cos(p rho) (e^(-t G(p)) - e^(-t)) dp
//! ```
//!
//! The subtracted integrand tends to zero as `e^(-t) t (1 - G) ~ p^-2`, so the
//! outer integral converges absolutely. It is evaluated as
//! `e^(-t G) * (1 - e^(-t (1 - G)))` to keep full relative accuracy when both
//! terms are close.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use statrs::function::gamma::gamma as gamma_fn;

use crate::automodel::front_unchecked;
use crate::error::{require_positive, Error, Result};
use crate::kernel::{
    levy_constant, step_pdf_unchecked, DirectExponent, Exponent, GTable, KernelParams,
};
use crate::meshes::{log_mesh, LogMesh};
use crate::numfmt::{fmt17, header_fields, parse_log_mesh};
use crate::quadrature::{
    integrate_adaptive, integrate_semi_infinite, integrate_semi_infinite_oscillatory, Oscillator,
    QuadError, QuadratureConfig,
};

/// The integrand is dropped beyond the `p` where `t G(p)` exceeds this,
/// i.e. where it has fallen below `~1e-20` of its value at the origin.
const CUTOFF_EXPONENT: f64 = 46.0;

/// Bracket, in `ln p`, for locating scales of the integrand.
const LN_P_RANGE: (f64, f64) = (-690.0, 9.2);

/// `f_reg(|x|, t)` with `G` computed by quadrature at every node.
pub fn green_regular(params: KernelParams, x: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let source = DirectExponent {
        params,
        cfg: QuadratureConfig::inner(),
    };
    green_regular_with(&source, x, t, cfg)
}

/// `f_reg(|x|, t)` for any source of `G`.
pub fn green_regular_with<E: Exponent + ?Sized>(
    source: &E,
    x: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Inversion::new(source, t, cfg)?.at(x)
}

/// Fourier inversion at one fixed time, reused across positions.
pub struct Inversion<'a, E: Exponent + ?Sized> {
    source: &'a E,
    t: f64,
    cfg: QuadratureConfig,
    /// Width of the first integration cell on the axis.
    scale: f64,
    /// Point beyond which the integrand is negligible, when it exists.
    cutoff: Option<f64>,
    failure: RefCell<Option<Error>>,
}

impl<'a, E: Exponent + ?Sized> Inversion<'a, E> {
    pub fn new(source: &'a E, t: f64, cfg: &QuadratureConfig) -> Result<Self> {
        require_positive("time t", t)?;
        cfg.validate()?;
        let mut inv = Self {
            source,
            t,
            cfg: *cfg,
            scale: 1.0,
            cutoff: None,
            failure: RefCell::new(None),
        };
        if t > 1.0 {
            inv.scale = inv.solve_exponent(1.0)?.unwrap_or(1.0).min(1.0);
        }
        if t > CUTOFF_EXPONENT {
            inv.cutoff = inv.solve_exponent(CUTOFF_EXPONENT)?;
        }
        Ok(inv)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Smallest `p` (to bisection accuracy) with `t G(p) >= level`.
    fn solve_exponent(&self, level: f64) -> Result<Option<f64>> {
        let reaches = |ln_p: f64| -> Result<bool> {
            Ok(self.t * self.source.eval(ln_p.exp())?.g >= level)
        };
        let (mut lo, mut hi) = LN_P_RANGE;
        if !reaches(hi)? {
            return Ok(None);
        }
        if reaches(lo)? {
            return Ok(Some(lo.exp()));
        }
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if reaches(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi.exp()))
    }

    /// `e^(-t G(p)) - e^(-t)`; NaN after recording a failure of the source.
    fn envelope(&self, p: f64) -> f64 {
        match self.source.eval(p) {
            Ok(v) => (-self.t * v.g).exp() * -(-self.t * v.complement).exp_m1(),
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    /// `f_reg(|x|, t)`.
    pub fn at(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain {
                what: "position x",
                constraint: "finite",
                value: x,
            });
        }
        let rho = x.abs();
        let envelope = |p: f64| self.envelope(p);
        let result = match self.cutoff {
            Some(cutoff) if rho * cutoff < 2.0 * PI => {
                integrate_adaptive(|p| envelope(p) * (p * rho).cos(), 0.0, cutoff, &self.cfg)
            }
            _ if rho == 0.0 => integrate_semi_infinite(envelope, self.scale, &self.cfg),
            _ => integrate_semi_infinite_oscillatory(envelope, Oscillator::cosine(rho), &self.cfg),
        };
        if let Some(e) = self.failure.borrow_mut().take() {
            return Err(match e {
                Error::Quadrature(source) => self.context(x, source),
                other => other,
            });
        }
        result.map(|e| e.value / PI).map_err(|q| self.context(x, q))
    }

    fn context(&self, x: f64, source: QuadError) -> Error {
        Error::GreenFunction {
            x,
            t: self.t,
            gamma: self.source.gamma(),
            source,
        }
    }
}

/// Weight `e^(-t)` of the unscattered delta component.
pub fn delta_weight(t: f64) -> f64 {
    (-t).exp()
}

/// Multiple-scattering series `e^(-t) sum_{n=1..orders} t^n/n! W^(*n)(|x|)`.
pub fn neumann_reference(params: KernelParams, x: f64, t: f64, orders: u32) -> Result<f64> {
    require_positive("time t", t)?;
    if t > 0.5 {
        return Err(Error::Domain {
            what: "series time t",
            constraint: "at most 0.5",
            value: t,
        });
    }
    if !(1..=3).contains(&orders) {
        return Err(Error::Config(format!(
            "series order must be 1, 2 or 3, got {orders}"
        )));
    }
    let mut sum = 0.0;
    let mut coefficient = 1.0;
    for n in 1..=orders {
        coefficient *= t / f64::from(n);
        sum += coefficient * step_convolution_power(params, x, n)?;
    }
    Ok(delta_weight(t) * sum)
}

/// `W^(*n)(|x|)` for `n` in 1..=3 by direct quadrature in `x`-space.
pub fn step_convolution_power(params: KernelParams, x: f64, n: u32) -> Result<f64> {
    let gamma = params.gamma();
    let rho = x.abs();
    let cfg = QuadratureConfig::inner();
    let w = |r: f64| step_pdf_unchecked(gamma, r.abs());
    match n {
        1 => Ok(w(rho)),
        2 => Ok(self_convolution(&w, &w, rho, &cfg)?),
        3 => {
            let w2 = |r: f64| self_convolution(&w, &w, r.abs(), &cfg).unwrap_or(f64::NAN);
            Ok(self_convolution(&w, &w2, rho, &cfg)?)
        }
        _ => Err(Error::Config(format!(
            "convolution power must be 1, 2 or 3, got {n}"
        ))),
    }
}

/// `(a * b)(rho)` for even `a`, `b` and `rho >= 0`:
/// `integral_0^rho a(u) b(rho - u) du + integral_0^inf [a(v) b(rho + v) + a(rho + v) b(v)] dv`.
fn self_convolution<A, B>(a: &A, b: &B, rho: f64, cfg: &QuadratureConfig) -> Result<f64, QuadError>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let inner = if rho > 0.0 {
        integrate_adaptive(|u| a(u) * b(rho - u), 0.0, rho, cfg)?.value
    } else {
        0.0
    };
    let outer = integrate_semi_infinite(|v| a(v) * b(rho + v) + a(rho + v) * b(v), 1.0, cfg)?;
    Ok(inner + outer.value)
}

/// `2 integral_0^inf f_reg(rho, t) drho + e^(-t)`, which equals one.
///
/// The integral is taken numerically up to `R = 10^3 max(rho_fr, 1)`; beyond
/// it the stable-law expansion `sum_k c_k rho^(-1 - k gamma)` is integrated
/// in closed form, with the first term replaced by the exact `t W` tail.
pub fn excitation_balance<E: Exponent + ?Sized>(
    source: &E,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let gamma = source.gamma();
    let params = KernelParams::new(gamma)?;
    let inversion = Inversion::new(source, t, cfg)?;
    let base = front_unchecked(gamma, t).max(1.0);
    let failure = RefCell::new(None);
    let f = |rho: f64| match inversion.at(rho) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let mut body = 0.0;
    let mut lo = 0.0;
    for k in -2..=3 {
        let hi = base * 10f64.powi(k);
        let piece = integrate_adaptive(f, lo, hi, cfg);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        body += piece?.value;
        lo = hi;
    }
    let r = lo;
    let levy = levy_constant(params, &QuadratureConfig::inner())?;
    let mut tail = 0.5 * t * (1.0 + r).powf(-gamma);
    let mut factorial = 1.0;
    for k in 2..=6 {
        let kf = f64::from(k);
        factorial *= kf;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let c = sign * (t * levy).powi(k) / factorial * gamma_fn(1.0 + kf * gamma)
            * (kf * PI * gamma / 2.0).sin()
            / PI;
        tail += c * r.powf(-kf * gamma) / (kf * gamma);
    }
    Ok(2.0 * (body + tail) + delta_weight(t))
}

/// Regular part of the Green's function on a `(t, s)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactField {
    gamma: f64,
    t_mesh: LogMesh,
    s_mesh: LogMesh,
    /// Row-major: `values[i * s_len + j]` at `(t_i, s_j)`.
    values: Vec<f64>,
}

impl ExactField {
    pub fn from_parts(gamma: f64, t_mesh: LogMesh, s_mesh: LogMesh, values: Vec<f64>) -> Result<Self> {
        KernelParams::new(gamma)?;
        if values.len() != t_mesh.len() * s_mesh.len() {
            return Err(Error::Config(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                t_mesh.len(),
                s_mesh.len()
            )));
        }
        let s_len = s_mesh.len();
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonPositiveDensity {
                t: t_mesh.values()[k / s_len],
                s: s_mesh.values()[k % s_len],
                value: values[k],
            });
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

    /// Distance `rho(t_i, s_j) = rho_fr(t_i) / s_j` of a node.
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        node_rho(self.gamma, self.t_mesh.values()[i], self.s_mesh.values()[j])
    }

    pub fn delta_weight(&self, i: usize) -> f64 {
        delta_weight(self.t_mesh.values()[i])
    }

    /// Rows `t,s,rho,f_reg` under a `# gamma=.. t_mesh=.. s_mesh=..` header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# gamma={} t_mesh={} s_mesh={}\nt,s,rho,f_reg\n",
            fmt17(self.gamma),
            self.t_mesh,
            self.s_mesh
        );
        for (i, t) in self.t_mesh.values().iter().enumerate() {
            for (j, s) in self.s_mesh.values().iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt17(*t),
                    fmt17(*s),
                    fmt17(self.rho(i, j)),
                    fmt17(self.get(i, j))
                );
            }
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            kind: "exact field",
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| bad("missing header".into()))?;
        let fields = header_fields(header);
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("header lacks {key}")))
        };
        let gamma: f64 = get("gamma")?.parse().map_err(|e| bad(format!("gamma: {e}")))?;
        let mesh = |key: &str| -> Result<LogMesh> {
            let spec = parse_log_mesh(get(key)?).ok_or_else(|| bad(format!("unreadable {key}")))?;
            Ok(log_mesh(spec.lo, spec.hi, spec.points_per_decade)?)
        };
        let (t_mesh, s_mesh) = (mesh("t_mesh")?, mesh("s_mesh")?);
        if lines.next() != Some("t,s,rho,f_reg") {
            return Err(bad("missing column line".into()));
        }
        let values = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .nth(3)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad row {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(gamma, t_mesh, s_mesh, values)
    }
}

#[inline]
pub(crate) fn node_rho(gamma: f64, t: f64, s: f64) -> f64 {
    front_unchecked(gamma, t) / s
}

/// Field on the given meshes using a tabulated exponent sized for them.
pub fn exact_field(
    params: KernelParams,
    t_mesh: &LogMesh,
    s_mesh: &LogMesh,
    cfg: &QuadratureConfig,
) -> Result<ExactField> {
    let table = GTable::for_times(params, t_mesh.hi(), &QuadratureConfig::inner())?;
    exact_field_with(&table, t_mesh, s_mesh, cfg)
}

/// Field from any exponent source; rows are computed in parallel.
pub fn exact_field_with<E: Exponent + ?Sized>(
    source: &E,
    t_mesh: &LogMesh,
    s_mesh: &LogMesh,
    cfg: &QuadratureConfig,
) -> Result<ExactField> {
    exact_field_cancellable(source, t_mesh, s_mesh, cfg, &|| false)
}

/// As [`exact_field_with`], giving up between nodes once `cancelled` is true.
pub(crate) fn exact_field_cancellable<E: Exponent + ?Sized>(
    source: &E,
    t_mesh: &LogMesh,
    s_mesh: &LogMesh,
    cfg: &QuadratureConfig,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> Result<ExactField> {
    if t_mesh.lo() < 1.0 {
        return Err(Error::Domain {
            what: "lowest field time",
            constraint: "at least 1",
            value: t_mesh.lo(),
        });
    }
    cfg.validate()?;
    let gamma = source.gamma();
    let rows: Vec<Result<Vec<f64>>> = t_mesh
        .values()
        .par_iter()
        .map(|&t| {
            let node = |s: f64, e: Error| Error::FieldNode {
                t,
                s,
                source: Box::new(e),
            };
            let inversion = Inversion::new(source, t, cfg)
                .map_err(|e| node(s_mesh.values()[0], e))?;
            s_mesh
                .values()
                .iter()
                .map(|&s| {
                    if cancelled() {
                        return Err(Error::Cancelled);
                    }
                    let value = inversion
                        .at(node_rho(gamma, t, s))
                        .map_err(|e| node(s, e))?;
                    if !(value.is_finite() && value > 0.0) {
                        return Err(Error::NonPositiveDensity { t, s, value });
                    }
                    Ok(value)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(t_mesh.len() * s_mesh.len());
    for row in rows {
        values.extend(row?);
    }
    ExactField::from_parts(gamma, t_mesh.clone(), s_mesh.clone(), values)
}
