//! Step-length distribution and the Fourier-space exponent of the transport
//! kernel.
//!
//! With `W(rho) = gamma / (2 (1 + rho)^(gamma + 1))` the Fourier image of the
//! Green's function is `exp(-t G(p))`, where
//!
//! ```text
//! G(p) = p * integral_0^inf sin(p x) / (1 + x)^gamma dx = 1 - W~(p)
//! ```
//!
//! and `W~(p)` is the cosine transform of `W`. Small `p` is evaluated from
//! the sine form, which keeps relative accuracy as `G ~ I p^gamma -> 0`.
//! Large `p` is evaluated from the complement `W~(p)`, rewritten by two
//! integrations by parts so that only an `O(p^-2)` correction is left to
//! quadrature.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::numfmt::fmt17;
use crate::quadrature::{
    integrate_semi_infinite_oscillatory, wynn_limit, Oscillator, QuadratureConfig,
};

/// Switch between the sine form and the complement form of `G`.
const SPLIT_P: f64 = 1.0;

/// Upper end of tabulated `p`; beyond it the two-term large-`p` series of
/// the complement is used.
const TABLE_P_MAX: f64 = 1e4;

/// Default grid density of the tabulated exponent.
pub const DEFAULT_TABLE_DENSITY: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 && gamma < 2.0 {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidGamma(gamma))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Mean waiting time; time is measured in units of it.
    pub fn tau(&self) -> f64 {
        1.0
    }
}

/// `W(rho) = gamma / (2 (1 + rho)^(gamma + 1))`.
pub fn step_pdf(params: KernelParams, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain {
            what: "step length rho",
            constraint: "non-negative",
            value: rho,
        });
    }
    Ok(step_pdf_unchecked(params.gamma, rho))
}

#[inline]
pub(crate) fn step_pdf_unchecked(gamma: f64, rho: f64) -> f64 {
    0.5 * gamma * (1.0 + rho).powf(-gamma - 1.0)
}

/// `G(p)` together with its complement `1 - G(p)`, each carried with its own
/// relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentValue {
    pub g: f64,
    pub complement: f64,
}

/// `G(p) = p * integral_0^inf sin(p x) (1 + x)^-gamma dx`.
pub fn characteristic_exponent(params: KernelParams, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    exponent_pair(params, p, cfg).map(|v| v.g)
}

/// `G(p)` and `1 - G(p)` by direct quadrature.
pub fn exponent_pair(params: KernelParams, p: f64, cfg: &QuadratureConfig) -> Result<ExponentValue> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Domain {
            what: "wavenumber p",
            constraint: "non-negative and finite",
            value: p,
        });
    }
    let gamma = params.gamma;
    if p == 0.0 {
        return Ok(ExponentValue {
            g: 0.0,
            complement: 1.0,
        });
    }
    if p <= SPLIT_P {
        let sine = integrate_semi_infinite_oscillatory(
            |x: f64| (1.0 + x).powf(-gamma),
            Oscillator::sine(p),
            cfg,
        )?;
        let g = p * sine.value;
        Ok(ExponentValue {
            g,
            complement: 1.0 - g,
        })
    } else {
        let remainder = integrate_semi_infinite_oscillatory(
            |x: f64| (1.0 + x).powf(-gamma - 3.0),
            Oscillator::cosine(p),
            cfg,
        )?;
        let complement =
            gamma * (gamma + 1.0) / (p * p) * (1.0 - (gamma + 2.0) * remainder.value);
        Ok(ExponentValue {
            g: 1.0 - complement,
            complement,
        })
    }
}

/// `I(gamma) = lim_{p -> 0} G(p) / p^gamma`.
///
/// `G(p)/p^gamma` is sampled on `p = 10^-2, 10^-3, ...`; its corrections are
/// powers of `p`, so along a geometric sequence they are geometric and the
/// epsilon algorithm removes them. Convergence is declared when the
/// extrapolated limits of the last two prefixes agree to `1e-9`.
pub fn levy_constant(params: KernelParams, cfg: &QuadratureConfig) -> Result<f64> {
    let cfg = cfg.with_rel_tol(cfg.rel_tol.min(1e-12));
    let samples: Vec<(f64, f64)> = (2..=9)
        .map(|k| {
            let p = 10f64.powi(-k);
            characteristic_exponent(params, p, &cfg).map(|g| (p, g / p.powf(params.gamma)))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let n = ratios.len();
    let full = wynn_limit(&ratios);
    let shorter = wynn_limit(&ratios[..n - 1]);
    if full.is_finite() && (full - shorter).abs() <= 1e-9 * full.abs() {
        Ok(full)
    } else {
        Err(Error::Extrapolation { samples })
    }
}

/// Anything that can supply `G(p)` and its complement.
pub trait Exponent: Sync {
    fn gamma(&self) -> f64;
    fn eval(&self, p: f64) -> Result<ExponentValue>;
}

/// Quadrature on every call. Slow; used for reference values.
#[derive(Debug, Clone, Copy)]
pub struct DirectExponent {
    pub params: KernelParams,
    pub cfg: QuadratureConfig,
}

impl Exponent for DirectExponent {
    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn eval(&self, p: f64) -> Result<ExponentValue> {
        exponent_pair(self.params, p, &self.cfg)
    }
}

/// Tabulated exponent on a decade-uniform `p` grid.
///
/// Below `p = 1` the table interpolates `ln(G/p^gamma)`, which tends to
/// `ln I(gamma)`; above it interpolates `ln(p^2 (1 - G))`, which tends to
/// `ln(gamma (gamma + 1))`. Both are slowly varying in `ln p`, so a
/// monotone cubic reaches the quadrature accuracy at modest density.
#[derive(Debug, Clone)]
pub struct GTable {
    params: KernelParams,
    decade_lo: i32,
    decade_hi: i32,
    points_per_decade: u32,
    rel_tol: f64,
    lower: MonotoneCubic,
    upper: MonotoneCubic,
    raw: Vec<(f64, ExponentValue)>,
}

impl GTable {
    /// Table over `[10^decade_lo, 10^decade_hi]`, with `decade_lo < 0 < decade_hi`.
    pub fn build(
        params: KernelParams,
        decade_lo: i32,
        decade_hi: i32,
        points_per_decade: u32,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        check_range(decade_lo, decade_hi, points_per_decade)?;
        let ppd = points_per_decade as i64;
        let nodes: Vec<f64> = (decade_lo as i64 * ppd..=decade_hi as i64 * ppd)
            .map(|i| 10f64.powf(i as f64 / ppd as f64))
            .collect();
        let raw = nodes
            .par_iter()
            .map(|&p| exponent_pair(params, p, cfg).map(|v| (p, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_raw(params, decade_lo, decade_hi, points_per_decade, cfg.rel_tol, raw)
    }

    /// Table sized for Fourier inversions at times up to `t_max`: its lower
    /// end sits four decades below the wavenumber `t_max^(-1/gamma)`.
    pub fn for_times(params: KernelParams, t_max: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let scale = t_max.max(1.0).powf(-1.0 / params.gamma);
        let decade_lo = ((1e-4 * scale).log10().floor() as i32).min(-6);
        Self::build(
            params,
            decade_lo,
            TABLE_P_MAX.log10() as i32,
            DEFAULT_TABLE_DENSITY,
            cfg,
        )
    }

    fn from_raw(
        params: KernelParams,
        decade_lo: i32,
        decade_hi: i32,
        points_per_decade: u32,
        rel_tol: f64,
        raw: Vec<(f64, ExponentValue)>,
    ) -> Result<Self> {
        let gamma = params.gamma;
        let split = (-decade_lo) as usize * points_per_decade as usize;
        if raw.len() != (decade_hi - decade_lo) as usize * points_per_decade as usize + 1 {
            return Err(Error::Config(format!(
                "exponent table has {} nodes, expected {}",
                raw.len(),
                (decade_hi - decade_lo) as usize * points_per_decade as usize + 1
            )));
        }
        for &(p, v) in &raw {
            if !(v.g > 0.0 && v.complement > 0.0) {
                return Err(Error::Config(format!(
                    "exponent out of range at p = {p}: G = {}, 1 - G = {}",
                    v.g, v.complement
                )));
            }
        }
        let h = std::f64::consts::LN_10 / points_per_decade as f64;
        let lower_y = raw[..=split]
            .iter()
            .map(|&(p, v)| (v.g / p.powf(gamma)).ln())
            .collect();
        let upper_y = raw[split..]
            .iter()
            .map(|&(p, v)| (v.complement * p * p).ln())
            .collect();
        let ln_lo = decade_lo as f64 * std::f64::consts::LN_10;
        Ok(Self {
            params,
            decade_lo,
            decade_hi,
            points_per_decade,
            rel_tol,
            lower: MonotoneCubic::new(ln_lo, h, lower_y),
            upper: MonotoneCubic::new(0.0, h, upper_y),
            raw,
        })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn p_min(&self) -> f64 {
        10f64.powi(self.decade_lo)
    }

    pub fn p_max(&self) -> f64 {
        10f64.powi(self.decade_hi)
    }

    /// Tabulated nodes `(p, G(p), 1 - G(p))`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.raw.iter().map(|&(p, v)| (p, v.g, v.complement))
    }

    #[inline]
    pub fn lookup(&self, p: f64) -> ExponentValue {
        let gamma = self.params.gamma;
        if p <= 0.0 {
            return ExponentValue {
                g: 0.0,
                complement: 1.0,
            };
        }
        let u = p.ln();
        if p <= SPLIT_P {
            let h_ratio = if u <= self.lower.x_min() {
                self.raw[0].1.g / self.raw[0].0.powf(gamma)
            } else {
                self.lower.eval(u).exp()
            };
            let g = p.powf(gamma) * h_ratio;
            ExponentValue {
                g,
                complement: 1.0 - g,
            }
        } else {
            let complement = if u >= self.upper.x_max() {
                let q = 1.0 / (p * p);
                gamma * (gamma + 1.0) * q * (1.0 - (gamma + 2.0) * (gamma + 3.0) * q)
            } else {
                self.upper.eval(u).exp() / (p * p)
            };
            ExponentValue {
                g: 1.0 - complement,
                complement,
            }
        }
    }

    /// Largest relative deviation of the interpolant from direct quadrature,
    /// checked at every `stride`-th cell midpoint.
    pub fn verify(&self, stride: usize, cfg: &QuadratureConfig) -> Result<f64> {
        let n = self.raw.len();
        let ln_step = std::f64::consts::LN_10 / self.points_per_decade as f64;
        let worst = (0..n - 1)
            .step_by(stride.max(1))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&i| {
                let p = (self.raw[i].0.ln() + 0.5 * ln_step).exp();
                let exact = exponent_pair(self.params, p, cfg)?;
                let approx = self.lookup(p);
                let rel = if p <= SPLIT_P {
                    (approx.g / exact.g - 1.0).abs()
                } else {
                    (approx.complement / exact.complement - 1.0).abs()
                };
                Ok(rel)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(worst.into_iter().fold(0.0, f64::max))
    }

    /// Text form: a `#` header line and rows `p G complement`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# gtable gamma={} decade_lo={} decade_hi={} points_per_decade={} rel_tol={}\n",
            fmt17(self.params.gamma),
            self.decade_lo,
            self.decade_hi,
            self.points_per_decade,
            fmt17(self.rel_tol)
        );
        out.push_str("p,G,one_minus_G\n");
        for (p, g, c) in self.nodes() {
            let _ = writeln!(out, "{},{},{}", fmt17(p), fmt17(g), fmt17(c));
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            kind: "exponent table",
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# gtable "))
            .ok_or_else(|| bad("missing header".into()))?;
        let field = |key: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| bad(format!("header lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?
                .parse::<f64>()
                .map_err(|e| bad(format!("{key}: {e}")))
        };
        let int = |key: &str| -> Result<i64> {
            field(key)?
                .parse::<i64>()
                .map_err(|e| bad(format!("{key}: {e}")))
        };
        let params = KernelParams::new(num("gamma")?)?;
        let decade_lo = int("decade_lo")? as i32;
        let decade_hi = int("decade_hi")? as i32;
        let points_per_decade = int("points_per_decade")? as u32;
        let rel_tol = num("rel_tol")?;
        check_range(decade_lo, decade_hi, points_per_decade)?;
        if lines.next() != Some("p,G,one_minus_G") {
            return Err(bad("missing column line".into()));
        }
        let raw = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let cols: Vec<f64> = l
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(format!("row {l:?}: {e}")))?;
                match cols.as_slice() {
                    [p, g, c] => Ok((
                        *p,
                        ExponentValue {
                            g: *g,
                            complement: *c,
                        },
                    )),
                    _ => Err(bad(format!("row {l:?} does not have three columns"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_raw(params, decade_lo, decade_hi, points_per_decade, rel_tol, raw)
    }

    /// Cache file name keyed by exponent, tolerance and grid.
    pub fn cache_name(
        params: KernelParams,
        decade_lo: i32,
        decade_hi: i32,
        points_per_decade: u32,
        rel_tol: f64,
    ) -> String {
        format!(
            "gtable_gamma_{:.4}_tol_{:.0e}_p_{}_{}_ppd_{}.csv",
            params.gamma, rel_tol, decade_lo, decade_hi, points_per_decade
        )
    }

    /// Loads the table from `dir` if a matching cache file exists, otherwise
    /// builds it and writes the cache.
    pub fn cached(
        dir: &Path,
        params: KernelParams,
        decade_lo: i32,
        decade_hi: i32,
        points_per_decade: u32,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_name(
            params,
            decade_lo,
            decade_hi,
            points_per_decade,
            cfg.rel_tol,
        ));
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            return Self::from_text(&text, &path);
        }
        let table = Self::build(params, decade_lo, decade_hi, points_per_decade, cfg)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::sweep::write_atomic(&path, table.to_text().as_bytes())?;
        Ok(table)
    }
}

impl Exponent for GTable {
    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn eval(&self, p: f64) -> Result<ExponentValue> {
        Ok(self.lookup(p))
    }
}

fn check_range(decade_lo: i32, decade_hi: i32, points_per_decade: u32) -> Result<()> {
    if decade_lo >= 0 || decade_hi <= 0 || points_per_decade < 2 {
        return Err(Error::Config(format!(
            "exponent table needs decade_lo < 0 < decade_hi and at least 2 points per decade, \
             got [{decade_lo}, {decade_hi}] at {points_per_decade}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64) -> KernelParams {
        KernelParams::new(gamma).unwrap()
    }

    #[test]
    fn gamma_bounds() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(2.0).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
        assert_eq!(params(1.3).tau(), 1.0);
    }

    #[test]
    fn pdf_values() {
        assert_eq!(step_pdf(params(1.0), 0.0).unwrap(), 0.5);
        assert_eq!(step_pdf(params(1.0), 1.0).unwrap(), 0.125);
        assert!(step_pdf(params(1.0), -1.0).is_err());
    }

    #[test]
    fn exponent_at_origin() {
        let cfg = QuadratureConfig::inner();
        assert_eq!(characteristic_exponent(params(0.7), 0.0, &cfg).unwrap(), 0.0);
        assert!(characteristic_exponent(params(0.7), -1.0, &cfg).is_err());
    }

    #[test]
    fn both_forms_agree_at_the_split() {
        // Evaluate the sine form slightly above the split by hand and
        // compare with the complement form used there.
        let cfg = QuadratureConfig::inner();
        for gamma in [0.5, 1.0, 1.5] {
            let p = 1.0 + 1e-9;
            let sine = integrate_semi_infinite_oscillatory(
                |x: f64| (1.0 + x).powf(-gamma),
                Oscillator::sine(p),
                &cfg,
            )
            .unwrap()
            .value
                * p;
            let pair = exponent_pair(params(gamma), p, &cfg).unwrap();
            assert!((sine - pair.g).abs() < 1e-9, "gamma {gamma}: {sine} vs {}", pair.g);
        }
    }

    #[test]
    fn large_p_limit() {
        let g = characteristic_exponent(params(1.0), 1e3, &QuadratureConfig::inner()).unwrap();
        assert!((g - 1.0).abs() < 1e-4);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let cfg = QuadratureConfig::inner();
        let table = GTable::build(params(0.8), -8, 4, 100, &cfg).unwrap();
        let worst = table.verify(7, &cfg).unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn table_text_round_trip() {
        let cfg = QuadratureConfig::inner();
        let table = GTable::build(params(1.2), -2, 1, 10, &cfg).unwrap();
        let text = table.to_text();
        let back = GTable::from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(back.to_text(), text);
        for p in [1e-3, 0.05, 0.9, 3.0, 40.0] {
            assert_eq!(back.lookup(p), table.lookup(p));
        }
    }
}
