//! Reference values computed independently of the crate's quadrature.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sine and cosine integrals `(Si(x), Ci(x))` for `x > 0`: power series
/// below 2, continued fraction for `E1(ix)` above.
pub fn sici(x: f64) -> (f64, f64) {
    assert!(x > 0.0);
    if x <= 2.0 {
        // term = x^k / k!; Si collects odd k, Ci even k, both with sign (-1)^(k/2).
        let (mut si, mut ci) = (0.0, 0.0);
        let mut term = 1.0;
        for k in 1..60 {
            term *= x / k as f64;
            let signed = if (k / 2) % 2 == 0 { term } else { -term } / k as f64;
            if k % 2 == 1 {
                si += signed;
            } else {
                ci += signed;
            }
            if term < 1e-18 {
                break;
            }
        }
        (si, EULER_GAMMA + x.ln() + ci)
    } else {
        // Modified Lentz for E1(ix) = exp(-ix) * CF.
        let (mut b_re, b_im) = (1.0, x);
        let tiny = 1e-300;
        let (mut c_re, mut c_im) = (1.0 / tiny, 0.0);
        let (mut d_re, mut d_im) = inv(b_re, b_im);
        let (mut h_re, mut h_im) = (d_re, d_im);
        for i in 2..200 {
            let a = -((i - 1) * (i - 1)) as f64;
            b_re += 2.0;
            // d = 1 / (a d + b)
            let (den_re, den_im) = (a * d_re + b_re, a * d_im + b_im);
            let (nd_re, nd_im) = inv(den_re, den_im);
            d_re = nd_re;
            d_im = nd_im;
            // c = b + a / c
            let (ic_re, ic_im) = inv(c_re, c_im);
            c_re = b_re + a * ic_re;
            c_im = b_im + a * ic_im;
            let del_re = c_re * d_re - c_im * d_im;
            let del_im = c_re * d_im + c_im * d_re;
            let nh_re = h_re * del_re - h_im * del_im;
            let nh_im = h_re * del_im + h_im * del_re;
            h_re = nh_re;
            h_im = nh_im;
            if (del_re - 1.0).abs() + del_im.abs() < 1e-16 {
                break;
            }
        }
        let (cs, sn) = (x.cos(), -x.sin());
        let r_re = cs * h_re - sn * h_im;
        let r_im = cs * h_im + sn * h_re;
        (FRAC_PI_2 + r_im, -r_re)
    }
}

fn inv(re: f64, im: f64) -> (f64, f64) {
    let m = re * re + im * im;
    (re / m, -im / m)
}

/// `G(p)` for `gamma = 1` in closed form:
/// `sin(p) Ci(p) + cos(p) (pi/2 - Si(p))`, times `p` from the prefactor of
/// the exponent integral after the shift `u = 1 + x`.
pub fn exponent_gamma_one(p: f64) -> f64 {
    let (si, ci) = sici(p);
    p * (p.sin() * ci + p.cos() * (FRAC_PI_2 - si))
}

/// `Gamma(1 - gamma) cos(pi gamma / 2)`, continuous at `gamma = 1`.
pub fn levy_closed_form(gamma: f64) -> f64 {
    if (gamma - 1.0).abs() < 1e-12 {
        FRAC_PI_2
    } else {
        statrs::function::gamma::gamma(1.0 - gamma) * (PI * gamma / 2.0).cos()
    }
}

/// Composite Gauss-Legendre (5 nodes per panel) on a fixed uniform mesh.
pub fn fixed_mesh_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let r = (10.0f64 / 7.0).sqrt();
    let x = [
        -(5.0 + 2.0 * r).sqrt() / 3.0,
        -(5.0 - 2.0 * r).sqrt() / 3.0,
        0.0,
        (5.0 - 2.0 * r).sqrt() / 3.0,
        (5.0 + 2.0 * r).sqrt() / 3.0,
    ];
    let s70 = 70f64.sqrt();
    let (w_outer, w_inner) = ((322.0 - 13.0 * s70) / 900.0, (322.0 + 13.0 * s70) / 900.0);
    let w = [w_outer, w_inner, 128.0 / 225.0, w_inner, w_outer];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let c = a + (i as f64 + 0.5) * h;
            x.iter()
                .zip(w.iter())
                .map(|(x, w)| w * f(c + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Distance in units in the last place between two positive finite values.
pub fn ulps(a: f64, b: f64) -> u64 {
    assert!(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite());
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

/// Worst `ulps(q_w(f_auto), g)` over `n` random `(gamma, t, s)` triples.
///
/// The scaling function is piecewise `max(1, 2 s)`-like on `[0.01, 1000]`,
/// so both the interpolated range and the linear extension are exercised.
pub fn worst_round_trip_ulps(n: usize, seed: u64) -> (u64, (f64, f64, f64)) {
    use levy_automodel::automodel::{automodel_density, front_position, rho_from, GCurve};
    use levy_automodel::kernel::KernelParams;
    use levy_automodel::meshes::log_mesh;
    use levy_automodel::reconstruct::q_w;
    use rand::{Rng, SeedableRng};

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mesh = log_mesh(0.01, 1000.0, 25).unwrap();
    let mut worst = (0, (0.0, 0.0, 0.0));
    for _ in 0..n {
        let gamma: f64 = rng.gen_range(0.05..1.95);
        let t = 10f64.powf(rng.gen_range(0.0..8.0));
        let s = 10f64.powf(rng.gen_range(-3.0..4.0));
        let params = KernelParams::new(gamma).unwrap();
        let g_values: Vec<f64> = mesh.values().iter().map(|s| (2.0 * s).max(1.0) * (1.0 + 0.1 / (1.0 + s))).collect();
        let curve = GCurve::new(gamma, mesh.clone(), g_values, 2.0).unwrap();
        let rho = rho_from(params, t, s).unwrap();
        let f = automodel_density(&curve, rho, t).unwrap();
        let q = q_w(params, rho, t, f).unwrap();
        let expected = curve.g(front_position(params, t).unwrap() / rho);
        let d = ulps(q, expected);
        if d > worst.0 {
            worst = (d, (gamma, t, s));
        }
    }
    worst
}

/// Recovery of a synthetic automodel field with `g = max(1, 2 s)`:
/// returns `(|alpha - 2|, worst relative error of g)`.
pub fn synthetic_recovery(gamma: f64) -> (f64, f64) {
    use levy_automodel::automodel::{automodel_density, rho_from, GCurve};
    use levy_automodel::exact::ExactField;
    use levy_automodel::kernel::KernelParams;
    use levy_automodel::meshes::log_mesh;
    use levy_automodel::reconstruct::{g_curve_from, q_field};

    let s_mesh = log_mesh(0.01, 1000.0, 25).unwrap();
    let t_mesh = log_mesh(30.0, 1e6, 20).unwrap();
    let g: Vec<f64> = s_mesh.values().iter().map(|s| (2.0 * s).max(1.0)).collect();
    let curve = GCurve::new(gamma, s_mesh.clone(), g.clone(), 2.0).unwrap();
    let params = KernelParams::new(gamma).unwrap();
    let mut values = Vec::new();
    for &t in t_mesh.values() {
        for &s in s_mesh.values() {
            let rho = rho_from(params, t, s).unwrap();
            values.push(automodel_density(&curve, rho, t).unwrap());
        }
    }
    let field = ExactField::from_parts(gamma, t_mesh, s_mesh, values).unwrap();
    let rebuilt = g_curve_from(&q_field(&field).unwrap()).unwrap();
    let worst_g = rebuilt
        .g_values()
        .iter()
        .zip(&g)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max);
    ((rebuilt.alpha() - 2.0).abs(), worst_g)
}
