//! Evaluation of the lattice Green's function by one-dimensional quadrature.
//!
//! G(x) = int_0^infty e^{-t} prod_i I_{|x_i|}(t/d) dt, rewritten with scaled
//! Bessel factors so the integrand is prod_i e^{-t/d} I_{|x_i|}(t/d), bounded
//! by one and decaying like t^{-d/2}. The head [0, T0] is integrated with an
//! adaptive 15-point Kronrod rule; the tail beyond T0 (chosen so every Bessel
//! factor is deep in its asymptotic regime) is integrated term by term from
//! the product of asymptotic series.

use crate::error::{Error, Result};

use super::bessel::{asymptotic_coeffs, scaled_iv_row};

// 15-point Kronrod / 7-point Gauss pair (positive abscissae).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

struct Integrand<'a> {
    orders: &'a [usize],
    nu_max: usize,
    inv_d: f64,
    scratch: Vec<f64>,
}

impl Integrand<'_> {
    #[inline]
    fn eval(&mut self, t: f64) -> f64 {
        scaled_iv_row(self.nu_max, t * self.inv_d, &mut self.scratch);
        let mut prod = 1.0;
        for &nu in self.orders {
            prod *= self.scratch[nu];
        }
        prod
    }
}

/// (integral, error estimate) of the integrand over [a, b].
fn kronrod_panel(f: &mut Integrand, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f.eval(mid);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let flo = f.eval(mid - dx);
        let fhi = f.eval(mid + dx);
        kron += WGK[j] * (flo + fhi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (flo + fhi);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Quadrature of the head integral with global adaptive refinement.
fn head_integral(f: &mut Integrand, t_max: f64, rel_tol: f64) -> Result<f64> {
    // geometric initial partition; the integrand is a single smooth bump
    // followed by power decay, so refinement stays local
    let mut bounds = vec![0.0, 1.0];
    while *bounds.last().unwrap() < t_max {
        let next = (bounds.last().unwrap() * 2.0).min(t_max);
        bounds.push(next);
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new(); // (a, b, val, err)
    for w in bounds.windows(2) {
        let (v, e) = kronrod_panel(f, w[0], w[1]);
        panels.push((w[0], w[1], v, e));
    }
    for _round in 0..4000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() + 1e-305 {
            return Ok(total);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        let lo = kronrod_panel(f, a, m);
        let hi = kronrod_panel(f, m, b);
        panels.push((a, m, lo.0, lo.1));
        panels.push((m, b, hi.0, hi.1));
    }
    let total: f64 = panels.iter().map(|p| p.2).sum();
    let err: f64 = panels.iter().map(|p| p.3).sum();
    Err(Error::Quadrature(format!(
        "head integral did not converge: value {total:.6e}, error {err:.3e}, t_max {t_max}"
    )))
}

/// Closed-form tail beyond `t0` from the product of Bessel asymptotic series.
fn tail_integral(orders: &[usize], d: usize, t0: f64, terms: usize) -> f64 {
    // product of per-factor series in powers of 1/z, z = t/d
    let mut prod = vec![0.0; terms];
    prod[0] = 1.0;
    for &nu in orders {
        let a = asymptotic_coeffs(nu, terms);
        let mut next = vec![0.0; terms];
        for (i, &pi) in prod.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, &aj) in a.iter().enumerate() {
                if i + j < terms {
                    next[i + j] += pi * aj;
                }
            }
        }
        prod = next;
    }
    let df = d as f64;
    let half_d = 0.5 * df;
    let pref = (2.0 * std::f64::consts::PI / df).powf(-half_d);
    let mut sum = 0.0;
    for (k, &ck) in prod.iter().enumerate() {
        let expo = half_d + k as f64 - 1.0;
        sum += ck * df.powi(k as i32) * t0.powf(-expo) / expo;
    }
    pref * sum
}

/// High-precision G(x) for the walk on Z^d; `orders` are |x_1|..|x_d|.
pub fn green_quadrature(orders: &[usize], d: usize, rel_tol: f64) -> Result<f64> {
    debug_assert_eq!(orders.len(), d);
    let nu_max = *orders.iter().max().unwrap();
    let t0 = d as f64 * (20.0 * (nu_max * nu_max) as f64).max(50.0);
    let mut f = Integrand {
        orders,
        nu_max,
        inv_d: 1.0 / d as f64,
        scratch: Vec::new(),
    };
    let head = head_integral(&mut f, t0, rel_tol)?;
    let tail = tail_integral(orders, d, t0, 7);
    Ok(head + tail)
}
