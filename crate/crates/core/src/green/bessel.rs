//! Exponentially scaled modified Bessel functions of integer order.
//!
//! `scaled_iv_row` fills `out[k] = e^{-z} I_k(z)` for k = 0..=nu_max in one
//! backward (Miller) recurrence, normalized with the identity
//! I_0(z) + 2 sum_{k>=1} I_k(z) = e^z, i.e. the scaled row sums to one.
//! One row evaluation serves all coordinate orders of a lattice point at a
//! quadrature node.

/// Fill `out` with e^{-z} I_k(z), k = 0..=nu_max. Requires z >= 0.
pub fn scaled_iv_row(nu_max: usize, z: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(nu_max + 1, 0.0);
    if z == 0.0 {
        out[0] = 1.0;
        return;
    }
    debug_assert!(z > 0.0);
    let mut start = nu_max + 24 + (2.2 * z.sqrt()) as usize;
    let mut prev: Option<Vec<f64>> = None;
    loop {
        miller_pass(nu_max, z, start, out);
        if let Some(p) = &prev {
            let mut ok = true;
            for k in 0..=nu_max {
                let diff = (out[k] - p[k]).abs();
                if diff > 1e-16 * p[k].abs().max(1e-305) {
                    ok = false;
                    break;
                }
            }
            if ok {
                return;
            }
        }
        prev = Some(out.clone());
        start += start / 2 + 32;
        assert!(start < 100_000_000, "Bessel start order runaway at z = {z}");
    }
}

fn miller_pass(nu_max: usize, z: f64, start: usize, out: &mut [f64]) {
    const BIG: f64 = 1e280;
    const SMALL: f64 = 1e-280;
    let two_over_z = 2.0 / z;
    let mut norm = 0.0f64; // accumulates b_0 + 2 sum b_k
    let mut b_hi = 0.0f64; // b_{k+1}
    let mut b = 1e-280f64; // b_k, arbitrary seed
    if start <= nu_max {
        // degenerate; caller retries with larger start
        for v in out.iter_mut() {
            *v = f64::NAN;
        }
        return;
    }
    let mut k = start;
    loop {
        if k <= nu_max {
            out[k] = b;
        } else {
            norm += 2.0 * b;
        }
        if k == 0 {
            break;
        }
        let b_lo = b_hi + two_over_z * (k as f64) * b;
        b_hi = b;
        b = b_lo;
        k -= 1;
        if b.abs() > BIG {
            b *= SMALL;
            b_hi *= SMALL;
            norm *= SMALL;
            for v in out[k + 1..].iter_mut() {
                *v *= SMALL;
            }
        }
    }
    // out[0..=nu_max] now hold raw b_k for k <= nu_max; finish the norm
    norm += out[0];
    for v in out[1..].iter_mut() {
        norm += 2.0 * *v;
    }
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

/// Asymptotic coefficients A_m(nu) of I_nu(z) ~ e^z / sqrt(2 pi z) *
/// sum_m (-1)^m A_m(nu) / z^m, with A_0 = 1 and
/// A_m = prod_{j=1..m} (4 nu^2 - (2j-1)^2) / (m! 8^m).
pub fn asymptotic_coeffs(nu: usize, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut a = Vec::with_capacity(terms);
    a.push(1.0);
    let mut cur = 1.0;
    for m in 1..terms {
        let odd = (2 * m - 1) as f64;
        cur *= (mu - odd * odd) / (8.0 * m as f64);
        a.push(if m % 2 == 0 { cur } else { -cur });
    }
    a
}
