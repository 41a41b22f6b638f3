use std::f64::consts::PI;

use super::rotation::Vec3;
use super::tensor::SphericalTensor;

/// The constant order-0 harmonic, `1 / (2 sqrt(pi))`.
pub const Y00: f64 = 0.282_094_791_773_878_14;

/// Real spherical harmonics of order `l` at the direction of `n`.
///
/// `n` does not need to be normalized. The zero vector maps to `[Y00]` for
/// `l = 0` and to the zero tensor otherwise; the zero tensor is fixed by every
/// Wigner matrix so equivariance survives the singular point.
pub fn sph_harm(l: usize, n: &Vec3) -> SphericalTensor {
    let mut out = vec![0.0; 2 * l + 1];
    sph_harm_into(l, n, &mut out);
    SphericalTensor::from_vec(l, out).expect("length is 2l+1")
}

/// Writes `Y^(l)(n / |n|)` into `out` (length `2l + 1`).
pub fn sph_harm_into(l: usize, n: &Vec3, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * l + 1);
    if l == 0 {
        out[0] = Y00;
        return;
    }
    let r = n.norm();
    if r == 0.0 || !r.is_finite() {
        out.fill(0.0);
        return;
    }
    let (x, y, z) = (n.x / r, n.y / r, n.z / r);

    // cos(m phi) sin^m(theta) and sin(m phi) sin^m(theta) as Re/Im of (x + iy)^m.
    let mut re = vec![1.0; l + 1];
    let mut im = vec![0.0; l + 1];
    for m in 1..=l {
        re[m] = re[m - 1] * x - im[m - 1] * y;
        im[m] = re[m - 1] * y + im[m - 1] * x;
    }

    let lf = l as f64;
    for m in 0..=l {
        // Associated Legendre P_l^m(z) / sin^m(theta), no Condon-Shortley phase.
        let mut q_mm = 1.0;
        for k in 1..=m {
            q_mm *= (2 * k - 1) as f64;
        }
        let q_lm = if l == m {
            q_mm
        } else {
            let mut prev = q_mm;
            let mut cur = (2 * m + 1) as f64 * z * q_mm;
            for ll in (m + 2)..=l {
                let next = ((2 * ll - 1) as f64 * z * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
                prev = cur;
                cur = next;
            }
            cur
        };

        // (l - m)! / (l + m)!
        let mut ratio = 1.0;
        for j in (l - m + 1)..=(l + m) {
            ratio /= j as f64;
        }
        let norm = ((2.0 * lf + 1.0) / (4.0 * PI) * ratio).sqrt();
        if m == 0 {
            out[l] = norm * q_lm;
        } else {
            let s = std::f64::consts::SQRT_2 * norm * q_lm;
            out[l + m] = s * re[m];
            out[l - m] = s * im[m];
        }
    }
}
