use std::collections::BTreeMap;

use num_complex::Complex64;

/// Real Clebsch-Gordan coefficients `C^{(l,m)}_{(l1,m1)(l2,m2)}` stored as a
/// dense `(2l+1) x (2l1+1) x (2l2+1)` array, `m` outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct CgTensor {
    pub l1: usize,
    pub l2: usize,
    pub l: usize,
    data: Vec<f64>,
}

impl CgTensor {
    pub fn dims(&self) -> (usize, usize, usize) {
        (2 * self.l + 1, 2 * self.l1 + 1, 2 * self.l2 + 1)
    }

    /// Coefficient at component indices (0-based, `m + l`).
    #[inline]
    pub fn at(&self, m: usize, m1: usize, m2: usize) -> f64 {
        let (_, d1, d2) = self.dims();
        self.data[(m * d1 + m1) * d2 + m2]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Real CG coefficients for coupling orders `l1 ⊗ l2 → l`.
///
/// Built from the Racah closed form for the complex coefficients, then
/// conjugated into the crate's real basis. The overall sign is fixed so the
/// first nonzero entry in `(m, m1, m2)` order is positive. Outside
/// `|l1 - l2| <= l <= l1 + l2` the array is identically zero.
pub fn clebsch_gordan(l1: usize, l2: usize, l: usize) -> CgTensor {
    let (d, d1, d2) = (2 * l + 1, 2 * l1 + 1, 2 * l2 + 1);
    let mut data = vec![0.0; d * d1 * d2];
    if l < l1.abs_diff(l2) || l > l1 + l2 {
        return CgTensor { l1, l2, l, data };
    }

    let u = real_basis(l);
    let u1 = real_basis(l1);
    let u2 = real_basis(l2);
    let (il, il1, il2) = (l as i64, l1 as i64, l2 as i64);

    // Complex CG is sparse (M = M1 + M2), so iterate over its support only.
    let mut cplx = vec![Complex64::new(0.0, 0.0); d * d1 * d2];
    for mi in 0..d {
        for m1i in 0..d1 {
            for m2i in 0..d2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for big_m1 in -il1..=il1 {
                    let c1 = u1[m1i * d1 + (big_m1 + il1) as usize].conj();
                    if c1 == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for big_m2 in -il2..=il2 {
                        let c2 = u2[m2i * d2 + (big_m2 + il2) as usize].conj();
                        if c2 == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let big_m = big_m1 + big_m2;
                        if big_m.abs() > il {
                            continue;
                        }
                        let cu = u[mi * d + (big_m + il) as usize];
                        if cu == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let cg = complex_cg(il1, big_m1, il2, big_m2, il, big_m);
                        acc += cu * c1 * c2 * cg;
                    }
                }
                cplx[(mi * d1 + m1i) * d2 + m2i] = acc;
            }
        }
    }

    // The transformed tensor is real or purely imaginary up to roundoff.
    let re_norm: f64 = cplx.iter().map(|c| c.re * c.re).sum();
    let im_norm: f64 = cplx.iter().map(|c| c.im * c.im).sum();
    let take_re = re_norm >= im_norm;
    for (dst, c) in data.iter_mut().zip(&cplx) {
        let v = if take_re { c.re } else { c.im };
        *dst = if v.abs() < 1e-14 { 0.0 } else { v };
    }
    if let Some(first) = data.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            data.iter_mut().for_each(|v| *v = -*v);
        }
    }
    CgTensor { l1, l2, l, data }
}

/// Complex-to-real change of basis `U_l` (rows: real `m`, columns: complex `M`),
/// matching Condon-Shortley complex harmonics to phase-free real harmonics.
fn real_basis(l: usize) -> Vec<Complex64> {
    let d = 2 * l + 1;
    let il = l as i64;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = vec![Complex64::new(0.0, 0.0); d * d];
    let idx = |m: i64, big_m: i64| ((m + il) as usize) * d + (big_m + il) as usize;
    u[idx(0, 0)] = Complex64::new(1.0, 0.0);
    for mu in 1..=il {
        let sign = if mu % 2 == 0 { 1.0 } else { -1.0 };
        u[idx(mu, -mu)] = Complex64::new(s, 0.0);
        u[idx(mu, mu)] = Complex64::new(sign * s, 0.0);
        u[idx(-mu, -mu)] = Complex64::new(0.0, s);
        u[idx(-mu, mu)] = Complex64::new(0.0, -sign * s);
    }
    u
}

fn factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Standard (Condon-Shortley) complex CG coefficient `<j1 m1 j2 m2 | j m>`.
fn complex_cg(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 {
        return 0.0;
    }
    let pre = ((2 * j + 1) as f64 * factorial(j + j1 - j2) * factorial(j - j1 + j2) * factorial(j1 + j2 - j)
        / factorial(j1 + j2 + j + 1))
    .sqrt()
        * (factorial(j + m)
            * factorial(j - m)
            * factorial(j1 - m1)
            * factorial(j1 + m1)
            * factorial(j2 - m2)
            * factorial(j2 + m2))
        .sqrt();
    let k_min = 0.max(j2 - j - m1).max(j1 + m2 - j);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(j1 + j2 - j - k)
            * factorial(j1 - m1 - k)
            * factorial(j2 + m2 - k)
            * factorial(j - j2 + m1 + k)
            * factorial(j - j1 - m2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    pre * sum
}

/// Immutable table of real CG tensors for every admissible triple with
/// `l1, l2 <= max_in` and any output order.
#[derive(Clone, Debug, Default)]
pub struct CgTable {
    entries: BTreeMap<(usize, usize, usize), CgTensor>,
}

impl CgTable {
    pub fn new(max_in: usize) -> Self {
        let mut entries = BTreeMap::new();
        for l1 in 0..=max_in {
            for l2 in 0..=max_in {
                for l in l1.abs_diff(l2)..=(l1 + l2) {
                    entries.insert((l1, l2, l), clebsch_gordan(l1, l2, l));
                }
            }
        }
        Self { entries }
    }

    /// Builds only the listed triples.
    pub fn for_triples(triples: impl IntoIterator<Item = (usize, usize, usize)>) -> Self {
        let mut entries = BTreeMap::new();
        for t in triples {
            entries.entry(t).or_insert_with(|| clebsch_gordan(t.0, t.1, t.2));
        }
        Self { entries }
    }

    /// Panics when the triple was not precomputed.
    pub fn get(&self, l1: usize, l2: usize, l: usize) -> &CgTensor {
        self.entries
            .get(&(l1, l2, l))
            .unwrap_or_else(|| panic!("CG ({l1},{l2})->{l} not in table"))
    }
}
