use nalgebra::{DMatrix, Matrix3};

use super::clebsch::clebsch_gordan;
use super::rotation::Rotation;
use super::tensor::TensorType;
use crate::error::Result;

/// Component permutation taking Cartesian `(x,y,z)` to order-1 layout `(y,z,x)`.
const PERM: [usize; 3] = [1, 2, 0];

/// Real Wigner matrix `D^(l)_g`, defined by `Y^(l)(R_g n) = D^(l)_g Y^(l)(n)`.
pub fn wigner_d(l: usize, g: &Rotation) -> DMatrix<f64> {
    WignerSet::new(g, l).d.pop().expect("nonempty")
}

/// Validates `m` as a rotation, then builds `D^(l)`.
pub fn wigner_d_from_matrix(l: usize, m: &Matrix3<f64>) -> Result<DMatrix<f64>> {
    Ok(wigner_d(l, &Rotation::new(*m)?))
}

/// `D^(0)..=D^(lmax)` for one rotation, built by the order-raising recursion
/// `D^(l) = C (D^(l-1) ⊗ D^(1)) Cᵀ` with `C` the real CG matrix for
/// `(l-1) ⊗ 1 → l`.
#[derive(Clone, Debug)]
pub struct WignerSet {
    d: Vec<DMatrix<f64>>,
}

impl WignerSet {
    pub fn new(g: &Rotation, lmax: usize) -> Self {
        let r = g.matrix();
        let mut d = Vec::with_capacity(lmax + 1);
        d.push(DMatrix::from_element(1, 1, 1.0));
        if lmax == 0 {
            return Self { d };
        }
        let d1 = DMatrix::from_fn(3, 3, |a, b| r[(PERM[a], PERM[b])]);
        d.push(d1.clone());
        for l in 2..=lmax {
            let cg = clebsch_gordan(l - 1, 1, l);
            let c = DMatrix::from_row_slice(2 * l + 1, (2 * l - 1) * 3, cg.as_slice());
            let kron = d[l - 1].kronecker(&d1);
            d.push(&c * kron * c.transpose());
        }
        Self { d }
    }

    pub fn lmax(&self) -> usize {
        self.d.len() - 1
    }

    pub fn d(&self, l: usize) -> &DMatrix<f64> {
        &self.d[l]
    }

    /// `out = D^(l) x` for one order-`l` block.
    #[inline]
    pub fn apply_block(&self, l: usize, x: &[f64], out: &mut [f64]) {
        let dl = &self.d[l];
        let n = 2 * l + 1;
        for a in 0..n {
            let mut s = 0.0;
            for b in 0..n {
                s += dl[(a, b)] * x[b];
            }
            out[a] = s;
        }
    }

    /// Block-diagonal `D^τ x` over a multi-channel layout.
    pub fn apply_type(&self, ty: &TensorType, x: &[f64], out: &mut [f64]) {
        let mut off = 0;
        for l in ty.orders() {
            let n = 2 * l + 1;
            self.apply_block(l, &x[off..off + n], &mut out[off..off + n]);
            off += n;
        }
    }

    /// Dense block-diagonal `D^τ`.
    pub fn block_diag(&self, ty: &TensorType) -> DMatrix<f64> {
        let n = ty.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for l in ty.orders() {
            let k = 2 * l + 1;
            m.view_mut((off, off), (k, k)).copy_from(&self.d[l]);
            off += k;
        }
        m
    }
}
