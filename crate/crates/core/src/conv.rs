//! Direct same-size 3D cross-correlation on voxel-major arrays:
//! `out[v][co] = sum_f sum_ci K[f][ci][co] * x[v + off(f)][ci]`, zero padded.
//!
//! Each filter offset is one GEMM against a shifted copy of the input.
//! Generic over `f32`/`f64` so the single-precision path shares the code.

use num_traits::Float;

use crate::kernel::PFilterGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Single,
}

/// Element types the convolution runs in, with their GEMM.
pub trait Scalar: Float + Send + Sync + 'static {
    /// `C[m×n] += A[m×k] · B[k×n]` with arbitrary row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, c: &mut [Self], rsc: isize);
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, c: &mut [Self], rsc: isize) {
                let extent = |rows: usize, cols: usize, rs: isize, cs: isize| (rows.max(1) - 1) as isize * rs + (cols.max(1) - 1) as isize * cs;
                assert!(extent(m, k, rsa, csa) < a.len() as isize || m * k == 0);
                assert!(extent(k, n, rsb, csb) < b.len() as isize || k * n == 0);
                assert!(extent(m, n, rsc, 1) < c.len() as isize || m * n == 0);
                // SAFETY: the asserts keep every strided access inside the slices.
                unsafe { $gemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 1.0, c.as_mut_ptr(), rsc, 1) }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// `out[v] = x[v + off]` per voxel row of `c` channels, zero outside the grid.
fn shift_into<T: Scalar>(x: &[T], dims: [usize; 3], c: usize, off: [i64; 3], out: &mut [T]) {
    let [px, py, pz] = dims.map(|d| d as i64);
    out.fill(T::zero());
    for z in 0..pz {
        let zz = z + off[2];
        if zz < 0 || zz >= pz {
            continue;
        }
        for y in 0..py {
            let yy = y + off[1];
            if yy < 0 || yy >= py {
                continue;
            }
            let (x0, x1) = ((-off[0]).max(0), (px - off[0]).min(px));
            if x0 >= x1 {
                continue;
            }
            let v = ((z * py + y) * px + x0) as usize;
            let u = ((zz * py + yy) * px + x0 + off[0]) as usize;
            let len = (x1 - x0) as usize * c;
            out[v * c..v * c + len].copy_from_slice(&x[u * c..u * c + len]);
        }
    }
}

fn mirror(off: [i64; 3]) -> [i64; 3] {
    off.map(|o| -o)
}

pub fn conv3d<T: Scalar>(x: &[T], dims: [usize; 3], cin: usize, k: &[T], grid: PFilterGrid, cout: usize) -> Vec<T> {
    let nv: usize = dims.iter().product();
    debug_assert_eq!(x.len(), nv * cin);
    debug_assert_eq!(k.len(), grid.count() * cin * cout);
    let mut out = vec![T::zero(); nv * cout];
    let mut xs = vec![T::zero(); nv * cin];
    for f in 0..grid.count() {
        shift_into(x, dims, cin, grid.offset(f), &mut xs);
        let kf = &k[f * cin * cout..(f + 1) * cin * cout];
        T::gemm_acc(nv, cin, cout, &xs, cin as isize, 1, kf, cout as isize, 1, &mut out, cout as isize);
    }
    out
}

/// Gradient wrt the input: `dx[u][ci] = sum_f sum_co K[f][ci][co] dy[u - off(f)][co]`.
pub fn conv3d_grad_input(dy: &[f64], dims: [usize; 3], cout: usize, k: &[f64], grid: PFilterGrid, cin: usize) -> Vec<f64> {
    let nv: usize = dims.iter().product();
    let mut dx = vec![0.0; nv * cin];
    let mut ds = vec![0.0; nv * cout];
    for f in 0..grid.count() {
        shift_into(dy, dims, cout, mirror(grid.offset(f)), &mut ds);
        let kf = &k[f * cin * cout..(f + 1) * cin * cout];
        f64::gemm_acc(nv, cout, cin, &ds, cout as isize, 1, kf, 1, cout as isize, &mut dx, cin as isize);
    }
    dx
}

/// Gradient wrt the kernel: `dK[f][ci][co] = sum_v x[v + off(f)][ci] dy[v][co]`.
pub fn conv3d_grad_kernel(x: &[f64], dy: &[f64], dims: [usize; 3], cin: usize, cout: usize, grid: PFilterGrid) -> Vec<f64> {
    let nv: usize = dims.iter().product();
    let mut dk = vec![0.0; grid.count() * cin * cout];
    let mut xs = vec![0.0; nv * cin];
    for (f, kf) in dk.chunks_exact_mut(cin * cout).enumerate() {
        shift_into(x, dims, cin, grid.offset(f), &mut xs);
        f64::gemm_acc(cin, nv, cout, &xs, 1, cin as isize, dy, cout as isize, 1, kf, cout as isize);
    }
    dk
}

/// Runs [`conv3d`] at the requested precision on `f64` storage.
pub fn conv3d_at(precision: Precision, x: &[f64], dims: [usize; 3], cin: usize, k: &[f64], grid: PFilterGrid, cout: usize) -> Vec<f64> {
    match precision {
        Precision::Double => conv3d(x, dims, cin, k, grid, cout),
        Precision::Single => {
            let xs: Vec<f32> = x.iter().map(|&v| v as f32).collect();
            let ks: Vec<f32> = k.iter().map(|&v| v as f32).collect();
            conv3d(&xs, dims, cin, &ks, grid, cout).into_iter().map(f64::from).collect()
        }
    }
}
