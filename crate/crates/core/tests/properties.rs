use eqdmri::conv::{conv3d, conv3d_grad_input, conv3d_grad_kernel};
use eqdmri::field::{Field, VoxelMajor};
use eqdmri::io::qstf::{read_field, write_field, Dtype};
use eqdmri::kernel::{PFilterGrid, QScheme};
use eqdmri::layers::GateSpec;
use eqdmri::model::{average_precision, dice, roc_auc};
use eqdmri::so3::{Rotation, SphericalTensor, TensorType, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn conv_case() -> impl Strategy<Value = ([usize; 3], usize, usize, usize, u64)> {
    ([1usize..6, 1..6, 1..6], 1usize..4, 1usize..4, 0usize..3, any::<u64>())
}

/// Rotates every channel of a per-point tensor vector of type `ty`.
fn rotate_point(ty: &TensorType, v: &[f64], g: &Rotation) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    for (l, off) in ty.orders().into_iter().zip(ty.offsets()) {
        let t = SphericalTensor::from_vec(l, v[off..off + 2 * l + 1].to_vec()).unwrap();
        out.extend_from_slice(t.rotate(g).components());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn impulse_response_reads_back_the_kernel((dims, cin, cout, r, seed) in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PFilterGrid::new(r);
        let k = uniform(&mut rng, grid.count() * cin * cout);
        let side = 2 * r + 1;
        let big = [dims[0] + side, dims[1] + side, dims[2] + side];
        let c = big.map(|d| d / 2);
        let vox = |x: usize, y: usize, z: usize| (z * big[1] + y) * big[0] + x;
        let ci = rng.random_range(0..cin);
        let mut x = vec![0.0; big.iter().product::<usize>() * cin];
        x[vox(c[0], c[1], c[2]) * cin + ci] = 1.0;
        let y = conv3d(&x, big, cin, &k, grid, cout);
        let r = r as i64;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let f = (((dz + r) * (2 * r + 1) + dy + r) * (2 * r + 1) + dx + r) as usize;
                    let v = vox((c[0] as i64 - dx) as usize, (c[1] as i64 - dy) as usize, (c[2] as i64 - dz) as usize);
                    for co in 0..cout {
                        prop_assert_eq!(y[v * cout + co], k[(f * cin + ci) * cout + co]);
                    }
                }
            }
        }
    }

    #[test]
    fn conv_gradients_are_adjoint((dims, cin, cout, r, seed) in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PFilterGrid::new(r);
        let n: usize = dims.iter().product();
        let k = uniform(&mut rng, grid.count() * cin * cout);
        let x = uniform(&mut rng, n * cin);
        let dy = uniform(&mut rng, n * cout);
        let y = conv3d(&x, dims, cin, &k, grid, cout);
        let dx = conv3d_grad_input(&dy, dims, cout, &k, grid, cin);
        let dk = conv3d_grad_kernel(&x, &dy, dims, cin, cout, grid);
        let lhs = dot(&y, &dy);
        let scale = 1.0 + lhs.abs();
        prop_assert!((lhs - dot(&x, &dx)).abs() <= 1e-12 * scale);
        prop_assert!((lhs - dot(&k, &dk)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn conv_commutes_with_integer_shifts((dims, cin, cout, r, seed) in conv_case(), shift in [0usize..3, 0..3, 0..3]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PFilterGrid::new(r);
        let k = uniform(&mut rng, grid.count() * cin * cout);
        // A signal supported away from the border, placed at two offsets.
        let pad = r + 3;
        let big = dims.map(|d| d + 2 * pad);
        let place = |off: [usize; 3], src: &[f64]| {
            let mut out = vec![0.0; big.iter().product::<usize>() * cin];
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        let s = (z * dims[1] + y) * dims[0] + x;
                        let t = ((z + off[2]) * big[1] + y + off[1]) * big[0] + x + off[0];
                        out[t * cin..(t + 1) * cin].copy_from_slice(&src[s * cin..(s + 1) * cin]);
                    }
                }
            }
            out
        };
        let src = uniform(&mut rng, dims.iter().product::<usize>() * cin);
        let base = [r; 3];
        let moved = [r + shift[0], r + shift[1], r + shift[2]];
        let y0 = conv3d(&place(base, &src), big, cin, &k, grid, cout);
        let y1 = conv3d(&place(moved, &src), big, cin, &k, grid, cout);
        for z in 0..big[2] - shift[2] {
            for y in 0..big[1] - shift[1] {
                for x in 0..big[0] - shift[0] {
                    let a = (z * big[1] + y) * big[0] + x;
                    let b = ((z + shift[2]) * big[1] + y + shift[1]) * big[0] + x + shift[0];
                    prop_assert_eq!(&y0[a * cout..(a + 1) * cout], &y1[b * cout..(b + 1) * cout]);
                }
            }
        }
    }

    #[test]
    fn gate_commutes_with_rotation(counts in prop::collection::vec(0usize..3, 1..4), seed in any::<u64>()) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates = GateSpec::for_output(&TensorType::new(counts));
        let din = gates.ty_in.dim();
        let x = VoxelMajor { dims: [1, 1, 1], nq: 1, dim: din, data: uniform(&mut rng, din) };
        let g = Rotation::random(&mut rng);
        let rx = VoxelMajor { data: rotate_point(&gates.ty_in, &x.data, &g), ..x.clone() };
        let lhs = gates.forward(&rx).data;
        let rhs = rotate_point(&gates.ty_out, &gates.forward(&x).data, &g);
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn metrics_are_bounded_and_rank_based(
        pred in prop::collection::vec(0.0f64..1.0, 4..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = pred.len();
        let labels: Vec<f64> = (0..n).map(|i| if i < 2 { i as f64 } else { f64::from(rng.random_bool(0.5)) }).collect();
        let mask = vec![true; n];
        let auc = roc_auc(&pred, &labels, &mask).unwrap();
        let ap = average_precision(&pred, &labels, &mask).unwrap();
        let d = dice(&pred, &labels, &mask).unwrap();
        for v in [auc, ap, d] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // Ranking metrics ignore strictly increasing transforms.
        let warped: Vec<f64> = pred.iter().map(|p| p.powi(3) + 2.0 * p).collect();
        prop_assert!((roc_auc(&warped, &labels, &mask).unwrap() - auc).abs() <= 1e-12);
        prop_assert!((average_precision(&warped, &labels, &mask).unwrap() - ap).abs() <= 1e-12);
    }

    #[test]
    fn qstf_round_trip(counts in prop::collection::vec(0usize..3, 1..4), dims in [1usize..4, 1..4, 1..4], nq in 1usize..4, seed in any::<u64>()) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ty = TensorType::new(counts);
        let q = QScheme::new((0..nq).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()).unwrap();
        let n = ty.dim() * dims.iter().product::<usize>() * nq;
        let f = Field::new(ty, dims, q, uniform(&mut rng, n)).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f, Dtype::F64).unwrap();
        let (back, dtype) = read_field(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(dtype, Dtype::F64);
        prop_assert_eq!(back, f);
    }
}
