use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::so3::{Rotation, TensorType, Vec3, WignerSet};

/// Random point in the ball of radius `r`.
fn in_ball<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Vec3 {
    let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    let n = v.norm().max(1e-300);
    v / n * r * rng.random::<f64>().cbrt()
}

/// Random `(Δp, q_out, q_in)` triple with `|Δp| <= p_max` and `|q| <= q_max`.
pub fn random_coordinates<R: Rng + ?Sized>(rng: &mut R, p_max: f64, q_max: f64) -> (Vec3, Vec3, Vec3) {
    (in_ball(rng, p_max), in_ball(rng, q_max), in_ball(rng, q_max))
}

/// Max over `samples` of
/// `|K(RΔp, Rq_out, Rq_in) - D_out K(Δp, q_out, q_in) D_inᵀ| / |K(Δp, q_out, q_in)|`
/// (Frobenius norms). Samples with a vanishing kernel contribute their
/// absolute error instead.
pub fn steerability_check<F, R>(
    kernel: F,
    ty_out: &TensorType,
    ty_in: &TensorType,
    g: &Rotation,
    samples: usize,
    p_max: f64,
    q_max: f64,
    rng: &mut R,
) -> f64
where
    F: Fn(&Vec3, &Vec3, &Vec3) -> DMatrix<f64>,
    R: Rng + ?Sized,
{
    let w = WignerSet::new(g, ty_out.max_order().max(ty_in.max_order()));
    let d_out = w.block_diag(ty_out);
    let d_in = w.block_diag(ty_in);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (dp, qo, qi) = random_coordinates(rng, p_max, q_max);
        let k = kernel(&dp, &qo, &qi);
        let lhs = kernel(&g.apply(&dp), &g.apply(&qo), &g.apply(&qi));
        let rhs = &d_out * &k * d_in.transpose();
        let err = (lhs - rhs).norm();
        let scale = k.norm();
        worst = worst.max(if scale > 1e-12 { err / scale } else { err });
    }
    worst
}
