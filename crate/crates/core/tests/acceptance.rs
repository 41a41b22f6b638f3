//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run alone with `cargo test --release --test acceptance`; set
//! `ACCEPTANCE_ONLY=3,7` to run a subset.

use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use eqdmri::audit::{act_on_field, Interpolation, ModelProbe, Output, RigidMotion};
use eqdmri::cli::{run, Cli};
use eqdmri::conv::Precision;
use eqdmri::field::Field;
use eqdmri::filter::{FilterBasisSpec, FilterFamily};
use eqdmri::io::phantom::{generate_phantom, Diffusivities, Phantom, PhantomSpec, SchemeChoice};
use eqdmri::kernel::{steerability_check, BasisOptions, KernelBasis, PFilterGrid, QScheme};
use eqdmri::layers::{pq_conv, pq_conv_reference};
use eqdmri::model::{
    average_precision, dice, preset, roc_auc, train_toy, Baseline, Model, ModelConfig, PqLayerConfig, PresetScale, QReduction, RadialChoice, Sample,
    PRESET_IDS,
};
use eqdmri::radial::{MlpRadial, RadialBasisSpec};
use eqdmri::so3::{clebsch_gordan, sph_harm, tensor_product, wigner_d, Rotation, SphericalTensor, TensorType, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::from_vec(gauss_vec(rng, 3)).normalize()
}

// 1 ------------------------------------------------------------------------

fn algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let draws = 100;
    let (mut sh, mut hom, mut orth, mut tp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let g = Rotation::random(&mut rng);
        let h = Rotation::random(&mut rng);
        let n = random_unit(&mut rng);
        for l in 0..=3 {
            let lhs = sph_harm(l, &g.apply(&n));
            let rhs = sph_harm(l, &n).rotate(&g);
            sh = sh.max(max_abs_diff(lhs.components(), rhs.components()));
            let (dg, dh) = (wigner_d(l, &g), wigner_d(l, &h));
            hom = hom.max((wigner_d(l, &g.compose(&h)) - &dg * &dh).amax());
            orth = orth.max((&dg * dg.transpose() - nalgebra::DMatrix::identity(2 * l + 1, 2 * l + 1)).amax());
        }
        let l1: usize = rng.random_range(0..=3);
        let l2: usize = rng.random_range(0..=3);
        let l = rng.random_range(l1.abs_diff(l2)..=(l1 + l2).min(3));
        let a = SphericalTensor::from_vec(l1, gauss_vec(&mut rng, 2 * l1 + 1)).unwrap();
        let b = SphericalTensor::from_vec(l2, gauss_vec(&mut rng, 2 * l2 + 1)).unwrap();
        let lhs = tensor_product(&a.rotate(&g), &b.rotate(&g), l);
        let rhs = tensor_product(&a, &b, l).rotate(&g);
        tp = tp.max(max_abs_diff(lhs.components(), rhs.components()));
    }
    // Coupling selection rules: the triangle rule, and in the real basis
    // |m| ∈ {|m1| + |m2|, ||m1| - |m2||} (the image of m = m1 + m2).
    let mut cg_violation = 0.0f64;
    let mut triangle_nonzero = 0;
    for _ in 0..draws {
        let (l1, l2, l) = (rng.random_range(0..=3), rng.random_range(0..=3), rng.random_range(0..=6usize));
        let c = clebsch_gordan(l1, l2, l);
        let allowed = l1.abs_diff(l2) <= l && l <= l1 + l2;
        if !allowed {
            if !c.is_zero() {
                triangle_nonzero += 1;
            }
            continue;
        }
        for m in 0..2 * l + 1 {
            for m1 in 0..2 * l1 + 1 {
                for m2 in 0..2 * l2 + 1 {
                    let (am, a1, a2) = ((m as i64 - l as i64).abs(), (m1 as i64 - l1 as i64).abs(), (m2 as i64 - l2 as i64).abs());
                    if am != a1 + a2 && am != (a1 - a2).abs() {
                        cg_violation = cg_violation.max(c.at(m, m1, m2).abs());
                    }
                }
            }
        }
    }
    let worst = sh.max(hom).max(orth).max(tp).max(cg_violation);
    check(
        worst <= 1e-10 && triangle_nonzero == 0,
        format!("SH {sh:.1e}, D hom {hom:.1e}, D orth {orth:.1e}, TP {tp:.1e}, CG m-rule {cg_violation:.1e}, triangle violations {triangle_nonzero}"),
    )
}

// 2 ------------------------------------------------------------------------

fn basis_spec(family: FilterFamily, radial_p: RadialBasisSpec) -> FilterBasisSpec {
    FilterBasisSpec {
        family,
        radial_p,
        radial_q_out: RadialBasisSpec::gaussian(2, 1.0),
        radial_q_in: RadialBasisSpec::gaussian(2, 1.0),
        p_support: None,
    }
}

fn steerability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let ty_in = TensorType::new(vec![1, 1, 1]);
    let ty_out = TensorType::new(vec![2, 1, 1]);
    let q = QScheme::zero();
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for family in FilterFamily::ALL_WITH_TP1 {
        let mut fam_worst = 0.0f64;
        let mut draws = 0;
        for learnable in [false, true] {
            let radial = if learnable {
                RadialBasisSpec::Mlp(MlpRadial::init(RadialBasisSpec::cosine(2, 2.0), &[6, 5], 2, &mut rng))
            } else {
                RadialBasisSpec::gaussian(3, 2.0)
            };
            let b = KernelBasis::precompute(&basis_spec(family, radial), &ty_in, &ty_out, &q, &q, PFilterGrid::new(0), BasisOptions::default())
                .map_err(|e| e.to_string())?;
            let w = gauss_vec(&mut rng, b.n_weights());
            let kf = |dp: &Vec3, qo: &Vec3, qi: &Vec3| b.eval_continuous(&w, None, dp, qo, qi);
            for _ in 0..20 {
                let g = Rotation::random(&mut rng);
                fam_worst = fam_worst.max(steerability_check(kf, &ty_out, &ty_in, &g, 10, 2.0, 1.0, &mut rng));
                draws += 10;
            }
        }
        parts.push(format!("{} {fam_worst:.1e} ({draws})", family.name()));
        worst = worst.max(fam_worst);
    }
    check(worst <= 1e-9, parts.join(", "))
}

// 3 ------------------------------------------------------------------------

fn random_scheme(rng: &mut ChaCha8Rng, n: usize) -> QScheme {
    let mut v = Vec::with_capacity(n);
    if rng.random_bool(0.5) {
        v.push(Vec3::zeros());
    }
    while v.len() < n {
        v.push(random_unit(rng) * rng.random_range(0.3..1.0));
    }
    QScheme::new(v).unwrap()
}

fn random_type(rng: &mut ChaCha8Rng) -> TensorType {
    loop {
        let c: Vec<usize> = (0..=2).map(|_| rng.random_range(0..=2)).collect();
        if c.iter().any(|&n| n > 0) {
            return TensorType::new(c);
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let instances = 50;
    let mut worst = 0.0f64;
    for i in 0..instances {
        let family = FilterFamily::ALL_WITH_TP1[i % 7];
        let p_filter = rng.random_range(0..=2);
        let radial = match rng.random_range(0..3) {
            0 => RadialBasisSpec::gaussian(2, p_filter.max(1) as f64),
            1 => RadialBasisSpec::cosine(2, p_filter.max(1) as f64),
            _ => RadialBasisSpec::Mlp(MlpRadial::init(RadialBasisSpec::cosine(2, 2.0), &[4], 2, &mut rng)),
        };
        let (q_in, q_out) = if family.uses_q() {
            {
            let (ni, no) = (rng.random_range(1..=6), rng.random_range(1..=6));
            (random_scheme(&mut rng, ni), random_scheme(&mut rng, no))
        }
        } else {
            (QScheme::zero(), QScheme::zero())
        };
        let (ty_in, ty_out) = (random_type(&mut rng), random_type(&mut rng));
        let spec = FilterBasisSpec {
            family,
            radial_p: radial.clone(),
            radial_q_out: RadialBasisSpec::gaussian(2, 1.0),
            radial_q_in: RadialBasisSpec::gaussian(2, 1.0),
            p_support: None,
        };
        let b = KernelBasis::precompute(&spec, &ty_in, &ty_out, &q_in, &q_out, PFilterGrid::new(p_filter), BasisOptions::default())
            .map_err(|e| e.to_string())?;
        let w = gauss_vec(&mut rng, b.n_weights());
        let dims = [rng.random_range(2..=7), rng.random_range(2..=7), rng.random_range(2..=7)];
        let n = ty_in.dim() * dims.iter().product::<usize>() * q_in.len();
        let x = Field::new(ty_in.clone(), dims, q_in.clone(), gauss_vec(&mut rng, n)).unwrap();
        let radial_ref = b.is_deferred().then_some(&radial);
        let fast = pq_conv(&b.assemble(&w, radial_ref).map_err(|e| e.to_string())?, &x).map_err(|e| e.to_string())?;
        let slow = pq_conv_reference(&b, &w, radial_ref, &x).map_err(|e| e.to_string())?;
        let num: f64 = fast.data().iter().zip(slow.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = slow.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(if den > 0.0 { num / den } else { num });
    }
    check(worst <= 1e-10, format!("{instances} instances, max relative difference {worst:.1e}"))
}

// 4 ------------------------------------------------------------------------

fn cube_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut parts = Vec::new();
    let mut ok = true;
    for id in ["l_TP1_1+2", "g_TP1_1+2"] {
        let m = Model::build(preset(id, PresetScale::Micro).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let mut p = m.init_params(4);
        for g in m.groups().iter().filter(|g| g.name.ends_with(".bias")) {
            for v in &mut p[g.range()] {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        let q = m.config.q_in.clone();
        let x = Field::new(TensorType::scalars(1), [7, 7, 7], q.clone(), (0..343 * q.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        for (precision, tol) in [(Precision::Double, 1e-10), (Precision::Single, 1e-4)] {
            let probe = ModelProbe { model: &m, params: &p, precision, output: Output::Logits };
            let r = probe.cube_report(&x).map_err(|e| e.to_string())?;
            ok &= r.entries.len() == 24 && r.max_error <= tol;
            parts.push(format!("{id} {precision:?} {:.1e}", r.max_error));
        }
    }
    check(ok, parts.join(", "))
}

// 5 ------------------------------------------------------------------------

fn continuous_rotation() -> Outcome {
    let scheme = SchemeChoice::Fibonacci { n: 12, radius: 1.0, with_zero: true };
    let cfg = ModelConfig {
        name: "continuous-audit".into(),
        filter: FilterFamily::TpD { d: 1 },
        radial: RadialChoice::Gaussian,
        q_reduction: QReduction::Late,
        q_in: scheme.build().map_err(|e| e.to_string())?,
        pq_layers: vec![PqLayerConfig { tau_out: TensorType::new(vec![3, 2]), q_out: None }],
        q_reduce_tau: TensorType::new(vec![3, 2]),
        p_layers: vec![TensorType::scalars(1)],
        p_filter: 1,
        mlp_hidden: vec![],
        ball_mask: false,
        seed: 1,
        byte_budget: None,
    };
    let m = Model::build(cfg).map_err(|e| e.to_string())?;
    let p = m.init_params(2);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let motions: Vec<RigidMotion> = (0..3).map(|_| RigidMotion::rotation(Rotation::random(&mut rng))).collect();
    let mut errs = Vec::new();
    for n in [9usize, 17, 33] {
        let spec = PhantomSpec {
            dims: [n; 3],
            seed: 5,
            q_scheme: scheme.clone(),
            b_scale: 1.0,
            diffusivities: Diffusivities::default(),
            fiber_direction: None,
            fiber_bend: 0.3,
            lesions: 3,
            lesion_radius: [0.25, 0.45],
            edge_width: 0.3,
            noise: 0.0,
            rotation: None,
            rotate_q: false,
        };
        let ph = generate_phantom(&spec).map_err(|e| e.to_string())?;
        let probe = ModelProbe { model: &m, params: &p, precision: Precision::Double, output: Output::Logits };
        let mut e = 0.0f64;
        for mo in &motions {
            let crop = probe.default_crop(mo, Interpolation::Trilinear);
            e = e.max(probe.error(&ph.field, mo, Interpolation::Trilinear, &crop).map_err(|e| e.to_string())?);
        }
        errs.push(e);
    }
    let ok = errs[1] <= 1.1 * errs[0] && errs[2] <= 1.1 * errs[1] && errs[2] <= 0.05;
    check(ok, format!("max relative error 9³ {:.2e}, 17³ {:.2e}, 33³ {:.2e}", errs[0], errs[1], errs[2]))
}

// 6 ------------------------------------------------------------------------

/// Unit direction on `support` and a central-difference step for it.
///
/// The direction mixes a random unit vector with the analytic gradient
/// direction on the support, which keeps the directional derivative well
/// above the roundoff floor of the difference quotient. The loss is not
/// differentiable where a radial MLP ReLU switches, so the step is the
/// largest candidate for which no ReLU switches within `±2 step`.
fn smooth_direction(m: &Model, p: &[f64], grad: &[f64], support: std::ops::Range<usize>, rng: &mut ChaCha8Rng) -> std::result::Result<(Vec<f64>, f64), String> {
    const STEPS: [f64; 5] = [1e-5, 3e-6, 1e-6, 3e-7, 1e-7];
    if support.is_empty() {
        return Err("empty direction support".into());
    }
    let signs = |q: &[f64]| -> std::result::Result<Vec<bool>, String> {
        Ok(m.mlp_preactivations(q).map_err(|e| e.to_string())?.iter().map(|&a| a > 0.0).collect())
    };
    let at = signs(p)?;
    let gn = grad[support.clone()].iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..100 {
        let r = gauss_vec(rng, support.len());
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = vec![0.0; p.len()];
        for ((vi, ri), gi) in v[support.clone()].iter_mut().zip(&r).zip(&grad[support.clone()]) {
            *vi = ri / rn + if gn > 0.0 { gi / gn } else { 0.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // On a one-parameter support the two parts can cancel.
        if norm < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let moved = |t: f64| p.iter().zip(&v).map(|(a, b)| a + t * b).collect::<Vec<_>>();
        for h in STEPS {
            if signs(&moved(2.0 * h))? == at && signs(&moved(-2.0 * h))? == at {
                return Ok((v, h));
            }
        }
    }
    Err("no direction avoids the MLP switching points".into())
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let draws = 20;
    let mut worst = 0.0f64;
    let mut worst_id = String::new();
    for id in PRESET_IDS {
        let m = Model::build(preset(id, PresetScale::Micro).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let q = m.config.q_in.clone();
        let groups: Vec<_> = m.groups().iter().filter(|g| g.len > 0).cloned().collect();
        for d in 0..draws {
            let mut p = m.init_params(d as u64);
            for g in &groups {
                if g.name.ends_with(".bias") {
                    p[g.range()].iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
                } else if g.name.ends_with(".mlp") {
                    p[g.range()].iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
                }
            }
            let s = Sample {
                input: Field::new(TensorType::scalars(1), [7, 7, 7], q.clone(), (0..343 * q.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap(),
                labels: (0..343).map(|_| f64::from(rng.random_bool(0.3))).collect(),
                mask: (0..343).map(|_| rng.random_bool(0.9)).collect(),
            };
            let (_, grad) = m.loss_and_grad(&p, &s, 2.0).map_err(|e| e.to_string())?;
            // One direction over all parameters and one within a single group,
            // so every group is checked on its own across the draws.
            let group = &groups[d % groups.len()];
            let mut supports = vec![0..p.len(), group.range()];
            supports.dedup();
            for support in supports {
                let (v, h) = smooth_direction(&m, &p, &grad, support, &mut rng)?;
                let analytic: f64 = grad.iter().zip(&v).map(|(a, b)| a * b).sum();
                let shifted = |t: f64| -> std::result::Result<f64, String> {
                    let q: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                    m.loss(&q, &s, 2.0).map_err(|e| e.to_string())
                };
                // Central differences at h and 2h, Richardson-extrapolated to
                // cancel the h² truncation term on strongly curved directions.
                let d1 = (shifted(h)? - shifted(-h)?) / (2.0 * h);
                let d2 = (shifted(2.0 * h)? - shifted(-2.0 * h)?) / (4.0 * h);
                let fd = (4.0 * d1 - d2) / 3.0;
                let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-300);
                if !rel.is_finite() {
                    return Err(format!("{id} draw {d}: non-finite check (fd {fd}, analytic {analytic})"));
                }
                if rel > worst {
                    worst = rel;
                    worst_id = format!("{id} draw {d}");
                }
            }
        }
    }
    check(worst <= 1e-5, format!("{} presets x {draws} draws, max relative error {worst:.1e} ({worst_id})", PRESET_IDS.len()))
}

// 7 ------------------------------------------------------------------------

fn toy_phantom(seed: u64) -> PhantomSpec {
    PhantomSpec {
        dims: [11; 3],
        seed,
        q_scheme: SchemeChoice::Octahedral { points: 6, radii: vec![1.0], with_zero: false },
        b_scale: 1.0,
        diffusivities: Diffusivities::default(),
        fiber_direction: Some([1.0, 0.0, 0.0]),
        fiber_bend: 0.2,
        lesions: 4,
        lesion_radius: [0.25, 0.45],
        edge_width: 0.0,
        noise: 0.02,
        rotation: None,
        rotate_q: false,
    }
}

fn to_sample(p: Phantom) -> Sample {
    Sample { input: p.field, labels: p.labels, mask: p.mask }
}

fn rotate_sample(s: &Sample, g: &Rotation) -> Sample {
    let m = RigidMotion::rotation(*g);
    let d = s.input.dims();
    let act = |v: Vec<f64>| act_on_field(&Field::new(TensorType::scalars(1), d, QScheme::zero(), v).unwrap(), &m, Interpolation::ExactGrid).unwrap().into_data();
    Sample {
        input: act_on_field(&s.input, &m, Interpolation::ExactGrid).unwrap(),
        labels: act(s.labels.clone()),
        mask: act(s.mask.iter().map(|&b| f64::from(b)).collect()).iter().map(|&v| v != 0.0).collect(),
    }
}

fn mean_dice(pred: impl Fn(&Sample) -> Vec<f64>, set: &[Sample]) -> f64 {
    set.iter().map(|s| dice(&pred(s), &s.labels, &s.mask).unwrap()).sum::<f64>() / set.len() as f64
}

fn toy_reproduction() -> Outcome {
    let train: Vec<Sample> = (0..8).map(|i| to_sample(generate_phantom(&toy_phantom(100 + i)).unwrap())).collect();
    let test: Vec<Sample> = (0..4).map(|i| to_sample(generate_phantom(&toy_phantom(900 + i)).unwrap())).collect();
    let group = Rotation::cube_group();
    let rotated: Vec<Sample> = test.iter().flat_map(|s| group.iter().skip(1).step_by(4).map(move |g| rotate_sample(s, g))).collect();
    let pw = eqdmri::model::pos_weight(&train).map_err(|e| e.to_string())?;
    let steps = 1500;

    let m = Model::build(preset("l_TP1_1+2", PresetScale::Micro).unwrap()).unwrap();
    let eq = train_toy(&m, m.init_params(1), &train, steps, 0.01, pw).map_err(|e| e.to_string())?;
    let pe = |s: &Sample| m.predict(&eq.params, &s.input).unwrap().into_data();
    let (eq_test, eq_rot) = (mean_dice(pe, &test), mean_dice(pe, &rotated));

    let b = Baseline::matched(train[0].input.q().clone(), 2, m.n_params()).map_err(|e| e.to_string())?;
    let base = train_toy(&b, b.init_params(1), &train, steps, 0.05, pw).map_err(|e| e.to_string())?;
    let pb = |s: &Sample| b.predict(&base.params, s).unwrap();
    let (b_test, b_rot) = (mean_dice(pb, &test), mean_dice(pb, &rotated));

    let (eq_drop, b_drop) = (eq_test - eq_rot, b_test - b_rot);
    // Without a trained model both drops would be trivially zero.
    let learned = eq_test >= 0.6;
    check(
        eq_drop <= 0.02 && b_drop > eq_drop && learned,
        format!(
            "equivariant ({} params) Dice {eq_test:.3} -> {eq_rot:.3} (drop {eq_drop:.3}); baseline ({} params) Dice {b_test:.3} -> {b_rot:.3} (drop {b_drop:.3})",
            m.n_params(),
            b.n_params()
        ),
    )
}

// 8 ------------------------------------------------------------------------

/// Expected `τ` rows (input, each layer) and q rows at full scale, written
/// out independently of the preset module.
fn expected_rows(id: &str) -> (Vec<[usize; 4]>, Vec<usize>) {
    let late = |pq: [usize; 4], p: &[[usize; 4]]| {
        let mut r = vec![[1, 0, 0, 0], pq, pq];
        r.extend_from_slice(p);
        (r, vec![42, 42])
    };
    match id {
        "l_TP1_1+2" => late([5, 3, 0, 0], &[[10, 5, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1+3" => late([5, 3, 0, 0], &[[50, 10, 0, 0], [20, 5, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1+4" | "l_TPvec_1+4" | "l_pq-diff-p_1+4" | "l_pq-diff-q_1+4" | "l_TP1_1+4_Gfc" | "l_TP1_1+4_c" | "l_TP1_1+4_G" => {
            late([7, 4, 0, 0], &[[20, 5, 0, 0], [10, 3, 0, 0], [5, 2, 0, 0], [1, 0, 0, 0]])
        }
        "l_TP1_1+4(l2)" => late([7, 4, 0, 0], &[[20, 5, 2, 0], [10, 3, 1, 0], [5, 2, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1+4(l3)" => late([7, 4, 0, 0], &[[20, 5, 2, 1], [10, 3, 1, 0], [5, 2, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1(l2)+4(l2)" => late([5, 3, 1, 0], &[[20, 5, 2, 0], [10, 3, 1, 0], [5, 2, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1(l3)+4(l3)" => late([5, 3, 1, 1], &[[20, 5, 2, 1], [10, 3, 1, 0], [5, 2, 0, 0], [1, 0, 0, 0]]),
        "l_TP1_1+5" => late([5, 3, 0, 0], &[[20, 5, 0, 0], [10, 3, 0, 0], [5, 2, 0, 0], [3, 1, 0, 0], [1, 0, 0, 0]]),
        "g_TP1_0+3" => (vec![[1, 0, 0, 0], [100, 20, 0, 0], [50, 10, 0, 0], [10, 5, 0, 0], [1, 0, 0, 0]], vec![42]),
        "g_TP1_1+2" => (vec![[1, 0, 0, 0], [15, 7, 0, 0], [70, 10, 0, 0], [20, 5, 0, 0], [1, 0, 0, 0]], vec![42, 7]),
        "g_TP1_1+3" => (vec![[1, 0, 0, 0], [15, 7, 0, 0], [70, 10, 0, 0], [20, 5, 0, 0], [10, 3, 0, 0], [1, 0, 0, 0]], vec![42, 7]),
        "g_TP1_2+1" => (vec![[1, 0, 0, 0], [3, 2, 0, 0], [5, 3, 0, 0], [70, 10, 0, 0], [1, 0, 0, 0]], vec![42, 27, 7]),
        other => panic!("no expected table for {other}"),
    }
}

fn preset_fidelity() -> Outcome {
    let mut bad = Vec::new();
    for id in PRESET_IDS {
        let c = preset(id, PresetScale::Full).map_err(|e| e.to_string())?;
        let rows: Vec<[usize; 4]> = c.tau_rows().iter().map(|t| t.padded(4).try_into().expect("padded to 4")).collect();
        let (want_tau, want_q) = expected_rows(id);
        if rows != want_tau || c.q_rows() != want_q {
            bad.push(format!("{id}: got {rows:?} / {:?}", c.q_rows()));
        }
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{} presets match", PRESET_IDS.len()) } else { bad.join("; ") })
}

// 9 ------------------------------------------------------------------------

fn brute_force(pred: &[f64], labels: &[f64], mask: &[bool]) -> (f64, f64, f64) {
    let pts: Vec<(f64, bool)> = pred.iter().zip(labels).zip(mask).filter(|(_, &m)| m).map(|((&p, &y), _)| (p, y >= 0.5)).collect();
    let pos: Vec<f64> = pts.iter().filter(|p| p.1).map(|p| p.0).collect();
    let neg: Vec<f64> = pts.iter().filter(|p| !p.1).map(|p| p.0).collect();
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    let auc = wins / (pos.len() * neg.len()) as f64;
    let mut thresholds: Vec<f64> = pts.iter().map(|p| p.0).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let tp = pts.iter().filter(|p| p.0 >= t && p.1).count() as f64;
        let fp = pts.iter().filter(|p| p.0 >= t && !p.1).count() as f64;
        let recall = tp / pos.len() as f64;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    let tp = pts.iter().filter(|p| p.0 >= 0.5 && p.1).count() as f64;
    let fp = pts.iter().filter(|p| p.0 >= 0.5 && !p.1).count() as f64;
    let fneg = pts.iter().filter(|p| p.0 < 0.5 && p.1).count() as f64;
    let dice = if tp + fp + fneg == 0.0 { 1.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
    (auc, ap, dice)
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 100 {
        let coarse = rng.random_bool(0.5);
        let pred: Vec<f64> = (0..20).map(|_| if coarse { (rng.random_range(0.0..1.0f64) * 5.0).round() / 5.0 } else { rng.random_range(0.0..1.0) }).collect();
        let labels: Vec<f64> = (0..20).map(|_| f64::from(rng.random_bool(0.4))).collect();
        let mask: Vec<bool> = (0..20).map(|_| rng.random_bool(0.85)).collect();
        let kept: Vec<f64> = labels.iter().zip(&mask).filter(|(_, &m)| m).map(|(&y, _)| y).collect();
        if !kept.contains(&1.0) || !kept.contains(&0.0) {
            continue;
        }
        let (auc, ap, d) = brute_force(&pred, &labels, &mask);
        let got = [roc_auc(&pred, &labels, &mask), average_precision(&pred, &labels, &mask), dice(&pred, &labels, &mask)];
        let got: Vec<f64> = got.into_iter().collect::<eqdmri::Result<_>>().map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&got, &[auc, ap, d]));
        cases += 1;
    }
    check(worst <= 1e-12, format!("{cases} cases, max deviation {worst:.1e}"))
}

// 10 -----------------------------------------------------------------------

fn cli(args: &[&str]) -> std::result::Result<i32, String> {
    let mut full = vec!["eqdmri"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn pipeline(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let spec = serde_json::json!({
        "count": 2,
        "base": {
            "dims": [7, 7, 7], "seed": 21,
            "q_scheme": {"kind": "octahedral", "points": 6, "radii": [1.0], "with_zero": false},
            "b_scale": 1.0, "fiber_bend": 0.2, "lesions": 2, "lesion_radius": [0.3, 0.5], "noise": 0.02
        }
    });
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(dir.join("set.json"), spec.to_string()).map_err(|e| e.to_string())?;
    let steps: [Vec<String>; 4] = [
        vec!["gen".into(), "--spec".into(), p("set.json"), "--out".into(), p("data")],
        vec!["preset".into(), "--id".into(), "l_TP1_1+2".into(), "--out".into(), p("model.json")],
        vec!["train".into(), "--config".into(), p("model.json"), "--data".into(), p("data"), "--steps".into(), "4".into(), "--lr".into(), "0.01".into(), "--out".into(), p("p.sep")],
        vec!["audit".into(), "--config".into(), p("model.json"), "--params".into(), p("p.sep"), "--in".into(), p("data/scan_000.qstf"), "--mode".into(), "cube".into(), "--report".into(), p("report.json")],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        let code = cli(&args)?;
        if code != 0 {
            return Err(format!("`{}` exited with {code}", s[0]));
        }
    }
    let mut files = Vec::new();
    for name in ["data/scan_000.qstf", "data/labels_001.qstf", "model.json", "p.sep", "p.csv", "report.json"] {
        files.push((name.to_string(), std::fs::read(dir.join(name)).map_err(|e| e.to_string())?));
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    check(differing.is_empty(), if differing.is_empty() { format!("{} artifacts byte-identical", fa.len()) } else { format!("differing: {differing:?}") })
}

// --------------------------------------------------------------------------

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Duration, fn() -> Outcome); 10] = [
        (1, "algebra suite", Duration::from_secs(30), algebra),
        (2, "filter steerability", Duration::from_secs(120), steerability),
        (3, "oracle equivalence", Duration::from_secs(300), oracle_equivalence),
        (4, "exact-grid equivariance", Duration::from_secs(300), cube_equivariance),
        (5, "continuous-rotation audit", Duration::from_secs(600), continuous_rotation),
        (6, "gradient correctness", Duration::from_secs(600), gradients),
        (7, "directional toy reproduction", Duration::from_secs(1800), toy_reproduction),
        (8, "preset fidelity", Duration::from_secs(60), preset_fidelity),
        (9, "metrics oracle", Duration::from_secs(60), metrics_oracle),
        (10, "determinism", Duration::from_secs(300), determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {}s budget", budget.as_secs())),
            Err(d) => (false, d),
        };
        println!("criterion {n:>2} {name}: {} [{:.1}s] {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
