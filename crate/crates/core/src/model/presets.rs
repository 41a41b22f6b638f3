//! Named architecture presets with the channel tables of the published
//! configurations. q-schemes are either the full-size templates or small
//! cube-closed schemes for desk-scale runs.

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, PqLayerConfig, QReduction, RadialChoice};
use crate::error::{invalid, Result};
use crate::filter::FilterFamily;
use crate::io::schemes::{axes_corners_scheme, axes_with_zero_scheme, corners_with_zero_scheme, cube_lattice_scheme, fibonacci_scheme, make_octahedral_scheme, OctahedralShell};
use crate::kernel::QScheme;
use crate::so3::TensorType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetScale {
    /// Q = 42 input (zero + 41 directions); gradual stages 27 and 7.
    Full,
    /// Late: 6 axis samples. Gradual: 15 -> 9 -> 7.
    Micro,
}

pub const PRESET_IDS: [&str; 18] = [
    "l_TP1_1+2",
    "l_TP1_1+3",
    "l_TP1_1+4",
    "l_TP1_1+4(l2)",
    "l_TP1_1+4(l3)",
    "l_TP1_1(l2)+4(l2)",
    "l_TP1_1(l3)+4(l3)",
    "l_TPvec_1+4",
    "l_pq-diff-p_1+4",
    "l_pq-diff-q_1+4",
    "l_TP1_1+4_Gfc",
    "l_TP1_1+4_c",
    "l_TP1_1+4_G",
    "l_TP1_1+5",
    "g_TP1_0+3",
    "g_TP1_1+2",
    "g_TP1_1+3",
    "g_TP1_2+1",
];

fn t(c: &[usize]) -> TensorType {
    TensorType::new(c.to_vec())
}

/// `(pq layer, p layers)` of each late layer configuration.
fn late_table(layers: &str) -> Option<(TensorType, Vec<TensorType>)> {
    let r = match layers {
        "1+1+2" => (t(&[5, 3]), vec![t(&[10, 5]), t(&[1])]),
        "1+1+3" => (t(&[5, 3]), vec![t(&[50, 10]), t(&[20, 5]), t(&[1])]),
        "1+1+4" => (t(&[7, 4]), vec![t(&[20, 5]), t(&[10, 3]), t(&[5, 2]), t(&[1])]),
        "1+1+4(l2)" => (t(&[7, 4]), vec![t(&[20, 5, 2]), t(&[10, 3, 1]), t(&[5, 2]), t(&[1])]),
        "1+1+4(l2/l3)" => (t(&[7, 4]), vec![t(&[20, 5, 2, 1]), t(&[10, 3, 1]), t(&[5, 2]), t(&[1])]),
        "1(l2)+1+4(l2)" => (t(&[5, 3, 1]), vec![t(&[20, 5, 2]), t(&[10, 3, 1]), t(&[5, 2]), t(&[1])]),
        "1(l2/l3)+1+4(l2/l3)" => (t(&[5, 3, 1, 1]), vec![t(&[20, 5, 2, 1]), t(&[10, 3, 1]), t(&[5, 2]), t(&[1])]),
        "1+1+5" => (t(&[5, 3]), vec![t(&[20, 5]), t(&[10, 3]), t(&[5, 2]), t(&[3, 1]), t(&[1])]),
        _ => return None,
    };
    Some(r)
}

/// `(pq-1, pq-2, q-reduction, p layers)` of each gradual configuration.
type GradualRow = (Option<TensorType>, Option<TensorType>, TensorType, Vec<TensorType>);

fn gradual_table(layers: &str) -> Option<GradualRow> {
    let r = match layers {
        "0+1+3" => (None, None, t(&[100, 20]), vec![t(&[50, 10]), t(&[10, 5]), t(&[1])]),
        "1+1+2" => (None, Some(t(&[15, 7])), t(&[70, 10]), vec![t(&[20, 5]), t(&[1])]),
        "1+1+3" => (None, Some(t(&[15, 7])), t(&[70, 10]), vec![t(&[20, 5]), t(&[10, 3]), t(&[1])]),
        "2+1+1" => (Some(t(&[3, 2])), Some(t(&[5, 3])), t(&[70, 10]), vec![t(&[1])]),
        _ => return None,
    };
    Some(r)
}

struct Schemes {
    input: QScheme,
    stage1: QScheme,
    stage2: QScheme,
}

fn schemes(scale: PresetScale, reduction: QReduction) -> Result<Schemes> {
    Ok(match (scale, reduction) {
        (PresetScale::Full, _) => Schemes { input: fibonacci_scheme(41, 1.0)?, stage1: cube_lattice_scheme(1.0)?, stage2: axes_with_zero_scheme(1.0)? },
        (PresetScale::Micro, QReduction::Late) => {
            let s = make_octahedral_scheme(OctahedralShell::Axes6, &[1.0], false)?;
            Schemes { input: s.clone(), stage1: s.clone(), stage2: s }
        }
        (PresetScale::Micro, QReduction::Gradual) => {
            Schemes { input: axes_corners_scheme(1.0)?, stage1: corners_with_zero_scheme(1.0)?, stage2: axes_with_zero_scheme(1.0)? }
        }
    })
}

/// Splits an id such as `l_TP1_1+4_Gfc` into its parts.
fn parse_id(id: &str) -> Result<(QReduction, FilterFamily, String, RadialChoice)> {
    let bad = || invalid(format!("unknown preset '{id}'"));
    let (red, rest) = match id.split_once('_') {
        Some(("l", r)) => (QReduction::Late, r),
        Some(("g", r)) => (QReduction::Gradual, r),
        _ => return Err(bad()),
    };
    let (fam, rest) = rest.split_once('_').ok_or_else(bad)?;
    let family = match fam {
        "TP1" => FilterFamily::TpD { d: 1 },
        "TPvec" => FilterFamily::TpVec,
        "pq-diff-p" => FilterFamily::PqDiffP,
        "pq-diff-q" => FilterFamily::PqDiffQ,
        _ => return Err(bad()),
    };
    let (layers, radial) = match rest.rsplit_once('_') {
        Some((l, "Gfc")) => (l, RadialChoice::GaussianFc),
        Some((l, "c")) => (l, RadialChoice::Cosine),
        Some((l, "G")) => (l, RadialChoice::Gaussian),
        _ => (rest, if id == "g_TP1_0+3" { RadialChoice::Gaussian } else { RadialChoice::CosineFc }),
    };
    let layers = match layers {
        "1+4(l3)" => "1+1+4(l2/l3)".to_string(),
        "1(l2)+4(l2)" => "1(l2)+1+4(l2)".to_string(),
        "1(l3)+4(l3)" => "1(l2/l3)+1+4(l2/l3)".to_string(),
        other => {
            let (a, b) = other.split_once('+').ok_or_else(bad)?;
            format!("{a}+1+{b}")
        }
    };
    Ok((red, family, layers, radial))
}

/// Builds a preset config. `P_filter` is 2 (kernel side 5).
pub fn preset(id: &str, scale: PresetScale) -> Result<ModelConfig> {
    if !PRESET_IDS.contains(&id) {
        return Err(invalid(format!("unknown preset '{id}'")));
    }
    let (q_reduction, filter, layers, radial) = parse_id(id)?;
    let s = schemes(scale, q_reduction)?;
    let (pq_layers, q_reduce_tau, p_layers) = match q_reduction {
        QReduction::Late => {
            let (pq, p) = late_table(&layers).ok_or_else(|| invalid(format!("no late table row '{layers}'")))?;
            (vec![PqLayerConfig { tau_out: pq.clone(), q_out: None }], pq, p)
        }
        QReduction::Gradual => {
            let (a, b, qr, p) = gradual_table(&layers).ok_or_else(|| invalid(format!("no gradual table row '{layers}'")))?;
            let mut pq = Vec::new();
            if let Some(a) = a {
                pq.push(PqLayerConfig { tau_out: a, q_out: Some(s.stage1.clone()) });
            }
            if let Some(b) = b {
                pq.push(PqLayerConfig { tau_out: b, q_out: Some(s.stage2.clone()) });
            }
            (pq, qr, p)
        }
    };
    let cfg = ModelConfig {
        name: id.to_string(),
        filter,
        radial,
        q_reduction,
        q_in: s.input,
        pq_layers,
        q_reduce_tau,
        p_layers,
        p_filter: 2,
        mlp_hidden: vec![50, 50, 50],
        ball_mask: false,
        seed: 0,
        byte_budget: None,
    };
    cfg.validate()?;
    Ok(cfg)
}
