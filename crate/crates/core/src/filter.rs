//! Angular bases, filter-channel enumeration and full basis filters
//! `F = R * A` over `(Δp, q_out, q_in)`.

use serde::{Deserialize, Serialize};

use crate::radial::RadialBasisSpec;
use crate::so3::{clebsch_gordan, sph_harm_into, CgTable, Vec3};

/// What an angular filter channel looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AngularKind {
    PDiff,
    QDiff,
    PqDiff,
    Tp { l_p: usize, l_q: usize },
}

impl AngularKind {
    fn rank(&self) -> u8 {
        match self {
            Self::PDiff => 0,
            Self::QDiff => 1,
            Self::PqDiff => 2,
            Self::Tp { .. } => 3,
        }
    }

    pub fn uses_p_radial(&self) -> bool {
        !matches!(self, Self::QDiff)
    }

    pub fn uses_q_radial(&self) -> bool {
        !matches!(self, Self::PDiff)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngularChannel {
    pub l_filter: usize,
    #[serde(flatten)]
    pub kind: AngularKind,
}

impl AngularChannel {
    fn sort_key(&self) -> (usize, usize, usize, u8) {
        let (lp, lq) = match self.kind {
            AngularKind::Tp { l_p, l_q } => (l_p, l_q),
            _ => (0, 0),
        };
        (self.l_filter, lp, lq, self.kind.rank())
    }

    /// Highest spherical-harmonic order evaluated by this channel.
    pub fn max_sh_order(&self) -> usize {
        match self.kind {
            AngularKind::Tp { l_p, l_q } => self.l_filter.max(l_p).max(l_q),
            _ => self.l_filter,
        }
    }
}

impl PartialOrd for AngularChannel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AngularChannel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FilterFamily {
    #[serde(rename = "p-space")]
    PSpace,
    #[serde(rename = "q-space")]
    QSpace,
    #[serde(rename = "pq-diff")]
    PqDiff,
    #[serde(rename = "pq-diff+p")]
    PqDiffP,
    #[serde(rename = "pq-diff+q")]
    PqDiffQ,
    #[serde(rename = "tp-vec")]
    TpVec,
    #[serde(rename = "tp±d")]
    TpD { d: usize },
}

/// The fixed `(l_filter, l_p, l_q)` set of the vector tensor-product family.
pub const TP_VEC_TUPLES: [(usize, usize, usize); 5] = [(0, 0, 0), (1, 1, 1), (1, 0, 1), (1, 1, 0), (2, 2, 2)];

impl FilterFamily {
    pub const ALL_WITH_TP1: [FilterFamily; 7] = [
        Self::PSpace,
        Self::QSpace,
        Self::PqDiff,
        Self::PqDiffP,
        Self::PqDiffQ,
        Self::TpVec,
        Self::TpD { d: 1 },
    ];

    pub fn name(&self) -> String {
        match self {
            Self::PSpace => "p-space".into(),
            Self::QSpace => "q-space".into(),
            Self::PqDiff => "pq-diff".into(),
            Self::PqDiffP => "pq-diff+p".into(),
            Self::PqDiffQ => "pq-diff+q".into(),
            Self::TpVec => "tp-vec".into(),
            Self::TpD { d } => format!("tp±{d}"),
        }
    }

    pub fn uses_q(&self) -> bool {
        !matches!(self, Self::PSpace)
    }
}

/// Every angular channel admissible for an `l_in → l_out` block, in
/// deterministic order.
pub fn enumerate_channels(family: FilterFamily, l_in: usize, l_out: usize) -> Vec<AngularChannel> {
    let lo = l_in.abs_diff(l_out);
    let hi = l_in + l_out;
    let single = |kind: AngularKind| (lo..=hi).map(move |l_filter| AngularChannel { l_filter, kind });
    let mut out: Vec<AngularChannel> = match family {
        FilterFamily::PSpace => single(AngularKind::PDiff).collect(),
        FilterFamily::QSpace => single(AngularKind::QDiff).collect(),
        FilterFamily::PqDiff => single(AngularKind::PqDiff).collect(),
        FilterFamily::PqDiffP => single(AngularKind::PqDiff).chain(single(AngularKind::PDiff)).collect(),
        FilterFamily::PqDiffQ => single(AngularKind::PqDiff).chain(single(AngularKind::QDiff)).collect(),
        FilterFamily::TpVec => TP_VEC_TUPLES
            .iter()
            .filter(|(lf, _, _)| (lo..=hi).contains(lf))
            .map(|&(l_filter, l_p, l_q)| AngularChannel { l_filter, kind: AngularKind::Tp { l_p, l_q } })
            .collect(),
        FilterFamily::TpD { d } => {
            let mut v = Vec::new();
            for l_filter in lo..=hi {
                for l_p in l_filter.saturating_sub(d)..=l_filter + d {
                    for l_q in l_filter.saturating_sub(d)..=l_filter + d {
                        if l_p.abs_diff(l_q) <= l_filter && l_filter <= l_p + l_q {
                            v.push(AngularChannel { l_filter, kind: AngularKind::Tp { l_p, l_q } });
                        }
                    }
                }
            }
            v
        }
    };
    out.sort();
    out
}

/// Family plus the three radial components. Channels of kind `PDiff` ignore
/// the q radials, `QDiff` ignores the p radial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBasisSpec {
    #[serde(flatten)]
    pub family: FilterFamily,
    pub radial_p: RadialBasisSpec,
    pub radial_q_out: RadialBasisSpec,
    pub radial_q_in: RadialBasisSpec,
    /// Euclidean support radius for `Δp`; filters vanish beyond it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_support: Option<f64>,
}

impl FilterBasisSpec {
    /// Radial basis size for a channel kind, `K_p`, `K_qo * K_qi` or their product.
    pub fn radial_size(&self, kind: AngularKind) -> usize {
        let p = if kind.uses_p_radial() { self.radial_p.size() } else { 1 };
        let q = if kind.uses_q_radial() { self.radial_q_out.size() * self.radial_q_in.size() } else { 1 };
        p * q
    }

    /// Radial values `R^(k)` for all `k`, laid out `(k_p, k_qo, k_qi)` row-major.
    pub fn radial_eval(&self, kind: AngularKind, dp: &Vec3, q_out: &Vec3, q_in: &Vec3) -> Vec<f64> {
        let rp = dp.norm();
        if self.p_support.is_some_and(|s| rp > s) {
            return vec![0.0; self.radial_size(kind)];
        }
        let p = if kind.uses_p_radial() { eval(&self.radial_p, rp) } else { vec![1.0] };
        if !kind.uses_q_radial() {
            return p;
        }
        let qo = eval(&self.radial_q_out, q_out.norm());
        let qi = eval(&self.radial_q_in, q_in.norm());
        let mut out = Vec::with_capacity(p.len() * qo.len() * qi.len());
        for a in &p {
            for b in &qo {
                for c in &qi {
                    out.push(a * b * c);
                }
            }
        }
        out
    }
}

fn eval(spec: &RadialBasisSpec, x: f64) -> Vec<f64> {
    let mut v = vec![0.0; spec.size()];
    spec.eval_into(x, &mut v);
    v
}

fn sh(l: usize, v: &Vec3) -> Vec<f64> {
    let mut out = vec![0.0; 2 * l + 1];
    sph_harm_into(l, v, &mut out);
    out
}

/// Angular part `A^(c_filter)` as a length `2 l_filter + 1` vector.
pub fn angular_eval(ch: &AngularChannel, dp: &Vec3, q_out: &Vec3, q_in: &Vec3) -> Vec<f64> {
    match ch.kind {
        AngularKind::PDiff => sh(ch.l_filter, dp),
        AngularKind::QDiff => sh(ch.l_filter, &(q_out - q_in)),
        AngularKind::PqDiff => sh(ch.l_filter, &(dp - (q_out - q_in))),
        AngularKind::Tp { l_p, l_q } => {
            let cg = clebsch_gordan(l_p, l_q, ch.l_filter);
            tp_contract(&cg, &sh(l_p, dp), &sh(l_q, &(q_out - q_in)))
        }
    }
}

/// Same as [`angular_eval`] with CG tensors drawn from a prebuilt table.
pub fn angular_eval_with(table: &CgTable, ch: &AngularChannel, dp: &Vec3, q_out: &Vec3, q_in: &Vec3) -> Vec<f64> {
    match ch.kind {
        AngularKind::Tp { l_p, l_q } => {
            tp_contract(table.get(l_p, l_q, ch.l_filter), &sh(l_p, dp), &sh(l_q, &(q_out - q_in)))
        }
        _ => angular_eval(ch, dp, q_out, q_in),
    }
}

fn tp_contract(cg: &crate::so3::CgTensor, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (d, d1, d2) = cg.dims();
    (0..d)
        .map(|m| {
            let mut s = 0.0;
            for (m1, x) in a.iter().enumerate().take(d1) {
                for (m2, y) in b.iter().enumerate().take(d2) {
                    s += cg.at(m, m1, m2) * x * y;
                }
            }
            s
        })
        .collect()
}

/// Basis filter `F^(c_filter, k)` at continuous coordinates.
pub fn filter_eval(spec: &FilterBasisSpec, ch: &AngularChannel, k: usize, dp: &Vec3, q_out: &Vec3, q_in: &Vec3) -> Vec<f64> {
    let r = spec.radial_eval(ch.kind, dp, q_out, q_in)[k];
    angular_eval(ch, dp, q_out, q_in).into_iter().map(|a| r * a).collect()
}
