use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::so3::{Rotation, Vec3};

/// Tolerance for treating two q-vectors (or lengths) as equal.
pub const Q_TOL: f64 = 1e-9;

/// A finite q-space sampling scheme.
///
/// Repeated zero vectors are allowed so raw acquisitions with several b0
/// samples can be represented; nonzero vectors must be distinct. Kernels are
/// only built on fully distinct schemes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct QScheme(Vec<Vec3>);

impl TryFrom<Vec<[f64; 3]>> for QScheme {
    type Error = Error;
    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(v.into_iter().map(Vec3::from).collect())
    }
}

impl From<QScheme> for Vec<[f64; 3]> {
    fn from(q: QScheme) -> Self {
        q.0.iter().map(|v| [v.x, v.y, v.z]).collect()
    }
}

impl QScheme {
    pub fn new(vectors: Vec<Vec3>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(invalid("q-scheme needs at least one vector"));
        }
        if vectors.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(invalid("q-vectors must be finite"));
        }
        for (i, a) in vectors.iter().enumerate() {
            if a.norm() <= Q_TOL {
                continue;
            }
            if vectors[..i].iter().any(|b| (a - b).norm() <= Q_TOL) {
                return Err(invalid(format!("duplicate q-vector {:?}", [a.x, a.y, a.z])));
            }
        }
        Ok(Self(vectors))
    }

    /// The single-point scheme `{0}` used once q-space has been reduced.
    pub fn zero() -> Self {
        Self(vec![Vec3::zeros()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.0
    }

    pub fn get(&self, n: usize) -> &Vec3 {
        &self.0[n]
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.0[n].norm() <= Q_TOL).collect()
    }

    pub fn is_distinct(&self) -> bool {
        self.zero_indices().len() <= 1
    }

    /// Sorted distinct vector lengths.
    pub fn distinct_lengths(&self) -> Vec<f64> {
        let mut l: Vec<f64> = self.0.iter().map(|v| v.norm()).collect();
        l.sort_by(f64::total_cmp);
        l.dedup_by(|a, b| (*a - *b).abs() <= Q_TOL);
        l
    }

    pub fn max_len(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn rotated(&self, g: &Rotation) -> Self {
        Self(self.0.iter().map(|v| g.apply(v)).collect())
    }

    /// Index map `pi` with `g⁻¹ q_n = q_{pi(n)}`, i.e. the source sample of
    /// each rotated sample. Each index prefers itself when it already
    /// matches, which keeps repeated zero vectors in place.
    pub fn preimage_permutation(&self, g: &Rotation) -> Result<Vec<usize>> {
        let ginv = g.inverse();
        let mut used = vec![false; self.len()];
        let mut perm = Vec::with_capacity(self.len());
        for (n, q) in self.0.iter().enumerate() {
            let src = ginv.apply(q);
            let hit = if !used[n] && (self.0[n] - src).norm() <= Q_TOL {
                Some(n)
            } else {
                (0..self.len()).find(|&m| !used[m] && (self.0[m] - src).norm() <= Q_TOL)
            };
            match hit {
                Some(m) => {
                    used[m] = true;
                    perm.push(m);
                }
                None => {
                    return Err(Error::Precondition(format!("q-scheme is not closed under the rotation (sample {n})")))
                }
            }
        }
        Ok(perm)
    }

    pub fn is_closed_under(&self, g: &Rotation) -> bool {
        self.preimage_permutation(g).is_ok()
    }
}

/// Cubic filter support `{-P..=P}³`; offsets enumerate with `x` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PFilterGrid {
    pub radius: usize,
}

impl PFilterGrid {
    pub fn new(radius: usize) -> Self {
        Self { radius }
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn count(&self) -> usize {
        self.side().pow(3)
    }

    /// Offset `(dx, dy, dz)` of flat index `f = ((dz+P) S + (dy+P)) S + (dx+P)`.
    pub fn offset(&self, f: usize) -> [i64; 3] {
        let s = self.side();
        let p = self.radius as i64;
        [(f % s) as i64 - p, ((f / s) % s) as i64 - p, (f / (s * s)) as i64 - p]
    }

    pub fn index(&self, d: [i64; 3]) -> usize {
        let s = self.side() as i64;
        let p = self.radius as i64;
        (((d[2] + p) * s + (d[1] + p)) * s + (d[0] + p)) as usize
    }

    /// Distinct squared offset lengths, ascending, and each offset's index
    /// into that list.
    pub fn radius_classes(&self) -> (Vec<i64>, Vec<usize>) {
        let sq: Vec<i64> = (0..self.count()).map(|f| self.offset(f).iter().map(|d| d * d).sum()).collect();
        let mut uniq = sq.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let idx = sq.iter().map(|s| uniq.binary_search(s).expect("present")).collect();
        (uniq, idx)
    }
}
