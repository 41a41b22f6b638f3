//! q-scheme generators.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::QScheme;
use crate::so3::Vec3;

/// Point sets with full cube symmetry, before scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OctahedralShell {
    /// `±e_x, ±e_y, ±e_z`.
    Axes6,
    /// Axes plus the 8 cube corners `(±1,±1,±1)/√3`.
    Axes14,
    /// Axes, corners and the 12 edge midpoints `(±1,±1,0)/√2`, all unit length.
    Full26,
}

impl OctahedralShell {
    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            6 => Ok(Self::Axes6),
            14 => Ok(Self::Axes14),
            26 => Ok(Self::Full26),
            _ => Err(invalid(format!("no octahedral shell with {n} points (use 6, 14 or 26)"))),
        }
    }

    pub fn unit_points(self) -> Vec<Vec3> {
        let axes = || (0..3).flat_map(|i| [1.0, -1.0].map(move |s| unit(i) * s));
        let corners = || cube_points(|v| v.iter().all(|&c| c != 0.0)).into_iter().map(|v| v.normalize());
        let edges = || cube_points(|v| v.iter().filter(|&&c| c != 0.0).count() == 2).into_iter().map(|v| v.normalize());
        match self {
            Self::Axes6 => axes().collect(),
            Self::Axes14 => axes().chain(corners()).collect(),
            Self::Full26 => axes().chain(corners()).chain(edges()).collect(),
        }
    }
}

fn unit(i: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[i] = 1.0;
    v
}

/// Points of `{-1,0,1}³` matching `keep`, in lexicographic `(z, y, x)` order.
fn cube_points(keep: impl Fn(&Vec3) -> bool) -> Vec<Vec3> {
    let mut out = Vec::new();
    for z in -1..=1 {
        for y in -1..=1 {
            for x in -1..=1 {
                let v = Vec3::new(x as f64, y as f64, z as f64);
                if keep(&v) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Union of octahedrally symmetric shells, one per radius, optionally
/// preceded by the zero vector.
pub fn make_octahedral_scheme(shell: OctahedralShell, radii: &[f64], with_zero: bool) -> Result<QScheme> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(invalid("shell radii must be positive"));
    }
    let mut v = Vec::new();
    if with_zero {
        v.push(Vec3::zeros());
    }
    for &r in radii {
        v.extend(shell.unit_points().into_iter().map(|p| p * r));
    }
    QScheme::new(v)
}

/// The 27-point lattice `{-1,0,1}³ * scale` (zero, axes, edges, corners).
pub fn cube_lattice_scheme(scale: f64) -> Result<QScheme> {
    QScheme::new(cube_points(|_| true).into_iter().map(|v| v * scale).collect())
}

/// Zero, the 6 axes and the 8 corners of `{-1,0,1}³ * scale` (15 points).
pub fn axes_corners_scheme(scale: f64) -> Result<QScheme> {
    let pts = cube_points(|v| {
        let nz = v.iter().filter(|&&c| c != 0.0).count();
        nz != 2
    });
    QScheme::new(pts.into_iter().map(|v| v * scale).collect())
}

/// Zero plus the 8 cube corners `(±1,±1,±1) * scale` (9 points).
pub fn corners_with_zero_scheme(scale: f64) -> Result<QScheme> {
    QScheme::new(cube_points(|v| v.iter().all(|&c| c != 0.0) || v.iter().all(|&c| c == 0.0)).into_iter().map(|v| v * scale).collect())
}

/// Zero plus the 6 axes scaled by `scale` (7 points).
pub fn axes_with_zero_scheme(scale: f64) -> Result<QScheme> {
    make_octahedral_scheme(OctahedralShell::Axes6, &[scale], true)
}

/// `n` near-uniform directions on a sphere of radius `radius` (golden-spiral).
pub fn fibonacci_shell(n: usize, radius: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect()
}

/// Zero vector followed by a single Fibonacci shell.
pub fn fibonacci_scheme(n_dirs: usize, radius: f64) -> Result<QScheme> {
    let mut v = vec![Vec3::zeros()];
    v.extend(fibonacci_shell(n_dirs, radius));
    QScheme::new(v)
}
