//! Seeded synthetic volumes with smooth regions and sharp edges.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Volume;

pub const PHANTOM_MIN_EXTENT: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Overlapping balls of constant intensity on a smooth background.
    Spheres,
    /// Oblique intensity ramps cut by a few planar steps.
    Ramps,
    /// Nested ellipsoids in the style of the Shepp-Logan head, jittered by seed.
    SheppLike,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 3] = [Self::Spheres, Self::Ramps, Self::SheppLike];
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spheres => "spheres",
            Self::Ramps => "ramps",
            Self::SheppLike => "shepp_like",
        })
    }
}

impl FromStr for PhantomKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spheres" => Ok(Self::Spheres),
            "ramps" => Ok(Self::Ramps),
            "shepp_like" | "shepp-like" => Ok(Self::SheppLike),
            other => Err(Error::invalid(format!("unknown phantom kind '{other}' (spheres, ramps, shepp_like)"))),
        }
    }
}

/// Edge profile one voxel wide: 1 inside, 0 outside.
fn soft_step(signed_distance: f64) -> f64 {
    (0.5 - signed_distance).clamp(0.0, 1.0)
}

struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
    /// Rotation about z.
    angle: f64,
    value: f64,
}

impl Ellipsoid {
    /// Approximate signed distance in voxels (negative inside).
    fn distance(&self, p: [f64; 3]) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy, dz) = (p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]);
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        let q = ((u / self.radii[0]).powi(2) + (v / self.radii[1]).powi(2) + (dz / self.radii[2]).powi(2)).sqrt();
        (q - 1.0) * self.radii.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn field(kind: PhantomKind, ext: [usize; 3], rng: &mut ChaCha8Rng) -> impl Fn([f64; 3]) -> f64 {
    let size = ext.map(|e| e as f64);
    let min_side = size.iter().cloned().fold(f64::INFINITY, f64::min);
    let bg: [f64; 3] = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let background = move |p: [f64; 3]| {
        0.15 + 0.1
            * ((bg[0] * p[0] / size[0] * 3.0 + phase).sin()
                * (bg[1] * p[1] / size[1] * 3.0).cos()
                * (0.5 + 0.5 * (bg[2] * p[2] / size[2] * 3.0).cos()))
    };
    let shapes: Vec<Ellipsoid> = match kind {
        PhantomKind::Spheres => (0..rng.gen_range(6..10))
            .map(|_| {
                let r = rng.gen_range(0.08..0.22) * min_side;
                Ellipsoid {
                    center: size.map(|s| rng.gen_range(0.2..0.8) * s),
                    radii: [r; 3],
                    angle: 0.0,
                    value: rng.gen_range(0.3..0.9) * if rng.gen_bool(0.2) { -0.5 } else { 1.0 },
                }
            })
            .collect(),
        PhantomKind::SheppLike => {
            // (centre, radii) as fractions of the half extents, then intensity.
            const BASE: [([f64; 3], [f64; 3], f64, f64); 7] = [
                ([0.0, 0.0, 0.0], [0.69, 0.92, 0.81], 0.0, 0.8),
                ([0.0, -0.018, 0.0], [0.662, 0.874, 0.78], 0.0, -0.6),
                ([0.22, 0.0, 0.0], [0.11, 0.31, 0.22], -0.31, -0.15),
                ([-0.22, 0.0, 0.0], [0.16, 0.41, 0.28], 0.31, -0.15),
                ([0.0, 0.35, -0.15], [0.21, 0.25, 0.41], 0.0, 0.25),
                ([0.0, 0.1, 0.25], [0.046, 0.046, 0.05], 0.0, 0.3),
                ([-0.08, -0.605, 0.0], [0.046, 0.023, 0.05], 0.0, 0.3),
            ];
            BASE.iter()
                .map(|&(c, r, a, v)| {
                    let j = |x: f64, rng: &mut ChaCha8Rng| x + rng.gen_range(-0.03..0.03);
                    Ellipsoid {
                        center: [
                            (1.0 + j(c[0], rng)) * size[0] / 2.0,
                            (1.0 + j(c[1], rng)) * size[1] / 2.0,
                            (1.0 + j(c[2], rng)) * size[2] / 2.0,
                        ],
                        radii: [r[0] * size[0] / 2.0, r[1] * size[1] / 2.0, r[2] * size[2] / 2.0],
                        angle: a + rng.gen_range(-0.1..0.1),
                        value: v,
                    }
                })
                .collect()
        }
        PhantomKind::Ramps => Vec::new(),
    };
    // Ramps: oriented linear gradients plus planar steps.
    let planes: Vec<([f64; 3], f64, f64)> = if kind == PhantomKind::Ramps {
        (0..4)
            .map(|_| {
                let n: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(1e-3);
                let n = n.map(|v| v / len);
                (n, rng.gen_range(0.3..0.7), rng.gen_range(0.15..0.35))
            })
            .collect()
    } else {
        Vec::new()
    };
    move |p: [f64; 3]| {
        let mut v = background(p);
        for e in &shapes {
            v += e.value * soft_step(e.distance(p));
        }
        for (n, offset, step) in &planes {
            let t = (0..3).map(|a| n[a] * (p[a] / size[a] - 0.5)).sum::<f64>() + 0.5;
            v += 0.4 * t + step * soft_step((offset - t) * min_side);
        }
        v
    }
}

/// Deterministic phantom of `extents = [w, h, d]`, normalized to span `[0, 1]`.
pub fn generate_phantom(kind: PhantomKind, extents: [usize; 3], seed: u64) -> Result<Volume> {
    if extents.iter().any(|&e| e < PHANTOM_MIN_EXTENT) {
        return Err(Error::invalid(format!("phantom extents {extents:?} must all be at least {PHANTOM_MIN_EXTENT}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let f = field(kind, extents, &mut rng);
    let [w, h, d] = extents;
    let mut raw = Vec::with_capacity(w * h * d);
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                raw.push(f([x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5]));
            }
        }
    }
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let voxels = raw.iter().map(|v| ((v - lo) / span) as f32).collect();
    Volume::new(w, h, d, voxels, [1.0; 3])
}
