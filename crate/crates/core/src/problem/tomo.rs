//! Parallel-beam tomography: a Siddon-style ray/pixel projector and the
//! modified (Toft) Shepp–Logan phantom.
//!
//! The image is a `side × side` grid of unit pixels centred at the origin.
//! Pixel `(row, col)` covers `x ∈ [col − side/2, col + 1 − side/2]` and
//! `y ∈ [side/2 − row − 1, side/2 − row]` (row 0 at the top), and is stored at
//! flat index `row · side + col`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{make_inconsistent_problem, LsProblem, ProblemError};
use crate::linalg::DualSparseMatrix;

/// `(intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees)`
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Phantom intensity at `(u, v) ∈ [−1, 1]²`, clamped to `[0, 1]`.
pub fn shepp_logan_value(u: f64, v: f64) -> f64 {
    let mut acc = 0.0;
    for &(amp, a, b, x0, y0, deg) in &ELLIPSES {
        let (s, c) = deg.to_radians().sin_cos();
        let (dx, dy) = (u - x0, v - y0);
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
            acc += amp;
        }
    }
    acc.clamp(0.0, 1.0)
}

/// The phantom sampled at pixel centres, flattened row-major.
pub fn shepp_logan(side: usize) -> Vec<f64> {
    let h = side as f64 / 2.0;
    let mut out = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let u = (col as f64 + 0.5 - h) / h;
            let v = (h - row as f64 - 0.5) / h;
            out.push(shepp_logan_value(u, v));
        }
    }
    out
}

/// Ray set: one ray per `(angle, detector offset)` pair, angle-major.
///
/// A ray at angle `θ` and offset `t` is the line `t·(−sin θ, cos θ) + λ(cos θ, sin θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    pub side: usize,
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl BeamGeometry {
    /// `n_angles` equispaced angles in `[0, π)` and `n_detectors` bin centres
    /// spanning the image diagonal.
    pub fn standard(side: usize, n_angles: usize, n_detectors: usize) -> Self {
        let half = side as f64 * std::f64::consts::SQRT_2 / 2.0;
        let width = 2.0 * half / n_detectors as f64;
        Self {
            side,
            angles: (0..n_angles)
                .map(|a| a as f64 * PI / n_angles as f64)
                .collect(),
            offsets: (0..n_detectors)
                .map(|k| -half + (k as f64 + 0.5) * width)
                .collect(),
        }
    }

    pub fn n_rays(&self) -> usize {
        self.angles.len() * self.offsets.len()
    }
}

/// Pixel intersection lengths of one ray, sorted by pixel index.
pub(crate) fn ray_intersections(side: usize, theta: f64, offset: f64) -> Vec<(usize, f64)> {
    const AXIS_EPS: f64 = 1e-12;
    let h = side as f64 / 2.0;
    let (s, c) = theta.sin_cos();
    let dir = [c, s];
    let origin = [-s * offset, c * offset];

    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if dir[k].abs() < AXIS_EPS {
            if origin[k] <= -h || origin[k] >= h {
                return Vec::new();
            }
        } else {
            let a = (-h - origin[k]) / dir[k];
            let b = (h - origin[k]) / dir[k];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if hi <= lo {
        return Vec::new();
    }

    let mut cuts = vec![lo, hi];
    for k in 0..2 {
        if dir[k].abs() < AXIS_EPS {
            continue;
        }
        for q in 0..=side {
            let l = (-h + q as f64 - origin[k]) / dir[k];
            if l > lo && l < hi {
                cuts.push(l);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);

    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = origin[0] + mid * dir[0];
        let y = origin[1] + mid * dir[1];
        let col = ((x + h).floor() as isize).clamp(0, side as isize - 1) as usize;
        let row = ((h - y).floor() as isize).clamp(0, side as isize - 1) as usize;
        *acc.entry(row * side + col).or_insert(0.0) += len;
    }
    acc.into_iter().collect()
}

pub fn parallel_beam_matrix(geom: &BeamGeometry) -> Result<DualSparseMatrix, ProblemError> {
    let mut triplets = Vec::new();
    let mut ray = 0;
    for &theta in &geom.angles {
        for &t in &geom.offsets {
            for (pix, len) in ray_intersections(geom.side, theta, t) {
                triplets.push((ray, pix, len));
            }
            ray += 1;
        }
    }
    Ok(DualSparseMatrix::from_triplets(
        geom.n_rays(),
        geom.side * geom.side,
        &triplets,
    )?)
}

/// Tomography instance: `b = A·phantom + r` with `r ∈ ℛ(A)^⊥`.
pub fn gen_parallel_beam(
    image_side: usize,
    n_angles: usize,
    n_detectors: usize,
    seed: u64,
) -> Result<LsProblem, ProblemError> {
    if image_side < 4 {
        return Err(ProblemError::InvalidParameter(format!(
            "image side must be at least 4, got {image_side}"
        )));
    }
    if n_angles == 0 || n_detectors == 0 {
        return Err(ProblemError::InvalidParameter(
            "need at least one angle and one detector".into(),
        ));
    }
    let geom = BeamGeometry::standard(image_side, n_angles, n_detectors);
    let a = parallel_beam_matrix(&geom)?;
    let phantom = shepp_logan(image_side);

    // reuse the projection machinery, then swap the Gaussian x̂ for the phantom
    let base = make_inconsistent_problem(a, seed)?;
    let r = base.r.expect("generator sets r");
    let ax = base.a.matvec(&phantom);
    let b: Vec<f64> = ax.iter().zip(&r).map(|(p, q)| p + q).collect();
    let x_star = crate::linalg::direct_least_squares(&base.a, &b)?;
    let problem = LsProblem {
        a: base.a,
        b,
        x_star: Some(x_star),
        r: Some(r),
        label: format!("tomo-{image_side}-a{n_angles}-d{n_detectors}-s{seed}"),
    };
    problem.check_invariants()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, Matrix};

    /// Liang–Barsky clip of the ray against one pixel box.
    fn clip_length(side: usize, theta: f64, t: f64, row: usize, col: usize) -> f64 {
        let h = side as f64 / 2.0;
        let (s, c) = theta.sin_cos();
        let (ox, oy) = (-s * t, c * t);
        let (x0, x1) = (col as f64 - h, col as f64 + 1.0 - h);
        let (y0, y1) = (h - row as f64 - 1.0, h - row as f64);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (o, d, a, b) in [(ox, c, x0, x1), (oy, s, y0, y1)] {
            if d.abs() < 1e-12 {
                if o <= a || o >= b {
                    return 0.0;
                }
            } else {
                let (p, q) = ((a - o) / d, (b - o) / d);
                lo = lo.max(p.min(q));
                hi = hi.min(p.max(q));
            }
        }
        (hi - lo).max(0.0)
    }

    #[test]
    fn horizontal_ray_through_two_by_two() {
        // y = 0.5 crosses the top pixel row
        let row = ray_intersections(2, 0.0, 0.5);
        assert_eq!(row.len(), 2);
        assert_eq!(row[0].0, 0);
        assert_eq!(row[1].0, 1);
        assert!((row[0].1 - 1.0).abs() < 1e-14 && (row[1].1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_hot_projections_sum_to_pixel_value() {
        let side = 4;
        let geom = BeamGeometry {
            side,
            angles: vec![0.0, PI / 2.0],
            offsets: vec![-1.5, -0.5, 0.5, 1.5],
        };
        let a: Matrix = parallel_beam_matrix(&geom).unwrap().into();
        for pix in [0, 5, 10, 15] {
            let mut img = vec![0.0; side * side];
            img[pix] = 0.7;
            let sino = a.matvec(&img);
            let at0: f64 = sino[..4].iter().sum();
            let at90: f64 = sino[4..].iter().sum();
            assert!((at0 - 0.7).abs() < 1e-12, "{at0}");
            assert!((at90 - 0.7).abs() < 1e-12, "{at90}");
        }
    }

    #[test]
    fn siddon_matches_brute_force_clip() {
        let side = 16;
        let geom = BeamGeometry::standard(side, 24, 24);
        let a: Matrix = parallel_beam_matrix(&geom).unwrap().into();
        let phantom = shepp_logan(side);
        let sino = a.matvec(&phantom);
        let mut ray = 0;
        for &theta in &geom.angles {
            for &t in &geom.offsets {
                let mut brute = 0.0;
                for row in 0..side {
                    for col in 0..side {
                        let len = clip_length(side, theta, t, row, col);
                        brute += len * phantom[row * side + col];
                        let stored = a.get(ray, row * side + col);
                        assert!((stored - len).abs() < 1e-9, "ray {ray} pixel ({row},{col})");
                    }
                }
                assert!((sino[ray] - brute).abs() < 1e-9);
                ray += 1;
            }
        }
    }

    #[test]
    fn rows_nonnegative_and_bounded() {
        let side = 12;
        let a: Matrix = parallel_beam_matrix(&BeamGeometry::standard(side, 17, 19))
            .unwrap()
            .into();
        let diag = side as f64 * std::f64::consts::SQRT_2;
        for i in 0..a.rows() {
            let row: Vec<(usize, f64)> = a.row(i).entries().collect();
            assert!(row.iter().all(|&(_, v)| v >= 0.0));
            let s: f64 = row.iter().map(|e| e.1).sum();
            assert!(s <= diag + 1e-9);
        }
    }

    #[test]
    fn phantom_properties() {
        for side in [9, 11, 17] {
            let img = shepp_logan(side);
            let mid = side / 2;
            // (0,0): inside the skull and brain ellipses only, 1 − 0.8
            assert!((img[mid * side + mid] - 0.2).abs() < 1e-12);
            assert_eq!(img[0], 0.0);
            assert_eq!(img[side * side - 1], 0.0);
        }
        let img = shepp_logan(16);
        assert_eq!(img, shepp_logan(16));
        assert!(img.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn generator_builds_valid_problem() {
        let p = gen_parallel_beam(8, 10, 12, 3).unwrap();
        assert_eq!(p.rows(), 120);
        assert_eq!(p.cols(), 64);
        p.check_invariants().unwrap();
        assert!(gen_parallel_beam(3, 10, 10, 0).is_err());
    }

    #[test]
    fn oracle_solution_is_the_phantom_at_full_rank() {
        let p = gen_parallel_beam(16, 24, 24, 5).unwrap();
        let rank = crate::linalg::row_space_projector(&p.a).unwrap().rank();
        assert_eq!(rank, 256);
        let phantom = shepp_logan(16);
        let xs = p.x_star.unwrap();
        let gap = linalg::norm(&linalg::sub(&xs, &phantom)) / linalg::norm(&phantom);
        assert!(gap < 1e-9, "{gap}");
    }
}
