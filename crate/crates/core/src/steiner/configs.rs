//! Vortex configurations clustered near the vertices of an equilateral
//! triangle inscribed in the unit circle.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, TAU};

/// Vertex `k` of the triangle, starting at `i`.
pub fn triangle_vertex(k: usize) -> Complex64 {
    Complex64::from_polar(1.0, FRAC_PI_2 + TAU * k as f64 / 3.0)
}

/// Two points at distance `r` from `x`, at `+-60` degrees from direction
/// `dir`, so that they meet the ray back along `-dir` at 120 degrees.
fn fork(x: Complex64, dir: f64, r: f64) -> [Complex64; 2] {
    [x + Complex64::from_polar(r, dir + FRAC_PI_3), x + Complex64::from_polar(r, dir - FRAC_PI_3)]
}

/// Six points, two at distance `eps` from each triangle vertex. The tree made
/// of the three radii and the six short forks has length `3 + 6 eps`.
pub fn six_point_cluster(eps: f64) -> Vec<Complex64> {
    (0..3)
        .flat_map(|k| {
            let y = triangle_vertex(k);
            fork(y, y.arg(), eps)
        })
        .collect()
}

/// Nine points: forks of length `eps` at the first two vertices, each fork
/// end split again into two points at distance `delta`, and the third vertex
/// itself. The connected competitor has length `3 + 4 eps + 8 delta`.
pub fn nine_point_cluster(eps: f64, delta: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(9);
    for k in 0..2 {
        let y = triangle_vertex(k);
        for (x, s) in fork(y, y.arg(), eps).into_iter().zip([1.0, -1.0]) {
            out.extend(fork(x, y.arg() + s * FRAC_PI_3, delta));
        }
    }
    out.push(triangle_vertex(2));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_sit_at_the_stated_distances() {
        let six = six_point_cluster(0.05);
        for (i, p) in six.iter().enumerate() {
            assert!(((p - triangle_vertex(i / 2)).norm() - 0.05).abs() < 1e-14);
        }
        let nine = nine_point_cluster(0.05, 0.005);
        assert_eq!(nine.len(), 9);
        for p in &nine[..8] {
            let d = (0..2).map(|k| (p - triangle_vertex(k)).norm()).fold(f64::INFINITY, f64::min);
            assert!(d > 0.05 - 0.005 - 1e-12 && d < 0.05 + 0.005 + 1e-12);
        }
    }
}
