//! Exact convex-polygon clipping against unit tiles.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{invalid, Result};
use crate::Rational;

pub type Point2 = [Rational; 2];

/// Convex polygon with exact rational vertices in counter-clockwise order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPolygon {
    vertices: Vec<Point2>,
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> Rational {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

impl RationalPolygon {
    /// Accepts a convex, counter-clockwise vertex list; consecutive duplicates
    /// are dropped.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let poly = Self::from_unchecked(vertices);
        let n = poly.vertices.len();
        for i in 0..n {
            let c = cross(
                &poly.vertices[i],
                &poly.vertices[(i + 1) % n],
                &poly.vertices[(i + 2) % n],
            );
            if c.is_negative() {
                return invalid("polygon is not convex and counter-clockwise");
            }
        }
        Ok(poly)
    }

    fn from_unchecked(mut vertices: Vec<Point2>) -> Self {
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self { vertices }
    }

    pub fn from_integer_points(points: &[[i64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| [int(p[0]), int(p[1])]).collect())
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Axis-aligned bounding box `[min, max]`.
    pub fn bounds(&self) -> Option<[Point2; 2]> {
        let first = self.vertices.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for v in &self.vertices[1..] {
            for d in 0..2 {
                if v[d] < lo[d] {
                    lo[d] = v[d].clone();
                }
                if v[d] > hi[d] {
                    hi[d] = v[d].clone();
                }
            }
        }
        Some([lo, hi])
    }

    pub fn translate(&self, by: [i64; 2]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [&v[0] + int(by[0]), &v[1] + int(by[1])])
                .collect(),
        }
    }
}

/// Shoelace area (nonnegative).
pub fn area(poly: &RationalPolygon) -> Rational {
    let v = &poly.vertices;
    if v.len() < 3 {
        return Rational::zero();
    }
    let twice: Rational = (0..v.len())
        .map(|i| {
            let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
            &a[0] * &b[1] - &b[0] * &a[1]
        })
        .sum();
    twice.abs() / int(2)
}

/// Image of the unit square under a positive unimodular matrix:
/// `M(0,0), M(1,0), M(1,1), M(0,1)`.
pub fn image_parallelogram(m: [[i64; 2]; 2]) -> Result<RationalPolygon> {
    if m.iter().flatten().any(|&e| e <= 0) {
        return invalid(format!("matrix {m:?} must have positive entries"));
    }
    if m[0][0] * m[1][1] - m[0][1] * m[1][0] != 1 {
        return invalid(format!("matrix {m:?} must have determinant 1"));
    }
    RationalPolygon::from_integer_points(&[
        [0, 0],
        [m[0][0], m[1][0]],
        [m[0][0] + m[0][1], m[1][0] + m[1][1]],
        [m[0][1], m[1][1]],
    ])
}

/// Keeps the part of `poly` on the side `sign·(coord − bound) ≤ 0`.
fn clip_half_plane(vertices: &[Point2], axis: usize, bound: &Rational, keep_below: bool) -> Vec<Point2> {
    let inside = |p: &Point2| if keep_below { p[axis] <= *bound } else { p[axis] >= *bound };
    let mut out = Vec::with_capacity(vertices.len() + 2);
    for i in 0..vertices.len() {
        let cur = &vertices[i];
        let prev = &vertices[(i + vertices.len() - 1) % vertices.len()];
        let (ci, pi) = (inside(cur), inside(prev));
        if ci != pi {
            let t = (bound - &prev[axis]) / (&cur[axis] - &prev[axis]);
            let other = 1 - axis;
            let mut p: Point2 = [Rational::zero(), Rational::zero()];
            p[axis] = bound.clone();
            p[other] = &prev[other] + &t * (&cur[other] - &prev[other]);
            out.push(p);
        }
        if ci {
            out.push(cur.clone());
        }
    }
    out
}

/// Intersection of a convex polygon with the closed tile
/// `[k₁, k₁+1] × [k₂, k₂+1]`, or `None` when fewer than three vertices remain.
pub fn clip_to_tile(poly: &RationalPolygon, tile: [i64; 2]) -> Option<RationalPolygon> {
    let mut v = poly.vertices.clone();
    for axis in 0..2 {
        let lo = int(tile[axis]);
        let hi = int(tile[axis] + 1);
        if v.is_empty() {
            break;
        }
        v = clip_half_plane(&v, axis, &lo, false);
        if v.is_empty() {
            break;
        }
        v = clip_half_plane(&v, axis, &hi, true);
    }
    let out = RationalPolygon::from_unchecked(v);
    (out.vertices.len() >= 3).then_some(out)
}

/// Tile offsets hit by the image of the unit square under `m`, each with the
/// area of overlap as its probability. Zero-area overlaps are dropped.
pub fn jump_distribution(m: [[i64; 2]; 2]) -> Result<Vec<([i64; 2], Rational)>> {
    let para = image_parallelogram(m)?;
    polygon_tile_masses(&para)
}

/// Overlap area of `poly` with every tile meeting its bounding box.
pub fn polygon_tile_masses(poly: &RationalPolygon) -> Result<Vec<([i64; 2], Rational)>> {
    let Some([lo, hi]) = poly.bounds() else {
        return Ok(Vec::new());
    };
    let floor = |r: &Rational| r.floor().to_integer().to_i64();
    let ceil = |r: &Rational| r.ceil().to_integer().to_i64();
    let (Some(x0), Some(y0), Some(x1), Some(y1)) = (floor(&lo[0]), floor(&lo[1]), ceil(&hi[0]), ceil(&hi[1])) else {
        return invalid("polygon coordinates out of range");
    };
    let mut out = Vec::new();
    for ky in y0..y1.max(y0 + 1) {
        for kx in x0..x1.max(x0 + 1) {
            if let Some(piece) = clip_to_tile(poly, [kx, ky]) {
                let a = area(&piece);
                if !a.is_zero() {
                    out.push(([kx, ky], a));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    const A0: [[i64; 2]; 2] = [[2, 1], [1, 1]];
    const A1: [[i64; 2]; 2] = [[3, 1], [2, 1]];

    #[test]
    fn areas() {
        let sq = RationalPolygon::from_integer_points(&[[0, 0], [1, 0], [1, 1], [0, 1]]).unwrap();
        assert_eq!(area(&sq), r(1, 1));
        let tri = RationalPolygon::from_integer_points(&[[0, 0], [1, 0], [0, 1]]).unwrap();
        assert_eq!(area(&tri), r(1, 2));
        let flat = RationalPolygon::from_integer_points(&[[0, 0], [1, 1], [2, 2]]).unwrap();
        assert_eq!(area(&flat), Rational::zero());
    }

    #[test]
    fn parallelogram_vertices() {
        let p = image_parallelogram(A0).unwrap();
        let want = RationalPolygon::from_integer_points(&[[0, 0], [2, 1], [3, 2], [1, 1]]).unwrap();
        assert_eq!(p, want);
        assert_eq!(area(&p), Rational::one());
        assert!(image_parallelogram([[1, 0], [0, 1]]).is_err());
        assert!(image_parallelogram([[2, 1], [1, 2]]).is_err());
    }

    #[test]
    fn clipping() {
        let sq = RationalPolygon::from_integer_points(&[[0, 0], [1, 0], [1, 1], [0, 1]]).unwrap();
        let same = clip_to_tile(&sq, [0, 0]).unwrap();
        assert_eq!(area(&same), Rational::one());
        assert!(clip_to_tile(&sq, [3, 3]).is_none());
        // shares only an edge with the neighbour
        assert!(clip_to_tile(&sq, [1, 0]).is_none());

        let p0 = image_parallelogram(A0).unwrap();
        assert_eq!(area(&clip_to_tile(&p0, [0, 0]).unwrap()), r(1, 4));
        let p1 = image_parallelogram(A1).unwrap();
        assert_eq!(area(&clip_to_tile(&p1, [0, 0]).unwrap()), r(1, 6));
    }

    #[test]
    fn example_jump_distributions() {
        for (m, s) in [(A0, r(1, 4)), (A1, r(1, 6))] {
            let jd = jump_distribution(m).unwrap();
            let stay = jd.iter().find(|(k, _)| *k == [0, 0]).unwrap().1.clone();
            assert_eq!(stay, s);
            let total: Rational = jd.iter().map(|(_, p)| p.clone()).sum();
            assert_eq!(total, Rational::one());
            assert!(jd.iter().all(|(_, p)| p.is_positive()));
        }
        let jd0 = jump_distribution(A0).unwrap();
        let offsets: Vec<[i64; 2]> = jd0.iter().map(|(k, _)| *k).collect();
        assert_eq!(offsets, vec![[0, 0], [1, 0], [1, 1], [2, 1]]);
    }

    fn unimodular() -> impl Strategy<Value = [[i64; 2]; 2]> {
        // positive det-1 matrices: products of the generators [[1,1],[0,1]] and [[1,0],[1,1]]
        proptest::collection::vec(any::<bool>(), 2..9).prop_filter_map("needs both generators", |word| {
            if !word.contains(&true) || !word.contains(&false) {
                return None;
            }
            let mut m = [[1i64, 0], [0, 1]];
            for up in word {
                let g = if up { [[1, 1], [0, 1]] } else { [[1, 0], [1, 1]] };
                m = [
                    [m[0][0] * g[0][0] + m[0][1] * g[1][0], m[0][0] * g[0][1] + m[0][1] * g[1][1]],
                    [m[1][0] * g[0][0] + m[1][1] * g[1][0], m[1][0] * g[0][1] + m[1][1] * g[1][1]],
                ];
            }
            m.iter().flatten().all(|&e| e > 0).then_some(m)
        })
    }

    proptest! {
        #[test]
        fn mass_partitions_exactly(m in unimodular()) {
            let jd = jump_distribution(m).unwrap();
            let total: Rational = jd.iter().map(|(_, p)| p.clone()).sum();
            prop_assert_eq!(total, Rational::one());
            let para = image_parallelogram(m).unwrap();
            for (k, p) in &jd {
                let piece = clip_to_tile(&para, *k).unwrap();
                prop_assert!(area(&piece) <= area(&para));
                prop_assert_eq!(&area(&piece), p);
            }
        }

        #[test]
        fn translation_shifts_offsets(m in unimodular(), dx in -5i64..5, dy in -5i64..5) {
            let para = image_parallelogram(m).unwrap();
            let base = polygon_tile_masses(&para).unwrap();
            let moved = polygon_tile_masses(&para.translate([dx, dy])).unwrap();
            let shifted: Vec<([i64; 2], Rational)> =
                base.into_iter().map(|(k, p)| ([k[0] + dx, k[1] + dy], p)).collect();
            prop_assert_eq!(moved, shifted);
        }
    }
}
