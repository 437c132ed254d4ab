//! Convex hulls, minimum-norm points and signed distances to convex polytopes.

use nalgebra::{DMatrix, DVector};

use crate::profile::norm;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine combination of `S` closest to the origin, as coefficients summing to 1.
fn affine_min(pts: &[&[f64]], s: &[usize]) -> Vec<f64> {
    let m = s.len();
    if m == 1 {
        return vec![1.0];
    }
    let d = pts[s[0]].len();
    let s0 = pts[s[0]];
    let b = DMatrix::from_fn(d, m - 1, |r, c| pts[s[c + 1]][r] - s0[r]);
    // Least squares on B itself; the normal equations square its conditioning.
    let rhs = -DVector::from_column_slice(s0);
    let svd = b.clone().svd(true, true);
    let cut = 1e-13 * svd.singular_values.max();
    let mut beta = svd.solve(&rhs, cut).unwrap_or_else(|_| DVector::zeros(m - 1));
    // nalgebra's SVD loses orthogonality for nearly equal singular values; a
    // refinement step recovers full accuracy.
    if let Ok(c) = svd.solve(&(&rhs - &b * &beta), cut) {
        beta += c;
    }
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter());
    alpha
}

fn combine(pts: &[&[f64]], s: &[usize], w: &[f64]) -> Vec<f64> {
    let d = pts[s[0]].len();
    let mut x = vec![0.0; d];
    for (&i, &wi) in s.iter().zip(w) {
        for (xj, pj) in x.iter_mut().zip(pts[i]) {
            *xj += wi * pj;
        }
    }
    x
}

/// Point of `conv(pts)` with minimum Euclidean norm (Wolfe's algorithm).
pub fn min_norm_point(pts: &[&[f64]]) -> Vec<f64> {
    assert!(!pts.is_empty(), "min_norm_point of an empty set");
    let r = pts.iter().map(|p| norm(p)).fold(1e-300, f64::max);
    let start = (0..pts.len())
        .min_by(|&a, &b| dot(pts[a], pts[a]).total_cmp(&dot(pts[b], pts[b])))
        .unwrap();
    let mut s = vec![start];
    let mut lambda = vec![1.0];
    let mut x = pts[start].to_vec();
    for _ in 0..(20 * pts.len() + 100) {
        let (j, v) = (0..pts.len())
            .map(|j| (j, dot(&x, pts[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // (|x|² - v)/|x| bounds how far |x| overstates the distance.
        let xn = norm(&x);
        if xn <= 1e-15 * r || dot(&x, &x) - v <= 1e-13 * r * xn || s.contains(&j) {
            break;
        }
        s.push(j);
        lambda.push(0.0);
        loop {
            let alpha = affine_min(pts, &s);
            if alpha.iter().all(|&a| a > 1e-15) {
                lambda = alpha;
                x = combine(pts, &s, &lambda);
                break;
            }
            let theta = lambda
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= 1e-15)
                .map(|(&l, &a)| if l - a > 0.0 { l / (l - a) } else { 0.0 })
                .fold(1.0f64, f64::min);
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut keep_s = Vec::new();
            let mut keep_l = Vec::new();
            for (&i, &l) in s.iter().zip(&lambda) {
                if l > 1e-15 {
                    keep_s.push(i);
                    keep_l.push(l);
                }
            }
            if keep_s.is_empty() {
                keep_s.push(s[0]);
                keep_l.push(1.0);
            }
            let total: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= total);
            s = keep_s;
            lambda = keep_l;
        }
    }
    x
}

/// Euclidean distance from `q` to `conv(pts)`.
pub fn distance_to_hull(pts: &[&[f64]], q: &[f64]) -> f64 {
    let shifted: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().zip(q).map(|(a, b)| a - b).collect())
        .collect();
    let refs: Vec<&[f64]> = shifted.iter().map(|v| v.as_slice()).collect();
    norm(&min_norm_point(&refs))
}

fn segment_distance(a: &[f64], b: &[f64], q: &[f64]) -> f64 {
    let ab: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let aq: Vec<f64> = q.iter().zip(a).map(|(x, y)| x - y).collect();
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 { (dot(&aq, &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d: Vec<f64> = aq.iter().zip(&ab).map(|(x, y)| x - t * y).collect();
    norm(&d)
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Indices of hull vertices in counter-clockwise order (Andrew's monotone chain).
/// Collinear boundary points are dropped.
pub fn monotone_chain(pts: &[&[f64]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a][0]
            .total_cmp(&pts[b][0])
            .then(pts[a][1].total_cmp(&pts[b][1]))
    });
    idx.dedup_by(|a, b| pts[*a] == pts[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    if hull.len() == 2 && pts[hull[0]] == pts[hull[1]] {
        hull.truncate(1);
    }
    hull
}

/// Indices of extreme points of `conv(pts)` in any dimension.
pub fn extreme_points(pts: &[&[f64]]) -> Vec<usize> {
    if pts.is_empty() {
        return Vec::new();
    }
    match pts[0].len() {
        1 => {
            let lo = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap();
            let hi = (0..pts.len()).max_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap();
            if pts[lo][0] == pts[hi][0] {
                vec![lo]
            } else {
                vec![lo, hi]
            }
        }
        2 => monotone_chain(pts),
        _ => {
            let scale = pts.iter().map(|p| norm(p)).fold(1.0, f64::max);
            (0..pts.len())
                .filter(|&i| {
                    let others: Vec<&[f64]> = (0..pts.len())
                        .filter(|&j| j != i && pts[j] != pts[i])
                        .map(|j| pts[j])
                        .collect();
                    let dup_before = (0..i).any(|j| pts[j] == pts[i]);
                    !dup_before
                        && (others.is_empty() || distance_to_hull(&others, pts[i]) > 1e-10 * scale)
                })
                .collect()
        }
    }
}

/// A convex polytope prepared for repeated distance and depth queries.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    /// Outward unit normals and offsets `(n, c)` with `n·x <= c` inside (2D only).
    edges: Vec<(Vec<f64>, f64)>,
    directions: Vec<Vec<f64>>,
}

impl ConvexBody {
    pub fn new(vertices: Vec<Vec<f64>>) -> Self {
        let dim = vertices.first().map(|v| v.len()).unwrap_or(0);
        let vertices = if dim == 2 && vertices.len() >= 3 {
            let refs: Vec<&[f64]> = vertices.iter().map(|v| v.as_slice()).collect();
            let order = monotone_chain(&refs);
            if order.len() >= 3 {
                order.into_iter().map(|i| vertices[i].clone()).collect()
            } else {
                vertices
            }
        } else {
            vertices
        };
        let mut edges = Vec::new();
        if dim == 2 && vertices.len() >= 3 {
            for i in 0..vertices.len() {
                let a = &vertices[i];
                let b = &vertices[(i + 1) % vertices.len()];
                let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                let len = (ex * ex + ey * ey).sqrt();
                let n = vec![ey / len, -ex / len];
                let c = dot(&n, a);
                edges.push((n, c));
            }
        }
        let directions = if dim >= 3 { sphere_directions(dim, 400) } else { Vec::new() };
        ConvexBody {
            dim,
            vertices,
            edges,
            directions,
        }
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Distance from `q` to the body (0 inside).
    pub fn distance(&self, q: &[f64]) -> f64 {
        if self.dim == 1 {
            let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            return (lo - q[0]).max(q[0] - hi).max(0.0);
        }
        if !self.edges.is_empty() && self.edges.iter().all(|(n, c)| dot(n, q) <= *c) {
            return 0.0;
        }
        if self.dim == 2 {
            let m = self.vertices.len();
            return (0..m)
                .map(|i| segment_distance(&self.vertices[i], &self.vertices[(i + 1) % m], q))
                .fold(f64::INFINITY, f64::min);
        }
        let refs: Vec<&[f64]> = self.vertices.iter().map(|v| v.as_slice()).collect();
        distance_to_hull(&refs, q)
    }

    /// Signed depth: distance to the boundary inside, minus the distance outside.
    /// Exact in one and two dimensions; inside depth uses sampled directions otherwise.
    pub fn depth(&self, q: &[f64]) -> f64 {
        if self.dim == 1 {
            let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            return (q[0] - lo).min(hi - q[0]);
        }
        let outside = self.distance(q);
        let scale = self
            .vertices
            .iter()
            .map(|v| norm(v))
            .fold(norm(q), f64::max)
            .max(1.0);
        if outside > 1e-12 * scale {
            return -outside;
        }
        if self.dim == 2 {
            if self.edges.is_empty() {
                return 0.0;
            }
            return self
                .edges
                .iter()
                .map(|(n, c)| c - dot(n, q))
                .fold(f64::INFINITY, f64::min);
        }
        self.directions
            .iter()
            .map(|u| {
                let h = self
                    .vertices
                    .iter()
                    .map(|v| dot(u, v))
                    .fold(f64::NEG_INFINITY, f64::max);
                h - dot(u, q)
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

/// Deterministic quasi-uniform unit directions (Fibonacci-style in 3D, axis-aligned
/// plus diagonals otherwise).
fn sphere_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 0..dim {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; dim];
            v[j] = s;
            out.push(v);
        }
    }
    if dim == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            out.push(vec![r * th.cos(), r * th.sin(), z]);
        }
    } else {
        for mask in 1..(1u64 << dim.min(12)) {
            let v: Vec<f64> = (0..dim)
                .map(|j| if j < 12 && mask >> j & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let l = norm(&v);
            out.push(v.iter().map(|x| x / l).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_of_segment_and_triangle() {
        let a = [1.0, 1.0];
        let b = [1.0, -1.0];
        let p = min_norm_point(&[&a, &b]);
        assert!((p[0] - 1.0).abs() < 1e-14 && p[1].abs() < 1e-14);
        let c = [-1.0, 0.5];
        let p = min_norm_point(&[&a, &b, &c]);
        assert!(norm(&p) < 1e-12);
        let far = [[3.0, 1.0, 2.0], [3.0, -1.0, 5.0], [4.0, 0.0, 2.0]];
        let refs: Vec<&[f64]> = far.iter().map(|v| v.as_slice()).collect();
        let p = min_norm_point(&refs);
        assert!((p[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn chain_drops_interior_and_collinear() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, 0.0],
            [2.0, 2.0],
            [0.0, 2.0],
            [1.0, 1.0],
        ];
        let refs: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
        let mut h = monotone_chain(&refs);
        h.sort();
        assert_eq!(h, vec![0, 2, 3, 4]);
    }

    #[test]
    fn square_depth() {
        let sq = ConvexBody::new(vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![2.0, 2.0],
            vec![0.0, 2.0],
        ]);
        assert!((sq.depth(&[1.0, 0.5]) - 0.5).abs() < 1e-15);
        assert!((sq.depth(&[3.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((sq.distance(&[3.0, 3.0]) - 2f64.sqrt()).abs() < 1e-12);
        let cube: Vec<Vec<f64>> = (0..8)
            .map(|m| (0..3).map(|j| ((m >> j) & 1) as f64 * 2.0).collect())
            .collect();
        let cube = ConvexBody::new(cube);
        assert!((cube.depth(&[1.0, 1.0, 0.25]) - 0.25).abs() < 1e-12);
        assert!((cube.depth(&[1.0, 1.0, 3.0]) + 1.0).abs() < 1e-10);
    }
}
