//! Corner landmarks of a single bright rectangle.
//!
//! Threshold, largest 4-connected component, convex hull of its pixel
//! squares, minimum-area enclosing rectangle by rotating calipers.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{sort_counterclockwise, Image};
use crate::linalg::Vec2;
use crate::{Error, Result};

const MIN_COMPONENT_PIXELS: usize = 16;

/// Linear-interpolated percentile of already sorted values, `pct ∈ [0, 100]`.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Threshold halfway between the 10th and 99th percentile.
pub fn foreground_threshold(image: &Image) -> f64 {
    let mut sorted = image.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    0.5 * (percentile(&sorted, 10.0) + percentile(&sorted, 99.0))
}

/// Pixel indices of the largest 4-connected component of `mask`; ties go to
/// the component found first in row-major order.
fn largest_component(mask: &[bool], n: usize) -> Vec<usize> {
    let mut label = vec![false; mask.len()];
    let mut best: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        let mut comp = Vec::new();
        label[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            let (i, j) = (p / n, p % n);
            let mut visit = |q: usize| {
                if mask[q] && !label[q] {
                    label[q] = true;
                    queue.push_back(q);
                }
            };
            if i > 0 {
                visit(p - n);
            }
            if i + 1 < n {
                visit(p + n);
            }
            if j > 0 {
                visit(p - 1);
            }
            if j + 1 < n {
                visit(p + 1);
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

#[inline]
fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counterclockwise convex hull without collinear points (monotone chain).
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Minimum-area enclosing rectangle of a convex polygon given
/// counterclockwise, by rotating calipers. Returns the four corners and the
/// area.
pub fn min_area_rectangle(hull: &[Vec2]) -> Option<([Vec2; 4], f64)> {
    let h = hull.len();
    if h < 3 {
        return None;
    }
    let at = |k: usize| hull[k % h];
    let dot = |a: Vec2, b: Vec2| a[0] * b[0] + a[1] * b[1];
    let sub = |a: Vec2, b: Vec2| [a[0] - b[0], a[1] - b[1]];

    let mut best: Option<([Vec2; 4], f64)> = None;
    let (mut right, mut top, mut left) = (1usize, 1usize, 1usize);
    for i in 0..h {
        let e = sub(at(i + 1), at(i));
        let len = libm::hypot(e[0], e[1]);
        if len == 0.0 {
            continue;
        }
        let d = [e[0] / len, e[1] / len];
        let nrm = [-d[1], d[0]];
        right = right.max(i + 1);
        while dot(sub(at(right + 1), at(right)), d) > 0.0 {
            right += 1;
        }
        top = top.max(right);
        while dot(sub(at(top + 1), at(top)), nrm) > 0.0 {
            top += 1;
        }
        left = left.max(top);
        while dot(sub(at(left + 1), at(left)), d) < 0.0 {
            left += 1;
        }
        let origin = at(i);
        let d_max = dot(sub(at(right), origin), d);
        let d_min = dot(sub(at(left), origin), d);
        let height = dot(sub(at(top), origin), nrm);
        let area = (d_max - d_min) * height;
        if best.as_ref().map_or(true, |b| area < b.1) {
            let corner = |a: f64, b: f64| [origin[0] + a * d[0] + b * nrm[0], origin[1] + a * d[1] + b * nrm[1]];
            let rect = [corner(d_min, 0.0), corner(d_max, 0.0), corner(d_max, height), corner(d_min, height)];
            best = Some((rect, area));
        }
    }
    best
}

/// Four rectangle corners in unit coordinates, counterclockwise from the
/// smallest polar angle about the component centroid.
pub fn detect_rectangle_corners(image: &Image) -> Result<[Vec2; 4]> {
    let grid = image.grid();
    let n = grid.n_pix();
    let threshold = foreground_threshold(image);
    let mask: Vec<bool> = image.values().iter().map(|&v| v > threshold).collect();
    let comp = largest_component(&mask, n);
    if comp.is_empty() {
        return Err(Error::NoObject);
    }
    if comp.len() < MIN_COMPONENT_PIXELS {
        return Err(Error::ObjectTooSmall { pixels: comp.len() });
    }
    let mut in_comp = vec![false; mask.len()];
    for &p in &comp {
        in_comp[p] = true;
    }
    let half = 0.5 * grid.spacing();
    let mut centroid = [0.0, 0.0];
    let mut points = Vec::new();
    for &p in &comp {
        let (i, j) = (p / n, p % n);
        let c = grid.center(i, j);
        centroid[0] += c[0];
        centroid[1] += c[1];
        let interior = i > 0 && i + 1 < n && j > 0 && j + 1 < n
            && in_comp[p - n] && in_comp[p + n] && in_comp[p - 1] && in_comp[p + 1];
        if !interior {
            for (a, b) in [(-half, -half), (-half, half), (half, -half), (half, half)] {
                points.push([c[0] + a, c[1] + b]);
            }
        }
    }
    centroid[0] /= comp.len() as f64;
    centroid[1] /= comp.len() as f64;
    let hull = convex_hull(&points);
    let (mut rect, _) = min_area_rectangle(&hull).ok_or(Error::NoObject)?;
    sort_counterclockwise(&mut rect, centroid);
    Ok(rect)
}

/// Cyclic shift of `end` closest to `start` in summed squared distance.
pub fn match_corner_correspondence(start: &[Vec2; 4], end: &[Vec2; 4]) -> [Vec2; 4] {
    let cost = |shift: usize| -> f64 {
        (0..4)
            .map(|k| {
                let e = end[(k + shift) % 4];
                let s = start[k];
                (e[0] - s[0]) * (e[0] - s[0]) + (e[1] - s[1]) * (e[1] - s[1])
            })
            .sum()
    };
    let mut best = 0;
    let mut best_cost = cost(0);
    for shift in 1..4 {
        let c = cost(shift);
        if c < best_cost {
            best = shift;
            best_cost = c;
        }
    }
    core::array::from_fn(|k| end[(k + best) % 4])
}

/// Twice the signed area of a polygon (positive when counterclockwise).
pub fn signed_area2(poly: &[Vec2]) -> f64 {
    (0..poly.len())
        .map(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum()
}
