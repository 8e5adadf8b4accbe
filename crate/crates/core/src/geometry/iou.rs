use std::cmp::Ordering;

use super::{BevBox, GeometryError};

/// Sides shorter than this are rejected as degenerate.
pub const MIN_SIDE: f64 = 1e-9;
const COLLINEAR_EPS: f64 = 1e-12;

type P = [f64; 2];

/// Footprint corners in counter-clockwise order.
pub fn bev_corners(b: &BevBox) -> [P; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw) = (b.size[0] / 2.0, b.size[1] / 2.0);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(dx, dy)| {
        [b.center[0] + dx * c - dy * s, b.center[1] + dx * s + dy * c]
    })
}

/// Shoelace area of a simple polygon (positive when counter-clockwise).
pub fn polygon_area(poly: &[P]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice
}

fn cross(o: P, a: P, b: P) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn line_hit(p: P, q: P, e0: P, e1: P) -> P {
    let dp = [q[0] - p[0], q[1] - p[1]];
    let de = [e1[0] - e0[0], e1[1] - e0[1]];
    let denom = dp[0] * de[1] - dp[1] * de[0];
    if denom.abs() < COLLINEAR_EPS {
        return q;
    }
    let t = ((e0[0] - p[0]) * de[1] - (e0[1] - p[1]) * de[0]) / denom;
    [p[0] + t * dp[0], p[1] + t * dp[1]]
}

/// Sutherland-Hodgman: clip `subject` by the convex counter-clockwise `clip`.
fn clip_convex(subject: &[P], clip: &[P]) -> Vec<P> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let inside = |p: P| cross(e0, e1, p) >= -COLLINEAR_EPS;
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(line_hit(prev, cur, e0, e1)),
                (false, true) => {
                    output.push(line_hit(prev, cur, e0, e1));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

fn check(b: &BevBox) -> Result<(), GeometryError> {
    for s in b.size {
        if !(s >= MIN_SIDE) {
            return Err(GeometryError::DegenerateBox(s));
        }
    }
    Ok(())
}

fn total_order(a: &BevBox, b: &BevBox) -> Ordering {
    let ka = [a.center[0], a.center[1], a.size[0], a.size[1], a.yaw];
    let kb = [b.center[0], b.center[1], b.size[0], b.size[1], b.yaw];
    ka.iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Exact IoU of two rotated footprints.
///
/// The pair is put in a canonical order before clipping so the result is
/// bit-identical under argument swap.
pub fn iou_bev(a: &BevBox, b: &BevBox) -> Result<f64, GeometryError> {
    check(a)?;
    check(b)?;
    if a == b {
        return Ok(1.0);
    }
    let reach = 0.5 * (a.size[0].hypot(a.size[1]) + b.size[0].hypot(b.size[1]));
    let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
    if d >= reach {
        return Ok(0.0);
    }
    let (first, second) = if total_order(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let inter = polygon_area(&clip_convex(&bev_corners(first), &bev_corners(second))).max(0.0);
    let union = a.area() + b.area() - inter;
    if inter <= 0.0 || union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// IoU of the footprints treated as axis-aligned, i.e. with yaw ignored.
pub fn iou_axis_aligned(a: &BevBox, b: &BevBox) -> Result<f64, GeometryError> {
    check(a)?;
    check(b)?;
    let ix = (a.center[0] + a.size[0] / 2.0).min(b.center[0] + b.size[0] / 2.0)
        - (a.center[0] - a.size[0] / 2.0).max(b.center[0] - b.size[0] / 2.0);
    let iy = (a.center[1] + a.size[1] / 2.0).min(b.center[1] + b.size[1] / 2.0)
        - (a.center[1] - a.size[1] / 2.0).max(b.center[1] - b.size[1] / 2.0);
    if ix <= 0.0 || iy <= 0.0 {
        return Ok(0.0);
    }
    let inter = ix * iy;
    Ok((inter / (a.area() + b.area() - inter)).clamp(0.0, 1.0))
}
