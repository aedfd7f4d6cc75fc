use serde::{Deserialize, Serialize};

/// 2-D point in millimetres. +x is anterior, +y is superior; the incisor tip
/// is the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let vx = b.x - a.x;
    let vy = b.y - a.y;
    let len_sq = vx * vx + vy * vy;
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len_sq).clamp(0.0, 1.0);
    let proj = Point::new(a.x + t * vx, a.y + t * vy);
    p.dist(proj)
}

/// Minimum distance from `p` to a polyline given as consecutive vertices.
pub fn point_polyline_distance(p: Point, poly: &[Point]) -> f64 {
    match poly {
        [] => f64::INFINITY,
        [only] => p.dist(*only),
        _ => poly
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Circle through three points, or `None` when they are (numerically)
/// collinear.
pub fn circumcircle(a: Point, b: Point, c: Point) -> Option<(Point, f64)> {
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let d = 2.0 * (bx * cy - by * cx);
    let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
    if scale == 0.0 || d.abs() <= 1e-12 * scale {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = Point::new(a.x + ux, a.y + uy);
    Some((center, ux.hypot(uy)))
}

/// The circular arc from `a` through `b` to `c`, or the two-segment
/// polyline `a-b-c` (uniform in arc length) when the points are collinear.
#[derive(Debug, Clone, Copy)]
pub enum Arc {
    Circular {
        center: Point,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Polyline {
        a: Point,
        b: Point,
        c: Point,
    },
}

impl Arc {
    pub fn through(a: Point, b: Point, c: Point) -> Arc {
        match circumcircle(a, b, c) {
            Some((center, radius)) => {
                let ang = |p: Point| (p.y - center.y).atan2(p.x - center.x);
                let start = ang(a);
                let tau = std::f64::consts::TAU;
                // Counter-clockwise sweeps from a to b and from a to c.
                let to_b = (ang(b) - start).rem_euclid(tau);
                let to_c = (ang(c) - start).rem_euclid(tau);
                // The arc must contain b: go ccw if b comes before c, else cw.
                let sweep = if to_b <= to_c { to_c } else { to_c - tau };
                Arc::Circular {
                    center,
                    radius,
                    start,
                    sweep,
                }
            }
            None => Arc::Polyline { a, b, c },
        }
    }

    /// Point at fraction `u` in [0, 1] of the arc length.
    pub fn at(&self, u: f64) -> Point {
        match *self {
            Arc::Circular {
                center,
                radius,
                start,
                sweep,
            } => {
                let th = start + sweep * u;
                Point::new(center.x + radius * th.cos(), center.y + radius * th.sin())
            }
            Arc::Polyline { a, b, c } => {
                let l1 = a.dist(b);
                let l2 = b.dist(c);
                let s = (l1 + l2) * u;
                if l1 + l2 == 0.0 {
                    a
                } else if s <= l1 && l1 > 0.0 {
                    a.lerp(b, s / l1)
                } else if l2 > 0.0 {
                    b.lerp(c, ((s - l1) / l2).min(1.0))
                } else {
                    b
                }
            }
        }
    }
}

/// `n` uniformly spaced points along [`Arc::through`].
pub fn sample_arc(a: Point, b: Point, c: Point, n: usize) -> Vec<Point> {
    assert!(n >= 2, "arc needs at least two samples");
    let arc = Arc::through(a, b, c);
    (0..n).map(|i| arc.at(i as f64 / (n - 1) as f64)).collect()
}
