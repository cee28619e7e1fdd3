//! Exact intersection area between triangles and a disk.
//!
//! The triangle is fanned from the disk center: each directed edge `(a, b)`
//! contributes the signed area of `disk ∩ triangle(center, a, b)`, which is a
//! straight-chord shoelace term for the part of the edge inside the disk plus
//! circular-sector terms for the parts outside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{signed_area, MeshGrid, Point};

/// Relative tolerance on the half-chord length below which a line only grazes the circle.
const GRAZING_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleCircle {
    pub center: Point,
    pub radius: f64,
}

impl ObstacleCircle {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain(format!("obstacle needs a finite center and radius > 0, got r = {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    pub fn contains(&self, p: Point) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Intersection area plus the number of degenerate triangles that were skipped.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overlap {
    pub area: f64,
    pub degenerate: usize,
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sector(r: f64, u: Point, v: Point) -> f64 {
    0.5 * r * r * cross(u, v).atan2(dot(u, v))
}

/// Signed area of `disk(0, r) ∩ triangle(0, a, b)`.
fn fan_term(a: Point, b: Point, r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let dd = dot(d, d);
    if dd == 0.0 {
        return 0.0;
    }
    let ad = dot(a, d);
    let disc = ad * ad - dd * (dot(a, a) - r * r);
    // half-chord length along the supporting line
    if disc <= 0.0 || disc.sqrt() / dd.sqrt() <= GRAZING_TOL * r {
        return sector(r, a, b);
    }
    let s = disc.sqrt();
    let t_in = (-ad - s) / dd;
    let t_out = (-ad + s) / dd;
    if t_in >= 1.0 || t_out <= 0.0 {
        return sector(r, a, b);
    }
    let t_in = t_in.max(0.0);
    let t_out = t_out.min(1.0);
    let p = [a[0] + t_in * d[0], a[1] + t_in * d[1]];
    let q = [a[0] + t_out * d[0], a[1] + t_out * d[1]];
    sector(r, a, p) + 0.5 * cross(p, q) + sector(r, q, b)
}

pub fn triangle_circle_area(tri: [Point; 3], circle: &ObstacleCircle) -> Overlap {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let scale = tri
        .iter()
        .zip(tri.iter().cycle().skip(1))
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max);
    if !(area.abs() > 1e-14 * scale * scale) {
        return Overlap { area: 0.0, degenerate: 1 };
    }
    let r = circle.radius;
    let [cx, cy] = circle.center;
    let (min_x, max_x) = tri.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
    let (min_y, max_y) = tri.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    if min_x >= cx + r || max_x <= cx - r || min_y >= cy + r || max_y <= cy - r {
        return Overlap::default();
    }
    let local = tri.map(|p| [p[0] - cx, p[1] - cy]);
    let total: f64 = (0..3).map(|k| fan_term(local[k], local[(k + 1) % 3], r)).sum();
    Overlap { area: total.abs().min(area.abs()).min(circle.area()), degenerate: 0 }
}

/// Area of `shape ∩ disk`, summed element by element.
pub fn shape_circle_area(mesh: &MeshGrid, circle: &ObstacleCircle) -> Overlap {
    (0..mesh.triangles.len()).fold(Overlap::default(), |acc, e| {
        let o = triangle_circle_area(mesh.vertices(e), circle);
        Overlap { area: acc.area + o.area, degenerate: acc.degenerate + o.degenerate }
    })
}
