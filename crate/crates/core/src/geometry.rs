//! Discretized body contours and rigid-body inertia.
//!
//! Every shape is sampled uniformly in the angle of its conformal preimage
//! circle, so the body frame origin coincides with the conformal center and
//! the circulatory flow carries the same circulation across every node
//! interval. For the circle this is plain uniform arc length; for the
//! ellipse it is the parametric angle.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{Matrix3, Vector2};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

pub const MIN_PANELS: usize = 8;

/// Analytic description of a body contour.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle {
        radius: f64,
    },
    /// Semi-axis `a` along the body x axis, `b` along y.
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Image of the circle `|zeta - center| = circle_radius` under
    /// `z = zeta + c^2 / zeta`. The circle must enclose (or touch) both
    /// critical points `+-c`; touching `+c` gives the cusped trailing edge.
    Joukowski {
        circle_radius: f64,
        center: [f64; 2],
        c: f64,
    },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidShape {
                    name,
                    value,
                    reason: "must be positive and finite",
                })
            }
        }
        match *self {
            Shape::Circle { radius } => positive("radius", radius),
            Shape::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            Shape::Joukowski {
                circle_radius,
                center,
                c,
            } => {
                positive("circle_radius", circle_radius)?;
                positive("c", c)?;
                if !center[0].is_finite() || !center[1].is_finite() {
                    return Err(Error::InvalidShape {
                        name: "center",
                        value: f64::NAN,
                        reason: "must be finite",
                    });
                }
                let mu = Point::new(center[0], center[1]);
                let slack = 1e-12 * circle_radius;
                for crit in [Point::new(c, 0.0), Point::new(-c, 0.0)] {
                    if (mu - crit).norm() > circle_radius + slack {
                        return Err(Error::InvalidShape {
                            name: "circle_radius",
                            value: circle_radius,
                            reason: "circle must enclose both critical points +-c",
                        });
                    }
                }
                if mu.norm() < slack && (circle_radius - c).abs() < slack {
                    return Err(Error::InvalidShape {
                        name: "circle_radius",
                        value: circle_radius,
                        reason: "flat-plate limit has zero thickness",
                    });
                }
                Ok(())
            }
        }
    }

    /// Conformal center in the coordinates the shape is generated in.
    fn conformal_center(&self) -> Point {
        match *self {
            Shape::Circle { .. } | Shape::Ellipse { .. } => Point::zeros(),
            Shape::Joukowski { center, .. } => Point::new(center[0], center[1]),
        }
    }

    /// Contour point at preimage-circle angle `phi`, before recentering.
    pub fn point_at(&self, phi: f64) -> Point {
        let (s, c) = phi.sin_cos();
        match *self {
            Shape::Circle { radius } => Point::new(radius * c, radius * s),
            Shape::Ellipse { a, b } => Point::new(a * c, b * s),
            Shape::Joukowski {
                circle_radius,
                center,
                c: k,
            } => {
                let zx = center[0] + circle_radius * c;
                let zy = center[1] + circle_radius * s;
                let r2 = zx * zx + zy * zy;
                // zeta + k^2 / zeta, with 1/zeta = conj(zeta) / |zeta|^2
                Point::new(zx + k * k * zx / r2, zy - k * k * zy / r2)
            }
        }
    }
}

/// Largest turning angle at a node for which its panels are bent into arcs.
/// Sharper nodes are treated as corners and their panels stay straight.
pub const MAX_ARC_TURN: f64 = PI / 3.0;

/// A boundary panel between two nodes: a circular arc of signed curvature
/// `curvature` (positive bulges outward), or the straight chord when it is
/// zero. Collocation is at the arc midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub start: Point,
    pub end: Point,
    /// Chord midpoint.
    pub midpoint: Point,
    /// Unit normal of the chord, out of the body; also the arc normal at
    /// the collocation point.
    pub normal: Point,
    /// Unit chord tangent along the counterclockwise traversal.
    pub tangent: Point,
    /// Chord length.
    pub length: f64,
    pub curvature: f64,
    pub arc_length: f64,
    pub collocation: Point,
}

impl Panel {
    fn new(start: Point, end: Point) -> Self {
        let d = end - start;
        let length = d.norm();
        let tangent = d / length;
        let midpoint = (start + end) * 0.5;
        Panel {
            start,
            end,
            midpoint,
            normal: Point::new(tangent.y, -tangent.x),
            tangent,
            length,
            curvature: 0.0,
            arc_length: length,
            collocation: midpoint,
        }
    }

    fn bend(&mut self, curvature: f64) {
        let half = (0.5 * curvature * self.length).asin();
        if curvature == 0.0 || !half.is_finite() {
            return;
        }
        self.curvature = curvature;
        self.arc_length = 2.0 * half / curvature;
        self.collocation = self.point_at(0.0);
    }

    pub fn is_straight(&self) -> bool {
        self.curvature == 0.0
    }

    /// Point at signed arc length `s` from the collocation point,
    /// `|s| <= arc_length / 2`.
    pub fn point_at(&self, s: f64) -> Point {
        let k = self.curvature;
        if k == 0.0 {
            return self.midpoint + self.tangent * s;
        }
        let half = 0.5 * k * self.arc_length;
        let psi = k * s;
        // (cos psi - cos half) / k without cancellation
        let rise = 2.0 * (0.5 * (half + psi)).sin() * (0.5 * (half - psi)).sin() / k;
        self.midpoint + self.normal * rise + self.tangent * (psi.sin() / k)
    }

    /// Outward unit normal at arc length `s`.
    pub fn normal_at(&self, s: f64) -> Point {
        let psi = self.curvature * s;
        self.normal * psi.cos() + self.tangent * psi.sin()
    }

    /// Whether `p` lies between the chord and the arc.
    pub fn bulge_contains(&self, p: Point) -> bool {
        if self.curvature <= 0.0 {
            return false;
        }
        let d = p - self.midpoint;
        let (along, up) = (d.dot(&self.tangent), d.dot(&self.normal));
        if up <= 0.0 || along.abs() >= 0.5 * self.length {
            return false;
        }
        let r = 1.0 / self.curvature;
        let center = self.collocation - self.normal * r;
        (p - center).norm() < r
    }
}

/// Signed curvature of the circle through three points.
fn menger_curvature(a: Point, b: Point, c: Point) -> f64 {
    let (u, v) = (b - a, c - b);
    let cross = u.x * v.y - u.y * v.x;
    2.0 * cross / (u.norm() * v.norm() * (c - a).norm())
}

fn turning_angle(a: Point, b: Point, c: Point) -> f64 {
    let (u, v) = (b - a, c - b);
    (u.x * v.y - u.y * v.x).atan2(u.dot(&v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyBoundary {
    nodes: Vec<Point>,
    panels: Vec<Panel>,
    area: f64,
    centroid: Point,
    conformal_center_offset: Point,
    shape: Option<Shape>,
}

impl BodyBoundary {
    /// Builds a body from an arbitrary closed node list. The origin is taken
    /// to be the conformal center; orientation is made counterclockwise.
    pub fn from_nodes(nodes: Vec<Point>) -> Result<Self> {
        Self::build(nodes, Point::zeros(), None)
    }

    fn build(mut nodes: Vec<Point>, offset: Point, shape: Option<Shape>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::DegenerateBody(format!(
                "{} nodes cannot enclose an area",
                nodes.len()
            )));
        }
        if nodes.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateBody("non-finite node".into()));
        }
        let mut area = signed_area(&nodes);
        if area < 0.0 {
            // keep the first node in place so reversal is a pure reorder
            nodes[1..].reverse();
            area = -area;
        }
        let scale = diameter(&nodes);
        if area.is_nan() || area <= 1e-14 * scale * scale {
            return Err(Error::DegenerateBody(format!("enclosed area {area:e}")));
        }
        let n = nodes.len();
        let mut panels = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (nodes[i], nodes[(i + 1) % n]);
            if (b - a).norm() <= 1e-14 * scale {
                return Err(Error::DegenerateBody(format!("panel {i} has zero length")));
            }
            panels.push(Panel::new(a, b));
        }
        check_simple(&nodes)?;
        let node_curvature: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let (a, b, c) = (nodes[(i + n - 1) % n], nodes[i], nodes[(i + 1) % n]);
                (turning_angle(a, b, c).abs() <= MAX_ARC_TURN).then(|| menger_curvature(a, b, c))
            })
            .collect();
        for (i, panel) in panels.iter_mut().enumerate() {
            if let (Some(a), Some(b)) = (node_curvature[i], node_curvature[(i + 1) % n]) {
                panel.bend(0.5 * (a + b));
            }
        }
        let centroid = polygon_centroid(&nodes, area);
        Ok(BodyBoundary {
            nodes,
            panels,
            area,
            centroid,
            conformal_center_offset: offset,
            shape,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn conformal_center_offset(&self) -> Point {
        self.conformal_center_offset
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    /// Total arc length of the panels.
    pub fn perimeter(&self) -> f64 {
        self.panels.iter().map(|p| p.arc_length).sum()
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.nodes)
    }

    /// Containment test against the polygon and the arc bulges.
    pub fn contains(&self, p: Point) -> bool {
        self.polygon_contains(p) || self.panels.iter().any(|panel| panel.bulge_contains(p))
    }

    fn polygon_contains(&self, p: Point) -> bool {
        let mut winding = 0i32;
        for panel in &self.panels {
            let (a, b) = (panel.start, panel.end);
            let side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
            if a.y <= p.y {
                if b.y > p.y && side > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && side < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Same contour, starting from node `k`.
    pub fn rotate_start(&self, k: usize) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        let n = nodes.len();
        nodes.rotate_left(k % n);
        Self::build(nodes, self.conformal_center_offset, self.shape.clone())
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let nodes = self.nodes.iter().map(|p| p * s).collect();
        Self::build(nodes, self.conformal_center_offset * s, None)
    }

    /// Writes one `x y` pair per line.
    pub fn write_nodes<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.nodes {
            writeln!(w, "{} {}", p.x, p.y)?;
        }
        Ok(())
    }
}

/// Samples `shape` at `n` nodes and recenters it on its conformal center.
pub fn make_body(shape: &Shape, n: usize) -> Result<BodyBoundary> {
    if n < MIN_PANELS {
        return Err(Error::TooFewPanels(n));
    }
    shape.validate()?;
    let center = shape.conformal_center();
    let nodes: Vec<Point> = (0..n)
        .map(|k| shape.point_at(2.0 * PI * k as f64 / n as f64) - center)
        .collect();
    // the translation is exact, so the residual offset is zero by construction
    BodyBoundary::build(nodes, Point::zeros(), Some(shape.clone()))
}

/// Mass and inertia of a neutrally buoyant body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMass {
    pub mass: f64,
    /// Moment of inertia about the body frame origin.
    pub inertia: f64,
    /// `diag(inertia, mass, mass)`.
    pub matrix: Matrix3<f64>,
}

/// Uniform body of density `density`. The inertia integral is reduced to the
/// boundary with Green's theorem and evaluated exactly on the polygon.
pub fn rigid_mass(body: &BodyBoundary, density: f64) -> RigidMass {
    let nodes = body.nodes();
    let n = nodes.len();
    let (mut sxx, mut syy) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (nodes[i], nodes[(i + 1) % n]);
        let cross = a.x * b.y - b.x * a.y;
        sxx += cross * (a.x * a.x + a.x * b.x + b.x * b.x);
        syy += cross * (a.y * a.y + a.y * b.y + b.y * b.y);
    }
    let mass = density * body.area();
    let inertia = density * (sxx + syy) / 12.0;
    RigidMass {
        mass,
        inertia,
        matrix: Matrix3::from_diagonal(&nalgebra::Vector3::new(inertia, mass, mass)),
    }
}

/// Shoelace signed area, positive for counterclockwise order.
pub fn signed_area(nodes: &[Point]) -> f64 {
    let n = nodes.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (nodes[i], nodes[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

fn polygon_centroid(nodes: &[Point], area: f64) -> Point {
    let n = nodes.len();
    let mut c = Point::zeros();
    for i in 0..n {
        let (a, b) = (nodes[i], nodes[(i + 1) % n]);
        let cross = a.x * b.y - b.x * a.y;
        c += (a + b) * cross;
    }
    c / (6.0 * area)
}

fn diameter(nodes: &[Point]) -> f64 {
    let (mut lo, mut hi) = (nodes[0], nodes[0]);
    for p in nodes {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn check_simple(nodes: &[Point]) -> Result<()> {
    let n = nodes.len();
    for i in 0..n {
        let (a, b) = (nodes[i], nodes[(i + 1) % n]);
        // skip the two neighbours sharing an endpoint with segment i
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, nodes[j], nodes[(j + 1) % n]) {
                return Err(Error::SelfIntersection(i, j));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_from_four_nodes() {
        // make_body refuses N < 8, so build the N=4 inscribed square directly
        let shape = Shape::Circle { radius: 1.0 };
        let nodes = (0..4)
            .map(|k| shape.point_at(2.0 * PI * k as f64 / 4.0))
            .collect();
        let body = BodyBoundary::from_nodes(nodes).unwrap();
        assert_relative_eq!(body.area(), 2.0, epsilon = 1e-14);
        assert!(matches!(make_body(&shape, 4), Err(Error::TooFewPanels(4))));
    }

    #[test]
    fn degenerate_ellipse_is_circle() {
        let c = make_body(&Shape::Circle { radius: 1.0 }, 64).unwrap();
        let e = make_body(&Shape::Ellipse { a: 1.0, b: 1.0 }, 64).unwrap();
        assert_eq!(c.nodes(), e.nodes());
    }

    #[test]
    fn normals_point_outward() {
        for shape in [
            Shape::Circle { radius: 2.0 },
            Shape::Ellipse { a: 3.0, b: 0.5 },
        ] {
            let body = make_body(&shape, 40).unwrap();
            for p in body.panels() {
                assert!(p.normal.dot(&(p.midpoint - body.centroid())) > 0.0);
                assert_relative_eq!(p.normal.dot(&p.tangent), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let nodes: Vec<Point> = (0..16)
            .map(|k| {
                let t = -2.0 * PI * k as f64 / 16.0;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        let body = BodyBoundary::from_nodes(nodes.clone()).unwrap();
        assert!(body.area() > 0.0);
        assert_eq!(body.nodes()[0], nodes[0]);
        assert_relative_eq!(signed_area(body.nodes()), body.area(), max_relative = 1e-12);
    }

    #[test]
    fn bowtie_is_rejected() {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, -1.0),
            Point::new(0.0, 1.0),
        ];
        assert!(matches!(
            BodyBoundary::from_nodes(nodes),
            Err(Error::SelfIntersection(..)) | Err(Error::DegenerateBody(_))
        ));
    }

    #[test]
    fn collinear_nodes_are_degenerate() {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ];
        assert!(matches!(
            BodyBoundary::from_nodes(nodes),
            Err(Error::DegenerateBody(_))
        ));
    }

    #[test]
    fn bad_parameters() {
        assert!(make_body(&Shape::Circle { radius: -1.0 }, 16).is_err());
        assert!(make_body(&Shape::Ellipse { a: 1.0, b: 0.0 }, 16).is_err());
        // circle misses the trailing critical point: the image folds over
        let folded = Shape::Joukowski {
            circle_radius: 1.0,
            center: [-0.1, 0.0],
            c: 1.0,
        };
        assert!(make_body(&folded, 64).is_err());
        let plate = Shape::Joukowski {
            circle_radius: 1.0,
            center: [0.0, 0.0],
            c: 1.0,
        };
        assert!(make_body(&plate, 64).is_err());
    }

    #[test]
    fn joukowski_is_centered_on_conformal_center() {
        let shape = Shape::Joukowski {
            circle_radius: 1.15,
            center: [-0.1, 0.05],
            c: 1.0,
        };
        let body = make_body(&shape, 256).unwrap();
        assert!(body.conformal_center_offset().norm() < 1e-9 * body.diameter());
        // uniform preimage sampling: the node mean is the conformal center
        let mean: Point = body.nodes().iter().sum::<Point>() / body.len() as f64;
        assert!(mean.norm() < 1e-9 * body.diameter());
    }

    #[test]
    fn mass_matrix_is_diagonal() {
        let body = make_body(&Shape::Ellipse { a: 2.0, b: 1.0 }, 128).unwrap();
        let rm = rigid_mass(&body, 1.3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(rm.matrix[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(rm.mass, 1.3 * body.area());
        assert!(rm.matrix.cholesky().is_some());
    }

    #[test]
    fn contains_points() {
        let body = make_body(&Shape::Ellipse { a: 2.0, b: 1.0 }, 64).unwrap();
        assert!(body.contains(Point::new(0.0, 0.0)));
        assert!(body.contains(Point::new(1.9, 0.0)));
        assert!(!body.contains(Point::new(2.1, 0.0)));
        assert!(!body.contains(Point::new(0.0, 1.01)));
    }

    #[test]
    fn node_export() {
        let body = make_body(&Shape::Circle { radius: 1.0 }, 8).unwrap();
        let mut buf = Vec::new();
        body.write_nodes(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        let first: Vec<f64> = text
            .lines()
            .next()
            .unwrap()
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(first, vec![1.0, 0.0]);
    }

    #[test]
    fn circle_panels_are_exact_arcs() {
        let body = make_body(&Shape::Circle { radius: 2.0 }, 40).unwrap();
        for p in body.panels() {
            assert_relative_eq!(p.curvature, 0.5, max_relative = 1e-12);
            assert_relative_eq!(p.collocation.norm(), 2.0, max_relative = 1e-12);
            for s in [-0.5, -0.2, 0.3, 0.5] {
                let y = p.point_at(s * p.arc_length);
                assert_relative_eq!(y.norm(), 2.0, max_relative = 1e-12);
                assert_relative_eq!(p.normal_at(s * p.arc_length), y / 2.0, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(body.perimeter(), 4.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn square_corners_stay_straight() {
        let body = BodyBoundary::from_nodes(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(body.panels().iter().all(Panel::is_straight));
        assert_eq!(body.perimeter(), 4.0);
    }

    #[test]
    fn bulge_points_are_inside() {
        let body = make_body(&Shape::Circle { radius: 1.0 }, 16).unwrap();
        let p = body.panels()[3];
        let between = (p.midpoint + p.collocation) * 0.5;
        assert!(p.bulge_contains(between));
        assert!(body.contains(between));
        assert!(!body.contains(p.collocation * 1.001));
    }

    #[test]
    fn joukowski_area_matches_area_theorem() {
        // z = zeta + c^2/zeta on |zeta - mu| = R encloses
        // pi (R^2 - c^4 R^2 / (R^2 - |mu|^2)^2)
        let (r, mu, c) = (1.15, [-0.1, 0.1], 1.0);
        let shape = Shape::Joukowski {
            circle_radius: r,
            center: mu,
            c,
        };
        let m2 = mu[0] * mu[0] + mu[1] * mu[1];
        let exact = PI * (r * r - c.powi(4) * r * r / (r * r - m2).powi(2));
        let fine = make_body(&shape, 100_000).unwrap();
        assert_relative_eq!(fine.area(), exact, max_relative = 1e-8);
    }
}
