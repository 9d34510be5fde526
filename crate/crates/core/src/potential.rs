//! Exterior potential flow around the body.
//!
//! Constant-strength source panels on circular arcs, collocated at the arc
//! midpoints. The single layer
//! `Phi(x) = sum_j sigma_j * int_j (1/2pi) ln|x - y| dS(y)` gives the
//! collocation system `(1/2 I + K') sigma = g`, which is nonsingular for
//! the exterior problem. Kirchhoff potentials, the added-mass matrix, the
//! circulatory boundary flow and the curvature boundary integral are all
//! built on one factorization per body.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, LU};

use crate::algebra::Se2Vector;
use crate::error::{Error, Result};
use crate::geometry::{rigid_mass, BodyBoundary, Panel, Point};

/// Absolute bound on the net flux of admissible Neumann data.
pub const FLUX_TOLERANCE: f64 = 1e-8;

/// Relative bound on the pre-symmetrization asymmetry of the added mass.
pub const ASYMMETRY_TOLERANCE: f64 = 1e-6;

/// Arc pieces closer than this many of their lengths to the field point are
/// split before Gauss quadrature is trusted.
const NEAR_FIELD: f64 = 3.0;
/// Splitting depth after which a near piece is replaced by its chord; only
/// reached for points on the arc itself.
const MAX_SPLITS: u32 = 40;

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// `(1/2pi) int ln|x - y| dS(y)` over the straight segment `a b`.
fn chord_potential(a: Point, b: Point, x: Point) -> f64 {
    let d = b - a;
    let len = d.norm();
    let tangent = d / len;
    let rel = x - a;
    let xi = rel.dot(&tangent);
    let eta = rel.x * tangent.y - rel.y * tangent.x;
    let r1 = xi * xi + eta * eta;
    let r2 = (len - xi) * (len - xi) + eta * eta;
    let t_ln = |t: f64, r: f64| if r > 0.0 { 0.5 * t * r.ln() } else { 0.0 };
    let beta = (eta * len).atan2(xi * xi - xi * len + eta * eta);
    (t_ln(len - xi, r2) + t_ln(xi, r1) - len + eta * beta) / (2.0 * PI)
}

/// Gradient of [`chord_potential`] in `x`; `x` must be off the segment.
fn chord_velocity(a: Point, b: Point, x: Point) -> Point {
    let d = b - a;
    let len = d.norm();
    let tangent = d / len;
    let normal = Point::new(tangent.y, -tangent.x);
    let rel = x - a;
    let xi = rel.dot(&tangent);
    let eta = rel.dot(&normal);
    let r1 = xi * xi + eta * eta;
    let r2 = (len - xi) * (len - xi) + eta * eta;
    let u_t = (r1 / r2).ln() / (4.0 * PI);
    let u_n = (eta * len).atan2(xi * xi - xi * len + eta * eta) / (2.0 * PI);
    tangent * u_t + normal * u_n
}

/// Adaptive quadrature of a kernel over the arc piece `s0..s1`: Gauss
/// where the piece is well separated from `x`, bisection near it and the
/// closed-form chord integral `chord` at the finest level.
fn integrate_arc<T>(
    panel: &Panel,
    x: Point,
    (s0, s1): (f64, f64),
    depth: u32,
    kernel: &impl Fn(Point) -> T,
    chord: &impl Fn(Point, Point) -> T,
) -> T
where
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (mid, half) = (0.5 * (s0 + s1), 0.5 * (s1 - s0));
    if (x - panel.point_at(mid)).norm() >= NEAR_FIELD * 2.0 * half {
        let mut terms = GAUSS_NODES
            .iter()
            .zip(&GAUSS_WEIGHTS)
            .map(|(&t, &w)| kernel(panel.point_at(mid + half * t)) * (w * half));
        let first = terms.next().expect("four nodes");
        return terms.fold(first, |acc, v| acc + v);
    }
    if depth == MAX_SPLITS {
        return chord(panel.point_at(s0), panel.point_at(s1));
    }
    integrate_arc(panel, x, (s0, mid), depth + 1, kernel, chord)
        + integrate_arc(panel, x, (mid, s1), depth + 1, kernel, chord)
}

fn whole_arc(panel: &Panel) -> (f64, f64) {
    (-0.5 * panel.arc_length, 0.5 * panel.arc_length)
}

/// Potential of a unit-density curved panel at its own collocation point.
fn arc_self_potential(panel: &Panel) -> f64 {
    let (len, k) = (panel.arc_length, panel.curvature);
    // |y(s) - y(0)| = (2/k) sin(k|s|/2); the ratio to |s| is smooth
    let quarter = 0.25 * len;
    let smooth: f64 = GAUSS_NODES
        .iter()
        .zip(&GAUSS_WEIGHTS)
        .map(|(&t, &w)| {
            let half_angle = 0.5 * k * quarter * (1.0 + t);
            w * quarter * (half_angle.sin() / half_angle).ln()
        })
        .sum();
    (len * ((0.5 * len).ln() - 1.0) + 2.0 * smooth) / (2.0 * PI)
}

/// Potential at `x` induced by a unit-density source panel.
pub fn panel_potential(panel: &Panel, x: Point) -> f64 {
    if panel.is_straight() {
        return chord_potential(panel.start, panel.end, x);
    }
    if x == panel.collocation {
        return arc_self_potential(panel);
    }
    integrate_arc(
        panel,
        x,
        whole_arc(panel),
        0,
        &|y| (x - y).norm().ln() / (2.0 * PI),
        &|a, b| chord_potential(a, b, x),
    )
}

/// Velocity at `x` induced by a unit-density source panel. On the panel's
/// own collocation point the exterior limit is returned.
pub fn panel_velocity(panel: &Panel, x: Point, on_panel: bool) -> Point {
    if on_panel {
        return panel.normal * (0.5 + panel.curvature * panel.arc_length / (4.0 * PI));
    }
    if panel.is_straight() {
        return chord_velocity(panel.start, panel.end, x);
    }
    integrate_arc(
        panel,
        x,
        whole_arc(panel),
        0,
        &|y| {
            let d = x - y;
            d / (2.0 * PI * d.norm_squared())
        },
        &|a, b| chord_velocity(a, b, x),
    )
}

/// Velocity of a point vortex of strength `circulation` at the origin,
/// counterclockwise for positive circulation.
pub fn vortex_velocity(circulation: f64, x: Point) -> Point {
    let r2 = x.norm_squared();
    Point::new(-x.y, x.x) * (circulation / (2.0 * PI * r2))
}

/// Panel-averaged normal and tangential velocity of the origin vortex.
/// The normal average telescopes, so its boundary sum vanishes exactly.
fn vortex_panel_average(circulation: f64, panel: &Panel) -> (f64, f64) {
    let k = circulation / (2.0 * PI);
    // stream function -k ln r and potential k * angle
    let stream = -k * (panel.end.norm() / panel.start.norm()).ln();
    let cross = panel.start.x * panel.end.y - panel.start.y * panel.end.x;
    let angle = cross.atan2(panel.start.dot(&panel.end));
    // outward flux through a ccw panel is the stream function difference
    (stream / panel.arc_length, k * angle / panel.arc_length)
}

/// Which boundary data a [`NeumannSolution`] was solved for.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialLabel {
    Rotation,
    TranslationX,
    TranslationY,
    Custom(String),
}

#[derive(Clone, Debug)]
pub struct NeumannSolution {
    pub body: Arc<BodyBoundary>,
    pub label: PotentialLabel,
    pub source_strengths: Vec<f64>,
    /// Boundary values at collocation points, shifted to zero mean.
    pub phi_boundary: Vec<f64>,
    /// The shift subtracted from the raw single-layer trace.
    pub phi_offset: f64,
    pub neumann_data: Vec<f64>,
}

impl NeumannSolution {
    /// Normal derivative reconstructed from the source strengths.
    pub fn normal_derivative(&self, solver: &PanelSolver) -> Vec<f64> {
        let s = DVector::from_column_slice(&self.source_strengths);
        (&solver.normal_influence * s).iter().copied().collect()
    }

    pub fn velocity_at(&self, x: Point) -> Point {
        source_velocity(&self.body, &self.source_strengths, x)
    }
}

fn source_velocity(body: &BodyBoundary, sigma: &[f64], x: Point) -> Point {
    body.panels()
        .iter()
        .zip(sigma)
        .fold(Point::zeros(), |acc, (p, &s)| {
            acc + panel_velocity(p, x, false) * s
        })
}

/// Factorized panel system for one body.
pub struct PanelSolver {
    body: Arc<BodyBoundary>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    normal_influence: DMatrix<f64>,
    potential_influence: DMatrix<f64>,
    tangential_influence: DMatrix<f64>,
}

impl PanelSolver {
    pub fn new(body: Arc<BodyBoundary>) -> Result<Self> {
        let panels = body.panels();
        let n = panels.len();
        let mut normal = DMatrix::zeros(n, n);
        let mut potential = DMatrix::zeros(n, n);
        let mut tangential = DMatrix::zeros(n, n);
        for (i, pi) in panels.iter().enumerate() {
            for (j, pj) in panels.iter().enumerate() {
                let v = panel_velocity(pj, pi.collocation, i == j);
                normal[(i, j)] = v.dot(&pi.normal);
                tangential[(i, j)] = if i == j { 0.0 } else { v.dot(&pi.tangent) };
                potential[(i, j)] = panel_potential(pj, pi.collocation);
            }
        }
        let lu = normal.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularInfluence);
        }
        Ok(PanelSolver {
            body,
            lu,
            normal_influence: normal,
            potential_influence: potential,
            tangential_influence: tangential,
        })
    }

    pub fn body(&self) -> &Arc<BodyBoundary> {
        &self.body
    }

    /// Solves for source strengths reproducing `data` as the normal velocity.
    pub fn solve(&self, data: &[f64], label: PotentialLabel) -> Result<NeumannSolution> {
        let n = self.body.len();
        if data.len() != n {
            return Err(Error::DataLength {
                expected: n,
                got: data.len(),
            });
        }
        let flux: f64 = self
            .body
            .panels()
            .iter()
            .zip(data)
            .map(|(p, g)| p.length * g)
            .sum();
        if flux.is_nan() || flux.abs() > FLUX_TOLERANCE {
            return Err(Error::IncompatibleFlux {
                flux,
                tol: FLUX_TOLERANCE,
            });
        }
        self.solve_unchecked(data, label)
    }

    fn solve_unchecked(&self, data: &[f64], label: PotentialLabel) -> Result<NeumannSolution> {
        let rhs = DVector::from_column_slice(data);
        let sigma = self.lu.solve(&rhs).ok_or(Error::SingularInfluence)?;
        let raw = &self.potential_influence * &sigma;
        let n = raw.len() as f64;
        let offset = raw.sum() / n;
        Ok(NeumannSolution {
            body: Arc::clone(&self.body),
            label,
            source_strengths: sigma.iter().copied().collect(),
            phi_boundary: raw.iter().map(|v| v - offset).collect(),
            phi_offset: offset,
            neumann_data: data.to_vec(),
        })
    }

    /// Boundary data `(X x n) . b3`, `n . b1`, `n . b2`.
    pub fn kirchhoff_data(&self) -> [Vec<f64>; 3] {
        let panels = self.body.panels();
        [
            panels
                .iter()
                .map(|p| p.midpoint.x * p.normal.y - p.midpoint.y * p.normal.x)
                .collect(),
            panels.iter().map(|p| p.normal.x).collect(),
            panels.iter().map(|p| p.normal.y).collect(),
        ]
    }

    pub fn kirchhoff_potentials(&self) -> Result<KirchhoffPotentials> {
        let [rot, tx, ty] = self.kirchhoff_data();
        Ok(KirchhoffPotentials {
            rotation: self.solve(&rot, PotentialLabel::Rotation)?,
            translation_x: self.solve(&tx, PotentialLabel::TranslationX)?,
            translation_y: self.solve(&ty, PotentialLabel::TranslationY)?,
        })
    }

    /// Circulatory flow: origin vortex plus a source correction that cancels
    /// its normal velocity on every panel.
    pub fn circulatory_flow(&self, circulation: f64) -> Result<CirculatoryFlow> {
        let panels = self.body.panels();
        let (normal, tangent): (Vec<f64>, Vec<f64>) = panels
            .iter()
            .map(|p| vortex_panel_average(circulation, p))
            .unzip();
        let data: Vec<f64> = normal.iter().map(|v| -v).collect();
        let correction =
            self.solve_unchecked(&data, PotentialLabel::Custom("circulation".into()))?;
        let sigma = DVector::from_column_slice(&correction.source_strengths);
        let induced_t = &self.tangential_influence * &sigma;
        let induced_n = &self.normal_influence * &sigma;
        let tangential_speed = tangent
            .iter()
            .zip(induced_t.iter())
            .map(|(a, b)| a + b)
            .collect();
        let normal_speed = normal
            .iter()
            .zip(induced_n.iter())
            .map(|(a, b)| a + b)
            .collect();
        let k = circulation / (2.0 * PI);
        let n = panels.len();
        let potential_increments = (0..n)
            .map(|i| {
                let (a, b) = (panels[(i + n - 1) % n].collocation, panels[i].collocation);
                let angle = (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
                k * angle + correction.phi_boundary[i] - correction.phi_boundary[(i + n - 1) % n]
            })
            .collect();
        Ok(CirculatoryFlow {
            body: Arc::clone(&self.body),
            circulation,
            tangential_speed,
            normal_speed,
            potential_increments,
            correction: correction.source_strengths,
        })
    }
}

#[derive(Clone, Debug)]
pub struct KirchhoffPotentials {
    pub rotation: NeumannSolution,
    pub translation_x: NeumannSolution,
    pub translation_y: NeumannSolution,
}

impl KirchhoffPotentials {
    pub fn as_array(&self) -> [&NeumannSolution; 3] {
        [&self.rotation, &self.translation_x, &self.translation_y]
    }

    /// Source strengths of `Omega Phi_Omega + Vx Phi_x + Vy Phi_y`.
    pub fn combined_strengths(&self, zeta: &Se2Vector) -> Vec<f64> {
        let w = [zeta.omega, zeta.v.x, zeta.v.y];
        let mut out = vec![0.0; self.rotation.source_strengths.len()];
        for (coef, sol) in w.iter().zip(self.as_array()) {
            for (o, s) in out.iter_mut().zip(&sol.source_strengths) {
                *o += coef * s;
            }
        }
        out
    }

    /// Boundary trace of the combined potential.
    pub fn combined_boundary(&self, zeta: &Se2Vector) -> Vec<f64> {
        let w = [zeta.omega, zeta.v.x, zeta.v.y];
        let mut out = vec![0.0; self.rotation.phi_boundary.len()];
        for (coef, sol) in w.iter().zip(self.as_array()) {
            for (o, s) in out.iter_mut().zip(&sol.phi_boundary) {
                *o += coef * s;
            }
        }
        out
    }
}

/// Solves a single exterior Neumann problem.
pub fn solve_neumann(body: &BodyBoundary, data: &[f64]) -> Result<NeumannSolution> {
    PanelSolver::new(Arc::new(body.clone()))?.solve(data, PotentialLabel::Custom("custom".into()))
}

pub fn kirchhoff_potentials(body: &BodyBoundary) -> Result<KirchhoffPotentials> {
    PanelSolver::new(Arc::new(body.clone()))?.kirchhoff_potentials()
}

/// Body, added and total mass matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MassModel {
    pub body: Matrix3<f64>,
    pub added: Matrix3<f64>,
    pub total: Matrix3<f64>,
    pub density: f64,
    inverse: Matrix3<f64>,
}

impl MassModel {
    /// Fails unless the total matrix is symmetric positive definite.
    pub fn new(body: Matrix3<f64>, added: Matrix3<f64>, density: f64) -> Result<Self> {
        let total = body + added;
        let scale = total.abs().max().max(f64::MIN_POSITIVE);
        if (total - total.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = total.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let inverse = chol.inverse();
        if !inverse.iter().all(|v| v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(MassModel {
            body,
            added,
            total,
            density,
            inverse,
        })
    }

    /// Mass model with no added mass.
    pub fn from_total(total: Matrix3<f64>) -> Result<Self> {
        Self::new(total, Matrix3::zeros(), 1.0)
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inverse
    }

    /// Body velocity `M^-1 pi` as a raw vector.
    pub fn velocity(&self, momentum: &Vector3<f64>) -> Vector3<f64> {
        self.inverse * momentum
    }

    /// Plain-text 3x3 blocks followed by a `key = value` section.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, m) in [
            ("M_b", &self.body),
            ("M_f", &self.added),
            ("M", &self.total),
        ] {
            let _ = writeln!(s, "{name}");
            for i in 0..3 {
                let _ = writeln!(
                    s,
                    "{:.16e} {:.16e} {:.16e}",
                    m[(i, 0)],
                    m[(i, 1)],
                    m[(i, 2)]
                );
            }
            s.push('\n');
        }
        s.push_str("[mass]\n");
        s.push_str(&self.to_key_values());
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = format!("density = {:.16e}\n", self.density);
        for (name, m) in [("body", &self.body), ("added", &self.added)] {
            for i in 0..3 {
                for j in 0..3 {
                    let _ = writeln!(s, "{name}_{i}{j} = {:.16e}", m[(i, j)]);
                }
            }
        }
        s
    }

    /// Parses the `key = value` lines written by [`MassModel::to_key_values`].
    /// Section headers, blank lines and `#` comments are skipped.
    pub fn from_key_values(text: &str) -> std::result::Result<Self, String> {
        let mut body = [[None; 3]; 3];
        let mut added = [[None; 3]; 3];
        let mut density = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                // the plain-text blocks precede the key-value section
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            let value: f64 = v
                .parse()
                .map_err(|_| format!("line {}: bad number `{v}`", lineno + 1))?;
            if k == "density" {
                density = Some(value);
                continue;
            }
            let (target, idx) = if let Some(idx) = k.strip_prefix("body_") {
                (&mut body, idx)
            } else if let Some(idx) = k.strip_prefix("added_") {
                (&mut added, idx)
            } else {
                return Err(format!("line {}: unknown key `{k}`", lineno + 1));
            };
            let b = idx.as_bytes();
            if b.len() != 2 || !(b'0'..=b'2').contains(&b[0]) || !(b'0'..=b'2').contains(&b[1]) {
                return Err(format!("line {}: unknown key `{k}`", lineno + 1));
            }
            target[(b[0] - b'0') as usize][(b[1] - b'0') as usize] = Some(value);
        }
        let collect = |name: &str, m: [[Option<f64>; 3]; 3]| {
            let mut out = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    out[(i, j)] = m[i][j].ok_or_else(|| format!("missing key `{name}_{i}{j}`"))?;
                }
            }
            Ok::<_, String>(out)
        };
        let body = collect("body", body)?;
        let added = collect("added", added)?;
        let density = density.ok_or("missing key `density`")?;
        MassModel::new(body, added, density).map_err(|e| e.to_string())
    }
}

/// Added mass from the Kirchhoff potentials, plus the raw asymmetry.
pub struct AddedMass {
    pub model: MassModel,
    /// `max |M_f - M_f^T| / max |M_f|` before symmetrization.
    pub asymmetry: f64,
}

/// `(M_f)_ij = rho * int Phi_i dPhi_j/dn dS` with the normal taken into the
/// body, i.e. minus the boundary sum with the outward panel normal.
pub fn added_mass_matrix(body: &BodyBoundary, potentials: &KirchhoffPotentials) -> Matrix3<f64> {
    let sols = potentials.as_array();
    let mut mf = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            mf[(i, j)] = -body
                .panels()
                .iter()
                .enumerate()
                .map(|(k, p)| sols[i].phi_boundary[k] * sols[j].neumann_data[k] * p.arc_length)
                .sum::<f64>();
        }
    }
    mf
}

pub fn added_mass_with_asymmetry(body: &BodyBoundary, density: f64) -> Result<AddedMass> {
    let potentials = kirchhoff_potentials(body)?;
    let raw = added_mass_matrix(body, &potentials) * density;
    let scale = raw.abs().max().max(f64::MIN_POSITIVE);
    let asymmetry = (raw - raw.transpose()).abs().max() / scale;
    let added = (raw + raw.transpose()) * 0.5;
    let model = MassModel::new(rigid_mass(body, density).matrix, added, density)?;
    Ok(AddedMass { model, asymmetry })
}

/// Full mass model `M = M_b + M_f` for a body of density `density`.
pub fn added_mass(body: &BodyBoundary, density: f64) -> Result<MassModel> {
    let am = added_mass_with_asymmetry(body, density)?;
    if am.asymmetry > ASYMMETRY_TOLERANCE {
        return Err(Error::AddedMassAsymmetry(am.asymmetry));
    }
    Ok(am.model)
}

#[derive(Clone, Debug)]
pub struct CirculatoryFlow {
    pub body: Arc<BodyBoundary>,
    pub circulation: f64,
    /// Tangential velocity per panel (counterclockwise positive).
    pub tangential_speed: Vec<f64>,
    /// Residual normal velocity per panel.
    pub normal_speed: Vec<f64>,
    /// Increment of the flow potential from the midpoint of panel `i - 1`
    /// to that of panel `i`; entry `i` belongs to node `i`.
    pub potential_increments: Vec<f64>,
    /// Source strengths of the normal-flow correction.
    pub correction: Vec<f64>,
}

impl CirculatoryFlow {
    /// Loop integral of the tangential velocity. The correction potential
    /// telescopes, so this is the circulation up to roundoff.
    pub fn loop_integral(&self) -> f64 {
        self.potential_increments.iter().sum()
    }

    /// `int f(X) u_t dS = int f dPhi` over the boundary, as a
    /// Stieltjes sum with `f` sampled at the nodes.
    pub fn boundary_moment(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.body
            .nodes()
            .iter()
            .zip(&self.potential_increments)
            .map(|(&x, d)| f(x) * d)
            .sum()
    }

    /// Midpoint-rule version of [`CirculatoryFlow::boundary_moment`] using
    /// the collocated tangential speeds.
    pub fn boundary_moment_midpoint(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.body
            .panels()
            .iter()
            .zip(&self.tangential_speed)
            .map(|(p, u)| f(p.collocation) * u * p.arc_length)
            .sum()
    }

    pub fn velocity_at(&self, x: Point) -> Point {
        vortex_velocity(self.circulation, x) + source_velocity(&self.body, &self.correction, x)
    }
}

pub fn circulatory_flow(body: &BodyBoundary, circulation: f64) -> Result<CirculatoryFlow> {
    PanelSolver::new(Arc::new(body.clone()))?.circulatory_flow(circulation)
}

/// Kirchhoff potentials and unit circulatory flow for repeated field queries.
pub struct FlowModel {
    pub potentials: KirchhoffPotentials,
    pub unit_circulation: CirculatoryFlow,
}

impl FlowModel {
    pub fn new(body: &BodyBoundary) -> Result<Self> {
        let solver = PanelSolver::new(Arc::new(body.clone()))?;
        Ok(FlowModel {
            potentials: solver.kirchhoff_potentials()?,
            unit_circulation: solver.circulatory_flow(1.0)?,
        })
    }

    pub fn body(&self) -> &BodyBoundary {
        &self.unit_circulation.body
    }

    /// `grad Phi_zeta + u_Gamma` at body-frame points; points inside the body
    /// or on its contour yield an error in their slot.
    pub fn velocity_field(
        &self,
        zeta: &Se2Vector,
        circulation: f64,
        points: &[Point],
    ) -> Vec<Result<Point>> {
        let sigma = self.potentials.combined_strengths(zeta);
        let body = self.body();
        points
            .iter()
            .map(|&x| {
                if body.contains(x) {
                    return Err(Error::PointInsideBody(x.x, x.y));
                }
                let u = source_velocity(body, &sigma, x)
                    + self.unit_circulation.velocity_at(x) * circulation;
                if u.iter().all(|v| v.is_finite()) {
                    Ok(u)
                } else {
                    Err(Error::PointInsideBody(x.x, x.y))
                }
            })
            .collect()
    }
}

pub fn velocity_field(
    body: &BodyBoundary,
    zeta: &Se2Vector,
    circulation: f64,
    points: &[Point],
) -> Result<Vec<Result<Point>>> {
    Ok(FlowModel::new(body)?.velocity_field(zeta, circulation, points))
}

/// Integrand of the curvature boundary integral: the Hodge star of
/// `dPsi_1 ^ dPsi_2` on the boundary, for rigid stream functions.
pub fn stream_wedge(zeta1: &Se2Vector, zeta2: &Se2Vector, x: Point) -> f64 {
    // U1 U2 sin(a1 - a2) = V1y V2x - V1x V2y
    let cross = zeta1.v.y * zeta2.v.x - zeta1.v.x * zeta2.v.y;
    cross + zeta1.omega * x.dot(&zeta2.v) - zeta2.omega * x.dot(&zeta1.v)
}

/// Gamma-component of the Neumann-connection curvature,
/// `-int alpha_Gamma ^ *(dPsi_1 ^ dPsi_2)`, by panel quadrature.
pub fn curvature_from_flow(flow: &CirculatoryFlow, zeta1: &Se2Vector, zeta2: &Se2Vector) -> f64 {
    -flow.boundary_moment(|x| stream_wedge(zeta1, zeta2, x))
}

pub fn curvature_gamma(
    body: &BodyBoundary,
    circulation: f64,
    zeta1: &Se2Vector,
    zeta2: &Se2Vector,
) -> Result<f64> {
    let flow = circulatory_flow(body, circulation)?;
    Ok(curvature_from_flow(&flow, zeta1, zeta2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_body, Shape};
    use approx::assert_relative_eq;

    fn panel(a: (f64, f64), b: (f64, f64)) -> Panel {
        let body = BodyBoundary::from_nodes(vec![
            Point::new(a.0, a.1),
            Point::new(b.0, b.1),
            Point::new(0.3, 2.0),
        ])
        .unwrap();
        body.panels()[0]
    }

    /// Brute-force midpoint quadrature of the panel integrals.
    fn quad_potential(p: &Panel, x: Point, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) / n as f64;
                let y = p.start + (p.end - p.start) * s;
                (x - y).norm().ln() / (2.0 * PI)
            })
            .sum::<f64>()
            * p.length
            / n as f64
    }

    #[test]
    fn panel_kernels_match_quadrature() {
        let p = panel((0.2, -0.1), (1.1, 0.4));
        for x in [
            Point::new(0.5, 1.0),
            Point::new(-1.0, -0.3),
            Point::new(3.0, 2.0),
        ] {
            assert_relative_eq!(
                panel_potential(&p, x),
                quad_potential(&p, x, 20000),
                epsilon = 1e-8
            );
            let h = 1e-5;
            let gx = (panel_potential(&p, x + Point::new(h, 0.0))
                - panel_potential(&p, x - Point::new(h, 0.0)))
                / (2.0 * h);
            let gy = (panel_potential(&p, x + Point::new(0.0, h))
                - panel_potential(&p, x - Point::new(0.0, h)))
                / (2.0 * h);
            let v = panel_velocity(&p, x, false);
            assert_relative_eq!(v.x, gx, epsilon = 1e-8);
            assert_relative_eq!(v.y, gy, epsilon = 1e-8);
        }
    }

    #[test]
    fn self_potential_is_analytic() {
        let p = panel((0.0, 0.0), (2.0, 0.0));
        let expected = (2.0 * (1.0f64).ln() - 2.0) / (2.0 * PI);
        assert_relative_eq!(panel_potential(&p, p.midpoint), expected, epsilon = 1e-15);
        // approaching from outside recovers the +1/2 jump
        let v = panel_velocity(&p, p.midpoint + p.normal * 1e-9, false);
        assert_relative_eq!(v.dot(&p.normal), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn incompatible_flux_is_rejected() {
        let body = make_body(&Shape::Circle { radius: 1.0 }, 32).unwrap();
        let data = vec![1.0; 32];
        match solve_neumann(&body, &data) {
            Err(Error::IncompatibleFlux { flux, .. }) => assert!(flux > 6.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            solve_neumann(&body, &[0.0; 3]),
            Err(Error::DataLength { .. })
        ));
    }

    #[test]
    fn zero_data_zero_solution() {
        let body = make_body(&Shape::Ellipse { a: 1.5, b: 1.0 }, 48).unwrap();
        let sol = solve_neumann(&body, &[0.0; 48]).unwrap();
        assert!(sol.source_strengths.iter().all(|&s| s == 0.0));
        assert!(sol.phi_boundary.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn reconstructed_normal_derivative_matches_data() {
        let body = Arc::new(
            make_body(
                &Shape::Joukowski {
                    circle_radius: 1.15,
                    center: [-0.1, 0.1],
                    c: 1.0,
                },
                128,
            )
            .unwrap(),
        );
        let solver = PanelSolver::new(body).unwrap();
        let pots = solver.kirchhoff_potentials().unwrap();
        for sol in pots.as_array() {
            let dn = sol.normal_derivative(&solver);
            for (a, b) in dn.iter().zip(&sol.neumann_data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_key_values_round_trip() {
        let body = make_body(&Shape::Ellipse { a: 2.0, b: 1.0 }, 64).unwrap();
        let m = added_mass(&body, 1.0).unwrap();
        let back = MassModel::from_key_values(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(MassModel::from_key_values("density = 1\nbogus_00 = 1").is_err());
        assert!(MassModel::from_key_values("density = 1\nbody_00 = 1")
            .unwrap_err()
            .contains("body_01"));
    }

    #[test]
    fn mass_model_rejects_indefinite() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert_eq!(MassModel::from_total(m), Err(Error::NotPositiveDefinite));
        assert_eq!(
            MassModel::from_total(Matrix3::zeros()),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn zero_circulation_is_zero_flow() {
        let body = make_body(&Shape::Ellipse { a: 2.0, b: 1.0 }, 64).unwrap();
        let flow = circulatory_flow(&body, 0.0).unwrap();
        assert!(flow.tangential_speed.iter().all(|&u| u == 0.0));
        assert_eq!(flow.velocity_at(Point::new(3.0, 1.0)), Point::zeros());
    }

    #[test]
    fn points_inside_are_flagged() {
        let body = make_body(&Shape::Circle { radius: 1.0 }, 64).unwrap();
        let zeta = Se2Vector::new(0.0, 1.0, 0.0);
        let out = velocity_field(
            &body,
            &zeta,
            1.0,
            &[Point::new(0.2, 0.1), Point::new(2.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(out[0], Err(Error::PointInsideBody(..))));
        assert!(out[1].is_ok());
        let node = body.nodes()[0];
        let on = velocity_field(&body, &zeta, 1.0, &[node]).unwrap();
        assert!(matches!(on[0], Err(Error::PointInsideBody(..))));
    }

    fn arc_panel() -> Panel {
        let body = make_body(&Shape::Circle { radius: 1.0 }, 12).unwrap();
        body.panels()[2]
    }

    fn arc_quadrature(p: &Panel, x: Point, n: usize) -> f64 {
        let h = p.arc_length / n as f64;
        (0..n)
            .map(|k| {
                let y = p.point_at(-0.5 * p.arc_length + (k as f64 + 0.5) * h);
                (x - y).norm().ln() / (2.0 * PI)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn arc_kernels_match_quadrature() {
        let p = arc_panel();
        let near = p.collocation + p.normal * 0.05 + p.tangent * 0.1;
        let far = p.collocation * 4.0;
        for x in [near, far, Point::new(-0.8, 0.1)] {
            assert_relative_eq!(
                panel_potential(&p, x),
                arc_quadrature(&p, x, 20000),
                epsilon = 1e-8
            );
            let h = 1e-5;
            let g =
                |d: Point| (panel_potential(&p, x + d) - panel_potential(&p, x - d)) / (2.0 * h);
            let v = panel_velocity(&p, x, false);
            assert_relative_eq!(v.x, g(Point::new(h, 0.0)), epsilon = 1e-6);
            assert_relative_eq!(v.y, g(Point::new(0.0, h)), epsilon = 1e-6);
        }
    }

    #[test]
    fn arc_self_terms() {
        let p = arc_panel();
        // the log singularity is integrable
        assert_relative_eq!(
            panel_potential(&p, p.collocation),
            arc_quadrature(&p, p.collocation, 200_000),
            epsilon = 1e-6
        );
        // on a circle the principal value of K' is L / (4 pi R)
        let expected = 0.5 + p.arc_length / (4.0 * PI);
        let v = panel_velocity(&p, p.collocation, true);
        assert_relative_eq!(v.dot(&p.normal), expected, epsilon = 1e-15);
        let outside = panel_velocity(&p, p.collocation + p.normal * 1e-7, false);
        assert_relative_eq!(outside.dot(&p.normal), expected, epsilon = 1e-5);
    }

    fn ellipse_error(n: usize) -> f64 {
        let (a, b) = (2.0, 1.0);
        let body = make_body(&Shape::Ellipse { a, b }, n).unwrap();
        let mf = added_mass(&body, 1.0).unwrap().added;
        let exact = Vector3::new(PI / 8.0 * (a * a - b * b).powi(2), PI * b * b, PI * a * a);
        (0..3)
            .map(|k| (mf[(k, k)] / exact[k] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn added_mass_converges_at_second_order() {
        let errors: Vec<f64> = [128, 256, 512].iter().map(|&n| ellipse_error(n)).collect();
        for w in errors.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errors:?}");
        }
    }

    #[test]
    fn circle_translation_trace() {
        // Phi_x = -cos(theta) on the unit circle
        let n = 256;
        let body = make_body(&Shape::Circle { radius: 1.0 }, n).unwrap();
        let pots = kirchhoff_potentials(&body).unwrap();
        let err = body
            .panels()
            .iter()
            .zip(&pots.translation_x.phi_boundary)
            .map(|(p, phi)| (phi + p.collocation.x).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        // rotation of a circle displaces no fluid
        let rot = pots
            .rotation
            .phi_boundary
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(rot < 1e-12);
    }

    #[test]
    fn ellipse_rotation_potential_is_nontrivial() {
        let body = make_body(&Shape::Ellipse { a: 2.0, b: 1.0 }, 64).unwrap();
        let pots = kirchhoff_potentials(&body).unwrap();
        assert!(pots.rotation.phi_boundary.iter().any(|v| v.abs() > 0.1));
    }

    fn joukowski(n: usize) -> BodyBoundary {
        make_body(
            &Shape::Joukowski {
                circle_radius: 1.15,
                center: [-0.1, 0.1],
                c: 1.0,
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn circulatory_moments_vanish_about_conformal_center() {
        let flow = circulatory_flow(&joukowski(256), 1.0).unwrap();
        assert_relative_eq!(flow.loop_integral(), 1.0, epsilon = 1e-12);
        assert!(flow.boundary_moment(|x| x.x).abs() < 1e-4);
        assert!(flow.boundary_moment(|x| x.y).abs() < 1e-4);
        assert!(flow.normal_speed.iter().all(|u| u.abs() < 1e-12));
    }

    #[test]
    fn curvature_is_antisymmetric_and_bilinear() {
        let flow = circulatory_flow(&joukowski(128), 1.3).unwrap();
        let a = Se2Vector::new(0.4, 1.0, -0.2);
        let b = Se2Vector::new(-0.7, 0.3, 0.9);
        let c = Se2Vector::new(0.1, -0.5, 0.6);
        let k = |x: &Se2Vector, y: &Se2Vector| curvature_from_flow(&flow, x, y);
        assert_relative_eq!(k(&a, &b), -k(&b, &a), epsilon = 1e-14);
        assert_eq!(k(&a, &a), 0.0);
        assert_relative_eq!(
            k(&(a * 2.0 + c), &b),
            2.0 * k(&a, &b) + k(&c, &b),
            epsilon = 1e-13
        );
    }

    #[test]
    fn far_field_is_the_vortex() {
        let body = joukowski(128);
        let zeta = Se2Vector::new(0.3, 1.0, 0.5);
        let gamma = 2.0;
        let remainder = |r: f64| {
            let x = Point::new(0.6, -0.8) * r;
            let u = velocity_field(&body, &zeta, gamma, &[x])
                .unwrap()
                .remove(0)
                .unwrap();
            (u - vortex_velocity(gamma, x)).norm()
        };
        // what is left after the vortex is a dipole, falling off as r^-2
        let (near, far) = (remainder(100.0), remainder(1000.0));
        assert!(near < 0.05 * vortex_velocity(gamma, Point::new(100.0, 0.0)).norm());
        assert_relative_eq!(near / far, 100.0, max_relative = 0.1);
    }
}
