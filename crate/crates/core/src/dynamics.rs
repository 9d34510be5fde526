//! Reduced equations of motion on se(2)* with the magnetic term, their
//! lift to osc*, fixed-step integrators and pose reconstruction.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{SVector, Vector2, Vector3, Vector4};

use crate::algebra::{
    casimir_magnetic, integrated_rotation, perp, rotation, Normalization, OscMomentum, Se2Element,
    Se2Momentum, Se2Vector,
};
use crate::error::{Error, Result};
use crate::potential::MassModel;

/// Fixed-point tolerance of the implicit midpoint solve, relative to the
/// state magnitude.
pub const MIDPOINT_TOLERANCE: f64 = 1e-13;
pub const MIDPOINT_MAX_ITERATIONS: usize = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    #[default]
    ImplicitMidpoint,
}

impl FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "implicit_midpoint" => Ok(Integrator::ImplicitMidpoint),
            other => Err(format!(
                "unknown integrator `{other}` (rk4|implicit_midpoint)"
            )),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

/// Which phase space the momentum ODE is integrated in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseSpace {
    #[default]
    Se2Magnetic,
    /// osc* with the central coordinate initialized to the circulation.
    Osc,
}

impl FromStr for PhaseSpace {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "se2_magnetic" => Ok(PhaseSpace::Se2Magnetic),
            "osc" => Ok(PhaseSpace::Osc),
            other => Err(format!("unknown space `{other}` (se2_magnetic|osc)")),
        }
    }
}

impl fmt::Display for PhaseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseSpace::Se2Magnetic => "se2_magnetic",
            PhaseSpace::Osc => "osc",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub mass: MassModel,
    pub circulation: f64,
    pub dt: f64,
    pub steps: usize,
    pub integrator: Integrator,
    pub initial_momentum: Se2Momentum,
    pub initial_pose: Se2Element,
    pub space: PhaseSpace,
}

impl SimConfig {
    pub fn new(mass: MassModel, circulation: f64, dt: f64, steps: usize) -> Self {
        SimConfig {
            mass,
            circulation,
            dt,
            steps,
            integrator: Integrator::default(),
            initial_momentum: Se2Momentum::default(),
            initial_pose: Se2Element::identity(),
            space: PhaseSpace::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.circulation.is_finite() {
            return Err(Error::InvalidConfig("circulation is not finite".into()));
        }
        let finite = self
            .initial_momentum
            .to_vector()
            .iter()
            .all(|v| v.is_finite())
            && self.initial_pose.theta.is_finite()
            && self.initial_pose.translation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("initial state is not finite".into()));
        }
        Ok(())
    }
}

/// Shared momentum rate; both phase spaces call exactly this.
fn rate(pi: &Vector3<f64>, inverse: &nalgebra::Matrix3<f64>, gamma: f64) -> Vector3<f64> {
    let zeta = inverse * pi;
    let (omega, vx, vy) = (zeta.x, zeta.y, zeta.z);
    let (px, py) = (pi.y, pi.z);
    Vector3::new(
        px * vy - py * vx,
        omega * py - gamma * vy,
        -omega * px + gamma * vx,
    )
}

/// `pi_dot` for the body with circulation `gamma`.
pub fn eom_rhs(pi: &Se2Momentum, mass: &MassModel, gamma: f64) -> Se2Momentum {
    Se2Momentum::from_vector(&rate(&pi.to_vector(), mass.inverse(), gamma))
}

/// `nu_dot` on osc*; the central rate is zero.
pub fn eom_rhs_osc(nu: &OscMomentum, mass: &MassModel) -> OscMomentum {
    OscMomentum::new(eom_rhs(&nu.momentum, mass, nu.central), 0.0)
}

pub fn body_velocity(pi: &Se2Momentum, mass: &MassModel) -> Se2Vector {
    Se2Vector::from_vector(&mass.velocity(&pi.to_vector()))
}

/// `1/2 pi^T M^-1 pi`.
pub fn hamiltonian(pi: &Se2Momentum, mass: &MassModel) -> f64 {
    let p = pi.to_vector();
    0.5 * p.dot(&(mass.inverse() * p))
}

/// `H + p^2 / 2`.
pub fn hamiltonian_osc(nu: &OscMomentum, mass: &MassModel) -> f64 {
    hamiltonian(&nu.momentum, mass) + 0.5 * nu.central * nu.central
}

/// `Gamma b3 x V`, in the body frame.
pub fn kutta_zhukowski_force(pi: &Se2Momentum, mass: &MassModel, gamma: f64) -> Vector2<f64> {
    perp(&body_velocity(pi, mass).v) * gamma
}

/// Casimir recorded in trajectories: the verified magnetic Casimir, or
/// `|P|^2` when there is no circulation.
pub fn casimir_diagnostic(pi: &Se2Momentum, gamma: f64) -> f64 {
    casimir_magnetic(pi, gamma, Normalization::Verified)
        .unwrap_or_else(|_| pi.linear.norm_squared())
}

fn rk4_step<const D: usize>(
    z: &SVector<f64, D>,
    dt: f64,
    f: impl Fn(&SVector<f64, D>) -> SVector<f64, D>,
) -> SVector<f64, D> {
    let k1 = f(z);
    let k2 = f(&(z + k1 * (0.5 * dt)));
    let k3 = f(&(z + k2 * (0.5 * dt)));
    let k4 = f(&(z + k3 * dt));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn midpoint_step<const D: usize>(
    z: &SVector<f64, D>,
    dt: f64,
    step: usize,
    f: impl Fn(&SVector<f64, D>) -> SVector<f64, D>,
) -> Result<SVector<f64, D>> {
    let scale = z.amax().max(1.0);
    let mut next = z + f(z) * dt;
    let mut residual = f64::INFINITY;
    for _ in 0..MIDPOINT_MAX_ITERATIONS {
        let update = z + f(&((z + next) * 0.5)) * dt;
        residual = (update - next).amax() / scale;
        next = update;
        if residual <= MIDPOINT_TOLERANCE {
            return Ok(next);
        }
    }
    Err(Error::MidpointDivergence { step, residual })
}

fn advance<const D: usize>(
    z: &SVector<f64, D>,
    dt: f64,
    integrator: Integrator,
    step: usize,
    f: impl Fn(&SVector<f64, D>) -> SVector<f64, D>,
) -> Result<SVector<f64, D>> {
    let next = match integrator {
        Integrator::Rk4 => rk4_step(z, dt, f),
        Integrator::ImplicitMidpoint => midpoint_step(z, dt, step, f)?,
    };
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite(step))
    }
}

/// One step of the se(2)* magnetic system. `step` only labels errors.
pub fn step(pi: &Se2Momentum, config: &SimConfig, step: usize) -> Result<Se2Momentum> {
    let inv = *config.mass.inverse();
    let gamma = config.circulation;
    let z = advance(&pi.to_vector(), config.dt, config.integrator, step, |z| {
        rate(z, &inv, gamma)
    })?;
    Ok(Se2Momentum::from_vector(&z))
}

/// One step on osc*.
pub fn step_osc(nu: &OscMomentum, config: &SimConfig, step: usize) -> Result<OscMomentum> {
    let inv = *config.mass.inverse();
    let v = nu.momentum.to_vector();
    let z = Vector4::new(v.x, v.y, v.z, nu.central);
    let z = advance(&z, config.dt, config.integrator, step, |z| {
        let r = rate(&Vector3::new(z[0], z[1], z[2]), &inv, z[3]);
        Vector4::new(r.x, r.y, r.z, 0.0)
    })?;
    Ok(OscMomentum::new(Se2Momentum::new(z[0], z[1], z[2]), z[3]))
}

/// Integrates `g_dot = g zeta` with `g_{k+1} = g_k exp(dt zeta_{k+1/2})`,
/// where `zeta_{k+1/2} = M^-1 (pi_k + pi_{k+1}) / 2`.
pub fn reconstruct_pose(
    momenta: &[Se2Momentum],
    mass: &MassModel,
    initial: Se2Element,
    dt: f64,
) -> Vec<Se2Element> {
    let mut poses = Vec::with_capacity(momenta.len());
    let mut g = initial;
    poses.push(g);
    for w in momenta.windows(2) {
        let mid = (w[0] + w[1]) * 0.5;
        g = g.compose(&Se2Element::exp(&body_velocity(&mid, mass), dt));
        poses.push(g);
    }
    poses
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub momenta: Vec<Se2Momentum>,
    /// Central coordinate per sample when integrated on osc*.
    pub central: Option<Vec<f64>>,
    pub poses: Vec<Se2Element>,
    pub energy: Vec<f64>,
    pub casimir: Vec<f64>,
    /// `R_theta P`.
    pub spatial_momentum: Vec<Vector2<f64>>,
    /// Body-frame Kutta-Zhukowski force.
    pub force: Vec<Vector2<f64>>,
}

pub const TRAJECTORY_HEADER: &str = "t,Pi,Px,Py,theta,x0,y0,H,Casimir,Fx_KZ,Fy_KZ";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|q - q_0| / max(|q_0|, 1e-300)` over the samples.
    pub fn relative_drift(series: &[f64]) -> f64 {
        let Some(&first) = series.first() else {
            return 0.0;
        };
        let scale = first.abs().max(1e-300);
        series
            .iter()
            .map(|v| (v - first).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        Self::relative_drift(&self.energy)
    }

    pub fn casimir_drift(&self) -> f64 {
        Self::relative_drift(&self.casimir)
    }

    /// Largest deviation of `R_theta P` from its initial value, relative to
    /// its initial norm.
    pub fn spatial_momentum_drift(&self) -> f64 {
        let first = self.spatial_momentum[0];
        let scale = first.norm().max(1e-300);
        self.spatial_momentum
            .iter()
            .map(|p| (p - first).norm() / scale)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for i in 0..self.len() {
            let (pi, g, f) = (&self.momenta[i], &self.poses[i], &self.force[i]);
            let row = [
                self.times[i],
                pi.angular,
                pi.linear.x,
                pi.linear.y,
                g.theta,
                g.translation.x,
                g.translation.y,
                self.energy[i],
                self.casimir[i],
                f.x,
                f.y,
            ];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Runs the configured integration and records diagnostics at every sample.
pub fn integrate(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let n = config.steps + 1;
    let gamma = config.circulation;
    let mut momenta = Vec::with_capacity(n);
    let mut central = None;
    match config.space {
        PhaseSpace::Se2Magnetic => {
            let mut pi = config.initial_momentum;
            momenta.push(pi);
            for k in 0..config.steps {
                pi = step(&pi, config, k)?;
                momenta.push(pi);
            }
        }
        PhaseSpace::Osc => {
            let mut nu = OscMomentum::new(config.initial_momentum, gamma);
            let mut ps = Vec::with_capacity(n);
            momenta.push(nu.momentum);
            ps.push(nu.central);
            for k in 0..config.steps {
                nu = step_osc(&nu, config, k)?;
                momenta.push(nu.momentum);
                ps.push(nu.central);
            }
            central = Some(ps);
        }
    }
    let poses = reconstruct_pose(&momenta, &config.mass, config.initial_pose, config.dt);
    let times = (0..n).map(|k| k as f64 * config.dt).collect();
    let energy = momenta
        .iter()
        .map(|p| hamiltonian(p, &config.mass))
        .collect();
    let casimir = momenta
        .iter()
        .map(|p| casimir_diagnostic(p, gamma))
        .collect();
    let spatial_momentum = momenta
        .iter()
        .zip(&poses)
        .map(|(p, g)| g.rotation() * p.linear)
        .collect();
    let force = momenta
        .iter()
        .map(|p| kutta_zhukowski_force(p, &config.mass, gamma))
        .collect();
    Ok(Trajectory {
        times,
        momenta,
        central,
        poses,
        energy,
        casimir,
        spatial_momentum,
        force,
    })
}

/// Closed-form motion for `M = diag(I, m, m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicSolution {
    pub initial_momentum: Se2Momentum,
    pub initial_pose: Se2Element,
    pub mass: f64,
    pub inertia: f64,
    pub circulation: f64,
}

/// Relative tolerance for treating a mass matrix as isotropic.
pub const ISOTROPY_TOLERANCE: f64 = 1e-9;

pub fn analytic_isotropic(
    initial_momentum: Se2Momentum,
    initial_pose: Se2Element,
    mass: &MassModel,
    circulation: f64,
) -> Result<IsotropicSolution> {
    let m = &mass.total;
    let scale = m.abs().max();
    let off = [m[(0, 1)], m[(0, 2)], m[(1, 2)]]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if off > ISOTROPY_TOLERANCE * scale {
        return Err(Error::Anisotropic(format!("off-diagonal entry {off:e}")));
    }
    if (m[(1, 1)] - m[(2, 2)]).abs() > ISOTROPY_TOLERANCE * scale {
        return Err(Error::Anisotropic(format!(
            "translational masses {} and {} differ",
            m[(1, 1)],
            m[(2, 2)]
        )));
    }
    Ok(IsotropicSolution {
        initial_momentum,
        initial_pose,
        mass: 0.5 * (m[(1, 1)] + m[(2, 2)]),
        inertia: m[(0, 0)],
        circulation,
    })
}

impl IsotropicSolution {
    pub fn angular_velocity(&self) -> f64 {
        self.initial_momentum.angular / self.inertia
    }

    /// Rate at which `P` turns clockwise in the body frame.
    pub fn momentum_rate(&self) -> f64 {
        self.angular_velocity() - self.circulation / self.mass
    }

    /// Rate at which the spatial velocity turns.
    pub fn path_rate(&self) -> f64 {
        self.circulation / self.mass
    }

    pub fn momentum(&self, t: f64) -> Se2Momentum {
        Se2Momentum {
            angular: self.initial_momentum.angular,
            linear: rotation(-self.momentum_rate() * t) * self.initial_momentum.linear,
        }
    }

    pub fn pose(&self, t: f64) -> Se2Element {
        let g0 = self.initial_pose;
        let v0 = self.initial_momentum.linear / self.mass;
        Se2Element {
            theta: g0.theta + self.angular_velocity() * t,
            translation: g0.translation
                + g0.rotation() * integrated_rotation(self.path_rate(), t) * v0,
        }
    }

    /// Center of the circular path, or `None` without circulation.
    pub fn center(&self) -> Option<Vector2<f64>> {
        let k = self.path_rate();
        if k == 0.0 {
            return None;
        }
        let v0 = self.initial_momentum.linear / self.mass;
        Some(self.initial_pose.translation + perp(&(self.initial_pose.rotation() * v0)) / k)
    }

    pub fn radius(&self) -> Option<f64> {
        (self.circulation != 0.0)
            .then(|| self.initial_momentum.linear.norm() / self.circulation.abs())
    }

    /// Period of the center path.
    pub fn path_period(&self) -> Option<f64> {
        let k = self.path_rate();
        (k != 0.0).then(|| 2.0 * std::f64::consts::PI / k.abs())
    }

    /// Period of `P` in the body frame.
    pub fn momentum_period(&self) -> Option<f64> {
        let w = self.momentum_rate();
        (w != 0.0).then(|| 2.0 * std::f64::consts::PI / w.abs())
    }
}
