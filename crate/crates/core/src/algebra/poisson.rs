//! Poisson structure matrices on se(2)* and osc*, and bracket evaluation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{coefficients, lie_bracket_se2, Normalization, Se2Momentum, Se2Vector, SYMPLECTIC};
use crate::error::{Error, Result};

/// A linear Poisson structure on coordinates `z`.
///
/// All structures here are affine in `z`, so `partial(k)` is constant.
pub trait PoissonStructure {
    fn dim(&self) -> usize;
    fn matrix(&self, z: &DVector<f64>) -> DMatrix<f64>;
    fn name(&self) -> String;

    /// `d Lambda / d z_k`.
    fn partial(&self, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        self.matrix(&e) - self.matrix(&DVector::zeros(n))
    }
}

/// The three spaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoissonSpace {
    /// Lie-Poisson structure on se(2)*, coordinates `(Pi, Px, Py)`.
    Se2,
    /// se(2)* with the magnetic term, coordinates `(Pi, Px, Py)`.
    Se2Magnetic(f64),
    /// osc*, coordinates `(Pi, Px, Py, p)`.
    Osc,
}

impl PoissonStructure for PoissonSpace {
    fn dim(&self) -> usize {
        match self {
            PoissonSpace::Se2 | PoissonSpace::Se2Magnetic(_) => 3,
            PoissonSpace::Osc => 4,
        }
    }

    fn matrix(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let (px, py) = (z[1], z[2]);
        let gamma = match self {
            PoissonSpace::Se2 => 0.0,
            PoissonSpace::Se2Magnetic(g) => *g,
            PoissonSpace::Osc => z[3],
        };
        let mut m = DMatrix::zeros(n, n);
        m[(0, 1)] = -py;
        m[(0, 2)] = px;
        m[(1, 0)] = py;
        m[(2, 0)] = -px;
        m[(1, 2)] = -gamma;
        m[(2, 1)] = gamma;
        m
    }

    fn name(&self) -> String {
        match self {
            PoissonSpace::Se2 => "se2".into(),
            PoissonSpace::Se2Magnetic(g) => format!("se2_magnetic({g})"),
            PoissonSpace::Osc => "osc".into(),
        }
    }
}

/// Structure matrix at `point`, checking the dimension.
pub fn structure_matrix<S: PoissonStructure + ?Sized>(
    space: &S,
    point: &[f64],
) -> Result<DMatrix<f64>> {
    if point.len() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: point.len(),
        });
    }
    Ok(space.matrix(&DVector::from_column_slice(point)))
}

/// A scalar field with exact first and second derivatives.
pub trait ScalarField {
    fn value(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64>;
}

/// `f(z) = 1/2 z^T A z + b^T z + c` with symmetric `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticField {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl QuadraticField {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Self {
        let a = (&a + a.transpose()) * 0.5;
        QuadraticField { a, b, c }
    }

    pub fn linear(b: DVector<f64>) -> Self {
        let n = b.len();
        QuadraticField {
            a: DMatrix::zeros(n, n),
            b,
            c: 0.0,
        }
    }

    /// The `k`-th coordinate function.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut b = DVector::zeros(dim);
        b[k] = 1.0;
        Self::linear(b)
    }

    /// Entries uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        Self::new(a, b, rng.gen_range(-1.0..1.0))
    }
}

impl ScalarField for QuadraticField {
    fn value(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.a * z)) + self.b.dot(z) + self.c
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z + &self.b
    }

    fn hessian(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `{f, g}(z) = grad f^T Lambda(z) grad g`.
pub fn bracket_eval<S, F, G>(space: &S, f: &F, g: &G, z: &DVector<f64>) -> f64
where
    S: PoissonStructure + ?Sized,
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    f.gradient(z).dot(&(space.matrix(z) * g.gradient(z)))
}

/// Exact gradient of `{f, g}` at `z`.
pub fn bracket_gradient<S, F, G>(space: &S, f: &F, g: &G, z: &DVector<f64>) -> DVector<f64>
where
    S: PoissonStructure + ?Sized,
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let lambda = space.matrix(z);
    let (df, dg) = (f.gradient(z), g.gradient(z));
    let (hf, hg) = (f.hessian(z), g.hessian(z));
    let left = hf * (&lambda * &dg);
    let right = hg * (lambda.transpose() * &df);
    DVector::from_fn(space.dim(), |k, _| {
        left[k] + df.dot(&(space.partial(k) * &dg)) + right[k]
    })
}

/// `|{f,{g,h}} + {g,{h,f}} + {h,{f,g}}|` for fields with exact derivatives.
pub fn jacobi_residual<S, F>(space: &S, z: &DVector<f64>, fields: [&F; 3]) -> f64
where
    S: PoissonStructure + ?Sized,
    F: ScalarField + ?Sized,
{
    let lambda = space.matrix(z);
    let [f, g, h] = fields;
    let outer = |a: &F, b: &F, c: &F| {
        a.gradient(z)
            .dot(&(&lambda * bracket_gradient(space, b, c, z)))
    };
    (outer(f, g, h) + outer(g, h, f) + outer(h, f, g)).abs()
}

/// Largest entry of `Lambda + Lambda^T` at `z`.
pub fn max_antisymmetry<S: PoissonStructure + ?Sized>(space: &S, z: &DVector<f64>) -> f64 {
    let m = space.matrix(z);
    (&m + m.transpose()).abs().max()
}

/// The osc* bracket built from the se(2) Lie bracket and the algebra
/// cocycle: `{f, g}(pi, p) = -<pi, [df, dg]> - p C(df, dg)`.
///
/// This does not go through [`PoissonSpace::Osc`]; it is the independent
/// route used to pin the cocycle normalization.
pub fn osc_bracket_from_cocycle<F, G>(f: &F, g: &G, z: &DVector<f64>, mode: Normalization) -> f64
where
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    osc_bracket_with_scale(f, g, z, coefficients(mode).cocycle)
}

/// [`osc_bracket_from_cocycle`] with `C = scale V1 . J V2`.
pub(crate) fn osc_bracket_with_scale<F, G>(f: &F, g: &G, z: &DVector<f64>, scale: f64) -> f64
where
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let (df, dg) = (f.gradient(z), g.gradient(z));
    let xi = Se2Vector::new(df[0], df[1], df[2]);
    let eta = Se2Vector::new(dg[0], dg[1], dg[2]);
    let omega = xi.v.dot(&(SYMPLECTIC * eta.v));
    lie_poisson_from_bracket(f, g, z) - z[3] * scale * omega
}

/// Same construction without the cocycle: the minus Lie-Poisson bracket.
pub fn lie_poisson_from_bracket<F, G>(f: &F, g: &G, z: &DVector<f64>) -> f64
where
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let (df, dg) = (f.gradient(z), g.gradient(z));
    let xi = Se2Vector::new(df[0], df[1], df[2]);
    let eta = Se2Vector::new(dg[0], dg[1], dg[2]);
    -Se2Momentum::new(z[0], z[1], z[2]).pair(&lie_bracket_se2(&xi, &eta))
}
