//! The magnetic term: Casimir, B-potential, affine action, and the
//! normalization constants.
//!
//! Verified constants are not typed in. Each is solved once from its
//! defining identity by a small least-squares fit at integer sample points,
//! where every bracket and difference quotient is exact in floating point.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::poisson::osc_bracket_with_scale;
use super::{
    coad_action, perp, Normalization, PoissonSpace, PoissonStructure, QuadraticField, Se2Element,
    Se2Momentum, Se2Vector, SYMPLECTIC,
};
use crate::error::{Error, Result};

/// Scalars that differ between the two normalizations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    /// `C(e_x, e_y)`.
    pub cocycle: f64,
    /// `c` in `Pi + c |P|^2 / Gamma`.
    pub casimir: f64,
    /// `c_Omega` in `psi = (-c_Omega Gamma |x0|^2, c_V Gamma J x0)`.
    pub potential_omega: f64,
    /// `c_V`.
    pub potential_v: f64,
}

const PRINTED: Coefficients = Coefficients {
    cocycle: 2.0,
    casimir: 1.0,
    potential_omega: 0.25,
    potential_v: 0.5,
};

pub fn coefficients(mode: Normalization) -> Coefficients {
    match mode {
        Normalization::Paper => PRINTED,
        Normalization::Verified => *verified(),
    }
}

fn verified() -> &'static Coefficients {
    static CELL: OnceLock<Coefficients> = OnceLock::new();
    CELL.get_or_init(|| {
        let (potential_omega, potential_v) = solve_potential_coefficients();
        Coefficients {
            cocycle: solve_cocycle_scale(),
            casimir: solve_casimir_coefficient(),
            potential_omega,
            potential_v,
        }
    })
}

fn integer_points(dim: usize) -> Vec<DVector<f64>> {
    let vals = [-2.0, -1.0, 1.0, 3.0];
    (0..vals.len().pow(dim as u32))
        .map(|mut i| {
            DVector::from_fn(dim, |_, _| {
                let v = vals[i % vals.len()];
                i /= vals.len();
                v
            })
        })
        .collect()
}

/// One-unknown least squares `a + x b = target`.
fn fit_scalar(rows: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b, target) in rows {
        num += b * (target - a);
        den += b * b;
    }
    num / den
}

/// Scale of `C` such that the bracket built from the Lie bracket and `C`
/// reproduces the osc* structure matrix entry by entry.
fn solve_cocycle_scale() -> f64 {
    let coords: Vec<_> = (0..4).map(|k| QuadraticField::coordinate(4, k)).collect();
    let mut rows = Vec::new();
    for z in integer_points(4) {
        let m = PoissonSpace::Osc.matrix(&z);
        for i in 0..4 {
            for j in 0..4 {
                let a = osc_bracket_with_scale(&coords[i], &coords[j], &z, 0.0);
                let b = osc_bracket_with_scale(&coords[i], &coords[j], &z, 1.0) - a;
                rows.push((a, b, m[(i, j)]));
            }
        }
    }
    fit_scalar(rows.into_iter())
}

/// `c` such that `Pi + c |P|^2 / Gamma` brackets to zero with every
/// coordinate under the magnetic structure.
fn solve_casimir_coefficient() -> f64 {
    let mut rows = Vec::new();
    for gamma in [1.0, 2.0, -4.0] {
        let space = PoissonSpace::Se2Magnetic(gamma);
        let pi = QuadraticField::coordinate(3, 0);
        let q = norm_p_field(gamma);
        for z in integer_points(3) {
            for k in 0..3 {
                let f = QuadraticField::coordinate(3, k);
                let a = super::bracket_eval(&space, &pi, &f, &z);
                let b = super::bracket_eval(&space, &q, &f, &z);
                rows.push((a, b, 0.0));
            }
        }
    }
    fit_scalar(rows.into_iter())
}

/// `|P|^2 / Gamma` as a quadratic field.
fn norm_p_field(gamma: f64) -> QuadraticField {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0 / gamma, 2.0 / gamma]));
    QuadraticField::new(a, DVector::zeros(3), 0.0)
}

/// `(c_Omega, c_V)` from `i_{xi_H} B = d<psi, xi>` along the coordinate
/// directions, with exact unit central differences.
fn solve_potential_coefficients() -> (f64, f64) {
    let gamma = 1.0;
    let basis = |g: &Se2Element, xi: &Se2Vector| {
        let x0 = g.translation;
        (
            -gamma * x0.norm_squared() * xi.omega,
            gamma * xi.v.dot(&(SYMPLECTIC * x0)),
        )
    };
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    let vals = [-2.0, -1.0, 0.0, 1.0, 3.0];
    for &x in &vals {
        for &y in &vals {
            for &w in &vals[1..] {
                for &vx in &vals {
                    let g = Se2Element::new(0.0, x, y);
                    let xi = Se2Vector::new(w, vx, 1.0 - w);
                    let tangent = generator(&xi, &g);
                    for k in 0..3 {
                        let (plus, minus) = (shift(&g, k, 1.0), shift(&g, k, -1.0));
                        let (ap, bp) = basis(&plus, &xi);
                        let (am, bm) = basis(&minus, &xi);
                        let row = Vector2::new(0.5 * (ap - am), 0.5 * (bp - bm));
                        let target = magnetic_form(&g, &tangent, &coordinate_direction(k), gamma);
                        normal += row * row.transpose();
                        rhs += row * target;
                    }
                }
            }
        }
    }
    let det = normal[(0, 0)] * normal[(1, 1)] - normal[(0, 1)] * normal[(1, 0)];
    (
        (rhs[0] * normal[(1, 1)] - rhs[1] * normal[(0, 1)]) / det,
        (normal[(0, 0)] * rhs[1] - normal[(1, 0)] * rhs[0]) / det,
    )
}

fn shift(g: &Se2Element, k: usize, h: f64) -> Se2Element {
    let mut out = *g;
    match k {
        0 => out.theta += h,
        1 => out.translation.x += h,
        _ => out.translation.y += h,
    }
    out
}

/// Unit tangent along coordinate `k` of `(theta, x, y)`.
pub fn coordinate_direction(k: usize) -> [f64; 3] {
    let mut d = [0.0; 3];
    d[k] = 1.0;
    d
}

/// Infinitesimal generator of left multiplication by `exp(t xi)` at `g`,
/// in coordinates `(theta, x, y)`.
pub fn generator(xi: &Se2Vector, g: &Se2Element) -> [f64; 3] {
    let v = xi.v + perp(&g.translation) * xi.omega;
    [xi.omega, v.x, v.y]
}

/// `B_Gamma` at `g` on coordinate tangents, as the left-invariant extension
/// of `Gamma e*_x ^ e*_y`.
pub fn magnetic_form(g: &Se2Element, a: &[f64; 3], b: &[f64; 3], gamma: f64) -> f64 {
    let rt = g.rotation().transpose();
    let ba = rt * Vector2::new(a[1], a[2]);
    let bb = rt * Vector2::new(b[1], b[2]);
    gamma * (ba.x * bb.y - ba.y * bb.x)
}

/// `Gamma dx ^ dy` on coordinate tangents.
pub fn coordinate_area_form(a: &[f64; 3], b: &[f64; 3], gamma: f64) -> f64 {
    gamma * (a[1] * b[2] - a[2] * b[1])
}

/// `Pi + c |P|^2 / Gamma`.
pub fn casimir_magnetic(pi: &Se2Momentum, gamma: f64, mode: Normalization) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::SingularCirculation);
    }
    Ok(pi.angular + coefficients(mode).casimir * pi.linear.norm_squared() / gamma)
}

/// The Casimir as a quadratic field on `(Pi, Px, Py)`.
pub fn casimir_field(gamma: f64, mode: Normalization) -> Result<QuadraticField> {
    if gamma == 0.0 {
        return Err(Error::SingularCirculation);
    }
    let c = coefficients(mode).casimir;
    let mut q = norm_p_field(gamma);
    q.a *= c;
    q.b[0] = 1.0;
    Ok(q)
}

/// Largest `|{Phi, f}|` over coordinate functions `f` at `z`.
pub fn casimir_residual(pi: &Se2Momentum, gamma: f64, mode: Normalization) -> Result<f64> {
    let phi = casimir_field(gamma, mode)?;
    let z = DVector::from_column_slice(pi.to_vector().as_slice());
    let space = PoissonSpace::Se2Magnetic(gamma);
    Ok((0..3)
        .map(|k| super::bracket_eval(&space, &phi, &QuadraticField::coordinate(3, k), &z).abs())
        .fold(0.0, f64::max))
}

/// Largest entrywise mismatch between the cocycle-built osc* bracket and
/// the osc* structure matrix at `z`.
pub fn cocycle_residual(z: &DVector<f64>, mode: Normalization) -> f64 {
    let m = PoissonSpace::Osc.matrix(z);
    let coords: Vec<_> = (0..4).map(|k| QuadraticField::coordinate(4, k)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let b = super::osc_bracket_from_cocycle(&coords[i], &coords[j], z, mode);
            worst = worst.max((b - m[(i, j)]).abs());
        }
    }
    worst
}

/// `psi(g) = (-c_Omega Gamma |x0|^2, c_V Gamma J x0)`, with `psi(e) = 0`.
pub fn bg_potential(g: &Se2Element, gamma: f64, mode: Normalization) -> Se2Momentum {
    let c = coefficients(mode);
    let x0 = g.translation;
    Se2Momentum {
        angular: -c.potential_omega * gamma * x0.norm_squared(),
        linear: SYMPLECTIC * x0 * (c.potential_v * gamma),
    }
}

/// Largest coordinate mismatch between central differences of
/// `<psi, xi>` and `B_Gamma(xi_H, .)` at `g`.
pub fn bg_potential_residual(
    g: &Se2Element,
    xi: &Se2Vector,
    gamma: f64,
    mode: Normalization,
    h: f64,
) -> f64 {
    let tangent = generator(xi, g);
    (0..3)
        .map(|k| {
            let fd = (bg_potential(&shift(g, k, h), gamma, mode).pair(xi)
                - bg_potential(&shift(g, k, -h), gamma, mode).pair(xi))
                / (2.0 * h);
            (fd - magnetic_form(g, &tangent, &coordinate_direction(k), gamma)).abs()
        })
        .fold(0.0, f64::max)
}

/// `Ad*_{g^-1} pi + psi(g)`; its orbits are the symplectic leaves.
pub fn affine_action(
    g: &Se2Element,
    pi: &Se2Momentum,
    gamma: f64,
    mode: Normalization,
) -> Se2Momentum {
    coad_action(g, pi) + bg_potential(g, gamma, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MODES: [Normalization; 2] = [Normalization::Paper, Normalization::Verified];

    fn elem(rng: &mut ChaCha8Rng) -> Se2Element {
        Se2Element::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    fn mom(rng: &mut ChaCha8Rng) -> Se2Momentum {
        Se2Momentum::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    #[test]
    fn casimir_examples() {
        for m in MODES {
            assert_eq!(
                casimir_magnetic(&Se2Momentum::new(1.0, 0.0, 0.0), 1.0, m),
                Ok(1.0)
            );
        }
        assert_eq!(
            casimir_magnetic(&Se2Momentum::new(0.0, 1.0, 0.0), 2.0, Normalization::Paper),
            Ok(0.5)
        );
        assert_eq!(
            casimir_magnetic(
                &Se2Momentum::new(0.0, 1.0, 0.0),
                0.0,
                Normalization::Verified
            ),
            Err(Error::SingularCirculation)
        );
    }

    #[test]
    fn verified_casimir_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let gamma = rng.gen_range(0.2..3.0) * if rng.gen() { 1.0 } else { -1.0 };
            let r = casimir_residual(&mom(&mut rng), gamma, Normalization::Verified).unwrap();
            assert!(r < 1e-12, "{r:e}");
        }
        // the printed coefficient leaves a residual proportional to |P|
        let r =
            casimir_residual(&Se2Momentum::new(0.0, 1.0, 0.0), 1.0, Normalization::Paper).unwrap();
        assert!(r > 0.5);
    }

    #[test]
    fn verified_cocycle_restricts_to_magnetic() {
        let coords: Vec<_> = (0..4).map(|k| QuadraticField::coordinate(4, k)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let pi = mom(&mut rng);
            let gamma: f64 = rng.gen_range(-3.0..3.0);
            let z4 = DVector::from_vec(vec![pi.angular, pi.linear.x, pi.linear.y, gamma]);
            let z3 = DVector::from_vec(vec![pi.angular, pi.linear.x, pi.linear.y]);
            let mag = PoissonSpace::Se2Magnetic(gamma).matrix(&z3);
            for i in 0..3 {
                for j in 0..3 {
                    let b = super::super::osc_bracket_from_cocycle(
                        &coords[i],
                        &coords[j],
                        &z4,
                        Normalization::Verified,
                    );
                    assert_eq!(b, mag[(i, j)]);
                }
            }
            assert_eq!(cocycle_residual(&z4, Normalization::Verified), 0.0);
        }
    }

    #[test]
    fn paper_potential_example() {
        let g = Se2Element::new(1.234, 1.0, 0.0);
        let psi = bg_potential(&g, 4.0, Normalization::Paper);
        assert_eq!(psi, Se2Momentum::new(-1.0, 0.0, -2.0));
        for m in MODES {
            assert_eq!(
                bg_potential(&Se2Element::identity(), 3.0, m),
                Se2Momentum::default()
            );
        }
        let out = affine_action(
            &Se2Element::new(0.0, 1.0, 0.0),
            &Se2Momentum::default(),
            4.0,
            Normalization::Paper,
        );
        assert_eq!(out, Se2Momentum::new(-1.0, 0.0, -2.0));
    }

    #[test]
    fn magnetic_form_is_coordinate_area_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let g = elem(&mut rng);
            let a = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let b = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let lhs = magnetic_form(&g, &a, &b, 1.7);
            assert!((lhs - coordinate_area_form(&a, &b, 1.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn verified_potential_satisfies_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let g = elem(&mut rng);
            let xi = Se2Vector::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let r = bg_potential_residual(&g, &xi, 1.3, Normalization::Verified, 1e-3);
            assert!(r < 1e-6, "{r:e}");
        }
        let worst = bg_potential_residual(
            &Se2Element::new(0.0, 1.0, 0.0),
            &Se2Vector::new(1.0, 0.0, 0.0),
            1.0,
            Normalization::Paper,
            1e-3,
        );
        assert!(worst > 0.1);
    }

    #[test]
    fn verified_constants_are_exact() {
        let c = coefficients(Normalization::Verified);
        assert_eq!(c.cocycle, 1.0);
        assert_eq!(c.casimir, 0.5);
        assert_eq!((c.potential_omega, c.potential_v), (0.5, 1.0));
    }

    #[test]
    fn casimir_invariant_under_affine_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in MODES {
            for _ in 0..1000 {
                let g = elem(&mut rng);
                let pi = mom(&mut rng);
                let gamma = rng.gen_range(0.5..3.0);
                let before = casimir_magnetic(&pi, gamma, m).unwrap();
                let after = casimir_magnetic(&affine_action(&g, &pi, gamma, m), gamma, m).unwrap();
                assert!(
                    (before - after).abs() < 1e-12 * (1.0 + before.abs()),
                    "{m}: {before} {after}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn affine_action_is_an_action(t1 in -3.0..3.0f64, x1 in -2.0..2.0f64, y1 in -2.0..2.0f64,
                                      t2 in -3.0..3.0f64, x2 in -2.0..2.0f64, y2 in -2.0..2.0f64,
                                      p in -2.0..2.0f64, px in -2.0..2.0f64, py in -2.0..2.0f64,
                                      gamma in -3.0..3.0f64) {
            let g = Se2Element::new(t1, x1, y1);
            let h = Se2Element::new(t2, x2, y2);
            let pi = Se2Momentum::new(p, px, py);
            for m in MODES {
                let lhs = affine_action(&g, &affine_action(&h, &pi, gamma, m), gamma, m);
                let rhs = affine_action(&g.compose(&h), &pi, gamma, m);
                prop_assert!((lhs.to_vector() - rhs.to_vector()).norm() < 1e-11);
            }
            let id = affine_action(&Se2Element::identity(), &pi, gamma, Normalization::Verified);
            prop_assert_eq!(id, pi);
        }
    }

    #[test]
    fn paper_constants_are_internally_consistent_ratio() {
        let p = coefficients(Normalization::Paper);
        let v = coefficients(Normalization::Verified);
        assert_relative_eq!(p.cocycle / v.cocycle, 2.0);
        assert_relative_eq!(p.casimir / v.casimir, 2.0);
        assert_relative_eq!(p.potential_omega / v.potential_omega, 0.5);
        assert_relative_eq!(p.potential_v / v.potential_v, 0.5);
    }
}
