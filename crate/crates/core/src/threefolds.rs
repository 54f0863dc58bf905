//! Multi-tangent planes to hypersurfaces in `P^4`: the degree-18 plane
//! polynomial, the quartic Fano-variety check and the quintic pipeline.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::contact::{
    node_count_detailed, sigma_degree, ContactError, Exact, Family, SingularityType,
};
use crate::ring::{rat, Coeff, GradedPoly, RingExt};
use crate::sheaf::{sym_rank2, tensor_line, SheafError};
use crate::spaces::{
    grassmannian_planes_p4, incidence_flag, planes_through_line_model, universal_plane, SpaceError,
    SpaceModel,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThreefoldError {
    #[error("hypersurface degree must be at least 1, got {0}")]
    BadDegree(i64),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Ring(#[from] crate::ring::RingError),
}

pub type Result<T> = std::result::Result<T, ThreefoldError>;

/// Integer numerator coefficients of the plane polynomial, from `m^18` down to `m^0`.
pub const PLANE_NUMERATOR: [i64; 19] = [
    1,
    -12,
    24,
    155,
    -405,
    1082,
    -18469,
    66446,
    -192307,
    1242535,
    -4049006,
    11129818,
    -53664614,
    166756120,
    -415820104,
    1293514896,
    -2517392160,
    1781049600,
    0,
];

/// Common denominator of the plane polynomial: `6!/5`.
pub const PLANE_DENOMINATOR: i64 = 144;

/// Lines on a general quintic threefold.
pub const QUINTIC_LINES: i64 = 2875;

/// Conics on a general quintic threefold.
pub const QUINTIC_CONICS: i64 = 609_250;

/// Ordered coplanar lines per 6-fold tangent plane of a quartic (`4!`).
pub const FANO_ORDERINGS: i64 = 24;

/// Coefficients of the plane polynomial, lowest degree first.
pub fn tg6_planes_coefficients() -> Vec<Coeff> {
    PLANE_NUMERATOR
        .iter()
        .rev()
        .map(|&c| rat(c) / rat(PLANE_DENOMINATOR))
        .collect()
}

fn eval_poly(coeffs: &[Coeff], m: i64) -> Coeff {
    let x = rat(m);
    coeffs
        .iter()
        .rev()
        .fold(Coeff::zero(), |acc, c| acc * &x + c)
}

/// Number of planes 6-fold tangent to a general degree-`m` hypersurface.
pub fn tg6_planes_closed(m: i64) -> Result<Coeff> {
    if m < 1 {
        return Err(ThreefoldError::BadDegree(m));
    }
    Ok(eval_poly(&tg6_planes_coefficients(), m))
}

/// The universal plane over the Grassmannian of planes in `P^4`.
pub fn plane_family() -> Result<Arc<SpaceModel>> {
    let g = grassmannian_planes_p4()?;
    Ok(universal_plane(&g, "y")?)
}

fn plane_lambda(space: &Arc<SpaceModel>, m: i64) -> Result<GradedPoly> {
    Ok(space.gen("y")?.scale(&rat(m)))
}

/// Same count through the tower engine, with `Λ = O(m)` on the universal plane.
pub fn tg6_planes_derived(m: i64) -> Result<Coeff> {
    let space = plane_family()?;
    tg6_planes_derived_on(&space, m)
}

fn tg6_planes_derived_on(space: &Arc<SpaceModel>, m: i64) -> Result<Coeff> {
    let family = Family::with_lambda(space, plane_lambda(space, m)?)?;
    Ok(node_count_detailed(6, &family)?.0)
}

/// The engine's count as a polynomial in `m` (lowest degree first), recovered
/// exactly from its values at `m = 0..=18`.
pub fn tg6_planes_derived_polynomial() -> Result<Vec<Coeff>> {
    let space = plane_family()?;
    let xs: Vec<i64> = (0..=18).collect();
    let ys = xs
        .iter()
        .map(|&m| tg6_planes_derived_on(&space, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(interpolate(&xs, &ys))
}

/// Lagrange interpolation through `(xs[i], ys[i])`; coefficients lowest first.
pub fn interpolate(xs: &[i64], ys: &[Coeff]) -> Vec<Coeff> {
    let n = xs.len();
    let mut out = vec![Coeff::zero(); n];
    for i in 0..n {
        let mut basis = vec![Coeff::one()];
        let mut denom = Coeff::one();
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut next = vec![Coeff::zero(); basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                next[k + 1] += b;
                next[k] -= b * rat(xs[j]);
            }
            basis = next;
            denom *= rat(xs[i] - xs[j]);
        }
        let scale = &ys[i] / denom;
        for (k, b) in basis.iter().enumerate() {
            out[k] += b * &scale;
        }
    }
    out
}

/// Raw and normalized results of the quartic cross-check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FanoCheck {
    pub raw: Exact,
    pub count: Exact,
}

/// Coplanar 4-tuples of lines on a quartic threefold, via three residual
/// line conditions on the triple flag of lines in planes.
pub fn quartic_fano_check() -> Result<FanoCheck> {
    let g = grassmannian_planes_p4()?;
    let f1 = incidence_flag(&g, "z1")?;
    let m1 = f1.sheaf("M")?.c(1);
    let q1_1 = f1.sheaf("Q1")?.clone();
    let f2 = incidence_flag(&f1, "z2")?;
    let m2 = f2.sheaf("M")?.c(1);
    let q1_2 = f2.sheaf("Q1")?.clone();
    let f3 = incidence_flag(&f2, "z3")?;
    let q1_3 = f3.sheaf("Q1")?.clone();

    // residual quartic contains a line, then the cubic, then the conic
    let i1 = sym_rank2(&q1_1, 4)?.c(5);
    let i2 = tensor_line(&sym_rank2(&q1_2, 3)?, &f2.ring().embed(&m1)?)?.c(4);
    let twist = f3.ring().embed(&m1)? + f3.ring().embed(&m2)?;
    let i3 = tensor_line(&sym_rank2(&q1_3, 2)?, &twist)?.c(3);

    let a = f3.pushforward(&i3)?;
    let a = f2.pushforward(&(i2 * a))?;
    let raw = f1.integrate(&(i1 * a))?;
    let count = &raw / rat(FANO_ORDERINGS);
    Ok(FanoCheck {
        raw: Exact(raw),
        count: Exact(count),
    })
}

/// Degree of the `(2,2)` locus on the planes-through-a-line model, with its
/// stored residual bundle unless `lambda` overrides it.
pub fn binodal_residual_degree(
    space: &Arc<SpaceModel>,
    lambda: Option<GradedPoly>,
) -> Result<Coeff> {
    let family = match lambda {
        Some(l) => Family::with_lambda(space, l)?,
        None => Family::from_space(space)?,
    };
    Ok(sigma_degree(&SingularityType::flat(&[2, 2]), &family)?)
}

/// Binodal residual quartics in planes through a fixed line of a quintic.
pub fn quintic_binodal_residual() -> Result<Coeff> {
    let space = planes_through_line_model()?;
    Ok(binodal_residual_degree(&space, None)? / rat(2))
}

/// Terms of the irreducible rational plane quintic count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuinticBreakdown {
    pub tangent_planes: Exact,
    pub conic_planes: Exact,
    pub lines: Exact,
    pub binodal_residual: Exact,
    pub line_planes: Exact,
    pub count: Exact,
}

/// Irreducible rational plane quintic curves on a general quintic threefold.
pub fn quintic_rational_planar() -> Result<QuinticBreakdown> {
    let tangent = tg6_planes_closed(5)?;
    let residual = quintic_binodal_residual()?;
    let line_planes = rat(QUINTIC_LINES) * &residual;
    let count = &tangent - rat(QUINTIC_CONICS) - &line_planes;
    Ok(QuinticBreakdown {
        tangent_planes: Exact(tangent),
        conic_planes: Exact(rat(QUINTIC_CONICS)),
        lines: Exact(rat(QUINTIC_LINES)),
        binodal_residual: Exact(residual),
        line_planes: Exact(line_planes),
        count: Exact(count),
    })
}

/// `true` when every value of the plane polynomial at `1..=upto` is an integer.
pub fn plane_polynomial_integral_upto(upto: i64) -> bool {
    let c = tg6_planes_coefficients();
    (1..=upto).all(|m| eval_poly(&c, m).is_integer())
}
