//! Finite-difference reconstructions of the spectral-coordinate geometry.
//!
//! Everything here is computed from the chart map
//! `(λ, u) ↦ Γ exp(U) diag(λ) exp(U)ᵀ Γᵀ` alone: tangents are central
//! differences, curvatures are second differences contracted against the
//! derivative of the dual coordinates, `H = -(1/2) tr(A B)`. None of it
//! uses the closed forms in the parent module.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{chart_matrix, pair_count, pair_offset, pairs, SkewParams, Spectrum};

use super::metric_sigma_raw;

/// A spectral coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Lambda(usize),
    U(usize, usize),
}

impl Coord {
    /// All coordinates, `λ` block first then pairs in offset order.
    pub fn all(p: usize) -> Vec<Coord> {
        (0..p)
            .map(Coord::Lambda)
            .chain(pairs(p).into_iter().map(|(s, t)| Coord::U(s, t)))
            .collect()
    }

    fn validate(self, p: usize) -> Result<()> {
        match self {
            Coord::Lambda(a) if a >= p => Err(Error::IndexOutOfRange { index: a, dim: p }),
            Coord::Lambda(_) => Ok(()),
            Coord::U(s, t) => pair_offset(p, s, t).map(|_| ()),
        }
    }
}

/// Which dual pair is differentiated: the mixture connection takes second
/// derivatives of `Σ` and pairs them with `∂Σ⁻¹`; the exponential connection
/// swaps the roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    Exponential,
    Mixture,
}

/// Step sizes. Steps along `λ` scale with `max(1, λ_1)`; the `u` chart is
/// dimensionless so its steps do not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub first_lambda: f64,
    pub first_u: f64,
    pub second_lambda: f64,
    pub second_u: f64,
}

impl FdSteps {
    pub fn for_spectrum(lambda: &[f64]) -> Self {
        let scale = lambda.first().copied().unwrap_or(1.0).max(1.0);
        Self {
            first_lambda: 1e-5 * scale,
            first_u: 1e-5,
            second_lambda: 1e-3 * scale,
            second_u: 1e-3,
        }
    }

    fn first(&self, c: Coord) -> f64 {
        match c {
            Coord::Lambda(_) => self.first_lambda,
            Coord::U(..) => self.first_u,
        }
    }

    fn second(&self, c: Coord) -> f64 {
        match c {
            Coord::Lambda(_) => self.second_lambda,
            Coord::U(..) => self.second_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Sigma,
    Precision,
}

/// Evaluates the chart at `base` displaced by `shifts`.
fn eval(base: &Spectrum, shifts: &[(Coord, f64)], field: Field) -> DMatrix<f64> {
    let p = base.dim();
    let mut lambda = base.lambda().to_vec();
    let mut u = vec![0.0; pair_count(p)];
    for &(c, h) in shifts {
        match c {
            Coord::Lambda(a) => lambda[a] += h,
            Coord::U(s, t) => u[pair_offset(p, s, t).expect("validated")] += h,
        }
    }
    let u = SkewParams::new(p, u).expect("finite shifts");
    let sigma = chart_matrix(base.gamma(), &lambda, &u);
    match field {
        Field::Sigma => sigma,
        Field::Precision => sigma.try_inverse().expect("chart stays positive definite"),
    }
}

fn first_difference(base: &Spectrum, c: Coord, h: f64, field: Field) -> DMatrix<f64> {
    (eval(base, &[(c, h)], field) - eval(base, &[(c, -h)], field)) / (2.0 * h)
}

fn second_difference(base: &Spectrum, c1: Coord, c2: Coord, steps: &FdSteps, field: Field) -> DMatrix<f64> {
    if c1 == c2 {
        let h = steps.second(c1);
        (eval(base, &[(c1, h)], field) - eval(base, &[], field) * 2.0 + eval(base, &[(c1, -h)], field))
            / (h * h)
    } else {
        let h1 = steps.second(c1);
        let h2 = steps.second(c2);
        (eval(base, &[(c1, h1), (c2, h2)], field)
            - eval(base, &[(c1, h1), (c2, -h2)], field)
            - eval(base, &[(c1, -h1), (c2, h2)], field)
            + eval(base, &[(c1, -h1), (c2, -h2)], field))
            / (4.0 * h1 * h2)
    }
}

/// Central-difference tangent `∂Σ/∂c` at `u = 0`.
pub fn fd_tangent(base: &Spectrum, c: Coord) -> Result<DMatrix<f64>> {
    c.validate(base.dim())?;
    let steps = FdSteps::for_spectrum(base.lambda());
    Ok(first_difference(base, c, steps.first(c), Field::Sigma))
}

/// Metric over all spectral coordinates from finite-difference tangents,
/// ordered as [`Coord::all`].
pub fn fd_metric(base: &Spectrum) -> DMatrix<f64> {
    let coords = Coord::all(base.dim());
    let inv = base.compose().inverse();
    let tangents: Vec<DMatrix<f64>> = coords
        .iter()
        .map(|&c| fd_tangent(base, c).expect("coordinates from Coord::all"))
        .collect();
    let n = coords.len();
    DMatrix::from_fn(n, n, |i, j| metric_sigma_raw(&inv, &tangents[i], &tangents[j]))
}

/// `-(1/2) tr(A B)` with `A` the second derivative along `(c1, c2)` and `B`
/// the first derivative of the dual field along `c3`.
pub fn curvature_oracle(
    base: &Spectrum,
    connection: Connection,
    c1: Coord,
    c2: Coord,
    c3: Coord,
    steps: &FdSteps,
) -> Result<f64> {
    for c in [c1, c2, c3] {
        c.validate(base.dim())?;
    }
    let (second, first) = match connection {
        Connection::Mixture => (Field::Sigma, Field::Precision),
        Connection::Exponential => (Field::Precision, Field::Sigma),
    };
    let a = second_difference(base, c1, c2, steps, second);
    let b = first_difference(base, c3, steps.first(c3), first);
    Ok(-0.5 * a.component_mul(&b.transpose()).sum())
}

/// Finite-difference estimate of `H_(s,t)(u,v)a` (mixture connection).
pub fn curvature_oracle_a(base: &Spectrum, st: (usize, usize), uv: (usize, usize), a: usize) -> Result<f64> {
    let steps = FdSteps::for_spectrum(base.lambda());
    curvature_oracle_a_with(base, st, uv, a, &steps)
}

pub fn curvature_oracle_a_with(
    base: &Spectrum,
    st: (usize, usize),
    uv: (usize, usize),
    a: usize,
    steps: &FdSteps,
) -> Result<f64> {
    curvature_oracle(
        base,
        Connection::Mixture,
        Coord::U(st.0, st.1),
        Coord::U(uv.0, uv.1),
        Coord::Lambda(a),
        steps,
    )
}

/// Finite-difference estimate of `H_ab(s,t)` for the fixed-eigenvector
/// submanifold under either connection.
pub fn curvature_oracle_m(
    base: &Spectrum,
    connection: Connection,
    a: usize,
    b: usize,
    st: (usize, usize),
) -> Result<f64> {
    let steps = FdSteps::for_spectrum(base.lambda());
    curvature_oracle(
        base,
        connection,
        Coord::Lambda(a),
        Coord::Lambda(b),
        Coord::U(st.0, st.1),
        &steps,
    )
}

/// Dense finite-difference curvature, indexed `[pair1][pair2][a]`.
pub fn fd_curvature_tensor(base: &Spectrum) -> Vec<Vec<Vec<f64>>> {
    let p = base.dim();
    let ps = pairs(p);
    ps.iter()
        .map(|&st| {
            ps.iter()
                .map(|&uv| {
                    (0..p)
                        .map(|a| curvature_oracle_a(base, st, uv, a).expect("valid indices"))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Statistical curvature contracted from finite-difference curvatures and
/// the numerically inverted finite-difference metric.
pub fn fd_statistical_curvature(base: &Spectrum) -> Result<f64> {
    let p = base.dim();
    let np = pair_count(p);
    let metric = fd_metric(base);
    let inv = metric
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("finite-difference metric is singular".into()))?;
    let h = fd_curvature_tensor(base);
    let mut total = 0.0;
    for a in 0..p {
        for b in 0..p {
            let gab = inv[(a, b)];
            for k1 in 0..np {
                for k2 in 0..np {
                    for k3 in 0..np {
                        for k4 in 0..np {
                            total += h[k1][k2][a] * h[k3][k4][b] * inv[(p + k1, p + k3)] * inv[(p + k2, p + k4)] * gab;
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}
