//! Algebra of the non-local boundary condition `theta = theta_b - lambda avg(theta)`.
//!
//! With `A f = avg(f) 1` the averaging idempotent, the mass operator
//! `L = I - lambda/(1+lambda) A` is self-adjoint in the discrete L2 product and
//! its inverse is `I + lambda A`. `V = theta + lambda avg(theta)` turns the
//! non-local condition into a plain Dirichlet condition `V = theta_b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{avint, validate_potential, BoundaryData, ScalarField};

/// Strictly positive non-locality strength.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Lambda(f64);

impl Lambda {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("lambda must be > 0, got {value}"),
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `lambda / (1 + lambda)`, the weight of the averaging correction in `L`.
    #[inline]
    pub fn mass_weight(self) -> f64 {
        self.0 / (1.0 + self.0)
    }
}

impl TryFrom<f64> for Lambda {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Lambda::new(value)
    }
}

impl From<Lambda> for f64 {
    fn from(l: Lambda) -> f64 {
        l.0
    }
}

/// Physical coefficients of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlocalParams {
    pub lambda: Lambda,
    pub a: f64,
    pub kappa: f64,
    pub mu: f64,
}

impl NonlocalParams {
    pub fn new(lambda: f64, a: f64, kappa: f64, mu: f64) -> Result<Self> {
        let positive = |name: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(x)
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("{name} must be > 0, got {x}"),
                })
            }
        };
        if !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("a must be finite, got {a}"),
            });
        }
        Ok(Self {
            lambda: Lambda::new(lambda)?,
            a,
            kappa: positive("kappa", kappa)?,
            mu: positive("mu", mu)?,
        })
    }
}

/// `L[V] = V - lambda/(1+lambda) avg(V)`.
pub fn apply_l(v: &ScalarField, lambda: Lambda) -> ScalarField {
    v.shift(-lambda.mass_weight() * avint(v))
}

/// Closed-form inverse of `L`: `V = f + lambda avg(f)`.
pub fn invert_mass(f: &ScalarField, lambda: Lambda) -> ScalarField {
    f.shift(lambda.get() * avint(f))
}

/// `V = theta + lambda avg(theta)`.
pub fn theta_to_v(theta: &ScalarField, lambda: Lambda) -> ScalarField {
    theta.shift(lambda.get() * avint(theta))
}

/// Inverse of [`theta_to_v`], using `avg(theta) = avg(V) / (1 + lambda)`.
pub fn v_to_theta(v: &ScalarField, lambda: Lambda) -> ScalarField {
    let mean_theta = avint(v) / (1.0 + lambda.get());
    v.shift(-lambda.get() * mean_theta)
}

/// `Q(V) = avg(|V|^2) - lambda/(1+lambda) avg(V)^2 = <V, L V>`.
pub fn uniqueness_form(v: &ScalarField, lambda: Lambda) -> f64 {
    let m = avint(v);
    v.norm_sq() / v.mesh().area() - lambda.mass_weight() * m * m
}

/// Removes the `a div(G v)` transport term: `theta + a G`, `theta_b + a G|_bdry`.
pub fn shift_reduce(
    theta: &ScalarField,
    theta_b: &BoundaryData,
    g: &ScalarField,
    a: f64,
) -> Result<(ScalarField, BoundaryData)> {
    shift_by(theta, theta_b, g, a)
}

/// Inverse of [`shift_reduce`].
pub fn shift_restore(
    theta: &ScalarField,
    theta_b: &BoundaryData,
    g: &ScalarField,
    a: f64,
) -> Result<(ScalarField, BoundaryData)> {
    shift_by(theta, theta_b, g, -a)
}

fn shift_by(
    theta: &ScalarField,
    theta_b: &BoundaryData,
    g: &ScalarField,
    a: f64,
) -> Result<(ScalarField, BoundaryData)> {
    let report = validate_potential(g);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "potential is not mean-free and harmonic (mean {:e}, residual {:e})",
            report.mean, report.laplacian_residual
        )));
    }
    if a == 0.0 {
        return Ok((theta.clone(), theta_b.clone()));
    }
    Ok((theta.axpy(a, g)?, theta_b.axpy(a, g.trace())))
}
