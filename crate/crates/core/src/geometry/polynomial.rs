//! Multivariate polynomials used as implicit defining functions.
//!
//! Gradients and Hessians are formed by exact term-wise differentiation when
//! the polynomial is built, so evaluation never falls back to differences.

use std::collections::BTreeMap;

use super::point::{Matrix, Point};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Term {
    exponents: Vec<u32>,
    coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Term>,
}

impl Polynomial {
    /// Builds a polynomial from (exponent tuple, coefficient) pairs. Repeated
    /// monomials are summed; zero coefficients are dropped.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (exponents, coefficient) in terms {
            if exponents.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: exponents.len(),
                });
            }
            if !coefficient.is_finite() {
                return Err(Error::InvalidInput(
                    "non-finite polynomial coefficient".into(),
                ));
            }
            *merged.entry(exponents).or_insert(0.0) += coefficient;
        }
        Ok(Polynomial {
            dim,
            terms: merged
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(exponents, coefficient)| Term {
                    exponents,
                    coefficient,
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// ∂/∂x_axis, exactly.
    pub fn derivative(&self, axis: usize) -> Polynomial {
        let terms = self.terms.iter().filter_map(|t| {
            let e = t.exponents[axis];
            (e > 0).then(|| {
                let mut exponents = t.exponents.clone();
                exponents[axis] = e - 1;
                (exponents, t.coefficient * f64::from(e))
            })
        });
        Polynomial::new(self.dim, terms).expect("derivative preserves dimension")
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(x.coords())
                    .fold(t.coefficient, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }
}

/// A polynomial together with its exact first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialField {
    value: Polynomial,
    gradient: Vec<Polynomial>,
    hessian: Vec<Vec<Polynomial>>,
}

impl PolynomialField {
    pub fn new(value: Polynomial) -> Self {
        let gradient: Vec<Polynomial> = (0..value.dim()).map(|i| value.derivative(i)).collect();
        let hessian = gradient
            .iter()
            .map(|g| (0..value.dim()).map(|j| g.derivative(j)).collect())
            .collect();
        PolynomialField {
            value,
            gradient,
            hessian,
        }
    }

    pub fn dim(&self) -> usize {
        self.value.dim()
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.value
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &Point) -> Point {
        Point::new(self.gradient.iter().map(|g| g.eval(x)).collect())
    }

    pub fn hessian(&self, x: &Point) -> Matrix {
        let n = self.dim();
        let mut h = Matrix::zeros(n);
        for (i, row) in self.hessian.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                h[(i, j)] = p.eval(x);
            }
        }
        h
    }
}
