//! Sparse multivariate polynomials with complex coefficients.
//!
//! Terms live in a `BTreeMap` keyed by [`Monomial`], whose ordering is graded
//! lexicographic, so iteration and serialization order are deterministic.
//! Coefficients that cancel to exactly zero are dropped; nothing is pruned by
//! tolerance, since supports feed the lattice-polytope machinery directly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type Cx = Complex64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MPolyError {
    #[error("variable-count mismatch: {left} vs {right}")]
    VarCountMismatch { left: usize, right: usize },
    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    PointLength { expected: usize, got: usize },
    #[error("exponent vector has {got} entries, polynomial has {expected} variables")]
    MonomialLength { expected: usize, got: usize },
    #[error("total degree of the zero polynomial is undefined")]
    ZeroPolynomial,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("polynomial must have at least one variable")]
    NoVariables,
}

/// Exponent vector `(r_1, ..., r_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    /// The constant monomial `1` in `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// `z_var^degree` in `n` variables.
    pub fn power(n: usize, var: usize, degree: u32) -> Self {
        let mut e = vec![0; n];
        e[var] = degree;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Inner product with an integer weight vector.
    pub fn weight(&self, alpha: &[i64]) -> i64 {
        self.0.iter().zip(alpha).map(|(&r, &a)| r as i64 * a).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, z: &[Cx]) -> Cx {
        self.0
            .iter()
            .zip(z)
            .filter(|(&r, _)| r > 0)
            .fold(Cx::new(1.0, 0.0), |acc, (&r, &x)| acc * x.powu(r))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then lexicographic with
    /// `z_1 > z_2 > ... > z_n`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &r) in self.0.iter().enumerate() {
            if r == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            match r {
                1 => write!(f, "z{}", i + 1)?,
                _ => write!(f, "z{}^{}", i + 1, r)?,
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// Sparse polynomial in `n_vars` complex variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MPoly {
    n_vars: usize,
    terms: BTreeMap<Monomial, Cx>,
}

impl MPoly {
    pub fn zero(n_vars: usize) -> Self {
        MPoly {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: Cx) -> Self {
        let mut p = MPoly::zero(n_vars);
        p.add_term(Monomial::one(n_vars), c);
        p
    }

    /// `c * z_var^degree`.
    pub fn power(n_vars: usize, var: usize, degree: u32, c: Cx) -> Self {
        let mut p = MPoly::zero(n_vars);
        p.add_term(Monomial::power(n_vars, var, degree), c);
        p
    }

    /// The coordinate function `z_var`.
    pub fn var(n_vars: usize, var: usize) -> Self {
        MPoly::power(n_vars, var, 1, Cx::new(1.0, 0.0))
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// duplicates.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self, MPolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Cx)>,
    {
        if n_vars == 0 {
            return Err(MPolyError::NoVariables);
        }
        let mut p = MPoly::zero(n_vars);
        for (exp, c) in terms {
            if exp.len() != n_vars {
                return Err(MPolyError::MonomialLength {
                    expected: n_vars,
                    got: exp.len(),
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(MPolyError::NonFinite);
            }
            p.add_term(Monomial(exp), c);
        }
        Ok(p)
    }

    /// Adds `c * mono` in place, dropping the term on exact cancellation.
    pub fn add_term(&mut self, mono: Monomial, c: Cx) {
        debug_assert_eq!(mono.n_vars(), self.n_vars);
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, c);
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Cx)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> Cx {
        self.terms.get(mono).copied().unwrap_or_else(Cx::zero)
    }

    fn check_vars(&self, other: &MPoly) -> Result<(), MPolyError> {
        if self.n_vars != other.n_vars {
            return Err(MPolyError::VarCountMismatch {
                left: self.n_vars,
                right: other.n_vars,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &MPoly) -> Result<MPoly, MPolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &MPoly) -> Result<MPoly, MPolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &MPoly) -> Result<MPoly, MPolyError> {
        self.check_vars(other)?;
        let mut out = MPoly::zero(self.n_vars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Cx) -> MPoly {
        let mut out = MPoly::zero(self.n_vars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn eval(&self, z: &[Cx]) -> Result<Cx, MPolyError> {
        if z.len() != self.n_vars {
            return Err(MPolyError::PointLength {
                expected: self.n_vars,
                got: z.len(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    /// Direct sum of `c_r z^r`; the caller guarantees `z.len() == n_vars`.
    pub(crate) fn eval_unchecked(&self, z: &[Cx]) -> Cx {
        self.terms
            .iter()
            .fold(Cx::zero(), |acc, (m, &c)| acc + c * m.eval(z))
    }

    pub fn support(&self) -> BTreeSet<Monomial> {
        self.terms.keys().cloned().collect()
    }

    pub fn total_degree(&self) -> Result<u32, MPolyError> {
        // graded order puts the highest degree last
        self.terms
            .keys()
            .next_back()
            .map(Monomial::degree)
            .ok_or(MPolyError::ZeroPolynomial)
    }

    /// Exact partial derivative with respect to `z_var`.
    pub fn derivative(&self, var: usize) -> MPoly {
        let mut out = MPoly::zero(self.n_vars);
        for (m, &c) in &self.terms {
            let r = m.0[var];
            if r == 0 {
                continue;
            }
            let mut e = m.0.clone();
            e[var] -= 1;
            out.add_term(Monomial(e), c * r as f64);
        }
        out
    }

    /// The same polynomial viewed in `n_vars` variables, the extra ones
    /// appended and absent. Fails if `n_vars` would drop variables.
    pub fn with_vars(&self, n_vars: usize) -> Result<MPoly, MPolyError> {
        if n_vars < self.n_vars {
            return Err(MPolyError::VarCountMismatch {
                left: self.n_vars,
                right: n_vars,
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, &c)| {
                let mut e = m.0.clone();
                e.resize(n_vars, 0);
                (Monomial(e), c)
            })
            .collect();
        Ok(MPoly { n_vars, terms })
    }

    /// Keeps only the terms whose monomials satisfy `keep`.
    pub fn filter_terms<F: Fn(&Monomial) -> bool>(&self, keep: F) -> MPoly {
        MPoly {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    /// Largest coefficient modulus; zero for the zero polynomial.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

macro_rules! impl_op {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl std::ops::$tr<&MPoly> for &MPoly {
            type Output = MPoly;

            /// Panics on variable-count mismatch; use the `checked_*` form to
            /// handle it.
            fn $method(self, rhs: &MPoly) -> MPoly {
                self.$checked(rhs).expect("MPoly variable-count mismatch")
            }
        }
    };
}

impl_op!(Add, add, checked_add);
impl_op!(Sub, sub, checked_sub);
impl_op!(Mul, mul, checked_mul);

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let is_one = m.degree() == 0;
            if c.im == 0.0 {
                if is_one {
                    write!(f, "{}", c.re)?;
                } else if c.re == 1.0 {
                    write!(f, "{}", m)?;
                } else {
                    write!(f, "{}*{}", c.re, m)?;
                }
            } else if is_one {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            } else {
                write!(f, "({}{:+}i)*{}", c.re, c.im, m)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct MPolyRepr {
    n_vars: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for MPoly {
    /// Terms are written leading-term first (descending graded-lex).
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MPolyRepr {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .rev()
                .map(|(m, c)| TermRepr {
                    exp: m.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = MPolyRepr::deserialize(d)?;
        MPoly::from_terms(
            repr.n_vars,
            repr.terms.into_iter().map(|t| (t.exp, Cx::new(t.re, t.im))),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// A square-or-not list of polynomials in a common set of variables, with
/// each equation's total degree cached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolySystem {
    pub polys: Vec<MPoly>,
    pub degrees: Vec<u32>,
}

impl PolySystem {
    pub fn new(polys: Vec<MPoly>) -> Result<Self, MPolyError> {
        let n = polys
            .first()
            .map(MPoly::n_vars)
            .ok_or(MPolyError::NoVariables)?;
        let mut degrees = Vec::with_capacity(polys.len());
        for p in &polys {
            if p.n_vars() != n {
                return Err(MPolyError::VarCountMismatch {
                    left: n,
                    right: p.n_vars(),
                });
            }
            degrees.push(p.total_degree()?);
        }
        Ok(PolySystem { polys, degrees })
    }

    pub fn n_vars(&self) -> usize {
        self.polys[0].n_vars()
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn eval(&self, z: &[Cx]) -> Result<Vec<Cx>, MPolyError> {
        self.polys.iter().map(|p| p.eval(z)).collect()
    }

    /// Bézout number: product of the total degrees.
    pub fn bezout_number(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64).product()
    }
}
