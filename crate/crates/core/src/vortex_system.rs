//! Point-vortex input data and the polynomial system whose roots are the
//! fixed equilibria.
//!
//! The physical problem is `-w(z_j) = (1/2πi) Σ_{k≠j} Γ_k / (z_j - z_k)`.
//! With `p(ζ) = -2πi·w(ζ)` of leading coefficient `α` and `λ^{m+1}·α = 1`,
//! the substitution `z = λu` turns it into the normalized rational system
//!
//! ```text
//! u_j^m + W(u_j) = Σ_{k≠j} Γ_k / (u_j - u_k),     deg W ≤ m - 1,
//! ```
//!
//! where `u^m + W(u) = λ·p(λu)`. Multiplying that system by the matrix
//! `T = (Γ_j u_j^{i-1})` yields an equivalent polynomial system whose k-th
//! equation has total degree `m + k - 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::mpoly::{Cx, MPoly, MPolyError, Monomial, PolySystem};

/// Tolerance for zero tests on float circulations.
pub const FLOAT_ZERO_TOL: f64 = 1e-12;

/// Largest vortex count for which genericity is checked by full subset
/// enumeration.
pub const MAX_GENERICITY_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VortexError {
    #[error("at least one vortex is required")]
    NoVortices,
    #[error("circulation {index} is zero")]
    ZeroCirculation { index: usize },
    #[error("circulation {index} is not finite")]
    NonFiniteCirculation { index: usize },
    #[error("circulation {index} has a zero denominator")]
    ZeroDenominator { index: usize },
    #[error("background flow must have degree at least 1 (got {degree})")]
    DegreeTooLow { degree: usize },
    #[error("background flow coefficients must be finite")]
    NonFiniteCoefficient,
    #[error("normalized remainder W has {got} coefficients, expected at most m = {m}")]
    RemainderTooLong { got: usize, m: usize },
    #[error("vortices {i} and {j} coincide")]
    Collision { i: usize, j: usize },
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("genericity check enumerates 2^n subsets; n = {n} exceeds {max}")]
    TooManyVortices { n: usize, max: usize },
    #[error(transparent)]
    Poly(#[from] MPolyError),
}

/// Nonzero real circulations `Γ_1..Γ_n`, optionally carried as exact
/// rationals so that zero tests on subset sums are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Circulations {
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl Circulations {
    pub fn from_f64(values: Vec<f64>) -> Result<Self, VortexError> {
        if values.is_empty() {
            return Err(VortexError::NoVortices);
        }
        for (index, &g) in values.iter().enumerate() {
            if !g.is_finite() {
                return Err(VortexError::NonFiniteCirculation { index });
            }
            if g == 0.0 {
                return Err(VortexError::ZeroCirculation { index });
            }
        }
        Ok(Circulations {
            values,
            exact: None,
        })
    }

    pub fn from_rationals(values: Vec<BigRational>) -> Result<Self, VortexError> {
        if values.is_empty() {
            return Err(VortexError::NoVortices);
        }
        let mut floats = Vec::with_capacity(values.len());
        for (index, g) in values.iter().enumerate() {
            if g.is_zero() {
                return Err(VortexError::ZeroCirculation { index });
            }
            floats.push(ratio_to_f64(g));
        }
        Ok(Circulations {
            values: floats,
            exact: Some(values),
        })
    }

    /// Convenience constructor from `(numerator, denominator)` pairs.
    pub fn from_fractions(pairs: &[(i64, i64)]) -> Result<Self, VortexError> {
        let mut v = Vec::with_capacity(pairs.len());
        for (index, &(num, den)) in pairs.iter().enumerate() {
            if den == 0 {
                return Err(VortexError::ZeroDenominator { index });
            }
            v.push(BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
        Circulations::from_rationals(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Circulations restricted to the given (0-based) indices.
    pub fn subset(&self, indices: &[usize]) -> Circulations {
        Circulations {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            exact: self
                .exact
                .as_ref()
                .map(|e| indices.iter().map(|&i| e[i].clone()).collect()),
        }
    }

    /// Exact equality when both sides are rational, else `|Γ_i - Γ_j| ≤ 1e-12`.
    pub fn same_value(&self, i: usize, j: usize) -> bool {
        match &self.exact {
            Some(e) => e[i] == e[j],
            None => (self.values[i] - self.values[j]).abs() <= FLOAT_ZERO_TOL,
        }
    }

    /// Whether the sum over `indices` is nonzero (exactly, if rational).
    pub fn sum_is_nonzero(&self, indices: &[usize]) -> bool {
        match &self.exact {
            Some(e) => !indices
                .iter()
                .fold(BigRational::zero(), |acc, &i| acc + &e[i])
                .is_zero(),
            None => indices.iter().map(|&i| self.values[i]).sum::<f64>().abs() > FLOAT_ZERO_TOL,
        }
    }

    /// `Σ_{i<j} Γ_i Γ_j`, as float.
    pub fn pair_product_sum(&self) -> f64 {
        let g = &self.values;
        let mut s = 0.0;
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                s += g[i] * g[j];
            }
        }
        s
    }

    fn pair_product_sum_nonzero(&self) -> bool {
        match &self.exact {
            Some(e) => {
                let mut s = BigRational::zero();
                for i in 0..e.len() {
                    for j in i + 1..e.len() {
                        s += &e[i] * &e[j];
                    }
                }
                !s.is_zero()
            }
            None => self.pair_product_sum().abs() > FLOAT_ZERO_TOL,
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // huge numerator/denominator: scale down before dividing
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Univariate complex polynomial `w`, coefficients low-to-high.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFlow {
    coeffs: Vec<Cx>,
}

impl BackgroundFlow {
    /// Trailing zero coefficients are trimmed; the remaining degree must be
    /// at least 1.
    pub fn new(mut coeffs: Vec<Cx>) -> Result<Self, VortexError> {
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(VortexError::NonFiniteCoefficient);
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(VortexError::DegreeTooLow {
                degree: coeffs.len().saturating_sub(1),
            });
        }
        Ok(BackgroundFlow { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Cx] {
        &self.coeffs
    }

    pub fn eval(&self, zeta: Cx) -> Cx {
        horner(&self.coeffs, zeta)
    }
}

pub(crate) fn horner(coeffs: &[Cx], x: Cx) -> Cx {
    coeffs.iter().rev().fold(Cx::zero(), |acc, &c| acc * x + c)
}

fn two_pi_i() -> Cx {
    Cx::new(0.0, 2.0 * PI)
}

/// Normalized problem: circulations, background degree `m`, remainder `W`
/// and the scale `λ` with `z_physical = λ·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexProblem {
    circulations: Circulations,
    m: usize,
    remainder: Vec<Cx>,
    scale: Cx,
    background: BackgroundFlow,
    pre_normalized: bool,
    pair_products: Vec<Vec<f64>>,
    complement_sums: Vec<f64>,
}

impl VortexProblem {
    /// Normalizes a physical background flow `w`.
    pub fn normalize(circulations: Circulations, w: BackgroundFlow) -> Result<Self, VortexError> {
        let m = w.degree();
        // p(ζ) = -2πi·w(ζ)
        let p: Vec<Cx> = w.coeffs().iter().map(|&c| -two_pi_i() * c).collect();
        let alpha = p[m];
        let scale = alpha.inv().powf(1.0 / (m as f64 + 1.0));
        // λ·p(λu) = Σ_k λ^{k+1} p_k u^k; the u^m coefficient is 1 up to rounding
        let mut lam_pow = scale;
        let mut remainder = Vec::with_capacity(m);
        for &pk in &p[..m] {
            remainder.push(lam_pow * pk);
            lam_pow *= scale;
        }
        Ok(Self::assemble(circulations, m, remainder, scale, w, false))
    }

    /// Accepts `(m, W)` directly with `λ = 1`; the implied physical flow is
    /// `w(ζ) = -(ζ^m + W(ζ)) / (2πi)`.
    pub fn pre_normalized(
        circulations: Circulations,
        m: usize,
        mut remainder: Vec<Cx>,
    ) -> Result<Self, VortexError> {
        if m < 1 {
            return Err(VortexError::DegreeTooLow { degree: m });
        }
        if remainder
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(VortexError::NonFiniteCoefficient);
        }
        while remainder.len() > m && remainder.last().is_some_and(|c| c.is_zero()) {
            remainder.pop();
        }
        if remainder.len() > m {
            return Err(VortexError::RemainderTooLong {
                got: remainder.len(),
                m,
            });
        }
        remainder.resize(m, Cx::zero());
        let mut w: Vec<Cx> = remainder.iter().map(|&c| -c / two_pi_i()).collect();
        w.push(-Cx::one() / two_pi_i());
        let w = BackgroundFlow::new(w)?;
        Ok(Self::assemble(
            circulations,
            m,
            remainder,
            Cx::one(),
            w,
            true,
        ))
    }

    fn assemble(
        circulations: Circulations,
        m: usize,
        remainder: Vec<Cx>,
        scale: Cx,
        background: BackgroundFlow,
        pre_normalized: bool,
    ) -> Self {
        let g = circulations.values();
        let n = g.len();
        let pair_products = (0..n)
            .map(|i| (0..n).map(|j| g[i] * g[j]).collect())
            .collect();
        let total: f64 = g.iter().sum();
        let complement_sums = g.iter().map(|&gj| total - gj).collect();
        VortexProblem {
            circulations,
            m,
            remainder,
            scale,
            background,
            pre_normalized,
            pair_products,
            complement_sums,
        }
    }

    pub fn circulations(&self) -> &Circulations {
        &self.circulations
    }

    pub fn n(&self) -> usize {
        self.circulations.len()
    }

    /// Degree `m` of the background flow.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Coefficients of `W`, low-to-high, exactly `m` entries.
    pub fn remainder(&self) -> &[Cx] {
        &self.remainder
    }

    /// `λ`, with `z_physical = λ·u`.
    pub fn scale(&self) -> Cx {
        self.scale
    }

    /// Physical background flow `w`.
    pub fn background(&self) -> &BackgroundFlow {
        &self.background
    }

    pub fn is_pre_normalized(&self) -> bool {
        self.pre_normalized
    }

    /// `Γ_{i,j} = Γ_i Γ_j` (0-based).
    pub fn pair_product(&self, i: usize, j: usize) -> f64 {
        self.pair_products[i][j]
    }

    /// `Γ^j = Σ_{i≠j} Γ_i` (0-based).
    pub fn complement_sum(&self, j: usize) -> f64 {
        self.complement_sums[j]
    }

    /// `u^m + W(u)`.
    pub fn normalized_background(&self, u: Cx) -> Cx {
        u.powu(self.m as u32) + horner(&self.remainder, u)
    }

    /// Coefficients of `u^m + W(u)`, low-to-high.
    pub fn normalized_background_coeffs(&self) -> Vec<Cx> {
        let mut c = self.remainder.clone();
        c.push(Cx::one());
        c
    }

    pub fn to_physical(&self, u: &[Cx]) -> Vec<Cx> {
        u.iter().map(|&x| x * self.scale).collect()
    }

    pub fn bounds(&self) -> Bounds {
        bounds(self.m, self.n())
    }
}

fn check_dimension(expected: usize, got: usize) -> Result<(), VortexError> {
    if expected != got {
        return Err(VortexError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// First pair of exactly coincident coordinates, if any.
pub fn find_collision(z: &[Cx]) -> Option<(usize, usize)> {
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            if z[i] == z[j] {
                return Some((i, j));
            }
        }
    }
    None
}

/// `L_j(z) = Σ_{k≠j} Γ_k / (z_j - z_k)`.
pub fn interaction_terms(gammas: &[f64], z: &[Cx]) -> Result<Vec<Cx>, VortexError> {
    check_dimension(gammas.len(), z.len())?;
    if let Some((i, j)) = find_collision(z) {
        return Err(VortexError::Collision { i, j });
    }
    Ok((0..z.len())
        .map(|j| {
            (0..z.len())
                .filter(|&k| k != j)
                .map(|k| gammas[k] / (z[j] - z[k]))
                .sum()
        })
        .collect())
}

/// Residual of the normalized rational system:
/// `z_j^m + W(z_j) - L_j(z)` for each `j`.
pub fn build_rational_residual(prob: &VortexProblem, z: &[Cx]) -> Result<Vec<Cx>, VortexError> {
    let l = interaction_terms(prob.circulations().values(), z)?;
    Ok(z.iter()
        .zip(l)
        .map(|(&zj, lj)| prob.normalized_background(zj) - lj)
        .collect())
}

/// Builds the polynomial system: equation `k` (1-based) is
///
/// ```text
/// Σ_j Γ_j z_j^{m+k-1} + Σ_j Γ_j z_j^{k-1} W(z_j) - RHS_k,
/// RHS_1 = 0,  RHS_2 = Σ_{i<j} Γ_{i,j},
/// RHS_k = Σ_j Γ_j Γ^j z_j^{k-2} + Σ_{i<j} Σ_{r+s=k-2, r,s≥1} Γ_{i,j} z_i^r z_j^s.
/// ```
pub fn build_poly_system(prob: &VortexProblem) -> Result<PolySystem, VortexError> {
    let n = prob.n();
    let m = prob.m() as u32;
    let g = prob.circulations().values();
    let mut polys = Vec::with_capacity(n);
    for k in 1..=n as u32 {
        let mut p = MPoly::zero(n);
        for (j, &gj) in g.iter().enumerate() {
            let gj = Cx::from(gj);
            p.add_term(Monomial::power(n, j, m + k - 1), gj);
            for (r, &wr) in prob.remainder().iter().enumerate() {
                p.add_term(Monomial::power(n, j, r as u32 + k - 1), gj * wr);
            }
        }
        match k {
            1 => {}
            2 => {
                let s: f64 = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .map(|(i, j)| prob.pair_product(i, j))
                    .sum();
                p.add_term(Monomial::one(n), Cx::from(-s));
            }
            _ => {
                for (j, &gj) in g.iter().enumerate() {
                    p.add_term(
                        Monomial::power(n, j, k - 2),
                        Cx::from(-gj * prob.complement_sum(j)),
                    );
                }
                for i in 0..n {
                    for j in i + 1..n {
                        for r in 1..k - 2 {
                            let mut e = vec![0; n];
                            e[i] = r;
                            e[j] = k - 2 - r;
                            p.add_term(Monomial::new(e), Cx::from(-prob.pair_product(i, j)));
                        }
                    }
                }
            }
        }
        polys.push(p);
    }
    Ok(PolySystem::new(polys)?)
}

/// `T = (Γ_j z_j^{i-1})`, rows indexed by power, columns by vortex.
pub fn transform_matrix(gammas: &[f64], z: &[Cx]) -> Result<DMatrix<Cx>, VortexError> {
    check_dimension(gammas.len(), z.len())?;
    let n = z.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        Cx::from(gammas[j]) * z[j].powu(i as u32)
    }))
}

/// Closed form `Π Γ_j · Π_{i<j} (z_j - z_i)` of `det T`.
pub fn transform_determinant(gammas: &[f64], z: &[Cx]) -> Cx {
    let mut d: Cx = gammas.iter().map(|&g| Cx::from(g)).product();
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            d *= z[j] - z[i];
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenericityReport {
    pub subset_sums_ok: bool,
    pub pair_sum_ok: bool,
    /// Nonempty index sets (1-based) whose circulations sum to zero.
    pub failing_subsets: Vec<Vec<usize>>,
    /// Whether the zero tests were exact rational arithmetic.
    pub exact: bool,
}

impl GenericityReport {
    pub fn is_generic(&self) -> bool {
        self.subset_sums_ok && self.pair_sum_ok
    }
}

/// Checks that every nonempty subset sum of circulations is nonzero and that
/// `Σ_{i<j} Γ_i Γ_j ≠ 0`.
pub fn check_genericity(gammas: &Circulations) -> Result<GenericityReport, VortexError> {
    let n = gammas.len();
    if n > MAX_GENERICITY_N {
        return Err(VortexError::TooManyVortices {
            n,
            max: MAX_GENERICITY_N,
        });
    }
    let mut failing_subsets = Vec::new();
    for mask in 1u32..(1 << n) {
        let idx = mask_indices(mask, n);
        if !gammas.sum_is_nonzero(&idx) {
            failing_subsets.push(idx.into_iter().map(|i| i + 1).collect());
        }
    }
    Ok(GenericityReport {
        subset_sums_ok: failing_subsets.is_empty(),
        pair_sum_ok: gammas.pair_product_sum_nonzero(),
        failing_subsets,
        exact: gammas.is_exact(),
    })
}

pub(crate) fn mask_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bounds {
    /// `(m+n-1)^n`, the Bézout number of the denominator-cleared system.
    #[serde(serialize_with = "decimal")]
    pub bezout: BigUint,
    /// `(m+n-1)!/(m-1)!`.
    #[serde(serialize_with = "decimal")]
    pub refined: BigUint,
}

/// Big integers are written as decimal strings.
pub fn decimal<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

pub fn bounds(m: usize, n: usize) -> Bounds {
    let top = (m + n - 1) as u64;
    Bounds {
        bezout: BigUint::from(top).pow(n as u32),
        refined: falling_product(m as u64, top),
    }
}

/// `lo · (lo+1) ··· hi`, or 1 when the range is empty.
pub(crate) fn falling_product(lo: u64, hi: u64) -> BigUint {
    (lo..=hi).fold(BigUint::one(), |acc, k| acc * k)
}

pub(crate) fn factorial(k: u64) -> BigUint {
    falling_product(1, k)
}
