//! Newton polytopes, reduced (face) systems and mixed volumes.
//!
//! Hulls are exact over `i64` lattice points. Dimensions up to 3 use a
//! general extreme-point computation; above that only dilated standard
//! simplices `d·Δ_n` are recognized, which is all the vortex systems need.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::mpoly::{Cx, MPoly, Monomial, PolySystem};
use crate::solver::try_svd;
use crate::vortex_system::{factorial, mask_indices, Circulations};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytopeError {
    #[error("polytope needs at least one point")]
    Empty,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(
        "general hulls are supported up to dimension 3 (got {dim}); only dilated simplices beyond"
    )]
    UnsupportedDimension { dim: usize },
    #[error("mixed-volume oracle supports n in {{2, 3}} (got {n})")]
    UnsupportedOracle { n: usize },
    #[error("expected {expected} polytopes, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("weight vector must be nonzero with one entry per variable")]
    BadWeight,
    #[error("face index set must be nonempty and within 1..={n}")]
    BadFace { n: usize },
    #[error(
        "system is not of the vortex form: equation {k} has degree {got}, expected {expected}"
    )]
    NotVortexSystem { k: usize, got: u32, expected: u32 },
    #[error("circulation count {got} does not match the {n} variables")]
    CirculationCount { n: usize, got: usize },
    #[error("zero polynomial has no Newton polytope")]
    ZeroPolynomial,
}

/// Convex lattice polytope stored by its vertex set (sorted, extreme points
/// only).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Vec<i64>>,
}

impl LatticePolytope {
    /// Convex hull of arbitrary lattice points.
    pub fn hull(dim: usize, points: &[Vec<i64>]) -> Result<Self, PolytopeError> {
        if points.is_empty() {
            return Err(PolytopeError::Empty);
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(PolytopeError::DimensionMismatch {
                left: dim,
                right: p.len(),
            });
        }
        let uniq: BTreeSet<Vec<i64>> = points.iter().cloned().collect();
        let pts: Vec<Vec<i64>> = uniq.into_iter().collect();
        if dim <= 3 {
            let padded: Vec<[i64; 3]> = pts.iter().map(|p| pad3(p)).collect();
            let vertices = extreme_points_3d(&padded)
                .into_iter()
                .map(|i| pts[i].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            return Ok(LatticePolytope { dim, vertices });
        }
        match recognize_simplex(dim, &pts) {
            Some(d) => Ok(LatticePolytope::dilated_simplex(dim, d)),
            None => Err(PolytopeError::UnsupportedDimension { dim }),
        }
    }

    /// `d·Δ_n = Conv{0, d·e_1, ..., d·e_n}`; `d = 0` gives the origin.
    pub fn dilated_simplex(dim: usize, d: u64) -> Self {
        let mut vertices = vec![vec![0; dim]];
        if d > 0 {
            for i in 0..dim {
                let mut v = vec![0; dim];
                v[i] = d as i64;
                vertices.push(v);
            }
        }
        vertices.sort();
        LatticePolytope { dim, vertices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    /// `Some(d)` when this polytope is exactly `d·Δ_n`.
    pub fn simplex_dilation(&self) -> Option<u64> {
        recognize_simplex(self.dim, &self.vertices)
    }

    /// `n!·vol_n`, an integer for lattice polytopes.
    pub fn normalized_volume(&self) -> Result<BigInt, PolytopeError> {
        if let Some(d) = self.simplex_dilation() {
            return Ok(BigInt::from(d).pow(self.dim as u32));
        }
        if self.dim > 3 {
            return Err(PolytopeError::UnsupportedDimension { dim: self.dim });
        }
        let padded: Vec<[i64; 3]> = self.vertices.iter().map(|p| pad3(p)).collect();
        let v = match self.dim {
            0 => 1,
            1 => {
                let xs = padded.iter().map(|p| p[0]);
                (xs.clone().max().unwrap() - xs.min().unwrap()) as i128
            }
            2 => {
                let pts: Vec<[i64; 2]> = padded.iter().map(|p| [p[0], p[1]]).collect();
                let hull = hull_2d(&pts);
                if hull.len() < 3 {
                    0
                } else {
                    shoelace2(&hull.iter().map(|&i| pts[i]).collect::<Vec<_>>()).abs()
                }
            }
            _ => volume6_3d(&padded),
        };
        Ok(BigInt::from(v))
    }

    /// Whether every vertex lies in `d·Δ_n` (nonnegative, coordinate sum ≤ d).
    pub fn within_simplex(&self, d: u64) -> bool {
        self.vertices
            .iter()
            .all(|v| v.iter().all(|&x| x >= 0) && v.iter().sum::<i64>() <= d as i64)
    }
}

fn pad3(p: &[i64]) -> [i64; 3] {
    let mut out = [0; 3];
    out[..p.len()].copy_from_slice(p);
    out
}

fn recognize_simplex(dim: usize, pts: &[Vec<i64>]) -> Option<u64> {
    if pts.iter().any(|p| p.iter().any(|&x| x < 0)) {
        return None;
    }
    let d = pts.iter().map(|p| p.iter().sum::<i64>()).max()?;
    let set: BTreeSet<&Vec<i64>> = pts.iter().collect();
    if !set.contains(&vec![0; dim]) {
        return None;
    }
    if d == 0 {
        return Some(0);
    }
    for i in 0..dim {
        let mut v = vec![0; dim];
        v[i] = d;
        if !set.contains(&v) {
            return None;
        }
    }
    Some(d as u64)
}

fn sub3(a: [i64; 3], b: [i64; 3]) -> [i128; 3] {
    [
        (a[0] - b[0]) as i128,
        (a[1] - b[1]) as i128,
        (a[2] - b[2]) as i128,
    ]
}

fn cross(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [i128; 3], b: [i128; 3]) -> i128 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn is_zero3(a: [i128; 3]) -> bool {
    a == [0, 0, 0]
}

/// Indices of strictly convex hull vertices, CCW, collinear points dropped.
fn hull_2d(pts: &[[i64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by_key(|&i| pts[i]);
    idx.dedup_by_key(|i| pts[*i]);
    if idx.len() <= 2 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| -> i128 {
        let (o, a, b) = (pts[o], pts[a], pts[b]);
        (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128
            - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn shoelace2(poly: &[[i64; 2]]) -> i128 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] as i128 * b[1] as i128 - a[1] as i128 * b[0] as i128
        })
        .sum()
}

/// Projects coplanar 3D points to 2D by dropping the axis where the plane
/// normal is largest (an affine bijection on the plane).
fn project_out(normal: [i128; 3], p: [i64; 3]) -> [i64; 2] {
    let axis = (0..3).max_by_key(|&k| normal[k].abs()).unwrap();
    match axis {
        0 => [p[1], p[2]],
        1 => [p[0], p[2]],
        _ => [p[0], p[1]],
    }
}

enum AffineSpan {
    Point,
    Line([i128; 3]),
    Plane([i128; 3]),
    Space,
}

fn affine_span(pts: &[[i64; 3]]) -> AffineSpan {
    let p0 = pts[0];
    let Some(d1) = pts.iter().map(|&p| sub3(p, p0)).find(|d| !is_zero3(*d)) else {
        return AffineSpan::Point;
    };
    let Some(normal) = pts
        .iter()
        .map(|&p| cross(d1, sub3(p, p0)))
        .find(|n| !is_zero3(*n))
    else {
        return AffineSpan::Line(d1);
    };
    if pts.iter().all(|&p| dot(normal, sub3(p, p0)) == 0) {
        AffineSpan::Plane(normal)
    } else {
        AffineSpan::Space
    }
}

struct Facet {
    outward: [i128; 3],
    /// Vertex indices in boundary order.
    cycle: Vec<usize>,
}

/// Facets of a full-dimensional point set, by brute-force supporting planes.
fn facets_3d(pts: &[[i64; 3]]) -> Vec<Facet> {
    let n = pts.len();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = cross(sub3(pts[j], pts[i]), sub3(pts[k], pts[i]));
                if is_zero3(normal) {
                    continue;
                }
                let (mut pos, mut neg) = (false, false);
                let mut on = Vec::new();
                for (q, &p) in pts.iter().enumerate() {
                    let s = dot(normal, sub3(p, pts[i]));
                    if s > 0 {
                        pos = true;
                    } else if s < 0 {
                        neg = true;
                    } else {
                        on.push(q);
                    }
                    if pos && neg {
                        break;
                    }
                }
                if pos && neg || !seen.insert(on.clone()) {
                    continue;
                }
                let outward = if pos { normal.map(|x| -x) } else { normal };
                let flat: Vec<[i64; 2]> = on.iter().map(|&q| project_out(normal, pts[q])).collect();
                let mut cycle: Vec<usize> = hull_2d(&flat).into_iter().map(|h| on[h]).collect();
                let t = cross(
                    sub3(pts[cycle[1]], pts[cycle[0]]),
                    sub3(pts[cycle[2]], pts[cycle[0]]),
                );
                if dot(t, outward) < 0 {
                    cycle.reverse();
                }
                out.push(Facet { outward, cycle });
            }
        }
    }
    out
}

fn extreme_points_3d(pts: &[[i64; 3]]) -> Vec<usize> {
    match affine_span(pts) {
        AffineSpan::Point => vec![0],
        AffineSpan::Line(d) => {
            let t = |i: usize| dot(d, sub3(pts[i], pts[0]));
            let lo = (0..pts.len()).min_by_key(|&i| t(i)).unwrap();
            let hi = (0..pts.len()).max_by_key(|&i| t(i)).unwrap();
            vec![lo, hi]
        }
        AffineSpan::Plane(normal) => {
            let flat: Vec<[i64; 2]> = pts.iter().map(|&p| project_out(normal, p)).collect();
            hull_2d(&flat)
        }
        AffineSpan::Space => {
            let set: BTreeSet<usize> = facets_3d(pts).into_iter().flat_map(|f| f.cycle).collect();
            set.into_iter().collect()
        }
    }
}

/// `6·vol` of the hull of 3D points; zero when not full-dimensional.
fn volume6_3d(pts: &[[i64; 3]]) -> i128 {
    if !matches!(affine_span(pts), AffineSpan::Space) {
        return 0;
    }
    let o = pts[0];
    let mut total = 0i128;
    for f in facets_3d(pts) {
        debug_assert!(!is_zero3(f.outward));
        let c = &f.cycle;
        for w in 1..c.len() - 1 {
            let a = sub3(pts[c[0]], o);
            let b = sub3(pts[c[w]], o);
            let d = sub3(pts[c[w + 1]], o);
            total += dot(a, cross(b, d));
        }
    }
    total
}

/// Newton polytope of `support(p) ∪ {0}`.
pub fn newton_polytope(p: &MPoly) -> Result<LatticePolytope, PolytopeError> {
    if p.is_zero() {
        return Err(PolytopeError::ZeroPolynomial);
    }
    let n = p.n_vars();
    let mut pts: Vec<Vec<i64>> = p
        .support()
        .iter()
        .map(|m| m.exponents().iter().map(|&r| r as i64).collect())
        .collect();
    pts.push(vec![0; n]);
    LatticePolytope::hull(n, &pts)
}

pub fn minkowski_sum(
    a: &LatticePolytope,
    b: &LatticePolytope,
) -> Result<LatticePolytope, PolytopeError> {
    if a.dim != b.dim {
        return Err(PolytopeError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    if a.dim > 3 {
        return match (a.simplex_dilation(), b.simplex_dilation()) {
            (Some(da), Some(db)) => Ok(LatticePolytope::dilated_simplex(a.dim, da + db)),
            _ => Err(PolytopeError::UnsupportedDimension { dim: a.dim }),
        };
    }
    let sums: Vec<Vec<i64>> = a
        .vertices
        .iter()
        .flat_map(|p| {
            b.vertices
                .iter()
                .map(move |q| p.iter().zip(q).map(|(x, y)| x + y).collect())
        })
        .collect();
    LatticePolytope::hull(a.dim, &sums)
}

/// `Σ_{k=1..n} (m+k-1) = n·m + n(n-1)/2`, the dilation of the summed
/// Newton polytopes of the vortex system.
pub fn facet_dilation(m: usize, n: usize) -> u64 {
    (n * m + n * (n - 1) / 2) as u64
}

/// Per-equation face systems selected by a weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSystem {
    pub alpha: Vec<i64>,
    pub polys: Vec<MPoly>,
}

/// Keeps, in each equation, exactly the terms minimizing `α·r` over its
/// support.
pub fn reduce_system(system: &PolySystem, alpha: &[i64]) -> Result<ReducedSystem, PolytopeError> {
    if alpha.len() != system.n_vars() || alpha.iter().all(|&a| a == 0) {
        return Err(PolytopeError::BadWeight);
    }
    let polys = system
        .polys
        .iter()
        .map(|p| {
            let min = p.terms().map(|(m, _)| m.weight(alpha)).min();
            match min {
                Some(min) => p.filter_terms(|m| m.weight(alpha) == min),
                None => p.clone(),
            }
        })
        .collect();
    Ok(ReducedSystem {
        alpha: alpha.to_vec(),
        polys,
    })
}

/// A face `Conv{a_n·e_j : j ∈ J}` of the facet of `a_n·Δ_n` opposite the
/// origin, identified by the nonempty coordinate set `J`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FaceDescriptor {
    members: Vec<usize>,
}

impl FaceDescriptor {
    /// From 0-based coordinate indices.
    pub fn new(n: usize, mut members: Vec<usize>) -> Result<Self, PolytopeError> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() || members.iter().any(|&j| j >= n) {
            return Err(PolytopeError::BadFace { n });
        }
        Ok(FaceDescriptor { members })
    }

    /// 0-based coordinate indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// 1-based indices, as used in reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.members.iter().map(|j| j + 1).collect()
    }

    /// `α_j = -1` on `J`, `0` elsewhere.
    pub fn representative_alpha(&self, n: usize) -> Vec<i64> {
        let mut a = vec![0; n];
        for &j in &self.members {
            a[j] = -1;
        }
        a
    }
}

impl Serialize for FaceDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// All `2^n - 1` faces, in binary-counter order of their index masks.
pub fn enumerate_facet_faces(n: usize) -> Vec<FaceDescriptor> {
    (1u32..(1 << n))
        .map(|mask| FaceDescriptor {
            members: mask_indices(mask, n),
        })
        .collect()
}

/// Settings for the multistart search for torus solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub min_modulus: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            starts: 200,
            max_iters: 60,
            residual_tol: 1e-10,
            min_modulus: 1e-6,
            seed: 0x5eed_f00d,
        }
    }
}

/// Largest face size the numeric oracle handles.
pub const ORACLE_MAX_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionVerdict {
    /// All subset sums of the face circulations are nonzero.
    NoTorusSolution,
    /// Some subset sum vanishes; the criterion says nothing.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub starts: usize,
    pub found: bool,
    pub witness: Option<Vec<Cx>>,
    pub best_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusSolvability {
    pub criterion: CriterionVerdict,
    /// `None` when the face is larger than [`ORACLE_MAX_K`].
    pub oracle: Option<OracleOutcome>,
}

impl TorusSolvability {
    /// `Some(true)` if a torus solution was exhibited, `Some(false)` if the
    /// criterion rules one out (and the oracle did not contradict it), else
    /// `None`.
    pub fn solvable(&self) -> Option<bool> {
        match (&self.oracle, self.criterion) {
            (Some(o), _) if o.found => Some(true),
            (_, CriterionVerdict::NoTorusSolution) => Some(false),
            _ => None,
        }
    }

    /// False if the criterion and the oracle disagree.
    pub fn consistent(&self) -> bool {
        !(self.criterion == CriterionVerdict::NoTorusSolution
            && self.oracle.as_ref().is_some_and(|o| o.found))
    }

    pub fn oracle_skipped(&self) -> bool {
        self.oracle.is_none()
    }
}

/// Decides whether `Σ_j Γ_j z_j^{m+i-1} = 0, i = 1..k` has a solution with
/// every `z_j ≠ 0`, by the subset-sum criterion and (for `k ≤ 3`) a
/// multistart Gauss–Newton search.
pub fn special_reduced_solvable(
    gammas: &Circulations,
    m: usize,
    cfg: &OracleConfig,
) -> TorusSolvability {
    let k = gammas.len();
    let all_nonzero = (1u32..(1 << k)).all(|mask| gammas.sum_is_nonzero(&mask_indices(mask, k)));
    let criterion = if all_nonzero {
        CriterionVerdict::NoTorusSolution
    } else {
        CriterionVerdict::Undetermined
    };
    let oracle = (k <= ORACLE_MAX_K).then(|| torus_oracle(gammas.values(), m, cfg));
    TorusSolvability { criterion, oracle }
}

fn special_residual(g: &[f64], m: usize, z: &[Cx]) -> Vec<Cx> {
    (0..g.len())
        .map(|i| {
            g.iter()
                .zip(z)
                .map(|(&gj, &zj)| gj * zj.powu((m + i) as u32))
                .sum()
        })
        .collect()
}

/// The special system is weighted-homogeneous, so any torus solution lies on
/// a ray; a random affine slice `ℓ·z = 1` picks a point on it.
fn torus_oracle(g: &[f64], m: usize, cfg: &OracleConfig) -> OracleOutcome {
    let k = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best_residual = f64::INFINITY;
    let mut witness = None;
    let rand_cx =
        |rng: &mut ChaCha8Rng| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    for _ in 0..cfg.starts {
        let slice: Vec<Cx> = (0..k).map(|_| rand_cx(&mut rng)).collect();
        let mut z: Vec<Cx> = (0..k).map(|_| rand_cx(&mut rng)).collect();
        for _ in 0..cfg.max_iters {
            let mut f = special_residual(g, m, &z);
            f.push(slice.iter().zip(&z).map(|(a, b)| a * b).sum::<Cx>() - Cx::new(1.0, 0.0));
            let jac = DMatrix::from_fn(k + 1, k, |i, j| {
                if i < k {
                    let d = (m + i) as u32;
                    Cx::from(g[j] * d as f64) * z[j].powu(d - 1)
                } else {
                    slice[j]
                }
            });
            let rhs = DVector::from_vec(f);
            let Some(Ok(step)) = try_svd(jac, true, true).map(|svd| svd.solve(&rhs, 1e-14)) else {
                break;
            };
            let mut size = 0.0;
            for (zj, s) in z.iter_mut().zip(step.iter()) {
                *zj -= s;
                size += s.norm_sqr();
            }
            if !z.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
                break;
            }
            let scale = 1.0 + z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if size.sqrt() < 1e-15 * scale {
                break;
            }
        }
        if !z.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            continue;
        }
        let res = special_residual(g, m, &z)
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt();
        best_residual = best_residual.min(res);
        let min_mod = z.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
        if res < cfg.residual_tol && min_mod > cfg.min_modulus {
            witness = Some(z);
            break;
        }
    }
    OracleOutcome {
        starts: cfg.starts,
        found: witness.is_some(),
        witness,
        best_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceVerdict {
    NoTorusSolution,
    TorusSolution,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceCheck {
    pub subset: FaceDescriptor,
    pub reduced_system: ReducedSystem,
    /// Whether the reduced system is exactly `Σ_{j∈J} Γ_j z_j^{m+k-1}`.
    pub structure_ok: bool,
    pub criterion_verdict: CriterionVerdict,
    pub oracle_verdict: Option<OracleOutcome>,
    pub verdict: FaceVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVerdict {
    /// Every face system was shown to have no torus solution.
    Ok,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessCertificate {
    pub alpha0: Vec<i64>,
    pub m: usize,
    pub n: usize,
    /// Dilation `a_n` of the facet simplex.
    pub facet_dilation: u64,
    /// Whether the summed Newton polytope lies in `a_n·Δ_n`.
    pub within_facet_simplex: bool,
    pub faces: Vec<FaceCheck>,
    pub flagged_faces: Vec<FaceDescriptor>,
    pub verdict: CertificateVerdict,
}

/// Runs the reduced-system test with `α_0 = (1, ..., 1)`: every face of the
/// outer facet of `a_n·Δ_n` must carry a reduced system with no torus
/// solution.
pub fn finiteness_certificate(
    system: &PolySystem,
    gammas: &Circulations,
    cfg: &OracleConfig,
) -> Result<FinitenessCertificate, PolytopeError> {
    let n = system.n_vars();
    if gammas.len() != n {
        return Err(PolytopeError::CirculationCount {
            n,
            got: gammas.len(),
        });
    }
    let m = system.degrees[0] as usize;
    for (k, &d) in system.degrees.iter().enumerate() {
        if d as usize != m + k || system.len() != n {
            return Err(PolytopeError::NotVortexSystem {
                k: k + 1,
                got: d,
                expected: (m + k) as u32,
            });
        }
    }
    let a_n = facet_dilation(m, n);
    let within_facet_simplex = summed_polytope_within(system, m, a_n)?;

    let faces: Vec<FaceCheck> = enumerate_facet_faces(n)
        .into_par_iter()
        .map(|face| {
            let alpha = face.representative_alpha(n);
            let reduced = reduce_system(system, &alpha).expect("face weight is nonzero");
            let structure_ok = is_special_form(&reduced, &face, gammas, m);
            let sub = gammas.subset(face.members());
            let mask: u64 = face.members().iter().map(|&j| 1u64 << j).sum();
            let oracle_cfg = OracleConfig {
                seed: cfg.seed ^ mask.wrapping_mul(0x9e37_79b9_7f4a_7c15),
                ..cfg.clone()
            };
            let solv = special_reduced_solvable(&sub, m, &oracle_cfg);
            let verdict = if !structure_ok || !solv.consistent() {
                FaceVerdict::Undetermined
            } else {
                match solv.solvable() {
                    Some(false) => FaceVerdict::NoTorusSolution,
                    Some(true) => FaceVerdict::TorusSolution,
                    None => FaceVerdict::Undetermined,
                }
            };
            FaceCheck {
                subset: face,
                reduced_system: reduced,
                structure_ok,
                criterion_verdict: solv.criterion,
                oracle_verdict: solv.oracle,
                verdict,
            }
        })
        .collect();

    let flagged_faces: Vec<FaceDescriptor> = faces
        .iter()
        .filter(|f| f.verdict != FaceVerdict::NoTorusSolution)
        .map(|f| f.subset.clone())
        .collect();
    let verdict = if within_facet_simplex && flagged_faces.is_empty() {
        CertificateVerdict::Ok
    } else {
        CertificateVerdict::Inconclusive
    };
    Ok(FinitenessCertificate {
        alpha0: vec![1; n],
        m,
        n,
        facet_dilation: a_n,
        within_facet_simplex,
        faces,
        flagged_faces,
        verdict,
    })
}

/// `Σ_k N_k ⊆ a_n·Δ_n`, checked on supports (each `N_k ⊆ (m+k-1)·Δ_n`),
/// and on the explicit hull when the dimension allows.
fn summed_polytope_within(system: &PolySystem, m: usize, a_n: u64) -> Result<bool, PolytopeError> {
    let n = system.n_vars();
    let supports_ok = system.polys.iter().enumerate().all(|(k, p)| {
        p.terms().all(|(mono, _)| mono.degree() as usize <= m + k)
            && (0..n).all(|j| !p.coeff(&Monomial::power(n, j, (m + k) as u32)).is_zero())
    });
    if !supports_ok {
        return Ok(false);
    }
    if n <= 3 {
        let mut sum = LatticePolytope::dilated_simplex(n, 0);
        for p in &system.polys {
            sum = minkowski_sum(&sum, &newton_polytope(p)?)?;
        }
        return Ok(sum.within_simplex(a_n));
    }
    Ok(true)
}

fn is_special_form(
    reduced: &ReducedSystem,
    face: &FaceDescriptor,
    gammas: &Circulations,
    m: usize,
) -> bool {
    let n = gammas.len();
    let g = gammas.values();
    reduced.polys.iter().enumerate().all(|(k, p)| {
        let deg = (m + k) as u32;
        p.n_terms() == face.members().len()
            && face.members().iter().all(|&j| {
                let c = p.coeff(&Monomial::power(n, j, deg));
                (c - Cx::from(g[j])).norm() <= 1e-12 * g[j].abs().max(1.0)
            })
    })
}

/// Mixed volume of dilated unit simplices `d_1·Δ_n, ..., d_n·Δ_n`, which by
/// multilinearity is `Π d_i` (since `n!·vol(Δ_n) = 1`).
pub fn mixed_volume_simplices(dilations: &[u64]) -> BigUint {
    dilations
        .iter()
        .fold(BigUint::from(1u32), |acc, &d| acc * d)
}

/// Normalized mixed volume by inclusion–exclusion over Minkowski sums:
/// `Σ_{∅≠S⊆[n]} (-1)^{n-|S|} vol_n(Σ_{i∈S} P_i)`, scaled so that
/// `MV(Δ_n, ..., Δ_n) = 1`.
pub fn mixed_volume_oracle(polytopes: &[LatticePolytope]) -> Result<BigRational, PolytopeError> {
    let n = polytopes.len();
    if !(2..=3).contains(&n) {
        return Err(PolytopeError::UnsupportedOracle { n });
    }
    if let Some(p) = polytopes.iter().find(|p| p.dim != n) {
        return Err(PolytopeError::DimensionMismatch {
            left: n,
            right: p.dim,
        });
    }
    let mut total = BigInt::zero();
    for mask in 1u32..(1 << n) {
        let idx = mask_indices(mask, n);
        let mut sum = polytopes[idx[0]].clone();
        for &i in &idx[1..] {
            sum = minkowski_sum(&sum, &polytopes[i])?;
        }
        let v = sum.normalized_volume()?;
        if (n - idx.len()).is_multiple_of(2) {
            total += v;
        } else {
            total -= v;
        }
    }
    Ok(BigRational::new(total, BigInt::from(factorial(n as u64))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vortex_system::{build_poly_system, VortexProblem};

    fn simplex(n: usize, d: u64) -> LatticePolytope {
        LatticePolytope::dilated_simplex(n, d)
    }

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn vortex_system(g: &[(i64, i64)], m: usize, w: Vec<Cx>) -> (PolySystem, Circulations) {
        let c = Circulations::from_fractions(g).unwrap();
        let prob = VortexProblem::pre_normalized(c.clone(), m, w).unwrap();
        (build_poly_system(&prob).unwrap(), c)
    }

    #[test]
    fn hull_drops_interior_and_edge_points() {
        let pts = vec![
            vec![0, 0],
            vec![2, 0],
            vec![0, 2],
            vec![1, 0],
            vec![1, 1],
            vec![0, 1],
        ];
        let p = LatticePolytope::hull(2, &pts).unwrap();
        assert_eq!(p.vertices(), simplex(2, 2).vertices());
        let cube: Vec<Vec<i64>> = (0..27).map(|i| vec![i % 3, (i / 3) % 3, i / 9]).collect();
        let p = LatticePolytope::hull(3, &cube).unwrap();
        assert_eq!(p.vertices().len(), 8);
        assert_eq!(p.normalized_volume().unwrap(), BigInt::from(6 * 8));
    }

    #[test]
    fn lower_dimensional_hulls() {
        let seg = LatticePolytope::hull(3, &[vec![0, 0, 0], vec![1, 1, 1], vec![2, 2, 2]]).unwrap();
        assert_eq!(seg.vertices(), &[vec![0, 0, 0], vec![2, 2, 2]]);
        assert_eq!(seg.normalized_volume().unwrap(), BigInt::zero());
        let tri = LatticePolytope::hull(
            3,
            &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![0, 0, 1]],
        )
        .unwrap();
        assert_eq!(tri.vertices().len(), 3);
        assert_eq!(tri.normalized_volume().unwrap(), BigInt::zero());
    }

    #[test]
    fn newton_polytopes_of_vortex_equations_are_simplices() {
        for n in 2..=3 {
            for m in 1..=3 {
                let g: Vec<(i64, i64)> = (0..n).map(|j| (j as i64 + 2, 1)).collect();
                let (sys, _) = vortex_system(&g, m, vec![Cx::new(0.5, 0.25); m]);
                for (k, p) in sys.polys.iter().enumerate() {
                    assert_eq!(newton_polytope(p).unwrap(), simplex(n, (m + k) as u64));
                }
                // with W ≡ 0 some lower terms vanish; the polytopes do not change
                let (sys, _) = vortex_system(&g, m, vec![]);
                for (k, p) in sys.polys.iter().enumerate() {
                    assert_eq!(newton_polytope(p).unwrap(), simplex(n, (m + k) as u64));
                }
            }
        }
        let c = MPoly::constant(2, Cx::new(3.0, 0.0));
        assert_eq!(newton_polytope(&c).unwrap().vertices(), &[vec![0, 0]]);
    }

    #[test]
    fn high_dimensional_simplex_recognition() {
        let (sys, _) = vortex_system(
            &[(1, 1), (2, 1), (3, 1), (5, 1)],
            2,
            vec![Cx::new(1.0, 0.0); 2],
        );
        for (k, p) in sys.polys.iter().enumerate() {
            assert_eq!(
                newton_polytope(p).unwrap().simplex_dilation(),
                Some(2 + k as u64)
            );
        }
        let bad = LatticePolytope::hull(4, &[vec![1, 1, 1, 1], vec![0, 0, 0, 0]]);
        assert!(matches!(
            bad,
            Err(PolytopeError::UnsupportedDimension { dim: 4 })
        ));
    }

    #[test]
    fn minkowski_sums_of_simplices() {
        for m in 1..=4u64 {
            assert_eq!(
                minkowski_sum(&simplex(2, m), &simplex(2, m + 1)).unwrap(),
                simplex(2, 2 * m + 1)
            );
        }
        for n in 2..=5usize {
            let m = 2usize;
            let mut acc = simplex(n, 0);
            for k in 1..=n {
                acc = minkowski_sum(&acc, &simplex(n, (m + k - 1) as u64)).unwrap();
            }
            assert_eq!(acc, simplex(n, facet_dilation(m, n)));
            assert_eq!(facet_dilation(m, n) as usize, n * m + n * (n - 1) / 2);
        }
        let sq =
            LatticePolytope::hull(2, &[vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(minkowski_sum(&sq, &simplex(2, 0)).unwrap(), sq);
        assert!(minkowski_sum(&sq, &simplex(3, 1)).is_err());
    }

    #[test]
    fn reduced_systems_on_two_vortex_faces() {
        let m = 3;
        let (sys, c) = vortex_system(
            &[(1, 1), (2, 1)],
            m,
            vec![Cx::new(0.4, 0.0), Cx::new(0.0, 1.0), Cx::new(2.0, 0.0)],
        );
        let g = c.values();
        let r = reduce_system(&sys, &[-1, -1]).unwrap();
        let e1 = MPoly::from_terms(
            2,
            vec![(vec![3, 0], Cx::from(g[0])), (vec![0, 3], Cx::from(g[1]))],
        )
        .unwrap();
        let e2 = MPoly::from_terms(
            2,
            vec![(vec![4, 0], Cx::from(g[0])), (vec![0, 4], Cx::from(g[1]))],
        )
        .unwrap();
        assert_eq!(r.polys, vec![e1, e2]);
        let r = reduce_system(&sys, &[-1, 0]).unwrap();
        assert_eq!(r.polys[0], MPoly::power(2, 0, 3, Cx::from(g[0])));
        assert_eq!(r.polys[1], MPoly::power(2, 0, 4, Cx::from(g[0])));
        let r = reduce_system(&sys, &[1, 1]).unwrap();
        for p in &r.polys {
            assert!(p
                .terms()
                .all(|(mono, _)| mono.degree() == 0 || mono.degree() == p.total_degree().unwrap()));
            assert_eq!(p.total_degree().unwrap(), 0);
        }
        assert!(reduce_system(&sys, &[0, 0]).is_err());
        assert!(reduce_system(&sys, &[1]).is_err());
    }

    #[test]
    fn face_enumeration_order() {
        let f = enumerate_facet_faces(2);
        let sets: Vec<_> = f.iter().map(|x| x.one_based()).collect();
        assert_eq!(sets, vec![vec![1], vec![2], vec![1, 2]]);
        assert_eq!(enumerate_facet_faces(3).len(), 7);
        assert_eq!(serde_json::to_string(&f[2]).unwrap(), "[1,2]");
    }

    #[test]
    fn representative_weights_select_face_terms() {
        let m = 2;
        let (sys, _) = vortex_system(
            &[(1, 1), (3, 1), (-7, 2)],
            m,
            vec![Cx::new(1.0, 1.0), Cx::new(-0.5, 0.0)],
        );
        for face in enumerate_facet_faces(3) {
            let r = reduce_system(&sys, &face.representative_alpha(3)).unwrap();
            for (k, p) in r.polys.iter().enumerate() {
                let expected: BTreeSet<Monomial> = face
                    .members()
                    .iter()
                    .map(|&j| Monomial::power(3, j, (m + k) as u32))
                    .collect();
                assert_eq!(p.support(), expected);
            }
        }
    }

    #[test]
    fn special_reduced_examples() {
        let cfg = OracleConfig::default();
        let s = special_reduced_solvable(
            &Circulations::from_fractions(&[(1, 1), (1, 1)]).unwrap(),
            1,
            &cfg,
        );
        assert_eq!(s.criterion, CriterionVerdict::NoTorusSolution);
        assert_eq!(s.solvable(), Some(false));
        assert!(s.consistent());

        let s = special_reduced_solvable(
            &Circulations::from_fractions(&[(1, 1), (-1, 1)]).unwrap(),
            1,
            &cfg,
        );
        assert_eq!(s.criterion, CriterionVerdict::Undetermined);
        assert_eq!(s.solvable(), Some(true));
        let w = s.oracle.unwrap().witness.unwrap();
        assert!((w[0] - w[1]).norm() < 1e-8);

        let s =
            special_reduced_solvable(&Circulations::from_fractions(&[(1, 1)]).unwrap(), 3, &cfg);
        assert_eq!(s.solvable(), Some(false));

        let s = special_reduced_solvable(
            &Circulations::from_f64(vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            1,
            &cfg,
        );
        assert!(s.oracle_skipped());
        assert_eq!(s.solvable(), Some(false));
    }

    #[test]
    fn certificate_examples() {
        let cfg = OracleConfig::default();
        let (sys, c) = vortex_system(&[(1, 1), (1, 1)], 2, vec![Cx::new(1.0, 0.0), Cx::zero()]);
        let cert = finiteness_certificate(&sys, &c, &cfg).unwrap();
        assert_eq!(cert.verdict, CertificateVerdict::Ok);
        assert_eq!(cert.faces.len(), 3);
        assert!(cert.within_facet_simplex);

        let (sys, c) = vortex_system(&[(1, 1), (1, 1), (-5, 4)], 1, vec![]);
        let cert = finiteness_certificate(&sys, &c, &cfg).unwrap();
        assert_eq!(cert.verdict, CertificateVerdict::Ok);
        assert_eq!(cert.faces.len(), 7);

        let (sys, c) = vortex_system(&[(1, 1), (-1, 1)], 1, vec![]);
        let cert = finiteness_certificate(&sys, &c, &cfg).unwrap();
        assert_eq!(cert.verdict, CertificateVerdict::Inconclusive);
        assert_eq!(
            cert.flagged_faces
                .iter()
                .map(|f| f.one_based())
                .collect::<Vec<_>>(),
            vec![vec![1, 2]]
        );
        assert_eq!(cert.faces[2].verdict, FaceVerdict::TorusSolution);
    }

    #[test]
    fn mixed_volume_examples() {
        assert_eq!(mixed_volume_simplices(&[1, 1]), BigUint::from(1u32));
        assert_eq!(mixed_volume_simplices(&[2, 3]), BigUint::from(6u32));
        assert_eq!(
            mixed_volume_oracle(&[simplex(2, 2), simplex(2, 3)]).unwrap(),
            int(6)
        );
        assert_eq!(
            mixed_volume_oracle(&[simplex(2, 1), simplex(2, 1)]).unwrap(),
            int(1)
        );
        assert_eq!(
            mixed_volume_oracle(&[simplex(3, 1), simplex(3, 2), simplex(3, 3)]).unwrap(),
            int(6)
        );
        assert!(mixed_volume_oracle(&vec![simplex(4, 1); 4]).is_err());
        // MV(P, P) = 2·area(P) for the unit square
        let sq =
            LatticePolytope::hull(2, &[vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(
            mixed_volume_oracle(&[sq.clone(), sq.clone()]).unwrap(),
            int(2)
        );
        // square and segment: MV = 1 (the segment's length times the square's width)
        let seg = LatticePolytope::hull(2, &[vec![0, 0], vec![1, 0]]).unwrap();
        assert_eq!(mixed_volume_oracle(&[sq, seg]).unwrap(), int(1));
    }

    #[test]
    fn mixed_volume_symmetric_and_multilinear() {
        let a = LatticePolytope::hull(
            3,
            &[
                vec![0, 0, 0],
                vec![2, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![1, 1, 1],
            ],
        )
        .unwrap();
        let b = LatticePolytope::hull(
            3,
            &[vec![0, 0, 0], vec![1, 0, 0], vec![0, 2, 1], vec![0, 0, 1]],
        )
        .unwrap();
        let c = simplex(3, 1);
        let base = mixed_volume_oracle(&[a.clone(), b.clone(), c.clone()]).unwrap();
        assert_eq!(
            mixed_volume_oracle(&[b.clone(), c.clone(), a.clone()]).unwrap(),
            base
        );
        assert_eq!(
            mixed_volume_oracle(&[c.clone(), a.clone(), b.clone()]).unwrap(),
            base
        );
        for t in 1..=3i64 {
            let scaled = LatticePolytope::hull(
                3,
                &a.vertices()
                    .iter()
                    .map(|v| v.iter().map(|x| x * t).collect())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            assert_eq!(
                mixed_volume_oracle(&[scaled, b.clone(), c.clone()]).unwrap(),
                &base * int(t)
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn polytope2() -> impl Strategy<Value = LatticePolytope> {
            prop::collection::vec(prop::collection::vec(-3i64..4, 2), 1..6)
                .prop_map(|pts| LatticePolytope::hull(2, &pts).unwrap())
        }

        fn polytope3() -> impl Strategy<Value = LatticePolytope> {
            prop::collection::vec(prop::collection::vec(-2i64..3, 3), 1..6)
                .prop_map(|pts| LatticePolytope::hull(3, &pts).unwrap())
        }

        proptest! {
            #[test]
            fn minkowski_commutes_and_associates_2d(a in polytope2(), b in polytope2(), c in polytope2()) {
                prop_assert_eq!(minkowski_sum(&a, &b).unwrap(), minkowski_sum(&b, &a).unwrap());
                let left = minkowski_sum(&minkowski_sum(&a, &b).unwrap(), &c).unwrap();
                let right = minkowski_sum(&a, &minkowski_sum(&b, &c).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }

            #[test]
            fn minkowski_commutes_and_associates_3d(a in polytope3(), b in polytope3(), c in polytope3()) {
                prop_assert_eq!(minkowski_sum(&a, &b).unwrap(), minkowski_sum(&b, &a).unwrap());
                let left = minkowski_sum(&minkowski_sum(&a, &b).unwrap(), &c).unwrap();
                let right = minkowski_sum(&a, &minkowski_sum(&b, &c).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }

            #[test]
            fn hull_volume_is_translation_invariant(a in polytope3(), t in prop::collection::vec(-5i64..5, 3)) {
                let shifted = LatticePolytope::hull(
                    3,
                    &a.vertices().iter().map(|v| v.iter().zip(&t).map(|(x, y)| x + y).collect()).collect::<Vec<_>>(),
                ).unwrap();
                prop_assert_eq!(a.normalized_volume().unwrap(), shifted.normalized_volume().unwrap());
            }
        }
    }
}
