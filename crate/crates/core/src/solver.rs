//! Total-degree homotopy continuation with multiplicity clustering.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Dyn, SVD};
use petgraph::unionfind::UnionFind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mpoly::{Cx, MPoly, MPolyError, PolySystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("system must be square: {equations} equations in {vars} variables")]
    NotSquare { equations: usize, vars: usize },
    #[error("start degrees must be positive")]
    ZeroDegree,
    #[error("start root does not solve the start system (residual {residual:e})")]
    BadStartRoot { residual: f64 },
    #[error("invalid homotopy configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Poly(#[from] MPolyError),
}

/// Coordinates beyond this norm mark a path as diverging to infinity.
pub const DIVERGENCE_NORM: f64 = 1e8;
/// The endgame Newton run is attempted only for paths stalled this close to t = 1.
const ENDGAME_WINDOW: f64 = 1e-3;
/// Largest relative jump the endgame may make from the last tracked point.
const ENDGAME_MAX_JUMP: f64 = 0.05;
const CORRECTOR_ITERS: usize = 4;
const POLISH_ITERS: usize = 80;
/// Singular values separated by more than this factor split the numerical rank.
const RANK_GAP: f64 = 1e3;
const MAX_DEFLATIONS: usize = 3;
const SVD_MAX_SWEEPS: usize = 1000;
const DEFLATION_SEED: u64 = 0xdef1_a7e5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyConfig {
    pub step_init: f64,
    pub step_min: f64,
    pub newton_tol: f64,
    pub endpoint_tol: f64,
    pub cluster_radius: f64,
    pub max_steps: usize,
    /// `None` draws a unit-modulus constant from the solve seed.
    pub gamma_twist: Option<Cx>,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig {
            step_init: 0.05,
            step_min: 1e-7,
            newton_tol: 1e-12,
            endpoint_tol: 1e-9,
            cluster_radius: 1e-5,
            max_steps: 10_000,
            gamma_twist: None,
        }
    }
}

impl HomotopyConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(0.0 < self.step_min && self.step_min <= self.step_init && self.step_init < 1.0) {
            return Err(SolverError::BadConfig("need 0 < step_min <= step_init < 1"));
        }
        if !(self.newton_tol > 0.0 && self.endpoint_tol > 0.0 && self.cluster_radius > 0.0) {
            return Err(SolverError::BadConfig("tolerances must be positive"));
        }
        if let Some(g) = self.gamma_twist {
            if !(g.norm() > 0.0 && g.norm().is_finite()) {
                return Err(SolverError::BadConfig(
                    "gamma_twist must be finite and nonzero",
                ));
            }
        }
        Ok(())
    }

    fn gamma(&self) -> Cx {
        self.gamma_twist.unwrap_or(FALLBACK_GAMMA)
    }
}

/// Used by `track_path` when no twist was drawn.
const FALLBACK_GAMMA: Cx = Cx {
    re: 0.605_186_405_736_040_3,
    im: 0.796_083_798_549_055_4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathOutcome {
    Converged,
    /// Norm exceeded [`DIVERGENCE_NORM`].
    Infinity,
    /// Step size fell below `step_min` without a usable endgame.
    StepUnderflow,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackedPath {
    pub path_id: usize,
    pub start_root: Vec<Cx>,
    /// `None` for divergent paths.
    pub endpoint: Option<Vec<Cx>>,
    pub outcome: PathOutcome,
    pub steps_taken: usize,
    /// Final `t` reached by the tracker.
    pub t_reached: f64,
    pub final_residual: f64,
}

impl TrackedPath {
    pub fn is_converged(&self) -> bool {
        self.outcome == PathOutcome::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub point: Vec<Cx>,
    pub multiplicity: usize,
    pub residual: f64,
    pub path_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub clusters: Vec<Cluster>,
    pub divergent_path_count: usize,
    pub total_paths: usize,
}

impl SolutionSet {
    pub fn total_multiplicity(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }
}

/// `g_k = z_k^{d_k} - c_k`, with unit-modulus `c_k` drawn from the seed.
pub fn start_system(degrees: &[u32], seed: u64) -> Result<(PolySystem, Vec<Vec<Cx>>), SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<Cx> = degrees
        .iter()
        .map(|_| Cx::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    start_system_with(degrees, &c)
}

/// Start system with given constants. Roots are listed lexicographically in
/// the root index of each coordinate, first coordinate slowest.
pub fn start_system_with(
    degrees: &[u32],
    c: &[Cx],
) -> Result<(PolySystem, Vec<Vec<Cx>>), SolverError> {
    if degrees.is_empty() || degrees.contains(&0) {
        return Err(SolverError::ZeroDegree);
    }
    let n = degrees.len();
    let polys: Vec<MPoly> = degrees
        .iter()
        .zip(c)
        .enumerate()
        .map(|(k, (&d, &ck))| {
            let mut p = MPoly::power(n, k, d, Cx::new(1.0, 0.0));
            p.add_term(crate::mpoly::Monomial::one(n), -ck);
            p
        })
        .collect();
    let per_coord: Vec<Vec<Cx>> = degrees
        .iter()
        .zip(c)
        .map(|(&d, &ck)| {
            let base = ck.powf(1.0 / d as f64);
            (0..d)
                .map(|j| base * Cx::from_polar(1.0, 2.0 * PI * j as f64 / d as f64))
                .collect()
        })
        .collect();
    let mut roots: Vec<Vec<Cx>> = vec![Vec::new()];
    for coord in &per_coord {
        roots = roots
            .into_iter()
            .flat_map(|r| {
                coord.iter().map(move |&x| {
                    let mut r = r.clone();
                    r.push(x);
                    r
                })
            })
            .collect();
    }
    Ok((PolySystem::new(polys)?, roots))
}

fn norm(v: &[Cx]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dist(a: &[Cx], b: &[Cx]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn finite(v: &[Cx]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

/// A polynomial system with its symbolic Jacobian.
struct Differentiated<'a> {
    sys: &'a PolySystem,
    jac: Vec<Vec<MPoly>>,
}

impl<'a> Differentiated<'a> {
    fn new(sys: &'a PolySystem) -> Self {
        let n = sys.n_vars();
        let jac = sys
            .polys
            .iter()
            .map(|p| (0..n).map(|j| p.derivative(j)).collect())
            .collect();
        Differentiated { sys, jac }
    }

    fn eval(&self, z: &[Cx]) -> Vec<Cx> {
        self.sys.polys.iter().map(|p| p.eval_unchecked(z)).collect()
    }

    fn jacobian(&self, z: &[Cx]) -> DMatrix<Cx> {
        let n = z.len();
        DMatrix::from_fn(self.jac.len(), n, |i, j| self.jac[i][j].eval_unchecked(z))
    }

    fn residual(&self, z: &[Cx]) -> f64 {
        norm(&self.eval(z))
    }
}

fn newton_step(jac: DMatrix<Cx>, rhs: Vec<Cx>) -> Option<Vec<Cx>> {
    let step = jac.lu().solve(&DVector::from_vec(rhs))?;
    let step: Vec<Cx> = step.iter().copied().collect();
    finite(&step).then_some(step)
}

/// Safeguarded Newton on a target: a step is kept only if it lowers the
/// residual and is not longer than twice the previous step.
fn polish(f: &Differentiated, z: &[Cx], newton_tol: f64) -> (Vec<Cx>, f64) {
    let mut z = z.to_vec();
    let mut res = f.residual(&z);
    let mut last = f64::INFINITY;
    for _ in 0..POLISH_ITERS {
        if res == 0.0 {
            break;
        }
        let Some(step) = newton_step(f.jacobian(&z), f.eval(&z)) else {
            break;
        };
        let size = norm(&step);
        if size > 2.0 * last {
            break;
        }
        let cand: Vec<Cx> = z.iter().zip(&step).map(|(a, b)| a - b).collect();
        let cand_res = f.residual(&cand);
        if cand_res.is_nan() || cand_res >= res {
            break;
        }
        z = cand;
        res = cand_res;
        last = size;
        if size <= newton_tol * 1e-3 * (1.0 + norm(&z)) {
            break;
        }
    }
    (z, res)
}

struct Homotopy<'a> {
    f: Differentiated<'a>,
    g: Differentiated<'a>,
    gamma: Cx,
}

impl Homotopy<'_> {
    fn h(&self, z: &[Cx], t: f64) -> Vec<Cx> {
        let s = self.gamma * (1.0 - t);
        self.g
            .eval(z)
            .into_iter()
            .zip(self.f.eval(z))
            .map(|(g, f)| s * g + t * f)
            .collect()
    }

    fn hz(&self, z: &[Cx], t: f64) -> DMatrix<Cx> {
        self.g.jacobian(z) * (self.gamma * (1.0 - t)) + self.f.jacobian(z) * Cx::from(t)
    }

    /// `dz/dt = -H_z^{-1} H_t` with `H_t = f - γ g`.
    fn tangent(&self, z: &[Cx], t: f64) -> Option<Vec<Cx>> {
        let ht: Vec<Cx> = self
            .f
            .eval(z)
            .into_iter()
            .zip(self.g.eval(z))
            .map(|(f, g)| -(f - self.gamma * g))
            .collect();
        newton_step(self.hz(z, t), ht)
    }

    fn correct(&self, z0: &[Cx], t: f64, tol: f64) -> Option<Vec<Cx>> {
        let mut z = z0.to_vec();
        let mut prev = f64::INFINITY;
        for it in 0..CORRECTOR_ITERS {
            let step = newton_step(self.hz(&z, t), self.h(&z, t))?;
            let size = norm(&step);
            for (a, b) in z.iter_mut().zip(&step) {
                *a -= b;
            }
            if size <= tol * (1.0 + norm(&z)) {
                return Some(z);
            }
            if it > 0 && size > 0.5 * prev {
                return None;
            }
            prev = size;
        }
        None
    }
}

/// Tracks one path of `H(z,t) = (1-t)·γ·g(z) + t·f(z)` from a start root at
/// `t = 0` to `t = 1` (Euler predictor, Newton corrector, step halving and
/// doubling). Paths stalling just short of `t = 1` get a Newton endgame on
/// the target.
pub fn track_path(
    target: &PolySystem,
    start: &PolySystem,
    root: &[Cx],
    cfg: &HomotopyConfig,
) -> Result<TrackedPath, SolverError> {
    cfg.validate()?;
    check_square(target)?;
    check_square(start)?;
    if start.n_vars() != target.n_vars() || root.len() != target.n_vars() {
        return Err(MPolyError::PointLength {
            expected: target.n_vars(),
            got: root.len(),
        }
        .into());
    }
    let hom = Homotopy {
        f: Differentiated::new(target),
        g: Differentiated::new(start),
        gamma: cfg.gamma(),
    };
    let start_res = hom.g.residual(root);
    if start_res.is_nan() || start_res > cfg.newton_tol * 1e3 * (1.0 + norm(root)) {
        return Err(SolverError::BadStartRoot {
            residual: start_res,
        });
    }
    Ok(run_path(&hom, 0, root, cfg))
}

fn check_square(sys: &PolySystem) -> Result<(), SolverError> {
    if sys.len() != sys.n_vars() {
        return Err(SolverError::NotSquare {
            equations: sys.len(),
            vars: sys.n_vars(),
        });
    }
    Ok(())
}

fn corrector_tol(cfg: &HomotopyConfig) -> f64 {
    cfg.newton_tol.sqrt() * 1e-3
}

fn run_path(hom: &Homotopy, path_id: usize, root: &[Cx], cfg: &HomotopyConfig) -> TrackedPath {
    let mut z = root.to_vec();
    let mut t = 0.0f64;
    let mut dt = cfg.step_init;
    let mut streak = 0usize;
    let mut steps = 0usize;
    let tol = corrector_tol(cfg);
    let done = |z: Vec<Cx>, outcome: PathOutcome, steps: usize, t: f64, res: f64| TrackedPath {
        path_id,
        start_root: root.to_vec(),
        endpoint: (outcome == PathOutcome::Converged).then_some(z),
        outcome,
        steps_taken: steps,
        t_reached: t,
        final_residual: res,
    };

    while t < 1.0 {
        if steps >= cfg.max_steps {
            return done(z, PathOutcome::MaxSteps, steps, t, f64::INFINITY);
        }
        steps += 1;
        let h = dt.min(1.0 - t);
        let t_next = if h >= 1.0 - t { 1.0 } else { t + h };
        let corrected = hom.tangent(&z, t).and_then(|dz| {
            let pred: Vec<Cx> = z.iter().zip(&dz).map(|(a, d)| a + d * h).collect();
            hom.correct(&pred, t_next, tol)
        });
        match corrected {
            Some(znew) if finite(&znew) => {
                z = znew;
                t = t_next;
                if norm(&z) > DIVERGENCE_NORM {
                    return done(z, PathOutcome::Infinity, steps, t, f64::INFINITY);
                }
                streak += 1;
                if streak >= 3 {
                    dt = (dt * 2.0).min(cfg.step_init);
                    streak = 0;
                }
            }
            _ => {
                streak = 0;
                dt *= 0.5;
                if dt < cfg.step_min {
                    return endgame(hom, z, t, steps, cfg, done);
                }
            }
        }
    }
    let (zp, res) = polish(&hom.f, &z, cfg.newton_tol);
    if res < cfg.endpoint_tol {
        done(zp, PathOutcome::Converged, steps, t, res)
    } else {
        endgame(hom, z, t, steps, cfg, done)
    }
}

fn endgame<F>(
    hom: &Homotopy,
    z: Vec<Cx>,
    t: f64,
    steps: usize,
    cfg: &HomotopyConfig,
    done: F,
) -> TrackedPath
where
    F: Fn(Vec<Cx>, PathOutcome, usize, f64, f64) -> TrackedPath,
{
    if 1.0 - t > ENDGAME_WINDOW {
        return done(z, PathOutcome::StepUnderflow, steps, t, f64::INFINITY);
    }
    let limit = ENDGAME_MAX_JUMP * (1.0 + norm(&z));
    let (zp, res) = polish(&hom.f, &z, cfg.newton_tol);
    if res < cfg.endpoint_tol && dist(&zp, &z) <= limit {
        return done(zp, PathOutcome::Converged, steps, t, res);
    }
    if let Some(zs) = refine_singular(&hom.f, &z) {
        let res = hom.f.residual(&zs);
        if res < cfg.endpoint_tol && dist(&zs, &z) <= limit {
            return done(zs, PathOutcome::Converged, steps, t, res);
        }
    }
    let outcome = if norm(&z) > DIVERGENCE_NORM {
        PathOutcome::Infinity
    } else {
        PathOutcome::StepUnderflow
    };
    done(z, outcome, steps, t, res)
}

/// SVD that gives up on non-finite input or after a bounded number of
/// sweeps (the unbounded variant can spin forever on overflowed entries).
pub(crate) fn try_svd(m: DMatrix<Cx>, u: bool, v: bool) -> Option<SVD<Cx, Dyn, Dyn>> {
    if !m.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return None;
    }
    SVD::try_new(m, u, v, f64::EPSILON, SVD_MAX_SWEEPS)
}

fn singular_values(jac: DMatrix<Cx>) -> Vec<f64> {
    let Some(svd) = try_svd(jac, false, false) else {
        return Vec::new();
    };
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values before the first gap wider than [`RANK_GAP`].
fn gap_rank(sv: &[f64]) -> usize {
    if sv.first().is_none_or(|&s| s == 0.0) {
        return 0;
    }
    (1..sv.len())
        .find(|&i| sv[i] * RANK_GAP < sv[i - 1])
        .unwrap_or(sv.len())
}

fn least_squares(jac: DMatrix<Cx>, rhs: Vec<Cx>) -> Option<Vec<Cx>> {
    let svd = try_svd(jac, true, true)?;
    let eps = svd.singular_values.max() * 1e-14;
    let step = svd.solve(&DVector::from_vec(rhs), eps).ok()?;
    let step: Vec<Cx> = step.iter().copied().collect();
    finite(&step).then_some(step)
}

/// Gauss–Newton on a possibly overdetermined system; returns the iterate
/// with the smallest residual.
fn gauss_newton(d: &Differentiated, x: Vec<Cx>, iters: usize) -> Vec<Cx> {
    let mut best_res = d.residual(&x);
    let mut best = x.clone();
    let mut x = x;
    let mut stale = 0;
    for _ in 0..iters {
        let Some(step) = least_squares(d.jacobian(&x), d.eval(&x)) else {
            break;
        };
        for (a, b) in x.iter_mut().zip(&step) {
            *a -= b;
        }
        let res = d.residual(&x);
        if res < best_res {
            best_res = res;
            best = x.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= 6 || norm(&step) <= 1e-16 * (1.0 + norm(&x)) {
            break;
        }
    }
    best
}

/// Augments `F(x) = 0` with `J(x)·B·λ = 0`, `h·λ = 1` for random `B`, `h`
/// (`λ` has `rank + 1` entries), which lowers the multiplicity of an
/// isolated singular root. Returns the new system and an initial `λ`.
fn deflate(
    polys: &[MPoly],
    x: &[Cx],
    rank: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<MPoly>, Vec<Cx>)> {
    let m = x.len();
    let k = rank + 1;
    let nv = m + k;
    let mut draw = || Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let b: Vec<Vec<Cx>> = (0..m).map(|_| (0..k).map(|_| draw()).collect()).collect();
    let h: Vec<Cx> = (0..k).map(|_| draw()).collect();

    let combos: Vec<MPoly> = b
        .iter()
        .map(|row| {
            let mut p = MPoly::zero(nv);
            for (i, &bij) in row.iter().enumerate() {
                p.add_term(crate::mpoly::Monomial::power(nv, m + i, 1), bij);
            }
            p
        })
        .collect();
    let mut out: Vec<MPoly> = polys
        .iter()
        .map(|p| p.with_vars(nv))
        .collect::<Result<_, _>>()
        .ok()?;
    for p in polys {
        let mut row = MPoly::zero(nv);
        for (j, combo) in combos.iter().enumerate() {
            row = &row + &(&p.derivative(j).with_vars(nv).ok()? * combo);
        }
        out.push(row);
    }
    let mut norm_row = MPoly::constant(nv, Cx::new(-1.0, 0.0));
    for (i, &hi) in h.iter().enumerate() {
        norm_row.add_term(crate::mpoly::Monomial::power(nv, m + i, 1), hi);
    }
    out.push(norm_row);

    let sys = PolySystem::new(polys.to_vec()).ok()?;
    let jx = Differentiated::new(&sys).jacobian(x);
    let bm = DMatrix::from_fn(m, k, |i, j| b[i][j]);
    let jb = jx * bm;
    let rows = jb.nrows();
    let a = DMatrix::from_fn(rows + 1, k, |i, j| if i < rows { jb[(i, j)] } else { h[j] });
    let mut rhs = vec![Cx::new(0.0, 0.0); rows + 1];
    rhs[rows] = Cx::new(1.0, 0.0);
    let lambda = least_squares(a, rhs)?;
    Some((out, lambda))
}

/// Refines an approximation of an isolated singular root by repeated
/// deflation, until the augmented system is numerically regular.
fn refine_singular(f: &Differentiated, z0: &[Cx]) -> Option<Vec<Cx>> {
    let n = z0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFLATION_SEED);
    let mut polys = f.sys.polys.clone();
    let mut x = z0.to_vec();
    for round in 0..=MAX_DEFLATIONS {
        let sys = PolySystem::new(polys.clone()).ok()?;
        let d = Differentiated::new(&sys);
        if round > 0 {
            x = gauss_newton(&d, x, 20);
        }
        let rank = gap_rank(&singular_values(d.jacobian(&x)));
        if rank == x.len() || round == MAX_DEFLATIONS {
            x = gauss_newton(&d, x, 100);
            break;
        }
        let (next, lambda) = deflate(&polys, &x, rank, &mut rng)?;
        polys = next;
        x.extend(lambda);
    }
    x.truncate(n);
    finite(&x).then_some(x)
}

/// Merges converged endpoints closer than `cluster_radius` (single linkage).
/// Each cluster point is the residual-weighted centroid of its endpoints,
/// re-polished on the target with safeguarded Newton.
pub fn cluster_endpoints(
    target: &PolySystem,
    paths: &[TrackedPath],
    cfg: &HomotopyConfig,
) -> SolutionSet {
    let mut sorted: Vec<&TrackedPath> = paths.iter().collect();
    sorted.sort_by_key(|p| p.path_id);
    let conv: Vec<(&TrackedPath, &Vec<Cx>)> = sorted
        .iter()
        .filter_map(|p| {
            p.endpoint
                .as_ref()
                .filter(|_| p.is_converged())
                .map(|e| (*p, e))
        })
        .collect();
    let divergent_path_count = paths.len() - conv.len();
    let mut uf = UnionFind::<usize>::new(conv.len());
    for i in 0..conv.len() {
        for j in i + 1..conv.len() {
            if dist(conv[i].1, conv[j].1) <= cfg.cluster_radius {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = std::collections::HashMap::new();
    for i in 0..conv.len() {
        let r = uf.find(i);
        let g = *group_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let f = if target.is_empty() {
        None
    } else {
        Some(Differentiated::new(target))
    };
    let floor = cfg.endpoint_tol * 1e-3;
    let clusters = groups
        .into_iter()
        .map(|members| {
            let n = conv[members[0]].1.len();
            let mut centroid = vec![Cx::new(0.0, 0.0); n];
            let mut wsum = 0.0;
            for &i in &members {
                let w = 1.0 / conv[i].0.final_residual.max(floor);
                wsum += w;
                for (c, x) in centroid.iter_mut().zip(conv[i].1) {
                    *c += x * w;
                }
            }
            for c in &mut centroid {
                *c /= wsum;
            }
            let (point, residual) = match &f {
                Some(f) => polish(f, &centroid, cfg.newton_tol),
                None => (centroid, 0.0),
            };
            Cluster {
                point,
                multiplicity: members.len(),
                residual,
                path_ids: members.iter().map(|&i| conv[i].0.path_id).collect(),
            }
        })
        .collect();
    SolutionSet {
        clusters,
        divergent_path_count,
        total_paths: paths.len(),
    }
}

/// Tracks every path of the total-degree homotopy (in parallel) and returns
/// the paths in start-root order.
pub fn track_all(
    system: &PolySystem,
    cfg: &HomotopyConfig,
    seed: u64,
) -> Result<Vec<TrackedPath>, SolverError> {
    cfg.validate()?;
    check_square(system)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_seed: u64 = rng.gen();
    let gamma = cfg
        .gamma_twist
        .unwrap_or_else(|| Cx::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)));
    let cfg = HomotopyConfig {
        gamma_twist: Some(gamma),
        ..cfg.clone()
    };
    let (start, roots) = start_system(&system.degrees, start_seed)?;
    let hom = Homotopy {
        f: Differentiated::new(system),
        g: Differentiated::new(&start),
        gamma,
    };
    Ok(roots
        .par_iter()
        .enumerate()
        .map(|(i, r)| run_path(&hom, i, r, &cfg))
        .collect())
}

/// Start system, all paths, clustering. Deterministic in `seed`.
pub fn solve(
    system: &PolySystem,
    cfg: &HomotopyConfig,
    seed: u64,
) -> Result<SolutionSet, SolverError> {
    let paths = track_all(system, cfg, seed)?;
    Ok(cluster_endpoints(system, &paths, cfg))
}

#[derive(Serialize)]
struct DiagnosticLine<'a> {
    path_id: usize,
    steps: usize,
    outcome: PathOutcome,
    endpoint: Option<&'a Vec<Cx>>,
}

/// One JSON object per line: `{path_id, steps, outcome, endpoint}`.
pub fn write_diagnostics<W: Write>(paths: &[TrackedPath], mut out: W) -> std::io::Result<()> {
    for p in paths {
        let line = DiagnosticLine {
            path_id: p.path_id,
            steps: p.steps_taken,
            outcome: p.outcome,
            endpoint: p.endpoint.as_ref(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
