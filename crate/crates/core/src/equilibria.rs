//! Admissibility, dynamics verification and velocity-field sampling.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mpoly::Cx;
use crate::solver::SolutionSet;
use crate::vortex_system::{build_rational_residual, BackgroundFlow, VortexError, VortexProblem};

/// Minimum pairwise distance (normalized coordinates) for a solution to be
/// admissible.
pub const COLLISION_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("equilibrium is not admissible (coincident vortices)")]
    Inadmissible,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("field CSV line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Vortex(#[from] VortexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    /// Normalized coordinates.
    pub z: Vec<Cx>,
    /// `λ·z`.
    pub z_physical: Vec<Cx>,
    pub multiplicity: usize,
    /// Residual of the polynomial system (from the solver).
    pub poly_residual: f64,
    /// Max-norm of the rational residual; infinite when inadmissible.
    pub rational_residual: f64,
    /// Max-norm of the vortex dynamics right-hand side; infinite when
    /// inadmissible.
    pub dynamics_residual: f64,
    pub admissible: bool,
}

pub fn min_separation(z: &[Cx]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            best = best.min((z[i] - z[j]).norm());
        }
    }
    best
}

/// One [`Equilibrium`] per cluster, in cluster order. Inadmissible solutions
/// are kept and flagged.
pub fn filter_admissible(solutions: &SolutionSet, prob: &VortexProblem) -> Vec<Equilibrium> {
    solutions
        .clusters
        .iter()
        .map(|cl| {
            let z = cl.point.clone();
            let z_physical = prob.to_physical(&z);
            let admissible = min_separation(&z) > COLLISION_TOL;
            let (rational_residual, dynamics_residual) = if admissible {
                let rr = build_rational_residual(prob, &z)
                    .map(|r| max_norm(&r))
                    .unwrap_or(f64::INFINITY);
                let dr = dynamics_residual(prob, prob.background(), &z_physical)
                    .unwrap_or(f64::INFINITY);
                (rr, dr)
            } else {
                (f64::INFINITY, f64::INFINITY)
            };
            Equilibrium {
                z,
                z_physical,
                multiplicity: cl.multiplicity,
                poly_residual: cl.residual,
                rational_residual,
                dynamics_residual,
                admissible,
            }
        })
        .collect()
}

fn max_norm(v: &[Cx]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn two_pi_i() -> Cx {
    Cx::new(0.0, 2.0 * PI)
}

/// `max_j |dz_j/dt|` for the point-vortex dynamics in the background `w`,
/// evaluated at physical positions. Zero exactly at fixed equilibria.
pub fn dynamics_residual(
    prob: &VortexProblem,
    w: &BackgroundFlow,
    z_physical: &[Cx],
) -> Result<f64, VortexError> {
    let g = prob.circulations().values();
    if g.len() != z_physical.len() {
        return Err(VortexError::DimensionMismatch {
            expected: g.len(),
            got: z_physical.len(),
        });
    }
    if let Some((i, j)) = crate::vortex_system::find_collision(z_physical) {
        return Err(VortexError::Collision { i, j });
    }
    let mut worst = 0.0f64;
    for (j, &zj) in z_physical.iter().enumerate() {
        let s: Cx = z_physical
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(k, &zk)| g[k] / (zj.conj() - zk.conj()))
            .sum();
        let rate = -s / two_pi_i() + w.eval(zj).conj();
        worst = worst.max(rate.norm());
    }
    Ok(worst)
}

/// `(1/2πi) Σ_j Γ_j / (ζ - z_j)`.
pub fn vortex_velocity(gammas: &[f64], z: &[Cx], zeta: Cx) -> Cx {
    let s: Cx = gammas.iter().zip(z).map(|(&g, &zj)| g / (zeta - zj)).sum();
    s / two_pi_i()
}

/// Rectangular sampling grid, `resolution` points per axis, endpoints
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(
        x_range: (f64, f64),
        y_range: (f64, f64),
        resolution: usize,
    ) -> Result<Self, EquilibriumError> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(x_range) || !ok(y_range) {
            return Err(EquilibriumError::BadGrid(
                "ranges must be finite with min < max".into(),
            ));
        }
        if resolution < 2 {
            return Err(EquilibriumError::BadGrid(
                "resolution must be at least 2".into(),
            ));
        }
        Ok(GridSpec {
            x_range,
            y_range,
            resolution,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.resolution - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / (self.resolution - 1) as f64
    }

    /// Grid point in column `ix`, row `iy`.
    pub fn point(&self, ix: usize, iy: usize) -> Cx {
        Cx::new(
            self.x_range.0 + ix as f64 * self.dx(),
            self.y_range.0 + iy as f64 * self.dy(),
        )
    }

    /// Twice the cell diagonal.
    pub fn pole_radius(&self) -> f64 {
        2.0 * self.dx().hypot(self.dy())
    }
}

/// Parses `"xmin,xmax,ymin,ymax,res"`.
impl FromStr for GridSpec {
    type Err = EquilibriumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(EquilibriumError::BadGrid(format!(
                "expected xmin,xmax,ymin,ymax,res, got {s:?}"
            )));
        }
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| EquilibriumError::BadGrid(format!("not a number: {p:?}")))
        };
        let res = parts[4]
            .parse::<usize>()
            .map_err(|_| EquilibriumError::BadGrid(format!("bad resolution: {:?}", parts[4])))?;
        GridSpec::new(
            (num(parts[0])?, num(parts[1])?),
            (num(parts[2])?, num(parts[3])?),
            res,
        )
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.x_range.0, self.x_range.1, self.y_range.0, self.y_range.1, self.resolution
        )
    }
}

/// Complex velocity sampled row-major (`y` outer, `x` inner). Masked cells
/// hold zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub values: Vec<Cx>,
    pub pole_mask: Vec<bool>,
    pub pole_radius: f64,
}

impl FieldGrid {
    pub fn value(&self, ix: usize, iy: usize) -> Cx {
        self.values[iy * self.spec.resolution + ix]
    }

    pub fn masked(&self, ix: usize, iy: usize) -> bool {
        self.pole_mask[iy * self.spec.resolution + ix]
    }
}

/// Which terms of `V(ζ) = (1/2πi) Σ Γ_j/(ζ - z_j) + w(ζ)` to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPart {
    Full,
    VorticesOnly,
    BackgroundOnly,
}

/// Samples the complex velocity of an admissible equilibrium in physical
/// coordinates, with the physical background `w`.
pub fn velocity_field(
    prob: &VortexProblem,
    eq: &Equilibrium,
    spec: &GridSpec,
) -> Result<FieldGrid, EquilibriumError> {
    velocity_field_part(prob, eq, spec, FieldPart::Full)
}

/// As [`velocity_field`], restricted to one part. The full field is computed
/// as vortex part plus background part, so the three grids superpose
/// exactly.
pub fn velocity_field_part(
    prob: &VortexProblem,
    eq: &Equilibrium,
    spec: &GridSpec,
    part: FieldPart,
) -> Result<FieldGrid, EquilibriumError> {
    if !eq.admissible {
        return Err(EquilibriumError::Inadmissible);
    }
    let g = prob.circulations().values();
    let z = &eq.z_physical;
    let w = prob.background();
    let radius = spec.pole_radius();
    let res = spec.resolution;
    let rows: Vec<(Vec<Cx>, Vec<bool>)> = (0..res)
        .into_par_iter()
        .map(|iy| {
            let mut vals = Vec::with_capacity(res);
            let mut mask = Vec::with_capacity(res);
            for ix in 0..res {
                let zeta = spec.point(ix, iy);
                let masked = z.iter().any(|&zj| (zeta - zj).norm() <= radius);
                mask.push(masked);
                if masked {
                    vals.push(Cx::new(0.0, 0.0));
                    continue;
                }
                let vort = vortex_velocity(g, z, zeta);
                let back = w.eval(zeta);
                vals.push(match part {
                    FieldPart::Full => vort + back,
                    FieldPart::VorticesOnly => vort,
                    FieldPart::BackgroundOnly => back,
                });
            }
            (vals, mask)
        })
        .collect();
    let (values, pole_mask): (Vec<Vec<Cx>>, Vec<Vec<bool>>) = rows.into_iter().unzip();
    Ok(FieldGrid {
        spec: *spec,
        values: values.concat(),
        pole_mask: pole_mask.concat(),
        pole_radius: radius,
    })
}

pub const FIELD_CSV_HEADER: &str = "x,y,u,v,masked,re_v,im_v";

/// One parsed CSV row. `(u, v) = (Re V, -Im V)` is the plotted flow;
/// `(re_v, im_v)` is `V` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub masked: bool,
    pub re_v: f64,
    pub im_v: f64,
}

pub fn write_field_csv<W: Write>(grid: &FieldGrid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{FIELD_CSV_HEADER}")?;
    let res = grid.spec.resolution;
    for iy in 0..res {
        for ix in 0..res {
            let p = grid.spec.point(ix, iy);
            let val = grid.value(ix, iy);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                p.re,
                p.im,
                val.re,
                -val.im + 0.0,
                grid.masked(ix, iy) as u8,
                val.re,
                val.im
            )?;
        }
    }
    Ok(())
}

pub fn export_field(grid: &FieldGrid, path: &Path) -> Result<(), EquilibriumError> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_field_csv(grid, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_field_csv<R: BufRead>(input: R) -> Result<Vec<FieldRow>, EquilibriumError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != FIELD_CSV_HEADER {
                return Err(EquilibriumError::Parse {
                    line: lineno,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(EquilibriumError::Parse {
                line: lineno,
                msg: format!("expected 7 columns, got {}", cols.len()),
            });
        }
        let num = |k: usize| {
            cols[k].parse::<f64>().map_err(|e| EquilibriumError::Parse {
                line: lineno,
                msg: format!("column {}: {e}", k + 1),
            })
        };
        let masked = match cols[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(EquilibriumError::Parse {
                    line: lineno,
                    msg: format!("masked must be 0 or 1, got {other:?}"),
                })
            }
        };
        rows.push(FieldRow {
            x: num(0)?,
            y: num(1)?,
            u: num(2)?,
            v: num(3)?,
            masked,
            re_v: num(5)?,
            im_v: num(6)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, Cluster, HomotopyConfig};
    use crate::vortex_system::{build_poly_system, Circulations};

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn problem(g: &[(i64, i64)], m: usize, w: Vec<Cx>) -> VortexProblem {
        VortexProblem::pre_normalized(Circulations::from_fractions(g).unwrap(), m, w).unwrap()
    }

    fn single(z: Vec<Cx>) -> SolutionSet {
        SolutionSet {
            clusters: vec![Cluster {
                point: z,
                multiplicity: 1,
                residual: 0.0,
                path_ids: vec![0],
            }],
            divergent_path_count: 0,
            total_paths: 1,
        }
    }

    fn equal_pair_quadratic() -> VortexProblem {
        problem(&[(1, 1), (1, 1)], 2, vec![c(1.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn two_vortex_solutions_are_admissible() {
        let prob = problem(&[(1, 1), (1, 1)], 1, vec![c(0.5, -0.25)]);
        let set = solve(
            &build_poly_system(&prob).unwrap(),
            &HomotopyConfig::default(),
            3,
        )
        .unwrap();
        let eqs = filter_admissible(&set, &prob);
        assert_eq!(eqs.len(), 2);
        for e in &eqs {
            assert!(e.admissible);
            assert!(e.rational_residual < 1e-8 && e.poly_residual < 1e-8);
            assert!(e.dynamics_residual < 1e-8);
        }
    }

    #[test]
    fn equal_pair_quadratic_all_admissible() {
        let prob = equal_pair_quadratic();
        let set = solve(
            &build_poly_system(&prob).unwrap(),
            &HomotopyConfig::default(),
            1,
        )
        .unwrap();
        let eqs = filter_admissible(&set, &prob);
        assert_eq!(eqs.iter().filter(|e| e.admissible).count(), 6);
        assert!(eqs.iter().all(|e| e.dynamics_residual < 1e-8));
    }

    #[test]
    fn coincident_vortices_are_flagged() {
        let prob = problem(&[(1, 1), (1, 1)], 1, vec![]);
        let eqs = filter_admissible(&single(vec![c(0.3, 0.1), c(0.3, 0.1)]), &prob);
        assert!(!eqs[0].admissible);
        assert!(eqs[0].rational_residual.is_infinite());
        let grid = GridSpec::new((-1.0, 1.0), (-1.0, 1.0), 3).unwrap();
        assert!(matches!(
            velocity_field(&prob, &eqs[0], &grid),
            Err(EquilibriumError::Inadmissible)
        ));
    }

    #[test]
    fn dynamics_vanish_at_closed_form() {
        // Γ=(1,2), W≡0: z = (∓2/√3, ±1/√3)
        let prob = problem(&[(1, 1), (2, 1)], 1, vec![]);
        let s = 1.0 / 3f64.sqrt();
        for sign in [1.0, -1.0] {
            let z = [c(-2.0 * s * sign, 0.0), c(s * sign, 0.0)];
            let r = dynamics_residual(&prob, prob.background(), &prob.to_physical(&z)).unwrap();
            assert!(r < 1e-10, "{r}");
        }
        let r = dynamics_residual(&prob, prob.background(), &[c(0.3, 0.2), c(-0.1, 0.9)]).unwrap();
        assert!(r > 0.01);
        assert!(dynamics_residual(&prob, prob.background(), &[c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn printed_root_nearly_fixed() {
        let prob = equal_pair_quadratic();
        let z = [c(-0.250, 1.349), c(0.487, 0.693)];
        let r = dynamics_residual(&prob, prob.background(), &z).unwrap();
        assert!(r < 5e-3, "{r}");
    }

    #[test]
    fn scaled_problem_dynamics() {
        // w = -(8ζ^2 + ...)/(2πi) normalizes with λ ≠ 1; physical positions
        // must still be fixed points
        let w = BackgroundFlow::new(vec![c(0.3, 0.1), c(-0.2, 0.4), c(1.5, -0.5)]).unwrap();
        let prob =
            VortexProblem::normalize(Circulations::from_fractions(&[(1, 1), (3, 1)]).unwrap(), w)
                .unwrap();
        assert!((prob.scale() - 1.0).norm() > 0.1);
        let set = solve(
            &build_poly_system(&prob).unwrap(),
            &HomotopyConfig::default(),
            8,
        )
        .unwrap();
        let eqs = filter_admissible(&set, &prob);
        assert_eq!(eqs.len(), 6);
        for e in eqs.iter().filter(|e| e.admissible) {
            assert!(e.dynamics_residual < 1e-8, "{}", e.dynamics_residual);
        }
    }

    #[test]
    fn single_pole_value() {
        let v = vortex_velocity(&[1.0], &[c(0.0, 0.0)], c(1.0, 0.0));
        assert!((v - 1.0 / two_pi_i()).norm() < 1e-16);
    }

    #[test]
    fn grid_spec_parsing() {
        let g: GridSpec = "-2,2,-1.5,1.5,41".parse().unwrap();
        assert_eq!(g.resolution, 41);
        assert_eq!(g.point(40, 40), c(2.0, 1.5));
        assert_eq!(g.to_string(), "-2,2,-1.5,1.5,41");
        assert!("1,0,0,1,5".parse::<GridSpec>().is_err());
        assert!("0,1,0,1,1".parse::<GridSpec>().is_err());
        assert!("0,1,0,1".parse::<GridSpec>().is_err());
    }

    fn root_c() -> (VortexProblem, Equilibrium) {
        let prob = equal_pair_quadratic();
        let set = solve(
            &build_poly_system(&prob).unwrap(),
            &HomotopyConfig::default(),
            1,
        )
        .unwrap();
        let eq = filter_admissible(&set, &prob)
            .into_iter()
            .find(|e| (e.z[0] - e.z[1].conj()).norm() < 1e-9 && e.z[0].im > 0.0)
            .unwrap();
        (prob, eq)
    }

    #[test]
    fn conjugate_pair_field_is_mirror_symmetric() {
        // vortices at z and conj(z) with real w: V(conj ζ) = -conj V(ζ)
        let (prob, eq) = root_c();
        let spec = GridSpec::new((-2.0, 2.0), (-2.0, 2.0), 41).unwrap();
        let grid = velocity_field(&prob, &eq, &spec).unwrap();
        for iy in 0..41 {
            for ix in 0..41 {
                let a = grid.value(ix, iy);
                let b = grid.value(ix, 40 - iy);
                assert_eq!(grid.masked(ix, iy), grid.masked(ix, 40 - iy));
                assert!((a + b.conj()).norm() < 1e-9 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn field_superposition() {
        let (prob, eq) = root_c();
        let spec = GridSpec::new((-2.0, 2.0), (-2.0, 2.0), 21).unwrap();
        let full = velocity_field(&prob, &eq, &spec).unwrap();
        let vort = velocity_field_part(&prob, &eq, &spec, FieldPart::VorticesOnly).unwrap();
        let back = velocity_field_part(&prob, &eq, &spec, FieldPart::BackgroundOnly).unwrap();
        for i in 0..full.values.len() {
            assert_eq!(full.values[i], vort.values[i] + back.values[i]);
            assert!(
                (full.values[i] - vort.values[i] - back.values[i]).norm()
                    <= 1e-12 * (1.0 + full.values[i].norm())
            );
        }
    }

    #[test]
    fn pole_mask_matches_distances() {
        let (prob, eq) = root_c();
        let spec = GridSpec::new((-2.0, 2.0), (-2.0, 2.0), 41).unwrap();
        let grid = velocity_field(&prob, &eq, &spec).unwrap();
        assert!(grid.pole_mask.iter().any(|&m| m));
        for iy in 0..41 {
            for ix in 0..41 {
                let p = spec.point(ix, iy);
                let near = eq
                    .z_physical
                    .iter()
                    .any(|&z| (p - z).norm() <= grid.pole_radius);
                assert_eq!(grid.masked(ix, iy), near);
                if near {
                    assert_eq!(grid.value(ix, iy), c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let prob = problem(&[(1, 1)], 1, vec![]);
        let eq = filter_admissible(&single(vec![c(0.0, 0.0)]), &prob).remove(0);
        let spec = GridSpec::new((0.0, 1.0), (0.0, 1.0), 2).unwrap();
        let grid = velocity_field(&prob, &eq, &spec).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap(), FIELD_CSV_HEADER);
        let rows = parse_field_csv(&buf[..]).unwrap();
        assert!(rows[0].masked && rows[0].u == 0.0 && rows[0].v == 0.0);
        for (k, r) in rows.iter().enumerate() {
            let (ix, iy) = (k % 2, k / 2);
            let v = grid.value(ix, iy);
            assert_eq!((r.x, r.y), (spec.point(ix, iy).re, spec.point(ix, iy).im));
            assert_eq!((r.re_v, r.im_v), (v.re, v.im));
            assert_eq!((r.u, r.v), (v.re, -v.im));
            assert_eq!(r.masked, grid.masked(ix, iy));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        export_field(&grid, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), buf);
        assert!(parse_field_csv("x,y\n".as_bytes()).is_err());
    }
}
