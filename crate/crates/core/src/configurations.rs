//! Species partitions and classification of equilibria into fixed
//! equilibrium configurations.
//!
//! Two admissible solutions `z`, `z'` are equivalent when some `a ≠ 0`, `b`
//! satisfy `a·V_{z'}(aζ + b) = V_z(ζ)`. Matching the polynomial parts pins
//! `(a, b)` to a finite set computed by [`candidate_maps`]; matching the
//! poles then reduces to comparing the multisets `{(z'_j - b)/a}` and
//! `{z_j}` with equal circulations.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use num_bigint::BigUint;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::equilibria::Equilibrium;
use crate::mpoly::Cx;
use crate::vortex_system::{decimal, factorial, falling_product, Circulations, VortexProblem};

/// Tolerance on matched pole positions (normalized coordinates).
pub const EQUIVALENCE_TOL: f64 = 1e-6;
/// Tolerance of the coefficient identity `a·w(aζ+b) = w(ζ)`.
pub const MAP_IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesBlock {
    pub value: f64,
    /// Exact value as `p/q` when the circulations are rational.
    pub exact: Option<String>,
    /// 0-based vortex indices.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesPartition {
    pub blocks: Vec<SpeciesBlock>,
}

impl SpeciesPartition {
    pub fn species_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }
}

/// Groups equal circulations (exactly for rational input), blocks ordered
/// by first index.
pub fn species_partition(gammas: &Circulations) -> SpeciesPartition {
    let mut blocks: Vec<SpeciesBlock> = Vec::new();
    for j in 0..gammas.len() {
        match blocks
            .iter_mut()
            .find(|b| gammas.same_value(b.indices[0], j))
        {
            Some(b) => b.indices.push(j),
            None => blocks.push(SpeciesBlock {
                value: gammas.values()[j],
                exact: gammas.exact().map(|e| e[j].to_string()),
                indices: vec![j],
            }),
        }
    }
    SpeciesPartition { blocks }
}

/// `(m+n-1)! / ((m-1)!·n_1!···n_k!)`.
pub fn config_bound(m: usize, n: usize, partition: &SpeciesPartition) -> BigUint {
    let top = falling_product(m as u64, (m + n - 1) as u64);
    let below = partition
        .sizes()
        .iter()
        .fold(BigUint::from(1u32), |acc, &s| acc * factorial(s as u64));
    top / below
}

/// `ζ ↦ aζ + b`, read as the witness of `a·V_{z'}(aζ + b) = V_z(ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineMap {
    pub a: Cx,
    pub b: Cx,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        a: Cx { re: 1.0, im: 0.0 },
        b: Cx { re: 0.0, im: 0.0 },
    };

    pub fn apply(&self, zeta: Cx) -> Cx {
        self.a * zeta + self.b
    }

    /// Witness for `z' → z` given the witness for `z → z'`.
    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            a: 1.0 / self.a,
            b: -self.b / self.a,
        }
    }

    /// Given `self` for `z → z'` and `next` for `z' → z''`, the witness for
    /// `z → z''`.
    pub fn then(&self, next: &AffineMap) -> AffineMap {
        AffineMap {
            a: self.a * next.a,
            b: next.a * self.b + next.b,
        }
    }

    pub fn approx_eq(&self, other: &AffineMap, tol: f64) -> bool {
        (self.a - other.a).norm() <= tol && (self.b - other.b).norm() <= tol
    }
}

/// Coefficients (low-to-high) of `a·p(aζ + b)`.
fn compose_poly(p: &[Cx], map: &AffineMap) -> Vec<Cx> {
    // Horner in the polynomial ring: q ← q·(aζ + b) + p_k
    let mut q: Vec<Cx> = Vec::new();
    for &pk in p.iter().rev() {
        let mut next = vec![Cx::new(0.0, 0.0); q.len() + 1];
        for (i, &qi) in q.iter().enumerate() {
            next[i] += qi * map.b;
            next[i + 1] += qi * map.a;
        }
        next[0] += pk;
        q = next;
    }
    q.iter().map(|&c| c * map.a).collect()
}

/// Largest coefficient deviation of `a·w(aζ + b)` from `w`.
pub fn map_identity_defect(w: &[Cx], map: &AffineMap) -> f64 {
    compose_poly(w, map)
        .iter()
        .zip(w)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// All `(a, b)` with `a·w_N(aζ + b) = w_N(ζ)` for `w_N = ζ^m + W`: `a` runs
/// over the (m+1)-th roots of unity by increasing argument (so the identity
/// comes first), `b` solves the `ζ^{m-1}` coefficient, and each pair is
/// kept only if the full identity holds to [`MAP_IDENTITY_TOL`].
pub fn candidate_maps(prob: &VortexProblem) -> Vec<AffineMap> {
    let m = prob.m();
    let w = prob.normalized_background_coeffs();
    let scale = w.iter().map(|c| c.norm()).fold(1.0, f64::max);
    (0..=m)
        .filter_map(|k| {
            let a = if k == 0 {
                Cx::new(1.0, 0.0)
            } else {
                Cx::from_polar(1.0, 2.0 * PI * k as f64 / (m + 1) as f64)
            };
            let b = w[m - 1] * (a - 1.0) / m as f64;
            let map = AffineMap { a, b };
            (map_identity_defect(&w, &map) <= MAP_IDENTITY_TOL * scale).then_some(map)
        })
        .collect()
}

/// Pairs `from[i] ↔ to[σ(i)]` with equal circulations and positions within
/// `tol`, by backtracking.
fn match_poles(from: &[Cx], to: &[Cx], gammas: &Circulations, tol: f64) -> bool {
    fn go(
        i: usize,
        from: &[Cx],
        to: &[Cx],
        gammas: &Circulations,
        tol: f64,
        used: &mut [bool],
    ) -> bool {
        if i == from.len() {
            return true;
        }
        for j in 0..to.len() {
            if !used[j] && gammas.same_value(i, j) && (from[i] - to[j]).norm() <= tol {
                used[j] = true;
                if go(i + 1, from, to, gammas, tol, used) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    from.len() == to.len() && go(0, from, to, gammas, tol, &mut vec![false; to.len()])
}

/// Whether `map` carries the poles of `z'` onto those of `z`:
/// `{(z'_j - b)/a}` equals `{z_j}` as circulation-labelled multisets.
pub fn map_matches(z: &[Cx], z_prime: &[Cx], map: &AffineMap, gammas: &Circulations) -> bool {
    let pulled: Vec<Cx> = z_prime.iter().map(|&x| (x - map.b) / map.a).collect();
    match_poles(z, &pulled, gammas, EQUIVALENCE_TOL)
}

/// First map (in list order) witnessing `eq1 ∼ eq2`.
pub fn equivalent(
    eq1: &Equilibrium,
    eq2: &Equilibrium,
    maps: &[AffineMap],
    gammas: &Circulations,
) -> Option<AffineMap> {
    maps.iter()
        .find(|m| map_matches(&eq1.z, &eq2.z, m, gammas))
        .copied()
}

/// Normalized complex velocity `(1/2πi)(Σ Γ_j/(u - z_j) - u^m - W(u))`.
pub fn normalized_velocity(prob: &VortexProblem, z: &[Cx], u: Cx) -> Cx {
    let g = prob.circulations().values();
    let poles: Cx = g.iter().zip(z).map(|(&gj, &zj)| gj / (u - zj)).sum();
    (poles - prob.normalized_background(u)) / Cx::new(0.0, 2.0 * PI)
}

/// `max_k |a·V_{z'}(a·u_k + b) - V_z(u_k)|` over the sample points.
pub fn map_deviation(
    prob: &VortexProblem,
    z: &[Cx],
    z_prime: &[Cx],
    map: &AffineMap,
    samples: &[Cx],
) -> f64 {
    samples
        .iter()
        .map(|&u| {
            (map.a * normalized_velocity(prob, z_prime, map.apply(u))
                - normalized_velocity(prob, z, u))
            .norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub member: usize,
    /// Witness for `representative → member`.
    pub map: AffineMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigurationClass {
    /// Indices into the equilibrium list, ascending.
    pub members: Vec<usize>,
    pub representative: usize,
    pub witness_maps: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub maps: Vec<AffineMap>,
    pub classes: Vec<ConfigurationClass>,
    pub species: SpeciesPartition,
    #[serde(serialize_with = "decimal")]
    pub bound: BigUint,
    pub attained: bool,
}

impl Classification {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

/// Union-find over pairwise equivalence of the admissible equilibria;
/// classes are ordered by smallest member.
pub fn classify(equilibria: &[Equilibrium], prob: &VortexProblem) -> Classification {
    let gammas = prob.circulations();
    let maps = candidate_maps(prob);
    let idx: Vec<usize> = (0..equilibria.len())
        .filter(|&i| equilibria[i].admissible)
        .collect();
    let mut uf = UnionFind::<usize>::new(equilibria.len());
    let mut edges: HashMap<usize, Vec<(usize, AffineMap)>> = HashMap::new();
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            if let Some(map) = equivalent(&equilibria[i], &equilibria[j], &maps, gammas) {
                uf.union(i, j);
                edges.entry(i).or_default().push((j, map));
                edges.entry(j).or_default().push((i, map.inverse()));
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_pos: HashMap<usize, usize> = HashMap::new();
    for &i in &idx {
        let r = uf.find(i);
        let pos = *root_pos.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[pos].push(i);
    }
    let classes = groups
        .into_iter()
        .map(|members| {
            let rep = members[0];
            let witness_maps = members[1..]
                .iter()
                .map(|&mbr| {
                    let map = equivalent(&equilibria[rep], &equilibria[mbr], &maps, gammas)
                        .or_else(|| chain_witness(rep, mbr, &edges))
                        .expect("members of a class are connected");
                    Witness { member: mbr, map }
                })
                .collect();
            ConfigurationClass {
                members,
                representative: rep,
                witness_maps,
            }
        })
        .collect::<Vec<_>>();
    let species = species_partition(gammas);
    let bound = config_bound(prob.m(), prob.n(), &species);
    let attained = BigUint::from(classes.len()) == bound;
    Classification {
        maps,
        classes,
        species,
        bound,
        attained,
    }
}

/// Composes witnesses along a breadth-first path of accepted pairs.
fn chain_witness(
    from: usize,
    to: usize,
    edges: &HashMap<usize, Vec<(usize, AffineMap)>>,
) -> Option<AffineMap> {
    let mut seen: HashMap<usize, AffineMap> = HashMap::from([(from, AffineMap::IDENTITY)]);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            return seen.get(&to).copied();
        }
        let here = seen[&u];
        for &(v, map) in edges.get(&u).into_iter().flatten() {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(v) {
                e.insert(here.then(&map));
                queue.push_back(v);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::filter_admissible;
    use crate::solver::{solve, HomotopyConfig};
    use crate::vortex_system::build_poly_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn problem(g: &[(i64, i64)], m: usize, w: Vec<Cx>) -> VortexProblem {
        VortexProblem::pre_normalized(Circulations::from_fractions(g).unwrap(), m, w).unwrap()
    }

    fn eq(z: Vec<Cx>) -> Equilibrium {
        Equilibrium {
            z_physical: z.clone(),
            z,
            multiplicity: 1,
            poly_residual: 0.0,
            rational_residual: 0.0,
            dynamics_residual: 0.0,
            admissible: true,
        }
    }

    fn solved(prob: &VortexProblem, seed: u64) -> Vec<Equilibrium> {
        let set = solve(
            &build_poly_system(prob).unwrap(),
            &HomotopyConfig::default(),
            seed,
        )
        .unwrap();
        filter_admissible(&set, prob)
    }

    #[test]
    fn species_examples() {
        let p = species_partition(&Circulations::from_fractions(&[(1, 1), (1, 1)]).unwrap());
        assert_eq!(p.sizes(), vec![2]);
        let p = species_partition(&Circulations::from_fractions(&[(1, 1), (2, 1)]).unwrap());
        assert_eq!(p.species_count(), 2);
        let p =
            species_partition(&Circulations::from_fractions(&[(1, 1), (1, 1), (-5, 4)]).unwrap());
        assert_eq!(p.sizes(), vec![2, 1]);
        assert_eq!(p.blocks[1].exact.as_deref(), Some("-5/4"));
        let p =
            species_partition(&Circulations::from_fractions(&[(2, 1), (1, 1), (4, 2)]).unwrap());
        assert_eq!(p.blocks[0].indices, vec![0, 2]);
    }

    #[test]
    fn bound_examples() {
        let sp = |g: &[(i64, i64)]| species_partition(&Circulations::from_fractions(g).unwrap());
        assert_eq!(
            config_bound(1, 2, &sp(&[(1, 1), (1, 1)])),
            BigUint::from(1u32)
        );
        assert_eq!(
            config_bound(2, 2, &sp(&[(1, 1), (1, 1)])),
            BigUint::from(3u32)
        );
        assert_eq!(
            config_bound(1, 3, &sp(&[(1, 1), (1, 1), (-5, 4)])),
            BigUint::from(3u32)
        );
        assert_eq!(
            config_bound(1, 2, &sp(&[(1, 1), (2, 1)])),
            BigUint::from(2u32)
        );
        assert_eq!(
            config_bound(3, 4, &sp(&[(1, 1), (2, 1), (3, 1), (5, 1)])),
            BigUint::from(360u32)
        );
    }

    #[test]
    fn candidate_map_examples() {
        let cc = c(0.4, -1.2);
        let maps = candidate_maps(&problem(&[(1, 1), (2, 1)], 1, vec![cc]));
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[0], AffineMap::IDENTITY);
        assert!(maps[1].approx_eq(
            &AffineMap {
                a: c(-1.0, 0.0),
                b: -2.0 * cc
            },
            1e-14
        ));

        let maps = candidate_maps(&problem(&[(1, 1), (2, 1)], 2, vec![]));
        assert_eq!(maps.len(), 3);
        for (k, m) in maps.iter().enumerate() {
            assert!((m.a - Cx::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).norm() < 1e-15);
            assert_eq!(m.b, c(0.0, 0.0));
        }

        let maps = candidate_maps(&problem(
            &[(1, 1), (2, 1)],
            2,
            vec![c(0.3, 0.0), c(0.7, 0.2)],
        ));
        assert_eq!(maps, vec![AffineMap::IDENTITY]);
        // w_N = ζ² + 1 admits only the identity
        let maps = candidate_maps(&problem(
            &[(1, 1), (1, 1)],
            2,
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ));
        assert_eq!(maps, vec![AffineMap::IDENTITY]);
    }

    #[test]
    fn map_algebra() {
        let f = AffineMap {
            a: c(0.0, 1.0),
            b: c(1.0, 2.0),
        };
        let g = AffineMap {
            a: c(2.0, -1.0),
            b: c(-0.5, 0.0),
        };
        assert!(f.then(&f.inverse()).approx_eq(&AffineMap::IDENTITY, 1e-15));
        let z = c(0.3, -0.8);
        // the class witness chain pulls poles back: z = (z' - b)/a
        let pulled = |m: &AffineMap, x: Cx| (x - m.b) / m.a;
        let direct = pulled(&f.then(&g), z);
        assert!((direct - pulled(&f, pulled(&g, z))).norm() < 1e-14);
    }

    #[test]
    fn two_vortex_cases() {
        // equal circulations: the two roots are a coordinate swap
        let prob = problem(&[(1, 1), (1, 1)], 1, vec![c(0.2, 0.5)]);
        let eqs = solved(&prob, 1);
        let maps = candidate_maps(&prob);
        assert_eq!(
            equivalent(&eqs[0], &eqs[1], &maps, prob.circulations()),
            Some(AffineMap::IDENTITY)
        );
        let cl = classify(&eqs, &prob);
        assert_eq!(cl.class_count(), 1);
        assert!(cl.attained);

        // distinct circulations: the identity fails, the point reflection works
        let cc = c(0.2, 0.5);
        let prob = problem(&[(1, 1), (2, 1)], 1, vec![cc]);
        let eqs = solved(&prob, 1);
        let maps = candidate_maps(&prob);
        assert!(!map_matches(
            &eqs[0].z,
            &eqs[1].z,
            &maps[0],
            prob.circulations()
        ));
        let w = equivalent(&eqs[0], &eqs[1], &maps, prob.circulations()).unwrap();
        assert!(w.approx_eq(
            &AffineMap {
                a: c(-1.0, 0.0),
                b: -2.0 * cc
            },
            1e-14
        ));
        let cl = classify(&eqs, &prob);
        assert_eq!(cl.class_count(), 1);
        assert_eq!(cl.bound, BigUint::from(2u32));
        assert!(!cl.attained);
    }

    #[test]
    fn reflexive_on_self() {
        let prob = problem(&[(1, 1), (2, 1)], 1, vec![c(0.2, 0.5)]);
        let e = eq(vec![c(0.1, 0.2), c(-0.4, 0.9)]);
        assert_eq!(
            equivalent(&e, &e, &candidate_maps(&prob), prob.circulations()),
            Some(AffineMap::IDENTITY)
        );
    }

    #[test]
    fn circulations_must_match() {
        let prob = problem(&[(1, 1), (2, 1)], 1, vec![]);
        let a = eq(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let b = eq(vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        // same positions, swapped labels: a map must carry Γ onto Γ
        let swapped = map_matches(&a.z, &b.z, &AffineMap::IDENTITY, prob.circulations());
        assert!(!swapped);
        // the reflection ζ ↦ -ζ sends each pole onto the equal-Γ one
        assert!(map_matches(
            &a.z,
            &b.z,
            &AffineMap {
                a: c(-1.0, 0.0),
                b: c(0.0, 0.0)
            },
            prob.circulations()
        ));
    }

    #[test]
    fn equal_pair_quadratic_three_classes() {
        let prob = problem(&[(1, 1), (1, 1)], 2, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let eqs = solved(&prob, 1);
        let cl = classify(&eqs, &prob);
        assert_eq!(cl.class_count(), 3);
        assert_eq!(cl.bound, BigUint::from(3u32));
        assert!(cl.attained);
        assert!(cl.classes.iter().all(|k| k.members.len() == 2));
    }

    #[test]
    fn accepted_witnesses_satisfy_velocity_identity() {
        let prob = problem(&[(1, 1), (3, 1), (-1, 2)], 1, vec![c(0.3, -0.2)]);
        let eqs = solved(&prob, 5);
        let cl = classify(&eqs, &prob);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Cx> = (0..10)
            .map(|_| c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        for class in &cl.classes {
            for w in &class.witness_maps {
                let d = map_deviation(
                    &prob,
                    &eqs[class.representative].z,
                    &eqs[w.member].z,
                    &w.map,
                    &samples,
                );
                assert!(d < 1e-8, "{d}");
            }
        }
    }

    #[test]
    fn inadmissible_equilibria_are_skipped() {
        let prob = problem(&[(1, 1), (1, 1)], 1, vec![]);
        let mut bad = eq(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        bad.admissible = false;
        let good = eq(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let cl = classify(&[bad, good], &prob);
        assert_eq!(cl.classes.len(), 1);
        assert_eq!(cl.classes[0].members, vec![1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn permuting_a_species_block_is_equivalent(
                pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 4),
                swap in 0usize..2,
            ) {
                // Γ = (1, 2, 1, 2): blocks {0, 2} and {1, 3}
                let prob = problem(&[(1, 1), (2, 1), (1, 1), (2, 1)], 2, vec![c(0.1, 0.3), c(-0.4, 0.0)]);
                let z: Vec<Cx> = pts.iter().map(|&(x, y)| c(x, y)).collect();
                let mut zp = z.clone();
                if swap == 0 { zp.swap(0, 2) } else { zp.swap(1, 3) }
                let maps = candidate_maps(&prob);
                prop_assert_eq!(equivalent(&eq(z), &eq(zp), &maps, prob.circulations()), Some(AffineMap::IDENTITY));
            }

            #[test]
            fn symmetric_and_transitive_under_group_maps(
                pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
                k1 in 0usize..2, k2 in 0usize..2,
            ) {
                let cc = c(0.25, -0.5);
                let prob = problem(&[(1, 1), (2, 1), (3, 1)], 1, vec![cc]);
                let maps = candidate_maps(&prob);
                let z: Vec<Cx> = pts.iter().map(|&(x, y)| c(x, y)).collect();
                // z' = a z + b realizes the witness (a, b) for z → z'
                let push = |m: &AffineMap, v: &[Cx]| v.iter().map(|&x| m.apply(x)).collect::<Vec<_>>();
                let z1 = push(&maps[k1], &z);
                let z2 = push(&maps[k2], &z1);
                let g = prob.circulations();
                let w01 = equivalent(&eq(z.clone()), &eq(z1.clone()), &maps, g).unwrap();
                let w10 = equivalent(&eq(z1.clone()), &eq(z.clone()), &maps, g).unwrap();
                prop_assert!(map_matches(&z1, &z, &w01.inverse(), g));
                prop_assert!(w10.approx_eq(&w01.inverse(), 1e-12) || map_matches(&z1, &z, &w10, g));
                let w12 = equivalent(&eq(z1.clone()), &eq(z2.clone()), &maps, g).unwrap();
                prop_assert!(map_matches(&z, &z2, &w01.then(&w12), g));
            }
        }
    }
}
