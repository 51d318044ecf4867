//! Root systems, diagram automorphisms and twist data.
//!
//! The A-series is fully supported; root and lattice computations are exact
//! (integer root coordinates, rational coweights). Floating point enters only
//! through representation matrices.
//!
//! For `sl(N)` a root is `eps_i - eps_j`; the twist of order `l | N` acts on
//! everything through the cyclic rotation of the extended Dynkin diagram by
//! `p = N/l` steps (times the generator exponent `j`), realized on indices as
//! `i -> i + p*j mod N`. The invariant Cartan subalgebra consists of traceless
//! diagonals constant on rotation orbits; its dimension is `p - 1`.

use crate::linalg::{zeros, CMat};
use num_complex::Complex64;
use num_rational::Ratio;
use std::collections::HashMap;
use thiserror::Error;

pub type Rat = Ratio<i64>;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("unsupported series {0:?} of rank {1} (A-series with rank >= 1 is supported)")]
    Unsupported(Series, usize),
    #[error("twist order {l} does not divide the center order {n}")]
    TwistOrder { l: u32, n: u32 },
    #[error("generator exponent {j} is not coprime to the twist order {l}")]
    GeneratorExponent { j: u32, l: u32 },
}

pub type Result<T> = std::result::Result<T, LieError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    A,
    D,
}

/// Root `eps_i - eps_j` of `sl(N)`, `i != j`, zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Root {
    pub i: usize,
    pub j: usize,
}

impl Root {
    pub fn negated(&self) -> Root {
        Root { i: self.j, j: self.i }
    }

    /// Integer coordinate vector in the eps-basis (length N).
    pub fn coords(&self, n: usize) -> Vec<i64> {
        let mut v = vec![0i64; n];
        v[self.i] = 1;
        v[self.j] = -1;
        v
    }
}

/// Simple root system data for a simple Lie algebra, A-series.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub series: Series,
    pub rank: usize,
    /// matrix size N = rank + 1
    pub n: usize,
    pub roots: Vec<Root>,
    index: HashMap<Root, usize>,
    /// indices of the simple roots alpha_1..alpha_rank
    pub simple: Vec<usize>,
    /// index of the highest root (-alpha_0)
    pub highest: usize,
    pub cartan_matrix: Vec<Vec<i64>>,
    /// rho-covector: half-sum of positive coroots, as a traceless diagonal
    pub rho_covector: Vec<Rat>,
    pub coxeter_number: u32,
    pub dual_coxeter_number: u32,
    /// fundamental coweights as traceless diagonals, one per simple root
    pub fundamental_coweights: Vec<Vec<Rat>>,
}

impl RootSystem {
    pub fn root_index(&self, r: &Root) -> Option<usize> {
        self.index.get(r).copied()
    }

    /// All norms are 2 in the simply-laced normalization.
    pub fn norm_sq(&self, _root: usize) -> i64 {
        2
    }

    /// Pairing of a rational diagonal covector with a root.
    pub fn pair(&self, covector: &[Rat], root: usize) -> Rat {
        let r = self.roots[root];
        covector[r.i] - covector[r.j]
    }

    /// Structure constant data: [E_a, E_b] = c * E_{a+b} when a+b is a root,
    /// the coroot H_a when b = -a, zero otherwise. The sign convention is the
    /// one inherited from elementary matrices E_{ij}, which is deterministic
    /// and satisfies the Jacobi identity by construction.
    pub fn bracket_roots(&self, a: usize, b: usize) -> RootBracket {
        let ra = self.roots[a];
        let rb = self.roots[b];
        if ra.i == rb.j && ra.j == rb.i {
            return RootBracket::Cartan(a);
        }
        if ra.j == rb.i && ra.i != rb.j {
            let sum = Root { i: ra.i, j: rb.j };
            return RootBracket::Root(1, self.index[&sum]);
        }
        if rb.j == ra.i && rb.i != ra.j {
            let sum = Root { i: rb.i, j: ra.j };
            return RootBracket::Root(-1, self.index[&sum]);
        }
        RootBracket::Zero
    }

    /// Coroot of a root as an integer diagonal.
    pub fn coroot(&self, root: usize) -> Vec<i64> {
        let r = self.roots[root];
        let mut v = vec![0i64; self.n];
        v[r.i] = 1;
        v[r.j] = -1;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootBracket {
    Zero,
    /// sign, index of the sum root
    Root(i64, usize),
    /// coroot H of the given root index ([E_a, E_{-a}])
    Cartan(usize),
}

pub fn build_root_system(series: Series, rank: usize) -> Result<RootSystem> {
    if series != Series::A || rank < 1 {
        return Err(LieError::Unsupported(series, rank));
    }
    let n = rank + 1;
    let mut roots = Vec::new();
    let mut index = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = Root { i, j };
                index.insert(r, roots.len());
                roots.push(r);
            }
        }
    }
    let simple: Vec<usize> = (0..rank)
        .map(|i| index[&Root { i, j: i + 1 }])
        .collect();
    let highest = index[&Root { i: 0, j: n - 1 }];
    let mut cartan_matrix = vec![vec![0i64; rank]; rank];
    for a in 0..rank {
        for b in 0..rank {
            let ra = roots[simple[a]];
            let rb = roots[simple[b]];
            // <alpha_a, alpha_b^vee> with the eps-pairing
            let co = {
                let mut v = vec![0i64; n];
                v[rb.i] = 1;
                v[rb.j] = -1;
                v
            };
            cartan_matrix[a][b] = co[ra.i] - co[ra.j];
        }
    }
    // rho^vee = diag((N-1)/2, (N-3)/2, ..., -(N-1)/2)
    let rho_covector: Vec<Rat> = (0..n)
        .map(|i| Rat::new(n as i64 - 1 - 2 * i as i64, 2))
        .collect();
    // fundamental coweight Xi_k: diag with (n-k)/n on the first k entries and
    // -k/n on the rest (dual to simple roots)
    let fundamental_coweights: Vec<Vec<Rat>> = (1..=rank)
        .map(|k| {
            (0..n)
                .map(|i| {
                    if i < k {
                        Rat::new(n as i64 - k as i64, n as i64)
                    } else {
                        Rat::new(-(k as i64), n as i64)
                    }
                })
                .collect()
        })
        .collect();
    Ok(RootSystem {
        series,
        rank,
        n,
        roots,
        index,
        simple,
        highest,
        cartan_matrix,
        rho_covector,
        coxeter_number: n as u32,
        dual_coxeter_number: n as u32,
        fundamental_coweights,
    })
}

// ---- twist data ------------------------------------------------------------

/// One orbit of the diagram automorphism on the root system.
#[derive(Debug, Clone)]
pub struct RootOrbit {
    /// representative root index (smallest index among members)
    pub rep: usize,
    /// members in automorphism order: lambda^m(rep)
    pub members: Vec<usize>,
    /// orbit length l_alpha = l / p_alpha
    pub len: usize,
    /// p_alpha = l / len
    pub p: u32,
    /// allowed Fourier indices, multiples of p_alpha mod l
    pub fourier: Vec<i64>,
}

/// Orbit of the automorphism on the extended coroot diagram nodes 0..N-1
/// (node t is the coroot `E_tt - E_{t+1,t+1}` cyclically; node N-1 belongs
/// to the lowest root alpha_0).
#[derive(Debug, Clone)]
pub struct CartanOrbit {
    pub rep: usize,
    pub members: Vec<usize>,
    pub len: usize,
    pub p: u32,
    pub fourier: Vec<i64>,
    /// true for the orbit through the alpha_0 node, whose c = 0 layer is
    /// excluded from the basis
    pub through_affine_node: bool,
}

/// Twist data attached to a cyclic center subgroup of order `l` and a
/// generator exponent `j` (coprime to `l`).
#[derive(Debug, Clone)]
pub struct TwistData {
    pub l: u32,
    pub j: u32,
    /// rotation step of the extended diagram: s = (N/l) * j mod N
    pub step: usize,
    /// kappa = rho^vee / h
    pub kappa: Vec<Rat>,
    /// action of the automorphism on root indices
    pub lambda_roots: Vec<usize>,
    pub orbits: Vec<RootOrbit>,
    /// orbit id and position of each root: root index -> (orbit, m) with
    /// root = lambda^m(rep)
    pub orbit_of_root: Vec<(usize, usize)>,
    pub cartan_orbits: Vec<CartanOrbit>,
    /// basis of the invariant Cartan subalgebra (traceless diagonals,
    /// orbit-averaged coroots of the non-affine orbits), dimension p-1
    pub invariant_cartan_basis: Vec<Vec<Rat>>,
    /// simple roots of the invariant subalgebra as covectors on the full
    /// Cartan (orbit averages of simple-root functionals)
    pub invariant_simple_roots: Vec<Vec<Rat>>,
    /// simple coroots of the invariant subalgebra (traceless diagonals)
    pub invariant_simple_coroots: Vec<Vec<Rat>>,
    /// fundamental coweights of the invariant subalgebra in its own Cartan
    pub invariant_fundamental_coweights: Vec<Vec<Rat>>,
}

impl TwistData {
    pub fn dim_invariant_cartan(&self) -> usize {
        self.invariant_cartan_basis.len()
    }

    /// kappa paired with a root: (j - i)/N for eps_i - eps_j.
    pub fn kappa_pair(&self, rs: &RootSystem, root: usize) -> Rat {
        rs.pair(&self.kappa, root)
    }
}

pub fn build_twist(rs: &RootSystem, l: u32, j: u32) -> Result<TwistData> {
    let n = rs.n as u32;
    if l == 0 || n % l != 0 {
        return Err(LieError::TwistOrder { l, n });
    }
    if gcd(j, l) != 1 {
        return Err(LieError::GeneratorExponent { j, l });
    }
    let p = n / l;
    let step = ((p * j) % n) as usize;
    let nn = rs.n;

    // action on roots: eps_i - eps_j -> eps_{i+s} - eps_{j+s}
    let lambda_roots: Vec<usize> = rs
        .roots
        .iter()
        .map(|r| {
            rs.root_index(&Root {
                i: (r.i + step) % nn,
                j: (r.j + step) % nn,
            })
            .expect("rotation permutes the root system")
        })
        .collect();

    // orbits on roots
    let mut orbit_of_root = vec![(usize::MAX, 0usize); rs.roots.len()];
    let mut orbits = Vec::new();
    for start in 0..rs.roots.len() {
        if orbit_of_root[start].0 != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        let mut cur = lambda_roots[start];
        while cur != start {
            members.push(cur);
            cur = lambda_roots[cur];
        }
        let len = members.len();
        debug_assert_eq!(l as usize % len, 0);
        let p_alpha = l / len as u32;
        let orbit_id = orbits.len();
        for (m, &idx) in members.iter().enumerate() {
            orbit_of_root[idx] = (orbit_id, m);
        }
        orbits.push(RootOrbit {
            rep: start,
            members,
            len,
            p: p_alpha,
            fourier: (0..l as i64).filter(|k| k % p_alpha as i64 == 0).collect(),
        });
    }

    // orbits on extended diagram nodes 0..N-1 under t -> t + step
    let mut seen = vec![false; nn];
    let mut cartan_orbits = Vec::new();
    for start in 0..nn {
        if seen[start] {
            continue;
        }
        let mut members = vec![start];
        seen[start] = true;
        let mut cur = (start + step) % nn;
        while cur != start {
            seen[cur] = true;
            members.push(cur);
            cur = (cur + step) % nn;
        }
        let len = members.len();
        let p_node = l / len as u32;
        cartan_orbits.push(CartanOrbit {
            rep: start,
            through_affine_node: members.contains(&(nn - 1)),
            members,
            len,
            p: p_node,
            fourier: (0..l as i64).filter(|k| k % p_node as i64 == 0).collect(),
        });
    }

    let kappa: Vec<Rat> = rs
        .rho_covector
        .iter()
        .map(|r| r / Rat::from_integer(rs.coxeter_number as i64))
        .collect();

    // invariant Cartan: averages of coroot orbits, skipping the affine-node
    // orbit (its average is minus the sum of the others)
    let mut invariant_cartan_basis = Vec::new();
    let mut invariant_simple_roots = Vec::new();
    for orbit in &cartan_orbits {
        if orbit.through_affine_node {
            continue;
        }
        let mut avg = vec![Rat::from_integer(0); nn];
        let mut avg_root = vec![Rat::from_integer(0); nn];
        for &t in &orbit.members {
            // coroot of node t: E_tt - E_{t+1,t+1}, cyclic
            avg[t] += Rat::new(1, orbit.len as i64);
            avg[(t + 1) % nn] -= Rat::new(1, orbit.len as i64);
            // simple-root functional of node t is the same diagonal covector
            avg_root[t] += Rat::new(1, orbit.len as i64);
            avg_root[(t + 1) % nn] -= Rat::new(1, orbit.len as i64);
        }
        invariant_cartan_basis.push(avg);
        invariant_simple_roots.push(avg_root);
    }

    // simple coroots of the invariant subalgebra: 2 * dual(alpha~) / (alpha~, alpha~)
    // with the eps-form; dual(covector) is the same diagonal made traceless.
    let mut invariant_simple_coroots = Vec::new();
    for root in &invariant_simple_roots {
        let norm_sq: Rat = root.iter().map(|x| x * x).sum();
        let two = Rat::from_integer(2);
        invariant_simple_coroots.push(root.iter().map(|x| x * two / norm_sq).collect());
    }

    // fundamental coweights of the invariant subalgebra: solve
    // <w_a, alpha~_b> = delta_ab within the invariant Cartan (exact Gaussian
    // elimination over rationals in the invariant basis)
    let dim = invariant_cartan_basis.len();
    let mut invariant_fundamental_coweights = Vec::new();
    if dim > 0 {
        // matrix M[b][c] = <basis_c, alpha~_b>
        let pair =
            |cov: &[Rat], vec: &[Rat]| -> Rat { cov.iter().zip(vec).map(|(a, b)| a * b).sum() };
        let m: Vec<Vec<Rat>> = invariant_simple_roots
            .iter()
            .map(|alpha| {
                invariant_cartan_basis
                    .iter()
                    .map(|basis| pair(alpha, basis))
                    .collect()
            })
            .collect();
        for a in 0..dim {
            let rhs: Vec<Rat> = (0..dim)
                .map(|b| Rat::from_integer((a == b) as i64))
                .collect();
            let coeffs = solve_rational(&m, &rhs);
            let mut w = vec![Rat::from_integer(0); nn];
            for (c, coef) in coeffs.iter().enumerate() {
                for (entry, basis) in w.iter_mut().zip(&invariant_cartan_basis[c]) {
                    *entry += coef * basis;
                }
            }
            invariant_fundamental_coweights.push(w);
        }
    }

    Ok(TwistData {
        l,
        j,
        step,
        kappa,
        lambda_roots,
        orbits,
        orbit_of_root,
        cartan_orbits,
        invariant_cartan_basis,
        invariant_simple_roots,
        invariant_simple_coroots,
        invariant_fundamental_coweights,
    })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact linear solve by Gaussian elimination over the rationals.
fn solve_rational(m: &[Vec<Rat>], rhs: &[Rat]) -> Vec<Rat> {
    let n = m.len();
    let mut a: Vec<Vec<Rat>> = m
        .iter()
        .zip(rhs)
        .map(|(row, r)| {
            let mut v = row.clone();
            v.push(*r);
            v
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| a[r][col] != Rat::from_integer(0))
            .expect("invariant pairing matrix is nonsingular");
        a.swap(col, pivot);
        let p = a[col][col];
        for entry in a[col].iter_mut() {
            *entry /= p;
        }
        for r in 0..n {
            if r != col && a[r][col] != Rat::from_integer(0) {
                let factor = a[r][col];
                for c in col..=n {
                    let sub = factor * a[col][c];
                    a[r][c] -= sub;
                }
            }
        }
    }
    (0..n).map(|r| a[r][n]).collect()
}

// ---- representations -------------------------------------------------------

/// A finite-dimensional representation given by explicit matrices for the
/// root vectors and for the unit diagonals. For `sl(N)` the defining
/// representation uses elementary matrices; duals negate-transpose.
#[derive(Debug, Clone)]
pub struct Representation {
    pub dim: usize,
    /// matrix of E_alpha per root index
    pub root_mats: Vec<CMat>,
    /// matrix of the diagonal unit E_tt per t (the rep of a diagonal
    /// x = sum x_t E_tt is the corresponding combination)
    pub diag_mats: Vec<CMat>,
    /// integer weights: weight[v][t] is the E_tt eigenvalue on basis vector v
    pub weights: Vec<Vec<i64>>,
}

impl Representation {
    /// Representation matrix of a rational diagonal (traceless) element.
    pub fn diagonal(&self, x: &[Rat]) -> CMat {
        let mut m = zeros(self.dim, self.dim);
        for (t, mat) in self.diag_mats.iter().enumerate() {
            let c = rat_to_f64(x[t]);
            if c != 0.0 {
                m = m + mat.mapv(|z| z * c);
            }
        }
        m
    }

    /// Complex-coefficient diagonal.
    pub fn diagonal_c(&self, x: &[Complex64]) -> CMat {
        let mut m = zeros(self.dim, self.dim);
        for (t, mat) in self.diag_mats.iter().enumerate() {
            if x[t] != Complex64::new(0.0, 0.0) {
                m = m + mat.mapv(|z| z * x[t]);
            }
        }
        m
    }
}

pub fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Defining representation of sl(N): E_{eps_i - eps_j} is the elementary
/// matrix E_ij.
pub fn defining_rep(rs: &RootSystem) -> Result<Representation> {
    if rs.series != Series::A {
        return Err(LieError::Unsupported(rs.series, rs.rank));
    }
    let n = rs.n;
    let root_mats = rs
        .roots
        .iter()
        .map(|r| {
            let mut m = zeros(n, n);
            m[(r.i, r.j)] = Complex64::new(1.0, 0.0);
            m
        })
        .collect();
    let diag_mats = (0..n)
        .map(|t| {
            let mut m = zeros(n, n);
            m[(t, t)] = Complex64::new(1.0, 0.0);
            m
        })
        .collect();
    let weights = (0..n)
        .map(|v| (0..n).map(|t| (v == t) as i64).collect())
        .collect();
    Ok(Representation {
        dim: n,
        root_mats,
        diag_mats,
        weights,
    })
}

/// Dual representation: X -> -X^T on every generator.
pub fn dual_rep(rep: &Representation) -> Representation {
    let flip = |m: &CMat| -> CMat { m.t().mapv(|z| -z) };
    Representation {
        dim: rep.dim,
        root_mats: rep.root_mats.iter().map(flip).collect(),
        diag_mats: rep.diag_mats.iter().map(flip).collect(),
        weights: rep
            .weights
            .iter()
            .map(|w| w.iter().map(|x| -x).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;

    #[test]
    fn a1_smallest_case() {
        let rs = build_root_system(Series::A, 1).unwrap();
        assert_eq!(rs.roots.len(), 2);
        assert_eq!(rs.coxeter_number, 2);
        assert_eq!(rs.dual_coxeter_number, 2);
        // no root sums in R
        for a in 0..2 {
            for b in 0..2 {
                match rs.bracket_roots(a, b) {
                    RootBracket::Root(..) => panic!("A1 has no root-sum brackets"),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn a2_counts_and_jacobi() {
        let rs = build_root_system(Series::A, 2).unwrap();
        assert_eq!(rs.roots.len(), 6);
        assert_eq!(rs.coxeter_number, 3);
        // Jacobi on the defining rep: matrix commutators realize the bracket
        let rep = defining_rep(&rs).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let lhs = commutator(&rep.root_mats[a], &rep.root_mats[b]);
                let rhs = match rs.bracket_roots(a, b) {
                    RootBracket::Zero => zeros(3, 3),
                    RootBracket::Root(sign, s) => rep.root_mats[s].mapv(|z| z * sign as f64),
                    RootBracket::Cartan(r) => {
                        let co: Vec<Rat> = rs
                            .coroot(r)
                            .into_iter()
                            .map(Rat::from_integer)
                            .collect();
                        rep.diagonal(&co)
                    }
                };
                let diff = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(diff < 1e-14, "bracket mismatch at ({a},{b})");
            }
        }
    }

    #[test]
    fn a3_highest_root_and_rho() {
        let rs = build_root_system(Series::A, 3).unwrap();
        let highest = rs.roots[rs.highest];
        // alpha1 + alpha2 + alpha3 = eps_0 - eps_3
        assert_eq!(highest, Root { i: 0, j: 3 });
        // <rho^vee, alpha_i> = 1 for all simple roots
        for &s in &rs.simple {
            assert_eq!(rs.pair(&rs.rho_covector, s), Rat::from_integer(1));
        }
    }

    #[test]
    fn twist_rejects_bad_orders() {
        let rs = build_root_system(Series::A, 2).unwrap();
        assert!(build_twist(&rs, 2, 1).is_err()); // 2 does not divide 3
        let rs4 = build_root_system(Series::A, 3).unwrap();
        assert!(build_twist(&rs4, 4, 2).is_err()); // j not coprime to l
    }

    #[test]
    fn untwisted_limit_is_identity() {
        let rs = build_root_system(Series::A, 2).unwrap();
        let tw = build_twist(&rs, 1, 1).unwrap();
        assert_eq!(tw.step, 0);
        assert!(tw.lambda_roots.iter().enumerate().all(|(i, &l)| i == l));
        assert_eq!(tw.dim_invariant_cartan(), rs.rank);
        assert_eq!(tw.orbits.len(), rs.roots.len());
    }

    #[test]
    fn sl2_full_twist_is_belavin_case() {
        let rs = build_root_system(Series::A, 1).unwrap();
        let tw = build_twist(&rs, 2, 1).unwrap();
        // kappa = alpha^vee / 4 = diag(1/4, -1/4)
        assert_eq!(tw.kappa, vec![Rat::new(1, 4), Rat::new(-1, 4)]);
        assert_eq!(tw.dim_invariant_cartan(), 0);
        // single root orbit of length 2
        assert_eq!(tw.orbits.len(), 1);
        assert_eq!(tw.orbits[0].len, 2);
    }

    #[test]
    fn sl4_order_two_twist() {
        let rs = build_root_system(Series::A, 3).unwrap();
        let tw = build_twist(&rs, 2, 1).unwrap();
        assert_eq!(tw.dim_invariant_cartan(), 1);
        // l * fundamental coweight (of the subgroup generator) lies in the
        // coroot lattice: 2 * Xi_2^vee has integer eps-coordinates summing to 0
        let xi2 = &rs.fundamental_coweights[1];
        let doubled: Vec<Rat> = xi2.iter().map(|x| x * Rat::from_integer(2)).collect();
        assert!(doubled.iter().all(|x| x.is_integer()));
        // orbit count times length covers R
        let total: usize = tw.orbits.iter().map(|o| o.len).sum();
        assert_eq!(total, rs.roots.len());
    }

    #[test]
    fn lambda_preserves_inner_product() {
        let rs = build_root_system(Series::A, 3).unwrap();
        let tw = build_twist(&rs, 4, 1).unwrap();
        let dot = |a: usize, b: usize| -> i64 {
            let (ra, rb) = (rs.roots[a], rs.roots[b]);
            let mut v = vec![0i64; rs.n];
            v[ra.i] += 1;
            v[ra.j] -= 1;
            let mut w = vec![0i64; rs.n];
            w[rb.i] += 1;
            w[rb.j] -= 1;
            v.iter().zip(&w).map(|(x, y)| x * y).sum()
        };
        for a in 0..rs.roots.len() {
            for b in 0..rs.roots.len() {
                assert_eq!(
                    dot(a, b),
                    dot(tw.lambda_roots[a], tw.lambda_roots[b]),
                    "automorphism must be orthogonal"
                );
            }
        }
    }

    #[test]
    fn cartan_orbit_bookkeeping() {
        let rs = build_root_system(Series::A, 3).unwrap();
        for l in [1u32, 2, 4] {
            let tw = build_twist(&rs, l, 1).unwrap();
            // generator count after the affine-orbit exclusion equals rank
            let count: usize = tw
                .cartan_orbits
                .iter()
                .map(|o| {
                    o.fourier.len()
                        - if o.through_affine_node { 1 } else { 0 }
                })
                .sum();
            assert_eq!(count, rs.rank, "l = {l}");
        }
    }

    #[test]
    fn defining_rep_sl2_chevalley() {
        let rs = build_root_system(Series::A, 1).unwrap();
        let rep = defining_rep(&rs).unwrap();
        let e = &rep.root_mats[rs.root_index(&Root { i: 0, j: 1 }).unwrap()];
        let f = &rep.root_mats[rs.root_index(&Root { i: 1, j: 0 }).unwrap()];
        assert_eq!(e[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(e[(0, 0)], Complex64::new(0.0, 0.0));
        let h = commutator(e, f);
        assert_eq!(h[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(h[(1, 1)], Complex64::new(-1.0, 0.0));
        // [h, e] = 2e
        let he = commutator(&h, e);
        assert_eq!(he[(0, 1)], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn dual_of_dual_restores_matrices() {
        let rs = build_root_system(Series::A, 2).unwrap();
        let rep = defining_rep(&rs).unwrap();
        let dd = dual_rep(&dual_rep(&rep));
        for (a, b) in rep.root_mats.iter().zip(&dd.root_mats) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn weight_zero_subspace_of_v_vdual_sl3() {
        let rs = build_root_system(Series::A, 2).unwrap();
        let rep = defining_rep(&rs).unwrap();
        let dual = dual_rep(&rep);
        let mut count = 0;
        for v in 0..rep.dim {
            for w in 0..dual.dim {
                let total: Vec<i64> = rep.weights[v]
                    .iter()
                    .zip(&dual.weights[w])
                    .map(|(a, b)| a + b)
                    .collect();
                if total.iter().all(|&x| x == 0) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 3);
    }

    #[test]
    fn exp_l_coweight_is_central() {
        // exp(2 pi i l Xi^vee) = Id in the defining rep (the center element
        // has order l); here via integer coordinates of l * Xi^vee
        let rs = build_root_system(Series::A, 3).unwrap();
        let xi = &rs.fundamental_coweights[0]; // generator coweight for Z_4
        let l = 4;
        let scaled: Vec<Rat> = xi.iter().map(|x| x * Rat::from_integer(l)).collect();
        assert!(scaled.iter().all(|x| x.is_integer()));
    }
}
