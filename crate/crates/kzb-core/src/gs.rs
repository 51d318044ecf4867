//! Generalized sine (GS) basis: the Fourier transform of the Chevalley basis
//! along orbits of the extended-diagram automorphism.
//!
//! For an orbit of length `len` through the root `beta` and a Fourier index
//! `k` divisible by `p = l/len`, the root generator is
//!
//! ```text
//! t_beta^k = (1/sqrt(l)) sum_{m=0}^{l-1} omega^{m k} E_{lambda^m(beta)},
//! omega = exp(2 pi i / l),
//! ```
//!
//! which wraps the orbit `p` times, so member `lambda^m(beta)` carries the
//! coefficient `(p/sqrt(l)) omega^{m k}`. The Cartan family applies the same
//! transform to the extended coroot diagram, with the `c = 0` element of the
//! orbit through the affine node excluded (it is a combination of the
//! others). Duals are fixed by the bilinear trace pairing,
//! `(S_a^c, h_b^d) = delta_{c+d = 0 mod l} delta_{ab}`.
//!
//! Brackets are computed by expanding generators in Chevalley coordinates,
//! bracketing there with exact structure constants, and Fourier-transforming
//! back; the printed closed-form bracket rules are asserted against this
//! expansion (and against representation-matrix commutators) in the tests.

use crate::lie::{rat_to_f64, Rat, Representation, RootBracket, RootSystem, TwistData};
use crate::linalg::{kron, zeros, CMat};
use num_complex::Complex64;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GsError {
    #[error("singular dual pairing on the grade-{0} Cartan layer (orbit bookkeeping bug)")]
    SingularPairing(i64),
}

#[inline]
fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// exp(2 pi i x) for real x.
#[inline]
fn e2pi_re(x: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI * x).exp()
}

/// Kind and indices of one GS generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GsGenerator {
    /// Root family: orbit id and Fourier index k in J_orbit.
    Root { orbit: usize, k: i64 },
    /// Cartan family: extended-diagram orbit id and Fourier index c.
    Cartan { orbit: usize, c: i64 },
    /// Dual Cartan family, same indexing as `Cartan`.
    DualCartan { orbit: usize, c: i64 },
}

/// A linear combination of GS generators (bracket results).
#[derive(Debug, Clone, Default)]
pub struct GsElement {
    pub root: HashMap<(usize, i64), Complex64>,
    pub cartan: HashMap<(usize, i64), Complex64>,
}

impl GsElement {
    pub fn is_zero(&self, tol: f64) -> bool {
        self.root.values().all(|c| c.norm() < tol)
            && self.cartan.values().all(|c| c.norm() < tol)
    }
}

/// The GS basis for a root system with twist data.
#[derive(Debug, Clone)]
pub struct GsBasis {
    pub rs: RootSystem,
    pub twist: TwistData,
    /// Cartan family indices (orbit, c), affine-orbit c = 0 excluded.
    pub cartan_family: Vec<(usize, i64)>,
    /// diagonal coefficient vectors of the Cartan generators, keyed as
    /// `cartan_family`
    cartan_vecs: HashMap<(usize, i64), Vec<Complex64>>,
    /// diagonal coefficient vectors of the dual family
    dual_vecs: HashMap<(usize, i64), Vec<Complex64>>,
    /// root family indices (orbit, k in J_orbit)
    pub root_family: Vec<(usize, i64)>,
}

/// Build the GS basis: Fourier root family, Cartan family with the affine
/// exclusion, and the dual Cartan family from the trace pairing.
pub fn build_gs(rs: &RootSystem, twist: &TwistData) -> Result<GsBasis, GsError> {
    let l = twist.l as i64;
    let n = rs.n;

    let mut cartan_family = Vec::new();
    let mut cartan_vecs = HashMap::new();
    for (oid, orbit) in twist.cartan_orbits.iter().enumerate() {
        for &c in &orbit.fourier {
            if c == 0 && orbit.through_affine_node {
                continue;
            }
            let mut diag = vec![c64(0.0, 0.0); n];
            let scale = orbit.p as f64 / (twist.l as f64).sqrt();
            for (m, &node) in orbit.members.iter().enumerate() {
                let w = e2pi_re(m as f64 * c as f64 / l as f64) * scale;
                diag[node] += w;
                diag[(node + 1) % n] -= w;
            }
            cartan_family.push((oid, c));
            cartan_vecs.insert((oid, c), diag);
        }
    }

    // duals per grade layer: S_a^c paired against h_b^{-c}
    let mut dual_vecs = HashMap::new();
    for c in 0..l {
        let layer: Vec<(usize, i64)> = cartan_family
            .iter()
            .copied()
            .filter(|&(_, cc)| cc == c)
            .collect();
        if layer.is_empty() {
            continue;
        }
        let conj = ((l - c) % l + l) % l;
        let conj_layer: Vec<(usize, i64)> = cartan_family
            .iter()
            .copied()
            .filter(|&(_, cc)| cc == conj)
            .collect();
        debug_assert_eq!(layer.len(), conj_layer.len());
        let dim = layer.len();
        // G[x][b] = (h_layer[x], h_conj[b]) under the bilinear trace form;
        // the duals S_a = sum_x X[a][x] h_x^c need X G = Id, X = G^{-1}.
        let mut g = vec![vec![c64(0.0, 0.0); dim]; dim];
        for (x, kx) in layer.iter().enumerate() {
            for (b, kb) in conj_layer.iter().enumerate() {
                g[x][b] = bilinear_diag(&cartan_vecs[kx], &cartan_vecs[kb]);
            }
        }
        let ginv = invert_complex(&g).ok_or(GsError::SingularPairing(c))?;
        for (a, ka) in layer.iter().enumerate() {
            // delta_ab at (a, conj_layer[b]) requires conj_layer aligned with
            // layer by orbit id
            debug_assert_eq!(layer[a].0, conj_layer[a].0);
            let mut diag = vec![c64(0.0, 0.0); n];
            for (x, kx) in layer.iter().enumerate() {
                let coef = ginv[a][x];
                for (d, v) in diag.iter_mut().zip(&cartan_vecs[kx]) {
                    *d += coef * v;
                }
            }
            dual_vecs.insert(*ka, diag);
        }
    }

    let mut root_family = Vec::new();
    for (oid, orbit) in twist.orbits.iter().enumerate() {
        for &k in &orbit.fourier {
            root_family.push((oid, k));
        }
    }

    Ok(GsBasis {
        rs: rs.clone(),
        twist: twist.clone(),
        cartan_family,
        cartan_vecs,
        dual_vecs,
        root_family,
    })
}

fn bilinear_diag(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain Gaussian inverse for small complex matrices; None when singular.
fn invert_complex(m: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut v = row.clone();
            v.extend((0..n).map(|j| c64((i == j) as i64 as f64, 0.0)));
            v
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            a[r][col]
                .norm()
                .partial_cmp(&a[s][col].norm())
                .unwrap()
        })?;
        if a[pivot][col].norm() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for entry in a[col].iter_mut() {
            *entry /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = a[r][col];
                if factor.norm() > 0.0 {
                    for c in 0..2 * n {
                        let sub = factor * a[col][c];
                        a[r][c] -= sub;
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

impl GsBasis {
    pub fn l(&self) -> i64 {
        self.twist.l as i64
    }

    fn norm_k(&self, k: i64) -> i64 {
        let l = self.l();
        ((k % l) + l) % l
    }

    /// Chevalley coefficients of t_root^k for an arbitrary member root (not
    /// only orbit representatives): pairs (root index, coefficient).
    pub fn root_gen_coeffs_for(&self, root: usize, k: i64) -> Vec<(usize, Complex64)> {
        let (oid, pos) = self.twist.orbit_of_root[root];
        let orbit = &self.twist.orbits[oid];
        let l = self.l() as f64;
        let scale = orbit.p as f64 / l.sqrt();
        // member m of the orbit of `root` is lambda^m(root) =
        // members[(pos+m) % len]
        (0..orbit.len)
            .map(|m| {
                let idx = orbit.members[(pos + m) % orbit.len];
                (idx, e2pi_re(m as f64 * k as f64 / l) * scale)
            })
            .collect()
    }

    /// Chevalley coefficients of the canonical generator (orbit rep, k).
    pub fn root_gen_coeffs(&self, oid: usize, k: i64) -> Vec<(usize, Complex64)> {
        self.root_gen_coeffs_for(self.twist.orbits[oid].rep, k)
    }

    pub fn cartan_vec(&self, oid: usize, c: i64) -> Option<&Vec<Complex64>> {
        self.cartan_vecs.get(&(oid, self.norm_k(c)))
    }

    pub fn dual_vec(&self, oid: usize, c: i64) -> Option<&Vec<Complex64>> {
        self.dual_vecs.get(&(oid, self.norm_k(c)))
    }

    /// Dual Cartan vectors of the grade-0 layer restricted to the invariant
    /// subalgebra (the coordinate directions for the moduli parameters),
    /// ordered as `twist.invariant_cartan_basis`.
    pub fn invariant_duals(&self) -> Vec<Vec<Complex64>> {
        self.twist
            .cartan_orbits
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.through_affine_node)
            .map(|(oid, _)| self.dual_vecs[&(oid, 0)].clone())
            .collect()
    }

    /// Grade-0 Cartan vectors of the invariant subalgebra, same order.
    pub fn invariant_cartans(&self) -> Vec<Vec<Complex64>> {
        self.twist
            .cartan_orbits
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.through_affine_node)
            .map(|(oid, _)| self.cartan_vecs[&(oid, 0)].clone())
            .collect()
    }

    /// Representation matrix of a generator.
    pub fn rep_matrix(&self, gen: GsGenerator, rep: &Representation) -> CMat {
        match gen {
            GsGenerator::Root { orbit, k } => {
                let mut m = zeros(rep.dim, rep.dim);
                for (idx, coef) in self.root_gen_coeffs(orbit, k) {
                    m = m + rep.root_mats[idx].mapv(|z| z * coef);
                }
                m
            }
            GsGenerator::Cartan { orbit, c } => {
                rep.diagonal_c(self.cartan_vec(orbit, c).expect("cartan generator"))
            }
            GsGenerator::DualCartan { orbit, c } => {
                rep.diagonal_c(self.dual_vec(orbit, c).expect("dual generator"))
            }
        }
    }

    /// Representation matrix of t_root^k for an arbitrary member root.
    pub fn root_matrix_for(&self, root: usize, k: i64, rep: &Representation) -> CMat {
        let mut m = zeros(rep.dim, rep.dim);
        for (idx, coef) in self.root_gen_coeffs_for(root, k) {
            m = m + rep.root_mats[idx].mapv(|z| z * coef);
        }
        m
    }

    /// Bracket of two generators, expanded in Chevalley coordinates and
    /// Fourier-transformed back into GS coordinates.
    pub fn bracket(&self, x: GsGenerator, y: GsGenerator) -> GsElement {
        let cx = self.chevalley_of(x);
        let cy = self.chevalley_of(y);
        let cb = self.chevalley_bracket(&cx, &cy);
        self.to_gs(&cb)
    }

    fn chevalley_of(&self, gen: GsGenerator) -> Chevalley {
        match gen {
            GsGenerator::Root { orbit, k } => Chevalley {
                roots: self.root_gen_coeffs(orbit, k).into_iter().collect(),
                diag: vec![c64(0.0, 0.0); self.rs.n],
            },
            GsGenerator::Cartan { orbit, c } => Chevalley {
                roots: HashMap::new(),
                diag: self.cartan_vec(orbit, c).unwrap().clone(),
            },
            GsGenerator::DualCartan { orbit, c } => Chevalley {
                roots: HashMap::new(),
                diag: self.dual_vec(orbit, c).unwrap().clone(),
            },
        }
    }

    fn chevalley_bracket(&self, x: &Chevalley, y: &Chevalley) -> Chevalley {
        let n = self.rs.n;
        let mut roots: HashMap<usize, Complex64> = HashMap::new();
        let mut diag = vec![c64(0.0, 0.0); n];
        // root-root
        for (&a, &ca) in &x.roots {
            for (&b, &cb) in &y.roots {
                match self.rs.bracket_roots(a, b) {
                    RootBracket::Zero => {}
                    RootBracket::Root(sign, s) => {
                        *roots.entry(s).or_insert_with(|| c64(0.0, 0.0)) +=
                            ca * cb * sign as f64;
                    }
                    RootBracket::Cartan(r) => {
                        let root = self.rs.roots[r];
                        diag[root.i] += ca * cb;
                        diag[root.j] -= ca * cb;
                    }
                }
            }
        }
        // diag-root and root-diag
        let pair = |d: &[Complex64], ridx: usize| -> Complex64 {
            let r = self.rs.roots[ridx];
            d[r.i] - d[r.j]
        };
        for (&b, &cb) in &y.roots {
            let w = pair(&x.diag, b);
            if w.norm() > 0.0 {
                *roots.entry(b).or_insert_with(|| c64(0.0, 0.0)) += w * cb;
            }
        }
        for (&a, &ca) in &x.roots {
            let w = pair(&y.diag, a);
            if w.norm() > 0.0 {
                *roots.entry(a).or_insert_with(|| c64(0.0, 0.0)) -= w * ca;
            }
        }
        Chevalley { roots, diag }
    }

    fn to_gs(&self, ch: &Chevalley) -> GsElement {
        let l = self.l();
        let lf = l as f64;
        let mut out = GsElement::default();
        // root part: inverse Fourier per orbit
        let mut per_orbit: HashMap<usize, Vec<Complex64>> = HashMap::new();
        for (&ridx, &coef) in &ch.roots {
            let (oid, pos) = self.twist.orbit_of_root[ridx];
            let len = self.twist.orbits[oid].len;
            per_orbit
                .entry(oid)
                .or_insert_with(|| vec![c64(0.0, 0.0); len])[pos] += coef;
        }
        for (oid, vals) in per_orbit {
            let orbit = &self.twist.orbits[oid];
            let scale = orbit.p as f64 / lf.sqrt();
            for &k in &orbit.fourier {
                let mut acc = c64(0.0, 0.0);
                for (m, &v) in vals.iter().enumerate() {
                    acc += v * e2pi_re(-(m as f64) * k as f64 / lf);
                }
                let coef = acc / (scale * orbit.len as f64);
                if coef.norm() > 1e-13 {
                    out.root.insert((oid, k), coef);
                }
            }
        }
        // Cartan part via duality: coefficient of h_a^c is (x, S_a^{-c})
        if ch.diag.iter().any(|d| d.norm() > 1e-15) {
            for &(oid, c) in &self.cartan_family {
                let dual = &self.dual_vecs[&(oid, self.norm_k(-c))];
                let coef = bilinear_diag(&ch.diag, dual);
                if coef.norm() > 1e-13 {
                    out.cartan.insert((oid, c), coef);
                }
            }
        }
        out
    }

    /// Split Casimir on V_a (x) V_c: the root sum runs over orbit
    /// representatives with weight |alpha|^2 / (2 p_alpha), the Cartan part
    /// is the canonical element of the dual families. Independent of the
    /// twist order used to assemble it.
    pub fn casimir_split(&self, rep_a: &Representation, rep_c: &Representation) -> CMat {
        let mut total = zeros(rep_a.dim * rep_c.dim, rep_a.dim * rep_c.dim);
        for &(oid, k) in &self.root_family {
            let orbit = &self.twist.orbits[oid];
            let rep_root = orbit.rep;
            let neg = self.rs.roots[rep_root].negated();
            let neg_idx = self.rs.root_index(&neg).unwrap();
            let weight = self.rs.norm_sq(rep_root) as f64 / (2.0 * orbit.p as f64);
            let left = self.root_matrix_for(rep_root, k, rep_a);
            let right = self.root_matrix_for(neg_idx, -k, rep_c);
            total = total + kron(&left, &right).mapv(|z| z * weight);
        }
        for &(oid, c) in &self.cartan_family {
            let s = rep_a.diagonal_c(&self.dual_vecs[&(oid, c)]);
            let h = rep_c.diagonal_c(&self.cartan_vecs[&(oid, self.norm_k(-c))]);
            total = total + kron(&s, &h);
        }
        total
    }

    /// Formula phases of the adjoint actions on generators: returns
    /// (Ad_Lambda phase, Ad_Q phase), with the moduli element `u` given as a
    /// complex diagonal vector.
    pub fn adjoint_phases(
        &self,
        u_diag: &[Complex64],
        gen: GsGenerator,
    ) -> (Complex64, Complex64) {
        let l = self.l() as f64;
        match gen {
            GsGenerator::Root { orbit, k } => {
                let rep_root = self.rs.roots[self.twist.orbits[orbit].rep];
                let u_pair = u_diag[rep_root.i] - u_diag[rep_root.j];
                let kappa_pair =
                    rat_to_f64(self.twist.kappa[rep_root.i] - self.twist.kappa[rep_root.j]);
                let lam = (Complex64::i()
                    * 2.0
                    * std::f64::consts::PI
                    * (u_pair - k as f64 / l))
                    .exp();
                (lam, e2pi_re(kappa_pair))
            }
            GsGenerator::Cartan { orbit: _, c } | GsGenerator::DualCartan { orbit: _, c } => {
                (e2pi_re(-(c as f64) / l), c64(1.0, 0.0))
            }
        }
    }

    /// Pairing of a complex diagonal with a root.
    pub fn pair_diag(&self, diag: &[Complex64], root: usize) -> Complex64 {
        let r = self.rs.roots[root];
        diag[r.i] - diag[r.j]
    }

    /// Gram matrix of the invariant grade-0 Cartan layer.
    pub fn invariant_gram(&self) -> Vec<Vec<Complex64>> {
        let basis = self.invariant_cartans();
        basis
            .iter()
            .map(|a| basis.iter().map(|b| bilinear_diag(a, b)).collect())
            .collect()
    }
}

struct Chevalley {
    roots: HashMap<usize, Complex64>,
    diag: Vec<Complex64>,
}

pub fn rat_vec_to_c64(v: &[Rat]) -> Vec<Complex64> {
    v.iter().map(|r| c64(rat_to_f64(*r), 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{build_root_system, build_twist, defining_rep, Series};
    use crate::linalg::{commutator, max_abs};

    fn setup(rank: usize, l: u32) -> (RootSystem, TwistData, GsBasis) {
        let rs = build_root_system(Series::A, rank).unwrap();
        let tw = build_twist(&rs, l, 1).unwrap();
        let gs = build_gs(&rs, &tw).unwrap();
        (rs, tw, gs)
    }

    #[test]
    fn sl2_l2_is_pauli_triple() {
        let (rs, _tw, gs) = setup(1, 2);
        let rep = defining_rep(&rs).unwrap();
        // t^0 = (E+F)/sqrt(2), t^1 = (E-F)/sqrt(2)
        let t0 = gs.rep_matrix(GsGenerator::Root { orbit: 0, k: 0 }, &rep);
        let t1 = gs.rep_matrix(GsGenerator::Root { orbit: 0, k: 1 }, &rep);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((t0[(0, 1)] - c64(s, 0.0)).norm() < 1e-14);
        assert!((t0[(1, 0)] - c64(s, 0.0)).norm() < 1e-14);
        assert!((t1[(0, 1)] - c64(s, 0.0)).norm() < 1e-14);
        assert!((t1[(1, 0)] + c64(s, 0.0)).norm() < 1e-14);
        // single Cartan generator sqrt(2) H
        assert_eq!(gs.cartan_family.len(), 1);
        let (oid, c) = gs.cartan_family[0];
        assert_eq!(c, 1);
        let h = gs.rep_matrix(GsGenerator::Cartan { orbit: oid, c }, &rep);
        let r2 = 2.0f64.sqrt();
        assert!((h[(0, 0)] - c64(r2, 0.0)).norm() < 1e-14);
        assert!((h[(1, 1)] + c64(r2, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn untwisted_basis_is_chevalley() {
        let (rs, _tw, gs) = setup(2, 1);
        let rep = defining_rep(&rs).unwrap();
        for (oid, orbit) in gs.twist.orbits.iter().enumerate() {
            let m = gs.rep_matrix(GsGenerator::Root { orbit: oid, k: 0 }, &rep);
            let direct = &rep.root_mats[orbit.rep];
            assert!(max_abs(&(&m - direct)) < 1e-14);
        }
    }

    #[test]
    fn generator_counts() {
        for (rank, l) in [(1, 2), (2, 3), (3, 2), (3, 4)] {
            let (rs, _tw, gs) = setup(rank, l);
            assert_eq!(gs.root_family.len(), rs.roots.len(), "rank {rank} l {l}");
            assert_eq!(gs.cartan_family.len(), rs.rank, "rank {rank} l {l}");
        }
    }

    #[test]
    fn duality_relations() {
        for (rank, l) in [(1, 2), (2, 3), (3, 2), (3, 4), (2, 1)] {
            let (_rs, _tw, gs) = setup(rank, l);
            for &(ao, ac) in &gs.cartan_family {
                let s = &gs.dual_vecs[&(ao, ac)];
                for &(bo, bc) in &gs.cartan_family {
                    let h = &gs.cartan_vecs[&(bo, bc)];
                    let want = if ao == bo && (ac + bc) % gs.l() == 0 {
                        1.0
                    } else {
                        0.0
                    };
                    let got = bilinear_diag(s, h);
                    assert!(
                        (got - want).norm() < 1e-13,
                        "duality failed at ({ao},{ac}) x ({bo},{bc}): {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn grading_closure() {
        // bracket of grade-a and grade-b generators lands in grade a+b mod l
        let (_rs, _tw, gs) = setup(3, 2);
        let l = gs.l();
        let gens: Vec<GsGenerator> = gs
            .root_family
            .iter()
            .map(|&(orbit, k)| GsGenerator::Root { orbit, k })
            .chain(
                gs.cartan_family
                    .iter()
                    .map(|&(orbit, c)| GsGenerator::Cartan { orbit, c }),
            )
            .collect();
        let k_of = |g: &GsGenerator| match g {
            GsGenerator::Root { k, .. } => *k,
            GsGenerator::Cartan { c, .. } | GsGenerator::DualCartan { c, .. } => *c,
        };
        for x in &gens {
            for y in &gens {
                let expected = (k_of(x) + k_of(y)).rem_euclid(l);
                let b = gs.bracket(*x, *y);
                for ((_, k), coef) in &b.root {
                    if coef.norm() > 1e-12 {
                        assert_eq!(k.rem_euclid(l), expected);
                    }
                }
                for ((_, c), coef) in &b.cartan {
                    if coef.norm() > 1e-12 {
                        assert_eq!(c.rem_euclid(l), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn bracket_matches_rep_commutators() {
        for (rank, l) in [(1, 1), (1, 2), (2, 1), (2, 3), (3, 1), (3, 2), (3, 4)] {
            let (rs, _tw, gs) = setup(rank, l);
            let rep = defining_rep(&rs).unwrap();
            let gens: Vec<GsGenerator> = gs
                .root_family
                .iter()
                .map(|&(orbit, k)| GsGenerator::Root { orbit, k })
                .chain(
                    gs.cartan_family
                        .iter()
                        .map(|&(orbit, c)| GsGenerator::Cartan { orbit, c }),
                )
                .collect();
            for x in &gens {
                for y in &gens {
                    let table = gs.bracket(*x, *y);
                    let mut expect = zeros(rep.dim, rep.dim);
                    for (&(oid, k), &coef) in &table.root {
                        expect = expect
                            + gs
                                .rep_matrix(GsGenerator::Root { orbit: oid, k }, &rep)
                                .mapv(|z| z * coef);
                    }
                    for (&(oid, c), &coef) in &table.cartan {
                        expect = expect
                            + gs
                                .rep_matrix(GsGenerator::Cartan { orbit: oid, c }, &rep)
                                .mapv(|z| z * coef);
                    }
                    let got =
                        commutator(&gs.rep_matrix(*x, &rep), &gs.rep_matrix(*y, &rep));
                    assert!(
                        max_abs(&(&got - &expect)) < 1e-12,
                        "bracket table mismatch rank {rank} l {l} {x:?} {y:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn printed_root_bracket_rule() {
        // [t_alpha^a, t_beta^b] = (p/sqrt(l)) omega^{s b} h_alpha^{a+b}
        // when alpha = -lambda^s beta; checked on sl2 l = 2 where the
        // result must be proportional to the single Cartan generator
        let (_rs, _tw, gs) = setup(1, 2);
        let b = gs.bracket(
            GsGenerator::Root { orbit: 0, k: 0 },
            GsGenerator::Root { orbit: 0, k: 1 },
        );
        assert!(b.root.is_empty());
        let coef = b.cartan[&(0, 1)];
        let expected = 1.0 / 2.0f64.sqrt();
        assert!(
            (coef - c64(expected, 0.0)).norm() < 1e-13
                || (coef + c64(expected, 0.0)).norm() < 1e-13,
            "coefficient {coef}"
        );
    }

    #[test]
    fn adjoint_phase_table_matches_conjugation() {
        // conjugating rep matrices by exp(2 pi i kappa) realizes the Ad_Q
        // phases; by exp(2 pi i u) times the shift matrix, the Ad_Lambda ones
        for (rank, l) in [(1, 2), (3, 2), (3, 4), (2, 3)] {
            let (rs, tw, gs) = setup(rank, l);
            let rep = defining_rep(&rs).unwrap();
            let n = rs.n;
            let mut q = zeros(n, n);
            for t in 0..n {
                q[(t, t)] = e2pi_re(rat_to_f64(tw.kappa[t]));
            }
            let qinv = {
                let mut m = zeros(n, n);
                for t in 0..n {
                    m[(t, t)] = c64(1.0, 0.0) / q[(t, t)];
                }
                m
            };
            let mut lam = zeros(n, n);
            for t in 0..n {
                lam[((t + tw.step) % n, t)] = c64(1.0, 0.0);
            }
            let lam_inv = lam.t().to_owned();
            let mut u_diag = vec![c64(0.0, 0.0); n];
            for (idx, b) in tw.invariant_cartan_basis.iter().enumerate() {
                for (t, x) in b.iter().enumerate() {
                    u_diag[t] += c64(0.31 + 0.17 * idx as f64, 0.11) * rat_to_f64(*x);
                }
            }
            let mut eu = zeros(n, n);
            for t in 0..n {
                eu[(t, t)] =
                    (Complex64::i() * 2.0 * std::f64::consts::PI * u_diag[t]).exp();
            }
            let eu_inv = {
                let mut m = zeros(n, n);
                for t in 0..n {
                    m[(t, t)] = c64(1.0, 0.0) / eu[(t, t)];
                }
                m
            };
            let lam_full = eu.dot(&lam);
            let lam_full_inv = lam_inv.dot(&eu_inv);

            let gens: Vec<GsGenerator> = gs
                .root_family
                .iter()
                .map(|&(orbit, k)| GsGenerator::Root { orbit, k })
                .chain(
                    gs.cartan_family
                        .iter()
                        .map(|&(orbit, c)| GsGenerator::Cartan { orbit, c }),
                )
                .collect();
            for g in &gens {
                let m = gs.rep_matrix(*g, &rep);
                let (lam_phase, q_phase) = gs.adjoint_phases(&u_diag, *g);
                let conj_q = q.dot(&m).dot(&qinv);
                assert!(
                    max_abs(&(&conj_q - &m.mapv(|z| z * q_phase))) < 1e-12,
                    "Ad_Q phase mismatch {g:?} rank {rank} l {l}"
                );
                let conj_l = lam_full.dot(&m).dot(&lam_full_inv);
                assert!(
                    max_abs(&(&conj_l - &m.mapv(|z| z * lam_phase))) < 1e-10,
                    "Ad_Lambda phase mismatch {g:?} rank {rank} l {l}"
                );
            }
        }
    }

    #[test]
    fn casimir_invariance_and_sl2_value() {
        let (rs, _tw, gs) = setup(1, 2);
        let rep = defining_rep(&rs).unwrap();
        let c2 = gs.casimir_split(&rep, &rep);
        let gens: Vec<CMat> = gs
            .root_family
            .iter()
            .map(|&(orbit, k)| gs.rep_matrix(GsGenerator::Root { orbit, k }, &rep))
            .chain(
                gs.cartan_family
                    .iter()
                    .map(|&(orbit, c)| gs.rep_matrix(GsGenerator::Cartan { orbit, c }, &rep)),
            )
            .collect();
        let id = crate::linalg::eye(rep.dim);
        for x in &gens {
            let two_site = kron(x, &id) + kron(&id, x);
            assert!(max_abs(&commutator(&c2, &two_site)) < 1e-12);
        }
        // P - Id/2 on the defining square
        let mut expect = zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                expect[(i * 2 + j, j * 2 + i)] += c64(1.0, 0.0);
            }
        }
        for d in 0..4 {
            expect[(d, d)] -= c64(0.5, 0.0);
        }
        assert!(max_abs(&(&c2 - &expect)) < 1e-12);
    }

    #[test]
    fn casimir_independent_of_twist_order() {
        let rs = build_root_system(Series::A, 3).unwrap();
        let rep = defining_rep(&rs).unwrap();
        let mut c2s = Vec::new();
        for l in [1u32, 2, 4] {
            let tw = build_twist(&rs, l, 1).unwrap();
            let gs = build_gs(&rs, &tw).unwrap();
            c2s.push(gs.casimir_split(&rep, &rep));
        }
        for pair in c2s.windows(2) {
            assert!(max_abs(&(&pair[0] - &pair[1])) < 1e-12);
        }
    }

    #[test]
    fn gs_family_spans_the_algebra() {
        let (rs, _tw, gs) = setup(2, 3);
        let rep = defining_rep(&rs).unwrap();
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        for &(orbit, k) in &gs.root_family {
            rows.push(
                gs.rep_matrix(GsGenerator::Root { orbit, k }, &rep)
                    .iter()
                    .copied()
                    .collect(),
            );
        }
        for &(orbit, c) in &gs.cartan_family {
            rows.push(
                gs.rep_matrix(GsGenerator::Cartan { orbit, c }, &rep)
                    .iter()
                    .copied()
                    .collect(),
            );
        }
        let rank = numeric_rank(&mut rows);
        assert_eq!(rank, rs.roots.len() + rs.rank);
    }

    fn numeric_rank(rows: &mut Vec<Vec<Complex64>>) -> usize {
        let mut rank = 0;
        let cols = rows[0].len();
        let mut used = vec![false; rows.len()];
        for col in 0..cols {
            let mut best = None;
            let mut best_norm = 1e-9;
            for (r, row) in rows.iter().enumerate() {
                if !used[r] && row[col].norm() > best_norm {
                    best = Some(r);
                    best_norm = row[col].norm();
                }
            }
            let Some(pivot) = best else { continue };
            used[pivot] = true;
            rank += 1;
            let pval = rows[pivot][col];
            let prow: Vec<Complex64> = rows[pivot].iter().map(|z| z / pval).collect();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != pivot && !used[r] && row[col].norm() > 0.0 {
                    let factor = row[col];
                    for (x, p) in row.iter_mut().zip(&prow) {
                        *x -= factor * p;
                    }
                }
            }
        }
        rank
    }
}
