//! The classical dynamical elliptic r-matrix and its heat counterpart `f` on
//! tensor products of representations.
//!
//! The root part sums over orbit representatives of the diagram automorphism
//! with weight `|alpha|^2 / (2 p_alpha)` and coefficient `phi_alpha^k`; the
//! Cartan part attaches `E1(z)` (grade 0) and `phi(c/l, z)` (grade c) to the
//! canonical elements of the dual Cartan layers. With this normalization the
//! residue at `z = 0` is the split Casimir; at `l = 1` the matrix is the
//! dynamical r-matrix on the full Cartan, and at `l = N` (for `sl(N)`) it is
//! the non-dynamical elliptic r-matrix.
//!
//! The moduli derivative entering the dynamical Yang-Baxter equation is
//! `[d^a, r^{bc}] = l * sum_g h_g^{0,a} (d/du_g) r^{bc}`; coordinates default
//! to the basis `w_g = S_g^0 / l` (dual Cartan layer scaled by `1/l`), which
//! makes the combination the canonical pairing between the invariant Cartan
//! and its dual. The simple-coroot alternative is kept behind
//! [`UCoordinates::Coroot`].

use crate::elliptic::{e2pi, EllipticContext, EllipticError, Tau, TwistShift, TWO_PI};
use crate::gs::GsBasis;
use crate::lie::{rat_to_f64, Representation};
use crate::linalg::{commutator, embed, eye, kron, operator_norm, zeros, CMat};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RMatrixError {
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("moduli point has {got} coordinates, the invariant Cartan has dimension {want}")]
    CoordinateCount { got: usize, want: usize },
    #[error("dynamical twist matrix must be antisymmetric")]
    TwistNotAntisymmetric,
    #[error("sites {0} and {1} must differ")]
    CoincidentSites(usize, usize),
}

pub type Result<T> = std::result::Result<T, RMatrixError>;

#[inline]
fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Coordinate basis for the moduli parameters `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UCoordinates {
    /// w_g = S_g^0 / l: the scaled dual basis of the invariant Cartan layer.
    #[default]
    DualScaled,
    /// w_g = simple coroots of the invariant subalgebra.
    Coroot,
}

/// A point of the moduli space: coordinates over the invariant Cartan in the
/// chosen basis, together with the modular parameter.
#[derive(Debug, Clone)]
pub struct ModuliPoint {
    pub u: Vec<Complex64>,
    pub tau: Tau,
}

/// Two-site tensor value.
#[derive(Debug, Clone)]
pub struct TwoSiteTensor {
    pub dim_a: usize,
    pub dim_c: usize,
    pub mat: CMat,
}

/// Which kernel the assembly attaches to each generator pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// phi-coefficients: the r-matrix.
    R,
    /// analytic z-derivative of R.
    DzR,
    /// derivative of R along a moduli coordinate.
    DuR(usize),
    /// second moduli derivative.
    DuDuR(usize, usize),
    /// f-coefficients: the heat counterpart.
    F,
    /// analytic z-derivative of F (equals 2 pi i times the tau-derivative of
    /// R by the heat identity).
    DzF,
    /// moduli derivative of F.
    DuF(usize),
    /// diagonal (z = 0) limit of F.
    FDiag,
    /// moduli derivative of the diagonal limit.
    DuFDiag(usize),
}

/// Evaluator bound to a GS basis and a modular parameter.
pub struct Evaluator<'a> {
    pub gs: &'a GsBasis,
    pub ctx: EllipticContext,
    pub u_basis: UCoordinates,
    /// constant antisymmetric dynamical twist over the invariant dual basis,
    /// added to the R kernel as sum A_{gd} S_g^0 (x) S_d^0
    dynamical_twist: Option<Vec<Vec<Complex64>>>,
    /// coordinate direction vectors (diagonals)
    w_basis: Vec<Vec<Complex64>>,
    /// invariant Cartan generators h_g^0 (diagonals)
    invariant_cartans: Vec<Vec<Complex64>>,
    /// invariant dual generators S_g^0 (diagonals)
    invariant_duals: Vec<Vec<Complex64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(gs: &'a GsBasis, tau: Tau) -> Result<Self> {
        Self::with_options(gs, tau, UCoordinates::default())
    }

    pub fn with_options(gs: &'a GsBasis, tau: Tau, u_basis: UCoordinates) -> Result<Self> {
        let ctx = EllipticContext::new(tau)?;
        let invariant_duals = gs.invariant_duals();
        let invariant_cartans = gs.invariant_cartans();
        let w_basis = match u_basis {
            UCoordinates::DualScaled => invariant_duals
                .iter()
                .map(|v| {
                    let l = gs.l() as f64;
                    v.iter().map(|z| z / l).collect()
                })
                .collect(),
            UCoordinates::Coroot => gs
                .twist
                .invariant_simple_coroots
                .iter()
                .map(|v| v.iter().map(|r| c64(rat_to_f64(*r), 0.0)).collect())
                .collect(),
        };
        Ok(Evaluator {
            gs,
            ctx,
            u_basis,
            dynamical_twist: None,
            w_basis,
            invariant_cartans,
            invariant_duals,
        })
    }

    /// Install a constant antisymmetric dynamical twist
    /// `sum_{g,d} A[g][d] S_g^0 (x) S_d^0`.
    pub fn set_dynamical_twist(&mut self, a: Vec<Vec<Complex64>>) -> Result<()> {
        let dim = self.moduli_dim();
        if a.len() != dim || a.iter().any(|row| row.len() != dim) {
            return Err(RMatrixError::TwistNotAntisymmetric);
        }
        for g in 0..dim {
            for d in 0..dim {
                if (a[g][d] + a[d][g]).norm() > 1e-12 {
                    return Err(RMatrixError::TwistNotAntisymmetric);
                }
            }
        }
        self.dynamical_twist = Some(a);
        Ok(())
    }

    pub fn clear_dynamical_twist(&mut self) {
        self.dynamical_twist = None;
    }

    pub fn moduli_dim(&self) -> usize {
        self.w_basis.len()
    }

    pub fn invariant_cartan(&self, g: usize) -> &Vec<Complex64> {
        &self.invariant_cartans[g]
    }

    pub fn invariant_dual(&self, g: usize) -> &Vec<Complex64> {
        &self.invariant_duals[g]
    }

    pub fn w_direction(&self, g: usize) -> &Vec<Complex64> {
        &self.w_basis[g]
    }

    /// The moduli element as a complex diagonal: u = sum u_g w_g.
    pub fn u_diag(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        if u.len() != self.moduli_dim() {
            return Err(RMatrixError::CoordinateCount {
                got: u.len(),
                want: self.moduli_dim(),
            });
        }
        let n = self.gs.rs.n;
        let mut diag = vec![c64(0.0, 0.0); n];
        for (coef, w) in u.iter().zip(&self.w_basis) {
            for (d, x) in diag.iter_mut().zip(w) {
                *d += coef * x;
            }
        }
        Ok(diag)
    }

    /// Coordinates of a diagonal vector of the invariant Cartan in the
    /// w-basis.
    pub fn coords_of_diag(&self, diag: &[Complex64]) -> Vec<Complex64> {
        let dim = self.moduli_dim();
        let mut m = vec![vec![c64(0.0, 0.0); dim]; dim];
        let mut rhs = vec![c64(0.0, 0.0); dim];
        for d in 0..dim {
            for g in 0..dim {
                m[d][g] = self.w_basis[g]
                    .iter()
                    .zip(&self.invariant_cartans[d])
                    .map(|(a, b)| a * b)
                    .sum();
            }
            rhs[d] = diag
                .iter()
                .zip(&self.invariant_cartans[d])
                .map(|(a, b)| a * b)
                .sum();
        }
        solve_small(&m, &rhs)
    }

    fn kappa_pair(&self, root: usize) -> f64 {
        let r = self.gs.rs.roots[root];
        rat_to_f64(self.gs.twist.kappa[r.i] - self.gs.twist.kappa[r.j])
    }

    /// <u + kappa*tau, root> from the diagonal form of u.
    pub fn pairing(&self, u_diag: &[Complex64], root: usize) -> Complex64 {
        self.gs.pair_diag(u_diag, root) + self.ctx.tau() * self.kappa_pair(root)
    }

    /// Distance of the closest twisted-kernel argument to the lattice over
    /// all (root orbit, k); used to keep sampled moduli off the discriminant.
    pub fn discriminant_distance(&self, u: &[Complex64]) -> Result<f64> {
        let u_diag = self.u_diag(u)?;
        let mut best = f64::INFINITY;
        for &(oid, k) in &self.gs.root_family {
            let root = self.gs.twist.orbits[oid].rep;
            let arg = self.pairing(&u_diag, root) + k as f64 / self.gs.l() as f64;
            best = best.min(self.ctx.lattice_distance(arg));
        }
        Ok(best)
    }

    fn root_coefficient(
        &self,
        kernel: Kernel,
        root: usize,
        u_diag: &[Complex64],
        z: Complex64,
        k: i64,
    ) -> Result<Complex64> {
        let shift = TwistShift {
            k,
            l: self.gs.twist.l,
        };
        let pair = self.pairing(u_diag, root);
        let kp = c64(self.kappa_pair(root), 0.0);
        let w_pair = |g: usize| self.gs.pair_diag(&self.w_basis[g], root);
        Ok(match kernel {
            Kernel::R => self.ctx.phi_twisted(pair, shift, kp, z)?,
            Kernel::DzR => self.ctx.phi_twisted_dz(pair, shift, kp, z, 1)?,
            Kernel::DuR(g) => w_pair(g) * self.ctx.f_twisted(pair, shift, kp, z)?,
            Kernel::DuDuR(g, d) => {
                w_pair(g) * w_pair(d) * self.ctx.f_twisted_du(pair, shift, kp, z)?
            }
            Kernel::F => self.ctx.f_twisted(pair, shift, kp, z)?,
            Kernel::DzF => self.ctx.f_twisted_dz(pair, shift, kp, z)?,
            Kernel::DuF(g) => w_pair(g) * self.ctx.f_twisted_du(pair, shift, kp, z)?,
            Kernel::FDiag => {
                let arg = self.ctx.shifted_argument(pair, shift);
                -self.ctx.e2(arg)?
            }
            Kernel::DuFDiag(g) => {
                let arg = self.ctx.shifted_argument(pair, shift);
                -w_pair(g) * self.ctx.e2_deriv(arg)?
            }
        })
    }

    fn cartan_coefficient(&self, kernel: Kernel, c: i64, z: Complex64) -> Result<Complex64> {
        let l = self.gs.l() as f64;
        let frac = c64(c as f64 / l, 0.0);
        Ok(match kernel {
            Kernel::R => {
                if c == 0 {
                    self.ctx.e1(z)?
                } else {
                    self.ctx.phi(frac, z)?
                }
            }
            Kernel::DzR => {
                if c == 0 {
                    -self.ctx.e2(z)?
                } else {
                    self.ctx.phi_dz(frac, z)?
                }
            }
            Kernel::F => {
                if c == 0 {
                    self.ctx.rho(z)?
                } else {
                    self.ctx.f_kernel(frac, z)?
                }
            }
            Kernel::DzF => {
                if c == 0 {
                    self.ctx.rho_deriv(z)?
                } else {
                    self.ctx.f_dz(frac, z)?
                }
            }
            Kernel::FDiag => {
                if c == 0 {
                    // rho(z) -> -2 eta1 as z -> 0
                    -2.0 * self.ctx.eta1()
                } else {
                    -self.ctx.e2(frac)?
                }
            }
            Kernel::DuR(_) | Kernel::DuDuR(..) | Kernel::DuF(_) | Kernel::DuFDiag(_) => {
                c64(0.0, 0.0)
            }
        })
    }

    /// Assemble the two-site kernel matrix on `rep_a (x) rep_c`.
    pub fn two_site(
        &self,
        kernel: Kernel,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
    ) -> Result<CMat> {
        let u_diag = self.u_diag(&point.u)?;
        let mut total = zeros(rep_a.dim * rep_c.dim, rep_a.dim * rep_c.dim);
        for &(oid, k) in &self.gs.root_family {
            let orbit = &self.gs.twist.orbits[oid];
            let root = orbit.rep;
            let coeff = self.root_coefficient(kernel, root, &u_diag, z, k)?;
            if coeff.norm() == 0.0 {
                continue;
            }
            let weight = self.gs.rs.norm_sq(root) as f64 / (2.0 * orbit.p as f64);
            let neg = self.gs.rs.roots[root].negated();
            let neg_idx = self.gs.rs.root_index(&neg).unwrap();
            let left = self.gs.root_matrix_for(root, k, rep_a);
            let right = self.gs.root_matrix_for(neg_idx, -k, rep_c);
            total = total + kron(&left, &right).mapv(|v| v * coeff * weight);
        }
        let l = self.gs.l();
        for c in 0..l {
            let coeff = self.cartan_coefficient(kernel, c, z)?;
            if coeff.norm() == 0.0 {
                continue;
            }
            let tensor = self.cartan_grade_tensor(c, rep_a, rep_c);
            total = total + tensor.mapv(|v| v * coeff);
        }
        if kernel == Kernel::R {
            if let Some(a) = &self.dynamical_twist {
                total = total + self.delta_r(a, rep_a, rep_c);
            }
        }
        Ok(total)
    }

    /// Canonical element of the grade-c Cartan layer on `rep_a (x) rep_c`.
    pub fn cartan_grade_tensor(
        &self,
        c: i64,
        rep_a: &Representation,
        rep_c: &Representation,
    ) -> CMat {
        let mut tensor = zeros(rep_a.dim * rep_c.dim, rep_a.dim * rep_c.dim);
        for &(oid, cc) in &self.gs.cartan_family {
            if cc != c {
                continue;
            }
            let s = rep_a.diagonal_c(self.gs.dual_vec(oid, c).unwrap());
            let h = rep_c.diagonal_c(self.gs.cartan_vec(oid, -c).unwrap());
            tensor = tensor + kron(&s, &h);
        }
        tensor
    }

    fn delta_r(
        &self,
        a: &[Vec<Complex64>],
        rep_a: &Representation,
        rep_c: &Representation,
    ) -> CMat {
        let mut out = zeros(rep_a.dim * rep_c.dim, rep_a.dim * rep_c.dim);
        for (g, row) in a.iter().enumerate() {
            for (d, coef) in row.iter().enumerate() {
                if coef.norm() == 0.0 {
                    continue;
                }
                let left = rep_a.diagonal_c(&self.invariant_duals[g]);
                let right = rep_c.diagonal_c(&self.invariant_duals[d]);
                out = out + kron(&left, &right).mapv(|v| v * coef);
            }
        }
        out
    }

    /// r-matrix on `rep_a (x) rep_c`.
    pub fn eval_r(
        &self,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
    ) -> Result<TwoSiteTensor> {
        Ok(TwoSiteTensor {
            dim_a: rep_a.dim,
            dim_c: rep_c.dim,
            mat: self.two_site(Kernel::R, rep_a, rep_c, point, z)?,
        })
    }

    /// f-matrix; `diagonal` selects the z -> 0 limit used on coincident
    /// sites (the argument `z` is ignored there).
    pub fn eval_f(
        &self,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
        diagonal: bool,
    ) -> Result<TwoSiteTensor> {
        let kernel = if diagonal { Kernel::FDiag } else { Kernel::F };
        Ok(TwoSiteTensor {
            dim_a: rep_a.dim,
            dim_c: rep_c.dim,
            mat: self.two_site(kernel, rep_a, rep_c, point, z)?,
        })
    }

    /// Moduli derivative of the r-matrix in coordinate direction `g`.
    pub fn du_r(
        &self,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
        g: usize,
    ) -> Result<TwoSiteTensor> {
        Ok(TwoSiteTensor {
            dim_a: rep_a.dim,
            dim_c: rep_c.dim,
            mat: self.two_site(Kernel::DuR(g), rep_a, rep_c, point, z)?,
        })
    }

    // ---- residual evaluators ----------------------------------------------

    /// Operator norm of the dynamical Yang-Baxter combination on
    /// `V1 (x) V2 (x) V3` with arguments z_i - z_j.
    pub fn cdybe_residual(
        &self,
        reps: [&Representation; 3],
        point: &ModuliPoint,
        zs: [Complex64; 3],
    ) -> Result<f64> {
        let dims = [reps[0].dim, reps[1].dim, reps[2].dim];
        let z12 = zs[0] - zs[1];
        let z13 = zs[0] - zs[2];
        let z23 = zs[1] - zs[2];

        let r12 = embed_pair_matrix(
            &dims,
            0,
            1,
            &self.two_site(Kernel::R, reps[0], reps[1], point, z12)?,
        );
        let r13 = embed_pair_matrix(
            &dims,
            0,
            2,
            &self.two_site(Kernel::R, reps[0], reps[2], point, z13)?,
        );
        let r23 = embed_pair_matrix(
            &dims,
            1,
            2,
            &self.two_site(Kernel::R, reps[1], reps[2], point, z23)?,
        );

        let mut total =
            commutator(&r12, &r13) + commutator(&r12, &r23) + commutator(&r13, &r23);

        // [d^a, r^{bc}] terms for (a, bc) in (1,23), (3,12), (2,31)
        let l = self.gs.l() as f64;
        for g in 0..self.moduli_dim() {
            let h_site = |site: usize| -> CMat {
                let m = reps[site].diagonal_c(&self.invariant_cartans[g]);
                embed(&dims, &[(site, &m)])
            };
            let du23 = embed_pair_matrix(
                &dims,
                1,
                2,
                &self.two_site(Kernel::DuR(g), reps[1], reps[2], point, z23)?,
            );
            let du12 = embed_pair_matrix(
                &dims,
                0,
                1,
                &self.two_site(Kernel::DuR(g), reps[0], reps[1], point, z12)?,
            );
            // r^{31} = -r^{13}
            let du31 = embed_pair_matrix(
                &dims,
                0,
                2,
                &self.two_site(Kernel::DuR(g), reps[0], reps[2], point, z13)?,
            )
            .mapv(|v| -v);
            total = total
                + h_site(0).dot(&du23).mapv(|v| v * l)
                + h_site(2).dot(&du12).mapv(|v| v * l)
                + h_site(1).dot(&du31).mapv(|v| v * l);
        }
        Ok(operator_norm(&total))
    }

    /// Residuals of the lattice quasi-periodicities in z and in the moduli
    /// directions, relative to the operator norm of r.
    pub fn quasiperiodicity_residual(
        &self,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
    ) -> Result<QuasiPeriodicityReport> {
        let n = self.gs.rs.n;
        let base = self.two_site(Kernel::R, rep_a, rep_c, point, z)?;
        let scale = operator_norm(&base).max(1.0);
        let id_c = eye(rep_c.dim);

        // z + 1 against Ad_Q on the first factor
        let shift1 = self.two_site(Kernel::R, rep_a, rep_c, point, z + 1.0)?;
        let kappa_diag: Vec<Complex64> = self
            .gs
            .twist
            .kappa
            .iter()
            .map(|r| c64(rat_to_f64(*r), 0.0))
            .collect();
        let q = exp_diagonal(rep_a, &kappa_diag);
        let qinv = invert_diag(&q);
        let ad_q = kron(&q, &id_c).dot(&base).dot(&kron(&qinv, &id_c));
        let z_period_one = operator_norm(&(&shift1 - &ad_q)) / scale;

        // z + tau against Ad_{exp(-2 pi i u) Lambda_0} minus 2 pi i C_0
        let shift_tau = self.two_site(Kernel::R, rep_a, rep_c, point, z + self.ctx.tau())?;
        let u_diag = self.u_diag(&point.u)?;
        let lam = monomial_automorphism(rep_a, &u_diag, self.gs.twist.step, n);
        let lam_inv = invert_monomial(&lam);
        let ad_l = kron(&lam, &id_c).dot(&base).dot(&kron(&lam_inv, &id_c));
        let c0 = self.cartan_grade_tensor(0, rep_a, rep_c);
        let expected = ad_l - c0.mapv(|v| v * Complex64::i() * TWO_PI);
        let z_period_tau = operator_norm(&(&shift_tau - &expected)) / scale;

        // u-shifts by simple coroots of the invariant subalgebra
        let mut u_coroot = 0.0_f64;
        let mut u_coroot_tau = 0.0_f64;
        for beta in &self.gs.twist.invariant_simple_coroots {
            let beta_c: Vec<Complex64> =
                beta.iter().map(|r| c64(rat_to_f64(*r), 0.0)).collect();
            let (plain, shifted_tau) =
                self.u_shift_residuals(rep_a, rep_c, point, z, &base, &beta_c)?;
            u_coroot = u_coroot.max(plain / scale);
            u_coroot_tau = u_coroot_tau.max(shifted_tau / scale);
        }

        // the coweight-lattice versions
        let mut u_coweight = 0.0_f64;
        let mut u_coweight_tau = 0.0_f64;
        for omega in &self.gs.twist.invariant_fundamental_coweights {
            let omega_c: Vec<Complex64> =
                omega.iter().map(|r| c64(rat_to_f64(*r), 0.0)).collect();
            let (plain, shifted_tau) =
                self.u_shift_residuals(rep_a, rep_c, point, z, &base, &omega_c)?;
            u_coweight = u_coweight.max(plain / scale);
            u_coweight_tau = u_coweight_tau.max(shifted_tau / scale);
        }

        Ok(QuasiPeriodicityReport {
            z_period_one,
            z_period_tau,
            u_coroot,
            u_coroot_tau,
            u_coweight,
            u_coweight_tau,
        })
    }

    /// Absolute residuals of r(u + v) - r(u) and
    /// r(u + tau v) - Ad_{exp(-2 pi i v z)} r(u) for a lattice vector v.
    fn u_shift_residuals(
        &self,
        rep_a: &Representation,
        rep_c: &Representation,
        point: &ModuliPoint,
        z: Complex64,
        base: &CMat,
        v_diag: &[Complex64],
    ) -> Result<(f64, f64)> {
        let id_c = eye(rep_c.dim);
        let coords = self.coords_of_diag(v_diag);
        let shifted: Vec<Complex64> =
            point.u.iter().zip(&coords).map(|(a, b)| a + b).collect();
        let moved = self.two_site(
            Kernel::R,
            rep_a,
            rep_c,
            &ModuliPoint {
                u: shifted,
                tau: point.tau,
            },
            z,
        )?;
        let plain = operator_norm(&(&moved - base));

        let shifted_tau: Vec<Complex64> = point
            .u
            .iter()
            .zip(&coords)
            .map(|(a, b)| a + b * self.ctx.tau())
            .collect();
        let moved_tau = self.two_site(
            Kernel::R,
            rep_a,
            rep_c,
            &ModuliPoint {
                u: shifted_tau,
                tau: point.tau,
            },
            z,
        )?;
        let phase_diag: Vec<Complex64> = v_diag.iter().map(|b| -b * z).collect();
        let g = exp_diagonal(rep_a, &phase_diag);
        let ginv = invert_diag(&g);
        let expected = kron(&g, &id_c).dot(base).dot(&kron(&ginv, &id_c));
        let tau_resid = operator_norm(&(&moved_tau - &expected));
        Ok((plain, tau_resid))
    }
}

/// Quasi-periodicity residuals, all relative to the operator norm of r.
#[derive(Debug, Clone)]
pub struct QuasiPeriodicityReport {
    pub z_period_one: f64,
    pub z_period_tau: f64,
    pub u_coroot: f64,
    pub u_coroot_tau: f64,
    pub u_coweight: f64,
    pub u_coweight_tau: f64,
}

impl QuasiPeriodicityReport {
    pub fn max(&self) -> f64 {
        [
            self.z_period_one,
            self.z_period_tau,
            self.u_coroot,
            self.u_coroot_tau,
            self.u_coweight,
            self.u_coweight_tau,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Embed a matrix acting on sites (a, b), a != b, into the full product.
/// The matrix is indexed with a's space as the slower index.
pub fn embed_pair_matrix(dims: &[usize], a: usize, b: usize, mat: &CMat) -> CMat {
    assert_ne!(a, b);
    let total: usize = dims.iter().product();
    let mut out = zeros(total, total);
    let strides: Vec<usize> = {
        let mut s = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    };
    let others: Vec<usize> = (0..dims.len()).filter(|&s| s != a && s != b).collect();
    let rest_total: usize = others.iter().map(|&s| dims[s]).product();
    for rest in 0..rest_total {
        let mut rem = rest;
        let mut base_index = 0usize;
        for &s in &others {
            let d = dims[s];
            base_index += (rem % d) * strides[s];
            rem /= d;
        }
        for ia in 0..dims[a] {
            for ib in 0..dims[b] {
                let row = base_index + ia * strides[a] + ib * strides[b];
                for ja in 0..dims[a] {
                    for jb in 0..dims[b] {
                        let v = mat[(ia * dims[b] + ib, ja * dims[b] + jb)];
                        if v != c64(0.0, 0.0) {
                            let col = base_index + ja * strides[a] + jb * strides[b];
                            out[(row, col)] += v;
                        }
                    }
                }
            }
        }
    }
    out
}

fn invert_diag(m: &CMat) -> CMat {
    let n = m.dim().0;
    let mut out = zeros(n, n);
    for i in 0..n {
        out[(i, i)] = c64(1.0, 0.0) / m[(i, i)];
    }
    out
}

/// exp(2 pi i * x) in a representation, for a diagonal element x.
fn exp_diagonal(rep: &Representation, diag: &[Complex64]) -> CMat {
    let m = rep.diagonal_c(diag);
    let n = rep.dim;
    let mut out = zeros(n, n);
    for i in 0..n {
        out[(i, i)] = (Complex64::i() * TWO_PI * m[(i, i)]).exp();
    }
    out
}

/// Matrix of exp(-2 pi i u) Lambda_0 in a monomial representation: the
/// diagram rotation permutes the weight basis, read off from the action on
/// weight vectors.
fn monomial_automorphism(
    rep: &Representation,
    u_diag: &[Complex64],
    step: usize,
    n: usize,
) -> CMat {
    let dim = rep.dim;
    let mut perm = vec![usize::MAX; dim];
    for (v, w) in rep.weights.iter().enumerate() {
        let mut rotated = vec![0i64; n];
        for t in 0..n {
            rotated[(t + step) % n] = w[t];
        }
        let target = rep
            .weights
            .iter()
            .position(|x| x == &rotated)
            .expect("monomial representation closed under the rotation");
        perm[v] = target;
    }
    let mut m = zeros(dim, dim);
    let e = rep.diagonal_c(u_diag);
    for v in 0..dim {
        let phase = (-Complex64::i() * TWO_PI * e[(perm[v], perm[v])]).exp();
        m[(perm[v], v)] = phase;
    }
    m
}

fn invert_monomial(m: &CMat) -> CMat {
    let n = m.dim().0;
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] != c64(0.0, 0.0) {
                out[(j, i)] = c64(1.0, 0.0) / m[(i, j)];
            }
        }
    }
    out
}

fn solve_small(m: &[Vec<Complex64>], rhs: &[Complex64]) -> Vec<Complex64> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let mut a: Vec<Vec<Complex64>> = m
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
            .max_by(|&r, &s| a[r][col].norm().partial_cmp(&a[s][col].norm()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for x in a[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f.norm() > 0.0 {
                    for c in col..=n {
                        let sub = f * a[col][c];
                        a[r][c] -= sub;
                    }
                }
            }
        }
    }
    (0..n).map(|r| a[r][n]).collect()
}
