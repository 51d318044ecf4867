//! Theta function, the Kronecker kernel `phi` and its twisted variants.
//!
//! Everything is built from one theta series,
//!
//! ```text
//! theta(z|tau) = q^(1/8) * sum_n (-1)^n exp(pi*i*(n(n+1)*tau + (2n+1)*z)),
//! q = exp(2*pi*i*tau),
//! ```
//!
//! an odd entire function with simple zeros on the period lattice Z + tau*Z
//! and quasi-periodicities `theta(z+1) = -theta(z)`,
//! `theta(z+tau) = -q^(-1/2) exp(-2*pi*i*z) theta(z)`. The series is truncated
//! symmetrically; the dropped tail is controlled by the context tolerance.
//!
//! Derived kernels:
//!
//! * `E1 = theta'/theta`, `E2 = -E1'`,
//! * `eta1 = -theta'''(0) / (6 theta'(0))`, `wp = E2 - 2*eta1` (Weierstrass),
//! * `rho = (E1^2 - wp)/2`,
//! * `phi(u,z) = theta(u+z) theta'(0) / (theta(u) theta(z))`,
//! * `f(u,z) = d/du phi(u,z) = phi(u,z) (E1(u+z) - E1(u))`.
//!
//! The twisted variants shift the first argument of `phi`/`f` by
//! `k/l` plus a moduli pairing and decorate with the exponential prefactor
//! `exp(2*pi*i*<kappa,alpha>*z)`; they are the coefficient functions of the
//! dynamical r-matrix and of the heat part of the KZB connection.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// exp(2*pi*i*x)
#[inline]
pub fn e2pi(x: Complex64) -> Complex64 {
    (Complex64::i() * TWO_PI * x).exp()
}

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error("modular parameter must lie in the upper half-plane, got {0}")]
    InvalidTau(Complex64),
    #[error("theta series needs more than {max_terms} terms at Im tau = {im_tau:.3e}")]
    NonConvergence { max_terms: usize, im_tau: f64 },
    #[error("{which} argument {arg} is within {radius:.1e} of the period lattice")]
    Pole {
        which: &'static str,
        arg: Complex64,
        radius: f64,
    },
    #[error("derivative order {0} not supported (max {1})")]
    DerivativeOrder(usize, usize),
    #[error("failed to draw a pole-free sample after {0} attempts")]
    Sampling(usize),
}

pub type Result<T> = std::result::Result<T, EllipticError>;

/// Modular parameter, constrained to the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tau(Complex64);

impl Tau {
    pub fn new(value: Complex64) -> Result<Self> {
        if value.im > 0.0 && value.is_finite() {
            Ok(Tau(value))
        } else {
            Err(EllipticError::InvalidTau(value))
        }
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// A point at which the kernels are evaluated: `u` is the direction with the
/// lattice quasi-periodicity in the first slot of `phi`, `z` the curve
/// coordinate.
#[derive(Debug, Clone, Copy)]
pub struct KernelPoint {
    pub u: Complex64,
    pub z: Complex64,
}

/// Residue class k mod l entering the twisted kernels as a `k/l` shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwistShift {
    pub k: i64,
    pub l: u32,
}

impl TwistShift {
    pub fn fraction(&self) -> f64 {
        self.k as f64 / self.l as f64
    }

    pub fn is_zero_class(&self) -> bool {
        self.k.rem_euclid(self.l as i64) == 0
    }
}

/// Evaluation context: modular parameter, nome, truncation control and the
/// pole exclusion radius. Immutable after construction; all evaluation
/// methods are pure.
#[derive(Debug, Clone)]
pub struct EllipticContext {
    tau: Tau,
    q: Complex64,
    series_tolerance: f64,
    max_terms: usize,
    pole_radius: f64,
    /// theta'(0), cached at construction.
    dtheta0: Complex64,
    /// eta1 = -theta'''(0)/(6 theta'(0)), cached at construction.
    eta1: Complex64,
}

pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_MAX_TERMS: usize = 512;
pub const DEFAULT_POLE_RADIUS: f64 = 1e-4;
const MAX_DERIV_ORDER: usize = 4;

impl EllipticContext {
    pub fn new(tau: Tau) -> Result<Self> {
        Self::with_options(tau, DEFAULT_SERIES_TOLERANCE, DEFAULT_MAX_TERMS, DEFAULT_POLE_RADIUS)
    }

    pub fn with_options(
        tau: Tau,
        series_tolerance: f64,
        max_terms: usize,
        pole_radius: f64,
    ) -> Result<Self> {
        assert!(series_tolerance > 0.0, "series tolerance must be positive");
        assert!(max_terms > 0, "max_terms must be positive");
        let q = e2pi(tau.value());
        debug_assert!(q.norm() < 1.0);
        let mut ctx = EllipticContext {
            tau,
            q,
            series_tolerance,
            max_terms,
            pole_radius,
            dtheta0: c64(0.0, 0.0),
            eta1: c64(0.0, 0.0),
        };
        let d1 = ctx.theta_series(c64(0.0, 0.0), 1)?;
        let d3 = ctx.theta_series(c64(0.0, 0.0), 3)?;
        ctx.dtheta0 = d1;
        ctx.eta1 = -d3 / (6.0 * d1);
        Ok(ctx)
    }

    pub fn tau(&self) -> Complex64 {
        self.tau.value()
    }

    pub fn nome(&self) -> Complex64 {
        self.q
    }

    pub fn series_tolerance(&self) -> f64 {
        self.series_tolerance
    }

    pub fn pole_radius(&self) -> f64 {
        self.pole_radius
    }

    /// Distance of `z` to the nearest lattice point of Z + tau*Z, measured
    /// after lattice reduction.
    pub fn lattice_distance(&self, z: Complex64) -> f64 {
        let tau = self.tau();
        let m = (z.im / tau.im).round();
        let w = z - tau * m;
        let n = w.re.round();
        let red = w - n;
        // neighbours matter when z sits near a cell boundary
        let mut best = f64::INFINITY;
        for dm in -1..=1 {
            for dn in -1..=1 {
                let cand = red - tau * (dm as f64) - (dn as f64);
                best = best.min(cand.norm());
            }
        }
        best
    }

    fn check_off_lattice(&self, which: &'static str, z: Complex64) -> Result<()> {
        if self.lattice_distance(z) < self.pole_radius {
            Err(EllipticError::Pole {
                which,
                arg: z,
                radius: self.pole_radius,
            })
        } else {
            Ok(())
        }
    }

    /// Raw series sum of the order-th z-derivative of theta. Symmetric
    /// truncation; stops once two consecutive shells fall below the relative
    /// tolerance (the tail is dominated by a geometric series in |q|).
    fn theta_series(&self, z: Complex64, order: usize) -> Result<Complex64> {
        let tau = self.tau.value();
        let ipi = Complex64::i() * std::f64::consts::PI;
        let q8 = (ipi * tau / 4.0).exp();
        let mut sum = c64(0.0, 0.0);
        let mut small_shells = 0usize;
        let mut n = 0i64;
        loop {
            let mut shell = 0.0_f64;
            for &m in &[n, -n - 1] {
                let mf = m as f64;
                let expo = ipi * (mf * (mf + 1.0) * tau + (2.0 * mf + 1.0) * z);
                let mut term = expo.exp();
                if order > 0 {
                    let factor = ipi * (2.0 * mf + 1.0);
                    term *= factor.powu(order as u32);
                }
                if m % 2 != 0 {
                    term = -term;
                }
                sum += term;
                shell += term.norm();
            }
            let scale = sum.norm().max(1.0);
            if shell <= self.series_tolerance * scale {
                small_shells += 1;
                if small_shells >= 2 && n >= 2 {
                    break;
                }
            } else {
                small_shells = 0;
            }
            n += 1;
            if n as usize >= self.max_terms {
                return Err(EllipticError::NonConvergence {
                    max_terms: self.max_terms,
                    im_tau: tau.im,
                });
            }
        }
        Ok(q8 * sum)
    }

    /// theta(z|tau).
    pub fn theta(&self, z: Complex64) -> Result<Complex64> {
        self.theta_series(z, 0)
    }

    /// order-th z-derivative of theta, order in 0..=4.
    pub fn theta_deriv(&self, z: Complex64, order: usize) -> Result<Complex64> {
        if order > MAX_DERIV_ORDER {
            return Err(EllipticError::DerivativeOrder(order, MAX_DERIV_ORDER));
        }
        self.theta_series(z, order)
    }

    /// E1(z) = theta'(z)/theta(z). Simple pole with residue 1 at the lattice.
    pub fn e1(&self, z: Complex64) -> Result<Complex64> {
        self.check_off_lattice("e1", z)?;
        Ok(self.theta_series(z, 1)? / self.theta_series(z, 0)?)
    }

    /// E2(z) = -E1'(z) = (theta'/theta)^2 - theta''/theta.
    pub fn e2(&self, z: Complex64) -> Result<Complex64> {
        self.check_off_lattice("e2", z)?;
        let t0 = self.theta_series(z, 0)?;
        let t1 = self.theta_series(z, 1)?;
        let t2 = self.theta_series(z, 2)?;
        Ok((t1 / t0) * (t1 / t0) - t2 / t0)
    }

    /// E2'(z) = wp'(z), from the differentiated theta series.
    pub fn e2_deriv(&self, z: Complex64) -> Result<Complex64> {
        self.check_off_lattice("e2_deriv", z)?;
        let t0 = self.theta_series(z, 0)?;
        let t1 = self.theta_series(z, 1)?;
        let t2 = self.theta_series(z, 2)?;
        let t3 = self.theta_series(z, 3)?;
        let e1 = t1 / t0;
        // d/dz [e1^2 - t2/t0] = 2 e1 e1' - (t3 t0 - t2 t1)/t0^2
        let e1p = t2 / t0 - e1 * e1;
        Ok(2.0 * e1 * e1p - (t3 / t0 - (t2 / t0) * e1))
    }

    /// The constant eta1 with wp = E2 - 2*eta1.
    pub fn eta1(&self) -> Complex64 {
        self.eta1
    }

    /// Weierstrass wp-function.
    pub fn wp(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.e2(z)? - 2.0 * self.eta1)
    }

    /// rho(z) = (E1(z)^2 - wp(z))/2; even and regular away from the lattice,
    /// with rho(0) = -2*eta1 as the z -> 0 limit.
    pub fn rho(&self, z: Complex64) -> Result<Complex64> {
        let e1 = self.e1(z)?;
        let wp = self.wp(z)?;
        Ok((e1 * e1 - wp) / 2.0)
    }

    /// rho'(z) = E1 E1' - wp'/2.
    pub fn rho_deriv(&self, z: Complex64) -> Result<Complex64> {
        let e1 = self.e1(z)?;
        let e2 = self.e2(z)?;
        let wpd = self.e2_deriv(z)?;
        Ok(-e1 * e2 - wpd / 2.0)
    }

    /// phi(u,z) = theta(u+z) theta'(0) / (theta(u) theta(z)).
    pub fn phi(&self, u: Complex64, z: Complex64) -> Result<Complex64> {
        self.check_off_lattice("phi first", u)?;
        self.check_off_lattice("phi second", z)?;
        let tu = self.theta_series(u, 0)?;
        let tz = self.theta_series(z, 0)?;
        let tuz = self.theta_series(u + z, 0)?;
        Ok(tuz * self.dtheta0 / (tu * tz))
    }

    /// f(u,z) = d/du phi(u,z), by the closed form phi*(E1(u+z) - E1(u)).
    /// At z = 0 this degenerates to -E2(u).
    pub fn f_kernel(&self, u: Complex64, z: Complex64) -> Result<Complex64> {
        if z == c64(0.0, 0.0) {
            return Ok(-self.e2(u)?);
        }
        self.check_off_lattice("f first", u)?;
        self.check_off_lattice("f second", z)?;
        let phi = self.phi(u, z)?;
        let d = self.e1_difference(u + z, u)?;
        Ok(phi * d)
    }

    /// E1(a) - E1(b), tolerating a lattice-close sum a when it cancels: here
    /// both arguments are checked individually since the difference is only
    /// used with off-lattice arguments.
    fn e1_difference(&self, a: Complex64, b: Complex64) -> Result<Complex64> {
        Ok(self.e1(a)? - self.e1(b)?)
    }

    /// d/dz phi(u,z) = phi(u,z) (E1(u+z) - E1(z)).
    pub fn phi_dz(&self, u: Complex64, z: Complex64) -> Result<Complex64> {
        let phi = self.phi(u, z)?;
        Ok(phi * (self.e1(u + z)? - self.e1(z)?))
    }

    /// d^2/du^2 phi = d/du f = f*(E1(u+z)-E1(u)) + phi*(E2(u)-E2(u+z)).
    pub fn f_du(&self, u: Complex64, z: Complex64) -> Result<Complex64> {
        let phi = self.phi(u, z)?;
        let d = self.e1_difference(u + z, u)?;
        let f = phi * d;
        Ok(f * d + phi * (self.e2(u)? - self.e2(u + z)?))
    }

    /// d/dz f(u,z) = (d/dz phi)(E1(u+z)-E1(u)) - phi*E2(u+z).
    pub fn f_dz(&self, u: Complex64, z: Complex64) -> Result<Complex64> {
        let phi = self.phi(u, z)?;
        let d = self.e1_difference(u + z, u)?;
        let dzphi = phi * (self.e1(u + z)? - self.e1(z)?);
        Ok(dzphi * d - phi * self.e2(u + z)?)
    }

    // ---- twisted kernels -------------------------------------------------

    /// Shifted first argument `pairing + k/l` for the twisted kernels.
    pub fn shifted_argument(&self, pairing: Complex64, shift: TwistShift) -> Complex64 {
        pairing + shift.fraction()
    }

    /// phi_alpha^k: `exp(2 pi i kappa_pairing z) * phi(pairing + k/l, z)`.
    ///
    /// `pairing` is `<u + kappa*tau, alpha>`, precomputed by the caller. The
    /// degenerate case (zero shifted argument and zero prefactor pairing)
    /// returns E1(z).
    pub fn phi_twisted(
        &self,
        pairing: Complex64,
        shift: TwistShift,
        kappa_pairing: Complex64,
        z: Complex64,
    ) -> Result<Complex64> {
        let arg = self.shifted_argument(pairing, shift);
        if arg == c64(0.0, 0.0) && kappa_pairing == c64(0.0, 0.0) {
            return self.e1(z);
        }
        if self.lattice_distance(arg) < self.pole_radius {
            return Err(EllipticError::Pole {
                which: "twisted kernel shifted argument",
                arg,
                radius: self.pole_radius,
            });
        }
        Ok(e2pi(kappa_pairing * z) * self.phi(arg, z)?)
    }

    /// f_alpha^k: `exp(2 pi i kappa_pairing z) * f(pairing + k/l, z)`.
    ///
    /// Degenerate case (zero shifted argument, zero prefactor) returns
    /// rho(z); at z = 0 with a nonzero shift it returns -E2(pairing + k/l).
    pub fn f_twisted(
        &self,
        pairing: Complex64,
        shift: TwistShift,
        kappa_pairing: Complex64,
        z: Complex64,
    ) -> Result<Complex64> {
        let arg = self.shifted_argument(pairing, shift);
        if arg == c64(0.0, 0.0) && kappa_pairing == c64(0.0, 0.0) {
            return self.rho(z);
        }
        if self.lattice_distance(arg) < self.pole_radius {
            return Err(EllipticError::Pole {
                which: "twisted kernel shifted argument",
                arg,
                radius: self.pole_radius,
            });
        }
        Ok(e2pi(kappa_pairing * z) * self.f_kernel(arg, z)?)
    }

    /// d/du of f_alpha^k (derivative in the pairing direction).
    pub fn f_twisted_du(
        &self,
        pairing: Complex64,
        shift: TwistShift,
        kappa_pairing: Complex64,
        z: Complex64,
    ) -> Result<Complex64> {
        let arg = self.shifted_argument(pairing, shift);
        Ok(e2pi(kappa_pairing * z) * self.f_du(arg, z)?)
    }

    /// z-derivatives of phi_alpha^k of the given order (0..=3).
    ///
    /// Order 0 coincides with [`Self::phi_twisted`]; order 1 is analytic via
    /// the product rule; higher orders fall back to central finite
    /// differences of the analytic order-1 form with step 1e-5.
    pub fn phi_twisted_dz(
        &self,
        pairing: Complex64,
        shift: TwistShift,
        kappa_pairing: Complex64,
        z: Complex64,
        order: usize,
    ) -> Result<Complex64> {
        match order {
            0 => self.phi_twisted(pairing, shift, kappa_pairing, z),
            1 => {
                let arg = self.shifted_argument(pairing, shift);
                if arg == c64(0.0, 0.0) && kappa_pairing == c64(0.0, 0.0) {
                    // d/dz E1 = -E2
                    return Ok(-self.e2(z)?);
                }
                let pref = e2pi(kappa_pairing * z);
                let phi = self.phi(arg, z)?;
                let dzphi = phi * (self.e1(arg + z)? - self.e1(z)?);
                Ok(pref * (Complex64::i() * TWO_PI * kappa_pairing * phi + dzphi))
            }
            2 | 3 => {
                let h = 1e-5;
                let lower = self.phi_twisted_dz(pairing, shift, kappa_pairing, z - h, order - 1)?;
                let upper = self.phi_twisted_dz(pairing, shift, kappa_pairing, z + h, order - 1)?;
                Ok((upper - lower) / (2.0 * h))
            }
            _ => Err(EllipticError::DerivativeOrder(order, 3)),
        }
    }

    /// d/dz of f_alpha^k, analytic. This equals 2*pi*i times the total
    /// tau-derivative of phi_alpha^k (the heat identity).
    pub fn f_twisted_dz(
        &self,
        pairing: Complex64,
        shift: TwistShift,
        kappa_pairing: Complex64,
        z: Complex64,
    ) -> Result<Complex64> {
        let arg = self.shifted_argument(pairing, shift);
        if arg == c64(0.0, 0.0) && kappa_pairing == c64(0.0, 0.0) {
            return self.rho_deriv(z);
        }
        let pref = e2pi(kappa_pairing * z);
        let f = self.f_kernel(arg, z)?;
        let fdz = self.f_dz(arg, z)?;
        Ok(pref * (Complex64::i() * TWO_PI * kappa_pairing * f + fdz))
    }
}

// ---- identity residuals --------------------------------------------------

/// Seeded sampling plan for the kernel identity suite.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub seed: u64,
    pub samples: usize,
    pub taus: Vec<Complex64>,
    pub twist_orders: Vec<u32>,
    pub series_tolerance: f64,
    /// Minimal lattice distance required of every sampled argument.
    pub margin: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            seed: 42,
            samples: 64,
            taus: vec![c64(0.0, 1.0), c64(0.3, 0.9)],
            twist_orders: vec![1, 2, 3, 4],
            series_tolerance: DEFAULT_SERIES_TOLERANCE,
            margin: 0.05,
        }
    }
}

/// Maximum absolute residual per identity over the sample.
#[derive(Debug, Clone, Default)]
pub struct IdentityReport {
    /// theta quasi-periodicities in z+1 and z+tau.
    pub theta_quasi_periodicity: f64,
    /// phi(u,z) = phi(z,u) and phi(-u,-z) = -phi(u,z).
    pub phi_symmetry: f64,
    /// f against central finite differences of phi in u.
    pub f_finite_difference: f64,
    /// twisted quasi-periodicities of phi_alpha^k in z+1 and z+tau.
    pub twisted_quasi_periodicity: f64,
    /// heat identity 2*pi*i d_tau phi_alpha^k = d_z f_alpha^k
    /// (tau-derivative by fourth-order finite differences).
    pub heat: f64,
    /// four-point Fay identity for the twisted kernels.
    pub fay: f64,
    /// degenerate Fay identity with the rho / E1 limit terms.
    pub fay_degenerate: f64,
    /// same-argument Fay identity with the wp difference.
    pub fay_same_point: f64,
    /// inverse-pair identity: phi f - phi f = wp' at the shifted argument.
    pub fay_inverse_pair: f64,
    /// wp-rho identity with the half d_u f right-hand side.
    pub fay_weierstrass: f64,
}

impl IdentityReport {
    /// Residuals with their tolerances. The exact identities are held to
    /// 1e-9; the finite-difference cross-check of `f` carries the looser
    /// budget of the difference quotient itself.
    pub fn entries(&self) -> Vec<(&'static str, f64, f64)> {
        vec![
            ("theta_quasi_periodicity", self.theta_quasi_periodicity, 1e-9),
            ("phi_symmetry", self.phi_symmetry, 1e-9),
            ("f_finite_difference", self.f_finite_difference, 1e-7),
            (
                "twisted_quasi_periodicity",
                self.twisted_quasi_periodicity,
                1e-9,
            ),
            ("heat", self.heat, 1e-9),
            ("fay", self.fay, 1e-9),
            ("fay_degenerate", self.fay_degenerate, 1e-9),
            ("fay_same_point", self.fay_same_point, 1e-9),
            ("fay_inverse_pair", self.fay_inverse_pair, 1e-9),
            ("fay_weierstrass", self.fay_weierstrass, 1e-9),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.entries().iter().all(|&(_, r, tol)| r < tol)
    }

    /// Worst residual among the exact (non finite-difference) identities.
    pub fn max_exact_residual(&self) -> f64 {
        self.entries()
            .iter()
            .filter(|(name, _, _)| *name != "f_finite_difference")
            .map(|&(_, r, _)| r)
            .fold(0.0, f64::max)
    }
}

struct TwistedData {
    u_pair: Complex64,
    kappa_pair: Complex64,
    shift: TwistShift,
}

impl TwistedData {
    fn pairing(&self, tau: Complex64) -> Complex64 {
        self.u_pair + self.kappa_pair * tau
    }
}

fn draw_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    c64(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

/// Evaluate the full Appendix-style identity suite on a seeded sample and
/// return the worst residual per identity.
pub fn identity_residuals(spec: &SampleSpec) -> Result<IdentityReport> {
    let mut report = IdentityReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for &tau_value in &spec.taus {
        let tau = Tau::new(tau_value)?;
        let ctx = EllipticContext::with_options(
            tau,
            spec.series_tolerance,
            DEFAULT_MAX_TERMS,
            DEFAULT_POLE_RADIUS,
        )?;
        for &l in &spec.twist_orders {
            let per_combo = (spec.samples / (spec.taus.len() * spec.twist_orders.len())).max(4);
            for _ in 0..per_combo {
                run_identity_sample(&ctx, l, &mut rng, spec.margin, &mut report)?;
            }
        }
    }
    Ok(report)
}

fn sample_off_lattice(
    ctx: &EllipticContext,
    rng: &mut ChaCha8Rng,
    margin: f64,
) -> Result<Complex64> {
    for _ in 0..200 {
        let z = draw_complex(rng, 0.45);
        if ctx.lattice_distance(z) >= margin {
            return Ok(z);
        }
    }
    Err(EllipticError::Sampling(200))
}

fn sample_twisted(
    ctx: &EllipticContext,
    rng: &mut ChaCha8Rng,
    l: u32,
    margin: f64,
) -> Result<TwistedData> {
    for _ in 0..200 {
        let data = TwistedData {
            u_pair: draw_complex(rng, 0.4),
            kappa_pair: c64(rng.gen_range(1..(l as i64 * 4 + 1)) as f64 / (4 * l) as f64, 0.0),
            shift: TwistShift {
                k: rng.gen_range(0..l as i64),
                l,
            },
        };
        let arg = ctx.shifted_argument(data.pairing(ctx.tau()), data.shift);
        if ctx.lattice_distance(arg) >= margin {
            return Ok(data);
        }
    }
    Err(EllipticError::Sampling(200))
}

fn run_identity_sample(
    ctx: &EllipticContext,
    l: u32,
    rng: &mut ChaCha8Rng,
    margin: f64,
    report: &mut IdentityReport,
) -> Result<()> {
    let tau = ctx.tau();
    let z = sample_off_lattice(ctx, rng, margin)?;
    let u = sample_off_lattice(ctx, rng, margin)?;

    // theta quasi-periodicities
    let t = ctx.theta(z)?;
    let r1 = (ctx.theta(z + 1.0)? + t).norm();
    let qp = -(ctx.nome().powf(-0.5)) * e2pi(-z) * t;
    let r2 = (ctx.theta(z + tau)? - qp).norm() / qp.norm().max(1.0);
    report.theta_quasi_periodicity = report.theta_quasi_periodicity.max(r1.max(r2));

    // phi symmetry / antisymmetry
    if ctx.lattice_distance(u + z) >= margin {
        let p = ctx.phi(u, z)?;
        let rs = (ctx.phi(z, u)? - p).norm().max((ctx.phi(-u, -z)? + p).norm());
        report.phi_symmetry = report.phi_symmetry.max(rs / p.norm().max(1.0));

        // f vs finite differences of phi in u
        let h = 1e-6;
        let fd = (ctx.phi(u + h, z)? - ctx.phi(u - h, z)?) / (2.0 * h);
        let f = ctx.f_kernel(u, z)?;
        let rf = (f - fd).norm() / f.norm().max(1.0);
        report.f_finite_difference = report.f_finite_difference.max(rf);
    }

    // twisted data for this sample
    let a = sample_twisted(ctx, rng, l, margin)?;
    let b = sample_twisted(ctx, rng, l, margin)?;
    let pa = a.pairing(tau);
    let pb = b.pairing(tau);

    // quasi-periodicity of phi_alpha^k in z: period 1 up to e(kappa_pair),
    // period tau up to e(-u_pair - k/l).
    {
        let base = ctx.phi_twisted(pa, a.shift, a.kappa_pair, z)?;
        let shift1 = ctx.phi_twisted(pa, a.shift, a.kappa_pair, z + 1.0)?;
        let expected1 = e2pi(a.kappa_pair) * base;
        let shift_tau = ctx.phi_twisted(pa, a.shift, a.kappa_pair, z + tau)?;
        let expected_tau = e2pi(-(a.u_pair + a.shift.fraction())) * base;
        let r = (shift1 - expected1)
            .norm()
            .max((shift_tau - expected_tau).norm())
            / base.norm().max(1.0);
        report.twisted_quasi_periodicity = report.twisted_quasi_periodicity.max(r);
    }

    // heat identity: 2 pi i d_tau phi_alpha^k = d_z f_alpha^k. The total
    // tau-derivative moves the kappa*tau part of the pairing as well;
    // fourth-order central differences in tau.
    {
        let h = 1e-3;
        let eval = |dt: f64| -> Result<Complex64> {
            let tau_shifted = Tau::new(tau + dt)?;
            let cs = EllipticContext::with_options(
                tau_shifted,
                ctx.series_tolerance,
                ctx.max_terms,
                ctx.pole_radius,
            )?;
            cs.phi_twisted(a.u_pair + a.kappa_pair * (tau + dt), a.shift, a.kappa_pair, z)
        };
        let d_tau = (-eval(2.0 * h)? + 8.0 * eval(h)? - 8.0 * eval(-h)? + eval(-2.0 * h)?)
            / (12.0 * h);
        let rhs = ctx.f_twisted_dz(pa, a.shift, a.kappa_pair, z)?;
        let lhs = Complex64::i() * TWO_PI * d_tau;
        let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
        report.heat = report.heat.max(r);
    }

    // Four-point Fay identity. Sample three points with pairwise-separated
    // differences; the composite twist (a+b) must also stay off-lattice.
    let sum = TwistedData {
        u_pair: a.u_pair + b.u_pair,
        kappa_pair: a.kappa_pair + b.kappa_pair,
        shift: TwistShift {
            k: a.shift.k + b.shift.k,
            l,
        },
    };
    let psum = sum.pairing(tau);
    let neg_b = TwistedData {
        u_pair: -b.u_pair,
        kappa_pair: -b.kappa_pair,
        shift: TwistShift { k: -b.shift.k, l },
    };
    let pneg_b = neg_b.pairing(tau);
    let (za, zb, zc) = loop {
        let za = sample_off_lattice(ctx, rng, margin)?;
        let zb = sample_off_lattice(ctx, rng, margin)?;
        let zc = sample_off_lattice(ctx, rng, margin)?;
        if ctx.lattice_distance(za - zb) >= margin
            && ctx.lattice_distance(za - zc) >= margin
            && ctx.lattice_distance(zb - zc) >= margin
        {
            break (za, zb, zc);
        }
    };
    let (zab, zac, zbc) = (za - zb, za - zc, zb - zc);
    if ctx.lattice_distance(ctx.shifted_argument(psum, sum.shift)) >= margin {
        let t1 = ctx.phi_twisted(pa, a.shift, a.kappa_pair, zac)?
            * ctx.f_twisted(pb, b.shift, b.kappa_pair, zab)?;
        let t2 = ctx.phi_twisted(pb, b.shift, b.kappa_pair, zab)?
            * ctx.f_twisted(pa, a.shift, a.kappa_pair, zac)?;
        let t3 = ctx.phi_twisted(psum, sum.shift, sum.kappa_pair, zab)?
            * ctx.f_twisted(pa, a.shift, a.kappa_pair, zbc)?;
        let t4 = ctx.phi_twisted(psum, sum.shift, sum.kappa_pair, zac)?
            * ctx.f_twisted(pneg_b, neg_b.shift, neg_b.kappa_pair, zbc)?;
        let scale = t1.norm().max(t2.norm()).max(1.0);
        report.fay = report.fay.max((t1 - t2 + t3 - t4).norm() / scale);
    }

    // Degenerate Fay: the beta -> 0 limit with rho and E1,
    //   phi_a(zac) rho(zab) - E1(zab) f_a(zac)
    // + phi_a(zab) f_a(zbc) - phi_a(zac) rho(zbc) = -(1/2) d_u f_a(zac).
    {
        let pa_phi_ac = ctx.phi_twisted(pa, a.shift, a.kappa_pair, zac)?;
        let pa_phi_ab = ctx.phi_twisted(pa, a.shift, a.kappa_pair, zab)?;
        let fa_ac = ctx.f_twisted(pa, a.shift, a.kappa_pair, zac)?;
        let fa_bc = ctx.f_twisted(pa, a.shift, a.kappa_pair, zbc)?;
        let lhs = pa_phi_ac * ctx.rho(zab)? - ctx.e1(zab)? * fa_ac + pa_phi_ab * fa_bc
            - pa_phi_ac * ctx.rho(zbc)?;
        let rhs = -0.5 * ctx.f_twisted_du(pa, a.shift, a.kappa_pair, zac)?;
        let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
        report.fay_degenerate = report.fay_degenerate.max(r);
    }

    // Same-point identity: phi_a f_b - phi_b f_a = phi_{a+b} (wp_a - wp_b).
    if ctx.lattice_distance(ctx.shifted_argument(psum, sum.shift)) >= margin {
        let z0 = zac;
        let wa = ctx.wp(ctx.shifted_argument(pa, a.shift))?;
        let wb = ctx.wp(ctx.shifted_argument(pb, b.shift))?;
        let lhs = ctx.phi_twisted(pa, a.shift, a.kappa_pair, z0)?
            * ctx.f_twisted(pb, b.shift, b.kappa_pair, z0)?
            - ctx.phi_twisted(pb, b.shift, b.kappa_pair, z0)?
                * ctx.f_twisted(pa, a.shift, a.kappa_pair, z0)?;
        let rhs = ctx.phi_twisted(psum, sum.shift, sum.kappa_pair, z0)? * (wa - wb);
        let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
        report.fay_same_point = report.fay_same_point.max(r);
    }

    // Inverse-pair identity: phi_b f_{-b} - phi_{-b} f_b = wp'(arg_b),
    // independent of z.
    {
        let z0 = zab;
        let lhs = ctx.phi_twisted(pb, b.shift, b.kappa_pair, z0)?
            * ctx.f_twisted(pneg_b, neg_b.shift, neg_b.kappa_pair, z0)?
            - ctx.phi_twisted(pneg_b, neg_b.shift, neg_b.kappa_pair, z0)?
                * ctx.f_twisted(pb, b.shift, b.kappa_pair, z0)?;
        let rhs = ctx.e2_deriv(ctx.shifted_argument(pb, b.shift))?;
        let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
        report.fay_inverse_pair = report.fay_inverse_pair.max(r);
    }

    // wp-rho identity:
    // phi_b wp_b - phi_b rho(z) + E1(z) f_b = +(1/2) d_u f_b.
    {
        let z0 = zac;
        let arg = ctx.shifted_argument(pb, b.shift);
        let phi_b = ctx.phi_twisted(pb, b.shift, b.kappa_pair, z0)?;
        let lhs = phi_b * ctx.wp(arg)? - phi_b * ctx.rho(z0)?
            + ctx.e1(z0)? * ctx.f_twisted(pb, b.shift, b.kappa_pair, z0)?;
        let rhs = 0.5 * ctx.f_twisted_du(pb, b.shift, b.kappa_pair, z0)?;
        let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
        report.fay_weierstrass = report.fay_weierstrass.max(r);
    }

    Ok(())
}

// field access used by the heat check above
impl EllipticContext {
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}
