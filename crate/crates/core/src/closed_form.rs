//! Analytic two-qubit charging curves and the element-wise ODE system they
//! come from.
//!
//! All expressions share the parameterisation `e0 = -sqrt(h² + 5J²/8)`,
//! `p = 4(h + e0)/J`, `A = 1 + p²` and return the stored energy
//! `Tr(H ρ_t)` with `H` the two-site X-matrix of [`two_qubit_x_matrix`].
//! Subtract the `t = 0` value (see [`closed_form_work`]) to get work.
//!
//! The ODE system comes in two flavours. [`OdeForm::Truncated`] keeps
//! only the real parts and replaces every commutator contribution by the
//! `±(J/2)ρ_14`, `±(J/2)ρ_23` population terms; the analytic curves solve
//! this system exactly. [`OdeForm::Complete`] restores the full
//! `-i[H, ρ]` and agrees with the general Lindblad generator.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64, ZERO};
use crate::spin_model::TwoQubitClosedFormParams;
use crate::{Error, Result};

/// Rates below this are treated as zero and routed to [`w_noiseless`].
pub const ZERO_RATE: f64 = 1e-10;

/// The two-site X-shaped Hamiltonian: `h` and `-h` on the outer diagonal,
/// `J/4` on the anti-diagonal.
pub fn two_qubit_x_matrix(h: f64, j: f64) -> CMatrix {
    let q = C64::new(j / 4.0, 0.0);
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(h, 0.0);
    m[(3, 3)] = C64::new(-h, 0.0);
    m[(0, 3)] = q;
    m[(3, 0)] = q;
    m[(1, 2)] = q;
    m[(2, 1)] = q;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitAnalyticInputs {
    pub h: f64,
    pub j: f64,
    pub gamma_abs: f64,
    pub gamma_z: f64,
    pub gamma_x: f64,
    pub p: f64,
    pub e0: f64,
}

impl TwoQubitAnalyticInputs {
    pub fn new(h: f64, j: f64, gamma_abs: f64, gamma_z: f64, gamma_x: f64) -> Result<Self> {
        for (name, v) in [("gamma_abs", gamma_abs), ("gamma_z", gamma_z), ("gamma_x", gamma_x)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} ≥ 0")));
            }
        }
        let TwoQubitClosedFormParams { p, e0 } = TwoQubitClosedFormParams::new(h, j)?;
        Ok(Self { h, j, gamma_abs, gamma_z, gamma_x, p, e0 })
    }

    pub fn a(&self) -> f64 {
        1.0 + self.p * self.p
    }

    pub fn b(&self, t: f64) -> f64 {
        (-4.0 * t * self.gamma_z).exp()
    }

    pub fn a_prime(&self) -> f64 {
        self.j * self.h * self.p * (self.gamma_abs + 2.0 * self.gamma_x)
    }

    pub fn b_prime(&self) -> f64 {
        let (g, x, p) = (self.gamma_abs, self.gamma_x, self.p);
        8.0 * self.h * x * (g + x - p * p * x)
    }

    pub fn c_prime(&self) -> f64 {
        4.0 * self.gamma_abs * self.h * self.gamma_x * self.a()
    }

    pub fn d_prime(&self) -> f64 {
        self.j * self.p * (self.gamma_abs + 2.0 * self.gamma_x) * (2.0 * self.gamma_x - self.h)
    }

    pub fn energy_noiseless(&self, t: f64) -> f64 {
        let (h, j, p, g) = (self.h, self.j, self.p, self.gamma_abs);
        h + (-t * g).exp() * (j * p - 2.0 * h * (2.0 + j * p * t)) / (2.0 * self.a())
    }

    /// Phase-flip curve; requires `gamma_z > 0`.
    pub fn energy_phase_flip(&self, t: f64) -> f64 {
        let (h, j, p, g, z) = (self.h, self.j, self.p, self.gamma_abs, self.gamma_z);
        let a = self.a();
        let b = self.b(t);
        (-t * g).exp() / (4.0 * z * a)
            * (2.0 * j * p * b * z + h * (j * p * (b - 1.0) + 4.0 * z * ((t * g).exp() * a - 2.0)))
    }

    /// Bit-flip curve; requires `gamma_x > 0`.
    pub fn energy_bit_flip(&self, t: f64) -> f64 {
        let (g, x) = (self.gamma_abs, self.gamma_x);
        let pre = 1.0 / (4.0 * x * self.a() * (g + 2.0 * x));
        pre * (-t * (g + 4.0 * x)).exp()
            * (self.a_prime() - self.b_prime() * (2.0 * t * x).exp()
                + (4.0 * t * x).exp() * (self.c_prime() * (t * g).exp() + self.d_prime()))
    }
}

/// Noiseless curve `h + e^{-tΓ}[Jp − 2h(2 + Jpt)]/(2A)`.
pub fn w_noiseless(t: f64, h: f64, j: f64, gamma_abs: f64) -> Result<f64> {
    Ok(TwoQubitAnalyticInputs::new(h, j, gamma_abs, 0.0, 0.0)?.energy_noiseless(t))
}

/// Phase-flip curve. A rate of exactly zero is an error; positive rates
/// below [`ZERO_RATE`] fall back to the noiseless curve.
pub fn w_phase_flip(t: f64, h: f64, j: f64, gamma_abs: f64, gamma_z: f64) -> Result<f64> {
    if gamma_z == 0.0 {
        return Err(Error::UseNoiseless("w_phase_flip"));
    }
    let inputs = TwoQubitAnalyticInputs::new(h, j, gamma_abs, gamma_z, 0.0)?;
    Ok(if gamma_z < ZERO_RATE { inputs.energy_noiseless(t) } else { inputs.energy_phase_flip(t) })
}

/// Bit-flip curve, with the same zero-rate handling as [`w_phase_flip`].
pub fn w_bit_flip(t: f64, h: f64, j: f64, gamma_abs: f64, gamma_x: f64) -> Result<f64> {
    if gamma_x == 0.0 {
        return Err(Error::UseNoiseless("w_bit_flip"));
    }
    let inputs = TwoQubitAnalyticInputs::new(h, j, gamma_abs, 0.0, gamma_x)?;
    Ok(if gamma_x < ZERO_RATE { inputs.energy_noiseless(t) } else { inputs.energy_bit_flip(t) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Z,
    X,
}

/// Energy curve for an optional dephasing direction, routing small rates to
/// the noiseless expression.
pub fn closed_form_energy(
    direction: Option<Direction>,
    t: f64,
    h: f64,
    j: f64,
    gamma_abs: f64,
    gamma_dph: f64,
) -> Result<f64> {
    match direction {
        Some(_) if gamma_dph < 0.0 => Err(Error::InvalidParameter("gamma_dph ≥ 0".into())),
        Some(_) if gamma_dph < ZERO_RATE => w_noiseless(t, h, j, gamma_abs),
        None => w_noiseless(t, h, j, gamma_abs),
        Some(Direction::Z) => w_phase_flip(t, h, j, gamma_abs, gamma_dph),
        Some(Direction::X) => w_bit_flip(t, h, j, gamma_abs, gamma_dph),
    }
}

/// `ΔW(t) = E(t) − E(0)` for [`closed_form_energy`].
pub fn closed_form_work(
    direction: Option<Direction>,
    t: f64,
    h: f64,
    j: f64,
    gamma_abs: f64,
    gamma_dph: f64,
) -> Result<f64> {
    Ok(closed_form_energy(direction, t, h, j, gamma_abs, gamma_dph)?
        - closed_form_energy(direction, 0.0, h, j, gamma_abs, gamma_dph)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageKind {
    PhaseFlip,
    BitFlip,
    XMinusZ,
}

/// First-order coefficient in `t` of the noisy-minus-reference work gap.
pub fn transient_advantage(kind: AdvantageKind, gamma: f64, h: f64, j: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter("gamma ≥ 0".into()));
    }
    let TwoQubitClosedFormParams { p, e0 } = TwoQubitClosedFormParams::new(h, j)?;
    let a = 1.0 + p * p;
    let lambda = j / h;
    Ok(match kind {
        AdvantageKind::PhaseFlip => -8.0 * gamma * (1.0 + e0) / a,
        AdvantageKind::BitFlip => 2.0 * gamma * (1.0 - p * p) / a,
        AdvantageKind::XMinusZ => 2.0 * gamma * (1.0 + lambda * p - p * p) / a,
    })
}

/// Root of `f` on `[lo, hi]` by bisection to absolute width `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidParameter(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// λ at which the bit-flip coefficient changes sign (`p² = 1`), with `h = 1`.
pub fn bit_flip_threshold() -> Result<f64> {
    bisect(|l| transient_advantage(AdvantageKind::BitFlip, 1.0, 1.0, l).unwrap_or(f64::NAN), 0.1, 2.0, 1e-12)
}

/// λ at which `1 + λp − p²` changes sign, with `h = 1`.
pub fn x_minus_z_threshold() -> Result<f64> {
    bisect(|l| transient_advantage(AdvantageKind::XMinusZ, 1.0, 1.0, l).unwrap_or(f64::NAN), 0.1, 2.0, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeForm {
    Truncated,
    Complete,
}

/// Element-wise two-qubit ODE system under absorption on both sites plus
/// dephasing on both sites along `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStateOde {
    pub direction: Direction,
    pub h: f64,
    pub j: f64,
    pub gamma_abs: f64,
    pub gamma_dph: f64,
    pub form: OdeForm,
}

pub type Rho4 = Matrix4<C64>;

impl XStateOde {
    pub fn rhs(&self, r: &Rho4) -> Rho4 {
        match self.form {
            OdeForm::Truncated => self.rhs_truncated(r),
            OdeForm::Complete => self.rhs_complete(r),
        }
    }

    fn rhs_truncated(&self, r: &Rho4) -> Rho4 {
        let re = |i: usize, j: usize| r[(i, j)].re;
        let (g, d, half_j) = (self.gamma_abs, self.gamma_dph, self.j / 2.0);
        let mut o = [[0.0f64; 4]; 4];
        match self.direction {
            Direction::Z => {
                o[0][0] = g * (re(1, 1) + re(2, 2)) - half_j * re(0, 3);
                o[1][1] = g * (-re(1, 1) + re(3, 3)) - half_j * re(1, 2);
                o[2][2] = g * (-re(2, 2) + re(3, 3)) + half_j * re(1, 2);
                o[3][3] = -2.0 * g * re(3, 3) + half_j * re(0, 3);
                o[0][1] = -2.0 * d * re(0, 1) + g * (-re(0, 1) / 2.0 + re(2, 3));
                o[0][2] = -2.0 * d * re(0, 2) + g * (-re(0, 2) / 2.0 + re(1, 3));
                o[0][3] = (-g - 4.0 * d) * re(0, 3);
                o[1][2] = (-g - 4.0 * d) * re(1, 2);
                o[1][3] = (-1.5 * g - 2.0 * d) * re(1, 3);
                o[2][3] = (-1.5 * g - 2.0 * d) * re(2, 3);
            }
            Direction::X => {
                o[0][0] = g * (re(1, 1) + re(2, 2)) + d * (-2.0 * re(0, 0) + re(1, 1) + re(2, 2))
                    - half_j * re(0, 3);
                o[1][1] = g * (-re(1, 1) + re(3, 3)) + d * (re(0, 0) - 2.0 * re(1, 1) + re(3, 3))
                    - half_j * re(1, 2);
                o[2][2] = g * (-re(2, 2) + re(3, 3)) + d * (re(0, 0) - 2.0 * re(2, 2) + re(3, 3))
                    + half_j * re(1, 2);
                o[3][3] = -2.0 * g * re(3, 3) + d * (re(1, 1) + re(2, 2) - 2.0 * re(3, 3))
                    + half_j * re(0, 3);
                o[0][1] = g * (re(2, 3) - re(0, 1) / 2.0) + d * (re(2, 3) - re(0, 1));
                o[0][2] = g * (re(1, 3) - re(0, 2) / 2.0) + d * (re(1, 3) - re(0, 2));
                o[0][3] = -g * re(0, 3) + 2.0 * d * (-re(0, 3) + re(1, 2));
                o[1][2] = -g * re(1, 2) + 2.0 * d * (-re(1, 2) + re(0, 3));
                o[1][3] = (-1.5 * g - d) * re(1, 3) + d * re(0, 2);
                o[2][3] = (-1.5 * g - d) * re(2, 3) + d * re(0, 1);
            }
        }
        Rho4::from_fn(|i, j| {
            let v = if i <= j { o[i][j] } else { o[j][i] };
            C64::new(v, 0.0)
        })
    }

    fn rhs_complete(&self, r: &Rho4) -> Rho4 {
        let (g, d) = (self.gamma_abs, self.gamma_dph);
        let q = self.j / 4.0;
        let diag = [self.h, 0.0, 0.0, -self.h];
        let mut o = Rho4::zeros();

        // -i[H, ρ] for the X-matrix: the anti-diagonal pairs index i with 3 − i.
        for i in 0..4 {
            for j in 0..4 {
                let c = r[(i, j)] * (diag[i] - diag[j]) + (r[(3 - i, j)] - r[(i, 3 - j)]) * q;
                o[(i, j)] = C64::new(c.im, -c.re);
            }
        }

        // Absorption on both sites.
        o[(0, 0)] += (r[(1, 1)] + r[(2, 2)]) * g;
        o[(1, 1)] += (r[(3, 3)] - r[(1, 1)]) * g;
        o[(2, 2)] += (r[(3, 3)] - r[(2, 2)]) * g;
        o[(3, 3)] += r[(3, 3)] * (-2.0 * g);
        o[(0, 1)] += (r[(2, 3)] - r[(0, 1)] * 0.5) * g;
        o[(0, 2)] += (r[(1, 3)] - r[(0, 2)] * 0.5) * g;
        o[(0, 3)] += r[(0, 3)] * -g;
        o[(1, 2)] += r[(1, 2)] * -g;
        o[(1, 3)] += r[(1, 3)] * (-1.5 * g);
        o[(2, 3)] += r[(2, 3)] * (-1.5 * g);

        match self.direction {
            Direction::Z => {
                o[(0, 1)] += r[(0, 1)] * (-2.0 * d);
                o[(0, 2)] += r[(0, 2)] * (-2.0 * d);
                o[(0, 3)] += r[(0, 3)] * (-4.0 * d);
                o[(1, 2)] += r[(1, 2)] * (-4.0 * d);
                o[(1, 3)] += r[(1, 3)] * (-2.0 * d);
                o[(2, 3)] += r[(2, 3)] * (-2.0 * d);
            }
            Direction::X => {
                o[(0, 0)] += (r[(1, 1)] + r[(2, 2)] - r[(0, 0)] * 2.0) * d;
                o[(1, 1)] += (r[(0, 0)] + r[(3, 3)] - r[(1, 1)] * 2.0) * d;
                o[(2, 2)] += (r[(0, 0)] + r[(3, 3)] - r[(2, 2)] * 2.0) * d;
                o[(3, 3)] += (r[(1, 1)] + r[(2, 2)] - r[(3, 3)] * 2.0) * d;
                o[(0, 1)] += (r[(2, 3)] + r[(1, 0)] - r[(0, 1)] * 2.0) * d;
                o[(0, 2)] += (r[(2, 0)] + r[(1, 3)] - r[(0, 2)] * 2.0) * d;
                o[(0, 3)] += (r[(2, 1)] + r[(1, 2)] - r[(0, 3)] * 2.0) * d;
                o[(1, 2)] += (r[(3, 0)] + r[(0, 3)] - r[(1, 2)] * 2.0) * d;
                o[(1, 3)] += (r[(3, 1)] + r[(0, 2)] - r[(1, 3)] * 2.0) * d;
                o[(2, 3)] += (r[(0, 1)] + r[(3, 2)] - r[(2, 3)] * 2.0) * d;
            }
        }

        // Lower triangle off the diagonal: the dissipative parts are the
        // conjugates of the upper ones, and the commutator was filled above.
        for i in 0..4 {
            for j in 0..i {
                let comm = o[(i, j)];
                let upper_total = o[(j, i)];
                let comm_upper = {
                    let c = r[(j, i)] * (diag[j] - diag[i]) + (r[(3 - j, i)] - r[(j, 3 - i)]) * q;
                    C64::new(c.im, -c.re)
                };
                o[(i, j)] = comm + (upper_total - comm_upper).conj();
            }
        }
        o
    }

    /// Fixed-step RK4 from `rho0` to `t`.
    pub fn integrate(&self, rho0: &Rho4, t: f64, dt: f64) -> Rho4 {
        let n = ((t / dt).round() as usize).max(1);
        let dt = t / n as f64;
        let mut r = *rho0;
        for _ in 0..n {
            let k1 = self.rhs(&r);
            let k2 = self.rhs(&(r + k1 * C64::new(dt / 2.0, 0.0)));
            let k3 = self.rhs(&(r + k2 * C64::new(dt / 2.0, 0.0)));
            let k4 = self.rhs(&(r + k3 * C64::new(dt, 0.0)));
            r += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        }
        r
    }
}

/// Free-function form of [`XStateOde::rhs`].
pub fn x_state_ode_rhs(
    direction: Direction,
    rho: &Rho4,
    h: f64,
    j: f64,
    gamma_abs: f64,
    gamma_dph: f64,
    form: OdeForm,
) -> Rho4 {
    XStateOde { direction, h, j, gamma_abs, gamma_dph, form }.rhs(rho)
}

/// `Tr(Hρ)` for a 4×4 state against the X-matrix.
pub fn x_matrix_energy(rho: &Rho4, h: f64, j: f64) -> f64 {
    let hm = two_qubit_x_matrix(h, j);
    let mut acc = ZERO;
    for i in 0..4 {
        for k in 0..4 {
            acc += hm[(i, k)] * rho[(k, i)];
        }
    }
    acc.re
}

pub fn to_rho4(m: &CMatrix) -> Result<Rho4> {
    if m.shape() != (4, 4) {
        return Err(Error::Shape(format!("expected 4x4, got {:?}", m.shape())));
    }
    Ok(Rho4::from_fn(|i, j| m[(i, j)]))
}

pub fn from_rho4(r: &Rho4) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| r[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{ChannelSet, JumpKind, RateSchedule};
    use crate::dynamics::lindblad_generator;
    use crate::spin_model::two_qubit_closed_form_ground;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1.0;
    const J: f64 = 0.5;
    const G: f64 = 0.5;

    fn rho0() -> Rho4 {
        to_rho4(two_qubit_closed_form_ground(H, J).unwrap().1.matrix()).unwrap()
    }

    fn truncated(direction: Direction, d: f64) -> XStateOde {
        XStateOde { direction, h: H, j: J, gamma_abs: G, gamma_dph: d, form: OdeForm::Truncated }
    }

    #[test]
    fn noiseless_start_matches_initial_energy() {
        let e = x_matrix_energy(&rho0(), H, J);
        assert!((w_noiseless(0.0, H, J, G).unwrap() - e).abs() < 1e-15);
        assert_eq!(closed_form_work(None, 0.0, H, J, G, 0.0).unwrap(), 0.0);
        assert!((w_noiseless(200.0, H, J, G).unwrap() - H).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_route_or_fail() {
        assert_eq!(w_phase_flip(1.0, H, J, G, 0.0), Err(Error::UseNoiseless("w_phase_flip")));
        assert_eq!(w_bit_flip(1.0, H, J, G, 0.0), Err(Error::UseNoiseless("w_bit_flip")));
        let wn = w_noiseless(1.0, H, J, G).unwrap();
        assert_eq!(w_phase_flip(1.0, H, J, G, 1e-12).unwrap(), wn);
        assert_eq!(closed_form_energy(Some(Direction::X), 1.0, H, J, G, 0.0).unwrap(), wn);
        assert_eq!(w_noiseless(1.0, H, 0.0, G), Err(Error::PUndefined));
    }

    #[test]
    fn small_rate_limits_approach_noiseless() {
        for t in [0.5, 1.0, 3.0] {
            let wn = w_noiseless(t, H, J, G).unwrap();
            for f in [w_phase_flip, w_bit_flip] {
                let e6 = (f(t, H, J, G, 1e-6).unwrap() - wn).abs();
                let e8 = (f(t, H, J, G, 1e-8).unwrap() - wn).abs();
                assert!(e6 < 1e-5, "{e6}");
                assert!(e8 < 1e-6, "{e8}");
            }
        }
    }

    #[test]
    fn curves_solve_truncated_system() {
        let r0 = rho0();
        for t in [0.5, 1.0, 2.0, 10.0] {
            let wn = x_matrix_energy(&truncated(Direction::Z, 0.0).integrate(&r0, t, 1e-3), H, J);
            assert!((wn - w_noiseless(t, H, J, G).unwrap()).abs() < 1e-8);
            let wz = x_matrix_energy(&truncated(Direction::Z, 0.15).integrate(&r0, t, 1e-3), H, J);
            assert!((wz - w_phase_flip(t, H, J, G, 0.15).unwrap()).abs() < 1e-8);
            let wx = x_matrix_energy(&truncated(Direction::X, 0.15).integrate(&r0, t, 1e-3), H, J);
            assert!((wx - w_bit_flip(t, H, J, G, 0.15).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn transient_slopes_match_curves() {
        let t = 1e-5;
        for j in [0.3, 0.5, 0.7] {
            let g = 0.15;
            let wn = w_noiseless(t, H, j, G).unwrap();
            let wz = w_phase_flip(t, H, j, G, g).unwrap();
            let wx = w_bit_flip(t, H, j, G, g).unwrap();
            let cases = [
                ((wz - wn) / t, AdvantageKind::PhaseFlip),
                ((wx - wn) / t, AdvantageKind::BitFlip),
                ((wx - wz) / t, AdvantageKind::XMinusZ),
            ];
            for (fd, kind) in cases {
                let a = transient_advantage(kind, g, H, j).unwrap();
                assert!(((fd - a) / a).abs() < 1e-3, "{kind:?} j {j}: {fd} vs {a}");
            }
        }
    }

    #[test]
    fn phase_flip_always_helps_initially() {
        for k in 1..=100 {
            let l = k as f64 / 100.0;
            assert!(transient_advantage(AdvantageKind::PhaseFlip, 0.1, 1.0, l).unwrap() > 0.0);
        }
    }

    #[test]
    fn thresholds() {
        let a = bit_flip_threshold().unwrap();
        assert!((a - 8.0 / 9.0).abs() < 1e-10, "{a}");
        assert!((0.885..=0.895).contains(&a));
        let b = x_minus_z_threshold().unwrap();
        assert!((0.615..=0.625).contains(&b), "{b}");
        assert!(transient_advantage(AdvantageKind::BitFlip, 1.0, 1.0, 0.89).unwrap().abs() < 5e-3);
        let at_half = transient_advantage(AdvantageKind::XMinusZ, 1.0, 1.0, 0.5).unwrap();
        assert!(transient_advantage(AdvantageKind::XMinusZ, 1.0, 1.0, 0.62).unwrap().abs() < 0.1 * at_half);
    }

    #[test]
    fn bit_flip_sign_follows_first_order_term() {
        let t = 1e-4;
        for li in 0..20 {
            let l = 0.1 + 1.9 * li as f64 / 19.0;
            if (l - bit_flip_threshold().unwrap()).abs() < 1e-3 {
                continue;
            }
            for ri in 0..10 {
                let x = G * (0.05 + 0.95 * ri as f64 / 9.0);
                let gap = w_bit_flip(t, 1.0, l, G, x).unwrap() - w_noiseless(t, 1.0, l, G).unwrap();
                let slope = transient_advantage(AdvantageKind::BitFlip, x, 1.0, l).unwrap();
                assert_eq!(gap.signum(), slope.signum(), "λ {l} Γx {x}");
            }
        }
    }

    #[test]
    fn curves_saturate() {
        let t = 50.0 / G;
        let dt = 1e-3;
        for f in [
            |t: f64| w_noiseless(t, H, J, G).unwrap(),
            |t: f64| w_phase_flip(t, H, J, G, 0.15).unwrap(),
            |t: f64| w_bit_flip(t, H, J, G, 0.15).unwrap(),
        ] {
            assert!(((f(t + dt) - f(t - dt)) / (2.0 * dt)).abs() < 1e-6);
        }
    }

    #[test]
    fn truncated_system_examples() {
        let r0 = rho0();
        let d = truncated(Direction::Z, 0.0).rhs(&r0);
        assert!((d[(0, 0)].re + J / 2.0 * r0[(0, 3)].re).abs() < 1e-15);
        assert!((d[(3, 3)].re - (-2.0 * G * r0[(3, 3)].re + J / 2.0 * r0[(0, 3)].re)).abs() < 1e-15);
        let pop: f64 = (0..4).map(|k| d[(k, k)].re).sum();
        assert!(pop.abs() < 1e-15);

        let mm = Rho4::identity() * C64::new(0.25, 0.0);
        let sys = XStateOde { gamma_abs: 0.0, ..truncated(Direction::X, 0.3) };
        let d = sys.rhs(&mm);
        for k in 0..4 {
            assert_eq!(d[(k, k)].re, 0.0);
        }
    }

    #[test]
    fn complete_system_matches_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for direction in [Direction::Z, Direction::X] {
            let kind = match direction {
                Direction::Z => JumpKind::DephaseZ,
                Direction::X => JumpKind::DephaseX,
            };
            for _ in 0..100 {
                let (h, j) = (rng.gen_range(0.5..1.5), rng.gen_range(-2.0..2.0));
                let (g, d) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let a = CMatrix::from_fn(4, 4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let m = &a * a.adjoint();
                let tr = crate::linalg::trace(&m);
                let rho = m / tr;

                let mut set = ChannelSet::new(2);
                set.extend_sites(1..=2, JumpKind::Absorption, RateSchedule::Constant(g)).unwrap();
                set.extend_sites(1..=2, kind, RateSchedule::Constant(d)).unwrap();
                let general = lindblad_generator(&rho, &two_qubit_x_matrix(h, j), &set, 0.0).unwrap();

                let sys = XStateOde { direction, h, j, gamma_abs: g, gamma_dph: d, form: OdeForm::Complete };
                let hand = from_rho4(&sys.rhs(&to_rho4(&rho).unwrap()));
                assert!((general - hand).camax() < 1e-12, "{direction:?}");
            }
        }
    }

    #[test]
    fn analytic_constants() {
        let i = TwoQubitAnalyticInputs::new(H, J, G, 0.15, 0.2).unwrap();
        assert!(i.a() >= 1.0);
        assert_eq!(i.a_prime(), J * H * i.p * (G + 0.4));
        assert_eq!(i.b_prime(), 8.0 * H * 0.2 * (G + 0.2 - i.p * i.p * 0.2));
        assert_eq!(i.c_prime(), 4.0 * G * H * 0.2 * (1.0 + i.p * i.p));
        assert_eq!(i.d_prime(), J * i.p * (G + 0.4) * (0.4 - H));
        assert!(TwoQubitAnalyticInputs::new(H, J, -1.0, 0.0, 0.0).is_err());
    }
}
