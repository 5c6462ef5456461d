//! Local jump operators and rate schedules.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::linalg::{self, pauli, CMatrix, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    /// σ⁺, pumps energy in.
    Absorption,
    /// σ⁻, extracts energy.
    Dissipation,
    /// σz, phase flip.
    DephaseZ,
    /// σx, bit flip.
    DephaseX,
}

impl JumpKind {
    pub fn single_site(self) -> Matrix2<C64> {
        match self {
            JumpKind::Absorption => pauli::raising(),
            JumpKind::Dissipation => pauli::lowering(),
            JumpKind::DephaseZ => pauli::z(),
            JumpKind::DephaseX => pauli::x(),
        }
    }

    pub fn is_dephasing(self) -> bool {
        matches!(self, JumpKind::DephaseZ | JumpKind::DephaseX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSchedule {
    Constant(f64),
    /// Time-local dephasing rate of an Ohmic-family bath with Ohmicity `s`
    /// and cut-off `omega_c`.
    Ohmic { s: f64, omega_c: f64 },
}

impl RateSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateSchedule::Constant(r) if !(r >= 0.0) || !r.is_finite() => {
                Err(Error::InvalidParameter(format!("constant rate {r} must be ≥ 0")))
            }
            RateSchedule::Ohmic { s, .. } if !(s > 0.0) || !s.is_finite() => {
                Err(Error::InvalidParameter(format!("ohmicity s = {s} must be > 0")))
            }
            RateSchedule::Ohmic { omega_c, .. } if !(omega_c > 0.0) || !omega_c.is_finite() => {
                Err(Error::InvalidParameter(format!("cut-off omega_c = {omega_c} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    /// Rate at time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        match *self {
            RateSchedule::Constant(r) => r,
            RateSchedule::Ohmic { s, omega_c } => ohmic_dephasing_rate(t, s, omega_c),
        }
    }

    /// Whether the rate can turn negative at some time.
    pub fn can_go_negative(&self) -> bool {
        match *self {
            RateSchedule::Constant(_) => false,
            RateSchedule::Ohmic { s, .. } => is_non_markovian(s),
        }
    }
}

/// `G(ω) = ω^s / ω_c^{s-1} · exp(-ω/ω_c)`.
pub fn ohmic_spectral_density(omega: f64, s: f64, omega_c: f64) -> f64 {
    omega.powf(s) / omega_c.powf(s - 1.0) * (-omega / omega_c).exp()
}

/// `(1 + (ω_c t)²)^{-s/2} Γ(s) sin(s·atan(ω_c t))`; negative stretches for
/// `s > 2` signal information back-flow.
pub fn ohmic_dephasing_rate(t: f64, s: f64, omega_c: f64) -> f64 {
    let x = omega_c * t;
    (1.0 + x * x).powf(-0.5 * s) * gamma(s) * (s * x.atan()).sin()
}

/// `s > 2`; the boundary `s = 2` is Markovian.
pub fn is_non_markovian(s: f64) -> bool {
    s > 2.0
}

/// Free-function form of [`RateSchedule::rate_at`].
pub fn rate_at(schedule: &RateSchedule, t: f64) -> f64 {
    schedule.rate_at(t)
}

/// Dense `2^N × 2^N` jump operator acting on `site` (1-based).
pub fn jump_operator(site: usize, kind: JumpKind, n_sites: usize) -> Result<CMatrix> {
    if site == 0 || site > n_sites {
        return Err(Error::InvalidSite { site, n_sites });
    }
    Ok(linalg::embed_site_operator(&kind.single_site(), site, n_sites))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub site: usize,
    pub kind: JumpKind,
    pub schedule: RateSchedule,
}

/// The local channels acting on an `n_sites` chain. At most one dephasing
/// entry per site.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelSet {
    n_sites: usize,
    entries: Vec<Channel>,
}

impl ChannelSet {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites, entries: Vec::new() }
    }

    pub fn push(&mut self, site: usize, kind: JumpKind, schedule: RateSchedule) -> Result<()> {
        if site == 0 || site > self.n_sites {
            return Err(Error::InvalidSite { site, n_sites: self.n_sites });
        }
        schedule.validate()?;
        if kind.is_dephasing()
            && self.entries.iter().any(|c| c.site == site && c.kind.is_dephasing())
        {
            return Err(Error::InvalidParameter(format!(
                "site {site} already carries a dephasing channel"
            )));
        }
        self.entries.push(Channel { site, kind, schedule });
        Ok(())
    }

    pub fn with(mut self, site: usize, kind: JumpKind, schedule: RateSchedule) -> Result<Self> {
        self.push(site, kind, schedule)?;
        Ok(self)
    }

    /// Adds `kind` on every site listed.
    pub fn extend_sites(
        &mut self,
        sites: impl IntoIterator<Item = usize>,
        kind: JumpKind,
        schedule: RateSchedule,
    ) -> Result<()> {
        for site in sites {
            self.push(site, kind, schedule)?;
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn entries(&self) -> &[Channel] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when some rate can be transiently negative.
    pub fn has_negative_rates(&self) -> bool {
        self.entries.iter().any(|c| c.schedule.can_go_negative())
    }

    /// Largest constant rate, used for step-size advice.
    pub fn max_constant_rate(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|c| match c.schedule {
                RateSchedule::Constant(r) => Some(r),
                _ => None,
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_site_raising() {
        let op = jump_operator(1, JumpKind::Absorption, 1).unwrap();
        assert_eq!(op, CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));
    }

    #[test]
    fn z_on_second_site() {
        let op = jump_operator(2, JumpKind::DephaseZ, 2).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0),
            c(-1.0),
            c(1.0),
            c(-1.0),
        ]));
        assert_eq!(op, expected);
    }

    #[test]
    fn dissipation_is_adjoint_of_absorption() {
        for n in 1..=3 {
            for site in 1..=n {
                let up = jump_operator(site, JumpKind::Absorption, n).unwrap();
                let down = jump_operator(site, JumpKind::Dissipation, n).unwrap();
                assert_eq!(down, up.adjoint());
            }
        }
    }

    #[test]
    fn dephasing_operators_are_hermitian_unitaries() {
        for kind in [JumpKind::DephaseZ, JumpKind::DephaseX] {
            let l = jump_operator(2, kind, 3).unwrap();
            assert_eq!(l, l.adjoint());
            assert!((&l * &l - CMatrix::identity(8, 8)).camax() < 1e-14);
        }
    }

    #[test]
    fn invalid_site() {
        assert_eq!(
            jump_operator(0, JumpKind::DephaseX, 2).unwrap_err(),
            Error::InvalidSite { site: 0, n_sites: 2 }
        );
        assert!(jump_operator(3, JumpKind::DephaseX, 2).is_err());
    }

    #[test]
    fn spectral_density_values() {
        assert_eq!(ohmic_spectral_density(0.0, 4.0, 1.0), 0.0);
        // ω = ω_c = 2, s = 1: 2 e^{-1}
        assert!((ohmic_spectral_density(2.0, 1.0, 2.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((ohmic_spectral_density(1.0, 4.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dephasing_rate_values() {
        assert_eq!(ohmic_dephasing_rate(0.0, 4.0, 1.0), 0.0);
        assert_eq!(ohmic_dephasing_rate(0.0, 0.5, 3.0), 0.0);
        // ω_c t = 1, s = 1: 2^{-1/2} · sin(π/4) = 1/2
        assert!((ohmic_dephasing_rate(0.5, 1.0, 2.0) - 0.5).abs() < 1e-15);
        // ω_c t = 2, s = 4: (1/25)·6·sin(4·atan 2) = -0.2304 exactly
        // (sin(4 atan 2) = -24/25).
        assert!((ohmic_dephasing_rate(2.0, 4.0, 1.0) + 0.2304).abs() < 1e-14);
    }

    #[test]
    fn markovian_classification() {
        assert!(is_non_markovian(4.0));
        assert!(!is_non_markovian(1.5));
        assert!(!is_non_markovian(2.0));
    }

    #[test]
    fn schedule_rates() {
        assert_eq!(RateSchedule::Constant(0.5).rate_at(7.3), 0.5);
        let ohmic = RateSchedule::Ohmic { s: 4.0, omega_c: 1.0 };
        assert_eq!(rate_at(&ohmic, 0.0), 0.0);
        assert!((rate_at(&ohmic, 2.0) + 0.2304).abs() < 1e-14);
        assert!(ohmic.can_go_negative());
        assert!(!RateSchedule::Ohmic { s: 2.0, omega_c: 1.0 }.can_go_negative());
    }

    #[test]
    fn sub_two_ohmicity_never_negative() {
        for s in [0.25, 0.5, 1.0, 1.5, 2.0] {
            let mut t = 0.0;
            while t <= 100.0 {
                assert!(ohmic_dephasing_rate(t, s, 1.0) >= -1e-15, "s {s} t {t}");
                t += 0.01;
            }
        }
    }

    #[test]
    fn s_four_changes_sign_and_decays() {
        let mut saw_negative = false;
        let mut t = 0.01;
        while t <= 5.0 {
            saw_negative |= ohmic_dephasing_rate(t, 4.0, 1.0) < 0.0;
            t += 0.01;
        }
        assert!(saw_negative);
        assert!(ohmic_dephasing_rate(1e4, 4.0, 1.0).abs() < 1e-6);
    }

    #[test]
    fn channel_set_rules() {
        let mut set = ChannelSet::new(3);
        set.push(1, JumpKind::Absorption, RateSchedule::Constant(0.5)).unwrap();
        set.push(1, JumpKind::DephaseX, RateSchedule::Constant(0.15)).unwrap();
        assert!(set.push(1, JumpKind::DephaseZ, RateSchedule::Constant(0.15)).is_err());
        assert!(set.push(4, JumpKind::Absorption, RateSchedule::Constant(0.5)).is_err());
        assert!(set.push(2, JumpKind::Absorption, RateSchedule::Constant(-0.5)).is_err());
        assert!(set
            .push(2, JumpKind::DephaseZ, RateSchedule::Ohmic { s: 0.0, omega_c: 1.0 })
            .is_err());
        assert_eq!(set.entries().len(), 2);
        assert!(!set.has_negative_rates());
        assert_eq!(set.max_constant_rate(), 0.5);
    }

    proptest! {
        #[test]
        fn markovian_rates_are_nonnegative(s in 0.05f64..=2.0, t in 0.0f64..100.0, wc in 0.1f64..5.0) {
            prop_assert!(ohmic_dephasing_rate(t, s, wc) >= 0.0);
        }

        #[test]
        fn jump_operators_square_to_projectors(site in 1usize..=3, k in 0usize..4) {
            let kind = [JumpKind::Absorption, JumpKind::Dissipation, JumpKind::DephaseZ, JumpKind::DephaseX][k];
            let l = jump_operator(site, kind, 3).unwrap();
            let ldl = l.adjoint() * &l;
            prop_assert!((&ldl * &ldl - &ldl).camax() < 1e-14);
        }
    }
}
