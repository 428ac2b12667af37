//! Measurement channels for the asymmetric and symmetric cavity couplings,
//! plus the unmonitored spontaneous-emission channels.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hop_operator, number_operator, FockBasis};
use crate::model::ModelParams;
use crate::operator::OperatorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqedParams {
    /// Effective Raman coupling `|g|`.
    pub g_abs: f64,
    /// Coupling phase for the asymmetric scheme.
    pub phi_g: f64,
    pub phi_r: f64,
    pub phi_l: f64,
    /// Cavity linewidth.
    pub kappa: f64,
    /// Raman Rabi frequency.
    pub omega_raman: f64,
    /// Raman detuning.
    pub delta: f64,
    /// Excited-state spontaneous emission rate.
    pub gamma_spont: f64,
}

impl Default for CqedParams {
    fn default() -> Self {
        CqedParams {
            g_abs: 0.0,
            phi_g: 0.0,
            phi_r: 0.0,
            phi_l: 0.0,
            kappa: 1.0,
            omega_raman: 0.0,
            delta: 1.0,
            gamma_spont: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementChannel {
    pub jump: OperatorMatrix,
    pub gamma: f64,
    /// Local-oscillator phase `phi` in `c e^{i phi} + c^dagger e^{-i phi}`.
    pub quad_phase: f64,
    pub monitored: bool,
    pub label: String,
    /// Factor `g` with quadrature `= g J_links / J` for current channels,
    /// zero when the quadrature is not a current.
    pub current_gain: f64,
}

impl MeasurementChannel {
    pub fn new(jump: OperatorMatrix, gamma: f64, quad_phase: f64, monitored: bool, label: impl Into<String>) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("rate {gamma} must be finite and >= 0")));
        }
        Ok(MeasurementChannel {
            jump,
            gamma,
            quad_phase,
            monitored,
            label: label.into(),
            current_gain: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.jump.dim()
    }

    /// `c e^{i phi} + c^dagger e^{-i phi}`.
    pub fn quadrature(&self) -> OperatorMatrix {
        let rotated = self.jump.scale(C64::from_polar(1.0, self.quad_phase));
        &rotated + &rotated.adjoint()
    }

    /// `e^{i phi} c`, the operator that multiplies `dq` in the SSE.
    pub fn rotated_jump(&self) -> OperatorMatrix {
        self.jump.scale(C64::from_polar(1.0, self.quad_phase))
    }

    pub fn unmonitored(mut self) -> Self {
        self.monitored = false;
        self
    }
}

/// `gamma = 4 |g|^2 / kappa`.
pub fn gamma_from_cqed(c: &CqedParams) -> Result<f64> {
    if !(c.kappa > 0.0) {
        return Err(Error::param("kappa", format!("cavity linewidth {} must be > 0", c.kappa)));
    }
    Ok(4.0 * c.g_abs * c.g_abs / c.kappa)
}

fn forward_hops(basis: &FockBasis, p: &ModelParams, links: &[usize]) -> Result<OperatorMatrix> {
    if links.is_empty() {
        return Err(Error::param("links", "a channel needs at least one link"));
    }
    links.iter().try_fold(OperatorMatrix::zeros(basis.dim()), |acc, &j| {
        let k = p.link_target(j)?;
        Ok(&acc + &hop_operator(basis, j, k)?)
    })
}

fn link_label(prefix: &str, links: &[usize]) -> String {
    let parts: Vec<String> = links.iter().map(|j| j.to_string()).collect();
    format!("{prefix}[{}]", parts.join(","))
}

/// `c_a = -i e^{i phi_g} sum_{j in links} a_j^dagger a_{j+1}` with
/// `phi = theta - phi_g`, so the quadrature is `J_links / J`.
pub fn asym_channel(
    basis: &FockBasis,
    p: &ModelParams,
    links: &[usize],
    phi_g: f64,
    gamma: f64,
) -> Result<MeasurementChannel> {
    let hops = forward_hops(basis, p, links)?;
    let jump = hops.scale(C64::new(0.0, -1.0) * C64::from_polar(1.0, phi_g));
    let mut ch = MeasurementChannel::new(jump, gamma, p.theta - phi_g, true, link_label("asym", links))?;
    ch.current_gain = 1.0;
    Ok(ch)
}

/// Phases `(phi_R, phi_L, phi)` that make the symmetric jump proportional to
/// the current: `phi_R = theta`, `phi_L = pi - theta`, `phi = 0`.
pub fn sym_auto_phases(theta: f64) -> (f64, f64, f64) {
    (theta, PI - theta, 0.0)
}

/// `c_s = sum_{j in links} (i e^{i phi_R} a_j^dagger a_{j+1} + i e^{i phi_L} a_{j+1}^dagger a_j)`.
///
/// With the automatic phases `c_s = -J_links / J` is Hermitian and the
/// quadrature at `phi = 0` is `-2 J_links / J`; the channel reports that
/// factor in `current_gain`. With explicit phases the gain is left at zero
/// unless the quadrature still happens to be a multiple of the current.
pub fn sym_channel(
    basis: &FockBasis,
    p: &ModelParams,
    links: &[usize],
    phases: Option<(f64, f64, f64)>,
    gamma: f64,
) -> Result<MeasurementChannel> {
    let (phi_r, phi_l, phi) = phases.unwrap_or_else(|| sym_auto_phases(p.theta));
    let fwd = forward_hops(basis, p, links)?;
    let i = C64::new(0.0, 1.0);
    let jump = &fwd.scale(i * C64::from_polar(1.0, phi_r)) + &fwd.adjoint().scale(i * C64::from_polar(1.0, phi_l));
    let mut ch = MeasurementChannel::new(jump, gamma, phi, true, link_label("sym", links))?;

    let current = crate::model::links_current(basis, p, links)?;
    let quad = ch.quadrature();
    let scale = p.hopping.max(f64::MIN_POSITIVE);
    for gain in [-2.0, 2.0, 1.0, -1.0] {
        if (&quad - &current.scale_re(gain / scale)).max_abs() < 1e-12 {
            ch.current_gain = gain;
            break;
        }
    }
    Ok(ch)
}

/// Individual rate overrides for [`spontaneous_channels`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpontaneousRates {
    pub decay: Option<f64>,
    pub dephasing: Option<f64>,
}

/// `gamma_s = (Omega / Delta)^2 gamma_spont`.
pub fn spontaneous_rate(c: &CqedParams) -> Result<f64> {
    if c.delta == 0.0 || !c.delta.is_finite() {
        return Err(Error::param("delta", "spontaneous emission needs a nonzero detuning"));
    }
    let r = c.omega_raman / c.delta;
    Ok(r * r * c.gamma_spont)
}

/// Decay `a_j^dagger a_{j+1}` and `a_{j+1}^dagger a_j` for every link plus
/// dephasing `n_j` on every site the links touch, all unmonitored.
pub fn spontaneous_channels(
    basis: &FockBasis,
    p: &ModelParams,
    c: &CqedParams,
    links: &[usize],
    overrides: SpontaneousRates,
) -> Result<Vec<MeasurementChannel>> {
    let base = spontaneous_rate(c)?;
    let decay = overrides.decay.unwrap_or(base);
    let dephasing = overrides.dephasing.unwrap_or(base);
    let mut out = Vec::new();
    let mut sites = Vec::new();
    for &j in links {
        let k = p.link_target(j)?;
        out.push(MeasurementChannel::new(hop_operator(basis, j, k)?, decay, 0.0, false, format!("decay[{j}->{k}]"))?);
        out.push(MeasurementChannel::new(hop_operator(basis, k, j)?, decay, 0.0, false, format!("decay[{k}->{j}]"))?);
        for s in [j, k] {
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
    }
    sites.sort_unstable();
    for s in sites {
        out.push(MeasurementChannel::new(number_operator(basis, s)?, dephasing, 0.0, false, format!("dephasing[{s}]"))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_basis;
    use crate::model::{kinetic_hamiltonian, local_current, total_current};

    #[test]
    fn rate_formula() {
        let mut c = CqedParams {
            g_abs: 1.0,
            kappa: 4.0,
            ..Default::default()
        };
        assert!((gamma_from_cqed(&c).unwrap() - 1.0).abs() < 1e-15);
        c.g_abs = 0.5;
        c.kappa = 2.0;
        assert!((gamma_from_cqed(&c).unwrap() - 0.5).abs() < 1e-15);
        c.g_abs = 0.0;
        assert_eq!(gamma_from_cqed(&c).unwrap(), 0.0);
        c.kappa = 0.0;
        assert!(gamma_from_cqed(&c).is_err());
    }

    #[test]
    fn asym_quadrature_is_current() {
        let b = build_basis(3, 3).unwrap();
        for theta in [0.0, 0.3, PI / 3.0, 2.5] {
            let p = ModelParams::ring(3, 3, 0.7, theta, 0.4);
            for phi_g in [0.0, 1.1] {
                let all = asym_channel(&b, &p, &p.links(), phi_g, 1.0).unwrap();
                let jt = total_current(&b, &p).unwrap().scale_re(1.0 / p.hopping);
                assert!((&all.quadrature() - &jt).max_abs() < 1e-12);
                let one = asym_channel(&b, &p, &[1], phi_g, 1.0).unwrap();
                let j12 = local_current(&b, &p, 1).unwrap().scale_re(1.0 / p.hopping);
                assert!((&one.quadrature() - &j12).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asym_two_site_damping() {
        let b = build_basis(2, 1).unwrap();
        let p = ModelParams::open(2, 1, 1.0, 0.0, 0.0);
        let ch = asym_channel(&b, &p, &[1], 0.0, 1.0).unwrap();
        let ctc = &ch.jump.adjoint() * &ch.jump;
        assert!((&ctc - &number_operator(&b, 2).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn sym_quadrature_tracks_current() {
        let b = build_basis(3, 3).unwrap();
        let p = ModelParams::ring(3, 3, 1.0, PI / 3.0, 0.0);
        let ch = sym_channel(&b, &p, &[1], None, 1.0).unwrap();
        assert_eq!(ch.current_gain, -2.0);
        assert!(ch.jump.is_hermitian());
        let j12 = local_current(&b, &p, 1).unwrap();
        assert!((&ch.quadrature() - &j12.scale_re(-2.0)).max_abs() < 1e-12);
        assert!((&ch.jump + &j12).max_abs() < 1e-12);

        let asym = asym_channel(&b, &p, &[1], 0.0, 1.0).unwrap();
        assert!((&asym.jump - &ch.jump).max_abs() > 0.1);
    }

    #[test]
    fn sym_commutation() {
        let b = build_basis(3, 3).unwrap();
        let p = ModelParams::ring(3, 3, 1.0, PI / 3.0, 0.0);
        let hj = kinetic_hamiltonian(&b, &p).unwrap();
        let global = sym_channel(&b, &p, &p.links(), None, 1.0).unwrap();
        assert!(global.jump.commutator(&hj).max_abs() < 1e-12);
        let local = sym_channel(&b, &p, &[1], None, 1.0).unwrap();
        assert!(local.jump.commutator(&hj).frobenius_norm() > 0.1);
    }

    #[test]
    fn spontaneous_rates() {
        let b = build_basis(3, 2).unwrap();
        let p = ModelParams::ring(3, 2, 1.0, 0.0, 0.0);
        let c = CqedParams {
            omega_raman: 0.1,
            delta: 1.0,
            gamma_spont: 1.0,
            ..Default::default()
        };
        let chans = spontaneous_channels(&b, &p, &c, &[1], SpontaneousRates::default()).unwrap();
        assert_eq!(chans.len(), 4);
        for ch in &chans {
            assert!((ch.gamma - 0.01).abs() < 1e-15);
            assert!(!ch.monitored);
        }
        let deph = chans.iter().find(|c| c.label == "dephasing[1]").unwrap();
        assert!(deph.jump.is_hermitian());
        assert!(deph.jump.entries().all(|(i, j, _)| i == j));

        let dark = CqedParams { omega_raman: 0.0, ..c };
        for ch in spontaneous_channels(&b, &p, &dark, &p.links(), SpontaneousRates::default()).unwrap() {
            assert_eq!(ch.gamma, 0.0);
        }
        let over = spontaneous_channels(
            &b,
            &p,
            &c,
            &[1],
            SpontaneousRates {
                decay: Some(0.3),
                dephasing: None,
            },
        )
        .unwrap();
        assert_eq!(over[0].gamma, 0.3);
        assert!((over[3].gamma - 0.01).abs() < 1e-15);
        assert!(spontaneous_channels(&b, &p, &CqedParams { delta: 0.0, ..c }, &[1], SpontaneousRates::default()).is_err());
    }
}
