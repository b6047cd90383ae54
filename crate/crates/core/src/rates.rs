//! Achievable and secrecy rates for a given precoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, frob2, ln_det_identity_plus_gram, CMatrix};

/// Relative slack on the unit-modulus and power checks.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Analog/digital factor pair of a hybrid precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPair {
    /// `M × N` analog beamformer with unit-modulus entries.
    pub analog: CMatrix,
    /// `N × K` digital beamformer.
    pub digital: CMatrix,
}

impl HybridPair {
    pub fn effective(&self) -> CMatrix {
        &self.analog * &self.digital
    }
}

/// Precoders produced by one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// Fully-digital `M × K` precoder from the WMMSE stage.
    pub full: Option<CMatrix>,
    /// Hybrid factorization; `None` for fully-digital transmission.
    pub hybrid: Option<HybridPair>,
    pub power_budget: f64,
}

impl BeamformerSet {
    /// The precoder actually transmitted: `W_A W_D` when hybrid, else `W`.
    pub fn effective(&self) -> Option<CMatrix> {
        match (&self.hybrid, &self.full) {
            (Some(pair), _) => Some(pair.effective()),
            (None, Some(w)) => Some(w.clone()),
            (None, None) => None,
        }
    }

    /// Check the unit-modulus and power constraints.
    pub fn validate(&self) -> Result<()> {
        let budget = self.power_budget * (1.0 + FEASIBILITY_SLACK);
        if let Some(pair) = &self.hybrid {
            if let Some(z) = pair.analog.iter().find(|z| (z.norm() - 1.0).abs() > FEASIBILITY_SLACK) {
                return Err(Error::Dimension(format!("analog entry with modulus {}", z.norm())));
            }
            let p = frob2(&pair.effective());
            if p > budget {
                return Err(Error::Dimension(format!("hybrid power {p:e} exceeds budget")));
            }
        }
        if let Some(w) = &self.full {
            let p = frob2(w);
            if p > budget {
                return Err(Error::Dimension(format!("digital power {p:e} exceeds budget")));
            }
        }
        Ok(())
    }
}

/// Rates of the legitimate and wiretap links, in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub user: f64,
    pub eavesdropper: f64,
    pub secrecy: f64,
}

impl RatePair {
    /// `R_U − R_E` before clamping.
    pub fn margin(&self) -> f64 {
        self.user - self.eavesdropper
    }
}

/// `log₂ det(I + σ⁻²·H V V^H H^H)`.
pub fn achievable_rate(channel: &CMatrix, precoder: &CMatrix, noise_variance: f64) -> Result<f64> {
    if channel.ncols() != precoder.nrows() {
        return Err(Error::Dimension(format!(
            "channel is {}x{} but precoder has {} rows",
            channel.nrows(),
            channel.ncols(),
            precoder.nrows()
        )));
    }
    if !(noise_variance > 0.0) {
        return Err(Error::Dimension(format!("noise variance must be positive, got {noise_variance}")));
    }
    if !all_finite(channel) {
        return Err(Error::NonFinite("channel"));
    }
    if !all_finite(precoder) {
        return Err(Error::NonFinite("precoder"));
    }
    let g = channel * precoder;
    Ok(ln_det_identity_plus_gram(&g, 1.0 / noise_variance)? / std::f64::consts::LN_2)
}

/// User rate, eavesdropper rate and `[R_U − R_E]⁺`.
pub fn secrecy_rate(
    user_channel: &CMatrix,
    eve_channel: &CMatrix,
    precoder: &CMatrix,
    user_noise: f64,
    eve_noise: f64,
) -> Result<RatePair> {
    let user = achievable_rate(user_channel, precoder, user_noise)?;
    let eavesdropper = achievable_rate(eve_channel, precoder, eve_noise)?;
    Ok(RatePair { user, eavesdropper, secrecy: (user - eavesdropper).max(0.0) })
}

/// `ln det(I + H̃VV^H H̃^H) − ln det(I + Z̃VV^H Z̃^H)` for noise-whitened
/// channels, unclamped. This is the objective the solvers climb.
pub fn ln_secrecy_margin(user_whitened: &CMatrix, eve_whitened: &CMatrix, precoder: &CMatrix) -> Result<f64> {
    let u = ln_det_identity_plus_gram(&(user_whitened * precoder), 1.0)?;
    let e = ln_det_identity_plus_gram(&(eve_whitened * precoder), 1.0)?;
    Ok(u - e)
}
