//! The physical setup shared by every stage of a solve.

use crate::error::{Error, Result};
use crate::geometry::{AntennaLayout, ChannelModel, MovingRegion, Point2, ReceiverGeometry};
use crate::linalg::{CMatrix, CVector};
use crate::rates::{secrecy_rate, RatePair};

/// Region, receivers and transmitter dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub region: MovingRegion,
    /// Minimum inter-antenna spacing `d_min` in meters.
    pub min_spacing: f64,
    pub wavelength: f64,
    pub user: ReceiverGeometry,
    pub eavesdropper: ReceiverGeometry,
    /// When false the wiretap channel is identically zero.
    pub eavesdropper_present: bool,
    /// Transmit power budget `P_B` in watts.
    pub power_budget: f64,
    /// Number of transmit antennas `M`.
    pub antennas: usize,
    /// Number of RF chains `N`.
    pub rf_chains: usize,
    /// Number of data streams `K`.
    pub streams: usize,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Config(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.min_spacing > 0.0) {
            return Err(Error::Config(format!("minimum spacing must be positive, got {}", self.min_spacing)));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::Config(format!("power budget must be positive, got {}", self.power_budget)));
        }
        if self.streams == 0 || self.antennas == 0 {
            return Err(Error::Config("need at least one antenna and one stream".into()));
        }
        if self.rf_chains < self.streams {
            return Err(Error::Config(format!("need N >= K, got N = {} and K = {}", self.rf_chains, self.streams)));
        }
        if self.rf_chains > self.antennas {
            return Err(Error::Config(format!("need N <= M, got N = {} and M = {}", self.rf_chains, self.antennas)));
        }
        if self.streams > self.user.len() {
            return Err(Error::Config(format!(
                "K = {} streams exceed the {} user antennas",
                self.streams,
                self.user.len()
            )));
        }
        Ok(())
    }

    /// Noise-whitened user channel column `h(t)/σ_U`.
    pub fn user_column(&self, t: &Point2, model: ChannelModel) -> Result<CVector> {
        Ok(model.column(t, &self.user, self.wavelength)? / crate::linalg::C64::from(self.user.noise_variance.sqrt()))
    }

    /// Noise-whitened eavesdropper channel column `z(t)/σ_E`, zero when the
    /// eavesdropper is absent.
    pub fn eve_column(&self, t: &Point2, model: ChannelModel) -> Result<CVector> {
        if !self.eavesdropper_present {
            return Ok(CVector::zeros(self.eavesdropper.len()));
        }
        Ok(model.column(t, &self.eavesdropper, self.wavelength)?
            / crate::linalg::C64::from(self.eavesdropper.noise_variance.sqrt()))
    }

    /// Noise-whitened `(H̃, Z̃)` for a layout.
    pub fn whitened_channels(&self, layout: &AntennaLayout, model: ChannelModel) -> Result<(CMatrix, CMatrix)> {
        let mut h = CMatrix::zeros(self.user.len(), layout.len());
        let mut z = CMatrix::zeros(self.eavesdropper.len(), layout.len());
        for (m, t) in layout.positions().iter().enumerate() {
            h.set_column(m, &self.user_column(t, model)?);
            z.set_column(m, &self.eve_column(t, model)?);
        }
        Ok((h, z))
    }

    /// Rates of a precoder under the exact near-field channel.
    pub fn rates(&self, layout: &AntennaLayout, precoder: &CMatrix) -> Result<RatePair> {
        let (h, z) = self.whitened_channels(layout, ChannelModel::NearField)?;
        secrecy_rate(&h, &z, precoder, 1.0, 1.0)
    }
}
