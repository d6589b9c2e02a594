//! Per-link channel gain: path loss, log-normal shadowing and Rayleigh fading.
//!
//! The composite gain of a link at distance `d` is
//!
//! ```text
//! h = h̄ · d^(-n) · 10^(0.1 ζ) · X²
//! ```
//!
//! with `ζ ~ N(0, σ_ζ²)` in dB and `X ~ Rayleigh(σ_f)`. Over time both the
//! shadowing and the two latent Gaussians behind `X = σ_f·sqrt(g1² + g2²)`
//! follow a first-order autoregression with coefficient `ρ_t`, which keeps the
//! marginals stationary.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub path_loss_exponent: f64,
    pub reference_gain: f64,
    /// Shadowing standard deviation in dB.
    pub shadowing_stddev_db: f64,
    pub rayleigh_scale: f64,
    /// Per-step AR(1) coefficient in `[0, 1)`.
    pub correlation: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 4.0,
            reference_gain: 1.0,
            shadowing_stddev_db: 4.0,
            rayleigh_scale: std::f64::consts::FRAC_1_SQRT_2,
            correlation: 0.99,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::config("path_loss_exponent", "must be > 0"));
        }
        if !(self.reference_gain > 0.0) {
            return Err(Error::config("reference_gain", "must be > 0"));
        }
        if !(self.shadowing_stddev_db >= 0.0) {
            return Err(Error::config("shadowing_stddev_db", "must be >= 0"));
        }
        if !(self.rayleigh_scale > 0.0) {
            return Err(Error::config("rayleigh_scale", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::config("correlation", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Coefficient multiplying the innovation in the AR(1) update.
    fn innovation_scale(&self) -> f64 {
        (1.0 - self.correlation * self.correlation).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkChannelState {
    /// Transmitter-receiver distance in km.
    pub distance: f64,
    /// Shadowing in dB.
    pub shadowing_db: f64,
    /// Standard-normal latent pair behind the fading amplitude.
    pub latent: [f64; 2],
    pub fading_amplitude: f64,
    pub gain: f64,
}

impl LinkChannelState {
    /// Assemble a state from its components, recomputing the composite gain.
    pub fn from_components(
        distance: f64,
        shadowing_db: f64,
        latent: [f64; 2],
        params: &ChannelParams,
    ) -> Result<Self> {
        let fading_amplitude = params.rayleigh_scale * latent[0].hypot(latent[1]);
        let gain = composite_gain(distance, shadowing_db, fading_amplitude, params)?;
        Ok(Self {
            distance,
            shadowing_db,
            latent,
            fading_amplitude,
            gain,
        })
    }
}

/// `h̄ / d^n`.
pub fn path_loss_gain(distance: f64, params: &ChannelParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be > 0, got {distance}"
        )));
    }
    Ok(params.reference_gain / distance.powf(params.path_loss_exponent))
}

pub fn composite_gain(
    distance: f64,
    shadowing_db: f64,
    fading_amplitude: f64,
    params: &ChannelParams,
) -> Result<f64> {
    Ok(path_loss_gain(distance, params)?
        * 10f64.powf(0.1 * shadowing_db)
        * fading_amplitude
        * fading_amplitude)
}

pub fn rayleigh_pdf(x: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::Domain(format!(
            "Rayleigh scale must be > 0, got {scale}"
        )));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let s2 = scale * scale;
    Ok(x / s2 * (-x * x / (2.0 * s2)).exp())
}

pub fn rayleigh_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x * x / (2.0 * scale * scale)).exp()
    }
}

/// Draw an independent channel realisation for a link of length `distance`.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    distance: f64,
    params: &ChannelParams,
) -> Result<LinkChannelState> {
    path_loss_gain(distance, params)?;
    let shadowing_db = params.shadowing_stddev_db * rng.sample::<f64, _>(StandardNormal);
    let latent = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    LinkChannelState::from_components(distance, shadowing_db, latent, params)
}

/// Advance a link by one step of the Gauss-Markov process.
pub fn evolve_channel<R: Rng + ?Sized>(
    state: &LinkChannelState,
    params: &ChannelParams,
    rng: &mut R,
) -> LinkChannelState {
    let innovations = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    evolve_with(state, params, innovations)
}

/// AR(1) step with explicit standard-normal innovations
/// `[shadowing, latent_1, latent_2]`.
pub fn evolve_with(
    state: &LinkChannelState,
    params: &ChannelParams,
    innovations: [f64; 3],
) -> LinkChannelState {
    let a = params.correlation;
    let b = params.innovation_scale();
    let shadowing_db = a * state.shadowing_db + b * params.shadowing_stddev_db * innovations[0];
    let latent = [
        a * state.latent[0] + b * innovations[1],
        a * state.latent[1] + b * innovations[2],
    ];
    // distance was validated when the state was built
    LinkChannelState::from_components(state.distance, shadowing_db, latent, params)
        .expect("distance stays positive")
}
