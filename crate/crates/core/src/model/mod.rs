//! Constellations, channels and the transmission model.

mod channel;
mod constellation;

pub use channel::{
    complex_gaussian, draw_channel, exponential_correlation, noise_var_from_snr, psd_sqrt,
    transmit, CMatrix, CVector, ChannelKind, ChannelModelConfig, ChannelRealization,
};
pub use constellation::Constellation;
