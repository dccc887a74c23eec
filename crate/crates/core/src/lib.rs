//! Coordinated hybrid-ARQ over Rayleigh block fading.
//!
//! Users that decode early hand their frequency band to users that are still
//! retransmitting. The crate simulates the protocol packet by packet
//! ([`protocol`]), evaluates its outage, event and throughput probabilities
//! in closed or semi-closed form ([`analytic`]), estimates the same
//! quantities by Monte Carlo ([`montecarlo`]), and drives the figure
//! presets and rate search ([`experiments`]).

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod fading;
pub mod montecarlo;
pub mod protocol;
pub mod rates;

pub use error::{Error, Result};
pub use fading::{ChannelDraw, ChannelMatrixDraw, FadingProfile, GainDraw, SeedTree};
pub use protocol::{AllocationPolicy, EventLabel, PacketOutcome, ProtocolConfig};
pub use rates::{AccumulationState, MimoRateInputs, Scheme};
