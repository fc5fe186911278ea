//! Pulse-Doppler radar echo synthesis under DRFM deception jamming, with a
//! dual-tree wavelet scattering front end, a contrastively trained embedding,
//! prototype-based classification and a sliding-window target detector that
//! suppresses deceptive jamming.
//!
//! The crate is organized along the processing chain:
//!
//! - [`waveform`]: transmit waveform, array steering and DRFM intercept primitives
//! - [`jamming`]: the ten deception jamming families
//! - [`scene`]: full echo composition, noise/clutter injection, dataset generation
//! - [`scattering`]: dual-tree complex wavelet transform and scattering features
//! - [`encoder`]: attention-gated convolutional embedding trained with a
//!   supervised contrastive loss
//! - [`protonet`]: prototype construction, nearest-prototype classification, metrics
//! - [`suppression`]: sliding-window probability profiling, accumulation and
//!   thresholded target localization
//! - [`io`]: on-disk formats for datasets, features and model weights

pub mod encoder;
pub mod error;
pub mod io;
pub mod jamming;
pub mod protonet;
pub mod scattering;
pub mod scene;
pub mod suppression;
pub mod waveform;

pub use error::{CoreError, Result};
pub use waveform::{ComplexSeries, PulseMatrix, RadarConfig};
