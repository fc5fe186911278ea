//! Translation-stable feature extraction: dual-tree complex wavelet
//! scattering over the slow-time x fast-time echo matrix.

mod dtcwt;
mod filters;
mod scatter;

pub use dtcwt::{dtcwt_forward, dtcwt_inverse, DtcwtLevel, DtcwtPyramid};
pub use filters::{build_filterbank, orthonormalize, FilterBank, TreeFilters, QSHIFT_14};
pub use scatter::{
    compute_norm_scales, feature_normalize, scatter, NormScales, ScatterConfig, ScatterFeatures,
};
