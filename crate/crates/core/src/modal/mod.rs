//! Operational modal analysis: Welch cross spectra, frequency domain
//! decomposition, peak picking and the modal assurance criterion.

mod compare;
mod fdd;
mod mac;
mod spectral;

pub use compare::{
    compare_identified, compare_modal, identify, pair_frequencies, ModalIdentification, ModalOptions, ModalReport,
    ModePair, PAIRING_TOLERANCE,
};
pub use fdd::{fdd_decompose, normalize_phase, pick_peaks, FddResult};
pub use mac::{mac, mac_real};
pub use spectral::{cpsd, hann, SpectralMatrix, WelchConfig};
