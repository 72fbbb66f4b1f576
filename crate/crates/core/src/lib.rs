//! Coupled co-sparse analysis operators for pairs of image modalities.

pub mod error;
pub mod global;
pub mod image;
pub mod io;
pub mod manifold;

pub use error::{Error, Result};
pub use image::{ModalImage, Modality};
pub mod model;
pub mod reconstruction;
pub mod registration;
pub mod synth;
