//! Parametric physics-informed surrogates for 2D elastic solids and
//! calibration of bulk and shear moduli from full-field displacement data.

pub mod autodiff;
pub mod calibration;
pub mod network;
pub mod mechanics;
pub mod fem;
pub mod field;
pub mod geometry;
pub mod metrics;
pub mod training;
