//! Källén–Lehmann spectral measures and the diagnostics built on them:
//! field-strength renormalization, smeared two-point kernels, scaling
//! degrees, scaled averages of electromagnetic fields and a classical
//! composite-field model.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, with `…32` variants for `f32`.

pub mod bessel;
pub mod composite;
pub mod error;
pub mod gauss;
pub mod kernels;
pub mod measures;
pub mod quad;
pub mod scalar;
pub mod scaling;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SpectralMeasure = measures::SpectralMeasure<f64>;
pub type Density = measures::Density<f64>;
pub type Atom = measures::Atom<f64>;
pub type TestFunction = kernels::TestFunction<f64>;
pub type KernelValue = kernels::KernelValue<f64>;
pub type ScalingReport = scaling::ScalingReport<f64>;
pub type FieldConfiguration = gauss::FieldConfiguration<f64>;
pub type ProbeFunction = gauss::ProbeFunction<f64>;
pub type ChargeFunction = gauss::ChargeFunction<f64>;
pub type ClassicalField = composite::ClassicalField<f64>;
pub type CompositeModel = composite::CompositeModel<f64>;
pub type Tolerance = quad::Tolerance<f64>;

pub type SpectralMeasure32 = measures::SpectralMeasure<f32>;
pub type TestFunction32 = kernels::TestFunction<f32>;
pub type ScalingReport32 = scaling::ScalingReport<f32>;
pub type ClassicalField32 = composite::ClassicalField<f32>;
pub type CompositeModel32 = composite::CompositeModel<f32>;
pub type Tolerance32 = quad::Tolerance<f32>;
