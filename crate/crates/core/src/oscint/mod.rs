//! Closed-form evaluation of the oscillatory segment integrals.

pub mod bessel;
pub mod closed;
pub mod series;
pub mod spectral;

pub use bessel::{bessel_j, bessel_table};
pub use closed::{
    exp_integral_double_minus, exp_integral_double_plus, exp_integral_single, ordered_exp_integral,
};
pub use series::{
    double_integral, modulated_double_integral, modulated_single_integral, single_integral,
    ModulationSpec, PhaseSpec, SeriesBudget, SeriesValue,
};
pub use spectral::{OrderedKernel, PhaseHarmonics, SpectralSignal};
