//! Echo extraction, efficiency, bandwidth, phase and decay analysis.

pub mod csv;
mod echo;
mod fit;
mod render;
mod sweep;

pub use echo::{
    echo_windows, phase_difference, storage_efficiency, window_energy, window_peak, window_phase,
    wrap_phase, EchoMetrics, EchoWindow, PhaseEstimator,
};
pub use fit::{decay_fit, DecayConstant, DecayFit};
pub use render::{heterodyne_render, HeterodyneTrace, MIN_SAMPLES_PER_IF_PERIOD};
pub use sweep::{
    bandwidth_from_sweep, linear_fit, LinearFit, SweepAxis, SweepResult, DEFAULT_PLATEAU_FRACTION,
};
