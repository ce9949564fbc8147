//! Experiments built on the point integrator.

pub mod fit;
pub mod path;
pub mod sweep;

pub use fit::{fit_hardening, fit_power_law, HardeningFit};
pub use path::{fracture_strain, peak_stress, run_path, run_path_partial, Control, PathRun, PathSpec, SimRecord};
pub use sweep::{
    default_eta_grid, default_theta0_grid,
    damage_locus_sweep, locus_from_h, polar_radius, polar_unfold, yield_surface_sweep, LocusMode, LocusRow, LocusTable, PolarPoint,
};
