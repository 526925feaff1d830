//! Hénon–Heiles system `H = (p_x^2 + p_y^2 + x^2 + y^2)/2 + λ(x^2 y - y^3/3)`
//! with the coupling `λ` as estimation parameter.

pub mod classical;
pub mod quantum;

pub use classical::{hh_integrate, HHState, HenonHeilesFlow, Trajectory};
pub use quantum::{hh_build_quantum, hh_coherent_state, HHQuantumModel};

/// Perturbation `H' = x^2 y - y^3/3`.
#[inline]
pub fn perturbation(x: f64, y: f64) -> f64 {
    x * x * y - y * y * y / 3.0
}

/// Escape bound used to flag unbounded trajectories.
pub const ESCAPE_BOUND: f64 = 2.0;

/// Energy above which the potential well opens.
pub const SADDLE_ENERGY: f64 = 1.0 / 6.0;
