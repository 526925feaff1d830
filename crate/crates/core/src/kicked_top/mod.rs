//! Quantum kicked top `U = exp(-ik J_z^2/(2J+1)) exp(-iβ J_y)` and its
//! classical limit on the unit sphere.

pub mod classical;
pub mod exact;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::two_j_of;

pub use classical::{
    accumulate_dsdbeta, one_step_action, ActionAccumulator, KickedTopFlow, KickedTopMap,
    SpherePoint,
};
pub use exact::{echo_qfi, floquet_one_step, kicked_top_bundle, loschmidt_echo};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedTopParams {
    /// Spin quantum number (nonnegative half-integer).
    pub j: f64,
    pub beta: f64,
    pub k: f64,
    /// Number of kicks.
    pub t: u64,
}

impl KickedTopParams {
    pub fn validate(&self) -> Result<()> {
        two_j_of(self.j)?;
        if !self.beta.is_finite() || !self.k.is_finite() {
            return Err(Error::Domain(format!(
                "beta = {} and k = {} must be finite",
                self.beta, self.k
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        (2.0 * self.j) as usize + 1
    }

    /// Effective Planck constant `1/(J + 1/2)`.
    pub fn hbar_eff(&self) -> f64 {
        1.0 / (self.j + 0.5)
    }

    /// Heisenberg time `2J + 1`.
    pub fn heisenberg_time(&self) -> f64 {
        2.0 * self.j + 1.0
    }
}
