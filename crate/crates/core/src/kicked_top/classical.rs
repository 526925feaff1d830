use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassical::ActionFlow;
use crate::stats::KahanSum;

/// Unit vector on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point with azimuth `phi` and height `z = cos θ`.
    pub fn from_phi_z(phi: f64, z: f64) -> Self {
        let rho = (1.0 - z * z).max(0.0).sqrt();
        Self {
            x: rho * phi.cos(),
            y: rho * phi.sin(),
            z,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Azimuth in `[0, 2π)`.
    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x).rem_euclid(TAU)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One kick: rotation by β about `y`, then torsion by `k z` about `z`.
#[derive(Clone, Copy, Debug)]
pub struct KickedTopMap {
    pub beta: f64,
    pub k: f64,
    cos_b: f64,
    sin_b: f64,
}

impl KickedTopMap {
    pub fn new(beta: f64, k: f64) -> Self {
        let (sin_b, cos_b) = beta.sin_cos();
        Self { beta, k, cos_b, sin_b }
    }

    /// Image of `p`, renormalized to the unit sphere.
    #[inline]
    pub fn step(&self, p: SpherePoint) -> SpherePoint {
        let x1 = p.x * self.cos_b + p.z * self.sin_b;
        let z1 = -p.x * self.sin_b + p.z * self.cos_b;
        let (s, c) = (self.k * z1).sin_cos();
        SpherePoint {
            x: x1 * c - p.y * s,
            y: x1 * s + p.y * c,
            z: z1,
        }
        .normalized()
    }

    pub fn inverse_step(&self, p: SpherePoint) -> SpherePoint {
        let (s, c) = (self.k * p.z).sin_cos();
        let x1 = p.x * c + p.y * s;
        let y = -p.x * s + p.y * c;
        SpherePoint {
            x: x1 * self.cos_b - p.z * self.sin_b,
            y,
            z: x1 * self.sin_b + p.z * self.cos_b,
        }
        .normalized()
    }
}

/// Running `∂S/∂β = -Σ y` over the pre-kick points of a trajectory.
#[derive(Clone, Copy, Debug, Default)]
pub struct ActionAccumulator {
    sum: KahanSum,
    pub steps: u64,
}

impl ActionAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, pre_step: &SpherePoint) {
        self.sum.add(-pre_step.y);
        self.steps += 1;
    }

    pub fn sum_dsdbeta(&self) -> f64 {
        self.sum.value()
    }
}

/// `∂S/∂β` of a trajectory given as its sequence of pre-kick points.
pub fn accumulate_dsdbeta(trajectory: &[SpherePoint]) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::Usage("empty trajectory".into()));
    }
    let mut acc = ActionAccumulator::new();
    for p in trajectory {
        acc.record(p);
    }
    Ok(acc.sum_dsdbeta())
}

const ACOS_SLACK: f64 = 1e-9;

fn checked_acos(arg: f64, what: &str) -> Result<f64> {
    if !(arg.abs() <= 1.0 + ACOS_SLACK) {
        return Err(Error::Domain(format!(
            "{what}: arccos argument {arg} is not realizable"
        )));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// One-kick generating action `S(z_t, z_{t+1})`: three arccos terms for the
/// rotation plus `-(k/2) z_{t+1}^2` for the torsion.
///
/// The principal arccos branch covers the half of the sphere with
/// `sin φ_t > 0`; for `sin φ_t < 0` the rotation terms change sign. With that
/// branch choice `∂S/∂β = -y_t`.
pub fn one_step_action(z_t: f64, z_next: f64, phi_t: f64, beta: f64, k: f64) -> Result<f64> {
    let (sin_b, cos_b) = beta.sin_cos();
    let rho_t = (1.0 - z_t * z_t).sqrt();
    let rho_n = (1.0 - z_next * z_next).sqrt();
    let a1 = checked_acos((z_t * cos_b - z_next) / (sin_b * rho_t), "first rotation term")?;
    let a2 = checked_acos((z_t - z_next * cos_b) / (sin_b * rho_n), "second rotation term")?;
    let a3 = checked_acos((z_t * z_next - cos_b) / (rho_t * rho_n), "third rotation term")?;
    let branch = if phi_t.sin() < 0.0 { -1.0 } else { 1.0 };
    Ok(branch * (z_t * a1 - z_next * a2 + a3) - 0.5 * k * z_next * z_next)
}

/// Kicked-top trajectories with `∂S/∂β` recorded at integer kick counts.
#[derive(Clone, Copy, Debug)]
pub struct KickedTopFlow {
    pub map: KickedTopMap,
}

impl KickedTopFlow {
    pub fn new(beta: f64, k: f64) -> Self {
        Self {
            map: KickedTopMap::new(beta, k),
        }
    }
}

impl ActionFlow for KickedTopFlow {
    type Point = SpherePoint;
    type Time = u64;

    fn action_derivatives(&self, start: &SpherePoint, checkpoints: &[u64], out: &mut [f64]) {
        let mut p = *start;
        let mut acc = ActionAccumulator::new();
        for (slot, &t) in out.iter_mut().zip(checkpoints) {
            while acc.steps < t {
                acc.record(&p);
                p = self.map.step(p);
            }
            let v = acc.sum_dsdbeta();
            *slot = if v.is_finite() && p.is_finite() { v } else { f64::NAN };
        }
    }
}
