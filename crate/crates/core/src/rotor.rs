//! Quantum kicked rotor on an `M`-site position grid and the classical
//! standard map, with the kick strength `k` as estimation parameter.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{propagate_bundle, FloquetBundle};
use crate::linalg::{self, c64, CMat};
use crate::semiclassical::ActionFlow;
use crate::stats::KahanSum;

/// Images summed on each side when periodizing a coherent state.
const COHERENT_IMAGES: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    /// Hilbert space dimension (even).
    pub m: usize,
    pub k: f64,
    pub t: u64,
}

impl RotorParams {
    /// The Floquet kernel `exp(iπ(a-b)^2/M)` is periodic in `a - b` only for
    /// even `M`, so odd dimensions are rejected.
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m % 2 != 0 {
            return Err(Error::Domain(format!(
                "rotor dimension M = {} must be even and at least 2",
                self.m
            )));
        }
        if !self.k.is_finite() {
            return Err(Error::Domain(format!("k = {} must be finite", self.k)));
        }
        Ok(())
    }

    /// `ħ_eff = 2π/M`.
    pub fn hbar_eff(&self) -> f64 {
        TAU / self.m as f64
    }

    /// Heisenberg time taken as the Hilbert space dimension.
    pub fn heisenberg_time(&self) -> f64 {
        self.m as f64
    }
}

/// Point `(x, p)` on the torus `[0, 2π)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub p: f64,
}

impl TorusPoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self {
            x: x.rem_euclid(TAU),
            p: p.rem_euclid(TAU),
        }
    }
}

/// `p' = p + k sin x`, then `x' = x + p'`, both mod 2π.
#[inline]
pub fn standard_map_step(pt: TorusPoint, k: f64) -> TorusPoint {
    let p = (pt.p + k * pt.x.sin()).rem_euclid(TAU);
    let x = (pt.x + p).rem_euclid(TAU);
    TorusPoint { x, p }
}

pub fn standard_map_inverse(pt: TorusPoint, k: f64) -> TorusPoint {
    let x = (pt.x - pt.p).rem_euclid(TAU);
    let p = (pt.p - k * x.sin()).rem_euclid(TAU);
    TorusPoint { x, p }
}

fn kick_scale(m: usize, n: usize) -> f64 {
    m as f64 / TAU * (TAU * n as f64 / m as f64).cos()
}

/// `U_{ab} = (iM)^{-1/2} exp(iπ(a-b)^2/M - ik (M/2π) cos(2πb/M))` and
/// `∂U/∂k`, which scales column `b` by `-i (M/2π) cos(2πb/M)`.
pub fn rotor_floquet(m: usize, k: f64) -> Result<FloquetBundle> {
    RotorParams { m, k, t: 1 }.validate()?;
    let norm = linalg::cis(-PI / 4.0) / (m as f64).sqrt();
    let kernel: Vec<c64> = (0..m)
        .map(|d| linalg::cis(PI * (d * d % (2 * m)) as f64 / m as f64) * norm)
        .collect();
    let kick: Vec<c64> = (0..m).map(|b| linalg::cis(-k * kick_scale(m, b))).collect();
    let u = CMat::from_fn(m, m, |a, b| kernel[a.abs_diff(b)] * kick[b]);
    let du = CMat::from_fn(m, m, |a, b| {
        let s = kick_scale(m, b);
        u[(a, b)] * c64::new(0.0, -s)
    });
    Ok(FloquetBundle { u, du, t: 1 })
}

pub fn rotor_bundle(params: &RotorParams) -> Result<FloquetBundle> {
    params.validate()?;
    propagate_bundle(rotor_floquet(params.m, params.k)?, params.t)
}

/// Periodized Gaussian wave packet centered at `(x0, p0)` with position and
/// momentum variances `ħ/2`, sampled at `x_n = 2πn/M`.
pub fn rotor_coherent_state(m: usize, x0: f64, p0: f64) -> Result<Vec<c64>> {
    RotorParams { m, k: 0.0, t: 0 }.validate()?;
    if !x0.is_finite() || !p0.is_finite() {
        return Err(Error::Domain(format!("center ({x0}, {p0}) is not finite")));
    }
    let hbar = TAU / m as f64;
    let mut psi: Vec<c64> = (0..m)
        .map(|n| {
            let base = TAU * n as f64 / m as f64 - x0;
            (-COHERENT_IMAGES..=COHERENT_IMAGES).fold(c64::new(0.0, 0.0), |acc, j| {
                let d = base + TAU * j as f64;
                acc + linalg::cis(p0 * d / hbar) * (-d * d / (2.0 * hbar)).exp()
            })
        })
        .collect();
    let norm = linalg::norm_sqr(&psi).sqrt();
    for a in &mut psi {
        *a /= norm;
    }
    Ok(psi)
}

/// Standard-map trajectories with `∂S/∂k = -Σ cos x` over pre-kick positions.
#[derive(Clone, Copy, Debug)]
pub struct RotorFlow {
    pub k: f64,
}

impl ActionFlow for RotorFlow {
    type Point = [f64; 2];
    type Time = u64;

    fn action_derivatives(&self, start: &[f64; 2], checkpoints: &[u64], out: &mut [f64]) {
        let mut pt = TorusPoint::new(start[0], start[1]);
        let mut sum = KahanSum::new();
        let mut steps = 0u64;
        for (slot, &t) in out.iter_mut().zip(checkpoints) {
            while steps < t {
                sum.add(-pt.x.cos());
                pt = standard_map_step(pt, self.k);
                steps += 1;
            }
            let v = sum.value();
            *slot = if v.is_finite() { v } else { f64::NAN };
        }
    }
}
