use serde::{Deserialize, Serialize};

use super::{perturbation, ESCAPE_BOUND};
use crate::error::{Error, Result};
use crate::semiclassical::ActionFlow;
use crate::stats::KahanSum;

/// Phase-space point `(x, y, p_x, p_y)` together with the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HHState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
    pub lambda: f64,
}

impl HHState {
    pub fn new(x: f64, y: f64, px: f64, py: f64, lambda: f64) -> Self {
        Self { x, y, px, py, lambda }
    }

    /// State on the energy shell `energy` with `p_y > 0`.
    pub fn on_shell(x: f64, y: f64, px: f64, lambda: f64, energy: f64) -> Result<Self> {
        let py2 = 2.0 * energy - px * px - x * x - y * y - 2.0 * lambda * perturbation(x, y);
        if !(py2 >= 0.0) {
            return Err(Error::Domain(format!(
                "no real p_y at (x={x}, y={y}, p_x={px}) for E = {energy}"
            )));
        }
        Ok(Self::new(x, y, px, py2.sqrt(), lambda))
    }

    pub fn energy(&self) -> f64 {
        0.5 * (self.px * self.px + self.py * self.py + self.x * self.x + self.y * self.y)
            + self.lambda * perturbation(self.x, self.y)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn from_array(z: [f64; 4], lambda: f64) -> Self {
        Self::new(z[0], z[1], z[2], z[3], lambda)
    }

    pub fn escaped(&self) -> bool {
        !(self.x.abs() <= ESCAPE_BOUND && self.y.abs() <= ESCAPE_BOUND)
            || !self.px.is_finite()
            || !self.py.is_finite()
    }
}

const CBRT2: f64 = 1.259_921_049_894_873_2;
const W1: f64 = 1.0 / (2.0 - CBRT2);
const W0: f64 = -CBRT2 * W1;
/// Drift coefficients of the fourth-order Yoshida composition.
const DRIFT: [f64; 4] = [W1 / 2.0, (W0 + W1) / 2.0, (W0 + W1) / 2.0, W1 / 2.0];
/// Kick coefficients.
const KICK: [f64; 3] = [W1, W0, W1];

/// One fourth-order symplectic step (drift-kick-...-drift).
#[inline]
pub fn yoshida_step(s: &mut HHState, dt: f64) {
    for i in 0..3 {
        s.x += DRIFT[i] * dt * s.px;
        s.y += DRIFT[i] * dt * s.py;
        let h = KICK[i] * dt;
        s.px -= h * (s.x + 2.0 * s.lambda * s.x * s.y);
        s.py -= h * (s.y + s.lambda * (s.x * s.x - s.y * s.y));
    }
    s.x += DRIFT[3] * dt * s.px;
    s.y += DRIFT[3] * dt * s.py;
}

/// Result of [`hh_integrate`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// States at `t = 0, dt, 2 dt, ...`.
    pub states: Vec<HHState>,
    pub dt: f64,
    /// `∂S/∂λ = -∫ H' dt` over the integrated span.
    pub ds_dlambda: f64,
    /// Time of escape, if the trajectory left the bound region.
    pub escaped_at: Option<f64>,
    pub max_energy_drift: f64,
}

/// Composite Simpson rule on equally spaced samples; an odd number of
/// intervals closes with the three-eighths rule on the last three.
pub fn simpson(samples: &[f64], dt: f64) -> f64 {
    let intervals = samples.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        1 => 0.5 * dt * (samples[0] + samples[1]),
        _ => {
            let even = if intervals % 2 == 0 { intervals } else { intervals - 3 };
            let mut acc = KahanSum::new();
            for pair in (0..even).step_by(2) {
                acc.add(dt / 3.0 * (samples[pair] + 4.0 * samples[pair + 1] + samples[pair + 2]));
            }
            if even < intervals {
                let f = &samples[even..];
                acc.add(3.0 * dt / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]));
            }
            acc.value()
        }
    }
}

/// Integrates from `start` to `t_final` with fixed step `dt`, recording
/// every state and `∂S/∂λ`. Integration stops at escape.
pub fn hh_integrate(start: HHState, t_final: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Usage(format!("need dt > 0 and t >= 0 (dt = {dt}, t = {t_final})")));
    }
    let steps = (t_final / dt).round() as usize;
    let e0 = start.energy();
    let mut s = start;
    let mut states = Vec::with_capacity(steps + 1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut drift = 0.0f64;
    let mut escaped_at = None;
    states.push(s);
    samples.push(perturbation(s.x, s.y));
    for n in 1..=steps {
        yoshida_step(&mut s, dt);
        if s.escaped() {
            escaped_at = Some(n as f64 * dt);
            break;
        }
        drift = drift.max((s.energy() - e0).abs());
        states.push(s);
        samples.push(perturbation(s.x, s.y));
    }
    Ok(Trajectory {
        ds_dlambda: -simpson(&samples, dt),
        states,
        dt,
        escaped_at,
        max_energy_drift: drift,
    })
}

/// Crossings of the section `y = 0` with `p_y > 0`, as `(x, p_x)` pairs
/// interpolated linearly between steps.
pub fn poincare_section(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.states
        .windows(2)
        .filter(|w| w[0].y < 0.0 && w[1].y >= 0.0 && w[1].py > 0.0)
        .map(|w| {
            let f = -w[0].y / (w[1].y - w[0].y);
            (w[0].x + f * (w[1].x - w[0].x), w[0].px + f * (w[1].px - w[0].px))
        })
        .collect()
}

/// Ensemble flow for the semiclassical QFI. Checkpoint times are rounded to
/// an even number of steps so that the action integral is a pure composite
/// Simpson sum.
#[derive(Clone, Copy, Debug)]
pub struct HenonHeilesFlow {
    pub lambda: f64,
    pub dt: f64,
}

impl HenonHeilesFlow {
    pub fn new(lambda: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !lambda.is_finite() {
            return Err(Error::Usage(format!("invalid flow lambda = {lambda}, dt = {dt}")));
        }
        Ok(Self { lambda, dt })
    }

    /// Number of integration steps used for time `t`.
    pub fn steps_for(&self, t: f64) -> u64 {
        2 * (t / (2.0 * self.dt)).round().max(0.0) as u64
    }
}

impl ActionFlow for HenonHeilesFlow {
    type Point = [f64; 4];
    type Time = f64;

    fn action_derivatives(&self, start: &[f64; 4], checkpoints: &[f64], out: &mut [f64]) {
        let dt = self.dt;
        let mut s = HHState::from_array(*start, self.lambda);
        let mut integral = KahanSum::new();
        let mut steps = 0u64;
        let mut alive = !s.escaped();
        let mut f0 = perturbation(s.x, s.y);
        for (slot, &t) in out.iter_mut().zip(checkpoints) {
            let target = self.steps_for(t);
            while alive && steps < target {
                yoshida_step(&mut s, dt);
                let f1 = perturbation(s.x, s.y);
                yoshida_step(&mut s, dt);
                let f2 = perturbation(s.x, s.y);
                steps += 2;
                if s.escaped() || !f1.is_finite() {
                    alive = false;
                    break;
                }
                integral.add(dt / 3.0 * (f0 + 4.0 * f1 + f2));
                f0 = f2;
            }
            *slot = if alive { -integral.value() } else { f64::NAN };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_limit_is_exact() {
        let start = HHState::new(0.3, -0.1, 0.2, 0.25, 0.0);
        let traj = hh_integrate(start, 10.0, 1e-3).unwrap();
        let end = traj.states.last().unwrap();
        let t: f64 = 10.0;
        assert!((end.x - (0.3 * t.cos() + 0.2 * t.sin())).abs() < 1e-8);
        assert!((end.y - (-0.1 * t.cos() + 0.25 * t.sin())).abs() < 1e-8);
    }

    #[test]
    fn energy_drift_is_small() {
        let start = HHState::on_shell(0.25, 0.0, 0.0, 1.0, 1.0 / 12.0).unwrap();
        let traj = hh_integrate(start, 40.0, 1e-3).unwrap();
        assert!(traj.escaped_at.is_none());
        assert!(traj.max_energy_drift < 1e-8, "{:e}", traj.max_energy_drift);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let dt = 0.1;
        for n in [3usize, 4, 7, 10] {
            let f: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).powi(3) - 2.0 * (i as f64 * dt)).collect();
            let t = n as f64 * dt;
            let exact = t.powi(4) / 4.0 - t * t;
            assert!((simpson(&f, dt) - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn flow_agrees_with_trajectory_integral() {
        let start = HHState::on_shell(0.0, 0.1, 0.25, 1.0, 1.0 / 12.0).unwrap();
        let flow = HenonHeilesFlow::new(1.0, 1e-3).unwrap();
        let mut out = [0.0; 2];
        flow.action_derivatives(&start.as_array(), &[1.0, 3.0], &mut out);
        let traj = hh_integrate(start, 3.0, 1e-3).unwrap();
        assert!((out[1] - traj.ds_dlambda).abs() < 1e-12);
        let short = hh_integrate(start, 1.0, 1e-3).unwrap();
        assert!((out[0] - short.ds_dlambda).abs() < 1e-12);
    }

    #[test]
    fn escape_is_flagged() {
        let start = HHState::new(0.0, 0.5, 0.0, 1.0, 1.0);
        let flow = HenonHeilesFlow::new(1.0, 1e-3).unwrap();
        let mut out = [0.0; 1];
        flow.action_derivatives(&start.as_array(), &[30.0], &mut out);
        assert!(out[0].is_nan());
        assert!(hh_integrate(start, 30.0, 1e-3).unwrap().escaped_at.is_some());
    }

    #[test]
    fn section_points_lie_on_shell() {
        let e = 1.0 / 12.0;
        let start = HHState::on_shell(0.25, 0.0, 0.0, 1.0, e).unwrap();
        let traj = hh_integrate(start, 100.0, 1e-3).unwrap();
        let pts = poincare_section(&traj);
        assert!(pts.len() > 5);
        for (x, px) in pts {
            assert!(x * x + px * px <= 2.0 * e + 1e-5);
        }
    }
}
