//! Semiclassical QFI `I_sc = (4/ħ^2) var(∂S/∂θ)` over a Gaussian ensemble of
//! initial phase-space points.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kicked_top::SpherePoint;
use crate::stats::{merge_pairwise, pairwise_sum, WeightedMoments, MOMENT_BLOCK};

/// Largest fraction of ensemble points allowed to fail (escape or produce
/// non-finite values) before a result is rejected.
pub const MAX_FAILED_FRACTION: f64 = 1e-3;

/// A classical flow that reports the parametric action derivative of a
/// trajectory at a list of increasing times.
pub trait ActionFlow: Sync {
    type Point: Copy + Send + Sync;
    type Time: Copy + Send + Sync;

    /// Writes `∂S/∂θ` at each checkpoint into `out`. Checkpoints the
    /// trajectory does not reach with finite values are written as NaN.
    fn action_derivatives(&self, start: &Self::Point, checkpoints: &[Self::Time], out: &mut [f64]);
}

/// Indexed, weighted set of initial points.
pub trait PointSource<P>: Sync {
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> P;
    fn weight(&self, i: usize) -> f64;
    fn hbar(&self) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CapProjection {
    /// Rings are laid out in the tangent plane and projected orthogonally onto
    /// the sphere; weights are Gaussian in the tangent-plane radius.
    #[default]
    Orthographic,
    /// Rings are mapped along geodesics; weights are Gaussian in arc length.
    Geodesic,
}

/// Weight given to each cap-grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CapWeighting {
    /// Gaussian density times the area of the point's cell: `π/4` for the
    /// center and `2πi/⌈2πi⌉` for ring `i`, in units of `d0^2`.
    #[default]
    CellArea,
    /// Gaussian density only. The surplus `⌈2πi⌉ - 2πi` points per ring bias
    /// the variance low by about `0.05/r`.
    Point,
}

/// Rejection rule applied to Monte Carlo samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum McCutoff {
    /// Keep samples with `|z - z0|^2 / ħ < value`.
    Scaled(f64),
    /// Keep samples with `|z - z0|^2 < value`.
    Absolute(f64),
    None,
}

impl Default for McCutoff {
    fn default() -> Self {
        McCutoff::Scaled(9.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleKind {
    CapGrid {
        r: u32,
        reff_multiple: f64,
        projection: CapProjection,
        weighting: CapWeighting,
    },
    SquareGrid {
        r: u32,
        reff_multiple: f64,
    },
    MonteCarlo {
        n: usize,
        seed: u64,
        cutoff: McCutoff,
        accepted: usize,
    },
}

/// Weighted initial points representing a coherent state.
#[derive(Clone, Debug)]
pub struct GaussianEnsemble<P> {
    pub points: Vec<P>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
    pub hbar: f64,
    pub kind: EnsembleKind,
}

impl<P: Copy + Sync> PointSource<P> for GaussianEnsemble<P> {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> P {
        self.points[i]
    }
    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
}

fn normalize(weights: &mut [f64]) -> Result<()> {
    let total = pairwise_sum(weights);
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical(format!("ensemble weights sum to {total}")));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(())
}

/// Number of points of an `r`-ring cap, `1 + Σ_{i=1}^{r} ⌈2πi⌉`.
pub fn ring_point_count(rings: u32) -> usize {
    1 + (1..=rings).map(|i| ring_population(i)).sum::<usize>()
}

fn ring_population(i: u32) -> usize {
    (TAU * i as f64).ceil() as usize
}

/// Cap-grid offsets in a local frame, independent of the cap center.
///
/// Ring `i` sits at radius `i d0` with `d0 = σ/r`, `σ = 1/sqrt(2J+1)`, holds
/// `⌈2πi⌉` equally spaced points starting along the local east direction,
/// and rings extend to `reff_multiple σ`.
#[derive(Clone, Debug)]
pub struct CapGridTemplate {
    /// `(east, south, normal)` components of each point.
    offsets: Vec<[f64; 3]>,
    weights: Vec<f64>,
    hbar: f64,
    kind: EnsembleKind,
}

impl CapGridTemplate {
    pub fn new(j: f64, r: u32, reff_multiple: f64, projection: CapProjection) -> Result<Self> {
        Self::with_weighting(j, r, reff_multiple, projection, CapWeighting::default())
    }

    pub fn with_weighting(
        j: f64,
        r: u32,
        reff_multiple: f64,
        projection: CapProjection,
        weighting: CapWeighting,
    ) -> Result<Self> {
        crate::spin::two_j_of(j)?;
        if r == 0 {
            return Err(Error::Domain("cap resolution r must be at least 1".into()));
        }
        if !(reff_multiple > 0.0) {
            return Err(Error::Domain(format!(
                "cap radius multiple {reff_multiple} must be positive"
            )));
        }
        let two_j1 = 2.0 * j + 1.0;
        let sigma = 1.0 / two_j1.sqrt();
        let reff = reff_multiple * sigma;
        if reff >= std::f64::consts::PI {
            return Err(Error::Domain(format!(
                "cap radius {reff} reaches the antipode (J = {j} too small)"
            )));
        }
        let d0 = sigma / r as f64;
        let rings = (reff_multiple * r as f64 + 1e-9).floor() as u32;
        let mut offsets = Vec::with_capacity(ring_point_count(rings));
        let mut weights = Vec::with_capacity(offsets.capacity());
        offsets.push([0.0, 0.0, 1.0]);
        weights.push(match weighting {
            CapWeighting::CellArea => std::f64::consts::FRAC_PI_4,
            CapWeighting::Point => 1.0,
        });
        for i in 1..=rings {
            let rho = i as f64 * d0;
            let (radial, normal) = match projection {
                CapProjection::Orthographic => {
                    if rho >= 1.0 {
                        break;
                    }
                    (rho, (1.0 - rho * rho).sqrt())
                }
                CapProjection::Geodesic => (rho.sin(), rho.cos()),
            };
            let count = ring_population(i);
            let w = (-0.5 * two_j1 * rho * rho).exp()
                * match weighting {
                    CapWeighting::CellArea => TAU * i as f64 / count as f64,
                    CapWeighting::Point => 1.0,
                };
            for a in 0..count {
                let (s, c) = (TAU * a as f64 / count as f64).sin_cos();
                offsets.push([radial * c, radial * s, normal]);
                weights.push(w);
            }
        }
        normalize(&mut weights)?;
        Ok(Self {
            offsets,
            weights,
            hbar: 1.0 / (j + 0.5),
            kind: EnsembleKind::CapGrid {
                r,
                reff_multiple,
                projection,
                weighting,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    /// The grid centered on `(θ, φ)`.
    pub fn place(&self, theta: f64, phi: f64) -> PlacedCap<'_> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        PlacedCap {
            template: self,
            east: [-sp, cp, 0.0],
            south: [ct * cp, ct * sp, -st],
            normal: [st * cp, st * sp, ct],
        }
    }

    /// Materialized ensemble centered on `(θ, φ)`.
    pub fn build(&self, theta: f64, phi: f64) -> GaussianEnsemble<SpherePoint> {
        let placed = self.place(theta, phi);
        GaussianEnsemble {
            points: (0..self.len()).map(|i| placed.point(i)).collect(),
            weights: self.weights.clone(),
            hbar: self.hbar,
            kind: self.kind.clone(),
        }
    }
}

/// A cap template positioned at a center; points are generated on demand.
#[derive(Clone, Copy, Debug)]
pub struct PlacedCap<'a> {
    template: &'a CapGridTemplate,
    east: [f64; 3],
    south: [f64; 3],
    normal: [f64; 3],
}

impl PointSource<SpherePoint> for PlacedCap<'_> {
    fn len(&self) -> usize {
        self.template.len()
    }
    #[inline]
    fn point(&self, i: usize) -> SpherePoint {
        let [u, v, h] = self.template.offsets[i];
        let c = |k: usize| u * self.east[k] + v * self.south[k] + h * self.normal[k];
        SpherePoint::new(c(0), c(1), c(2))
    }
    fn weight(&self, i: usize) -> f64 {
        self.template.weights[i]
    }
    fn hbar(&self) -> f64 {
        self.template.hbar
    }
}

/// Spherical cap grid around `(θ, φ)` for spin `J`.
pub fn build_cap_grid(
    j: f64,
    theta: f64,
    phi: f64,
    r: u32,
    reff_multiple: f64,
    projection: CapProjection,
) -> Result<GaussianEnsemble<SpherePoint>> {
    Ok(CapGridTemplate::new(j, r, reff_multiple, projection)?.build(theta, phi))
}

/// Square grid of spacing `σ/r` around `center` in a flat two-dimensional
/// phase space, with `σ = sqrt(ħ/2)`, a circular cutoff at `reff_multiple σ`
/// and weights `exp(-|z - z0|^2/ħ)`.
pub fn build_square_grid(
    center: [f64; 2],
    hbar: f64,
    r: u32,
    reff_multiple: f64,
) -> Result<GaussianEnsemble<[f64; 2]>> {
    if !(hbar > 0.0) || r == 0 || !(reff_multiple > 0.0) {
        return Err(Error::Domain(format!(
            "square grid needs hbar > 0, r >= 1, positive radius (got {hbar}, {r}, {reff_multiple})"
        )));
    }
    let sigma = (hbar / 2.0).sqrt();
    let spacing = sigma / r as f64;
    let reach = (reff_multiple * r as f64 + 1e-9).floor() as i64;
    let limit = (reach * reach) as f64 + 1e-9;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            let q = (a * a + b * b) as f64;
            if q > limit {
                continue;
            }
            let (dx, dp) = (a as f64 * spacing, b as f64 * spacing);
            points.push([center[0] + dx, center[1] + dp]);
            weights.push((-(dx * dx + dp * dp) / hbar).exp());
        }
    }
    normalize(&mut weights)?;
    Ok(GaussianEnsemble {
        points,
        weights,
        hbar,
        kind: EnsembleKind::SquareGrid { r, reff_multiple },
    })
}

/// `n` Gaussian samples around `center` with per-coordinate variance `ħ/2`,
/// filtered by `cutoff` and given equal weights.
pub fn build_mc_ensemble<const D: usize>(
    center: [f64; D],
    hbar: f64,
    n: usize,
    seed: u64,
    cutoff: McCutoff,
) -> Result<GaussianEnsemble<[f64; D]>> {
    if n == 0 {
        return Err(Error::Usage("Monte Carlo ensemble needs n >= 1".into()));
    }
    if !(hbar > 0.0) {
        return Err(Error::Domain(format!("hbar = {hbar} must be positive")));
    }
    let normal = Normal::new(0.0, (hbar / 2.0).sqrt())
        .map_err(|e| Error::Domain(format!("sampling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = center;
        let mut d2 = 0.0;
        for x in p.iter_mut() {
            let dx = normal.sample(&mut rng);
            *x += dx;
            d2 += dx * dx;
        }
        let keep = match cutoff {
            McCutoff::Scaled(c) => d2 / hbar < c,
            McCutoff::Absolute(c) => d2 < c,
            McCutoff::None => true,
        };
        if keep {
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(Error::Usage(format!(
            "cutoff {cutoff:?} rejected all {n} samples"
        )));
    }
    let accepted = points.len();
    Ok(GaussianEnsemble {
        weights: vec![1.0 / accepted as f64; accepted],
        points,
        hbar,
        kind: EnsembleKind::MonteCarlo {
            n,
            seed,
            cutoff,
            accepted,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalResult {
    pub i_sc: f64,
    pub mean_ds: f64,
    pub var_ds: f64,
    pub n_points: usize,
    /// Points excluded because they escaped or became non-finite.
    pub failed: usize,
    /// Set when fewer than two points contributed, so the variance is zero
    /// by construction.
    pub degenerate: bool,
}

impl SemiclassicalResult {
    fn from_moments(m: &WeightedMoments, hbar: f64, n_points: usize, failed: usize) -> Self {
        let var = if m.count - failed as u64 > 0 { m.variance() } else { f64::NAN };
        let degenerate = n_points - failed < 2;
        SemiclassicalResult {
            i_sc: 4.0 / (hbar * hbar) * var,
            mean_ds: m.mean,
            var_ds: var,
            n_points,
            failed,
            degenerate,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SemiclassicalOptions {
    pub max_failed_fraction: f64,
}

impl Default for SemiclassicalOptions {
    fn default() -> Self {
        Self {
            max_failed_fraction: MAX_FAILED_FRACTION,
        }
    }
}

/// `I_sc` at every checkpoint, evolving each ensemble point once.
///
/// Points are processed in fixed blocks whose partial moments are merged in a
/// fixed pairwise order, so results do not depend on the thread count.
pub fn semiclassical_series<F, S>(
    source: &S,
    flow: &F,
    checkpoints: &[F::Time],
    options: &SemiclassicalOptions,
) -> Result<Vec<SemiclassicalResult>>
where
    F: ActionFlow,
    S: PointSource<F::Point>,
{
    let n = source.len();
    if n == 0 {
        return Err(Error::Usage("empty ensemble".into()));
    }
    let nc = checkpoints.len();
    let blocks: Vec<(Vec<WeightedMoments>, Vec<usize>)> = (0..n.div_ceil(MOMENT_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut moments = vec![WeightedMoments::new(); nc];
            let mut failed = vec![0usize; nc];
            let mut out = vec![0.0; nc];
            for i in b * MOMENT_BLOCK..((b + 1) * MOMENT_BLOCK).min(n) {
                flow.action_derivatives(&source.point(i), checkpoints, &mut out);
                let w = source.weight(i);
                for c in 0..nc {
                    if out[c].is_finite() {
                        moments[c].push(w, out[c]);
                    } else {
                        moments[c].count += 1;
                        failed[c] += 1;
                    }
                }
            }
            (moments, failed)
        })
        .collect();
    let mut results = Vec::with_capacity(nc);
    for c in 0..nc {
        let parts: Vec<WeightedMoments> = blocks.iter().map(|(m, _)| m[c]).collect();
        let failed: usize = blocks.iter().map(|(_, f)| f[c]).sum();
        let merged = merge_pairwise(&parts);
        let result = SemiclassicalResult::from_moments(&merged, source.hbar(), n, failed);
        if failed as f64 > options.max_failed_fraction * n as f64 {
            return Err(Error::Numerical(format!(
                "{failed} of {n} trajectories failed at checkpoint {c} (limit {:.3}%)",
                100.0 * options.max_failed_fraction
            )));
        }
        if failed > 0 {
            log::warn!("{failed} of {n} trajectories excluded at checkpoint {c}");
        }
        results.push(result);
    }
    Ok(results)
}

pub fn semiclassical_qfi<F, S>(source: &S, flow: &F, t: F::Time) -> Result<SemiclassicalResult>
where
    F: ActionFlow,
    S: PointSource<F::Point>,
{
    Ok(semiclassical_series(source, flow, &[t], &SemiclassicalOptions::default())?
        .pop()
        .expect("one checkpoint"))
}

/// Per-point action derivatives, `values[checkpoint][point]` (NaN for
/// failed points).
pub fn collect_action_derivatives<F, S>(
    source: &S,
    flow: &F,
    checkpoints: &[F::Time],
) -> Vec<Vec<f64>>
where
    F: ActionFlow,
    S: PointSource<F::Point>,
{
    let n = source.len();
    let nc = checkpoints.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; nc];
            flow.action_derivatives(&source.point(i), checkpoints, &mut out);
            out
        })
        .collect();
    (0..nc).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

/// Bootstrap standard error of `(4/ħ^2) var(a)` for equally weighted samples;
/// non-finite entries are skipped.
pub fn bootstrap_standard_error(values: &[f64], hbar: f64, resamples: usize, seed: u64) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let estimates: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut m = WeightedMoments::new();
            for _ in 0..n {
                m.push(1.0, finite[rng.random_range(0..n)]);
            }
            4.0 / (hbar * hbar) * m.variance()
        })
        .collect();
    let (_, var) = crate::stats::mean_and_variance(&estimates);
    (var * resamples as f64 / (resamples - 1) as f64).sqrt()
}
