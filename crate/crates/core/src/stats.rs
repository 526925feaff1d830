//! Summation and weighted-moment helpers with deterministic reduction order.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Pairwise (cascade) sum; the split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Unweighted mean and population variance, both by pairwise summation.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, pairwise_sum(&sq) / n)
}

/// Running weighted mean and second central moment (West's update), with a
/// pairwise merge for combining partial results.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightedMoments {
    pub weight: f64,
    pub mean: f64,
    /// `Σ w (a - mean)^2`.
    pub m2: f64,
    pub count: u64,
}

impl WeightedMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, w: f64, a: f64) {
        if w == 0.0 {
            self.count += 1;
            return;
        }
        self.weight += w;
        let delta = a - self.mean;
        self.mean += delta * (w / self.weight);
        self.m2 += w * delta * (a - self.mean);
        self.count += 1;
    }

    pub fn merge(&self, other: &WeightedMoments) -> WeightedMoments {
        if other.weight == 0.0 {
            return WeightedMoments { count: self.count + other.count, ..*self };
        }
        if self.weight == 0.0 {
            return WeightedMoments { count: self.count + other.count, ..*other };
        }
        let weight = self.weight + other.weight;
        let delta = other.mean - self.mean;
        WeightedMoments {
            weight,
            mean: self.mean + delta * (other.weight / weight),
            m2: self.m2 + other.m2 + delta * delta * (self.weight * other.weight / weight),
            count: self.count + other.count,
        }
    }

    /// Population variance `Σ w (a - mean)^2 / Σ w`.
    pub fn variance(&self) -> f64 {
        if self.weight > 0.0 {
            (self.m2 / self.weight).max(0.0)
        } else {
            f64::NAN
        }
    }
}

/// Weighted moments of `(w_i, a_i)`, accumulated over fixed-size blocks that
/// are merged pairwise, so the result does not depend on how blocks are
/// scheduled.
pub fn weighted_moments(weights: &[f64], values: &[f64]) -> WeightedMoments {
    assert_eq!(weights.len(), values.len());
    let blocks: Vec<WeightedMoments> = weights
        .chunks(MOMENT_BLOCK)
        .zip(values.chunks(MOMENT_BLOCK))
        .map(|(w, a)| {
            let mut m = WeightedMoments::new();
            for (wi, ai) in w.iter().zip(a) {
                m.push(*wi, *ai);
            }
            m
        })
        .collect();
    merge_pairwise(&blocks)
}

/// Block length used by [`weighted_moments`] and the ensemble reductions.
pub const MOMENT_BLOCK: usize = 1024;

pub fn merge_pairwise(parts: &[WeightedMoments]) -> WeightedMoments {
    match parts.len() {
        0 => WeightedMoments::new(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            merge_pairwise(a).merge(&merge_pairwise(b))
        }
    }
}
