//! Discrete-distribution companion loop: world, human and model
//! distributions over `K` symbols, evolved exactly (no sampling) through
//! offloading, recursive training and finite-corpus tail loss.
//!
//! One generation:
//! 1. `human' = (1-u)·world + u·sharpen(model, τ)`
//! 2. `mix    = (1-λ)·human' + λ·model`
//! 3. `model' = truncate(mix, ε_tail)`
//!
//! Entropies, divergences and mutual information are in nats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Violations;

/// Tolerance on `Σp = 1`.
pub const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfoError {
    #[error("distribution needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("probability at index {index} is {value}; entries must be finite and >= 0")]
    BadEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("distribution has no mass to normalize")]
    ZeroMass,
    #[error("tail truncation at epsilon = {0} removes every symbol")]
    TruncatedAway(f64),
    #[error("symbol counts differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(Violations),
}

/// A probability vector over `K >= 2` symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dist(Vec<f64>);

impl Dist {
    /// Accepts `probs` only if it is already normalized.
    pub fn new(probs: Vec<f64>) -> Result<Self, InfoError> {
        Self::check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(InfoError::NotNormalized(sum));
        }
        Ok(Dist(probs))
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalize(weights: Vec<f64>) -> Result<Self, InfoError> {
        Self::check_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(InfoError::ZeroMass);
        }
        Ok(Dist(weights.into_iter().map(|w| w / sum).collect()))
    }

    fn check_entries(w: &[f64]) -> Result<(), InfoError> {
        if w.len() < 2 {
            return Err(InfoError::TooFewSymbols(w.len()));
        }
        match w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            Some(index) => Err(InfoError::BadEntry {
                index,
                value: w[index],
            }),
            None => Ok(()),
        }
    }

    pub fn uniform(k: usize) -> Result<Self, InfoError> {
        Self::normalize(vec![1.0; k])
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self, InfoError> {
        let mut w = vec![0.0; k];
        if at < k {
            w[at] = 1.0;
        }
        Self::normalize(w)
    }

    /// Mass proportional to `rank^-exponent`, ranks starting at 1.
    pub fn zipf(k: usize, exponent: f64) -> Result<Self, InfoError> {
        Self::normalize((1..=k).map(|r| (r as f64).powf(-exponent)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Number of symbols with mass `>= eps` (strictly positive mass when
    /// `eps == 0`).
    pub fn support(&self, eps: f64) -> usize {
        self.0.iter().filter(|&&p| p > 0.0 && p >= eps).count()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// `(1-w)·self + w·other`, renormalized.
    pub fn mix(&self, other: &Dist, w: f64) -> Result<Dist, InfoError> {
        same_size(self, other)?;
        Dist::normalize(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }
}

fn same_size(p: &Dist, q: &Dist) -> Result<(), InfoError> {
    if p.len() == q.len() {
        Ok(())
    } else {
        Err(InfoError::SizeMismatch(p.len(), q.len()))
    }
}

/// `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn shannon_entropy(d: &Dist) -> f64 {
    -d.0.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// `KL(p ‖ q̃)` where `q̃ = (q + smoothing) / (1 + K·smoothing)`.
pub fn kl_divergence(p: &Dist, q: &Dist, smoothing: f64) -> Result<f64, InfoError> {
    same_size(p, q)?;
    let z = 1.0 + smoothing * q.len() as f64;
    let kl: f64 =
        p.0.iter()
            .zip(&q.0)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(&pi, &qi)| pi * (pi / ((qi + smoothing) / z)).ln())
            .sum();
    // Rounding can leave a tiny negative value when p == q̃.
    Ok(kl.max(0.0))
}

/// `I(X;Y)` of a joint distribution given as rows `joint[x][y]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> f64 {
    let ny = joint.first().map_or(0, Vec::len);
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let py: Vec<f64> = (0..ny)
        .map(|y| joint.iter().map(|row| row[y]).sum())
        .collect();
    let mut mi = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &pxy) in row.iter().enumerate() {
            if pxy > 0.0 {
                mi += pxy * (pxy / (px[x] * py[y])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Raises each mass to `1/τ` and renormalizes. `τ = 1` is the identity;
/// smaller `τ` concentrates mass on the mode.
pub fn sharpen(d: &Dist, tau: f64) -> Result<Dist, InfoError> {
    let top = d.0.iter().copied().fold(0.0, f64::max);
    let exponent = 1.0 / tau;
    Dist::normalize(d.0.iter().map(|&p| (p / top).powf(exponent)).collect())
}

/// Zeroes every cell below `eps` and renormalizes.
pub fn truncate(d: &Dist, eps: f64) -> Result<Dist, InfoError> {
    let kept: Vec<f64> = d.0.iter().map(|&p| if p < eps { 0.0 } else { p }).collect();
    Dist::normalize(kept).map_err(|e| match e {
        InfoError::ZeroMass => InfoError::TruncatedAway(eps),
        other => other,
    })
}

/// Copy-persistence joint: `p(x, y) = prev(x)·[κ·1{y = x} + (1-κ)·next(y)]`.
pub fn persistence_joint(prev: &Dist, next: &Dist, kappa: f64) -> Result<Vec<Vec<f64>>, InfoError> {
    same_size(prev, next)?;
    Ok(prev
        .0
        .iter()
        .enumerate()
        .map(|(x, &px)| {
            next.0
                .iter()
                .enumerate()
                .map(|(y, &ny)| px * (if x == y { kappa } else { 0.0 } + (1.0 - kappa) * ny))
                .collect()
        })
        .collect())
}

/// Mutual information between consecutive human generations under the
/// copy-persistence channel. Bounded above by `H(prev)`.
pub fn consecutive_mi(prev: &Dist, next: &Dist, kappa: f64) -> Result<f64, InfoError> {
    Ok(mutual_information(&persistence_joint(prev, next, kappa)?))
}

pub const DEFAULT_EPSILON_TAIL: f64 = 1e-4;
pub const DEFAULT_KAPPA: f64 = 0.5;
pub const DEFAULT_SMOOTHING: f64 = 1e-12;

/// Sharpening temperature used when none is given: `1 - 0.8·u`.
pub fn default_tau(u: f64) -> f64 {
    1.0 - 0.8 * u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoConfig {
    /// Offloading degree.
    pub u: f64,
    /// Synthetic fraction of the training mix.
    pub lambda: f64,
    /// Sharpening temperature.
    pub tau: f64,
    pub epsilon_tail: f64,
    /// Copy persistence of the generational channel.
    pub kappa: f64,
    /// KL floor applied to the second argument.
    pub smoothing: f64,
}

impl InfoConfig {
    /// Defaults tied to `u`: `λ = u`, `τ = 1 - 0.8·u`.
    pub fn for_offloading(u: f64) -> Self {
        Self {
            u,
            lambda: u,
            tau: default_tau(u),
            epsilon_tail: DEFAULT_EPSILON_TAIL,
            kappa: DEFAULT_KAPPA,
            smoothing: DEFAULT_SMOOTHING,
        }
    }

    pub fn validate(&self) -> Result<(), Violations> {
        let mut v = Violations::default();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.u) {
            v.push("infodyn.u", "must lie in [0,1]");
        }
        if !unit(self.lambda) {
            v.push("infodyn.lambda", "must lie in [0,1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            v.push("infodyn.tau", "must lie in (0,1]");
        }
        if !(self.epsilon_tail.is_finite() && self.epsilon_tail >= 0.0) {
            v.push("infodyn.epsilon_tail", "must be >= 0");
        }
        if !unit(self.kappa) {
            v.push("infodyn.kappa", "must lie in [0,1]");
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            v.push("infodyn.smoothing", "must be > 0");
        }
        v.into_result()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationState {
    pub world: Dist,
    pub human: Dist,
    pub model: Dist,
    pub generation: u32,
}

fn human_update(world: &Dist, model: &Dist, cfg: &InfoConfig) -> Result<Dist, InfoError> {
    world.mix(&sharpen(model, cfg.tau)?, cfg.u)
}

impl GenerationState {
    /// Generation 0: the model has been trained on the world distribution and
    /// humans already offload to it at level `u`.
    pub fn initial(world: Dist, cfg: &InfoConfig) -> Result<Self, InfoError> {
        cfg.validate().map_err(InfoError::Config)?;
        let model = world.clone();
        let human = human_update(&world, &model, cfg)?;
        Ok(Self {
            world,
            human,
            model,
            generation: 0,
        })
    }
}

/// Advances the loop by one generation. The world distribution is carried
/// over unchanged.
pub fn step_generation(
    state: &GenerationState,
    cfg: &InfoConfig,
) -> Result<GenerationState, InfoError> {
    cfg.validate().map_err(InfoError::Config)?;
    same_size(&state.world, &state.human)?;
    same_size(&state.world, &state.model)?;
    let human = human_update(&state.world, &state.model, cfg)?;
    let mix = human.mix(&state.model, cfg.lambda)?;
    let model = truncate(&mix, cfg.epsilon_tail)?;
    Ok(GenerationState {
        world: state.world.clone(),
        human,
        model,
        generation: state.generation + 1,
    })
}

/// Diagnostics recorded for one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub generation: u32,
    pub entropy_human: f64,
    pub entropy_model: f64,
    pub kl_model_human: f64,
    pub kl_model_world: f64,
    /// Model symbols with mass `>= epsilon_tail`.
    pub tail_support: usize,
    /// `I(H_{t-1}; H_t)`; absent at generation 0.
    pub mi_consecutive: Option<f64>,
}

pub fn metrics(
    state: &GenerationState,
    prev_human: Option<&Dist>,
    cfg: &InfoConfig,
) -> Result<GenerationMetrics, InfoError> {
    Ok(GenerationMetrics {
        generation: state.generation,
        entropy_human: shannon_entropy(&state.human),
        entropy_model: shannon_entropy(&state.model),
        kl_model_human: kl_divergence(&state.model, &state.human, cfg.smoothing)?,
        kl_model_world: kl_divergence(&state.model, &state.world, cfg.smoothing)?,
        tail_support: state.model.support(cfg.epsilon_tail),
        mi_consecutive: prev_human
            .map(|prev| consecutive_mi(prev, &state.human, cfg.kappa))
            .transpose()?,
    })
}

/// Iterates the loop `generations` times, returning metrics for generations
/// `0..=generations`.
pub fn run_generations(
    init: &GenerationState,
    cfg: &InfoConfig,
    generations: u32,
) -> Result<Vec<GenerationMetrics>, InfoError> {
    if generations < 2 {
        let mut v = Violations::default();
        v.push("generations", "must be >= 2");
        return Err(InfoError::Config(v));
    }
    let mut out = Vec::with_capacity(generations as usize + 1);
    out.push(metrics(init, None, cfg)?);
    let mut state = init.clone();
    for _ in 0..generations {
        let next = step_generation(&state, cfg)?;
        out.push(metrics(&next, Some(&state.human), cfg)?);
        state = next;
    }
    Ok(out)
}

/// Theil–Sen slope of `ys` against their index: the median of all pairwise
/// slopes.
pub fn theil_sen_slope(ys: &[f64]) -> Option<f64> {
    let mut slopes = Vec::with_capacity(ys.len() * ys.len().saturating_sub(1) / 2);
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            slopes.push((ys[j] - ys[i]) / (j - i) as f64);
        }
    }
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    let n = slopes.len();
    Some(if n % 2 == 1 {
        slopes[n / 2]
    } else {
        0.5 * (slopes[n / 2 - 1] + slopes[n / 2])
    })
}
