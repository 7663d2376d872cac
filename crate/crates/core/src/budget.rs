//! Utility-aware split of a per-pixel budget across (channel, bit-plane) pairs.
//!
//! Minimizing the weighted distortion `Σ W/ε` subject to `Σ ε = ε_total`
//! gives `ε_{c,b} ∝ √W_{c,b}`. [`allocate`] evaluates that closed form and
//! [`solve_numeric`] reaches the same point by bisection on the Lagrange
//! multiplier, without using the square-root formula.

use serde::{Deserialize, Serialize};

use crate::bitplane::BITS;
use crate::error::{invalid, Error, Result};
use crate::raster::ColorSpace;

/// Bit-plane weights proportional to the value each bit contributes.
pub fn significance_weights() -> [f64; BITS] {
    std::array::from_fn(|k| (1u32 << k) as f64)
}

/// Importance weights `W_{c,b} = w_c · w_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    channel: Vec<f64>,
    bit: [f64; BITS],
    /// Planes excluded from the allocation, as `(channel, b)` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    masked: Vec<(usize, usize)>,
}

impl WeightTable {
    pub fn new(channel: Vec<f64>, bit: [f64; BITS]) -> Result<Self> {
        if channel.len() != 1 && channel.len() != 3 {
            return Err(invalid(format!(
                "expected 1 or 3 channel weights, got {}",
                channel.len()
            )));
        }
        if channel
            .iter()
            .chain(bit.iter())
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(invalid("weights must be finite and strictly positive"));
        }
        Ok(Self {
            channel,
            bit,
            masked: Vec::new(),
        })
    }

    /// Y:Cb:Cr channel ratio with significance bit weights.
    pub fn color(y: f64, cb: f64, cr: f64) -> Result<Self> {
        Self::new(vec![y, cb, cr], significance_weights())
    }

    /// The 4:1:1 luma-heavy default.
    pub fn default_color() -> Self {
        Self::color(4.0, 1.0, 1.0).expect("default weights are valid")
    }

    pub fn grayscale() -> Self {
        Self::new(vec![1.0], significance_weights()).expect("default weights are valid")
    }

    /// Default table for an image in `colorspace`.
    pub fn for_colorspace(colorspace: ColorSpace) -> Self {
        match colorspace {
            ColorSpace::Gray => Self::grayscale(),
            ColorSpace::Rgb | ColorSpace::YCbCr => Self::default_color(),
        }
    }

    /// Same table with every plane except `keep` given zero weight.
    pub fn keep_only(&self, keep: &[(usize, usize)]) -> Result<Self> {
        if keep.is_empty() {
            return Err(invalid("at least one plane must keep its weight"));
        }
        for &(c, b) in keep {
            if c >= self.channels() || !(1..=BITS).contains(&b) {
                return Err(invalid(format!("plane ({c}, {b}) out of range")));
            }
        }
        let masked = self.planes().filter(|id| !keep.contains(id)).collect();
        Ok(Self {
            masked,
            ..self.clone()
        })
    }

    pub fn channels(&self) -> usize {
        self.channel.len()
    }

    pub fn channel_weights(&self) -> &[f64] {
        &self.channel
    }

    pub fn bit_weights(&self) -> &[f64; BITS] {
        &self.bit
    }

    /// Plane ids `(channel, b)` in storage order.
    pub fn planes(&self) -> impl Iterator<Item = (usize, usize)> {
        let channels = self.channels();
        (0..channels).flat_map(|c| (1..=BITS).map(move |b| (c, b)))
    }

    /// Combined weight `W_{c,b}`; zero for masked planes.
    pub fn weight(&self, channel: usize, b: usize) -> f64 {
        if self.masked.contains(&(channel, b)) {
            0.0
        } else {
            self.channel[channel] * self.bit[b - 1]
        }
    }

    fn validate(&self) -> Result<()> {
        if self.channel.len() != 1 && self.channel.len() != 3 {
            return Err(invalid("weight table must cover 1 or 3 channels"));
        }
        if self
            .channel
            .iter()
            .chain(self.bit.iter())
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(invalid("weights must be finite and strictly positive"));
        }
        if self.planes().all(|(c, b)| self.weight(c, b) == 0.0) {
            return Err(invalid("every plane is masked"));
        }
        Ok(())
    }
}

/// Per-plane budgets `ε_{c,b}` in nats, with the weights that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAllocation {
    pub epsilon_total: f64,
    epsilons: Vec<[f64; BITS]>,
    weights: WeightTable,
}

impl BudgetAllocation {
    /// Wraps explicit per-plane budgets; the total is their sum.
    pub fn from_parts(epsilons: Vec<[f64; BITS]>, weights: WeightTable) -> Result<Self> {
        if epsilons.len() != weights.channels() {
            return Err(invalid(
                "budget table and weight table cover different channels",
            ));
        }
        if epsilons
            .iter()
            .flatten()
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(invalid("per-plane budgets must be finite and nonnegative"));
        }
        let epsilon_total = epsilons.iter().flatten().sum();
        Ok(Self {
            epsilon_total,
            epsilons,
            weights,
        })
    }

    /// The same budget on every plane.
    pub fn uniform(weights: WeightTable, per_plane: f64) -> Result<Self> {
        Self::from_parts(vec![[per_plane; BITS]; weights.channels()], weights)
    }

    pub fn channels(&self) -> usize {
        self.epsilons.len()
    }

    pub fn epsilon(&self, channel: usize, b: usize) -> f64 {
        self.epsilons[channel][b - 1]
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    /// `((channel, b), ε)` for every plane.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.weights
            .planes()
            .map(|(c, b)| ((c, b), self.epsilon(c, b)))
    }

    pub fn sum(&self) -> f64 {
        self.epsilons.iter().flatten().sum()
    }

    /// Weighted distortion `Σ W/ε` over planes with positive weight.
    pub fn objective(&self) -> f64 {
        objective(&self.weights, |c, b| self.epsilon(c, b))
    }
}

pub(crate) fn objective(weights: &WeightTable, eps: impl Fn(usize, usize) -> f64) -> f64 {
    weights
        .planes()
        .map(|(c, b)| (weights.weight(c, b), eps(c, b)))
        .filter(|&(w, _)| w > 0.0)
        .map(|(w, e)| w / e)
        .sum()
}

pub fn allocate(epsilon_total: f64, weights: &WeightTable) -> Result<BudgetAllocation> {
    if !(epsilon_total.is_finite() && epsilon_total >= 0.0) {
        return Err(invalid(format!(
            "ε_total must be finite and nonnegative, got {epsilon_total}"
        )));
    }
    weights.validate()?;
    let norm: f64 = weights
        .planes()
        .map(|(c, b)| weights.weight(c, b).sqrt())
        .sum();
    let epsilons = (0..weights.channels())
        .map(|c| std::array::from_fn(|k| epsilon_total * (weights.weight(c, k + 1).sqrt() / norm)))
        .collect();
    Ok(BudgetAllocation {
        epsilon_total,
        epsilons,
        weights: weights.clone(),
    })
}

const MAX_BISECTIONS: usize = 2_000;
const MAX_BRACKET_STEPS: usize = 400;

/// Geometric bisection for the root of a decreasing function on `(lo, hi)`.
fn bisect_decreasing(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericFailure("bisection did not converge".into()))
}

/// Stationary point of `W/ε + λ ε`, found from the marginal cost alone.
fn stationary_budget(weight: f64, lambda: f64) -> Result<f64> {
    let marginal = |eps: f64| weight / (eps * eps) - lambda;
    let (mut lo, mut hi) = (1.0, 1.0);
    for _ in 0..MAX_BRACKET_STEPS {
        if marginal(lo) > 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..MAX_BRACKET_STEPS {
        if marginal(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if !(marginal(lo) > 0.0 && marginal(hi) < 0.0) {
        return Err(Error::NumericFailure(format!(
            "cannot bracket plane budget for λ = {lambda}"
        )));
    }
    bisect_decreasing(lo, hi, marginal)
}

pub fn solve_numeric(epsilon_total: f64, weights: &WeightTable) -> Result<BudgetAllocation> {
    if !(epsilon_total.is_finite() && epsilon_total > 0.0) {
        return Err(invalid(format!(
            "ε_total must be finite and positive, got {epsilon_total}"
        )));
    }
    weights.validate()?;
    let active: Vec<(usize, usize, f64)> = weights
        .planes()
        .map(|(c, b)| (c, b, weights.weight(c, b)))
        .filter(|&(_, _, w)| w > 0.0)
        .collect();

    let spent = |lambda: f64| -> Result<f64> {
        active
            .iter()
            .map(|&(_, _, w)| stationary_budget(w, lambda))
            .sum()
    };
    // Total spend falls as λ grows; find λ where it crosses ε_total.
    let excess = |lambda: f64| spent(lambda).map(|s| s - epsilon_total);

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut steps = 0;
    while excess(lo)? <= 0.0 {
        lo *= 0.25;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::NumericFailure(
                "cannot bracket the multiplier from below".into(),
            ));
        }
    }
    while excess(hi)? >= 0.0 {
        hi *= 4.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::NumericFailure(
                "cannot bracket the multiplier from above".into(),
            ));
        }
    }
    let mut failure = None;
    let lambda = bisect_decreasing(lo, hi, |l| match excess(l) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut epsilons = vec![[0.0; BITS]; weights.channels()];
    for &(c, b, w) in &active {
        epsilons[c][b - 1] = stationary_budget(w, lambda)?;
    }
    // Remove the last few ulps of constraint slack.
    let scale = epsilon_total / epsilons.iter().flatten().sum::<f64>();
    epsilons.iter_mut().flatten().for_each(|e| *e *= scale);
    Ok(BudgetAllocation {
        epsilon_total,
        epsilons,
        weights: weights.clone(),
    })
}
