//! Training sets over error space drawn from seeded distributions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ErrorModel, ErrorSample};
use crate::error::{Error, Result};
use crate::metrics::Interval;
use crate::rng::stream_rng;

const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

/// Law of a single error component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { low: f64, high: f64 },
    /// The second parameter is the variance, not the standard deviation.
    Gaussian { mean: f64, variance: f64 },
    /// `offset ± X` with `X ~ Exp(rate)`.
    Exponential {
        rate: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        sign: Sign,
    },
    /// `Beta(alpha, beta)` affinely mapped from `[0, 1]` onto `[low, high]`.
    Beta { alpha: f64, beta: f64, low: f64, high: f64 },
}

impl Distribution {
    /// Upper end of the support where it is bounded above; used to label sweeps.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            Self::Uniform { high, .. } | Self::Beta { high, .. } => Some(high),
            Self::Exponential { offset, sign: Sign::Negative, .. } => Some(offset),
            _ => None,
        }
    }

    /// Short label such as `U(0,0.3)`.
    pub fn label(&self) -> String {
        match *self {
            Self::Uniform { low, high } => format!("U({low},{high})"),
            Self::Gaussian { mean, variance } => format!("G({mean},{variance})"),
            Self::Exponential { rate, offset, sign } => {
                let s = if sign == Sign::Negative { "-" } else { "" };
                format!("E({s}{rate},{offset})")
            }
            Self::Beta { alpha, beta, low, high } => format!("B({alpha},{beta})[{low},{high}]"),
        }
    }
}

/// A distribution with an optional truncation window applied by rejection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub distribution: Distribution,
    #[serde(default)]
    pub truncate: Option<Interval>,
}

impl From<Distribution> for DistributionSpec {
    fn from(distribution: Distribution) -> Self {
        Self { distribution, truncate: None }
    }
}

impl DistributionSpec {
    pub fn uniform(low: f64, high: f64) -> Self {
        Distribution::Uniform { low, high }.into()
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Distribution::Gaussian { mean, variance }.into()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self.distribution {
            Distribution::Uniform { low, high } => {
                if !finite(&[low, high]) || low >= high {
                    return bad(format!("uniform bounds must satisfy low < high, got [{low}, {high}]"));
                }
            }
            Distribution::Gaussian { mean, variance } => {
                if !finite(&[mean, variance]) || variance <= 0.0 {
                    return bad(format!("gaussian variance must be positive, got {variance}"));
                }
            }
            Distribution::Exponential { rate, offset, .. } => {
                if !finite(&[rate, offset]) || rate <= 0.0 {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            Distribution::Beta { alpha, beta, low, high } => {
                if !finite(&[alpha, beta, low, high]) || alpha <= 0.0 || beta <= 0.0 {
                    return bad(format!("beta shape parameters must be positive, got ({alpha}, {beta})"));
                }
                if low >= high {
                    return bad(format!("beta interval must satisfy low < high, got [{low}, {high}]"));
                }
            }
        }
        if let Some(t) = self.truncate {
            t.check().map_err(|e| Error::InvalidDistribution(format!("truncation: {e}")))?;
        }
        Ok(())
    }

    fn draw_one(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let x = match self.distribution {
                Distribution::Uniform { low, high } => rng.gen_range(low..high),
                Distribution::Gaussian { mean, variance } => {
                    Normal::new(mean, variance.sqrt()).expect("validated").sample(rng)
                }
                Distribution::Exponential { rate, offset, sign } => {
                    let x = Exp::new(rate).expect("validated").sample(rng);
                    match sign {
                        Sign::Positive => offset + x,
                        Sign::Negative => offset - x,
                    }
                }
                Distribution::Beta { alpha, beta, low, high } => {
                    low + (high - low) * Beta::new(alpha, beta).expect("validated").sample(rng)
                }
            };
            match self.truncate {
                Some(t) if x < t.low || x > t.high => continue,
                _ => return Ok(x),
            }
        }
        Err(Error::InvalidDistribution("truncation window has negligible probability mass".into()))
    }
}

/// Where a sample set came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: DistributionSpec,
    pub seed: u64,
    pub stream: u64,
    pub dimension: usize,
    /// Always `"variance"`: how the Gaussian's second parameter was read.
    pub gaussian_parameter: String,
}

/// Labelled training set `{ε_k, F̂(ε_k) = 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub model: ErrorModel,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl SampleSet {
    /// Wraps explicit error vectors, all labelled 1.
    pub fn from_points(model: ErrorModel, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        if let Some(p) = points.iter().find(|p| p.len() != model.dimension()) {
            return Err(Error::DimensionMismatch { expected: model.dimension(), found: p.len() });
        }
        let labels = vec![1.0; points.len()];
        Ok(Self { model, points, labels, provenance: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    pub fn sample(&self, k: usize) -> ErrorSample {
        ErrorSample { model: self.model.clone(), values: self.points[k].clone() }
    }

    pub fn iter(&self) -> impl Iterator<Item = ErrorSample> + '_ {
        (0..self.len()).map(|k| self.sample(k))
    }
}

/// `count` i.i.d. error vectors of the model's dimension, component-wise from `spec`.
pub fn draw(spec: &DistributionSpec, count: usize, model: &ErrorModel, seed: u64) -> Result<SampleSet> {
    draw_stream(spec, count, model, seed, 0)
}

/// As [`draw`], on an independent stream of the same seed.
pub fn draw_stream(spec: &DistributionSpec, count: usize, model: &ErrorModel, seed: u64, stream: u64) -> Result<SampleSet> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::EmptySampleSet);
    }
    if model.dimension() == 0 {
        return Err(Error::InvalidConfig("error model has no components".into()));
    }
    let mut rng = stream_rng(seed, stream);
    let points = (0..count)
        .map(|_| (0..model.dimension()).map(|_| spec.draw_one(&mut rng)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut set = SampleSet::from_points(model.clone(), points)?;
    set.provenance = Some(Provenance {
        spec: *spec,
        seed,
        stream,
        dimension: model.dimension(),
        gaussian_parameter: "variance".into(),
    });
    Ok(set)
}

/// Per-dimension sample mean and unbiased variance.
pub fn empirical_moments(set: &SampleSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = set.len();
    if k < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: k });
    }
    let l = set.dimension();
    let mut mean = vec![0.0; l];
    for p in &set.points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    let mut var = vec![0.0; l];
    for p in &set.points {
        for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= (k - 1) as f64);
    Ok((mean, var))
}
