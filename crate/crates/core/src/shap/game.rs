use super::ShapError;
use crate::model::Forecaster;
use crate::tensor::{Float, Tensor};

/// Bit set of present players; bit `i` is feature `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(n: usize) -> Self {
        Coalition(if n >= 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Cooperative game over `n_players` features.
pub trait ValueFunction: Sync {
    fn n_players(&self) -> usize;

    fn value(&self, coalition: Coalition) -> Result<f64, ShapError>;
}

/// Baseline-imputed game over a flat feature vector.
pub struct FnGame<F> {
    f: F,
    instance: Vec<f64>,
    baseline: Vec<f64>,
}

impl<F> FnGame<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(f: F, instance: Vec<f64>, baseline: Vec<f64>) -> Result<Self, ShapError> {
        if instance.len() != baseline.len() {
            return Err(ShapError::Misaligned(format!(
                "instance has {} features, baseline {}",
                instance.len(),
                baseline.len()
            )));
        }
        Ok(Self { f, instance, baseline })
    }

    /// Instance values where `coalition` holds, baseline elsewhere.
    pub fn hybrid(&self, coalition: Coalition) -> Vec<f64> {
        (0..self.instance.len())
            .map(|i| if coalition.contains(i) { self.instance[i] } else { self.baseline[i] })
            .collect()
    }
}

impl<F> ValueFunction for FnGame<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn n_players(&self) -> usize {
        self.instance.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64, ShapError> {
        Ok((self.f)(&self.hybrid(coalition)))
    }
}

/// Game whose players are the columns of a forecaster's input window. The
/// payoff is the denormalized prediction at `lead`:
/// `target_mean + target_std · forecast(window)[lead − 1]`.
pub struct WindowGame<'a> {
    model: &'a dyn Forecaster,
    instance: Tensor,
    baseline: Vec<Float>,
    lead: usize,
    target_mean: f64,
    target_std: f64,
}

impl<'a> WindowGame<'a> {
    /// `baseline[c]` replaces every entry of column `c` when `c` is absent;
    /// in normalized space the training mean is 0.
    pub fn new(
        model: &'a dyn Forecaster,
        instance: Tensor,
        baseline: Vec<Float>,
        lead: usize,
        target_mean: f64,
        target_std: f64,
    ) -> Result<Self, ShapError> {
        if instance.shape().len() != 2 || instance.cols() != baseline.len() {
            return Err(ShapError::Misaligned(format!(
                "window shape {:?} does not match {} baseline values",
                instance.shape(),
                baseline.len()
            )));
        }
        if lead == 0 || lead > model.horizon() {
            return Err(ShapError::Misaligned(format!(
                "lead {lead} outside 1..={}",
                model.horizon()
            )));
        }
        Ok(Self {
            model,
            instance,
            baseline,
            lead,
            target_mean,
            target_std,
        })
    }

    pub fn hybrid(&self, coalition: Coalition) -> Tensor {
        let mut w = self.instance.clone();
        let cols = w.cols();
        for (idx, v) in w.data_mut().iter_mut().enumerate() {
            let c = idx % cols;
            if !coalition.contains(c) {
                *v = self.baseline[c];
            }
        }
        w
    }
}

impl ValueFunction for WindowGame<'_> {
    fn n_players(&self) -> usize {
        self.baseline.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64, ShapError> {
        let out = self.model.forecast(&self.hybrid(coalition), self.lead)?;
        Ok(self.target_mean + self.target_std * out[self.lead - 1] as f64)
    }
}
