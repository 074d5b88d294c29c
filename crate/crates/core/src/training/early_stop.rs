use crate::tensor::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best validation loss; snapshot the weights.
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation loss. Training stops once the run of
/// consecutive non-improving epochs exceeds `patience`.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: Float,
    best: Option<(usize, Float)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: Float) -> Self {
        Self {
            patience,
            min_delta,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: Float) -> StopDecision {
        let improved = match self.best {
            None => true,
            Some((_, best)) => val_loss < best - self.min_delta,
        };
        if improved {
            self.best = Some((epoch, val_loss));
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale > self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<(usize, Float)> {
        self.best
    }
}
