//! Plateau learning-rate decay and early stopping on a monitored loss.

/// Divides the learning rate by `factor` once the monitored loss has gone
/// `patience` epochs without improving by more than `min_delta`. The
/// counter restarts after every reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub min_delta: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64, min_delta: f64) -> Self {
        Self {
            lr,
            patience,
            factor,
            min_delta,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr /= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

/// Replays `history` through a fresh [`PlateauScheduler`] starting at `lr`.
pub fn lr_on_plateau(history: &[f64], patience: usize, factor: f64, lr: f64, min_delta: f64) -> f64 {
    let mut s = PlateauScheduler::new(lr, patience, factor, min_delta);
    for &loss in history {
        s.step(loss);
    }
    s.lr
}

/// True once the last `patience` epochs brought no improvement larger than
/// `min_delta` over the best loss seen before them.
pub fn early_stop(history: &[f64], patience: usize, min_delta: f64) -> bool {
    let mut best = f64::INFINITY;
    let mut last_improvement = 0;
    for (i, &loss) in history.iter().enumerate() {
        if loss < best - min_delta {
            best = loss;
            last_improvement = i;
        }
    }
    !history.is_empty() && history.len() - 1 - last_improvement >= patience
}
