//! One-cycle learning-rate policy: linear warmup from `max_lr / 25` to
//! `max_lr`, then cosine annealing down to `max_lr / 1e4` on the last
//! iteration.

use crate::error::{Error, Result};

pub const WARMUP_DIVISOR: f64 = 25.0;
pub const FINAL_DIVISOR: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneCycle {
    pub warmup_iters: usize,
    pub anneal_iters: usize,
    pub max_lr: f64,
}

impl OneCycle {
    pub fn total_iters(&self) -> usize {
        self.warmup_iters + self.anneal_iters
    }

    pub fn start_lr(&self) -> f64 {
        self.max_lr / WARMUP_DIVISOR
    }

    pub fn final_lr(&self) -> f64 {
        self.max_lr / FINAL_DIVISOR
    }

    /// Rate at iteration `iter`, which must be below [`Self::total_iters`].
    pub fn lr_at(&self, iter: usize) -> Result<f64> {
        if iter >= self.total_iters() {
            return Err(Error::Argument(alloc::format!(
                "iteration {iter} outside schedule of {} iterations",
                self.total_iters()
            )));
        }
        Ok(self.lr_continuous(iter as f64))
    }

    /// The schedule as a function of a real-valued iteration count.
    pub fn lr_continuous(&self, t: f64) -> f64 {
        let warm = self.warmup_iters as f64;
        if t < warm {
            let start = self.start_lr();
            return start + (self.max_lr - start) * (t / warm);
        }
        let span = self.anneal_iters.saturating_sub(1) as f64;
        let progress = if span > 0.0 { ((t - warm) / span).min(1.0) } else { 0.0 };
        let drop = (self.max_lr - self.final_lr()) * 0.5 * (1.0 - libm::cos(core::f64::consts::PI * progress));
        (self.max_lr - drop).max(self.final_lr())
    }
}
