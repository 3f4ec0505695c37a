//! Construction parameters and truncation-depth budgeting.

use crate::error::{DilationError, Result};

/// Knobs shared by the extension and dilation drivers.
#[derive(Debug, Clone)]
pub struct Params {
    /// Longest word length the final dilation must reproduce.
    pub word_len: usize,
    /// Verification tolerance for residuals and defects.
    pub tol: f64,
    /// Relative rank tolerance for orthonormalization decisions.
    pub rank_tol: f64,
    /// Override for the base truncation depth; `None` derives it from
    /// the word length and the band bookkeeping.
    pub depth: Option<usize>,
    /// Hard cap on the total dimension of any constructed space.
    pub max_total_dim: usize,
    /// Seed for reproducible test-family generation.
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            word_len: 4,
            tol: 1e-8,
            rank_tol: 1e-9,
            depth: None,
            max_total_dim: 4096,
            seed: 1,
        }
    }
}

impl Params {
    pub fn with_word_len(mut self, l: usize) -> Self {
        self.word_len = l;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_dim(mut self, dim: usize) -> Self {
        self.max_total_dim = dim;
        self
    }

    /// Guard a requested space dimension against the budget.
    pub fn check_dim(&self, requested: usize) -> Result<()> {
        if requested > self.max_total_dim {
            return Err(DilationError::DimensionBudgetExceeded {
                requested,
                budget: self.max_total_dim,
            });
        }
        Ok(())
    }

    /// Window (in levels) the co-isometric stage must still have once
    /// its induction finishes, so that the unitary stage can run its
    /// Gram computations on exact data. Each pair factor moves content
    /// at most one level per application, twice per product.
    pub fn stage1_final_window(&self, stage2_steps: usize) -> usize {
        let w2 = self.stage2_final_window() + stage2_steps;
        let ito_levels = w2 + 2;
        2 * (ito_levels + 1) + 2
    }

    /// Window (in levels) the unitary stage must end with: enough for
    /// every word of the requested length plus the compression margin.
    pub fn stage2_final_window(&self) -> usize {
        self.word_len + 2
    }

    /// Levels consumed per induction step: one level of certified window
    /// is lost to the minimal-part boundary.
    pub const WINDOW_LOSS_PER_STEP: usize = 1;

    /// Initial window for a stage that will run `steps` induction steps
    /// and must end with `final_window` levels.
    pub fn initial_window(final_window: usize, steps: usize) -> usize {
        final_window + Self::WINDOW_LOSS_PER_STEP * steps
    }
}
