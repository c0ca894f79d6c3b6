//! Norm estimates and their semantics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    PowerIteration,
    BallTruncation,
    SelbergGrid,
}

/// What the reported value means relative to the true operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSemantics {
    /// Power-iteration Rayleigh value: a lower bound of the true norm up to
    /// the reported residual.
    LowerBoundUpToResidual,
    /// Sup over a finite grid plus local refinement: a lower bound of the
    /// true sup with the refinement gap reported.
    GridEstimate,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub method: NormMethod,
    pub iterations: usize,
    /// Relative residual for iterative methods, refinement gap for grids.
    pub residual: f64,
    pub semantics: NormSemantics,
}

impl NormEstimate {
    pub fn grid(value: f64, refine_gap: f64, grid_size: usize) -> Self {
        NormEstimate {
            value,
            method: NormMethod::SelbergGrid,
            iterations: grid_size,
            residual: refine_gap,
            semantics: NormSemantics::GridEstimate,
        }
    }
}
