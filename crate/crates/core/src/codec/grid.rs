use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `2^q` left-closed cells of width `Δ = (w_max - w_min) / 2^q`
/// covering `[w_min, w_max]`; `w_max` itself falls in the top cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationGrid {
    w_min: f64,
    w_max: f64,
    q: u32,
}

impl QuantizationGrid {
    pub fn new(w_min: f64, w_max: f64, q: u32) -> Result<Self> {
        if !w_min.is_finite() || !w_max.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite bounds [{w_min}, {w_max}]")));
        }
        if w_min >= w_max {
            return Err(Error::InvalidGrid(format!("w_min {w_min} must be below w_max {w_max}")));
        }
        if !(1..=64).contains(&q) {
            return Err(Error::InvalidGrid(format!("q = {q} not in 1..=64")));
        }
        Ok(Self { w_min, w_max, q })
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn cell_count(&self) -> f64 {
        (self.q as f64).exp2()
    }

    /// Cell width Δ.
    pub fn step(&self) -> f64 {
        (self.w_max - self.w_min) / self.cell_count()
    }

    fn top_index(&self) -> u64 {
        if self.q == 64 {
            u64::MAX
        } else {
            (1u64 << self.q) - 1
        }
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.w_min, self.w_max)
    }

    /// Index of the cell containing `clamp(w)`.
    pub fn quantize_index(&self, w: f64) -> Result<u64> {
        if !w.is_finite() {
            return Err(Error::Domain(format!("cannot quantize non-finite weight {w}")));
        }
        let cell = ((self.clamp(w) - self.w_min) / self.step()).floor();
        // `as` saturates, and the top edge w_max lands on 2^q.
        Ok((cell as u64).min(self.top_index()))
    }

    /// Midpoint of cell `i`: `w_min + Δ (1/2 + i)`.
    pub fn reconstruct_value(&self, i: u64) -> Result<f64> {
        if i > self.top_index() {
            return Err(Error::IndexOutOfRange { index: i, width: self.q });
        }
        Ok(self.w_min + self.step() * (0.5 + i as f64))
    }
}
