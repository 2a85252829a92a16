//! SUS and Raw-TLX scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUS_ITEMS: usize = 10;
pub const TLX_SCALES: [&str; 6] = [
    "mental",
    "physical",
    "temporal",
    "performance",
    "effort",
    "frustration",
];
pub const TLX_STEP: u32 = 5;
pub const TLX_MAX: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum ScoreError {
    #[error("expected {expected} items, got {got}")]
    WrongItemCount { expected: usize, got: usize },
    #[error("item {index} has out-of-range value {value}")]
    OutOfRangeItem { index: usize, value: i64 },
}

/// Ten Likert items, 1 (strongly disagree) to 5 (strongly agree).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SusResponse {
    items: [u8; SUS_ITEMS],
}

impl SusResponse {
    pub fn new(items: &[i64]) -> Result<Self, ScoreError> {
        if items.len() != SUS_ITEMS {
            return Err(ScoreError::WrongItemCount { expected: SUS_ITEMS, got: items.len() });
        }
        let mut out = [0u8; SUS_ITEMS];
        for (i, &v) in items.iter().enumerate() {
            if !(1..=5).contains(&v) {
                return Err(ScoreError::OutOfRangeItem { index: i, value: v });
            }
            out[i] = v as u8;
        }
        Ok(Self { items: out })
    }

    pub fn items(&self) -> &[u8; SUS_ITEMS] {
        &self.items
    }
}

/// Six workload scales in 0..=100 on a step of 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlxResponse {
    scales: [u32; 6],
}

impl TlxResponse {
    pub fn new(scales: &[i64]) -> Result<Self, ScoreError> {
        if scales.len() != TLX_SCALES.len() {
            return Err(ScoreError::WrongItemCount { expected: TLX_SCALES.len(), got: scales.len() });
        }
        let mut out = [0u32; 6];
        for (i, &v) in scales.iter().enumerate() {
            if !(0..=TLX_MAX as i64).contains(&v) || v % TLX_STEP as i64 != 0 {
                return Err(ScoreError::OutOfRangeItem { index: i, value: v });
            }
            out[i] = v as u32;
        }
        Ok(Self { scales: out })
    }

    pub fn scales(&self) -> &[u32; 6] {
        &self.scales
    }
}

/// Odd items contribute (item − 1), even items (5 − item); the sum is scaled by 2.5.
pub fn sus_score(r: &SusResponse) -> f64 {
    let sum: u32 = r
        .items
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % 2 == 0 { v as u32 - 1 } else { 5 - v as u32 })
        .sum();
    // integer sum times 2.5 is exact in binary floating point
    sum as f64 * 2.5
}

/// Unweighted mean of the six scales.
pub fn tlx_raw(r: &TlxResponse) -> f64 {
    let sum: u32 = r.scales.iter().sum();
    sum as f64 / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sus_extremes() {
        let best = SusResponse::new(&[5, 1, 5, 1, 5, 1, 5, 1, 5, 1]).unwrap();
        assert_eq!(sus_score(&best), 100.0);
        let worst = SusResponse::new(&[1, 5, 1, 5, 1, 5, 1, 5, 1, 5]).unwrap();
        assert_eq!(sus_score(&worst), 0.0);
        assert_eq!(sus_score(&SusResponse::new(&[3; 10]).unwrap()), 50.0);
    }

    #[test]
    fn tlx_mean() {
        assert_eq!(tlx_raw(&TlxResponse::new(&[0; 6]).unwrap()), 0.0);
        assert_eq!(tlx_raw(&TlxResponse::new(&[10, 20, 30, 40, 50, 60]).unwrap()), 35.0);
        assert_eq!(tlx_raw(&TlxResponse::new(&[100; 6]).unwrap()), 100.0);
    }

    #[test]
    fn rejects_bad_items() {
        assert_eq!(
            SusResponse::new(&[3, 3, 3, 6, 3, 3, 3, 3, 3, 3]),
            Err(ScoreError::OutOfRangeItem { index: 3, value: 6 })
        );
        assert!(matches!(SusResponse::new(&[3; 9]), Err(ScoreError::WrongItemCount { .. })));
        assert_eq!(
            TlxResponse::new(&[0, 0, 12, 0, 0, 0]),
            Err(ScoreError::OutOfRangeItem { index: 2, value: 12 })
        );
        assert!(TlxResponse::new(&[0, 0, 0, 0, 0, 105]).is_err());
    }
}
