//! Flat parameter storage with per-layer layout metadata.
//!
//! Model parameters and gradients share one representation: a flat `f64`
//! vector plus an ordered list of segment descriptors saying which stretches
//! are weight matrices and which are bias vectors. The projection operator
//! dispatches on that metadata (matrices are projected column-wise, biases
//! pass through untouched), and the optimizers treat the whole thing as one
//! dense vector.
//!
//! Matrix segments store their columns contiguously: for a layout
//! `Matrix { in_dim, out_dim }` at offset `o`, the weights feeding output
//! unit `j` occupy `values[o + j·in_dim .. o + (j+1)·in_dim]`. That makes
//! "project each column over the input dimension" a loop over contiguous
//! slices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// What a contiguous segment of the flat storage represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Fully connected weight matrix, `in_dim × out_dim`, columns contiguous.
    Matrix { in_dim: usize, out_dim: usize },
    /// Bias (or any per-unit) vector of the given dimension.
    Bias { dim: usize },
}

impl LayerKind {
    /// Number of values the segment occupies.
    pub fn len(&self) -> usize {
        match *self {
            LayerKind::Matrix { in_dim, out_dim } => in_dim * out_dim,
            LayerKind::Bias { dim } => dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A segment descriptor: kind plus its position in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub kind: LayerKind,
    pub offset: usize,
    pub length: usize,
}

/// Flat parameter (or gradient) vector with layout metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    values: Vec<f64>,
    layouts: Vec<LayerLayout>,
}

impl ParamSet {
    /// Zero-initialized parameters for the given sequence of segments.
    pub fn zeros(kinds: &[LayerKind]) -> Self {
        let mut layouts = Vec::with_capacity(kinds.len());
        let mut offset = 0;
        for &kind in kinds {
            let length = kind.len();
            layouts.push(LayerLayout {
                kind,
                offset,
                length,
            });
            offset += length;
        }
        ParamSet {
            values: vec![0.0; offset],
            layouts,
        }
    }

    /// Wraps an existing flat vector, validating that the segments tile it
    /// exactly.
    pub fn from_values(kinds: &[LayerKind], values: Vec<f64>) -> Result<Self> {
        let expected: usize = kinds.iter().map(|k| k.len()).sum();
        if expected != values.len() {
            return Err(Error::Layout(format!(
                "layouts cover {expected} values but storage holds {}",
                values.len()
            )));
        }
        if kinds.iter().any(|k| k.is_empty()) {
            return Err(Error::Layout("zero-sized segment".into()));
        }
        let mut ps = ParamSet::zeros(kinds);
        ps.values = values;
        Ok(ps)
    }

    /// Total dimension `d` (all segments).
    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn layouts(&self) -> &[LayerLayout] {
        &self.layouts
    }

    /// The flat slice backing segment `i`.
    pub fn segment(&self, i: usize) -> &[f64] {
        let l = &self.layouts[i];
        &self.values[l.offset..l.offset + l.length]
    }

    pub fn segment_mut(&mut self, i: usize) -> &mut [f64] {
        let l = self.layouts[i];
        &mut self.values[l.offset..l.offset + l.length]
    }

    /// A zero vector with this set's layout (for gradients and buffers).
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            values: vec![0.0; self.values.len()],
            layouts: self.layouts.clone(),
        }
    }

    /// Whether two sets share an identical layout (and can be combined).
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.layouts == other.layouts
    }

    /// Errors if any entry is NaN or infinite.
    pub fn validate_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{context}: entry {i} is {v}"
                )));
            }
        }
        Ok(())
    }

    /// Order-sensitive FNV-1a hash over the exact bit patterns of all values.
    /// Used to fingerprint global models per round; any single-bit change in
    /// any parameter changes the checksum.
    pub fn checksum(&self) -> u64 {
        fnv1a_f64(&self.values)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the little-endian bytes of each value's IEEE-754 bit pattern.
pub fn fnv1a_f64(values: &[f64]) -> u64 {
    let mut hash = FNV_OFFSET;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

/// FNV-1a over raw bytes (configuration hashing and the like).
pub fn fnv1a_bytes(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in bytes {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}
