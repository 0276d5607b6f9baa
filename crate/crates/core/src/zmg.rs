//! The zero-mean gradient projection operator.
//!
//! The operator maps a vector `g` to `g − mean(g)·1`: the orthogonal
//! projection onto the hyperplane perpendicular to the all-ones direction.
//! Applied to a gradient it removes the component that would move every
//! coordinate uniformly — the direction in which per-client "intensity" or
//! "bias" disagreements live — while leaving all differential structure
//! intact.
//!
//! Three views of the same operation are exposed:
//!
//! - [`project_vector`] on a raw slice, returning the projection together
//!   with a norm-accounting record;
//! - [`project_matrix_columns`] on a flat column-contiguous matrix, treating
//!   each column (the fan-in of one output unit) independently;
//! - [`apply_zmg`] on a whole [`ParamSet`], projecting matrix segments
//!   column-wise and passing bias segments through bit-for-bit.
//!
//! The projection matrix `Φ = I − (1/d)·11ᵀ` is never materialized; the
//! implementation is the mean subtraction itself, `O(d)` time and space.
//! Means and norms use compensated summation so the zero-sum postcondition
//! stays tight even for very long segments.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::param::{LayerKind, ParamSet};

/// Norm bookkeeping for one projection, exposing the Pythagorean split
/// `‖g‖² = ‖Φg‖² + d·mean(g)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionStats {
    /// `d·mean(g)²` — squared norm of the removed mean component.
    pub removed_mean_norm_sq: f64,
    /// `‖g‖²` before projection.
    pub input_norm_sq: f64,
    /// `‖Φg‖²` after projection; never exceeds the input norm.
    pub output_norm_sq: f64,
}

/// Neumaier-compensated sum: like Kahan summation but also correct when the
/// running sum is smaller than the incoming term.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

fn check_finite(g: &[f64], what: &str) -> Result<()> {
    for (i, v) in g.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what}: entry {i} is {v}")));
        }
    }
    Ok(())
}

/// Mean of a slice with compensated accumulation.
#[inline]
pub(crate) fn mean(g: &[f64]) -> f64 {
    compensated_sum(g) / g.len() as f64
}

/// Subtracts the mean in place and returns it. The caller guarantees a
/// non-empty, finite slice.
#[inline]
pub(crate) fn project_slice_in_place(g: &mut [f64]) -> f64 {
    let nu = mean(g);
    for v in g.iter_mut() {
        *v -= nu;
    }
    nu
}

/// Projects a vector to zero mean: `Φg = g − mean(g)·1`.
///
/// Returns the projected vector and the norm split. The output's entries sum
/// to zero up to rounding in the mean itself.
pub fn project_vector(g: &[f64]) -> Result<(Vec<f64>, ProjectionStats)> {
    if g.is_empty() {
        return Err(Error::Dimension("project_vector: empty vector".into()));
    }
    check_finite(g, "project_vector")?;
    let nu = mean(g);
    let mut out = Vec::with_capacity(g.len());
    let mut input_sq = CompensatedSum::default();
    let mut output_sq = CompensatedSum::default();
    for &v in g {
        let p = v - nu;
        input_sq.add(v * v);
        output_sq.add(p * p);
        out.push(p);
    }
    let stats = ProjectionStats {
        removed_mean_norm_sq: g.len() as f64 * nu * nu,
        input_norm_sq: input_sq.total(),
        output_norm_sq: output_sq.total(),
    };
    Ok((out, stats))
}

/// Projects every column of a flat column-contiguous `in_dim × out_dim`
/// matrix to zero mean. Equivalent to an independent [`project_vector`] per
/// column.
pub fn project_matrix_columns(
    values: &[f64],
    in_dim: usize,
    out_dim: usize,
) -> Result<Vec<f64>> {
    if in_dim == 0 || out_dim == 0 {
        return Err(Error::Dimension(format!(
            "project_matrix_columns: degenerate shape {in_dim}x{out_dim}"
        )));
    }
    if values.len() != in_dim * out_dim {
        return Err(Error::Dimension(format!(
            "project_matrix_columns: {} values for shape {in_dim}x{out_dim}",
            values.len()
        )));
    }
    check_finite(values, "project_matrix_columns")?;
    let mut out = values.to_vec();
    for col in out.chunks_mut(in_dim) {
        project_slice_in_place(col);
    }
    Ok(out)
}

/// Shape-aware projection of a gradient: matrix segments are projected
/// column-wise over their input dimension, bias segments are returned
/// unchanged (bit-for-bit — a one-dimensional "column" per unit carries no
/// mean structure worth removing).
pub fn apply_zmg(grad: &ParamSet) -> Result<ParamSet> {
    grad.validate_finite("apply_zmg")?;
    let mut out = grad.clone();
    apply_zmg_in_place(&mut out);
    Ok(out)
}

/// In-place variant used on the optimizer hot path; input must be finite.
pub(crate) fn apply_zmg_in_place(grad: &mut ParamSet) {
    for i in 0..grad.layouts().len() {
        if let LayerKind::Matrix { in_dim, .. } = grad.layouts()[i].kind {
            for col in grad.segment_mut(i).chunks_mut(in_dim) {
                project_slice_in_place(col);
            }
        }
    }
}

/// The Pythagorean split of the squared distance between two gradients:
/// returns `(‖Φg_i − Φg_j‖², d·(ν_i − ν_j)²)`, whose sum is `‖g_i − g_j‖²`.
/// The projection can only shrink pairwise distances, and shrinks them
/// strictly whenever the two means differ.
pub fn projected_distance_reduction(g_i: &[f64], g_j: &[f64]) -> Result<(f64, f64)> {
    if g_i.len() != g_j.len() || g_i.is_empty() {
        return Err(Error::Dimension(format!(
            "projected_distance_reduction: lengths {} vs {}",
            g_i.len(),
            g_j.len()
        )));
    }
    check_finite(g_i, "projected_distance_reduction lhs")?;
    check_finite(g_j, "projected_distance_reduction rhs")?;
    let nu_i = mean(g_i);
    let nu_j = mean(g_j);
    let mut reduced = CompensatedSum::default();
    for (a, b) in g_i.iter().zip(g_j) {
        let d = (a - nu_i) - (b - nu_j);
        reduced.add(d * d);
    }
    let gap = nu_i - nu_j;
    let mean_gap_term = g_i.len() as f64 * gap * gap;
    Ok((reduced.total(), mean_gap_term))
}
