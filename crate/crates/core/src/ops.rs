//! Propagation (P), transformation (T) and graph convolution operators, plus
//! their adaptive-initial-residual variants and skip combinators.
//!
//! All operators record onto a [`Tape`] and are differentiable in every
//! tensor argument. Within a part (a run of consecutive P or T operations),
//! the first operation is always the plain one; gated variants apply from the
//! second operation onward and pull from the part's input `h0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::tensor::{Matrix, Real, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, tape: &mut Tape<T>, h: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(h),
            Activation::Identity => h,
        }
    }
}

/// P: `Â·h`.
pub fn p_op<T: Real>(tape: &mut Tape<T>, adj: &Arc<SparseOperator<T>>, h: Var) -> Result<Var> {
    tape.spmm(adj, h)
}

/// T: `σ(h·W + b)`.
pub fn t_op<T: Real>(tape: &mut Tape<T>, h: Var, w: Var, activation: Activation, bias: Option<Var>) -> Result<Var> {
    let mut z = tape.matmul(h, w)?;
    if let Some(b) = bias {
        z = tape.add_row(z, b)?;
    }
    Ok(activation.apply(tape, z))
}

/// Graph convolution `σ(Â·h·W + b)`, recorded as T after P.
pub fn graph_conv<T: Real>(
    tape: &mut Tape<T>,
    adj: &Arc<SparseOperator<T>>,
    h: Var,
    w: Var,
    activation: Activation,
    bias: Option<Var>,
) -> Result<Var> {
    let p = p_op(tape, adj, h)?;
    t_op(tape, p, w, activation, bias)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GateSource {
    Learned(Var),
    Pinned(f64),
}

/// Per-node mixing gate of one gated operation: `α_i = sigmoid([h_prev_i ‖ h0_i]·u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirGate {
    source: GateSource,
    layer_index: usize,
}

impl AirGate {
    /// A gate driven by the learnable column `u` (length `2·width`).
    pub fn learned(u: Var, layer_index: usize) -> Result<Self> {
        Self::check_index(layer_index)?;
        Ok(Self {
            source: GateSource::Learned(u),
            layer_index,
        })
    }

    /// Test hook: every α equals `alpha`.
    pub fn pinned(alpha: f64, layer_index: usize) -> Result<Self> {
        Self::check_index(layer_index)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("pinned alpha {alpha} outside [0, 1]")));
        }
        Ok(Self {
            source: GateSource::Pinned(alpha),
            layer_index,
        })
    }

    fn check_index(layer_index: usize) -> Result<()> {
        if layer_index < 2 {
            return Err(Error::InvalidArgument(format!(
                "gated operations start at index 2 within a part, got {layer_index}"
            )));
        }
        Ok(())
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }
}

/// `N×1` column of α values; each entry scales the whole row when mixing.
pub fn air_alpha<T: Real>(tape: &mut Tape<T>, gate: &AirGate, h_prev: Var, h0: Var) -> Result<Var> {
    let (ps, zs) = (tape.shape(h_prev), tape.shape(h0));
    if ps != zs {
        return Err(Error::shape("air_alpha", ps, zs));
    }
    match gate.source {
        GateSource::Pinned(a) => Ok(tape.leaf(Matrix::filled(ps.0, 1, T::from_f64(a)), false)),
        GateSource::Learned(u) => {
            let us = tape.shape(u);
            if us != (2 * ps.1, 1) {
                return Err(Error::shape("air_alpha gate width", (2 * ps.1, 1), us));
            }
            let logits = tape.joined_row_dot(&[h_prev, h0], u)?;
            Ok(tape.sigmoid(logits))
        }
    }
}

/// `(1 - α)⊙h_prev + α⊙h0` with α broadcast across each row.
pub fn air_mix<T: Real>(tape: &mut Tape<T>, alpha: Var, h_prev: Var, h0: Var) -> Result<Var> {
    let keep = tape.one_minus(alpha);
    let a = tape.mul_col(keep, h_prev)?;
    let b = tape.mul_col(alpha, h0)?;
    tape.add(a, b)
}

/// Gated P: `Â[(1-α)⊙h_prev + α⊙h0]`, α computed from `(h_prev, h0)`.
pub fn p_with_air<T: Real>(
    tape: &mut Tape<T>,
    adj: &Arc<SparseOperator<T>>,
    h_prev: Var,
    h0: Var,
    gate: &AirGate,
) -> Result<Var> {
    let alpha = air_alpha(tape, gate, h_prev, h0)?;
    let mixed = air_mix(tape, alpha, h_prev, h0)?;
    p_op(tape, adj, mixed)
}

/// T with initial residual: `σ((h_prev + h0·P)·W + b)`. The projection `P`
/// is required exactly when the widths differ.
pub fn t_with_air<T: Real>(
    tape: &mut Tape<T>,
    h_prev: Var,
    h0: Var,
    w: Var,
    activation: Activation,
    bias: Option<Var>,
    projection: Option<Var>,
) -> Result<Var> {
    let h0 = project_initial(tape, h_prev, h0, projection)?;
    let sum = tape.add(h_prev, h0)?;
    t_op(tape, sum, w, activation, bias)
}

/// Gated graph convolution `σ(Â[(1-α)⊙h_prev + α⊙h0]·W + b)`.
#[allow(clippy::too_many_arguments)]
pub fn gc_with_air<T: Real>(
    tape: &mut Tape<T>,
    adj: &Arc<SparseOperator<T>>,
    h_prev: Var,
    h0: Var,
    gate: &AirGate,
    w: Var,
    activation: Activation,
    bias: Option<Var>,
) -> Result<Var> {
    let p = p_with_air(tape, adj, h_prev, h0, gate)?;
    t_op(tape, p, w, activation, bias)
}

/// Maps `h0` to `h_prev`'s width when needed.
pub fn project_initial<T: Real>(tape: &mut Tape<T>, h_prev: Var, h0: Var, projection: Option<Var>) -> Result<Var> {
    let (ps, zs) = (tape.shape(h_prev), tape.shape(h0));
    match projection {
        Some(p) => tape.matmul(h0, p),
        None if ps == zs => Ok(h0),
        None => Err(Error::InvalidArgument(format!(
            "initial input of shape {zs:?} needs a projection to match {ps:?}"
        ))),
    }
}

/// Residual skip: `h_prev + f_out`.
pub fn residual_combine<T: Real>(tape: &mut Tape<T>, h_prev: Var, f_out: Var) -> Result<Var> {
    tape.add(h_prev, f_out)
}

/// Dense skip: column concatenation of every prior representation.
pub fn dense_combine<T: Real>(tape: &mut Tape<T>, history: &[Var]) -> Result<Var> {
    if history.len() == 1 {
        return Ok(history[0]);
    }
    tape.concat_cols(history)
}
