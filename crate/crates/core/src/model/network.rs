use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::normalize_adjacency;
use crate::model::{Architecture, ModelConfig, SkipKind};
use crate::ops::{
    dense_combine, gc_with_air, p_op, p_with_air, residual_combine, t_op, t_with_air, Activation, AirGate,
};
use crate::sparse::SparseOperator;
use crate::tensor::{Matrix, Real, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Projection,
    Gate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub shape: (usize, usize),
}

impl ParamSpec {
    /// Weight decay applies to weight and projection matrices only.
    pub fn decays(&self) -> bool {
        matches!(self.kind, ParamKind::Weight | ParamKind::Projection)
    }
}

/// Graph operator and features in the model's precision, plus the
/// propagate-first features when they can be computed ahead of training.
#[derive(Debug, Clone)]
pub struct Prepared<T: Real> {
    adjacency: Arc<SparseOperator<T>>,
    features: Arc<Matrix<T>>,
    propagated: Option<Arc<Matrix<T>>>,
    precompute: Duration,
}

impl<T: Real> Prepared<T> {
    pub fn adjacency(&self) -> &Arc<SparseOperator<T>> {
        &self.adjacency
    }

    pub fn features(&self) -> &Arc<Matrix<T>> {
        &self.features
    }

    /// `Â^{d_p}·X` for non-gated propagate-first models.
    pub fn propagated(&self) -> Option<&Arc<Matrix<T>>> {
        self.propagated.as_ref()
    }

    pub fn precompute_time(&self) -> Duration {
        self.precompute
    }
}

/// Handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    /// Output of every transformation (or interleaved) layer, in order.
    pub layer_outputs: Vec<Var>,
    /// Output of the propagation part, for decoupled models with `d_p > 0`.
    pub propagated: Option<Var>,
}

#[derive(Debug, Clone)]
struct Layer {
    weight: usize,
    bias: usize,
}

/// A built model: configuration, parameter values and the index plan tying
/// parameters to operations.
#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    config: ModelConfig,
    input_dim: usize,
    specs: Vec<ParamSpec>,
    params: Vec<Matrix<T>>,
    layers: Vec<Layer>,
    projection: Option<usize>,
    gates: Vec<usize>,
}

fn glorot<T: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.random_range(-limit..=limit)))
}

impl<T: Real> Model<T> {
    /// Validates `config` and initializes parameters from `config.seed`:
    /// Glorot-uniform weights and projections, zero biases, zero gate
    /// vectors (every gate starts at α = 0.5).
    pub fn new(config: &ModelConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input feature dimension must be at least 1".into()));
        }
        let cfg = config.clone();
        let (hidden, classes) = (cfg.hidden_width, cfg.num_classes);
        let t_input = input_dim;

        let mut specs = Vec::new();
        let mut layers = Vec::new();
        for l in 1..=cfg.d_t {
            let fan_in = match cfg.skip {
                SkipKind::Dense => t_input + (l - 1) * hidden,
                _ if l == 1 => t_input,
                _ => hidden,
            };
            let fan_out = if l == cfg.d_t { classes } else { hidden };
            layers.push(Layer {
                weight: specs.len(),
                bias: specs.len() + 1,
            });
            specs.push(ParamSpec {
                name: format!("layer{l}.weight"),
                kind: ParamKind::Weight,
                shape: (fan_in, fan_out),
            });
            specs.push(ParamSpec {
                name: format!("layer{l}.bias"),
                kind: ParamKind::Bias,
                shape: (1, fan_out),
            });
        }

        let mut projection = None;
        if cfg.air && cfg.d_t >= 2 && t_input != hidden {
            projection = Some(specs.len());
            specs.push(ParamSpec {
                name: "initial.projection".into(),
                kind: ParamKind::Projection,
                shape: (t_input, hidden),
            });
        }

        let mut gates = Vec::new();
        if cfg.air {
            let (count, width) = match cfg.architecture {
                Architecture::Pptt => (cfg.d_p.saturating_sub(1), input_dim),
                Architecture::Ttpp => (cfg.d_p.saturating_sub(1), classes),
                Architecture::Ptpt => (cfg.d_t - 1, hidden),
                Architecture::Mlp => (0, 0),
            };
            for k in 0..count {
                gates.push(specs.len());
                specs.push(ParamSpec {
                    name: format!("gate{}", k + 2),
                    kind: ParamKind::Gate,
                    shape: (2 * width, 1),
                });
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = specs
            .iter()
            .map(|s| match s.kind {
                ParamKind::Weight | ParamKind::Projection => glorot(s.shape.0, s.shape.1, &mut rng),
                ParamKind::Bias | ParamKind::Gate => Matrix::zeros(s.shape.0, s.shape.1),
            })
            .collect();

        Ok(Self {
            config: cfg,
            input_dim,
            specs,
            params,
            layers,
            projection,
            gates,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Matrix<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.params
    }

    /// Replaces every parameter; shapes must match.
    pub fn set_params(&mut self, params: Vec<Matrix<T>>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for (spec, p) in self.specs.iter().zip(&params) {
            if p.shape() != spec.shape {
                return Err(Error::shape("set_params", spec.shape, p.shape()));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Index of the first transformation matrix.
    pub fn first_weight(&self) -> usize {
        self.layers[0].weight
    }

    /// Records every parameter as a tape leaf.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone(), requires_grad)).collect()
    }

    /// Builds the self-looped normalized adjacency and casts the features.
    pub fn prepare(&self, ds: &Dataset) -> Result<Prepared<T>> {
        if ds.feature_dim() != self.input_dim {
            return Err(Error::shape(
                "prepare features",
                (ds.num_nodes(), self.input_dim),
                (ds.num_nodes(), ds.feature_dim()),
            ));
        }
        let looped = ds.graph().add_self_loops()?;
        let adj = normalize_adjacency(&looped, self.config.r_exponent)?.operator::<T>();
        self.prepare_with(adj, Arc::new(ds.features().cast()))
    }

    /// Like [`Model::prepare`] with a caller-supplied operator.
    pub fn prepare_with(&self, adjacency: Arc<SparseOperator<T>>, features: Arc<Matrix<T>>) -> Result<Prepared<T>> {
        if features.cols() != self.input_dim {
            return Err(Error::shape(
                "prepare features",
                (features.rows(), self.input_dim),
                features.shape(),
            ));
        }
        if adjacency.cols() != features.rows() || adjacency.rows() != features.rows() {
            return Err(Error::shape("prepare adjacency", (adjacency.rows(), adjacency.cols()), features.shape()));
        }
        let start = Instant::now();
        let propagated = if self.config.architecture == Architecture::Pptt && !self.config.air && self.config.d_p > 0 {
            let mut h = (*features).clone();
            for _ in 0..self.config.d_p {
                h = adjacency.matrix().spmm(&h)?;
            }
            Some(Arc::new(h))
        } else {
            None
        };
        Ok(Prepared {
            adjacency,
            features,
            propagated,
            precompute: start.elapsed(),
        })
    }

    fn dropout(&self, tape: &mut Tape<T>, h: Var, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Var> {
        let p = self.config.dropout_rate;
        if mode == Mode::Eval || p == 0.0 {
            return Ok(h);
        }
        let (r, c) = tape.shape(h);
        let keep = T::from_f64(1.0 / (1.0 - p));
        let mask = Matrix::from_fn(r, c, |_, _| if rng.random::<f64>() < p { T::zero() } else { keep });
        tape.dropout(h, mask)
    }

    fn gate(&self, vars: &[Var], index: usize) -> Result<AirGate> {
        AirGate::learned(vars[self.gates[index - 2]], index)
    }

    /// `d_p` propagations of `h0`, gated from the second on when AIR is set.
    fn propagation_part(&self, tape: &mut Tape<T>, vars: &[Var], adj: &Arc<SparseOperator<T>>, h0: Var) -> Result<Var> {
        let mut h = h0;
        for l in 1..=self.config.d_p {
            h = if self.config.air && l >= 2 {
                p_with_air(tape, adj, h, h0, &self.gate(vars, l)?)?
            } else {
                p_op(tape, adj, h)?
            };
        }
        Ok(h)
    }

    /// `d_t` transformation layers; with `adj` set each layer first
    /// propagates (interleaved models).
    fn layer_stack(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        x: Var,
        adj: Option<&Arc<SparseOperator<T>>>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Var, Vec<Var>)> {
        let cfg = &self.config;
        let initial = if cfg.air && cfg.d_t >= 2 {
            match self.projection {
                Some(p) => tape.matmul(x, vars[p])?,
                None => x,
            }
        } else {
            x
        };
        let mut h = x;
        let mut history = vec![x];
        let mut outputs = Vec::with_capacity(cfg.d_t);
        for (idx, layer) in self.layers.iter().enumerate() {
            let l = idx + 1;
            let last = l == cfg.d_t;
            let act = if last { Activation::Identity } else { Activation::Relu };
            let (w, b) = (vars[layer.weight], Some(vars[layer.bias]));
            let input = match cfg.skip {
                SkipKind::Dense => dense_combine(tape, &history)?,
                _ => h,
            };
            let input = self.dropout(tape, input, mode, rng)?;
            let gated = cfg.air && l >= 2;
            let mut out = match (adj, gated) {
                (None, false) => t_op(tape, input, w, act, b)?,
                (None, true) => t_with_air(tape, input, initial, w, act, b, None)?,
                (Some(adj), true) => gc_with_air(tape, adj, input, initial, &self.gate(vars, l)?, w, act, b)?,
                (Some(adj), false) => {
                    let mut p = input;
                    for _ in 0..cfg.propagations_in_layer(l) {
                        p = p_op(tape, adj, p)?;
                    }
                    t_op(tape, p, w, act, b)?
                }
            };
            if cfg.skip == SkipKind::Residual && !last && tape.shape(out) == tape.shape(h) {
                out = residual_combine(tape, h, out)?;
            }
            h = out;
            history.push(out);
            outputs.push(out);
        }
        Ok((h, outputs))
    }

    /// Records the forward pass. `vars` are the parameter leaves from
    /// [`Model::bind`]; `rng` drives dropout in training mode.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        prepared: &Prepared<T>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Forward> {
        if vars.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "forward expects {} parameter handles, got {}",
                self.params.len(),
                vars.len()
            )));
        }
        if prepared.features.cols() != self.input_dim {
            return Err(Error::shape(
                "forward features",
                (prepared.features.rows(), self.input_dim),
                prepared.features.shape(),
            ));
        }
        let adj = &prepared.adjacency;
        let x = tape.constant(prepared.features.clone());
        match self.config.architecture {
            Architecture::Mlp => {
                let (logits, layer_outputs) = self.layer_stack(tape, vars, x, None, mode, rng)?;
                Ok(Forward {
                    logits,
                    layer_outputs,
                    propagated: None,
                })
            }
            Architecture::Ptpt => {
                let (logits, layer_outputs) = self.layer_stack(tape, vars, x, Some(adj), mode, rng)?;
                Ok(Forward {
                    logits,
                    layer_outputs,
                    propagated: None,
                })
            }
            Architecture::Pptt => {
                let p = match &prepared.propagated {
                    Some(m) => tape.constant(m.clone()),
                    None => self.propagation_part(tape, vars, adj, x)?,
                };
                let (logits, layer_outputs) = self.layer_stack(tape, vars, p, None, mode, rng)?;
                Ok(Forward {
                    logits,
                    layer_outputs,
                    propagated: (self.config.d_p > 0).then_some(p),
                })
            }
            Architecture::Ttpp => {
                let (z, layer_outputs) = self.layer_stack(tape, vars, x, None, mode, rng)?;
                let logits = self.propagation_part(tape, vars, adj, z)?;
                Ok(Forward {
                    logits,
                    layer_outputs,
                    propagated: (self.config.d_p > 0).then_some(logits),
                })
            }
        }
    }

    /// Evaluation-mode logits.
    pub fn predict(&self, prepared: &Prepared<T>) -> Result<Matrix<T>> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &vars, prepared, Mode::Eval, &mut rng)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Evaluation-mode values of every layer output, ending with the logits.
    pub fn representations(&self, prepared: &Prepared<T>) -> Result<Vec<Matrix<T>>> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &vars, prepared, Mode::Eval, &mut rng)?;
        let mut reps: Vec<Matrix<T>> = out.layer_outputs.iter().map(|&v| tape.value(v).clone()).collect();
        if self.config.architecture == Architecture::Ttpp && self.config.d_p > 0 {
            reps.push(tape.value(out.logits).clone());
        }
        Ok(reps)
    }
}
