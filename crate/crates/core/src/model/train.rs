use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitRole};
use crate::error::{Error, Result};
use crate::model::{Mode, Model, ModelConfig, ParamKind, Precision, Prepared};
use crate::tensor::{gradient_check, AdamConfig, AdamState, GradCheckOptions, GradCheckReport, Matrix, Real, Tape};

/// Metrics of one epoch, measured in evaluation mode after the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Cross-entropy over the training nodes.
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Mean |∂L/∂W₁| from this epoch's backward pass, when probing.
    pub grad_probe: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTiming {
    /// Forward, backward and optimizer step.
    pub train_ms: f64,
    pub eval_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ModelConfig,
    pub epochs: Vec<EpochMetrics>,
    pub timings: Vec<EpochTiming>,
    /// 1-based epoch with the highest validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of the best-validation parameters.
    pub test_acc: f64,
    /// Training accuracy of the best-validation parameters.
    pub train_acc: f64,
    /// Time spent pre-propagating features, outside the epoch timings.
    pub precompute_ms: f64,
}

impl TrainReport {
    pub fn mean_train_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.train_ms).sum::<f64>() / self.timings.len().max(1) as f64
    }

    pub fn total_train_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.train_ms).sum()
    }

    pub fn grad_probe(&self) -> Option<Vec<f64>> {
        self.epochs.iter().map(|e| e.grad_probe).collect()
    }
}

fn accuracy<T: Real>(logits: &Matrix<T>, labels: &[usize], mask: &[bool]) -> f64 {
    let preds = logits.argmax_rows();
    let (mut hit, mut total) = (0usize, 0usize);
    for i in (0..labels.len()).filter(|&i| mask[i]) {
        total += 1;
        hit += usize::from(preds[i] == labels[i]);
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

fn check_masks(ds: &Dataset) -> Result<()> {
    for role in [SplitRole::Train, SplitRole::Val, SplitRole::Test] {
        if ds.masks().count(role) == 0 {
            return Err(Error::Dataset(format!(
                "dataset `{}` has an empty {role:?} mask; assign a split before training",
                ds.name()
            )));
        }
    }
    Ok(())
}

/// Trains in the configured precision and returns the report.
pub fn train(config: &ModelConfig, ds: &Dataset) -> Result<TrainReport> {
    match config.precision {
        Precision::F64 => train_model::<f64>(config, ds).map(|(r, _)| r),
        Precision::F32 => train_model::<f32>(config, ds).map(|(r, _)| r),
    }
}

/// Full-batch training with masked cross-entropy and Adam. The returned
/// model holds the parameters of the best validation epoch.
pub fn train_model<T: Real>(config: &ModelConfig, ds: &Dataset) -> Result<(TrainReport, Model<T>)> {
    if config.num_classes != ds.class_count() {
        return Err(Error::Config(format!(
            "config has {} classes but dataset `{}` has {}",
            config.num_classes,
            ds.name(),
            ds.class_count()
        )));
    }
    check_masks(ds)?;
    let mut model = Model::<T>::new(config, ds.feature_dim())?;
    let prepared = model.prepare(ds)?;
    let report = fit(&mut model, &prepared, ds)?;
    Ok((report, model))
}

/// Runs the epoch loop on an already built model.
pub fn fit<T: Real>(model: &mut Model<T>, prepared: &Prepared<T>, ds: &Dataset) -> Result<TrainReport> {
    check_masks(ds)?;
    let cfg = model.config().clone();
    let labels = ds.labels();
    let (train_mask, val_mask, test_mask) = (ds.masks().train(), ds.masks().val(), ds.masks().test());
    let decay: Vec<bool> = model.specs().iter().map(|s| s.decays()).collect();
    let mut adam = AdamState::<T>::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        model.specs().iter().map(|s| s.shape),
    );
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(0);

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut timings = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64, f64, Vec<Matrix<T>>)> = None;
    let first = model.first_weight();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape, true);
        let out = model.forward(&mut tape, &vars, prepared, Mode::Train, &mut dropout_rng)?;
        let loss = tape.masked_softmax_cross_entropy(out.logits, labels, &train_mask)?;
        let loss_value = tape.value(loss).get(0, 0).to_f64();
        if !loss_value.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss became {loss_value} at epoch {epoch}; try a smaller learning rate"
            )));
        }
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Matrix<T>> = vars
            .iter()
            .zip(model.specs())
            .map(|(&v, s)| grads.take(v).unwrap_or_else(|| Matrix::zeros(s.shape.0, s.shape.1)))
            .collect();
        let probe = cfg.probe_first_layer.then(|| grads[first].mean_abs().to_f64());
        {
            let grad_refs: Vec<&Matrix<T>> = grads.iter().collect();
            let mut param_refs: Vec<&mut Matrix<T>> = model.params_mut().iter_mut().collect();
            adam.step(&mut param_refs, &grad_refs, &decay)?;
        }
        let train_ms = start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape, false);
        let out = model.forward(&mut tape, &vars, prepared, Mode::Eval, &mut eval_rng)?;
        let eval_loss = tape.masked_softmax_cross_entropy(out.logits, labels, &train_mask)?;
        let eval_loss = tape.value(eval_loss).get(0, 0).to_f64();
        if !eval_loss.is_finite() {
            return Err(Error::NonFinite(format!("evaluation loss became {eval_loss} at epoch {epoch}")));
        }
        let logits = tape.value(out.logits);
        let metrics = EpochMetrics {
            epoch,
            loss: eval_loss,
            train_acc: accuracy(logits, labels, &train_mask),
            val_acc: accuracy(logits, labels, &val_mask),
            test_acc: accuracy(logits, labels, &test_mask),
            grad_probe: probe,
        };
        let eval_ms = start.elapsed().as_secs_f64() * 1e3;

        if best.as_ref().is_none_or(|b| metrics.val_acc > b.1) {
            best = Some((
                epoch,
                metrics.val_acc,
                metrics.test_acc,
                metrics.train_acc,
                model.params().to_vec(),
            ));
        }
        epochs.push(metrics);
        timings.push(EpochTiming { train_ms, eval_ms });
    }

    let (best_epoch, best_val_acc, test_acc, train_acc, params) = best.expect("at least one epoch");
    model.set_params(params)?;
    Ok(TrainReport {
        config: cfg,
        epochs,
        timings,
        best_epoch,
        best_val_acc,
        test_acc,
        train_acc,
        precompute_ms: prepared.precompute_time().as_secs_f64() * 1e3,
    })
}

/// Per-epoch mean |∂L/∂W₁|, recorded during training.
pub fn first_layer_gradient_probe(config: &ModelConfig, ds: &Dataset) -> Result<Vec<f64>> {
    let cfg = ModelConfig {
        probe_first_layer: true,
        ..config.clone()
    };
    let report = train(&cfg, ds)?;
    Ok(report.grad_probe().unwrap_or_default())
}

/// Finite-difference check of the full model gradient. Parameters are
/// re-drawn at random (gates and biases included, so no gate sits at its
/// symmetric start); the loss is cross-entropy over every node, and dropout
/// masks are reseeded identically on each pass.
pub fn model_gradient_check(config: &ModelConfig, ds: &Dataset, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let model = Model::<f64>::new(config, ds.feature_dim())?;
    let prepared = model.prepare(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6772_6164);
    let mut params: Vec<Matrix<f64>> = model
        .specs()
        .iter()
        .map(|s| {
            let scale = match s.kind {
                ParamKind::Weight | ParamKind::Projection => (2.0 / (s.shape.0 + s.shape.1) as f64).sqrt(),
                ParamKind::Bias => 0.1,
                ParamKind::Gate => 0.5,
            };
            Matrix::from_fn(s.shape.0, s.shape.1, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    let labels = ds.labels().to_vec();
    let all = vec![true; ds.num_nodes()];
    let dropout_seed = opts.seed;
    gradient_check(
        &mut params,
        |tape, vars| {
            let mut drng = ChaCha8Rng::seed_from_u64(dropout_seed);
            let out = model.forward(tape, vars, &prepared, Mode::Train, &mut drng)?;
            tape.masked_softmax_cross_entropy(out.logits, &labels, &all)
        },
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_split, synth_sbm, SbmParams};

    fn sbm() -> Dataset {
        let ds = synth_sbm(&SbmParams {
            n: 90,
            classes: 3,
            p_in: 0.2,
            p_out: 0.02,
            feat_dim: 8,
            signal_strength: 1.5,
            seed: 2,
        })
        .unwrap();
        make_split(&ds, 5, 30, 40, 0).unwrap()
    }

    fn cfg(base: ModelConfig) -> ModelConfig {
        ModelConfig {
            num_classes: 3,
            hidden_width: 8,
            epochs: 20,
            ..base
        }
    }

    #[test]
    fn zero_learning_rate_keeps_metrics_flat() {
        let ds = sbm();
        let c = cfg(ModelConfig {
            learning_rate: 0.0,
            dropout_rate: 0.0,
            probe_first_layer: true,
            ..ModelConfig::gcn(2)
        });
        let (report, model) = train_model::<f64>(&c, &ds).unwrap();
        let init = Model::<f64>::new(&c, ds.feature_dim()).unwrap();
        assert_eq!(model.params(), init.params());
        let first = &report.epochs[0];
        for e in &report.epochs {
            assert_eq!((e.loss, e.train_acc, e.val_acc, e.test_acc), (first.loss, first.train_acc, first.val_acc, first.test_acc));
            assert_eq!(e.grad_probe, first.grad_probe);
        }
        assert_eq!(report.best_epoch, 1);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let ds = sbm();
        let c = cfg(ModelConfig::gcn(2));
        assert_eq!(train(&c, &ds).unwrap().epochs, train(&c, &ds).unwrap().epochs);
    }

    #[test]
    fn report_shapes_and_ranges() {
        let ds = sbm();
        let r = train(&cfg(ModelConfig::sgc_air()), &ds).unwrap();
        assert_eq!(r.epochs.len(), 20);
        assert_eq!(r.timings.len(), 20);
        for e in &r.epochs {
            for a in [e.train_acc, e.val_acc, e.test_acc] {
                assert!((0.0..=1.0).contains(&a));
            }
        }
        assert_eq!(r.best_val_acc, r.epochs[r.best_epoch - 1].val_acc);
        assert_eq!(r.test_acc, r.epochs[r.best_epoch - 1].test_acc);
    }

    #[test]
    fn f32_training_runs() {
        let ds = sbm();
        let r = train(
            &cfg(ModelConfig {
                precision: Precision::F32,
                ..ModelConfig::gcn(2)
            }),
            &ds,
        )
        .unwrap();
        assert!(r.epochs.iter().all(|e| e.loss.is_finite()));
    }

    #[test]
    fn class_count_mismatch_and_empty_masks_rejected() {
        let ds = sbm();
        let wrong = ModelConfig {
            num_classes: 4,
            ..cfg(ModelConfig::gcn(2))
        };
        assert!(train(&wrong, &ds).is_err());
        let unsplit = synth_sbm(&SbmParams::default()).unwrap();
        let err = train(&cfg(ModelConfig::gcn(2)), &unsplit).unwrap_err().to_string();
        assert!(err.contains("empty"), "{err}");
    }

    #[test]
    fn huge_learning_rate_aborts_with_diagnostic() {
        let ds = sbm();
        let c = cfg(ModelConfig {
            learning_rate: 1e300,
            epochs: 50,
            ..ModelConfig::gcn(2)
        });
        match train(&c, &ds) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("epoch"), "{msg}"),
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn zero_features_give_zero_probe() {
        let ds = sbm();
        let ds = ds.clone().with_features(Matrix::zeros(ds.num_nodes(), ds.feature_dim())).unwrap();
        let probe = first_layer_gradient_probe(&cfg(ModelConfig::gcn(2)), &ds).unwrap();
        assert_eq!(probe.len(), 20);
        assert!(probe.iter().all(|&p| p == 0.0));
    }
}
