use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde_json::json;

use airgnn_core::data::{make_split, perturb_edges, perturb_features, subsample_labels, synth_sbm, Dataset, SbmParams};
use airgnn_core::graph::{normalize_adjacency, stationary_limit};
use airgnn_core::model::{model_gradient_check, train, Architecture, ModelConfig, SkipKind, TrainReport};
use airgnn_core::smoothness::{gsl_trajectory, gsl_vs_dt_probe};
use airgnn_core::tensor::{Fault, GradCheckOptions};
use airgnn_core::Matrix;

use crate::args::{check, describe, parse_f64_list, parse_method, parse_usize_list, DataArgs, ModelArgs};
use crate::record::{fmt_f, fmt_ms, mean_std, RunRecord};

fn with_classes(cfg: &ModelConfig, ds: &Dataset) -> ModelConfig {
    ModelConfig {
        num_classes: ds.class_count(),
        ..cfg.clone()
    }
}

fn run_cells(cells: Vec<(ModelConfig, usize)>, ds: &Dataset, parallel: bool) -> Result<Vec<TrainReport>> {
    let go = |(cfg, _): &(ModelConfig, usize)| train(&with_classes(cfg, ds), ds).map_err(anyhow::Error::from);
    if parallel {
        cells.par_iter().map(go).collect()
    } else {
        cells.iter().map(go).collect()
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Add a column with mean |∂L/∂W₁| per epoch.
    #[arg(long)]
    pub probe_gradients: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<RunRecord> {
    let mut cfg = args.model.config()?;
    cfg.probe_first_layer = args.probe_gradients;
    let (ds, info) = args.data.load()?;
    let cfg = with_classes(&cfg, &ds);
    let report = train(&cfg, &ds)?;
    info!(
        "best epoch {} val {:.4} test {:.4}",
        report.best_epoch, report.best_val_acc, report.test_acc
    );
    let mut cols = vec!["epoch", "loss", "train_acc", "val_acc", "test_acc", "elapsed_ms"];
    if args.probe_gradients {
        cols.push("grad_mean_abs");
    }
    let mut rec = RunRecord::new("train", json!({"config": cfg, "dataset": info}), &cols).with_timing(&["elapsed_ms"]);
    for (e, t) in report.epochs.iter().zip(&report.timings) {
        let mut row = vec![
            e.epoch.to_string(),
            fmt_f(e.loss),
            fmt_f(e.train_acc),
            fmt_f(e.val_acc),
            fmt_f(e.test_acc),
            fmt_ms(t.train_ms + t.eval_ms),
        ];
        if let Some(g) = e.grad_probe {
            row.push(format!("{g:.6e}"));
        }
        rec.push(row);
    }
    Ok(rec)
}

// ---------------------------------------------------------------- sweep-depth

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Dp,
    Dt,
    Layers,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Depths: `a..b`, `a..b:step` or a comma list.
    #[arg(long)]
    pub values: String,
    /// Seeds per depth, counting up from --seed.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sweep_config(base: &ModelConfig, axis: Axis, depth: usize) -> Result<ModelConfig> {
    let mut cfg = base.clone();
    match axis {
        Axis::Dp => {
            cfg.d_p = depth;
            if cfg.pt_split.is_some() {
                cfg.pt_split = Some((depth / 2, depth - depth / 2));
            }
        }
        Axis::Dt => cfg.d_t = depth,
        Axis::Layers => {
            if cfg.architecture != Architecture::Ptpt {
                bail!("the layers axis applies to the ptpt architecture only");
            }
            cfg.d_t = depth;
            cfg.d_p = depth * cfg.adjacency_power;
        }
    }
    check(&cfg).map_err(|e| anyhow::anyhow!("depth {depth}: {e}"))?;
    Ok(cfg)
}

pub fn cmd_sweep_depth(args: &SweepArgs) -> Result<RunRecord> {
    let base = args.model.config()?;
    let depths = parse_usize_list(&args.values)?;
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let mut cells = Vec::new();
    for &d in &depths {
        let cfg = sweep_config(&base, args.axis, d)?;
        for r in 0..args.repeats {
            cells.push((
                ModelConfig {
                    seed: base.seed + r as u64,
                    ..cfg.clone()
                },
                d,
            ));
        }
    }
    let (ds, info) = args.data.load()?;
    let reports = run_cells(cells.clone(), &ds, true)?;
    let header = json!({
        "config": with_classes(&base, &ds),
        "axis": format!("{:?}", args.axis).to_lowercase(),
        "values": depths,
        "repeats": args.repeats,
        "dataset": info,
    });
    let mut rec = RunRecord::new(
        "sweep-depth",
        header,
        &["kind", "depth", "seed", "test_acc", "test_std", "train_acc", "train_std", "best_epoch", "train_ms"],
    )
    .with_timing(&["train_ms"]);
    for ((cfg, d), r) in cells.iter().zip(&reports) {
        rec.push(vec![
            "run".into(),
            d.to_string(),
            cfg.seed.to_string(),
            fmt_f(r.test_acc),
            String::new(),
            fmt_f(r.train_acc),
            String::new(),
            r.best_epoch.to_string(),
            fmt_ms(r.total_train_ms()),
        ]);
    }
    for &d in &depths {
        let mine: Vec<&TrainReport> = cells.iter().zip(&reports).filter(|((_, cd), _)| *cd == d).map(|(_, r)| r).collect();
        let (tm, ts) = mean_std(&mine.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        let (rm, rs) = mean_std(&mine.iter().map(|r| r.train_acc).collect::<Vec<_>>());
        info!("depth {d}: test {tm:.4} ± {ts:.4}, train {rm:.4}");
        rec.push(vec![
            "summary".into(),
            d.to_string(),
            String::new(),
            fmt_f(tm),
            fmt_f(ts),
            fmt_f(rm),
            fmt_f(rs),
            String::new(),
            String::new(),
        ]);
    }
    Ok(rec)
}

// ---------------------------------------------------------------- smoothness

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothMode {
    /// GSL of `Â^k X` for k = 0..=k_max (no training).
    Propagation,
    /// GSL of trained propagate-first logits across transformation depths.
    Trained,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothnessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "propagation")]
    pub mode: SmoothMode,
    #[arg(long, default_value_t = 50)]
    pub k_max: usize,
    /// Transformation depths for the trained mode.
    #[arg(long, default_value = "1..5")]
    pub dt_values: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_smoothness(args: &SmoothnessArgs) -> Result<RunRecord> {
    match args.mode {
        SmoothMode::Propagation => {
            let (ds, info) = args.data.load()?;
            let r = args.model.r;
            let rep = gsl_trajectory(ds.graph(), ds.features(), args.k_max, r, false)?;
            let header = json!({"mode": "propagation", "k_max": args.k_max, "r": r, "dataset": info});
            let mut rec = RunRecord::new("smoothness", header, &["step", "gsl"]);
            for (k, g) in rep.gsl.iter().enumerate() {
                rec.push(vec![k.to_string(), format!("{g:.9}")]);
            }
            match rep.stationary_gsl {
                Some(s) => rec.push(vec!["stationary".into(), format!("{s:.9}")]),
                None => rec.push(vec!["stationary".into(), "disconnected".into()]),
            }
            Ok(rec)
        }
        SmoothMode::Trained => {
            let base = args.model.config()?;
            if base.architecture != Architecture::Pptt {
                bail!("--mode trained needs --arch pptt");
            }
            let depths = parse_usize_list(&args.dt_values)?;
            for &d in &depths {
                sweep_config(&base, Axis::Dt, d)?;
            }
            let (ds, info) = args.data.load()?;
            let cfg = with_classes(&base, &ds);
            let rows = gsl_vs_dt_probe(&cfg, &ds, &depths)?;
            let header = json!({"mode": "trained", "config": cfg, "dt_values": depths, "dataset": info});
            let mut rec = RunRecord::new("smoothness", header, &["d_t", "gsl", "test_acc"]);
            for r in rows {
                rec.push(vec![r.d_t.to_string(), format!("{:.9}", r.gsl), fmt_f(r.test_acc)]);
            }
            Ok(rec)
        }
    }
}

// ---------------------------------------------------------------- stationary

#[derive(Debug, Clone, Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest power; distances are reported at 1, 2, 4, ... up to it.
    #[arg(long, default_value_t = 256)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_stationary(args: &StationaryArgs) -> Result<RunRecord> {
    if args.k_max == 0 {
        bail!("--k-max must be at least 1");
    }
    let (ds, info) = args.data.load()?;
    let limit = stationary_limit(ds.graph(), args.r)?;
    let adj = normalize_adjacency(&ds.graph().add_self_loops()?, args.r)?;
    let header = json!({"k_max": args.k_max, "r": args.r, "dataset": info});
    let mut rec = RunRecord::new("stationary", header, &["k", "max_abs_diff"]);
    let mut power = Matrix::identity(ds.num_nodes());
    let mut next = 1;
    for k in 1..=args.k_max {
        power = adj.matrix().spmm(&power)?;
        if k == next || k == args.k_max {
            let d = power.max_abs_diff(&limit);
            info!("k={k}: {d:.3e}");
            rec.push(vec![k.to_string(), format!("{d:.6e}")]);
            next *= 2;
        }
    }
    Ok(rec)
}

// ---------------------------------------------------------------- sparsity

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SparsityMode {
    Edge,
    Label,
    Feature,
}

#[derive(Debug, Clone, Args)]
pub struct SparsityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub mode: SparsityMode,
    /// Keep rates for edge/feature mode, labels per class for label mode.
    #[arg(long)]
    pub levels: String,
    /// Methods as `arch[+air]`; ptpt uses d_p = d_t, mlp uses d_p = 0.
    #[arg(long, default_value = "ptpt,ptpt+air,pptt,pptt+air,ttpp,ttpp+air")]
    pub methods: String,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Base seed of the perturbations; shared by every method at a level.
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn method_config(base: &ModelConfig, arch: Architecture, air: bool) -> Result<ModelConfig> {
    let mut cfg = ModelConfig {
        architecture: arch,
        air,
        ..base.clone()
    };
    match arch {
        Architecture::Ptpt => {
            cfg.pt_split = None;
            cfg.d_p = cfg.d_t * cfg.adjacency_power;
        }
        Architecture::Mlp => {
            cfg.d_p = 0;
            cfg.adjacency_power = 1;
            cfg.pt_split = None;
        }
        _ => {
            cfg.adjacency_power = 1;
            cfg.pt_split = None;
        }
    }
    if air {
        cfg.skip = SkipKind::None;
    }
    check(&cfg).map_err(|e| anyhow::anyhow!("method {}{}: {e}", arch.name(), if air { "+air" } else { "" }))?;
    Ok(cfg)
}

pub fn cmd_sparsity(args: &SparsityArgs) -> Result<RunRecord> {
    let base = args.model.config()?;
    let levels = parse_f64_list(&args.levels)?;
    let methods: Vec<(String, ModelConfig)> = args
        .methods
        .split(',')
        .map(|m| {
            let m = m.trim();
            let (arch, air) = parse_method(m)?;
            Ok((m.to_string(), method_config(&base, arch, air)?))
        })
        .collect::<Result<_>>()?;
    for &l in &levels {
        match args.mode {
            SparsityMode::Edge | SparsityMode::Feature if !(l > 0.0 && l <= 1.0) => {
                bail!("keep rate {l} outside (0, 1]")
            }
            SparsityMode::Label if !(l >= 1.0 && l.fract() == 0.0) => bail!("labels per class must be a positive integer, got {l}"),
            _ => {}
        }
    }
    let (ds, info) = args.data.load()?;

    let mut grid = Vec::new();
    for &level in &levels {
        for rep in 0..args.repeats {
            let pseed = args.perturb_seed + rep as u64;
            let perturbed = match args.mode {
                SparsityMode::Edge => perturb_edges(&ds, level, pseed)?,
                SparsityMode::Feature => perturb_features(&ds, level, pseed)?,
                SparsityMode::Label => subsample_labels(&ds, level as usize, pseed)?,
            };
            for (name, cfg) in &methods {
                grid.push((level, rep, name.clone(), cfg.clone(), perturbed.clone()));
            }
        }
    }
    let results: Vec<TrainReport> = grid
        .par_iter()
        .map(|(_, rep, _, cfg, d)| {
            let cfg = ModelConfig {
                seed: cfg.seed + *rep as u64,
                ..with_classes(cfg, d)
            };
            train(&cfg, d).map_err(anyhow::Error::from)
        })
        .collect::<Result<_>>()?;

    let header = json!({
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "levels": levels,
        "methods": methods.iter().map(|(n, c)| json!({"method": n, "config": with_classes(c, &ds)})).collect::<Vec<_>>(),
        "repeats": args.repeats,
        "perturb_seed": args.perturb_seed,
        "dataset": info,
    });
    let mut rec = RunRecord::new(
        "sparsity",
        header,
        &["mode", "level", "method", "seed", "dataset_hash", "edges", "train_nodes", "test_acc"],
    );
    let mode = format!("{:?}", args.mode).to_lowercase();
    for ((level, rep, name, cfg, d), r) in grid.iter().zip(&results) {
        let desc = describe(d);
        rec.push(vec![
            mode.clone(),
            format!("{level}"),
            name.clone(),
            (cfg.seed + *rep as u64).to_string(),
            desc["content_hash"].as_str().unwrap_or_default().to_string(),
            desc["edges"].to_string(),
            desc["train"].to_string(),
            fmt_f(r.test_acc),
        ]);
    }
    Ok(rec)
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Architectures to time, each with and without AIR.
    #[arg(long, default_value = "pptt,ttpp,ptpt")]
    pub methods: String,
    /// Plain and AIR runs alternate this many times; the fastest median
    /// epoch of each variant is kept.
    #[arg(long, default_value_t = 3)]
    pub timing_repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Per-method timings. `overhead` compares median epoch times of the AIR
/// and plain variants; PPTT precomputation is reported separately.
pub fn cmd_bench(args: &BenchArgs) -> Result<RunRecord> {
    let base = args.model.config()?;
    let mut plans = Vec::new();
    for m in args.methods.split(',') {
        let arch: Architecture = m.trim().parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        plans.push((arch, method_config(&base, arch, false)?, method_config(&base, arch, true)?));
    }
    let (ds, info) = args.data.load()?;
    let header = json!({
        "methods": plans.iter().map(|(a, p, g)| json!({"method": a.name(), "plain": with_classes(p, &ds), "air": with_classes(g, &ds)})).collect::<Vec<_>>(),
        "dataset": info,
    });
    let mut rec = RunRecord::new(
        "bench",
        header,
        &["method", "air", "epochs", "test_acc", "total_train_ms", "median_epoch_ms", "precompute_ms", "overhead"],
    )
    .with_timing(&["total_train_ms", "median_epoch_ms", "precompute_ms", "overhead"]);
    let med = |r: &TrainReport| median(&r.timings.iter().map(|t| t.train_ms).collect::<Vec<_>>());
    for (arch, plain, gated) in &plans {
        let (plain, gated) = (with_classes(plain, &ds), with_classes(gated, &ds));
        let (mut p, mut g) = (train(&plain, &ds)?, train(&gated, &ds)?);
        let (mut mp, mut mg) = (med(&p), med(&g));
        for _ in 1..args.timing_repeats.max(1) {
            let (rp, rg) = (train(&plain, &ds)?, train(&gated, &ds)?);
            if med(&rp) < mp {
                mp = med(&rp);
                p = rp;
            }
            if med(&rg) < mg {
                mg = med(&rg);
                g = rg;
            }
        }
        let overhead = (mg - mp) / mp;
        info!("{}: plain {mp:.2} ms/epoch, air {mg:.2} ms/epoch, overhead {:.1}%", arch.name(), overhead * 100.0);
        for (r, air, m, ov) in [(&p, false, mp, String::new()), (&g, true, mg, format!("{overhead:.4}"))] {
            rec.push(vec![
                arch.name().into(),
                air.to_string(),
                r.epochs.len().to_string(),
                fmt_f(r.test_acc),
                fmt_ms(r.total_train_ms()),
                fmt_ms(m),
                fmt_ms(r.precompute_ms),
                ov,
            ]);
        }
    }
    Ok(rec)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Nodes of the synthetic test graph.
    #[arg(long, default_value_t = 10)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Scalar parameters probed per model.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Every valid architecture × AIR × skip combination, plus the powered and
/// split analysis variants.
pub fn gradcheck_configs() -> Vec<(String, ModelConfig)> {
    let mut out = Vec::new();
    for arch in Architecture::ALL {
        for air in [false, true] {
            for skip in SkipKind::ALL {
                if air && skip != SkipKind::None {
                    continue;
                }
                let d_p = if arch == Architecture::Mlp { 0 } else { 3 };
                let name = format!("{}{}/{}", arch.name(), if air { "+air" } else { "" }, skip.name());
                out.push((
                    name,
                    ModelConfig {
                        architecture: arch,
                        d_p,
                        d_t: 3,
                        air,
                        skip,
                        hidden_width: 8,
                        num_classes: 2,
                        ..ModelConfig::default()
                    },
                ));
            }
        }
    }
    let small = |c: ModelConfig| ModelConfig {
        hidden_width: 8,
        num_classes: 2,
        ..c
    };
    out.push(("ptpt/power2".into(), small(ModelConfig::gcn_power(2, 2))));
    out.push(("ptpt/split5".into(), small(ModelConfig::gcn_split(5))));
    out
}

pub fn gradcheck_dataset(nodes: usize, seed: u64) -> Result<Dataset> {
    let ds = synth_sbm(&SbmParams {
        n: nodes,
        classes: 2,
        p_in: 0.5,
        p_out: 0.1,
        feat_dim: 4,
        signal_strength: 1.0,
        seed,
    })?;
    let per = (nodes / 5).max(1);
    Ok(make_split(&ds, per, 1, 1, seed)?)
}

/// Returns the report and whether every row matched its expectation. The
/// last row is a negative control with a corrupted sigmoid backward pass,
/// which is expected to fail.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(RunRecord, bool)> {
    let ds = gradcheck_dataset(args.nodes, args.seed)?;
    let opts = GradCheckOptions {
        tolerance: args.tolerance,
        samples: args.samples,
        seed: args.seed,
        ..GradCheckOptions::default()
    };
    let mut cases: Vec<(String, ModelConfig, Option<Fault>)> =
        gradcheck_configs().into_iter().map(|(n, c)| (n, c, None)).collect();
    cases.push((
        "ptpt+air/none (corrupted sigmoid backward)".into(),
        ModelConfig {
            hidden_width: 8,
            num_classes: 2,
            ..ModelConfig::gcn_air()
        },
        Some(Fault::SigmoidBackward),
    ));
    let header = json!({
        "tolerance": args.tolerance,
        "samples": args.samples,
        "seed": args.seed,
        "dataset": {"nodes": ds.num_nodes(), "content_hash": ds.content_hash()},
        "configs": cases.iter().map(|(n, c, _)| json!({"case": n, "config": c})).collect::<Vec<_>>(),
    });
    let mut rec = RunRecord::new(
        "gradcheck",
        header,
        &["case", "checked", "max_rel_error", "expected", "outcome"],
    );
    let mut ok = true;
    for (name, cfg, fault) in &cases {
        let report = model_gradient_check(
            cfg,
            &ds,
            GradCheckOptions {
                fault: *fault,
                samples: if fault.is_some() { args.samples.max(400) } else { args.samples },
                ..opts
            },
        )?;
        let expected = if fault.is_some() { "fail" } else { "pass" };
        let outcome = if report.passed { "pass" } else { "fail" };
        ok &= expected == outcome;
        info!("{name}: max rel error {:.3e} ({outcome})", report.max_rel_error);
        rec.push(vec![
            name.clone(),
            report.checked.to_string(),
            format!("{:.3e}", report.max_rel_error),
            expected.into(),
            outcome.into(),
        ]);
    }
    Ok((rec, ok))
}

// ---------------------------------------------------------------- degradation-probe

#[derive(Debug, Clone, Args)]
pub struct DegradationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Layer counts (d_t, and d_p = d_t for ptpt).
    #[arg(long, default_value = "2,4,8,16")]
    pub layers: String,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Record the first-layer gradient trajectory into --grad-out.
    #[arg(long)]
    pub probe_gradients: bool,
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Returns the accuracy table and, when probing, the gradient trajectory.
pub fn cmd_degradation_probe(args: &DegradationArgs) -> Result<(RunRecord, Option<RunRecord>)> {
    let base = args.model.config()?;
    if args.probe_gradients && args.grad_out.is_none() {
        bail!("--probe-gradients needs --grad-out");
    }
    let layers = parse_usize_list(&args.layers)?;
    let mut cells = Vec::new();
    for &l in &layers {
        let mut cfg = ModelConfig { d_t: l, ..base.clone() };
        match cfg.architecture {
            Architecture::Ptpt => {
                cfg.pt_split = None;
                cfg.d_p = l * cfg.adjacency_power;
            }
            Architecture::Mlp => cfg.d_p = 0,
            _ => {}
        }
        cfg.probe_first_layer = args.probe_gradients;
        check(&cfg).map_err(|e| anyhow::anyhow!("{l} layers: {e}"))?;
        for r in 0..args.repeats.max(1) {
            cells.push((
                ModelConfig {
                    seed: base.seed + r as u64,
                    ..cfg.clone()
                },
                l,
            ));
        }
    }
    let (ds, info) = args.data.load()?;
    let reports = run_cells(cells.clone(), &ds, true)?;
    let header = json!({"config": with_classes(&base, &ds), "layers": layers, "repeats": args.repeats.max(1), "dataset": info});
    let mut rec = RunRecord::new(
        "degradation-probe",
        header.clone(),
        &["layers", "seed", "train_acc", "val_acc", "test_acc", "best_epoch", "final_train_acc"],
    );
    let mut grads = args
        .probe_gradients
        .then(|| RunRecord::new("degradation-probe gradients", header, &["layers", "seed", "epoch", "grad_mean_abs"]));
    for ((cfg, l), r) in cells.iter().zip(&reports) {
        rec.push(vec![
            l.to_string(),
            cfg.seed.to_string(),
            fmt_f(r.train_acc),
            fmt_f(r.best_val_acc),
            fmt_f(r.test_acc),
            r.best_epoch.to_string(),
            fmt_f(r.epochs.last().map_or(f64::NAN, |e| e.train_acc)),
        ]);
        if let Some(g) = grads.as_mut() {
            for e in &r.epochs {
                g.push(vec![
                    l.to_string(),
                    cfg.seed.to_string(),
                    e.epoch.to_string(),
                    format!("{:.6e}", e.grad_probe.unwrap_or(f64::NAN)),
                ]);
            }
        }
    }
    Ok((rec, grads))
}
