//! Shared flag groups and their translation into core types.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use airgnn_core::data::{load_canonical, load_citation_plaintext, make_split, synth_sbm, Dataset, SbmParams};
use airgnn_core::model::{Architecture, ModelConfig, Precision, SkipKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Pptt,
    Ttpp,
    Ptpt,
    Mlp,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Pptt => Architecture::Pptt,
            ArchArg::Ttpp => Architecture::Ttpp,
            ArchArg::Ptpt => Architecture::Ptpt,
            ArchArg::Mlp => Architecture::Mlp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkipArg {
    None,
    Res,
    Dense,
}

impl From<SkipArg> for SkipKind {
    fn from(s: SkipArg) -> Self {
        match s {
            SkipArg::None => SkipKind::None,
            SkipArg::Res => SkipKind::Residual,
            SkipArg::Dense => SkipKind::Dense,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "ptpt")]
    pub arch: ArchArg,
    /// Gate propagation and add initial residuals to transformations.
    #[arg(long)]
    pub air: bool,
    #[arg(long, value_enum, default_value = "none")]
    pub skip: SkipArg,
    /// Propagation depth.
    #[arg(long, default_value_t = 2)]
    pub dp: usize,
    /// Transformation depth.
    #[arg(long, default_value_t = 2)]
    pub dt: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Normalization exponent of `D^{r-1} A D^{-r}`.
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Propagations per interleaved layer (ptpt).
    #[arg(long, default_value_t = 1)]
    pub power: usize,
    /// Spread d_p over two interleaved layers as floor/ceil halves (ptpt, dt=2).
    #[arg(long)]
    pub pt_split: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: PrecisionArg,
}

impl ModelArgs {
    /// Resolves and validates the configuration. The class count is filled
    /// in from the dataset later; validation uses a placeholder.
    pub fn config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            architecture: self.arch.into(),
            d_p: self.dp,
            d_t: self.dt,
            air: self.air,
            skip: self.skip.into(),
            hidden_width: self.hidden,
            num_classes: 0,
            dropout_rate: self.dropout,
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            seed: self.seed,
            r_exponent: self.r,
            adjacency_power: self.power,
            pt_split: self.pt_split.then_some((self.dp / 2, self.dp - self.dp / 2)),
            precision: match self.precision {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F64 => Precision::F64,
            },
            probe_first_layer: false,
        };
        check(&cfg)?;
        Ok(cfg)
    }
}

/// Validates everything except the class count.
pub fn check(cfg: &ModelConfig) -> Result<()> {
    ModelConfig {
        num_classes: cfg.num_classes.max(2),
        ..cfg.clone()
    }
    .validate()
    .map_err(|e| anyhow!("{e}"))
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset location: a directory for `canonical`, a directory or
    /// `<prefix>` of `<prefix>.content`/`<prefix>.cites` for `citation`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `citation`, `canonical`, or `sbm:n=300,c=3,pin=0.1,pout=0.01,d=16,s=1.0`
    /// (optional keys: seed, train, val, test).
    #[arg(long, default_value = "sbm:n=300,c=3,pin=0.1,pout=0.01,d=16,s=1.0")]
    pub format: String,
    /// Divide each feature row by its L1 norm.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub row_normalize: bool,
    /// Training nodes per class when a split is drawn.
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub val_count: Option<usize>,
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Redraw the split of a canonical dataset instead of using split.tsv.
    #[arg(long)]
    pub resplit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Citation(PathBuf),
    Canonical(PathBuf),
    Sbm(SbmSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub params: SbmParams,
    pub train: Option<usize>,
    pub val: Option<usize>,
    pub test: Option<usize>,
}

pub fn parse_sbm(spec: &str) -> Result<SbmSpec> {
    let mut out = SbmSpec {
        params: SbmParams::default(),
        train: None,
        val: None,
        test: None,
    };
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("sbm spec entry `{part}` is not key=value"))?;
        let bad = |e: &dyn std::fmt::Display| anyhow!("sbm spec `{k}={v}`: {e}");
        let p = &mut out.params;
        match k {
            "n" => p.n = v.parse().map_err(|e| bad(&e))?,
            "c" => p.classes = v.parse().map_err(|e| bad(&e))?,
            "pin" => p.p_in = v.parse().map_err(|e| bad(&e))?,
            "pout" => p.p_out = v.parse().map_err(|e| bad(&e))?,
            "d" => p.feat_dim = v.parse().map_err(|e| bad(&e))?,
            "s" => p.signal_strength = v.parse().map_err(|e| bad(&e))?,
            "seed" => p.seed = v.parse().map_err(|e| bad(&e))?,
            "train" => out.train = Some(v.parse().map_err(|e| bad(&e))?),
            "val" => out.val = Some(v.parse().map_err(|e| bad(&e))?),
            "test" => out.test = Some(v.parse().map_err(|e| bad(&e))?),
            _ => bail!("unknown sbm spec key `{k}` (expected n, c, pin, pout, d, s, seed, train, val, test)"),
        }
    }
    Ok(out)
}

fn citation_files(path: &Path) -> Result<(PathBuf, PathBuf)> {
    if path.is_dir() {
        let mut content = None;
        for entry in fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "content") {
                if content.is_some() {
                    bail!("{} holds several .content files; pass the file prefix instead", path.display());
                }
                content = Some(p);
            }
        }
        let content = content.ok_or_else(|| anyhow!("no .content file in {}", path.display()))?;
        let cites = content.with_extension("cites");
        Ok((content, cites))
    } else {
        Ok((path.with_extension("content"), path.with_extension("cites")))
    }
}

impl DataArgs {
    pub fn source(&self) -> Result<Source> {
        let need_path = || {
            self.dataset
                .clone()
                .ok_or_else(|| anyhow!("--dataset PATH is required for --format {}", self.format))
        };
        match self.format.as_str() {
            "citation" => Ok(Source::Citation(need_path()?)),
            "canonical" => Ok(Source::Canonical(need_path()?)),
            f if f.starts_with("sbm:") || f == "sbm" => Ok(Source::Sbm(parse_sbm(f.trim_start_matches("sbm").trim_start_matches(':'))?)),
            f => bail!("unknown --format `{f}` (expected citation, canonical or sbm:SPEC)"),
        }
    }

    /// Loads, row-normalizes and splits the dataset; also returns the JSON
    /// description written into every CSV header.
    pub fn load(&self) -> Result<(Dataset, Value)> {
        let source = self.source()?;
        let (ds, has_split) = match &source {
            Source::Citation(p) => {
                let (c, e) = citation_files(p)?;
                (load_citation_plaintext(&c, &e).with_context(|| format!("loading {}", c.display()))?, false)
            }
            Source::Canonical(p) => (load_canonical(p).with_context(|| format!("loading {}", p.display()))?, !self.resplit),
            Source::Sbm(spec) => (synth_sbm(&spec.params)?, false),
        };
        let ds = if self.row_normalize { ds.row_normalized() } else { ds };
        let ds = if has_split {
            ds
        } else {
            let n = ds.num_nodes();
            let (dt, dv, de) = match &source {
                Source::Sbm(spec) => {
                    // at most a fifth of the nodes carry training labels
                    let per_class = (n / (5 * spec.params.classes.max(1))).clamp(1, 20);
                    (spec.train.unwrap_or(per_class), spec.val.unwrap_or(n / 5), spec.test.unwrap_or(2 * n / 5))
                }
                _ => (20, 500, 1000),
            };
            make_split(
                &ds,
                self.train_per_class.unwrap_or(dt),
                self.val_count.unwrap_or(dv),
                self.test_count.unwrap_or(de),
                self.split_seed,
            )?
        };
        let info = json!({
            "name": ds.name(),
            "format": self.format,
            "path": self.dataset.as_ref().map(|p| p.display().to_string()),
            "content_hash": ds.content_hash(),
            "nodes": ds.num_nodes(),
            "edges": ds.graph().num_edges(),
            "features": ds.feature_dim(),
            "classes": ds.class_count(),
            "row_normalized": self.row_normalize,
            "split_seed": self.split_seed,
            "train": ds.masks().train().iter().filter(|&&b| b).count(),
            "val": ds.masks().val().iter().filter(|&&b| b).count(),
            "test": ds.masks().test().iter().filter(|&&b| b).count(),
            "connectivity_augmented": ds.meta().connectivity_augmented,
            "dropped_edge_refs": ds.meta().dropped_edge_refs,
        });
        Ok((ds, info))
    }
}

/// Describes a perturbed dataset for CSV headers and rows.
pub fn describe(ds: &Dataset) -> Value {
    json!({
        "content_hash": ds.content_hash(),
        "edges": ds.graph().num_edges(),
        "train": ds.masks().train().iter().filter(|&&b| b).count(),
    })
}

/// Parses `a..b` (inclusive), `a..b:step`, or a comma list.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (b, st.trim().parse::<usize>()?),
            None => (rest, 1),
        };
        let (a, b) = (a.trim().parse::<usize>()?, b.trim().parse::<usize>()?);
        if step == 0 || a > b {
            bail!("range `{s}` is empty or has a zero step");
        }
        return Ok((a..=b).step_by(step).collect());
    }
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| anyhow!("`{t}`: {e}")))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        bail!("empty list");
    }
    Ok(v)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("`{t}`: {e}")))
        .collect()
}

/// Method shorthand `arch[+air]`, e.g. `ptpt+air`.
pub fn parse_method(s: &str) -> Result<(Architecture, bool)> {
    let (arch, air) = match s.strip_suffix("+air") {
        Some(a) => (a, true),
        None => (s, false),
    };
    Ok((arch.parse::<Architecture>().map_err(|e| anyhow!("{e}"))?, air))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_spec_parses_all_keys() {
        let s = parse_sbm("n=50,c=2,pin=0.3,pout=0.02,d=8,s=2.5,seed=4,train=3,val=10,test=20").unwrap();
        assert_eq!(s.params.n, 50);
        assert_eq!(s.params.classes, 2);
        assert_eq!(s.params.p_in, 0.3);
        assert_eq!(s.params.signal_strength, 2.5);
        assert_eq!((s.train, s.val, s.test), (Some(3), Some(10), Some(20)));
        assert!(parse_sbm("n=5,q=1").is_err());
        assert!(parse_sbm("n").is_err());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_usize_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_usize_list("2..8:2").unwrap(), vec![2, 4, 6, 8]);
        assert_eq!(parse_usize_list("2, 4,16").unwrap(), vec![2, 4, 16]);
        assert!(parse_usize_list("5..1").is_err());
        assert_eq!(parse_f64_list("1.0,0.5").unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn methods() {
        assert_eq!(parse_method("ptpt+air").unwrap(), (Architecture::Ptpt, true));
        assert_eq!(parse_method("mlp").unwrap(), (Architecture::Mlp, false));
        assert!(parse_method("gat").is_err());
    }
}
