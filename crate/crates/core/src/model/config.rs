use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Propagate `d_p` times, then transform `d_t` times.
    Pptt,
    /// Transform `d_t` times, then propagate the logits `d_p` times.
    Ttpp,
    /// `d_t` interleaved graph convolutions.
    Ptpt,
    /// Transformations only.
    Mlp,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Architecture::Pptt, Architecture::Ttpp, Architecture::Ptpt, Architecture::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Pptt => "pptt",
            Architecture::Ttpp => "ttpp",
            Architecture::Ptpt => "ptpt",
            Architecture::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pptt" => Ok(Architecture::Pptt),
            "ttpp" => Ok(Architecture::Ttpp),
            "ptpt" => Ok(Architecture::Ptpt),
            "mlp" => Ok(Architecture::Mlp),
            _ => Err(Error::Config(format!("unknown architecture `{s}` (expected pptt, ttpp, ptpt or mlp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipKind {
    None,
    Residual,
    Dense,
}

impl SkipKind {
    pub const ALL: [SkipKind; 3] = [SkipKind::None, SkipKind::Residual, SkipKind::Dense];

    pub fn name(self) -> &'static str {
        match self {
            SkipKind::None => "none",
            SkipKind::Residual => "res",
            SkipKind::Dense => "dense",
        }
    }
}

impl std::str::FromStr for SkipKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(SkipKind::None),
            "res" | "residual" => Ok(SkipKind::Residual),
            "dense" => Ok(SkipKind::Dense),
            _ => Err(Error::Config(format!("unknown skip kind `{s}` (expected none, res or dense)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Everything needed to build and train one model. `Default` gives a
/// two-layer GCN with lr 0.01, hidden 64, 500 epochs and dropout 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub d_p: usize,
    pub d_t: usize,
    pub air: bool,
    pub skip: SkipKind,
    pub hidden_width: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub r_exponent: f64,
    /// Propagations per interleaved layer (PTPT only).
    pub adjacency_power: usize,
    /// Propagation counts of the two layers of a `d_t = 2` PTPT model.
    pub pt_split: Option<(usize, usize)>,
    pub precision: Precision,
    /// Record mean |∂L/∂W₁| after every backward pass.
    pub probe_first_layer: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Ptpt,
            d_p: 2,
            d_t: 2,
            air: false,
            skip: SkipKind::None,
            hidden_width: 64,
            num_classes: 0,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 500,
            seed: 0,
            r_exponent: 0.5,
            adjacency_power: 1,
            pt_split: None,
            precision: Precision::F32,
            probe_first_layer: false,
        }
    }
}

impl ModelConfig {
    /// Interleaved model with `layers` graph convolutions.
    pub fn gcn(layers: usize) -> Self {
        Self {
            d_p: layers,
            d_t: layers,
            ..Self::default()
        }
    }

    /// PTPT with `d_t = 2` whose two layers propagate `⌊d_p/2⌋` and
    /// `⌈d_p/2⌉` times.
    pub fn gcn_split(d_p: usize) -> Self {
        Self {
            d_p,
            d_t: 2,
            pt_split: Some((d_p / 2, d_p - d_p / 2)),
            ..Self::default()
        }
    }

    /// PTPT where every layer propagates `power` times.
    pub fn gcn_power(layers: usize, power: usize) -> Self {
        Self {
            d_p: layers * power,
            d_t: layers,
            adjacency_power: power,
            ..Self::default()
        }
    }

    /// Propagate-first model with gated propagation, tuned for citation graphs.
    pub fn sgc_air() -> Self {
        Self {
            architecture: Architecture::Pptt,
            d_p: 10,
            d_t: 2,
            air: true,
            hidden_width: 200,
            learning_rate: 0.1,
            ..Self::default()
        }
    }

    /// Transform-first model with gated propagation of the logits.
    pub fn appnp_air() -> Self {
        Self {
            architecture: Architecture::Ttpp,
            d_p: 10,
            d_t: 2,
            air: true,
            hidden_width: 200,
            learning_rate: 0.1,
            ..Self::default()
        }
    }

    /// Six gated interleaved layers.
    pub fn gcn_air() -> Self {
        Self {
            d_p: 6,
            d_t: 6,
            air: true,
            hidden_width: 32,
            ..Self::default()
        }
    }

    pub fn mlp(layers: usize) -> Self {
        Self {
            architecture: Architecture::Mlp,
            d_p: 0,
            d_t: layers,
            ..Self::default()
        }
    }

    /// Number of propagations applied by interleaved layer `l` (1-based).
    pub fn propagations_in_layer(&self, l: usize) -> usize {
        match self.pt_split {
            Some((a, b)) => {
                if l == 1 {
                    a
                } else {
                    b
                }
            }
            None => self.adjacency_power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d_t == 0 {
            return bad("d_t must be at least 1: every model needs one transformation".into());
        }
        if self.hidden_width == 0 {
            return bad("hidden width must be at least 1".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be finite and non-negative", self.weight_decay));
        }
        if !(0.0..=1.0).contains(&self.r_exponent) {
            return bad(format!("normalization exponent r={} outside [0, 1]", self.r_exponent));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.adjacency_power == 0 {
            return bad("adjacency power must be at least 1".into());
        }
        if self.air && self.skip != SkipKind::None {
            return bad("AIR replaces plain skips; use either --air or --skip, not both".into());
        }
        let is_ptpt = self.architecture == Architecture::Ptpt;
        if !is_ptpt && self.adjacency_power != 1 {
            return bad("adjacency power applies only to the ptpt architecture".into());
        }
        if !is_ptpt && self.pt_split.is_some() {
            return bad("a propagation split applies only to the ptpt architecture".into());
        }
        match self.architecture {
            Architecture::Mlp if self.d_p != 0 => bad(format!("mlp has no propagation; set d_p=0 (got {})", self.d_p)),
            Architecture::Ptpt => {
                if let Some((a, b)) = self.pt_split {
                    if self.d_t != 2 {
                        return bad(format!("a propagation split needs d_t=2, got d_t={}", self.d_t));
                    }
                    if self.adjacency_power != 1 {
                        return bad("combine either a propagation split or an adjacency power, not both".into());
                    }
                    if a + b != self.d_p {
                        return bad(format!("split ({a}, {b}) does not sum to d_p={}", self.d_p));
                    }
                    if self.air {
                        return bad("AIR is not defined for split propagation".into());
                    }
                } else {
                    if self.d_p != self.adjacency_power * self.d_t {
                        return bad(if self.adjacency_power == 1 {
                            format!(
                                "ptpt requires d_p = d_t (got d_p={}, d_t={}); use a power or a split to decouple them",
                                self.d_p, self.d_t
                            )
                        } else {
                            format!(
                                "ptpt with adjacency power {} requires d_p = {}·d_t = {} (got {})",
                                self.adjacency_power,
                                self.adjacency_power,
                                self.adjacency_power * self.d_t,
                                self.d_p
                            )
                        });
                    }
                    if self.air && self.adjacency_power != 1 {
                        return bad("AIR is not defined for powered propagation".into());
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(c: ModelConfig) -> ModelConfig {
        ModelConfig { num_classes: 3, ..c }
    }

    #[test]
    fn presets_validate() {
        for c in [
            ModelConfig::gcn(2),
            ModelConfig::gcn(16),
            ModelConfig::gcn_split(5),
            ModelConfig::gcn_power(2, 2),
            ModelConfig::sgc_air(),
            ModelConfig::appnp_air(),
            ModelConfig::gcn_air(),
            ModelConfig::mlp(3),
        ] {
            cfg(c).validate().unwrap();
        }
    }

    #[test]
    fn split_rounds_down_then_up() {
        assert_eq!(ModelConfig::gcn_split(5).pt_split, Some((2, 3)));
        assert_eq!(ModelConfig::gcn_split(2).pt_split, Some((1, 1)));
    }

    #[test]
    fn ptpt_depths_must_match() {
        let err = cfg(ModelConfig {
            d_p: 3,
            ..ModelConfig::gcn(2)
        })
        .validate()
        .unwrap_err()
        .to_string();
        assert!(err.contains("d_p = d_t"), "{err}");
    }

    #[test]
    fn invalid_combinations_rejected() {
        let bad = [
            ModelConfig {
                d_p: 1,
                ..ModelConfig::mlp(2)
            },
            ModelConfig {
                air: true,
                skip: SkipKind::Residual,
                ..ModelConfig::gcn(2)
            },
            ModelConfig {
                d_t: 3,
                d_p: 4,
                pt_split: Some((2, 2)),
                ..ModelConfig::gcn(2)
            },
            ModelConfig {
                adjacency_power: 0,
                ..ModelConfig::gcn(2)
            },
            ModelConfig {
                architecture: Architecture::Pptt,
                adjacency_power: 2,
                ..ModelConfig::gcn(2)
            },
            ModelConfig {
                d_t: 0,
                ..ModelConfig::mlp(1)
            },
        ];
        for c in bad {
            assert!(cfg(c.clone()).validate().is_err(), "{c:?}");
        }
        assert!(ModelConfig::gcn(2).validate().is_err(), "class count unset");
    }

    #[test]
    fn names_parse_back() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        }
        for s in SkipKind::ALL {
            assert_eq!(s.name().parse::<SkipKind>().unwrap(), s);
        }
    }
}
