//! Experiment configuration: a flat TOML (or JSON) document with defaults
//! matching the reference experiment. The fully-resolved config is echoed
//! as JSON into every output directory so a run can be reproduced from its
//! artifacts alone.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sdropt::dsp::BandPartition;
use sdropt::objectives::{IsLossConfig, LossSpec, SdrLossConfig, StoiConfig};
use sdropt::rnn::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Signal length in samples.
    pub t_len: usize,
    /// Network input/output window length.
    pub window: usize,
    /// Window stride for dataset construction and inference.
    pub shift: usize,
    pub snr_list: Vec<f64>,
    pub losses: Vec<String>,
    pub seeds: Vec<u64>,
    /// Max delay of the evaluation-side projectors.
    pub eval_g: usize,
    pub train: TrainSection,
    pub stoi: StoiSection,
    pub sdr: SdrSection,
    pub is: IsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            t_len: 600,
            window: 100,
            shift: 1,
            snr_list: vec![10.0, 0.0, -10.0],
            losses: vec!["l1".into(), "l2".into(), "neg_sdr".into()],
            seeds: vec![0, 1, 2, 3, 4],
            eval_g: 32,
            train: TrainSection::default(),
            stoi: StoiSection::default(),
            sdr: SdrSection::default(),
            is: IsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_size: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            hidden_size: d.hidden_size,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            learning_rate: d.learning_rate,
            patience: d.patience,
            val_fraction: d.val_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StoiSection {
    pub analysis_len: usize,
    pub zeta_db: f64,
    pub frame_size: usize,
    pub hop: usize,
    pub fs: f64,
    pub j_bands: usize,
    pub f_min: f64,
}

impl Default for StoiSection {
    fn default() -> Self {
        StoiSection {
            analysis_len: 30,
            zeta_db: -15.0,
            frame_size: 512,
            hop: 256,
            fs: 10_000.0,
            j_bands: 15,
            f_min: 150.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SdrSection {
    pub g_train: usize,
    pub floor: f64,
}

impl Default for SdrSection {
    fn default() -> Self {
        let d = SdrLossConfig::default();
        SdrSection {
            g_train: d.max_delay,
            floor: d.floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IsSection {
    pub frame_size: usize,
    pub hop: usize,
    pub floor: f64,
}

impl Default for IsSection {
    fn default() -> Self {
        let d = IsLossConfig::default();
        IsSection {
            frame_size: d.frame_size,
            hop: d.hop,
            floor: d.floor,
        }
    }
}

impl ExperimentConfig {
    /// Loads TOML (default) or JSON (by extension, so a `config.json` echo
    /// can be fed straight back in).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 || self.window == 0 {
            bail!("t_len and window must be positive");
        }
        if self.window > self.t_len {
            bail!(
                "window ({}) must not exceed t_len ({})",
                self.window,
                self.t_len
            );
        }
        if self.shift == 0 {
            bail!("shift must be at least 1");
        }
        if self.snr_list.is_empty() || self.losses.is_empty() || self.seeds.is_empty() {
            bail!("snr_list, losses, and seeds must be non-empty");
        }
        for name in &self.losses {
            self.loss_spec(name)?;
        }
        if self.eval_g == 0 {
            bail!("eval_g must be at least 1");
        }
        if !(self.train.val_fraction > 0.0 && self.train.val_fraction < 1.0) {
            bail!("train.val_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Resolves a loss name against the config's loss sections.
    pub fn loss_spec(&self, name: &str) -> Result<LossSpec> {
        Ok(match name {
            "l1" => LossSpec::L1,
            "l2" => LossSpec::L2,
            "is" => LossSpec::Is(IsLossConfig {
                frame_size: self.is.frame_size,
                hop: self.is.hop,
                floor: self.is.floor,
            }),
            "neg_stoi" => {
                let bands = BandPartition::third_octave(
                    self.stoi.fs,
                    self.stoi.frame_size,
                    self.stoi.j_bands,
                    self.stoi.f_min,
                )
                .context("building the one-third octave bands from [stoi]")?;
                LossSpec::NegStoi(StoiConfig {
                    analysis_len: self.stoi.analysis_len,
                    zeta_db: self.stoi.zeta_db,
                    bands,
                    frame_size: self.stoi.frame_size,
                    hop: self.stoi.hop,
                })
            }
            "neg_sdr" => LossSpec::NegSdr(SdrLossConfig {
                max_delay: self.sdr.g_train,
                floor: self.sdr.floor,
            }),
            other => bail!(
                "unknown loss {other:?} (expected l1, l2, is, neg_stoi, or neg_sdr)"
            ),
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_size: self.train.hidden_size,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            learning_rate: self.train.learning_rate,
            patience: self.train.patience,
            val_fraction: self.train.val_fraction,
            seed,
        }
    }

    /// Writes the fully-resolved config as pretty JSON.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Directory-name form of an SNR value: integral dB values drop the
/// fractional part ("snr_-10"), others keep it.
pub fn snr_label(snr_db: f64) -> String {
    if snr_db.fract() == 0.0 {
        format!("{}", snr_db as i64)
    } else {
        format!("{snr_db}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_experiment() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.t_len, 600);
        assert_eq!(cfg.window, 100);
        assert_eq!(cfg.shift, 1);
        assert_eq!(cfg.snr_list, vec![10.0, 0.0, -10.0]);
        assert_eq!(cfg.losses, vec!["l1", "l2", "neg_sdr"]);
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg.train.batch_size, 50);
        assert_eq!(cfg.train.max_epochs, 500);
        assert_eq!(cfg.eval_g, 32);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_json_echo() {
        let cfg = ExperimentConfig::default();
        let toml_text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(cfg, back);
        let json_text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json_text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_loss_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.losses = vec!["l3".into()];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snr_labels() {
        assert_eq!(snr_label(10.0), "10");
        assert_eq!(snr_label(-10.0), "-10");
        assert_eq!(snr_label(0.0), "0");
        assert_eq!(snr_label(2.5), "2.5");
    }
}
