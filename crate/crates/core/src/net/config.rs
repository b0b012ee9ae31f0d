use std::fmt;
use std::str::FromStr;

use crate::config::KvConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipMode {
    /// One decoder node per level fed by the encoder node of that row.
    Unet,
    /// Full nested grid; node `(i, j)` sees every `x^{i,0..j-1}`.
    UnetPlusPlus,
    /// Full nested grid; node `(i, j)` sees only `x^{i,j-1}`.
    Streamlined,
}

impl SkipMode {
    pub const ALL: [SkipMode; 3] = [
        SkipMode::Unet,
        SkipMode::UnetPlusPlus,
        SkipMode::Streamlined,
    ];
}

impl fmt::Display for SkipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SkipMode::Unet => "unet",
            SkipMode::UnetPlusPlus => "unetpp",
            SkipMode::Streamlined => "streamlined",
        })
    }
}

impl FromStr for SkipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(SkipMode::Unet),
            "unetpp" => Ok(SkipMode::UnetPlusPlus),
            "streamlined" => Ok(SkipMode::Streamlined),
            other => Err(Error::Config(format!(
                "unknown skip_mode `{other}` (expected unet, unetpp or streamlined)"
            ))),
        }
    }
}

/// Declarative description of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Number of down-samplings `L`; rows run `0..=L`.
    pub levels: usize,
    /// Channels at level 0.
    pub base_width: usize,
    /// Square input size; must be divisible by `2^L`.
    pub input_hw: usize,
    pub skip_mode: SkipMode,
    pub with_classifier: bool,
    pub num_classes: usize,
    pub dropout_rate: f64,
    /// Channel width of the classifier's convolution stages.
    pub classifier_width: usize,
    /// Widths of the two hidden dense layers.
    pub dense_widths: [usize; 2],
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ArchConfig {
    /// Desk-scale network: 64x64 inputs, base width 8.
    pub fn desk() -> Self {
        Self {
            levels: 4,
            base_width: 8,
            input_hw: 64,
            skip_mode: SkipMode::Streamlined,
            with_classifier: true,
            num_classes: 3,
            dropout_rate: 0.5,
            classifier_width: 64,
            dense_widths: [512, 128],
        }
    }

    /// Published scale: 128x128 inputs, VGG-16 widths starting at 64.
    pub fn paper_scale() -> Self {
        Self {
            base_width: 64,
            input_hw: 128,
            ..Self::desk()
        }
    }

    pub fn with_skip_mode(mut self, mode: SkipMode) -> Self {
        self.skip_mode = mode;
        self
    }

    pub fn with_classifier(mut self, on: bool) -> Self {
        self.with_classifier = on;
        self
    }

    /// Output channels of row `i`: `[w, 2w, 4w, 8w, 8w, 8w, ...]`.
    pub fn channels(&self, i: usize) -> usize {
        let w = self.base_width;
        match i {
            0 => w,
            1 => 2 * w,
            2 => 4 * w,
            _ => 8 * w,
        }
    }

    /// Convolutions in encoder row `i`, following VGG-16: two in the first
    /// two blocks, three afterwards.
    pub fn encoder_convs(&self, i: usize) -> usize {
        if i < 2 {
            2
        } else {
            3
        }
    }

    /// Spatial extent of row `i`.
    pub fn spatial(&self, i: usize) -> usize {
        self.input_hw >> i
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("levels must be >= 1".into()));
        }
        if self.levels >= usize::BITS as usize - 1
            || !self.input_hw.is_multiple_of(1usize << self.levels)
            || self.input_hw == 0
        {
            return Err(Error::Config(format!(
                "input_hw {} is not divisible by 2^levels = 2^{}",
                self.input_hw, self.levels
            )));
        }
        if self.base_width == 0 {
            return Err(Error::Config("base_width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        if self.with_classifier {
            if self.num_classes == 0 {
                return Err(Error::Config("num_classes must be >= 1".into()));
            }
            if self.classifier_width == 0 || self.dense_widths.contains(&0) {
                return Err(Error::Config("classifier widths must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Reads architecture keys from `kv`, starting from the desk defaults.
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = Self::desk();
        let skip: String = kv.take_or("skip_mode", d.skip_mode.to_string())?;
        let cfg = Self {
            levels: kv.take_or("levels", d.levels)?,
            base_width: kv.take_or("base_width", d.base_width)?,
            input_hw: kv.take_or("input_hw", d.input_hw)?,
            skip_mode: skip.parse()?,
            with_classifier: kv.take_or("with_classifier", d.with_classifier)?,
            num_classes: kv.take_or("num_classes", d.num_classes)?,
            dropout_rate: kv.take_or("dropout_rate", d.dropout_rate)?,
            classifier_width: kv.take_or("classifier_width", d.classifier_width)?,
            dense_widths: [
                kv.take_or("dense1", d.dense_widths[0])?,
                kv.take_or("dense2", d.dense_widths[1])?,
            ],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The same keys [`ArchConfig::from_kv`] reads.
    pub fn to_kv_string(&self) -> String {
        format!(
            "levels = {}\nbase_width = {}\ninput_hw = {}\nskip_mode = {}\nwith_classifier = {}\nnum_classes = {}\ndropout_rate = {}\nclassifier_width = {}\ndense1 = {}\ndense2 = {}\n",
            self.levels,
            self.base_width,
            self.input_hw,
            self.skip_mode,
            self.with_classifier,
            self.num_classes,
            self.dropout_rate,
            self.classifier_width,
            self.dense_widths[0],
            self.dense_widths[1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_follows_vgg_proportions() {
        let c = ArchConfig::paper_scale();
        let widths: Vec<usize> = (0..=4).map(|i| c.channels(i)).collect();
        assert_eq!(widths, vec![64, 128, 256, 512, 512]);
        let convs: Vec<usize> = (0..=4).map(|i| c.encoder_convs(i)).collect();
        assert_eq!(convs, vec![2, 2, 3, 3, 3]);
    }

    #[test]
    fn divisibility_enforced() {
        let mut c = ArchConfig::desk();
        c.input_hw = 40;
        assert!(c.validate().is_err());
        c.input_hw = 48;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn kv_round_trip() {
        let mut c = ArchConfig::desk().with_skip_mode(SkipMode::Unet);
        c.dense_widths = [16, 8];
        let mut kv = KvConfig::parse(&c.to_kv_string()).unwrap();
        let back = ArchConfig::from_kv(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(back, c);
    }
}
