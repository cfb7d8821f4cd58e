use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Required number of convolutional weight layers.
pub const CONV_WEIGHT_LAYERS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub out_channels: usize,
    pub stride: usize,
}

/// How a block whose stride or width changes carries its input forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortcutKind {
    /// Strided subsampling plus zero-filled extra channels; no weights.
    #[default]
    ZeroPad,
    /// A 1-tap strided convolution, counted as a weight layer.
    Projection,
}

/// Layer layout of one Res1DCNN branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Res1dCnnConfig {
    pub input_channels: usize,
    pub input_len: usize,
    pub block_kernel: usize,
    #[serde(default)]
    pub shortcut: ShortcutKind,
    pub stem: StemSpec,
    pub blocks: Vec<BlockSpec>,
    /// Output width of a closing 1x1 convolution, if any.
    #[serde(default)]
    pub final_conv: Option<usize>,
}

impl Default for Res1dCnnConfig {
    /// Stem 1->8 (k7, /2); blocks 8, 16/2, 16, 32/2, 32, 64/2 with kernel 3;
    /// closing 1x1 conv 64->64: 1 + 6*2 + 1 = 14 weight layers, L = 64.
    fn default() -> Self {
        Self::with_widths([8, 8, 16, 16, 32, 32, 64], 64)
    }
}

impl Res1dCnnConfig {
    /// The default layout with custom widths `[stem, block1, ..., block6]`
    /// and closing-conv width.
    pub fn with_widths(w: [usize; 7], final_width: usize) -> Self {
        let strides = [1, 2, 1, 2, 1, 2];
        Self {
            input_channels: 1,
            input_len: crate::biosignal::WINDOW_LEN,
            block_kernel: 3,
            shortcut: ShortcutKind::ZeroPad,
            stem: StemSpec {
                out_channels: w[0],
                kernel: 7,
                stride: 2,
            },
            blocks: w[1..]
                .iter()
                .zip(strides)
                .map(|(&out_channels, stride)| BlockSpec { out_channels, stride })
                .collect(),
            final_conv: Some(final_width),
        }
    }

    /// Five blocks whose three downsampling shortcuts are 1-tap projections:
    /// 1 + 5*2 + 3 = 14 weight layers.
    pub fn projection_variant() -> Self {
        let widths = [8, 16, 32, 32, 64];
        let strides = [1, 2, 2, 1, 2];
        Self {
            shortcut: ShortcutKind::Projection,
            blocks: widths
                .iter()
                .zip(strides)
                .map(|(&out_channels, stride)| BlockSpec { out_channels, stride })
                .collect(),
            final_conv: None,
            ..Self::default()
        }
    }

    /// Reduced width for fast tests; same 14-layer layout.
    pub fn reduced(input_len: usize) -> Self {
        Self {
            input_len,
            ..Self::with_widths([2, 2, 3, 3, 4, 4, 4], 4)
        }
    }

    /// [`projection_variant`](Self::projection_variant) at reduced width.
    pub fn reduced_projection(input_len: usize) -> Self {
        let mut cfg = Self::projection_variant();
        cfg.input_len = input_len;
        cfg.stem.out_channels = 2;
        for (b, w) in cfg.blocks.iter_mut().zip([2, 3, 3, 3, 4]) {
            b.out_channels = w;
        }
        cfg
    }

    pub fn block_in_channels(&self, index: usize) -> usize {
        if index == 0 {
            self.stem.out_channels
        } else {
            self.blocks[index - 1].out_channels
        }
    }

    /// Whether block `index` changes length or width.
    pub fn block_reshapes(&self, index: usize) -> bool {
        let b = &self.blocks[index];
        b.stride != 1 || b.out_channels != self.block_in_channels(index)
    }

    pub fn block_has_projection(&self, index: usize) -> bool {
        self.shortcut == ShortcutKind::Projection && self.block_reshapes(index)
    }

    pub fn conv_layer_count(&self) -> usize {
        let projections = (0..self.blocks.len()).filter(|&i| self.block_has_projection(i)).count();
        1 + 2 * self.blocks.len() + projections + usize::from(self.final_conv.is_some())
    }

    /// Length of the feature map z (channels after the last conv, pooled).
    pub fn feature_len(&self) -> usize {
        self.final_conv
            .or(self.blocks.last().map(|b| b.out_channels))
            .unwrap_or(self.stem.out_channels)
    }

    /// Temporal length entering the pooling stage.
    pub fn final_temporal_len(&self) -> usize {
        let mut len = self.input_len.div_ceil(self.stem.stride);
        for b in &self.blocks {
            len = len.div_ceil(b.stride);
        }
        len
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.input_channels > 0
            && self.input_len > 0
            && self.block_kernel > 0
            && self.stem.out_channels > 0
            && self.stem.kernel > 0
            && self.stem.stride > 0
            && self.final_conv != Some(0)
            && self.blocks.iter().all(|b| b.out_channels > 0 && b.stride > 0);
        if !positive {
            return Err(Error::InvalidConfig("all sizes must be positive".into()));
        }
        if self.shortcut == ShortcutKind::ZeroPad {
            if let Some(i) = (0..self.blocks.len()).find(|&i| self.blocks[i].out_channels < self.block_in_channels(i)) {
                return Err(Error::InvalidConfig(format!(
                    "block {} narrows its width, which a zero-pad shortcut cannot do",
                    i + 1
                )));
            }
        }
        let count = self.conv_layer_count();
        if count != CONV_WEIGHT_LAYERS {
            return Err(Error::InvalidConfig(format!(
                "{count} convolutional weight layers, expected {CONV_WEIGHT_LAYERS}"
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
