use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::NetError;

pub const KERNEL: usize = 3;
pub const STRIDE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Two ribs (image, segmentation) fused by a spine at every block.
    #[default]
    Ribcage,
    /// Independent image and segmentation streams fused only before the head.
    Siamese,
    /// Image and segmentation stacked on the channel axis from the start.
    Naive,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ribcage, Variant::Siamese, Variant::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ribcage => "ribcage",
            Variant::Siamese => "siamese",
            Variant::Naive => "naive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| NetError::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// One-hot background / foreground / boundary channels.
    #[default]
    #[serde(rename = "trinary_onehot_3ch", alias = "trinary")]
    TrinaryOnehot3ch,
    /// Single foreground channel; boundary counts as foreground.
    #[serde(rename = "binary_1ch", alias = "binary")]
    Binary1ch,
}

impl InputEncoding {
    pub const ALL: [InputEncoding; 2] = [InputEncoding::TrinaryOnehot3ch, InputEncoding::Binary1ch];

    pub fn channels(self) -> usize {
        match self {
            InputEncoding::TrinaryOnehot3ch => 3,
            InputEncoding::Binary1ch => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputEncoding::TrinaryOnehot3ch => "trinary",
            InputEncoding::Binary1ch => "binary",
        }
    }
}

impl fmt::Display for InputEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputEncoding {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trinary" | "trinary_onehot_3ch" => Ok(InputEncoding::TrinaryOnehot3ch),
            "binary" | "binary_1ch" => Ok(InputEncoding::Binary1ch),
            _ => Err(NetError::Config(format!("unknown encoding {s:?}"))),
        }
    }
}

fn default_kernel() -> usize {
    KERNEL
}

fn default_stride() -> usize {
    STRIDE
}

fn default_image_channels() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ArchConfig {
    pub variant: Variant,
    /// Side of the square network input; a power of two.
    pub input_size: usize,
    #[serde(default = "default_image_channels")]
    pub image_channels: usize,
    pub input_encoding: InputEncoding,
    pub n_blocks: usize,
    pub features_per_block: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Hidden fully connected widths; a final 1-unit layer is implied.
    pub fc_widths: Vec<usize>,
    /// Ribcage only: feed the last rib outputs to the head as well as the spine.
    #[serde(default)]
    pub head_reads_ribs: bool,
}

impl ArchConfig {
    /// Desk-scale default: 64 px input, 4 blocks of `[8, 16, 32, 32]`,
    /// hidden FC widths `[64, 32]`.
    pub fn desk(variant: Variant, encoding: InputEncoding) -> Self {
        Self {
            variant,
            input_size: 64,
            image_channels: 1,
            input_encoding: encoding,
            n_blocks: 4,
            features_per_block: vec![8, 16, 32, 32],
            kernel: KERNEL,
            stride: STRIDE,
            fc_widths: vec![64, 32],
            head_reads_ribs: false,
        }
    }

    /// Full-size feature counts `[32, 64, 128, 256]`.
    pub fn full(variant: Variant, encoding: InputEncoding, input_size: usize) -> Self {
        Self {
            input_size,
            features_per_block: vec![32, 64, 128, 256],
            ..Self::desk(variant, encoding)
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.kernel != KERNEL || self.stride != STRIDE {
            return bad(format!("only {KERNEL}x{KERNEL} kernels with stride {STRIDE} are supported"));
        }
        if self.input_size == 0 || !self.input_size.is_power_of_two() {
            return bad(format!("input_size {} is not a power of two", self.input_size));
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1".into());
        }
        if self.features_per_block.len() != self.n_blocks {
            return bad(format!(
                "features_per_block has {} entries for {} blocks",
                self.features_per_block.len(),
                self.n_blocks
            ));
        }
        if self.n_blocks >= usize::BITS as usize || self.input_size >> self.n_blocks == 0 {
            return bad(format!("input_size {} too small for {} blocks", self.input_size, self.n_blocks));
        }
        if self.features_per_block.contains(&0) || self.fc_widths.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if self.image_channels != 1 && self.image_channels != 3 {
            return bad(format!("image_channels must be 1 or 3, got {}", self.image_channels));
        }
        if self.head_reads_ribs && self.variant != Variant::Ribcage {
            return bad("head_reads_ribs only applies to the ribcage variant".into());
        }
        Ok(())
    }

    pub fn seg_channels(&self) -> usize {
        self.input_encoding.channels()
    }

    /// Spatial side after `level` stride-2 convolutions.
    pub fn side_at(&self, level: usize) -> usize {
        let mut s = self.input_size;
        for _ in 0..level {
            s = conv_out(s);
        }
        s
    }
}

/// Output side of a 3x3, stride 2, padding 1 convolution.
#[inline]
pub fn conv_out(side: usize) -> usize {
    (side - 1) / STRIDE + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    BnScale,
    BnShift,
    RunningMean,
    RunningVar,
    DenseWeight,
    DenseBias,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::RunningMean | ParamKind::RunningVar)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    /// Fan-in used for initialisation.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where a convolution reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Image,
    Seg,
    /// Image and segmentation channels stacked.
    Joint,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvTerm {
    pub weight: usize,
    pub source: Source,
    pub in_channels: usize,
}

/// Sum of stride-2 convolutions followed by batch norm and ReLU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvNode {
    pub name: String,
    pub terms: Vec<ConvTerm>,
    pub out_channels: usize,
    pub in_side: usize,
    pub out_side: usize,
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayer {
    pub weight: usize,
    pub bias: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub relu: bool,
}

/// Evaluation order and parameter layout of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub specs: Vec<ParamSpec>,
    pub nodes: Vec<ConvNode>,
    /// Nodes whose flattened outputs are concatenated into the head.
    pub head_inputs: Vec<usize>,
    pub dense: Vec<DenseLayer>,
}

struct Builder {
    specs: Vec<ParamSpec>,
    nodes: Vec<ConvNode>,
}

impl Builder {
    fn param(&mut self, name: String, shape: Vec<usize>, kind: ParamKind, fan_in: usize) -> usize {
        self.specs.push(ParamSpec {
            name,
            shape,
            kind,
            fan_in,
        });
        self.specs.len() - 1
    }

    /// `inputs` are `(weight suffix, source, in_channels)`.
    fn node(&mut self, name: &str, inputs: &[(&str, Source, usize)], out_channels: usize, in_side: usize) -> usize {
        let terms = inputs
            .iter()
            .map(|&(suffix, source, in_channels)| ConvTerm {
                weight: self.param(
                    format!("{name}.{suffix}"),
                    vec![out_channels, in_channels, KERNEL, KERNEL],
                    ParamKind::ConvWeight,
                    in_channels * KERNEL * KERNEL,
                ),
                source,
                in_channels,
            })
            .collect();
        let c = out_channels;
        let gamma = self.param(format!("{name}.bn.gamma"), vec![c], ParamKind::BnScale, 0);
        let beta = self.param(format!("{name}.bn.beta"), vec![c], ParamKind::BnShift, 0);
        let running_mean = self.param(format!("{name}.bn.running_mean"), vec![c], ParamKind::RunningMean, 0);
        let running_var = self.param(format!("{name}.bn.running_var"), vec![c], ParamKind::RunningVar, 0);
        self.nodes.push(ConvNode {
            name: name.into(),
            terms,
            out_channels,
            in_side,
            out_side: conv_out(in_side),
            gamma,
            beta,
            running_mean,
            running_var,
        });
        self.nodes.len() - 1
    }

    fn chain(&mut self, prefix: &str, source: Source, in_channels: usize, cfg: &ArchConfig) -> usize {
        let (mut src, mut ch, mut side) = (source, in_channels, cfg.input_size);
        let mut last = 0;
        for (l, &f) in cfg.features_per_block.iter().enumerate() {
            last = self.node(&format!("{prefix}.conv{}", l + 1), &[("weight", src, ch)], f, side);
            src = Source::Node(last);
            ch = f;
            side = conv_out(side);
        }
        last
    }
}

impl Graph {
    pub fn build(cfg: &ArchConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        let mut b = Builder {
            specs: Vec::new(),
            nodes: Vec::new(),
        };
        let (ci, cs) = (cfg.image_channels, cfg.seg_channels());
        let head_inputs = match cfg.variant {
            Variant::Ribcage => {
                let (mut r1, mut r2) = ((Source::Image, ci), (Source::Seg, cs));
                let mut spine: Option<(Source, usize)> = None;
                let mut side = cfg.input_size;
                let mut last = (0, 0, 0);
                for (l, &f) in cfg.features_per_block.iter().enumerate() {
                    let block = format!("block{}", l + 1);
                    let n1 = b.node(&format!("{block}.rib1"), &[("weight", r1.0, r1.1)], f, side);
                    let n2 = b.node(&format!("{block}.rib2"), &[("weight", r2.0, r2.1)], f, side);
                    // The first spine input is identically zero, so its term is omitted.
                    let mut inputs = Vec::new();
                    if let Some((s, c)) = spine {
                        inputs.push(("spine_weight", s, c));
                    }
                    inputs.push(("rib1_weight", r1.0, r1.1));
                    inputs.push(("rib2_weight", r2.0, r2.1));
                    let ns = b.node(&format!("{block}.spine"), &inputs, f, side);
                    r1 = (Source::Node(n1), f);
                    r2 = (Source::Node(n2), f);
                    spine = Some((Source::Node(ns), f));
                    side = conv_out(side);
                    last = (n1, n2, ns);
                }
                if cfg.head_reads_ribs {
                    vec![last.0, last.1, last.2]
                } else {
                    vec![last.2]
                }
            }
            Variant::Siamese => {
                let a = b.chain("image_stream", Source::Image, ci, cfg);
                let s = b.chain("seg_stream", Source::Seg, cs, cfg);
                vec![a, s]
            }
            Variant::Naive => vec![b.chain("joint", Source::Joint, ci + cs, cfg)],
        };
        let mut dim: usize = head_inputs
            .iter()
            .map(|&n| b.nodes[n].out_channels * b.nodes[n].out_side * b.nodes[n].out_side)
            .sum();
        let mut dense = Vec::new();
        let widths: Vec<usize> = cfg.fc_widths.iter().copied().chain(core::iter::once(1)).collect();
        let last_idx = widths.len() - 1;
        for (i, &out) in widths.iter().enumerate() {
            let name = if i == last_idx {
                String::from("out")
            } else {
                format!("fc{}", i + 1)
            };
            let weight = b.param(format!("{name}.weight"), vec![out, dim], ParamKind::DenseWeight, dim);
            let bias = b.param(format!("{name}.bias"), vec![out], ParamKind::DenseBias, dim);
            dense.push(DenseLayer {
                weight,
                bias,
                in_dim: dim,
                out_dim: out,
                relu: i != last_idx,
            });
            dim = out;
        }
        Ok(Graph {
            specs: b.specs,
            nodes: b.nodes,
            head_inputs,
            dense,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dense[0].in_dim
    }

    pub fn trainable_count(&self) -> usize {
        self.specs.iter().filter(|s| s.kind.trainable()).map(|s| s.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_ribcage_layout() {
        let g = Graph::build(&ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch)).unwrap();
        assert_eq!(g.nodes.len(), 12);
        // block 1 spine: two terms, later spines three
        assert_eq!(g.nodes[2].terms.len(), 2);
        assert_eq!(g.nodes[5].terms.len(), 3);
        assert_eq!(g.head_inputs, vec![11]);
        assert_eq!(g.head_dim(), 32 * 4 * 4);
        assert_eq!(g.dense.len(), 3);
        assert_eq!(g.specs[0].name, "block1.rib1.weight");
        assert_eq!(g.specs[0].shape, vec![8, 1, 3, 3]);
    }

    #[test]
    fn siamese_and_naive_layouts() {
        let s = Graph::build(&ArchConfig::desk(Variant::Siamese, InputEncoding::Binary1ch)).unwrap();
        assert_eq!(s.nodes.len(), 8);
        assert_eq!(s.head_dim(), 2 * 32 * 16);
        let n = Graph::build(&ArchConfig::desk(Variant::Naive, InputEncoding::TrinaryOnehot3ch)).unwrap();
        assert_eq!(n.nodes.len(), 4);
        assert_eq!(n.nodes[0].terms[0].in_channels, 4);
    }

    #[test]
    fn head_can_read_ribs() {
        let mut cfg = ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch);
        cfg.head_reads_ribs = true;
        let g = Graph::build(&cfg).unwrap();
        assert_eq!(g.head_dim(), 3 * 32 * 16);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch);
        let cases = [
            ArchConfig { input_size: 48, ..base.clone() },
            ArchConfig { n_blocks: 3, ..base.clone() },
            ArchConfig { input_size: 8, ..base.clone() },
            ArchConfig { kernel: 5, ..base.clone() },
            ArchConfig { image_channels: 2, ..base.clone() },
            ArchConfig { variant: Variant::Naive, head_reads_ribs: true, ..base },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn sides_shrink_by_two() {
        let cfg = ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch);
        assert_eq!(cfg.side_at(4), 4);
        assert_eq!(conv_out(1), 1);
    }
}
