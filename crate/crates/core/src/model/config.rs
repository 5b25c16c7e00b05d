use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::{NormKind, DEFAULT_GROUPS};
use crate::mesh::Task;
use crate::spectral::cache::content_hash;

/// One group of chained bottleneck blocks: width `W`, bottleneck `b`,
/// `repeats` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub width: usize,
    pub bottleneck: usize,
    pub repeats: usize,
}

impl BlockSpec {
    pub const fn new(width: usize, bottleneck: usize, repeats: usize) -> Self {
        BlockSpec {
            width,
            bottleneck,
            repeats,
        }
    }
}

/// How a group receives the previous group's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupEntry {
    /// Widths already agree.
    Direct,
    /// FC + norm + ReLU to the group width.
    Project,
    /// FC + norm + ReLU to `width - skip_width`, then concatenated with the
    /// saved skip tensor.
    ProjectConcatSkip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub block: BlockSpec,
    pub entry: GroupEntry,
    /// Keep this group's output for later concatenation.
    #[serde(default)]
    pub save_skip: bool,
}

/// Width table of the default backbone.
pub const DEFAULT_BLOCKS: [BlockSpec; 8] = [
    BlockSpec::new(256, 64, 3),
    BlockSpec::new(256, 64, 4),
    BlockSpec::new(256, 64, 6),
    BlockSpec::new(512, 128, 3),
    BlockSpec::new(512, 128, 3),
    BlockSpec::new(512, 128, 4),
    BlockSpec::new(512, 128, 6),
    BlockSpec::new(512, 128, 3),
];
pub const DEFAULT_STEM_WIDTH: usize = 256;
pub const DEFAULT_HEAD_WIDTHS: [usize; 2] = [128, 32];
/// xyz(3) + normal(3) + dihedral(4) + HKS(16).
pub const DEFAULT_INPUT_CHANNELS: usize = 26;

fn default_gn_groups() -> usize {
    DEFAULT_GROUPS
}

fn default_norm() -> NormKind {
    NormKind::Layer
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub stem_width: usize,
    pub groups: Vec<GroupSpec>,
    pub head_widths: Vec<usize>,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
    #[serde(default = "default_gn_groups")]
    pub gn_groups: usize,
    pub task: Task,
    pub num_classes: usize,
    /// Disabling the skip path turns every block into a plain MLP stack.
    #[serde(default = "default_true")]
    pub residual: bool,
}

/// Default entry wiring for an eight-group width table: three groups at the
/// stem width (the last one saved), a projection up, then three
/// project-and-concatenate groups and one direct group.
pub fn default_wiring(blocks: &[BlockSpec; 8]) -> Vec<GroupSpec> {
    let entries = [
        GroupEntry::Direct,
        GroupEntry::Direct,
        GroupEntry::Direct,
        GroupEntry::Project,
        GroupEntry::ProjectConcatSkip,
        GroupEntry::ProjectConcatSkip,
        GroupEntry::ProjectConcatSkip,
        GroupEntry::Direct,
    ];
    blocks
        .iter()
        .zip(entries)
        .enumerate()
        .map(|(i, (&block, entry))| GroupSpec {
            block,
            entry,
            save_skip: i == 2,
        })
        .collect()
}

impl NetworkConfig {
    /// The full-size backbone.
    pub fn new(task: Task, num_classes: usize) -> Self {
        NetworkConfig {
            input_channels: DEFAULT_INPUT_CHANNELS,
            stem_width: DEFAULT_STEM_WIDTH,
            groups: default_wiring(&DEFAULT_BLOCKS),
            head_widths: DEFAULT_HEAD_WIDTHS.to_vec(),
            norm: NormKind::Layer,
            gn_groups: DEFAULT_GROUPS,
            task,
            num_classes,
            residual: true,
        }
    }

    /// Same topology with every width divided by `factor` and one block per
    /// group; for fast tests.
    pub fn scaled_down(task: Task, num_classes: usize, factor: usize) -> Self {
        let mut blocks = DEFAULT_BLOCKS;
        for b in &mut blocks {
            *b = BlockSpec::new(b.width / factor, b.bottleneck / factor, 1);
        }
        NetworkConfig {
            stem_width: DEFAULT_STEM_WIDTH / factor,
            groups: default_wiring(&blocks),
            head_widths: DEFAULT_HEAD_WIDTHS.iter().map(|w| (w / factor).max(DEFAULT_GROUPS)).collect(),
            ..NetworkConfig::new(task, num_classes)
        }
    }

    pub fn with_norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_input_channels(mut self, c: usize) -> Self {
        self.input_channels = c;
        self
    }

    pub fn output_width(&self) -> usize {
        self.head_widths.last().copied().unwrap_or(self.last_width())
    }

    fn last_width(&self) -> usize {
        self.groups.last().map_or(self.stem_width, |g| g.block.width)
    }

    /// Every width that goes through a normalization layer.
    fn normalized_widths(&self) -> Vec<usize> {
        let mut w = vec![self.stem_width];
        let mut skip = 0;
        for g in &self.groups {
            w.push(g.block.bottleneck);
            w.push(g.block.width);
            if g.entry == GroupEntry::ProjectConcatSkip {
                w.push(g.block.width.saturating_sub(skip));
            }
            if g.save_skip {
                skip = g.block.width;
            }
        }
        w.extend(&self.head_widths);
        w
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.input_channels == 0 || self.stem_width == 0 {
            return bad("input and stem widths must be positive".into());
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        let mut width = self.stem_width;
        let mut skip: Option<usize> = None;
        for (i, g) in self.groups.iter().enumerate() {
            let b = g.block;
            if b.repeats == 0 || b.bottleneck == 0 || b.bottleneck >= b.width {
                return bad(format!("group {}: need 0 < bottleneck < width and repeats >= 1", i + 1));
            }
            match g.entry {
                GroupEntry::Direct if width != b.width => {
                    return bad(format!("group {}: direct entry from width {width} to {}", i + 1, b.width));
                }
                GroupEntry::ProjectConcatSkip => match skip {
                    Some(s) if s < b.width => {}
                    Some(s) => return bad(format!("group {}: skip width {s} leaves no room in {}", i + 1, b.width)),
                    None => return bad(format!("group {}: no saved skip before concatenation", i + 1)),
                },
                _ => {}
            }
            if g.save_skip {
                skip = Some(b.width);
            }
            width = b.width;
        }
        if self.head_widths.contains(&0) {
            return bad("head widths must be positive".into());
        }
        if self.norm == NormKind::Group {
            if self.gn_groups == 0 {
                return bad("group norm needs at least one group".into());
            }
            if let Some(w) = self.normalized_widths().into_iter().find(|w| w % self.gn_groups != 0) {
                return bad(format!("width {w} is not divisible into {} groups", self.gn_groups));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the serialized config, stored in checkpoints.
    pub fn digest(&self) -> u64 {
        content_hash(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let c: NetworkConfig = serde_json::from_str(text).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_is_valid() {
        let c = NetworkConfig::new(Task::Classification, 30);
        c.validate().unwrap();
        assert_eq!(c.groups.len(), 8);
        assert_eq!(c.output_width(), 32);
        assert!(c.groups[2].save_skip);
        assert_eq!(c.groups[7].entry, GroupEntry::Direct);
        let r: Vec<usize> = c.groups.iter().map(|g| g.block.repeats).collect();
        assert_eq!(r, vec![3, 4, 6, 3, 3, 4, 6, 3]);
        NetworkConfig::scaled_down(Task::Segmentation, 2, 8).validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_wiring() {
        let mut c = NetworkConfig::new(Task::Classification, 4);
        c.groups[3].entry = GroupEntry::Direct;
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::new(Task::Classification, 4);
        c.groups[2].save_skip = false;
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::new(Task::Classification, 4).with_norm(NormKind::Group);
        c.gn_groups = 7;
        assert!(c.validate().is_err());
        assert!(NetworkConfig::new(Task::Classification, 1).validate().is_err());
    }

    #[test]
    fn json_roundtrip_and_digest() {
        let c = NetworkConfig::scaled_down(Task::Segmentation, 8, 4).with_norm(NormKind::GlobalResponse);
        let back = NetworkConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_ne!(c.digest(), c.clone().with_norm(NormKind::Layer).digest());
    }
}
