use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GroupEntry, ModelError, NetworkConfig};
use crate::autodiff::{Mode, NormKind, ParamId, ParamStore, RunningStats, Tape, Tensor, Var};
use crate::mesh::Task;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
    running: Option<(ParamId, ParamId)>,
}

/// FC followed by norm and ReLU.
#[derive(Debug, Clone, Copy)]
struct Transition {
    fc: Dense,
    norm: Norm,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    fc1: Dense,
    n1: Norm,
    fc2: Dense,
    n2: Norm,
    fc3: Dense,
}

#[derive(Debug, Clone)]
struct Group {
    entry: Option<Transition>,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct Layout {
    stem: Transition,
    groups: Vec<Group>,
    heads: Vec<Transition>,
    out: Dense,
}

/// Backbone plus task head; parameters live in an owned [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    config: NetworkConfig,
    params: ParamStore<T>,
    layout: Layout,
}

struct Builder<'a, T: Scalar> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
    norm: NormKind,
}

impl<T: Scalar> Builder<'_, T> {
    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Dense {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let rng = &mut self.rng;
        let w = Tensor::from_fn(fan_in, fan_out, |_, _| T::of(rng.gen_range(-bound..bound)));
        Dense {
            w: self.store.add(format!("{name}.w"), w, true),
            b: self.store.add(format!("{name}.b"), Tensor::zeros(1, fan_out), true),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        let gamma = self.store.add(format!("{name}.gamma"), Tensor::filled(1, width, T::one()), true);
        let beta = self.store.add(format!("{name}.beta"), Tensor::zeros(1, width), true);
        let running = self.norm.has_running_stats().then(|| {
            (
                self.store.add(format!("{name}.running_mean"), Tensor::zeros(1, width), false),
                self.store.add(format!("{name}.running_var"), Tensor::filled(1, width, T::one()), false),
            )
        });
        Norm { gamma, beta, running }
    }

    fn transition(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Transition {
        Transition {
            fc: self.dense(&format!("{name}.fc"), fan_in, fan_out),
            norm: self.norm(&format!("{name}.norm"), fan_out),
        }
    }
}

impl<T: Scalar> Network<T> {
    /// Builds the network with seeded uniform(+-1/sqrt(fan_in)) weights,
    /// zero biases, unit gamma and zero beta.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut b = Builder {
            store: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            norm: config.norm,
        };
        let stem = b.transition("stem", config.input_channels, config.stem_width);
        let mut width = config.stem_width;
        let mut skip = 0;
        let mut groups = Vec::with_capacity(config.groups.len());
        for (gi, g) in config.groups.iter().enumerate() {
            let name = format!("g{}", gi + 1);
            let w = g.block.width;
            let entry = match g.entry {
                GroupEntry::Direct => None,
                GroupEntry::Project => Some(b.transition(&format!("{name}.in"), width, w)),
                GroupEntry::ProjectConcatSkip => Some(b.transition(&format!("{name}.in"), width, w - skip)),
            };
            let blocks = (0..g.block.repeats)
                .map(|r| {
                    let p = format!("{name}.b{}", r + 1);
                    let bn = g.block.bottleneck;
                    Block {
                        fc1: b.dense(&format!("{p}.fc1"), w, bn),
                        n1: b.norm(&format!("{p}.norm1"), bn),
                        fc2: b.dense(&format!("{p}.fc2"), bn, bn),
                        n2: b.norm(&format!("{p}.norm2"), bn),
                        fc3: b.dense(&format!("{p}.fc3"), bn, w),
                    }
                })
                .collect();
            if g.save_skip {
                skip = w;
            }
            width = w;
            groups.push(Group { entry, blocks });
        }
        let mut heads = Vec::new();
        for (i, &hw) in config.head_widths.iter().enumerate() {
            heads.push(b.transition(&format!("head{}", i + 1), width, hw));
            width = hw;
        }
        let out = b.dense("out", width, config.num_classes);
        Ok(Network {
            config,
            params,
            layout: Layout {
                stem,
                groups,
                heads,
                out,
            },
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn trainable_count(&self) -> usize {
        self.params.trainable_count()
    }

    /// Same network in another precision (values and optimizer state).
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }

    /// Zeroes the last FC of every block so each block is a pure skip.
    pub fn zero_block_outputs(&mut self) {
        for g in &self.layout.groups {
            for blk in &g.blocks {
                self.params.get_mut(blk.fc3.w).value.fill(T::zero());
                self.params.get_mut(blk.fc3.b).value.fill(T::zero());
            }
        }
    }

    fn dense(&self, tape: &mut Tape<T>, x: Var, d: Dense) -> Result<Var, ModelError> {
        let w = tape.param(&self.params, d.w);
        let b = tape.param(&self.params, d.b);
        Ok(tape.affine(x, w, b)?)
    }

    fn norm(&mut self, tape: &mut Tape<T>, x: Var, n: Norm, mode: Mode) -> Result<Var, ModelError> {
        let gamma = tape.param(&self.params, n.gamma);
        let beta = tape.param(&self.params, n.beta);
        let running = match n.running {
            Some((m, v)) => {
                let (pm, pv) = self.params.pair_mut(m, v);
                Some(RunningStats {
                    mean: &mut pm.value,
                    var: &mut pv.value,
                })
            }
            None => None,
        };
        Ok(tape.norm(x, self.config.norm, self.config.gn_groups, gamma, beta, mode, running)?)
    }

    fn transition(&mut self, tape: &mut Tape<T>, x: Var, t: Transition, mode: Mode) -> Result<Var, ModelError> {
        let h = self.dense(tape, x, t.fc)?;
        let h = self.norm(tape, h, t.norm, mode)?;
        Ok(tape.relu(h))
    }

    fn block(&mut self, tape: &mut Tape<T>, x: Var, blk: Block, mode: Mode) -> Result<Var, ModelError> {
        let h = self.dense(tape, x, blk.fc1)?;
        let h = self.norm(tape, h, blk.n1, mode)?;
        let h = tape.relu(h);
        let h = self.dense(tape, h, blk.fc2)?;
        let h = self.norm(tape, h, blk.n2, mode)?;
        let h = tape.relu(h);
        let h = self.dense(tape, h, blk.fc3)?;
        if self.config.residual {
            Ok(tape.add(x, h)?)
        } else {
            Ok(h)
        }
    }

    /// Per-vertex backbone features (`n x output_width`).
    pub fn backbone(&mut self, tape: &mut Tape<T>, features: Var, mode: Mode) -> Result<Var, ModelError> {
        let (_, c) = tape.shape(features);
        if c != self.config.input_channels {
            return Err(ModelError::InputChannels {
                expected: self.config.input_channels,
                got: c,
            });
        }
        let layout = self.layout.clone();
        let mut x = self.transition(tape, features, layout.stem, mode)?;
        let mut skip = None;
        for (g, spec) in layout.groups.iter().zip(self.config.groups.clone()) {
            if let Some(t) = g.entry {
                x = self.transition(tape, x, t, mode)?;
                if spec.entry == GroupEntry::ProjectConcatSkip {
                    let s = skip.expect("validated config saves a skip first");
                    x = tape.concat(x, s)?;
                }
            }
            for &blk in &g.blocks {
                x = self.block(tape, x, blk, mode)?;
            }
            if spec.save_skip {
                skip = Some(x);
            }
        }
        for &h in &layout.heads {
            x = self.transition(tape, x, h, mode)?;
        }
        Ok(x)
    }

    /// Task logits: `1 x K` for classification (mean pooled), `n x K` for
    /// segmentation.
    pub fn forward(&mut self, tape: &mut Tape<T>, features: Var, mode: Mode) -> Result<Var, ModelError> {
        let x = self.backbone(tape, features, mode)?;
        let x = match self.config.task {
            Task::Classification => tape.mean_rows(x)?,
            Task::Segmentation => x,
        };
        self.dense(tape, x, self.layout.out)
    }

    /// Forward without keeping a tape around.
    pub fn predict(&mut self, features: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let x = tape.input(features.clone());
        let y = self.forward(&mut tape, x, mode)?;
        Ok(tape.value(y).clone())
    }

    /// Forward, cross-entropy against `targets` (one id for classification,
    /// one per vertex for segmentation) and backward into the parameter
    /// gradients. Returns the loss.
    pub fn loss_and_backward(&mut self, features: &Tensor<T>, targets: &[usize]) -> Result<T, ModelError> {
        let mut tape = Tape::new();
        let x = tape.input(features.clone());
        let logits = self.forward(&mut tape, x, Mode::Train)?;
        let loss = tape.softmax_cross_entropy(logits, targets)?;
        tape.backward(loss, &mut self.params);
        Ok(tape.scalar(loss))
    }
}

impl<T: Scalar> crate::autodiff::HasParams<T> for Network<T> {
    fn param_store(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }
}
