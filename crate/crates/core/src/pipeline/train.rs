use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{augment_rotation, FeatureToggles, Metrics, PipelineError, Sample};
use crate::autodiff::{accumulate_then_step, Adam, Mode, NormKind};
use crate::mesh::Task;
use crate::model::{argmax, face_label_vote, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Meshes per optimizer step (each forward/backward sees one mesh).
    pub accumulation: usize,
    pub seed: u64,
    pub augment: bool,
    pub features: FeatureToggles,
    pub norm: NormKind,
    /// Evaluate every this many epochs (and after the last one); 0 only at
    /// the end.
    pub eval_every: usize,
    /// From this epoch on (1-based) the learning rate is multiplied by
    /// `lr_decay_factor`.
    pub lr_decay_epoch: Option<usize>,
    pub lr_decay_factor: f64,
    /// Stop after an evaluation whose train accuracy reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 1e-3,
            weight_decay: 1e-4,
            accumulation: 8,
            seed: 0,
            augment: true,
            features: FeatureToggles::ALL,
            norm: NormKind::Layer,
            eval_every: 10,
            lr_decay_epoch: Some(150),
            lr_decay_factor: 0.1,
            stop_at_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()));
        if self.accumulation == 0 {
            return bad("accumulation must be at least 1");
        }
        if !self.features.any() {
            return bad("at least one feature family is required");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay_epoch {
            Some(e) if epoch >= e => self.lr * self.lr_decay_factor,
            _ => self.lr,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_size: usize,
    pub optimizer_steps: usize,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<Metrics>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network<f32>,
    pub log: Vec<EpochRecord>,
}

/// Per-sample prediction: a class, or one label per face.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Prediction {
    Class(u32),
    Faces(Vec<u32>),
}

pub fn predict_sample(net: &mut Network<f32>, sample: &Sample) -> Result<Prediction, PipelineError> {
    let logits = net.predict(&sample.features, Mode::Eval)?;
    Ok(match net.config().task {
        Task::Classification => Prediction::Class(argmax(logits.row(0)) as u32),
        Task::Segmentation => Prediction::Faces(face_label_vote(&logits, &sample.faces)),
    })
}

/// Mesh accuracy for classification; pooled face-wise accuracy, IoU and
/// DSC for segmentation.
pub fn evaluate(net: &mut Network<f32>, samples: &[Sample]) -> Result<Metrics, PipelineError> {
    let k = net.config().num_classes;
    let mut pairs = Vec::new();
    for s in samples {
        match predict_sample(net, s)? {
            Prediction::Class(c) => pairs.push((s.class.ok_or(PipelineError::MissingLabels)?, c)),
            Prediction::Faces(f) => {
                let truth = s.face_labels.as_ref().ok_or(PipelineError::MissingLabels)?;
                pairs.extend(truth.iter().copied().zip(f));
            }
        }
    }
    if let Some(&(t, p)) = pairs.iter().find(|(t, p)| *t as usize >= k || *p as usize >= k) {
        return Err(PipelineError::InvalidConfig(format!("label {} outside {k} classes", t.max(p))));
    }
    Ok(Metrics::from_pairs(k, pairs))
}

/// Trains `network` on `train` with batch-1 forward/backward, seeded
/// shuffling and gradient accumulation. `on_epoch` sees every log record
/// as it is produced.
pub fn train_samples(
    mut network: Network<f32>,
    train: &[Sample],
    test: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    if train.is_empty() {
        return Err(PipelineError::InvalidConfig("empty training set".into()));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut augment_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let adam = Adam {
            lr: config.lr_at(epoch),
            weight_decay: config.weight_decay,
            ..Adam::default()
        };
        let steps = accumulate_then_step(&mut network, &adam, &order, config.accumulation, |&i, net| {
            let s = &train[i];
            let loss = if config.augment {
                let (f, _) = augment_rotation(&s.features, config.features, &mut augment_rng);
                net.loss_and_backward(&f, &s.loss_targets())?
            } else {
                net.loss_and_backward(&s.features, &s.loss_targets())?
            };
            if !loss.is_finite() {
                return Err(PipelineError::NonFiniteLoss {
                    epoch,
                    mesh: s.mesh_id.clone(),
                });
            }
            Ok(loss as f64)
        })?;
        let eval_now = epoch == config.epochs || (config.eval_every > 0 && epoch % config.eval_every == 0);
        let mut record = EpochRecord {
            epoch,
            train_loss: steps.mean_loss,
            train_size: train.len(),
            optimizer_steps: steps.optimizer_steps,
            lr: adam.lr,
            train_accuracy: None,
            test: None,
        };
        if eval_now {
            record.train_accuracy = Some(evaluate(&mut network, train)?.accuracy);
            if !test.is_empty() {
                record.test = Some(evaluate(&mut network, test)?);
            }
        }
        on_epoch(&record);
        let stop = matches!((config.stop_at_train_accuracy, record.train_accuracy), (Some(goal), Some(acc)) if acc >= goal);
        log.push(record);
        if stop {
            break;
        }
    }
    Ok(TrainOutcome { network, log })
}
