//! Mini-batch training and the trained classifier.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{AdamW, Schedule};
use super::features::{featurize_sentence, featurize_tokens, FeatureConfig, FeatureVector};
use super::linear::{argmax, forward, loss_and_grads, LinearModel, LoraAdapter};
use super::subword::{numeric_from_logits, predict_binary};
use super::{ModelError, Task};
use crate::corpus::{AnnotatedSentence, Corpus, EmotionLabel};
use crate::metrics::{corpus_token_f1, macro_f1, Attributions, Prediction};

pub const LEARNING_RATES: [f64; 4] = [2e-6, 2e-5, 5e-5, 2e-4];
pub const MAX_EPOCHS: usize = 30;
pub const MAX_ADAPTER_EPOCHS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig { rank: 64, alpha: 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lora: Option<LoraConfig>,
    pub seed: u64,
    pub schedule: Schedule,
    pub weight_decay: f64,
    pub features: FeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-4,
            batch_size: 16,
            epochs: MAX_EPOCHS,
            lora: None,
            seed: 0,
            schedule: Schedule::Constant,
            weight_decay: 0.0,
            features: FeatureConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !LEARNING_RATES.contains(&self.lr) {
            return Err(ModelError::Config(format!(
                "learning rate {} is not one of 2e-6, 2e-5, 5e-5, 2e-4",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be at least 1".into()));
        }
        let max_epochs = if self.lora.is_some() {
            MAX_ADAPTER_EPOCHS
        } else {
            MAX_EPOCHS
        };
        if self.epochs == 0 || self.epochs > max_epochs {
            return Err(ModelError::Config(format!(
                "epochs must lie in 1..={max_epochs}, got {}",
                self.epochs
            )));
        }
        if let Some(lora) = &self.lora {
            if lora.rank == 0 {
                return Err(ModelError::Config("adapter rank must be at least 1".into()));
            }
            if !(lora.alpha.is_finite() && lora.alpha > 0.0) {
                return Err(ModelError::Config(format!(
                    "adapter alpha must be positive, got {}",
                    lora.alpha
                )));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(ModelError::Config(format!(
                "invalid weight decay {}",
                self.weight_decay
            )));
        }
        self.features.validate()
    }
}

/// A trained head together with everything needed to featurize new input.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub task: Task,
    pub features: FeatureConfig,
    pub model: LinearModel,
    pub adapter: Option<LoraAdapter>,
    /// Configuration the classifier was trained with.
    pub config: TrainConfig,
}

impl Classifier {
    pub fn new(
        task: Task,
        features: FeatureConfig,
        model: LinearModel,
        adapter: Option<LoraAdapter>,
        config: TrainConfig,
    ) -> Result<Self, ModelError> {
        if model.classes() != task.classes() {
            return Err(ModelError::Dimension {
                what: "model classes",
                expected: task.classes(),
                found: model.classes(),
            });
        }
        if model.features() != features.dim() {
            return Err(ModelError::Dimension {
                what: "model features",
                expected: features.dim(),
                found: model.features(),
            });
        }
        if let Some(ad) = &adapter {
            // the merge performs the shape checks
            ad.merge(&model)?;
        }
        Ok(Classifier {
            task,
            features,
            model,
            adapter,
            config,
        })
    }

    fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        forward(&self.model, self.adapter.as_ref(), x).expect("featurizer output fits the model")
    }

    fn expect_task(&self, task: Task) -> Result<(), ModelError> {
        if self.task != task {
            return Err(ModelError::Config(format!(
                "this is a {} model, not a {} model",
                self.task, task
            )));
        }
        Ok(())
    }

    pub fn predict_emotion<S: AsRef<str>>(&self, tokens: &[S]) -> Result<EmotionLabel, ModelError> {
        self.expect_task(Task::Emotion)?;
        let logits = self.logits(&featurize_sentence(&self.features, tokens));
        Ok(EmotionLabel::from_index(argmax(&logits)).expect("six emotion classes"))
    }

    /// Per-word `[non-trigger, trigger]` logits.
    pub fn word_logits<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<[f64; 2]>, ModelError> {
        self.expect_task(Task::Trigger)?;
        Ok(featurize_tokens(&self.features, tokens)
            .iter()
            .map(|x| {
                let z = self.logits(x);
                [z[0], z[1]]
            })
            .collect())
    }

    /// Binary mask and numeric scores for every word.
    pub fn predict_triggers<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(Vec<bool>, Attributions), ModelError> {
        let logits = self.word_logits(tokens)?;
        Ok((predict_binary(&logits), numeric_from_logits(&logits)?))
    }

    pub fn predict(&self, sentence: &AnnotatedSentence) -> Result<Prediction, ModelError> {
        let mut prediction = Prediction {
            id: sentence.id.clone(),
            emotion: None,
            mask: None,
            scores: None,
        };
        match self.task {
            Task::Emotion => prediction.emotion = Some(self.predict_emotion(&sentence.tokens)?),
            Task::Trigger => {
                let (mask, scores) = self.predict_triggers(&sentence.tokens)?;
                prediction.mask = Some(mask);
                prediction.scores = Some(scores.into_values());
            }
        }
        Ok(prediction)
    }

    /// Macro F1 for emotion models, mean per-instance token F1 for trigger
    /// models, over the sentences carrying the matching annotation.
    pub fn score(&self, corpus: &Corpus) -> Result<f64, ModelError> {
        match self.task {
            Task::Emotion => {
                let mut gold = Vec::new();
                let mut pred = Vec::new();
                for s in corpus {
                    if let Some(e) = s.emotion {
                        gold.push(e);
                        pred.push(self.predict_emotion(&s.tokens)?);
                    }
                }
                Ok(macro_f1(&gold, &pred)?)
            }
            Task::Trigger => {
                let mut pairs = Vec::new();
                for s in corpus {
                    if let Some(mask) = &s.trigger_mask {
                        pairs.push((mask.as_slice(), self.predict_triggers(&s.tokens)?.0));
                    }
                }
                Ok(corpus_token_f1(pairs.iter().map(|(g, p)| (*g, p.as_slice())))?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub task: Task,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub classifier: Classifier,
    pub report: TrainReport,
}

/// Training examples grouped by sentence, so batches count sentences.
fn examples(
    corpus: &Corpus,
    task: Task,
    features: &FeatureConfig,
) -> Result<Vec<Vec<(FeatureVector, usize)>>, ModelError> {
    corpus
        .iter()
        .map(|s| match task {
            Task::Emotion => {
                let label = s
                    .emotion
                    .ok_or_else(|| ModelError::MissingLabel { id: s.id.clone(), task })?;
                Ok(vec![(featurize_sentence(features, &s.tokens), label.index())])
            }
            Task::Trigger => {
                let mask = s
                    .trigger_mask
                    .as_ref()
                    .ok_or_else(|| ModelError::MissingLabel { id: s.id.clone(), task })?;
                Ok(featurize_tokens(features, &s.tokens)
                    .into_iter()
                    .zip(mask)
                    .map(|(x, &m)| (x, usize::from(m)))
                    .collect())
            }
        })
        .collect()
}

/// Trains a classifier for `task`.
///
/// With `config.lora` set, a low-rank adapter is trained on top of `base`
/// (or of an all-zero head when no base is given) and the base weights stay
/// frozen. When `validation` is given the parameters of the best-scoring
/// epoch are returned, with ties going to the earlier epoch; otherwise the
/// final parameters are returned.
pub fn train(
    corpus: &Corpus,
    validation: Option<&Corpus>,
    task: Task,
    config: &TrainConfig,
    base: Option<&Classifier>,
) -> Result<Trained, ModelError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let features = match base {
        Some(b) => {
            if b.task != task {
                return Err(ModelError::Config(format!(
                    "base model is a {} model, not {}",
                    b.task, task
                )));
            }
            if config.lora.is_none() {
                return Err(ModelError::Config(
                    "a base model can only be extended with an adapter".into(),
                ));
            }
            b.features
        }
        None => config.features,
    };
    let data = examples(corpus, task, &features)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = match base {
        Some(b) => b
            .adapter
            .as_ref()
            .map_or_else(|| Ok(b.model.clone()), |ad| ad.merge(&b.model))?,
        None => LinearModel::zeros(task.classes(), features.dim()),
    };
    let mut adapter = config
        .lora
        .map(|l| LoraAdapter::init(l.rank, l.alpha, task.classes(), features.dim(), &mut rng))
        .transpose()?;
    let echo = TrainConfig {
        features,
        ..config.clone()
    };

    let batches_per_epoch = data.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut optimizer = AdamW::new(config.weight_decay);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut records = Vec::new();
    let mut best: Option<(f64, usize, LinearModel, Option<LoraAdapter>)> = None;
    let mut step = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(FeatureVector, usize)> = chunk.iter().flat_map(|&i| data[i].iter().cloned()).collect();
            if batch.is_empty() {
                continue;
            }
            let (loss, grads) = loss_and_grads(&model, adapter.as_ref(), &batch)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteGradient);
            }
            let lr = config.schedule.rate(config.lr, step, total_steps);
            match (&mut adapter, &grads.adapter) {
                (Some(ad), Some(g)) => optimizer.step(
                    &mut [ad.a.as_mut_slice(), ad.b.as_mut_slice(), &mut model.bias],
                    &[g.a.as_slice(), g.b.as_slice(), &grads.bias],
                    lr,
                )?,
                _ => {
                    let gw = grads.weights.as_ref().expect("full training has weight gradients");
                    optimizer.step(
                        &mut [model.weights.as_mut_slice(), &mut model.bias],
                        &[gw.as_slice(), &grads.bias],
                        lr,
                    )?
                }
            }
            loss_sum += loss;
            step += 1;
        }

        let current = Classifier {
            task,
            features,
            model: model.clone(),
            adapter: adapter.clone(),
            config: echo.clone(),
        };
        let score = validation.map(|v| current.score(v)).transpose()?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches_per_epoch as f64,
            validation: score,
        });
        if let Some(score) = score {
            if best.as_ref().is_none_or(|(b, ..)| score > *b) {
                best = Some((score, epoch, current.model, current.adapter));
            }
        }
    }

    let (best_epoch, model, adapter) = match best {
        Some((_, epoch, m, a)) => (epoch, m, a),
        None => (config.epochs, model, adapter),
    };
    Ok(Trained {
        classifier: Classifier {
            task,
            features,
            model,
            adapter,
            config: echo,
        },
        report: TrainReport {
            task,
            epochs: records,
            best_epoch,
            steps: step,
        },
    })
}
