//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xlproject::augment::AlignedPair;
use xlproject::corpus::{AnnotatedSentence, DatasetTag, EmotionLabel, Language};
use xlproject::model::{loss_and_grads, FeatureVector, LinearModel, LoraAdapter, Matrix};
use xlproject::projection::TriggerSpan;

pub const VOCAB: [&str; 24] = [
    "I", "you", "we", "love", "hate", "the", "sunny", "day", "rain", "it's", "so", "very", "angry", "afraid", "joy",
    "café", "naïve", "ok!", "wait...", "don't", "x-ray", "co-op", "a", "dream",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tokens(rng: &mut impl Rng, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string())
        .collect()
}

pub fn random_mask(rng: &mut impl Rng, len: usize, p: f64) -> Vec<bool> {
    (0..len).map(|_| rng.random_bool(p)).collect()
}

pub fn random_label(rng: &mut impl Rng) -> EmotionLabel {
    EmotionLabel::ALL[rng.random_range(0..EmotionLabel::COUNT)]
}

/// English source sentence with a random mask and emotion.
pub fn random_sentence(rng: &mut impl Rng, id: &str, max_len: usize) -> AnnotatedSentence {
    let len = rng.random_range(1..=max_len);
    let tokens = random_tokens(rng, len);
    let mask = random_mask(rng, len, 0.3);
    AnnotatedSentence {
        id: id.to_string(),
        tokens,
        emotion: Some(random_label(rng)),
        trigger_mask: Some(mask),
        language: Language::En,
        origin: DatasetTag::Source,
        bilingual: false,
    }
}

/// One span per marker, each inside its own equal slot of `0..len` and at
/// most `max_width` long.
pub fn random_spans(rng: &mut impl Rng, len: usize, markers: &[usize], max_width: usize) -> Vec<TriggerSpan> {
    let count = markers.len();
    assert!(len >= count * max_width.max(1));
    let slot = len / count.max(1);
    markers
        .iter()
        .enumerate()
        .map(|(k, &marker_index)| {
            let width = rng.random_range(1..=max_width.min(slot));
            let offset = rng.random_range(0..=slot - width);
            let start = k * slot + offset;
            TriggerSpan {
                start,
                end: start + width,
                marker_index,
            }
        })
        .collect()
}

pub fn mask_for(len: usize, spans: &[TriggerSpan]) -> Vec<bool> {
    let mut mask = vec![false; len];
    for s in spans {
        mask[s.start..s.end].iter_mut().for_each(|m| *m = true);
    }
    mask
}

/// Source/target pair with `k` matched spans; the target lists its markers
/// in a shuffled order when `shuffle` is set.
pub fn random_pair(rng: &mut impl Rng, id: &str, single_token: bool, shuffle: bool) -> AlignedPair {
    let k = rng.random_range(1..=3);
    let width = if single_token { 1 } else { 3 };
    let src_len = k * width + rng.random_range(0..8);
    let tgt_len = k * width + rng.random_range(0..8);
    let markers: Vec<usize> = (0..k).collect();
    let mut target_markers = markers.clone();
    if shuffle {
        for i in (1..k).rev() {
            target_markers.swap(i, rng.random_range(0..=i));
        }
    }
    let source_spans = random_spans(rng, src_len, &markers, width);
    let target_spans = random_spans(rng, tgt_len, &target_markers, width);
    let emotion = random_label(rng);
    let source = AnnotatedSentence {
        id: id.to_string(),
        tokens: (0..src_len).map(|i| format!("s{i}")).collect(),
        emotion: Some(emotion),
        trigger_mask: Some(mask_for(src_len, &source_spans)),
        language: Language::En,
        origin: DatasetTag::Source,
        bilingual: false,
    };
    let target = AnnotatedSentence {
        id: format!("{id}.es"),
        tokens: (0..tgt_len).map(|i| format!("t{i}")).collect(),
        emotion: Some(emotion),
        trigger_mask: Some(mask_for(tgt_len, &target_spans)),
        language: Language::Es,
        origin: DatasetTag::Translated,
        bilingual: false,
    };
    AlignedPair::new(source, target, source_spans, target_spans).expect("generated pair is valid")
}

fn f1_from_pr(tp: usize, n_pred: usize, n_gold: usize) -> f64 {
    let precision = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let recall = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Macro F1 by explicit counting, averaged over every label seen in either
/// list.
pub fn oracle_macro_f1(gold: &[EmotionLabel], pred: &[EmotionLabel]) -> f64 {
    let mut seen: Vec<EmotionLabel> = gold.iter().chain(pred).copied().collect();
    seen.sort();
    seen.dedup();
    let scores: Vec<f64> = seen
        .iter()
        .map(|&c| {
            let tp = gold.iter().zip(pred).filter(|(g, p)| **g == c && **p == c).count();
            let n_pred = pred.iter().filter(|p| **p == c).count();
            let n_gold = gold.iter().filter(|g| **g == c).count();
            f1_from_pr(tp, n_pred, n_gold)
        })
        .collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Mean per-instance token F1, with two empty masks scoring 1.
pub fn oracle_token_f1(instances: &[(Vec<bool>, Vec<bool>)]) -> f64 {
    let total: f64 = instances
        .iter()
        .map(|(gold, pred)| {
            let n_gold = gold.iter().filter(|&&g| g).count();
            let n_pred = pred.iter().filter(|&&p| p).count();
            if n_gold == 0 && n_pred == 0 {
                return 1.0;
            }
            let tp = (0..gold.len()).filter(|&i| gold[i] && pred[i]).count();
            f1_from_pr(tp, n_pred, n_gold)
        })
        .sum();
    total / instances.len() as f64
}

/// Mean attribution mass on gold triggers over instances that have any.
pub fn oracle_importance(instances: &[(Vec<bool>, Vec<f64>)]) -> Option<f64> {
    let scored: Vec<f64> = instances
        .iter()
        .filter(|(gold, _)| gold.contains(&true))
        .map(|(gold, attr)| (0..gold.len()).filter(|&i| gold[i]).map(|i| attr[i]).sum())
        .collect();
    (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_features(rng: &mut impl Rng, dim: usize) -> FeatureVector {
    let nnz = rng.random_range(1..=dim.min(8));
    FeatureVector::from_entries(
        (0..nnz)
            .map(|_| (rng.random_range(0..dim as u32), rng.random_range(-2.0..2.0)))
            .collect(),
    )
}

/// Relative error between the analytic gradient and central finite
/// differences, taken over all trainable parameters at once as
/// `‖g − g_fd‖ / (‖g‖ + ‖g_fd‖)`.
pub fn gradient_check(model: &LinearModel, adapter: Option<&LoraAdapter>, batch: &[(FeatureVector, usize)]) -> f64 {
    const H: f64 = 1e-5;
    let (_, grads) = loss_and_grads(model, adapter, batch).unwrap();
    let loss = |m: &LinearModel, a: Option<&LoraAdapter>| loss_and_grads(m, a, batch).unwrap().0;

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut probe = |analytic_value: f64, plus: f64, minus: f64| {
        analytic.push(analytic_value);
        numeric.push((plus - minus) / (2.0 * H));
    };

    for i in 0..model.bias.len() {
        let mut up = model.clone();
        let mut down = model.clone();
        up.bias[i] += H;
        down.bias[i] -= H;
        probe(grads.bias[i], loss(&up, adapter), loss(&down, adapter));
    }
    match (adapter, &grads.adapter) {
        (None, _) => {
            let gw = grads
                .weights
                .as_ref()
                .expect("weights are trainable without an adapter");
            for i in 0..model.weights.as_slice().len() {
                let mut up = model.clone();
                let mut down = model.clone();
                up.weights.as_mut_slice()[i] += H;
                down.weights.as_mut_slice()[i] -= H;
                probe(gw.as_slice()[i], loss(&up, None), loss(&down, None));
            }
        }
        (Some(ad), Some(ga)) => {
            assert!(grads.weights.is_none());
            for i in 0..ad.a.as_slice().len() {
                let mut up = ad.clone();
                let mut down = ad.clone();
                up.a.as_mut_slice()[i] += H;
                down.a.as_mut_slice()[i] -= H;
                probe(ga.a.as_slice()[i], loss(model, Some(&up)), loss(model, Some(&down)));
            }
            for i in 0..ad.b.as_slice().len() {
                let mut up = ad.clone();
                let mut down = ad.clone();
                up.b.as_mut_slice()[i] += H;
                down.b.as_mut_slice()[i] -= H;
                probe(ga.b.as_slice()[i], loss(model, Some(&up)), loss(model, Some(&down)));
            }
        }
        (Some(_), None) => panic!("adapter gradients missing"),
    }

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let denom = norm(&analytic) + norm(&numeric);
    if denom == 0.0 {
        0.0
    } else {
        norm(&diff) / denom
    }
}
