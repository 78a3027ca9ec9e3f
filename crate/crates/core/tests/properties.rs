mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use xlproject::augment::switch_triggers;
use xlproject::corpus::{
    load_corpus, save_corpus, split_train_validation, validation_size, AnnotatedSentence, Corpus, CorpusFormat,
    DatasetTag, EmotionLabel, Language,
};
use xlproject::metrics::{accumulated_importance, instance_token_f1, macro_f1, normalize_attributions};
use xlproject::model::{
    argmax, forward, numeric_from_logits, read_checkpoint, softmax, write_checkpoint, AdamW, Classifier, FeatureConfig,
    FeatureVector, LinearModel, LoraAdapter, Task, TrainConfig,
};
use xlproject::projection::{mark_sentence, project_labels, spans_from_mask, MarkerScheme, ProjectionOutcome};

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(VOCAB.to_vec()).prop_map(str::to_string),
        "[a-zà-ö0-9'!?.,-]{1,8}",
    ]
}

fn sentence(max_len: usize) -> impl Strategy<Value = (Vec<String>, Vec<bool>)> {
    (1..=max_len).prop_flat_map(|len| {
        (
            prop::collection::vec(token(), len),
            prop::collection::vec(any::<bool>(), len),
        )
    })
}

fn label() -> impl Strategy<Value = EmotionLabel> {
    prop::sample::select(EmotionLabel::ALL.to_vec())
}

fn english(id: &str, tokens: Vec<String>, mask: Vec<bool>, emotion: EmotionLabel) -> AnnotatedSentence {
    AnnotatedSentence {
        id: id.to_string(),
        tokens,
        emotion: Some(emotion),
        trigger_mask: Some(mask),
        language: Language::En,
        origin: DatasetTag::Source,
        bilingual: false,
    }
}

/// Tokens and mask, emotion, and whether the mask is kept.
type SentenceSpec = ((Vec<String>, Vec<bool>), EmotionLabel, bool);

fn corpus_of(items: Vec<SentenceSpec>) -> Corpus {
    let sentences = items
        .into_iter()
        .enumerate()
        .map(|(i, ((tokens, mask), emotion, has_mask))| {
            let mut s = english(&format!("id{i}"), tokens, mask, emotion);
            if !has_mask {
                s.trigger_mask = None;
            }
            s
        })
        .collect();
    Corpus::from_sentences(sentences).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trips(items in prop::collection::vec((sentence(8), label(), any::<bool>()), 1..12), tsv in any::<bool>()) {
        let corpus = corpus_of(items);
        let format = if tsv { CorpusFormat::Tsv } else { CorpusFormat::Jsonl };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c");
        save_corpus(&corpus, &path, format).unwrap();
        prop_assert_eq!(load_corpus(&path, format).unwrap(), corpus);
    }

    #[test]
    fn split_is_a_seeded_partition(n in 1usize..60, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let corpus = xlproject::synthetic::generate_corpus(n, 3, "p");
        let (train, validation) = split_train_validation(&corpus, fraction, seed).unwrap();
        prop_assert_eq!(validation.len(), validation_size(n, fraction));
        prop_assert_eq!(train.len() + validation.len(), n);
        let ids = |c: &Corpus| c.iter().map(|s| s.id.clone()).collect::<BTreeSet<_>>();
        let all: BTreeSet<_> = ids(&train).union(&ids(&validation)).cloned().collect();
        prop_assert_eq!(all, ids(&corpus));
        let again = split_train_validation(&corpus, fraction, seed).unwrap();
        prop_assert_eq!(again, (train, validation));
    }

    #[test]
    fn identity_projection_preserves_tokens_and_mask((tokens, mask) in sentence(14), emotion in label()) {
        let scheme = MarkerScheme::default();
        let source = english("s", tokens, mask, emotion);
        // more runs than marker pairs is a legitimate discard
        let Ok(marked) = mark_sentence(&source, &scheme) else {
            prop_assert!(spans_from_mask(source.trigger_mask.as_ref().unwrap()).len() > 1);
            return Ok(());
        };
        match project_labels(&source, &marked.text, &scheme, Language::Fr).unwrap() {
            ProjectionOutcome::Projected(p) => {
                prop_assert_eq!(&p.sentence.tokens, &source.tokens);
                prop_assert_eq!(&p.sentence.trigger_mask, &source.trigger_mask);
                prop_assert_eq!(p.sentence.emotion, Some(emotion));
                prop_assert_eq!(p.source_spans.len(), p.target_spans.len());
            }
            ProjectionOutcome::Discarded(reason) => prop_assert!(false, "discarded: {}", reason),
        }
    }

    #[test]
    fn switching_length_formula(seed in any::<u64>(), single in any::<bool>(), shuffle in any::<bool>()) {
        let pair = random_pair(&mut rng(seed), "p", single, shuffle);
        let switched = switch_triggers(&pair).unwrap();
        let src: usize = pair.source_spans.iter().map(|s| s.len()).sum();
        let tgt: usize = pair.target_spans.iter().map(|s| s.len()).sum();
        prop_assert_eq!(switched.source_host.len(), pair.source.len() - src + tgt);
        prop_assert_eq!(switched.source_host.trigger_count(), tgt);
        prop_assert_eq!(switched.target_host.len(), pair.target.len() - tgt + src);
        prop_assert_eq!(switched.target_host.trigger_count(), src);
        prop_assert!(switched.source_host.bilingual && switched.target_host.bilingual);
        prop_assert_eq!(switched.source_host.emotion, pair.source.emotion);
        let back = switch_triggers(&switched.realign().unwrap()).unwrap();
        prop_assert_eq!(&back.source_host.tokens, &pair.source.tokens);
        prop_assert_eq!(&back.target_host.tokens, &pair.target.tokens);
    }

    #[test]
    fn lora_merge_matches_adapter_path(seed in any::<u64>(), features in 1usize..40, classes in 2usize..7, rank in 1usize..9) {
        let mut r = rng(seed);
        let base = LinearModel::new(random_matrix(&mut r, classes, features, 1.0), vec![0.1; classes]).unwrap();
        let adapter = LoraAdapter::new(random_matrix(&mut r, rank, features, 1.0), random_matrix(&mut r, classes, rank, 1.0), 8.0).unwrap();
        let merged = adapter.merge(&base).unwrap();
        let x = random_features(&mut r, features);
        let a = forward(&base, Some(&adapter), &x).unwrap();
        let b = forward(&merged, None, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        let fresh = LoraAdapter::init(rank, 8.0, classes, features, &mut r).unwrap();
        prop_assert_eq!(forward(&base, Some(&fresh), &x).unwrap(), forward(&base, None, &x).unwrap());
    }

    #[test]
    fn macro_f1_agrees_with_oracle(pairs in prop::collection::vec((label(), label()), 1..12)) {
        let (gold, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let score = macro_f1(&gold, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&score));
        prop_assert!((score - oracle_macro_f1(&gold, &pred)).abs() < 1e-12);
        prop_assert_eq!(macro_f1(&gold, &gold).unwrap(), 1.0);
    }

    #[test]
    fn token_f1_bounds_and_symmetry(masks in (1usize..12).prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)))) {
        let (gold, pred) = masks;
        let f = instance_token_f1(&gold, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f, instance_token_f1(&pred, &gold).unwrap());
        prop_assert_eq!(instance_token_f1(&gold, &gold).unwrap(), 1.0);
        prop_assert!((f - oracle_token_f1(&[(gold, pred)])).abs() < 1e-12);
    }

    #[test]
    fn normalized_attributions_are_a_distribution(raw in prop::collection::vec(-5.0f64..5.0, 1..16), gold_bits in any::<u16>()) {
        let a = normalize_attributions(&raw).unwrap();
        prop_assert!(a.values().iter().all(|&v| v >= 0.0));
        prop_assert!((a.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let gold: Vec<bool> = (0..raw.len()).map(|i| gold_bits >> i & 1 == 1).collect();
        let ai = accumulated_importance(&gold, &a).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ai));
        let all = vec![true; raw.len()];
        prop_assert!((accumulated_importance(&all, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn numeric_head_is_a_positive_distribution(logits in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..24)) {
        let logits: Vec<[f64; 2]> = logits.into_iter().map(|(a, b)| [a, b]).collect();
        let scores = numeric_from_logits(&logits).unwrap();
        prop_assert!((scores.values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(scores.values().iter().all(|&v| v > 0.0));
        let class1: Vec<f64> = logits.iter().map(|z| z[1]).collect();
        prop_assert_eq!(argmax(scores.values()), argmax(&class1));
        prop_assert_eq!(scores.into_values(), softmax(&class1));
    }

    #[test]
    fn feature_vectors_are_sorted_and_merged(entries in prop::collection::vec((0u32..50, -3.0f64..3.0), 0..30)) {
        let v = FeatureVector::from_entries(entries.clone());
        prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(v.entries().iter().all(|&(_, x)| x != 0.0));
        let mut dense = vec![0.0; 50];
        for (i, x) in entries {
            dense[i as usize] += x;
        }
        let ours = v.to_dense(50);
        for (a, b) in ours.iter().zip(&dense) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adamw_never_moves_on_zero_gradient_without_decay(values in prop::collection::vec(-10.0f64..10.0, 1..10), lr in 1e-6f64..1.0) {
        let mut params = values.clone();
        let zeros = vec![0.0; values.len()];
        AdamW::new(0.0).step(&mut [&mut params], &[&zeros], lr).unwrap();
        prop_assert_eq!(params, values);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), with_adapter in any::<bool>(), trigger in any::<bool>()) {
        let mut r = rng(seed);
        let task = if trigger { Task::Trigger } else { Task::Emotion };
        let features = FeatureConfig { bits: 5, ..FeatureConfig::default() };
        let model = LinearModel::new(random_matrix(&mut r, task.classes(), features.dim(), 1.0), vec![0.25; task.classes()]).unwrap();
        let adapter = with_adapter.then(|| LoraAdapter::new(random_matrix(&mut r, 2, features.dim(), 1.0), random_matrix(&mut r, task.classes(), 2, 1.0), 4.0).unwrap());
        let classifier = Classifier::new(task, features, model, adapter, TrainConfig { features, ..TrainConfig::default() }).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&classifier, &mut bytes).unwrap();
        prop_assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), classifier);
        bytes.push(0);
        prop_assert!(read_checkpoint(bytes.as_slice()).is_err());
    }
}
