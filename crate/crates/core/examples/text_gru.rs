//! Text pipeline on the bundled toy corpora: JSONL loading, vocabulary,
//! a GRU evidential classifier with outlier exposure, and per-sentence
//! uncertainty reports.
//!
//! `cargo run --release --example text_gru`

use std::path::PathBuf;

use evidential_ood::data::{encode_corpus, load_jsonl_corpus, LabelSchema, Vocab};
use evidential_ood::model::{predict_reports, Input};
use evidential_ood::trainer::{evaluate_epoch, train, TrainingConfig};

fn main() -> evidential_ood::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let train_text = load_jsonl_corpus(dir.join("reviews_train.jsonl"), &LabelSchema::Infer)?;
    let vocab = Vocab::build(train_text.texts.iter().map(String::as_str), 1, None);
    let max_len = 32;
    let train_set = encode_corpus(&train_text, &vocab, max_len)?;
    let test_text = load_jsonl_corpus(
        dir.join("reviews_test.jsonl"),
        &LabelSchema::Fixed(train_text.class_names.clone()),
    )?;
    let test = encode_corpus(&test_text, &vocab, max_len)?;
    let oe = encode_corpus(
        &load_jsonl_corpus(dir.join("outliers.jsonl"), &LabelSchema::Unlabeled)?,
        &vocab,
        max_len,
    )?;
    println!(
        "classes {:?}, vocabulary {} tokens",
        train_text.class_names,
        vocab.len()
    );

    let cfg = TrainingConfig::text_preset(vocab.len(), train_text.class_names.len(), 0);
    let t = train(&train_set.examples, &oe.examples, &cfg)?;
    let e = evaluate_epoch(&t.model, &t.params, &test.examples)?;
    println!(
        "test accuracy {:.3}, mean vacuity {:.3}",
        e.accuracy, e.mean_vacuity
    );

    // Words outside the training vocabulary map to UNK, as do all outlier
    // words, so off-topic sentences land in high vacuity.
    for sentence in [
        "the film was wonderful brilliant cast",
        "the plot was dull the ending awful",
        "wonderful acting tedious boring script",
        "stir the flour butter until golden",
    ] {
        let input = Input::Tokens(vocab.encode(sentence, max_len));
        let r = &predict_reports(&t.model, &t.params, &[&input])?[0];
        println!(
            "{sentence:45} -> {:4} vacuity {:.3} dissonance {:.3}",
            train_text.class_names[r.predicted_class], r.vacuity, r.dissonance
        );
    }
    Ok(())
}
