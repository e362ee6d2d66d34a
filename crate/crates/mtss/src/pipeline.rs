//! The steps behind the commands, usable without touching the file system.

use std::path::Path;

use mtss_core::corpus::{domain_turn_counts, Corpus};
use mtss_core::metrics::{evaluate, MetricReport, Responses};
use mtss_core::models::ModelConfig;
use mtss_core::synth::gen_corpus;
use mtss_core::training::{
    score_turns, train_student, Dataset, EncodedTurn, ResponseModel, StudentOutcome,
    TeacherEnsemble, TeachersOutcome, TrainError, TrainingConfig, Vocabs,
};
use mtss_core::GENERAL_DOMAIN;

use crate::config::RunConfig;
use crate::io::Prepared;
use crate::logs::EpochLogger;
use crate::parallel::{generate_parallel, map_ordered};
use crate::report::{SplitRow, SweepRow, TeacherRow};
use crate::Result;

/// Synthetic splits plus vocabularies built from the training split.
pub fn prepare_synth(cfg: &RunConfig) -> Result<Prepared> {
    let s = gen_corpus(&cfg.synth)?;
    prepare_corpora(s.train, s.valid, s.test, cfg)
}

pub fn prepare_corpora(
    train: Corpus,
    valid: Corpus,
    test: Corpus,
    cfg: &RunConfig,
) -> Result<Prepared> {
    let vocabs = Vocabs::build(&train, cfg.vocab())?;
    Ok(Prepared {
        train,
        valid,
        test,
        vocabs,
    })
}

/// Turn counts per bucket for every split.
pub fn split_rows(p: &Prepared) -> Vec<SplitRow> {
    let (train, valid, test) = (
        domain_turn_counts(&p.train),
        domain_turn_counts(&p.valid),
        domain_turn_counts(&p.test),
    );
    let get = |v: &[(String, usize)], d: &str| v.iter().find(|(n, _)| n == d).map_or(0, |x| x.1);
    train
        .iter()
        .map(|(d, n)| SplitRow {
            domain: d.clone(),
            train: *n,
            valid: get(&valid, d),
            test: get(&test, d),
        })
        .collect()
}

/// Training data sized by the config.
pub fn dataset(p: &Prepared, cfg: &RunConfig) -> Result<Dataset> {
    let layout = p.train.layout();
    let mut model = ModelConfig::new(
        p.vocabs.input.len(),
        p.vocabs.output.len(),
        layout.belief_dim(),
        layout.db_dim(),
    );
    model.embed_dim = cfg.embed_dim;
    model.hidden = cfg.hidden;
    Ok(Dataset::with_vocabs(
        p.train.clone(),
        p.valid.clone(),
        p.vocabs.clone(),
        model,
    )?)
}

/// Encoded turns of an evaluation corpus.
pub fn encode(corpus: &Corpus, data: &Dataset) -> Result<Vec<EncodedTurn>> {
    Ok(Dataset::with_vocabs(
        data.train.clone(),
        corpus.clone(),
        data.vocabs.clone(),
        data.model,
    )?
    .valid_turns)
}

/// Generates a response for every turn and scores the corpus.
pub fn evaluate_model<M: ResponseModel + Sync>(
    model: &M,
    corpus: &Corpus,
    turns: &[EncodedTurn],
    data: &Dataset,
    max_len: usize,
    threads: usize,
) -> Result<(Responses, MetricReport)> {
    let responses = generate_parallel(model, corpus, turns, &data.vocabs.output, max_len, threads)?;
    let report = evaluate(corpus, &responses)?;
    Ok((responses, report))
}

/// Universal against fine-tuned teacher per bucket on `corpus`.
pub fn teacher_rows(
    out: &TeachersOutcome,
    data: &Dataset,
    corpus: &Corpus,
    turns: &[EncodedTurn],
    max_len: usize,
    threads: usize,
) -> Result<Vec<TeacherRow>> {
    let buckets = data.buckets();
    let rows = map_ordered(&buckets, threads, |b| {
        let mine: Vec<&EncodedTurn> = turns.iter().filter(|t| &t.bucket == b).collect();
        let teacher = out.ensemble.route(b)?;
        let u = score_if_any(&out.ensemble.universal, corpus, &mine, data, max_len)?;
        let d = score_if_any(teacher, corpus, &mine, data, max_len)?;
        Ok::<_, TrainError>(TeacherRow {
            domain: b.clone(),
            turns: mine.len(),
            universal_bleu4: u.0,
            universal_er: u.1,
            individual_bleu4: d.0,
            individual_er: d.1,
            selected_epoch: out.selections.get(b).map_or(0, |s| s.epoch),
        })
    })?;
    Ok(rows)
}

fn score_if_any<M: ResponseModel>(
    m: &M,
    corpus: &Corpus,
    turns: &[&EncodedTurn],
    data: &Dataset,
    max_len: usize,
) -> Result<(f64, Option<f64>), TrainError> {
    if turns.is_empty() {
        return Ok((0.0, None));
    }
    let s = score_turns(m, corpus, turns, &data.vocabs.output, max_len)?;
    Ok((s.bleu4, s.entity_recall))
}

pub fn sweep_row(
    alpha1: f64,
    alpha2: f64,
    out: &StudentOutcome,
    report: &MetricReport,
) -> SweepRow {
    SweepRow {
        alpha1,
        alpha2,
        bleu4: report.bleu4,
        inform: report.inform,
        success: report.success,
        entity_recall: (report.entity_turns > 0).then_some(report.entity_recall),
        selected_epoch: out.selected_epoch,
    }
}

/// One student per (alpha1, alpha2) cell, trained on up to `threads`
/// workers and scored on `corpus`. With `log_dir` set each cell appends its
/// epochs to `<log_dir>/<cell>.jsonl`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    data: &Dataset,
    ensemble: &TeacherEnsemble,
    base: &TrainingConfig,
    grid: &[(f64, f64)],
    corpus: &Corpus,
    turns: &[EncodedTurn],
    threads: usize,
    log_dir: Option<&Path>,
) -> Result<Vec<(SweepRow, StudentOutcome)>> {
    // Cells run in parallel, so each one evaluates on a single thread.
    map_ordered(grid, threads, |&(alpha1, alpha2)| {
        let cfg = TrainingConfig {
            alpha1,
            alpha2,
            ..base.clone()
        };
        let out = match log_dir {
            Some(dir) => {
                let mut logger = EpochLogger::create(
                    &dir.join(format!("{}.jsonl", cell_name(alpha1, alpha2))),
                    false,
                )?;
                let out = train_student(data, ensemble, &cfg, &mut |l| logger.log(l))?;
                logger.finish()?;
                out
            }
            None => train_student(data, ensemble, &cfg, &mut |_| {})?,
        };
        let (_, report) = evaluate_model(&out.model, corpus, turns, data, cfg.max_response_len, 1)?;
        Ok((sweep_row(alpha1, alpha2, &out, &report), out))
    })
}

/// Directory-safe name of a sweep cell.
pub fn cell_name(alpha1: f64, alpha2: f64) -> String {
    format!("a1_{alpha1}_a2_{alpha2}")
}

/// True for buckets that are a schema domain rather than `general`.
pub fn is_domain_bucket(bucket: &str) -> bool {
    bucket != GENERAL_DOMAIN
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtss_core::synth::SynthConfig;

    fn small() -> RunConfig {
        RunConfig {
            synth: SynthConfig {
                train_episodes: 8,
                valid_episodes: 2,
                test_episodes: 3,
                ..SynthConfig::default()
            },
            min_count: 1,
            embed_dim: 3,
            hidden: 4,
            epochs: 1,
            finetune_epochs: 1,
            max_response_len: 10,
            ..RunConfig::default()
        }
    }

    #[test]
    fn split_rows_match_the_generated_corpora() {
        let cfg = small();
        let p = prepare_synth(&cfg).unwrap();
        let rows = split_rows(&p);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.last().unwrap().domain, GENERAL_DOMAIN);
        assert_eq!(
            rows.iter().map(|r| r.train).sum::<usize>(),
            p.train.turn_count()
        );
        assert_eq!(
            rows.iter().map(|r| r.valid).sum::<usize>(),
            p.valid.turn_count()
        );
        assert_eq!(
            rows.iter().map(|r| r.test).sum::<usize>(),
            p.test.turn_count()
        );
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let cfg = small();
        let p = prepare_synth(&cfg).unwrap();
        let data = dataset(&p, &cfg).unwrap();
        let teachers =
            mtss_core::training::train_teachers(&data, &cfg.training(), &mut |_| {}).unwrap();
        let test = encode(&p.test, &data).unwrap();
        let grid = [(0.0, 0.0), (0.005, 0.005), (0.01, 0.0)];
        let one = sweep(
            &data,
            &teachers.ensemble,
            &cfg.training(),
            &grid,
            &p.test,
            &test,
            1,
            None,
        )
        .unwrap();
        let three = sweep(
            &data,
            &teachers.ensemble,
            &cfg.training(),
            &grid,
            &p.test,
            &test,
            3,
            None,
        )
        .unwrap();
        assert_eq!(one.len(), 3);
        for (a, b) in one.iter().zip(&three) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.model, b.1.model);
        }
        let rows = teacher_rows(&teachers, &data, &p.test, &test, 10, 2).unwrap();
        assert_eq!(rows.len(), data.buckets().len());
    }
}
