use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::*;
use crate::corpus::VocabOptions;
use crate::diffnum::{grad_check_params, Tape};
use crate::models::{StudentModel, TeacherModel};
use crate::synth::{gen_corpus, SynthConfig};

fn tiny_data(train_episodes: usize) -> Dataset {
    let synth = gen_corpus(&SynthConfig {
        seed: 3,
        domains: 2,
        slots_per_domain: 2,
        values_per_slot: 2,
        entities_per_domain: 4,
        train_episodes,
        valid_episodes: 3,
        test_episodes: 1,
        max_turns: 4,
        multi_domain_fraction: 0.5,
    })
    .unwrap();
    let opts = VocabOptions {
        min_count: 1,
        max_size: 500,
    };
    Dataset::new(synth.train, synth.valid, opts)
        .unwrap()
        .with_dims(3, 4)
}

fn quick(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        finetune_epochs: 1,
        lr: 0.02,
        max_response_len: 12,
        ..TrainingConfig::default()
    }
}

fn no_progress(_: &EpochLog) {}

#[test]
fn teacher_step_gradient_matches_differences() {
    let data = tiny_data(2);
    let t = TeacherModel::new(data.model, 5).unwrap();
    let turn = &data.train_turns[1];
    let r = grad_check_params(
        &t.params,
        |tape| Ok(teacher_objective(tape, &t, turn).unwrap().0),
        1e-5,
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn student_step_with_both_distillation_terms_matches_differences() {
    let data = tiny_data(2);
    let teacher = TeacherModel::new(data.model, 5).unwrap();
    let s = StudentModel::new(data.model, 6).unwrap();
    let turn = &data.train_turns[2];
    let targets = teacher_targets(&teacher, turn).unwrap();
    let r = grad_check_params(
        &s.params,
        |tape| {
            Ok(student_objective(tape, &s, turn, Some(&targets), 0.5, 0.7)
                .unwrap()
                .total)
        },
        1e-5,
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn student_objective_matches_plain_losses() {
    let data = tiny_data(2);
    let teacher = TeacherModel::new(data.model, 5).unwrap();
    let s = StudentModel::new(data.model, 6).unwrap();
    let turn = &data.train_turns[0];
    let targets = teacher_targets(&teacher, turn).unwrap();
    let mut tape = Tape::inference(&s.params);
    let l = student_objective(&mut tape, &s, turn, Some(&targets), 0.25, 0.5).unwrap();
    let nll = tape.scalar(l.nll).unwrap();
    let expected = combined_loss(nll, l.kd.unwrap(), l.kd_pi.unwrap(), 0.25, 0.5);
    let total = tape.scalar(l.total).unwrap();
    assert!((total - expected).abs() < 1e-9 * expected.abs().max(1.0));

    let mut tape = Tape::inference(&s.params);
    let l = student_objective(&mut tape, &s, turn, Some(&targets), 0.0, 0.0).unwrap();
    assert_eq!(
        tape.scalar(l.total).unwrap().to_bits(),
        tape.scalar(l.nll).unwrap().to_bits()
    );
}

#[test]
fn teacher_loss_goes_down() {
    let data = tiny_data(4);
    let (_, logs) = train_universal_teacher(&data, &quick(5), &mut no_progress).unwrap();
    assert_eq!(logs.len(), 5);
    assert!(logs[4].j_nll < logs[0].j_nll, "{logs:?}");
    assert!(logs
        .iter()
        .all(|l| l.j_kd.is_none() && l.j_theta == l.j_nll));
}

#[test]
fn teacher_training_is_deterministic() {
    let data = tiny_data(3);
    let a = train_teachers(&data, &quick(2), &mut no_progress).unwrap();
    let b = train_teachers(&data, &quick(2), &mut no_progress).unwrap();
    assert_eq!(a.ensemble, b.ensemble);
    assert_eq!(a.selections, b.selections);
    let c = train_teachers(
        &data,
        &TrainingConfig {
            seed: 1,
            ..quick(2)
        },
        &mut no_progress,
    )
    .unwrap();
    assert_ne!(a.ensemble.universal.params, c.ensemble.universal.params);
}

#[test]
fn every_bucket_gets_a_teacher() {
    let data = tiny_data(3);
    let out = train_teachers(&data, &quick(1), &mut no_progress).unwrap();
    let keys: Vec<_> = out.ensemble.teachers.keys().cloned().collect();
    let mut buckets = data.buckets();
    buckets.sort();
    assert_eq!(keys, buckets);
    for (b, t) in &out.ensemble.teachers {
        assert_eq!(t.domain.as_deref(), Some(b.as_str()));
        assert!(out.ensemble.route(b).is_ok());
    }
    assert!(matches!(
        out.ensemble.route("nowhere"),
        Err(TrainError::MissingTeacher(_))
    ));
}

#[test]
fn zero_finetune_epochs_keeps_the_universal_teacher() {
    let data = tiny_data(3);
    let cfg = TrainingConfig {
        finetune_epochs: 0,
        ..quick(1)
    };
    let out = train_teachers(&data, &cfg, &mut no_progress).unwrap();
    for t in out.ensemble.teachers.values() {
        assert_eq!(t.params, out.ensemble.universal.params);
    }
    assert!(out.selections.values().all(|s| s.epoch == 0));
}

#[test]
fn empty_bucket_falls_back_with_a_warning() {
    let data = tiny_data(2);
    let (universal, _) = train_universal_teacher(&data, &quick(1), &mut no_progress).unwrap();
    let out =
        finetune_domain_teacher(&universal, &data, "police", &quick(1), &mut no_progress).unwrap();
    assert_eq!(out.model.params, universal.params);
    assert_eq!(out.model.domain.as_deref(), Some("police"));
    assert!(out.selection.warning.is_some());
    assert!(out.logs.is_empty());
}

#[test]
fn warm_start_never_selects_worse_than_the_start_on_validation() {
    let data = tiny_data(4);
    let cfg = TrainingConfig {
        finetune_epochs: 3,
        ..quick(2)
    };
    let (universal, _) = train_universal_teacher(&data, &cfg, &mut no_progress).unwrap();
    for bucket in data.buckets() {
        let valid: Vec<&EncodedTurn> = data
            .valid_turns
            .iter()
            .filter(|t| t.bucket == bucket)
            .collect();
        if valid.is_empty() {
            continue;
        }
        let out =
            finetune_domain_teacher(&universal, &data, &bucket, &cfg, &mut no_progress).unwrap();
        let er = |m: &TeacherModel| {
            score_turns(
                m,
                &data.valid,
                &valid,
                &data.vocabs.output,
                cfg.max_response_len,
            )
            .unwrap()
            .entity_recall
            .unwrap_or(-1.0)
        };
        assert!(er(&out.model) >= er(&universal), "{bucket}");
    }
}

#[test]
fn student_training_leaves_teachers_untouched() {
    let data = tiny_data(3);
    let teachers = train_teachers(&data, &quick(1), &mut no_progress)
        .unwrap()
        .ensemble;
    let before = teachers.clone();
    let out = train_student(&data, &teachers, &quick(1), &mut no_progress).unwrap();
    assert_eq!(teachers, before);
    assert!(out.logs[0].j_kd.is_some() && out.logs[0].j_kd_pi.is_some());
    assert!(out.logs[0].j_theta > out.logs[0].j_nll);
}

#[test]
fn zero_alphas_ignore_the_teachers() {
    let data = tiny_data(3);
    let cfg = TrainingConfig {
        alpha1: 0.0,
        alpha2: 0.0,
        ..quick(2)
    };
    let trained = train_teachers(&data, &quick(1), &mut no_progress)
        .unwrap()
        .ensemble;
    let empty = TeacherEnsemble {
        universal: TeacherModel::new(data.model, 0).unwrap(),
        teachers: BTreeMap::new(),
    };
    let a = train_student(&data, &trained, &cfg, &mut no_progress).unwrap();
    let b = train_student(&data, &empty, &cfg, &mut no_progress).unwrap();
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.logs, b.logs);
    assert!(a
        .logs
        .iter()
        .all(|l| l.j_kd.is_none() && l.j_theta == l.j_nll));
}

#[test]
fn distilling_needs_a_teacher_for_every_bucket() {
    let data = tiny_data(3);
    let empty = TeacherEnsemble {
        universal: TeacherModel::new(data.model, 0).unwrap(),
        teachers: BTreeMap::new(),
    };
    let err = train_student(&data, &empty, &quick(1), &mut no_progress).unwrap_err();
    assert!(matches!(err, TrainError::MissingTeacher(_)));
}

#[test]
fn student_run_is_deterministic_and_selects_a_logged_epoch() {
    let data = tiny_data(3);
    let teachers = train_teachers(&data, &quick(1), &mut no_progress)
        .unwrap()
        .ensemble;
    let mut seen = Vec::new();
    let a = train_student(&data, &teachers, &quick(3), &mut |l: &EpochLog| {
        seen.push(l.clone())
    })
    .unwrap();
    let b = train_student(&data, &teachers, &quick(3), &mut no_progress).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(seen, a.logs);
    assert!((1..=3).contains(&a.selected_epoch));
    let best = a.logs[a.selected_epoch - 1].selection.unwrap();
    assert_eq!(a.valid.as_ref().unwrap().success, best);
    assert!(a.logs.iter().all(|l| l.selection.unwrap() <= best));
}

#[test]
fn batching_and_clipping_change_the_update() {
    let data = tiny_data(2);
    let one = train_universal_teacher(&data, &quick(1), &mut no_progress)
        .unwrap()
        .0;
    let cfg = TrainingConfig {
        batch_size: 3,
        ..quick(1)
    };
    let three = train_universal_teacher(&data, &cfg, &mut no_progress)
        .unwrap()
        .0;
    assert_ne!(one.params, three.params);
    let clip = TrainingConfig {
        grad_clip: Some(0.1),
        ..quick(1)
    };
    let clipped = train_universal_teacher(&data, &clip, &mut no_progress)
        .unwrap()
        .0;
    assert_ne!(one.params, clipped.params);
}

#[test]
fn bad_configs_are_rejected() {
    let data = tiny_data(2);
    for cfg in [
        TrainingConfig {
            alpha1: -1.0,
            ..quick(1)
        },
        TrainingConfig {
            alpha2: f64::NAN,
            ..quick(1)
        },
        TrainingConfig {
            lr: f64::INFINITY,
            ..quick(1)
        },
        TrainingConfig {
            batch_size: 0,
            ..quick(1)
        },
        TrainingConfig {
            grad_clip: Some(0.0),
            ..quick(1)
        },
        TrainingConfig {
            max_response_len: 0,
            ..quick(1)
        },
    ] {
        assert!(matches!(
            train_universal_teacher(&data, &cfg, &mut no_progress),
            Err(TrainError::Config(_))
        ));
    }
}

#[test]
fn small_teacher_and_student_overfit() {
    let data = tiny_data(3);
    let cfg = TrainingConfig {
        lr: 0.02,
        alpha1: 0.0,
        alpha2: 0.0,
        ..quick(120)
    };
    let data = data.with_dims(8, 16);
    let (t, logs) = train_universal_teacher(&data, &cfg, &mut no_progress).unwrap();
    let acc = teacher_forced_accuracy(&t, &data.train_turns).unwrap();
    assert!(acc > 0.95, "{acc} {:?}", logs.last());
    let empty = TeacherEnsemble {
        universal: t,
        teachers: BTreeMap::new(),
    };
    let s = train_student(&data, &empty, &cfg, &mut no_progress).unwrap();
    assert!(teacher_forced_accuracy(&s.model, &data.train_turns).unwrap() > 0.95);
}
