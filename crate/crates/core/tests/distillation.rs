use mtss_core::corpus::VocabOptions;
use mtss_core::synth::{gen_corpus, SynthConfig};
use mtss_core::training::{train_student, train_teachers, Dataset, TrainingConfig};

fn data() -> Dataset {
    let s = gen_corpus(&SynthConfig {
        seed: 4,
        train_episodes: 30,
        valid_episodes: 3,
        test_episodes: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let opts = VocabOptions {
        min_count: 1,
        max_size: 500,
    };
    Dataset::new(s.train, s.valid, opts)
        .unwrap()
        .with_dims(8, 16)
}

#[test]
fn student_objective_falls_over_five_epochs() {
    let data = data();
    let cfg = TrainingConfig {
        epochs: 5,
        finetune_epochs: 1,
        max_response_len: 20,
        ..TrainingConfig::default()
    };
    let teachers = train_teachers(&data, &cfg, &mut |_| {}).unwrap();
    let mut seen = Vec::new();
    let out = train_student(&data, &teachers.ensemble, &cfg, &mut |l| {
        seen.push(l.clone())
    })
    .unwrap();
    assert_eq!(seen, out.logs);
    assert_eq!(out.logs.len(), 5);
    let (first, last) = (&out.logs[0], &out.logs[4]);
    assert!(
        last.j_theta < first.j_theta,
        "{} -> {}",
        first.j_theta,
        last.j_theta
    );
    for l in &out.logs {
        let (kd, kd_pi) = (l.j_kd.unwrap(), l.j_kd_pi.unwrap());
        let recombined = l.j_nll + cfg.alpha1 * kd + cfg.alpha2 * kd_pi;
        assert!((l.j_theta - recombined).abs() < 1e-9 * l.j_theta.max(1.0));
        assert!(kd >= 0.0 && kd_pi >= 0.0);
    }
}

#[test]
fn baseline_student_logs_no_distillation_terms() {
    let data = data();
    let cfg = TrainingConfig {
        epochs: 2,
        alpha1: 0.0,
        alpha2: 0.0,
        max_response_len: 20,
        ..TrainingConfig::default()
    };
    let teachers = train_teachers(
        &data,
        &TrainingConfig {
            epochs: 1,
            finetune_epochs: 0,
            ..cfg.clone()
        },
        &mut |_| {},
    )
    .unwrap();
    let out = train_student(&data, &teachers.ensemble, &cfg, &mut |_| {}).unwrap();
    for l in &out.logs {
        assert_eq!((l.j_kd, l.j_kd_pi), (None, None));
        assert_eq!(l.j_theta.to_bits(), l.j_nll.to_bits());
    }
}
