use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{generate_responses, score_turns};
use super::losses::{
    kd_policy_loss, kd_policy_on_tape, kd_text_loss, kd_text_on_tape, nll_on_tape,
};
use super::{Dataset, EncodedTurn, TeacherEnsemble, TrainError, TrainingConfig};
use crate::diffnum::{adam_step, AdamConfig, AdamState, Gradients, ParamStore, Tape, Var};
use crate::metrics::{evaluate, MetricReport};
use crate::models::{StudentModel, TeacherModel};
use crate::synth::derive_seed;

const STREAM_TEACHER_INIT: u64 = 10;
const STREAM_TEACHER_ORDER: u64 = 11;
const STREAM_DOMAIN_INIT: u64 = 20;
const STREAM_DOMAIN_ORDER: u64 = 21;
const STREAM_STUDENT_INIT: u64 = 30;
const STREAM_STUDENT_ORDER: u64 = 31;

/// Epoch means of the loss terms. The distillation terms are `None` when no
/// teacher was consulted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: String,
    pub epoch: usize,
    pub turns: usize,
    pub j_nll: f64,
    pub j_kd: Option<f64>,
    pub j_kd_pi: Option<f64>,
    pub j_theta: f64,
    /// Probabilities clamped before taking logs.
    pub clamped: usize,
    /// Validation score used for checkpoint selection.
    pub selection: Option<f64>,
}

/// State at the step where a loss or gradient stopped being finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub phase: String,
    pub epoch: usize,
    pub step: usize,
    pub episode: String,
    pub turn: usize,
    pub j_nll: f64,
    pub j_kd: Option<f64>,
    pub j_kd_pi: Option<f64>,
    pub grad_norm: f64,
    pub param_norm: f64,
}

struct Optimizer {
    state: AdamState,
    cfg: AdamConfig,
    acc: Option<Gradients>,
    pending: usize,
    batch: usize,
    clip: Option<f64>,
}

impl Optimizer {
    fn new(params: &ParamStore, cfg: &TrainingConfig) -> Self {
        Optimizer {
            state: AdamState::new(params),
            cfg: AdamConfig {
                lr: cfg.lr,
                ..AdamConfig::default()
            },
            acc: None,
            pending: 0,
            batch: cfg.batch_size,
            clip: cfg.grad_clip,
        }
    }

    fn apply(&mut self, params: &mut ParamStore, mut grads: Gradients) -> Result<(), TrainError> {
        if let Some(c) = self.clip {
            grads.clip_global_norm(c);
        }
        adam_step(params, &grads, &mut self.state, &self.cfg)?;
        Ok(())
    }

    fn push(&mut self, params: &mut ParamStore, grads: Gradients) -> Result<(), TrainError> {
        if self.batch == 1 {
            return self.apply(params, grads);
        }
        match &mut self.acc {
            Some(acc) => acc.accumulate(&grads),
            None => self.acc = Some(grads),
        }
        self.pending += 1;
        if self.pending == self.batch {
            self.flush(params)?;
        }
        Ok(())
    }

    fn flush(&mut self, params: &mut ParamStore) -> Result<(), TrainError> {
        if let Some(acc) = self.acc.take() {
            self.pending = 0;
            self.apply(params, acc)?;
        }
        Ok(())
    }
}

fn param_norm(p: &ParamStore) -> f64 {
    libm::sqrt(p.iter().flat_map(|(_, _, t)| t.data()).map(|x| x * x).sum())
}

#[derive(Default)]
struct EpochSums {
    turns: usize,
    nll: f64,
    kd: f64,
    kd_pi: f64,
    theta: f64,
    clamped: usize,
    distilled: bool,
}

impl EpochSums {
    fn log(&self, phase: &str, epoch: usize) -> EpochLog {
        let n = self.turns.max(1) as f64;
        EpochLog {
            phase: phase.to_string(),
            epoch,
            turns: self.turns,
            j_nll: self.nll / n,
            j_kd: self.distilled.then(|| self.kd / n),
            j_kd_pi: self.distilled.then(|| self.kd_pi / n),
            j_theta: self.theta / n,
            clamped: self.clamped,
            selection: None,
        }
    }
}

struct StepCtx<'a> {
    phase: &'a str,
    epoch: usize,
    step: usize,
    data: &'a Dataset,
}

impl StepCtx<'_> {
    fn diverged(
        &self,
        turn: &EncodedTurn,
        losses: (f64, Option<f64>, Option<f64>),
        grads: &Gradients,
        params: &ParamStore,
    ) -> TrainError {
        TrainError::Diverged(Box::new(DivergenceReport {
            phase: self.phase.to_string(),
            epoch: self.epoch,
            step: self.step,
            episode: self
                .data
                .train
                .episodes
                .get(turn.episode)
                .map(|e| e.id.clone())
                .unwrap_or_default(),
            turn: turn.turn,
            j_nll: losses.0,
            j_kd: losses.1,
            j_kd_pi: losses.2,
            grad_norm: grads.global_norm(),
            param_norm: param_norm(params),
        }))
    }
}

fn teacher_epoch(
    model: &mut TeacherModel,
    turns: &[&EncodedTurn],
    order: &[usize],
    opt: &mut Optimizer,
    ctx: &mut StepCtx<'_>,
) -> Result<EpochLog, TrainError> {
    let mut sums = EpochSums::default();
    for (step, &i) in order.iter().enumerate() {
        ctx.step = step;
        let turn = turns[i];
        let (loss, clamped, grads) = {
            let mut tape = Tape::with_params(&model.params);
            let (l, clamped) = teacher_objective(&mut tape, model, turn)?;
            let v = tape.scalar(l)?;
            let g = tape.backward(l)?.into_params().expect("tape has a store");
            (v, clamped, g)
        };
        if !loss.is_finite() || !grads.is_finite() {
            return Err(ctx.diverged(turn, (loss, None, None), &grads, &model.params));
        }
        opt.push(&mut model.params, grads)?;
        sums.turns += 1;
        sums.nll += loss;
        sums.theta += loss;
        sums.clamped += clamped;
    }
    opt.flush(&mut model.params)?;
    Ok(sums.log(ctx.phase, ctx.epoch))
}

/// Validation score of a candidate teacher: (entity recall, BLEU).
type Selector<'a> = &'a mut dyn FnMut(&TeacherModel) -> Result<(f64, f64), TrainError>;

/// Trained model, logs, kept epoch and its score.
type Fitted = (TeacherModel, Vec<EpochLog>, usize, Option<(f64, f64)>);

/// Trains one teacher on `turns` for `epochs`, calling `select` after every
/// epoch (and once before the first when `score_start`). The best-scoring
/// parameters are kept; ties keep the earlier candidate.
#[allow(clippy::too_many_arguments)]
fn fit_teacher(
    mut model: TeacherModel,
    data: &Dataset,
    turns: &[&EncodedTurn],
    cfg: &TrainingConfig,
    epochs: usize,
    order_seed: u64,
    phase: &str,
    score_start: bool,
    mut select: Option<Selector<'_>>,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<Fitted, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
    let mut order: Vec<usize> = (0..turns.len()).collect();
    let mut opt = Optimizer::new(&model.params, cfg);
    let mut logs = Vec::with_capacity(epochs);
    let mut best: Option<(f64, f64)> = None;
    let mut best_params: Option<ParamStore> = None;
    let mut best_epoch = epochs;
    if score_start {
        if let Some(f) = select.as_mut() {
            best = Some(f(&model)?);
            best_params = Some(model.params.clone());
            best_epoch = 0;
        }
    }
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut ctx = StepCtx {
            phase,
            epoch,
            step: 0,
            data,
        };
        let mut log = teacher_epoch(&mut model, turns, &order, &mut opt, &mut ctx)?;
        if let Some(f) = select.as_mut() {
            let score = f(&model)?;
            log.selection = Some(score.0);
            if best.is_none_or(|b| score.0 > b.0 || (score.0 == b.0 && score.1 > b.1)) {
                best = Some(score);
                best_params = Some(model.params.clone());
                best_epoch = epoch;
            }
        }
        progress(&log);
        logs.push(log);
    }
    if let Some(p) = best_params {
        model.params = p;
    }
    Ok((model, logs, best_epoch, best))
}

/// Trains the universal teacher on every training turn.
pub fn train_universal_teacher(
    data: &Dataset,
    cfg: &TrainingConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<(TeacherModel, Vec<EpochLog>), TrainError> {
    cfg.validate()?;
    let model = TeacherModel::new(data.model, derive_seed(cfg.seed, STREAM_TEACHER_INIT, 0))?;
    let turns: Vec<&EncodedTurn> = data.train_turns.iter().collect();
    let (model, logs, _, _) = fit_teacher(
        model,
        data,
        &turns,
        cfg,
        cfg.epochs,
        derive_seed(cfg.seed, STREAM_TEACHER_ORDER, 0),
        "teacher:all",
        false,
        None,
        progress,
    )?;
    Ok((model, logs))
}

/// Which fine-tuning checkpoint was kept and how it scored on validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// 0 is the starting point (the universal teacher when warm-starting).
    pub epoch: usize,
    pub valid_entity_recall: Option<f64>,
    pub valid_bleu4: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    pub model: TeacherModel,
    pub logs: Vec<EpochLog>,
    pub selection: Selection,
}

/// Fine-tunes a copy of `universal` on one bucket and keeps the checkpoint
/// with the best validation entity recall (ties: BLEU, then the earlier one).
/// Without warm start the teacher starts from fresh parameters instead.
pub fn finetune_domain_teacher(
    universal: &TeacherModel,
    data: &Dataset,
    bucket: &str,
    cfg: &TrainingConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<FinetuneOutcome, TrainError> {
    cfg.validate()?;
    let index = data
        .buckets()
        .iter()
        .position(|b| b == bucket)
        .unwrap_or(usize::MAX) as u64;
    let turns: Vec<&EncodedTurn> = data
        .train_turns
        .iter()
        .filter(|t| t.bucket == bucket)
        .collect();
    if turns.is_empty() {
        let mut model = universal.clone();
        model.domain = Some(bucket.to_string());
        return Ok(FinetuneOutcome {
            model,
            logs: Vec::new(),
            selection: Selection {
                epoch: 0,
                valid_entity_recall: None,
                valid_bleu4: None,
                warning: Some(format!(
                    "no training turns for {bucket}; using the universal teacher"
                )),
            },
        });
    }
    let valid: Vec<&EncodedTurn> = data
        .valid_turns
        .iter()
        .filter(|t| t.bucket == bucket)
        .collect();
    let (start, epochs) = if cfg.warm_start {
        (universal.clone(), cfg.finetune_epochs)
    } else {
        let seed = derive_seed(cfg.seed, STREAM_DOMAIN_INIT, index);
        (TeacherModel::new(data.model, seed)?, cfg.epochs)
    };
    let mut er_of_best = None;
    let mut select = |m: &TeacherModel| -> Result<(f64, f64), TrainError> {
        let s = score_turns(
            m,
            &data.valid,
            &valid,
            &data.vocabs.output,
            cfg.max_response_len,
        )?;
        Ok((s.entity_recall.unwrap_or(-1.0), s.bleu4))
    };
    let selector: Option<Selector<'_>> = if valid.is_empty() {
        None
    } else {
        Some(&mut select)
    };
    let phase = format!("teacher:{bucket}");
    let (mut model, logs, epoch, best) = fit_teacher(
        start,
        data,
        &turns,
        cfg,
        epochs,
        derive_seed(cfg.seed, STREAM_DOMAIN_ORDER, index),
        &phase,
        cfg.warm_start,
        selector,
        progress,
    )?;
    if let Some((er, _)) = best {
        er_of_best = (er >= 0.0).then_some(er);
    }
    model.domain = Some(bucket.to_string());
    Ok(FinetuneOutcome {
        model,
        logs,
        selection: Selection {
            epoch,
            valid_entity_recall: er_of_best,
            valid_bleu4: best.map(|b| b.1),
            warning: valid
                .is_empty()
                .then(|| format!("no validation turns for {bucket}; kept the last epoch")),
        },
    })
}

#[derive(Clone, Debug)]
pub struct TeachersOutcome {
    pub ensemble: TeacherEnsemble,
    pub universal_logs: Vec<EpochLog>,
    pub logs: BTreeMap<String, Vec<EpochLog>>,
    pub selections: BTreeMap<String, Selection>,
}

/// The universal teacher followed by one teacher per schema domain and one
/// for `general`.
pub fn train_teachers(
    data: &Dataset,
    cfg: &TrainingConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<TeachersOutcome, TrainError> {
    let (universal, universal_logs) = train_universal_teacher(data, cfg, progress)?;
    let mut teachers = BTreeMap::new();
    let mut logs = BTreeMap::new();
    let mut selections = BTreeMap::new();
    for bucket in data.buckets() {
        let out = finetune_domain_teacher(&universal, data, &bucket, cfg, progress)?;
        teachers.insert(bucket.clone(), out.model);
        logs.insert(bucket.clone(), out.logs);
        selections.insert(bucket, out.selection);
    }
    Ok(TeachersOutcome {
        ensemble: TeacherEnsemble {
            universal,
            teachers,
        },
        universal_logs,
        logs,
        selections,
    })
}

#[derive(Clone, Debug)]
pub struct StudentOutcome {
    pub model: StudentModel,
    pub logs: Vec<EpochLog>,
    /// Epoch of the kept checkpoint.
    pub selected_epoch: usize,
    /// Validation report of the kept checkpoint.
    pub valid: Option<MetricReport>,
}

/// Teacher distributions and action for one turn, held as constants.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherTargets {
    pub probs: Vec<Vec<f64>>,
    pub action: Vec<f64>,
}

pub fn teacher_targets(
    teacher: &TeacherModel,
    turn: &EncodedTurn,
) -> Result<TeacherTargets, TrainError> {
    let mut tape = Tape::inference(&teacher.params);
    let d = teacher.forward(&mut tape, &turn.teacher, &turn.response)?;
    let probs = d
        .probs
        .iter()
        .map(|p| Ok(tape.value(*p)?.to_vec()))
        .collect::<Result<Vec<_>, TrainError>>()?;
    Ok(TeacherTargets {
        probs,
        action: tape.value(d.action)?.to_vec(),
    })
}

/// Summed response NLL of a teacher on one turn, plus clamp count.
pub fn teacher_objective(
    tape: &mut Tape<'_>,
    model: &TeacherModel,
    turn: &EncodedTurn,
) -> Result<(Var, usize), TrainError> {
    let d = model.forward(tape, &turn.teacher, &turn.response)?;
    nll_on_tape(tape, &d.probs, &turn.response[1..])
}

/// Graph of one student step.
#[derive(Clone, Copy, Debug)]
pub struct StudentLoss {
    pub total: Var,
    pub nll: Var,
    /// Distillation values, computed whenever targets were given.
    pub kd: Option<f64>,
    pub kd_pi: Option<f64>,
    pub clamped: usize,
}

/// `J_NLL + alpha1 J_KD + alpha2 J_KD_pi` for one turn. Terms with a zero
/// weight stay off the graph.
pub fn student_objective(
    tape: &mut Tape<'_>,
    model: &StudentModel,
    turn: &EncodedTurn,
    targets: Option<&TeacherTargets>,
    alpha1: f64,
    alpha2: f64,
) -> Result<StudentLoss, TrainError> {
    let d = model.forward(tape, &turn.student, &turn.response)?;
    let (nll, mut clamped) = nll_on_tape(tape, &d.probs, &turn.response[1..])?;
    let mut terms = alloc::vec![nll];
    let (mut kd, mut kd_pi) = (None, None);
    if let Some(t) = targets {
        let s_probs = d
            .probs
            .iter()
            .map(|p| Ok(tape.value(*p)?.to_vec()))
            .collect::<Result<Vec<_>, TrainError>>()?;
        kd = Some(kd_text_loss(&t.probs, &s_probs)?.value);
        kd_pi = Some(kd_policy_loss(&t.action, tape.value(d.action)?)?);
        if alpha1 > 0.0 {
            let (k, c) = kd_text_on_tape(tape, &t.probs, &d.probs)?;
            clamped += c;
            terms.push(tape.scale(k, alpha1)?);
        }
        if alpha2 > 0.0 {
            let k = kd_policy_on_tape(tape, &t.action, d.action)?;
            terms.push(tape.scale(k, alpha2)?);
        }
    }
    let total = if terms.len() == 1 {
        nll
    } else {
        tape.add_all(&terms)?
    };
    Ok(StudentLoss {
        total,
        nll,
        kd,
        kd_pi,
        clamped,
    })
}

/// Trains the student on `J_NLL + alpha1 J_KD + alpha2 J_KD_pi`, routing every
/// turn to the teacher of its bucket. A term whose weight is zero is left out
/// of the graph, so `alpha1 = alpha2 = 0` is plain maximum likelihood and
/// never touches the teachers. The checkpoint with the best validation
/// success (ties: BLEU) is kept.
pub fn train_student(
    data: &Dataset,
    ensemble: &TeacherEnsemble,
    cfg: &TrainingConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<StudentOutcome, TrainError> {
    cfg.validate()?;
    let distill = cfg.distills();
    if distill {
        for t in ensemble.all() {
            if t.config.hidden != data.model.hidden || t.config.out_vocab != data.model.out_vocab {
                return Err(TrainError::Config(
                    "teacher action or output width differs from the student's".into(),
                ));
            }
        }
        for b in data.train_turns.iter().map(|t| &t.bucket) {
            ensemble.route(b)?;
        }
    }
    let mut model = StudentModel::new(data.model, derive_seed(cfg.seed, STREAM_STUDENT_INIT, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_STUDENT_ORDER, 0));
    let mut order: Vec<usize> = (0..data.train_turns.len()).collect();
    let mut opt = Optimizer::new(&model.params, cfg);
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64)> = None;
    let mut best_state: Option<(ParamStore, usize, MetricReport)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = EpochSums {
            distilled: distill,
            ..EpochSums::default()
        };
        let ctx = StepCtx {
            phase: "student",
            epoch,
            step: 0,
            data,
        };
        for (step, &i) in order.iter().enumerate() {
            let turn = &data.train_turns[i];
            let targets = if distill {
                Some(teacher_targets(ensemble.route(&turn.bucket)?, turn)?)
            } else {
                None
            };
            let mut tape = Tape::with_params(&model.params);
            let StudentLoss {
                total,
                nll,
                kd,
                kd_pi,
                clamped,
            } = student_objective(
                &mut tape,
                &model,
                turn,
                targets.as_ref(),
                cfg.alpha1,
                cfg.alpha2,
            )?;
            let nll_v = tape.scalar(nll)?;
            let theta = tape.scalar(total)?;
            let grads = tape
                .backward(total)?
                .into_params()
                .expect("tape has a store");
            drop(tape);
            if !theta.is_finite() || !grads.is_finite() {
                let ctx = StepCtx { step, ..ctx };
                return Err(ctx.diverged(turn, (nll_v, kd, kd_pi), &grads, &model.params));
            }
            opt.push(&mut model.params, grads)?;
            sums.turns += 1;
            sums.nll += nll_v;
            sums.kd += kd.unwrap_or(0.0);
            sums.kd_pi += kd_pi.unwrap_or(0.0);
            sums.theta += theta;
            sums.clamped += clamped;
        }
        opt.flush(&mut model.params)?;
        let mut log = sums.log("student", epoch);
        if !data.valid_turns.is_empty() {
            let responses = generate_responses(
                &model,
                &data.valid,
                &data.valid_turns,
                &data.vocabs.output,
                cfg.max_response_len,
            )?;
            let report = evaluate(&data.valid, &responses)?;
            let score = (report.success, report.bleu4);
            log.selection = Some(report.success);
            if best.is_none_or(|b| score.0 > b.0 || (score.0 == b.0 && score.1 > b.1)) {
                best = Some(score);
                best_state = Some((model.params.clone(), epoch, report));
            }
        }
        progress(&log);
        logs.push(log);
    }
    let (selected_epoch, valid) = match best_state {
        Some((params, epoch, report)) => {
            model.params = params;
            (epoch, Some(report))
        }
        None => (cfg.epochs, None),
    };
    Ok(StudentOutcome {
        model,
        logs,
        selected_epoch,
        valid,
    })
}
