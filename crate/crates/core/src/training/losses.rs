use alloc::vec::Vec;

use super::TrainError;
use crate::diffnum::{Tape, Var};
use crate::math;

/// Probabilities below this are clamped before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Loss value with the number of probabilities that had to be clamped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: usize,
}

fn clamp_log(p: f64, clamped: &mut usize) -> f64 {
    if p < PROB_FLOOR {
        *clamped += 1;
        math::ln(PROB_FLOOR)
    } else {
        math::ln(p)
    }
}

/// `-sum_i log p_i(gold_i)`, summed over positions.
pub fn nll_loss(dists: &[Vec<f64>], gold: &[u32]) -> Result<Clamped, TrainError> {
    if dists.len() != gold.len() {
        return Err(TrainError::LengthMismatch {
            expected: gold.len(),
            got: dists.len(),
        });
    }
    let mut clamped = 0;
    let mut value = 0.0;
    for (d, &g) in dists.iter().zip(gold) {
        let p = *d.get(g as usize).ok_or(TrainError::LengthMismatch {
            expected: g as usize + 1,
            got: d.len(),
        })?;
        value -= clamp_log(p, &mut clamped);
    }
    Ok(Clamped { value, clamped })
}

/// `-sum_i sum_w p_teacher(w) log p_student(w)`.
pub fn kd_text_loss(teacher: &[Vec<f64>], student: &[Vec<f64>]) -> Result<Clamped, TrainError> {
    if teacher.len() != student.len() {
        return Err(TrainError::LengthMismatch {
            expected: teacher.len(),
            got: student.len(),
        });
    }
    let mut clamped = 0;
    let mut value = 0.0;
    for (t, s) in teacher.iter().zip(student) {
        if t.len() != s.len() {
            return Err(TrainError::WidthMismatch {
                expected: t.len(),
                got: s.len(),
            });
        }
        for (&pt, &ps) in t.iter().zip(s) {
            if pt != 0.0 {
                value -= pt * clamp_log(ps, &mut clamped);
            }
        }
    }
    Ok(Clamped { value, clamped })
}

/// `sum_i (a_T,i - a_S,i)^2`.
pub fn kd_policy_loss(teacher: &[f64], student: &[f64]) -> Result<f64, TrainError> {
    if teacher.len() != student.len() {
        return Err(TrainError::WidthMismatch {
            expected: teacher.len(),
            got: student.len(),
        });
    }
    Ok(teacher
        .iter()
        .zip(student)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `J_NLL + alpha1 J_KD + alpha2 J_KD_pi`.
pub fn combined_loss(nll: f64, kd: f64, kd_pi: f64, alpha1: f64, alpha2: f64) -> f64 {
    nll + alpha1 * kd + alpha2 * kd_pi
}

/// Loss terms of one turn or an epoch mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBundle {
    pub j_nll: f64,
    pub j_kd: f64,
    pub j_kd_pi: f64,
    pub j_theta: f64,
}

impl LossBundle {
    pub fn new(j_nll: f64, j_kd: f64, j_kd_pi: f64, alpha1: f64, alpha2: f64) -> Self {
        LossBundle {
            j_nll,
            j_kd,
            j_kd_pi,
            j_theta: combined_loss(j_nll, j_kd, j_kd_pi, alpha1, alpha2),
        }
    }
}

/// Count of values under [`PROB_FLOOR`].
fn below_floor(values: &[f64]) -> usize {
    values.iter().filter(|&&p| p < PROB_FLOOR).count()
}

/// Tape version of [`nll_loss`].
pub fn nll_on_tape(
    tape: &mut Tape<'_>,
    probs: &[Var],
    gold: &[u32],
) -> Result<(Var, usize), TrainError> {
    if probs.len() != gold.len() || probs.is_empty() {
        return Err(TrainError::LengthMismatch {
            expected: gold.len(),
            got: probs.len(),
        });
    }
    let mut terms = Vec::with_capacity(probs.len());
    let mut clamped = 0;
    for (&p, &g) in probs.iter().zip(gold) {
        let q = tape.pick(p, g as usize)?;
        clamped += below_floor(tape.value(q)?);
        terms.push(tape.log_clamped(q, PROB_FLOOR)?);
    }
    let s = tape.add_all(&terms)?;
    Ok((tape.scale(s, -1.0)?, clamped))
}

/// Tape version of [`kd_text_loss`]; the teacher side is constant.
pub fn kd_text_on_tape(
    tape: &mut Tape<'_>,
    teacher: &[Vec<f64>],
    student: &[Var],
) -> Result<(Var, usize), TrainError> {
    if teacher.len() != student.len() || student.is_empty() {
        return Err(TrainError::LengthMismatch {
            expected: teacher.len(),
            got: student.len(),
        });
    }
    let mut terms = Vec::with_capacity(student.len());
    let mut clamped = 0;
    for (t, &s) in teacher.iter().zip(student) {
        let width = tape.shape(s)?.numel();
        if t.len() != width {
            return Err(TrainError::WidthMismatch {
                expected: t.len(),
                got: width,
            });
        }
        clamped += below_floor(tape.value(s)?);
        let logs = tape.log_clamped(s, PROB_FLOOR)?;
        let pt = tape.constant_vector(t);
        let prod = tape.mul(pt, logs)?;
        terms.push(tape.sum(prod)?);
    }
    let s = tape.add_all(&terms)?;
    Ok((tape.scale(s, -1.0)?, clamped))
}

/// Tape version of [`kd_policy_loss`]; the teacher action is constant.
pub fn kd_policy_on_tape(
    tape: &mut Tape<'_>,
    teacher: &[f64],
    student: Var,
) -> Result<Var, TrainError> {
    let width = tape.shape(student)?.numel();
    if teacher.len() != width {
        return Err(TrainError::WidthMismatch {
            expected: teacher.len(),
            got: width,
        });
    }
    let at = tape.constant_vector(teacher);
    let d = tape.sub(student, at)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.sum(sq)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn nll_examples() {
        let certain = nll_loss(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1, 0]).unwrap();
        assert_eq!(certain.value, 0.0);
        let half = nll_loss(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[0, 1]).unwrap();
        assert!((half.value - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn nll_clamps_zero_probabilities() {
        let r = nll_loss(&[vec![1.0, 0.0]], &[1]).unwrap();
        assert_eq!(r.clamped, 1);
        assert!((r.value - (-libm::log(PROB_FLOOR))).abs() < 1e-9);
    }

    #[test]
    fn kd_text_examples() {
        let r = kd_text_loss(&[vec![0.9, 0.1]], &[vec![0.5, 0.5]]).unwrap();
        assert!((r.value - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(
            kd_text_loss(&[vec![0.0, 1.0]], &[vec![0.0, 1.0]])
                .unwrap()
                .value,
            0.0
        );
        assert!(kd_text_loss(&[vec![1.0]], &[vec![0.5, 0.5]]).is_err());
        assert!(kd_text_loss(&[vec![1.0]], &[]).is_err());
    }

    #[test]
    fn kd_policy_examples() {
        assert_eq!(kd_policy_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(kd_policy_loss(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 0.0);
        assert!(kd_policy_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn combined_examples() {
        assert_eq!(combined_loss(1.0, 1.0, 1.0, 0.5, 0.25), 1.75);
        let nll = 1.234_567_890_123_456_7;
        assert_eq!(
            combined_loss(nll, 12.5, 7.25, 0.0, 0.0).to_bits(),
            nll.to_bits()
        );
    }

    #[test]
    fn tape_losses_agree_with_plain_ones() {
        let t = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]];
        let s = vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.3, 0.5]];
        let mut tape = Tape::new();
        let vars: Vec<Var> = s.iter().map(|p| tape.constant_vector(p)).collect();
        let (nll, _) = nll_on_tape(&mut tape, &vars, &[0, 2]).unwrap();
        assert!((tape.scalar(nll).unwrap() - nll_loss(&s, &[0, 2]).unwrap().value).abs() < 1e-12);
        let (kd, _) = kd_text_on_tape(&mut tape, &t, &vars).unwrap();
        assert!((tape.scalar(kd).unwrap() - kd_text_loss(&t, &s).unwrap().value).abs() < 1e-12);
        let a = tape.constant_vector(&[0.1, -0.4]);
        let pi = kd_policy_on_tape(&mut tape, &[0.5, 0.5], a).unwrap();
        assert!(
            (tape.scalar(pi).unwrap() - kd_policy_loss(&[0.5, 0.5], &[0.1, -0.4]).unwrap()).abs()
                < 1e-12
        );
    }

    fn dist() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, 4).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn kd_is_at_least_the_teacher_entropy(p in dist(), q in dist()) {
            let h = kd_text_loss(std::slice::from_ref(&p), std::slice::from_ref(&p)).unwrap().value;
            let ce = kd_text_loss(&[p], &[q]).unwrap().value;
            prop_assert!(ce - h >= -1e-12);
        }

        #[test]
        fn policy_loss_is_symmetric_and_non_negative(
            a in proptest::collection::vec(-1.0f64..1.0, 5),
            b in proptest::collection::vec(-1.0f64..1.0, 5),
        ) {
            let x = kd_policy_loss(&a, &b).unwrap();
            prop_assert!(x >= 0.0);
            prop_assert_eq!(x, kd_policy_loss(&b, &a).unwrap());
        }

        #[test]
        fn nll_does_not_increase_when_gold_probability_rises(p in 0.01f64..0.9, bump in 0.0f64..0.09) {
            let lo = nll_loss(&[vec![p, 1.0 - p]], &[0]).unwrap().value;
            let hi = nll_loss(&[vec![p + bump, 1.0 - p - bump]], &[0]).unwrap().value;
            prop_assert!(hi <= lo);
        }

        #[test]
        fn combined_is_linear_in_the_weights(
            n in 0.0f64..10.0, k in 0.0f64..10.0, pi in 0.0f64..10.0,
            a1 in 0.0f64..1.0, a2 in 0.0f64..1.0,
        ) {
            let j = combined_loss(n, k, pi, a1, a2);
            let j2 = combined_loss(n, k, pi, 2.0 * a1, a2);
            prop_assert!(((j2 - j) - a1 * k).abs() < 1e-9);
        }
    }
}
