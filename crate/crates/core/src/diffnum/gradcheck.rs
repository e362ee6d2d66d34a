//! Central finite-difference gradient checks.

use alloc::string::{String, ToString};

use super::{DiffError, ParamStore, Tape, Tensor, Var};

/// `|analytic - numeric| / max(1, |analytic|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

fn scalar_output(tape: &Tape<'_>, y: Var) -> Result<f64, DiffError> {
    tape.scalar(y)
}

/// Compares the tape gradient of a scalar function at `point` against
/// central differences and returns the largest relative error.
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64, DiffError>
where
    F: Fn(&mut Tape<'static>, Var) -> Result<Var, DiffError>,
{
    if !(eps > 0.0) {
        return Err(DiffError::InvalidStep(eps));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone(), true);
    let y = f(&mut tape, x)?;
    scalar_output(&tape, y)?;
    let back = tape.backward(y)?;
    let analytic = back
        .wrt(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(point.shape().clone()));

    let eval = |p: Tensor| -> Result<f64, DiffError> {
        let mut t = Tape::new();
        let x = t.leaf(p, false);
        let y = f(&mut t, x)?;
        scalar_output(&t, y)
    };
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += eps;
        let mut minus = point.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Outcome of [`grad_check_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: (String, usize),
    pub coordinates: usize,
}

/// Checks every coordinate of every parameter in `store` against central
/// differences of the scalar built by `f`.
pub fn grad_check_params<F>(store: &ParamStore, f: F, eps: f64) -> Result<ParamCheck, DiffError>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var, DiffError>,
{
    if !(eps > 0.0) {
        return Err(DiffError::InvalidStep(eps));
    }
    let mut tape = Tape::with_params(store);
    let y = f(&mut tape)?;
    scalar_output(&tape, y)?;
    let grads = tape
        .backward(y)?
        .into_params()
        .ok_or(DiffError::NoParamStore)?;
    drop(tape);

    let eval = |s: &ParamStore| -> Result<f64, DiffError> {
        let mut t = Tape::inference(s);
        let y = f(&mut t)?;
        scalar_output(&t, y)
    };
    let mut work = store.clone();
    let mut report = ParamCheck {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        coordinates: 0,
    };
    for id in store.ids() {
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig - eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(grads.get(id).data()[i], numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.0.is_empty() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = (store.name(id).to_string(), i);
            }
        }
    }
    Ok(report)
}
