//! Central finite-difference gradient checking.
//!
//! The numeric side only evaluates the function forward on inference tapes,
//! so it never touches the backward rules it is checking.

use super::{Tape, Tensor, TensorError, Var};

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, and 0 when both are zero.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff: f64 = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.norm().max(numeric.norm());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Numeric gradient of the scalar `f(inputs)` with respect to every input.
pub fn numeric_gradients<F>(inputs: &[Tensor], f: &F, step: f64) -> Result<Vec<Tensor>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |inputs: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::inference();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item().ok_or(TensorError::NonScalarRoot {
            rows: tape.value(out).rows(),
            cols: tape.value(out).cols(),
        })
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut result = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[k].rows(), inputs[k].cols());
        for e in 0..inputs[k].len() {
            let orig = work[k].data()[e];
            work[k].data_mut()[e] = orig + step;
            let plus = eval(&work)?;
            work[k].data_mut()[e] = orig - step;
            let minus = eval(&work)?;
            work[k].data_mut()[e] = orig;
            g.data_mut()[e] = (plus - minus) / (2.0 * step);
        }
        result.push(g);
    }
    Ok(result)
}

/// Analytic gradients of `f` via one taped forward pass and a backward sweep.
pub fn analytic_gradients<F>(inputs: &[Tensor], f: &F) -> Result<Vec<Tensor>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    Ok(vars.iter().map(|&v| grads.get_or_zeros(v)).collect())
}

/// Relative error per input between analytic and central-difference
/// gradients.
pub fn check_gradients<F>(inputs: &[Tensor], f: F, step: f64) -> Result<Vec<f64>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let analytic = analytic_gradients(inputs, &f)?;
    let numeric = numeric_gradients(inputs, &f, step)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a, n))
        .collect())
}
