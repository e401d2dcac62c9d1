use rand::Rng;

use super::{ParamSet, Tape, Tensor, TensorError, Var};

/// Glorot-uniform matrix: entries in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-a..=a))
        .collect();
    Tensor::from_vec(fan_in, fan_out, data).expect("shape")
}

/// `x · w (+ b)`, with `b` a 1×out row broadcast over rows.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
    let y = tape.matmul(x, w)?;
    match b {
        Some(b) => tape.add_broadcast_rows(y, b),
        None => Ok(y),
    }
}

/// Parameter positions of one GRU block inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruIndices {
    pub w_z: usize,
    pub u_z: usize,
    pub b_z: usize,
    pub w_r: usize,
    pub u_r: usize,
    pub b_r: usize,
    pub w_h: usize,
    pub u_h: usize,
    pub b_h: usize,
}

impl GruIndices {
    /// Registers a `dim`-wide GRU under `prefix` with Glorot weights and
    /// zero biases.
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = |params: &mut ParamSet, name: &str| {
            params.push(format!("{prefix}.{name}"), glorot_uniform(rng, dim, dim))
        };
        let w_z = w(params, "w_z");
        let u_z = w(params, "u_z");
        let w_r = w(params, "w_r");
        let u_r = w(params, "u_r");
        let w_h = w(params, "w_h");
        let u_h = w(params, "u_h");
        let b_z = params.push(format!("{prefix}.b_z"), Tensor::zeros(1, dim));
        let b_r = params.push(format!("{prefix}.b_r"), Tensor::zeros(1, dim));
        let b_h = params.push(format!("{prefix}.b_h"), Tensor::zeros(1, dim));
        GruIndices {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        }
    }

    pub fn vars(&self, bound: &[Var]) -> GruVars {
        GruVars {
            w_z: bound[self.w_z],
            u_z: bound[self.u_z],
            b_z: bound[self.b_z],
            w_r: bound[self.w_r],
            u_r: bound[self.u_r],
            b_r: bound[self.b_r],
            w_h: bound[self.w_h],
            u_h: bound[self.u_h],
            b_h: bound[self.b_h],
        }
    }
}

/// GRU weights as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

/// Gated recurrent update of state `h` with message `m`, row by row:
///
/// ```text
/// z  = σ(m·W_z + h·U_z + b_z)
/// r  = σ(m·W_r + h·U_r + b_r)
/// ĥ  = tanh(m·W_h + (r ⊙ h)·U_h + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ ĥ
/// ```
pub fn gru_cell(tape: &mut Tape, h: Var, m: Var, p: &GruVars) -> Result<Var, TensorError> {
    let (hs, ms) = (tape.value(h), tape.value(m));
    if hs.shape() != ms.shape() {
        return Err(TensorError::shape("gru_cell", hs, ms));
    }
    let gate = |tape: &mut Tape, w: Var, u: Var, b: Var| -> Result<Var, TensorError> {
        let a = tape.matmul(m, w)?;
        let c = tape.matmul(h, u)?;
        let s = tape.add(a, c)?;
        let s = tape.add_broadcast_rows(s, b)?;
        tape.sigmoid(s)
    };
    let z = gate(tape, p.w_z, p.u_z, p.b_z)?;
    let r = gate(tape, p.w_r, p.u_r, p.b_r)?;
    let rh = tape.hadamard(r, h)?;
    let a = tape.matmul(m, p.w_h)?;
    let c = tape.matmul(rh, p.u_h)?;
    let s = tape.add(a, c)?;
    let s = tape.add_broadcast_rows(s, p.b_h)?;
    let candidate = tape.tanh(s)?;
    // (1 − z) ⊙ h + z ⊙ ĥ  ==  h + z ⊙ (ĥ − h)
    let delta = tape.sub(candidate, h)?;
    let step = tape.hadamard(z, delta)?;
    tape.add(h, step)
}

/// Inverted dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 − rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> Tensor {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, data).expect("shape")
}

/// Inverted dropout; the identity when not training or when `rate` is 0.
///
/// Panics unless `0 <= rate < 1`.
pub fn dropout<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var, TensorError> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let (r, c) = tape.value(x).shape();
    let mask = dropout_mask(r, c, rate, rng);
    tape.mul_const(x, mask)
}
