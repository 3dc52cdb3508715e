//! Recurrent and affine building blocks on top of the tape.

use rand::Rng;

use crate::autodiff::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Magnitude of the random initial LSTM state.
const INIT_STATE_SCALE: f64 = 0.1;

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, bound: f64) -> Vec<T> {
    (0..len).map(|_| T::lit(rng.random_range(-bound..=bound))).collect()
}

/// Glorot-uniform `rows × cols` matrix.
pub fn glorot<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(rows, cols, uniform(rng, rows * cols, bound)).expect("non-empty").with_grad(true)
}

/// Single-direction LSTM. The initial `[h₀ | c₀]` is a fixed random vector
/// drawn at construction and stored (untrained) alongside the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub init: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let cols = input + hidden;
        let bound = (6.0 / (hidden + cols) as f64).sqrt();
        let w = Tensor::matrix(4 * hidden, cols, uniform(rng, 4 * hidden * cols, bound)).expect("non-empty");
        let mut b = vec![T::zero(); 4 * hidden];
        // forget-gate bias starts at 1
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = T::one());
        let init = Tensor::from_vec(uniform(rng, 2 * hidden, INIT_STATE_SCALE));
        Self {
            w: params.insert(format!("{name}.w"), w.with_grad(true)),
            b: params.insert(format!("{name}.b"), Tensor::from_vec(b).with_grad(true)),
            init: params.insert(format!("{name}.init"), init),
            input,
            hidden,
        }
    }

    /// Looks up an existing layer by name prefix.
    pub fn bind<T: Scalar>(params: &ParamSet<T>, name: &str) -> Option<Self> {
        let w = params.id_of(&format!("{name}.w"))?;
        let shape = params.get(w).shape();
        let hidden = shape[0] / 4;
        Some(Self {
            w,
            b: params.id_of(&format!("{name}.b"))?,
            init: params.id_of(&format!("{name}.init"))?,
            input: shape[1] - hidden,
            hidden,
        })
    }

    /// Runs over `inputs` (reversed when `reverse`), returning packed states
    /// `[h | c]` aligned with the input positions.
    pub fn run<T: Scalar>(&self, tape: &mut Tape<'_, T>, inputs: &[Var], reverse: bool) -> Result<Vec<Var>> {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        let mut state = tape.param(self.init);
        let mut states = Vec::with_capacity(inputs.len());
        if reverse {
            for &x in inputs.iter().rev() {
                state = tape.lstm_step(x, state, w, b)?;
                states.push(state);
            }
            states.reverse();
        } else {
            for &x in inputs {
                state = tape.lstm_step(x, state, w, b)?;
                states.push(state);
            }
        }
        Ok(states)
    }

    /// Hidden half of a packed state.
    pub fn hidden_of<T: Scalar>(&self, tape: &mut Tape<'_, T>, state: Var) -> Result<Var> {
        tape.slice(state, 0, self.hidden)
    }
}

/// Forward and backward LSTMs over the same sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

/// Per-direction packed states of a [`BiLstm`] pass.
pub struct BiStates {
    pub fwd: Vec<Var>,
    pub bwd: Vec<Var>,
}

impl BiLstm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fwd: Lstm::new(params, &format!("{name}.fwd"), input, hidden, rng),
            bwd: Lstm::new(params, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn bind<T: Scalar>(params: &ParamSet<T>, name: &str) -> Option<Self> {
        Some(Self { fwd: Lstm::bind(params, &format!("{name}.fwd"))?, bwd: Lstm::bind(params, &format!("{name}.bwd"))? })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn run<T: Scalar>(&self, tape: &mut Tape<'_, T>, inputs: &[Var]) -> Result<BiStates> {
        Ok(BiStates { fwd: self.fwd.run(tape, inputs, false)?, bwd: self.bwd.run(tape, inputs, true)? })
    }

    /// `f_m ⊕ b_1`: last forward hidden state joined with the first backward one.
    pub fn encode_final<T: Scalar>(&self, tape: &mut Tape<'_, T>, inputs: &[Var]) -> Result<Var> {
        let s = self.run(tape, inputs)?;
        let f = self.fwd.hidden_of(tape, *s.fwd.last().expect("non-empty sequence"))?;
        let b = self.bwd.hidden_of(tape, s.bwd[0])?;
        Ok(tape.concat(&[f, b]))
    }

    /// `f_i ⊕ b_i` for every position.
    pub fn encode_each<T: Scalar>(&self, tape: &mut Tape<'_, T>, inputs: &[Var]) -> Result<Vec<Var>> {
        let s = self.run(tape, inputs)?;
        s.fwd
            .iter()
            .zip(&s.bwd)
            .map(|(&f, &b)| {
                let f = self.fwd.hidden_of(tape, f)?;
                let b = self.bwd.hidden_of(tape, b)?;
                Ok(tape.concat(&[f, b]))
            })
            .collect()
    }
}

/// `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: params.insert(format!("{name}.w"), glorot(rng, output, input)),
            b: params.insert(format!("{name}.b"), Tensor::<T>::zeros(&[output]).with_grad(true)),
            input,
            output,
        }
    }

    pub fn bind<T: Scalar>(params: &ParamSet<T>, name: &str) -> Option<Self> {
        let w = params.id_of(&format!("{name}.w"))?;
        let shape = params.get(w).shape();
        Some(Self { w, b: params.id_of(&format!("{name}.b"))?, input: shape[1], output: shape[0] })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        tape.affine(w, x, b)
    }
}

/// Dropout applied with one mask per sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}
