use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Handle to a tensor owned by a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of model tensors.
///
/// Insertion order is stable and defines the checkpoint layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    /// Registers a tensor under `name`. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Moves accumulated gradients into the trainable tensors. Trainable
    /// tensors that received no gradient get an explicit zero gradient.
    pub fn load_grads(&mut self, grads: &Gradients<T>) -> Result<()> {
        if grads.bufs.len() != self.tensors.len() {
            return Err(Error::contract(format!(
                "gradient set sized for {} params, model has {}",
                grads.bufs.len(),
                self.tensors.len()
            )));
        }
        for (tensor, buf) in self.tensors.iter_mut().zip(&grads.bufs) {
            if !tensor.requires_grad() {
                continue;
            }
            let g = if buf.is_empty() { vec![T::zero(); tensor.len()] } else { buf.clone() };
            tensor.set_grad(g)?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for t in &mut self.tensors {
            t.clear_grad();
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    /// Same names, same shapes and bitwise-identical values.
    pub fn bitwise_eq(&self, other: &Self) -> bool
    where
        T: PartialEq,
    {
        self.names == other.names
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.shape() == b.shape()
                    && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits_u64() == y.to_bits_u64())
            })
    }
}

/// Per-parameter gradient accumulators, allocated on first write.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub(crate) bufs: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn for_params(params: &ParamSet<T>) -> Self {
        Self { bufs: vec![Vec::new(); params.len()] }
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        let b = &self.bufs[id.0];
        (!b.is_empty()).then_some(b.as_slice())
    }

    pub(crate) fn buf_mut(&mut self, id: ParamId, len: usize) -> &mut Vec<T> {
        let b = &mut self.bufs[id.0];
        if b.is_empty() {
            b.resize(len, T::zero());
        }
        b
    }

    /// Multiplies every accumulated gradient by `factor` (batch averaging).
    pub fn scale(&mut self, factor: T) {
        for b in &mut self.bufs {
            b.iter_mut().for_each(|g| *g = *g * factor);
        }
    }

    pub fn reset(&mut self) {
        for b in &mut self.bufs {
            b.iter_mut().for_each(|g| *g = T::zero());
        }
    }
}

trait BitsU64 {
    fn to_bits_u64(&self) -> u64;
}

impl<T: Scalar> BitsU64 for T {
    fn to_bits_u64(&self) -> u64 {
        // f32 widens exactly to f64, so comparing f64 bit patterns is exact.
        self.as_f64().to_bits()
    }
}
