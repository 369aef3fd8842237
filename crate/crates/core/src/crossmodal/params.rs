//! Named-tensor traversal used by the optimizer, checkpoints and gradient checks.

use ndarray::{Array1, Array2};

use crate::Scalar;

/// Callback receiving a tensor's dotted name, shape and row-major data.
pub type Visitor<'a, T> = dyn FnMut(&str, &[usize], &[T]) + 'a;
pub type VisitorMut<'a, T> = dyn FnMut(&str, &[usize], &mut [T]) + 'a;

/// A tree of named parameter tensors. Traversal order is fixed and shared by
/// `visit` and `visit_mut`, so two values of the same shape can be zipped.
pub trait Params<T: Scalar> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>);
    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>);
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<T: Scalar> Params<T> for Array1<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        f(prefix, self.shape(), self.as_slice().expect("standard layout"));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        let shape = self.shape().to_vec();
        f(prefix, &shape, self.as_slice_mut().expect("standard layout"));
    }
}

impl<T: Scalar> Params<T> for Array2<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        f(prefix, self.shape(), self.as_slice().expect("standard layout"));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        let shape = self.shape().to_vec();
        f(prefix, &shape, self.as_slice_mut().expect("standard layout"));
    }
}

impl<T: Scalar, P: Params<T>> Params<T> for Vec<P> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        for (i, p) in self.iter().enumerate() {
            p.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        for (i, p) in self.iter_mut().enumerate() {
            p.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

/// Describes one tensor of a parameter tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

pub fn tensor_specs<T: Scalar>(p: &impl Params<T>) -> Vec<TensorSpec> {
    let mut out = Vec::new();
    p.visit("", &mut |name, shape, _| {
        out.push(TensorSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
        })
    });
    out
}

pub fn param_count<T: Scalar>(p: &impl Params<T>) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, _, data| n += data.len());
    n
}

/// Flattened copy of every tensor in traversal order.
pub fn flatten<T: Scalar>(p: &impl Params<T>) -> Vec<T> {
    let mut out = Vec::new();
    p.visit("", &mut |_, _, data| out.extend_from_slice(data));
    out
}

pub fn fill<T: Scalar>(p: &mut impl Params<T>, value: T) {
    p.visit_mut("", &mut |_, _, data| data.iter_mut().for_each(|x| *x = value));
}

/// `p += alpha * other`, tensor by tensor.
pub fn axpy<T: Scalar, P: Params<T>>(p: &mut P, alpha: T, other: &P) {
    let flat = flatten(other);
    let mut offset = 0;
    p.visit_mut("", &mut |_, _, data| {
        let n = data.len();
        for (x, &g) in data.iter_mut().zip(&flat[offset..offset + n]) {
            *x += alpha * g;
        }
        offset += n;
    });
}

pub fn scale<T: Scalar>(p: &mut impl Params<T>, alpha: T) {
    p.visit_mut("", &mut |_, _, data| data.iter_mut().for_each(|x| *x *= alpha));
}

pub fn l2_norm<T: Scalar>(p: &impl Params<T>) -> T {
    let mut acc = T::zero();
    p.visit("", &mut |_, _, data| {
        for &x in data {
            acc += x * x;
        }
    });
    acc.sqrt()
}

/// Zero-valued tree with the same shapes as `p`.
pub fn zeros_like<T: Scalar, P: Params<T> + Clone>(p: &P) -> P {
    let mut z = p.clone();
    fill(&mut z, T::zero());
    z
}
