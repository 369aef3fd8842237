//! Central finite-difference gradient checking over a parameter tree.

use super::params::{flatten, tensor_specs, Params};
use crate::Scalar;

/// Worst disagreement found by [`check_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Tensor name and flat offset of the worst element.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps structurally-zero
/// gradients from dividing noise by noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn set_element<T: Scalar, P: Params<T>>(p: &mut P, index: usize, value: T) {
    let mut offset = 0;
    p.visit_mut("", &mut |_, _, data| {
        if index >= offset && index < offset + data.len() {
            data[index - offset] = value;
        }
        offset += data.len();
    });
}

/// Compares `analytic` (flattened in traversal order) against central
/// differences of `loss` at every element of `params`.
pub fn check_gradients<T, P>(
    params: &P,
    analytic: &P,
    step: f64,
    floor: f64,
    loss: impl Fn(&P) -> T,
) -> GradCheckReport
where
    T: Scalar,
    P: Params<T> + Clone,
{
    let base = flatten(params);
    let grads = flatten(analytic);
    let specs = tensor_specs(params);
    let mut report = GradCheckReport {
        checked: base.len(),
        max_rel_err: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    let mut probe = params.clone();
    for (i, &x) in base.iter().enumerate() {
        set_element(&mut probe, i, x + T::of(step));
        let plus = loss(&probe).as_f64();
        set_element(&mut probe, i, x - T::of(step));
        let minus = loss(&probe).as_f64();
        set_element(&mut probe, i, x);
        let numeric = (plus - minus) / (2.0 * step);
        let a = grads[i].as_f64();
        let err = relative_error(a, numeric, floor);
        if err > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = err;
            report.worst = Some(locate(&specs, i));
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    report
}

fn locate(specs: &[super::params::TensorSpec], mut index: usize) -> (String, usize) {
    for spec in specs {
        let len: usize = spec.shape.iter().product();
        if index < len {
            return (spec.name.clone(), index);
        }
        index -= len;
    }
    unreachable!("index beyond parameter count")
}
