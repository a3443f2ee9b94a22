use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-6;

/// Largest relative disagreement between the reverse-mode gradient of a
/// scalar function and central differences
/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
///
/// The relative error of each coordinate divides by
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several inputs at once; all are differentiated.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if inputs.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("grad_check input".into()));
    }
    let eval = |ins: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out);
        if v.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "grad_check needs a scalar function, got shape {:?}",
                v.shape()
            )));
        }
        Ok(v.item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let f0 = g.value(out);
    if f0.len() != 1 || !f0.item().is_finite() {
        return Err(Error::NonFinite("grad_check f(x)".into()));
    }
    let grads = g.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (which, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).expect("param leaf has a gradient");
        for i in 0..inputs[which].len() {
            let orig = inputs[which].data()[i];
            probe[which].data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe[which].data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe[which].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
