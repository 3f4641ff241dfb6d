//! Central-difference verification of analytic gradients, in `f64`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::tensor::Tensor;

/// Outcome of one gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name of the worst coordinate's tensor and its flat index.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: (f64, f64),
}

impl GradCheckReport {
    fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            worst: None,
            coords_checked: 0,
            worst_values: (0.0, 0.0),
        }
    }

    fn observe(&mut self, name: &str, idx: usize, analytic: f64, numeric: f64) {
        let err = relative_error(analytic, numeric);
        self.coords_checked += 1;
        if err > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(err);
            self.worst = Some((name.to_string(), idx));
            self.worst_values = (analytic, numeric);
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.coords_checked += other.coords_checked;
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
            self.worst_values = other.worst_values;
        }
    }
}

/// Derivatives smaller than this are compared on an absolute scale, so
/// exactly-zero gradients are not judged against rounding noise.
pub const GRADIENT_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR)
}

fn scalar_of(g: &Graph<'_, f64>, v: Var) -> Result<f64> {
    let t = g.value(v);
    if t.len() != 1 {
        return Err(Error::Config(format!(
            "objective must be scalar, got dims {:?}",
            t.dims()
        )));
    }
    let s = t[0];
    if !s.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    Ok(s)
}

/// Checks `d f / d x` where `f` builds a scalar from the leaf it is given.
/// `coords` restricts the check to a subset of flat indices.
pub fn grad_check<F>(
    f: F,
    x: &Tensor<f64>,
    h: f64,
    coords: Option<&[usize]>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_, f64>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let leaf = g.leaf(x.clone());
    let out = f(&mut g, leaf)?;
    scalar_of(&g, out)?;
    let analytic = g.backward(out).wrt(leaf, x.dims());
    drop(g);

    let eval = |t: Tensor<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let leaf = g.leaf(t);
        let out = f(&mut g, leaf)?;
        scalar_of(&g, out)
    };
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut report = GradCheckReport::empty();
    for &i in coords {
        let mut plus = x.clone();
        plus[i] += h;
        let mut minus = x.clone();
        minus[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        report.observe("x", i, analytic[i], numeric);
    }
    Ok(report)
}

/// Checks gradients of `f` with respect to stored parameters, sampling up to
/// `per_param` coordinates from each trainable tensor.
pub fn grad_check_params<F>(
    store: &mut ParamStore<f64>,
    f: F,
    h: f64,
    per_param: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<Var>,
{
    let analytic: Vec<Option<Tensor<f64>>> = {
        let mut g = Graph::with_params(store);
        let out = f(&mut g)?;
        scalar_of(&g, out)?;
        let grads = g.backward(out);
        store
            .iter()
            .map(|(id, _, _)| grads.param(id).cloned())
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::with_params(store);
        let out = f(&mut g)?;
        scalar_of(&g, out)
    };
    let mut report = GradCheckReport::empty();
    let ids: Vec<_> = store
        .iter()
        .filter(|(_, _, p)| p.trainable)
        .map(|(id, name, p)| (id, name.to_string(), p.value.len()))
        .collect();
    for (id, name, n) in ids {
        let picks = sample(&mut rng, n, per_param.min(n)).into_vec();
        for i in picks {
            let orig = store.get(id).value[i];
            store.get_mut(id).value[i] = orig + h;
            let fp = eval(store)?;
            store.get_mut(id).value[i] = orig - h;
            let fm = eval(store)?;
            store.get_mut(id).value[i] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[id.index()].as_ref().map_or(0.0, |t| t[i]);
            report.observe(&name, i, a, numeric);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn quadratic() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let r = grad_check(
            |g, x| {
                let sq = ops::mul(g, x, x)?;
                Ok(ops::sum_all(g, sq))
            },
            &x,
            1e-5,
            None,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let r = grad_check(
            |g, x| Ok(ops::weighted_sum(g, x, Tensor::zeros(&[3]))?),
            &x,
            1e-4,
            None,
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let x = Tensor::new(&[1], vec![1.0]).unwrap();
        let r = grad_check(|g, x| Ok(ops::scale(g, x, f64::INFINITY)), &x, 1e-4, None);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
