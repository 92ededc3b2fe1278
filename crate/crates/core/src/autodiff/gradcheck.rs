use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Worst-case disagreement between tape gradients and central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst error per checked parameter, in the order they were given.
    pub per_param: Vec<(ParamId, f64)>,
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn evaluate<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    Ok(tape.value(out).item())
}

/// Compares the tape gradient of a scalar function against central finite
/// differences for every coordinate of `params`.
///
/// `f` records its computation on the given tape and returns the scalar
/// output. The store is restored bitwise before returning.
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    epsilon: f64,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let base = tape.value(out).item();
    let again = evaluate(store, &f)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::Determinism {
            first: base,
            second: again,
        });
    }
    let grads = tape.backward(out)?;

    let mut per_param = Vec::with_capacity(params.len());
    let mut max_rel_error = 0.0f64;
    for &id in params {
        let n = store.value(id).len();
        let analytic = grads
            .param(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; n]);
        let mut worst = 0.0f64;
        for k in 0..n {
            let original = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = original + epsilon;
            let plus = evaluate(store, &f);
            store.value_mut(id).data_mut()[k] = original - epsilon;
            let minus = evaluate(store, &f);
            store.value_mut(id).data_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic[k], numeric));
        }
        max_rel_error = max_rel_error.max(worst);
        per_param.push((id, worst));
    }
    Ok(GradCheckReport {
        max_rel_error,
        per_param,
    })
}

/// Names of the ops exercised by [`check_primitive`], indexed by op number.
pub const PRIMITIVE_OPS: [&str; 17] = [
    "matmul",
    "matvec",
    "vecmat",
    "add",
    "add_row",
    "mul",
    "scalar_mul",
    "scale_by",
    "tanh",
    "sigmoid",
    "softmax",
    "concat_vectors",
    "concat_columns",
    "stack",
    "slice",
    "row",
    "cross_entropy",
];

fn random_tensor(rng: &mut impl Rng, shape: Vec<usize>) -> Result<Tensor> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Gradient-checks one primitive on random `m x k`, `k x n`, `k` and `m`
/// shaped inputs, read out through a random linear map. Returns the worst
/// relative error.
pub fn check_primitive(op: usize, m: usize, k: usize, n: usize, seed: u64) -> Result<f64> {
    if op >= PRIMITIVE_OPS.len() || m == 0 || k == 0 || n == 0 {
        return Err(Error::Argument(format!(
            "no primitive case {op} with shape ({m}, {k}, {n})"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let a = store.add("a", random_tensor(&mut rng, vec![m, k])?);
    let b = store.add("b", random_tensor(&mut rng, vec![k, n])?);
    let u = store.add("u", random_tensor(&mut rng, vec![k])?);
    let v = store.add("v", random_tensor(&mut rng, vec![k])?);
    let w = store.add("w", random_tensor(&mut rng, vec![m])?);
    let ids: Vec<ParamId> = store.ids().collect();
    let weights: Vec<f64> = (0..4 * m * k.max(n) + 3 * k + m)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let report = grad_check(&mut store, &ids, 1e-5, |tape, st| {
        let [a, b, u, v, w] = [a, b, u, v, w].map(|id| tape.param(st, id));
        let readout = |tape: &mut Tape, x: Var| -> Result<Var> {
            let len = tape.value(x).len();
            let r = tape.constant(Tensor::new(
                tape.value(x).shape().to_vec(),
                weights[..len].to_vec(),
            )?);
            let p = tape.mul(x, r)?;
            Ok(tape.sum(p))
        };
        let out = match op {
            0 => tape.matmul(a, b)?,
            1 => tape.matvec(a, u)?,
            2 => tape.vecmat(w, a)?,
            3 => tape.add(u, v)?,
            4 => tape.add_row(a, u)?,
            5 => tape.mul(u, v)?,
            6 => tape.scalar_mul(u, -1.7),
            7 => tape.scale_by(u, w, m - 1)?,
            8 => tape.tanh(a),
            9 => tape.sigmoid(a),
            10 => tape.softmax(u)?,
            11 => tape.concat(&[u, w, v], 0)?,
            12 => tape.concat(&[a, a], 1)?,
            13 => tape.stack(&[u, v, u])?,
            14 => tape.slice(u, k / 2, k - k / 2)?,
            15 => tape.row(a, m - 1)?,
            _ => {
                let p = tape.softmax(u)?;
                let mut target = vec![0.0; k];
                target[k - 1] = 1.0;
                return tape.cross_entropy(p, &Tensor::vector(target));
            }
        };
        readout(tape, out)
    })?;
    Ok(report.max_rel_error)
}

/// Worst error per primitive over a few fixed shapes.
pub fn check_all_primitives(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    const SHAPES: [(usize, usize, usize); 3] = [(1, 1, 1), (3, 4, 2), (5, 2, 6)];
    PRIMITIVE_OPS
        .iter()
        .enumerate()
        .map(|(op, &name)| {
            let mut worst = 0.0f64;
            for (i, &(m, k, n)) in SHAPES.iter().enumerate() {
                worst = worst.max(check_primitive(op, m, k, n, seed + i as u64)?);
            }
            Ok((name, worst))
        })
        .collect()
}
