//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Entries whose kink pattern changes within this distance are excluded.
    pub kink_margin: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub tolerance: f64,
    /// Random subset of entries per tensor; `None` checks all.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            kink_margin: 1e-4,
            floor: 1e-6,
            tolerance: 1e-4,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub excluded: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn evaluate<F>(store: &ParamStore, build: &F) -> Result<(f64, Vec<u8>)>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = build(&mut g)?;
    Ok((g.value(loss).item(), g.kink_pattern()))
}

/// Compares analytic gradients of the scalar built by `build` against central
/// differences for every trainable parameter in `store`.
///
/// `store` is perturbed in place and restored before returning.
pub fn grad_check<F>(
    store: &mut ParamStore,
    build: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let grads = {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        g.backward(loss)?
    };
    let (_, base_pattern) = evaluate(store, &build)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ids: Vec<ParamId> = store.ids().filter(|&id| store.get(id).trainable).collect();
    let mut params = Vec::with_capacity(ids.len());
    for id in ids {
        let len = store.value(id).len();
        let analytic: Vec<f64> = grads
            .param(id)
            .map_or_else(|| vec![0.0; len], |t| t.data().to_vec());
        let entries: Vec<usize> = match opts.max_entries_per_param {
            Some(k) if k < len => {
                let mut v = sample(&mut rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let mut check = ParamCheck {
            name: store.get(id).name.clone(),
            checked: 0,
            excluded: 0,
            max_rel_error: 0.0,
            worst_index: None,
            passed: true,
        };
        for k in entries {
            let orig = store.value(id).data()[k];
            let at = |x: f64, store: &mut ParamStore| -> Result<(f64, Vec<u8>)> {
                store.get_mut(id).value.data_mut()[k] = x;
                evaluate(store, &build)
            };
            let lo_kink = at(orig - opts.kink_margin, store);
            let hi_kink = at(orig + opts.kink_margin, store);
            let plus = at(orig + opts.step, store);
            let minus = at(orig - opts.step, store);
            store.get_mut(id).value.data_mut()[k] = orig;
            // Overflow near a perturbed point counts as leaving the smooth region.
            let (Ok(lo), Ok(hi), Ok(plus), Ok(minus)) = (lo_kink, hi_kink, plus, minus) else {
                check.excluded += 1;
                continue;
            };
            if [&lo.1, &hi.1, &plus.1, &minus.1]
                .iter()
                .any(|p| **p != base_pattern)
            {
                check.excluded += 1;
                continue;
            }
            let numeric = (plus.0 - minus.0) / (2.0 * opts.step);
            let rel = relative_error(analytic[k], numeric, opts.floor);
            check.checked += 1;
            if rel > check.max_rel_error || check.worst_index.is_none() {
                check.max_rel_error = check.max_rel_error.max(rel);
                check.worst_index = Some(k);
            }
        }
        check.passed = check.max_rel_error <= opts.tolerance;
        params.push(check);
    }
    let max_rel_error = params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        checked: params.iter().map(|p| p.checked).sum(),
        excluded: params.iter().map(|p| p.excluded).sum(),
        passed: params.iter().all(|p| p.passed),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::layers::{Conv2d, Dense};
    use crate::diffnet::Tensor;
    use rand::Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    fn strict() -> GradCheckOptions {
        GradCheckOptions {
            tolerance: 1e-6,
            ..Default::default()
        }
    }

    #[test]
    fn identity_layer_has_zero_error() {
        let mut store = ParamStore::new();
        let x = store
            .add("x", Tensor::new(&[3], vec![0.5, -2.0, 4.0]).unwrap())
            .unwrap();
        // dyadic step keeps the central difference exact
        let opts = GradCheckOptions {
            step: 2f64.powi(-16),
            ..strict()
        };
        let r = grad_check(
            &mut store,
            |g| {
                let v = g.param(x);
                g.sum(v)
            },
            &opts,
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn clamp_kink_entries_are_excluded() {
        let mut store = ParamStore::new();
        let x = store
            .add("x", Tensor::new(&[3], vec![0.0, 0.5, 1.0]).unwrap())
            .unwrap();
        let r = grad_check(
            &mut store,
            |g| {
                let v = g.param(x);
                let c = g.clamp01(v)?;
                g.sum(c)
            },
            &strict(),
        )
        .unwrap();
        assert_eq!((r.checked, r.excluded), (1, 2));
        assert!(r.passed);
    }

    #[test]
    fn elementwise_primitives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let a = store
            .add("a", random_tensor(&mut rng, &[4, 5], -1.5, 1.5))
            .unwrap();
        let b = store
            .add("b", random_tensor(&mut rng, &[4, 5], -1.5, 1.5))
            .unwrap();
        let r = grad_check(
            &mut store,
            |g| {
                let (a, b) = (g.param(a), g.param(b));
                let s = g.sigmoid(a)?;
                let r = g.relu(b)?;
                let c = g.clamp01(a)?;
                let om = g.one_minus(c)?;
                let ab = g.abs(b)?;
                let m = g.mul(s, r)?;
                let sn = g.sin(a)?;
                let cs = g.cos(b)?;
                let p = g.add(m, om)?;
                let q = g.sub(ab, sn)?;
                let q = g.mul(q, cs)?;
                let q = g.scale(q, 0.7)?;
                let q = g.add_scalar(q, 0.3)?;
                let l1 = g.mse(p, q)?;
                let l2 = g.l1(a, b)?;
                let l3 = g.mean(q)?;
                let l = g.add(l1, l2)?;
                g.add(l, l3)
            },
            &strict(),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.checked > 20);
    }

    #[test]
    fn dense_conv_pool_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let c1 = Conv2d::new(&mut store, "c1", 2, 3, 2, &mut rng).unwrap();
        let c2 = Conv2d::new(&mut store, "c2", 3, 4, 1, &mut rng).unwrap();
        let d = Dense::new(&mut store, "d", 4, 2, &mut rng).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            let t = random_tensor(&mut rng, store.value(id).shape(), -0.5, 0.5);
            store.get_mut(id).value = t;
        }
        let x = random_tensor(&mut rng, &[2, 2, 7, 6], -1.0, 1.0);
        let target = random_tensor(&mut rng, &[2, 2], 0.0, 1.0);
        let r = grad_check(
            &mut store,
            |g| {
                let xi = g.input(x.clone())?;
                let h = c1.forward(g, xi)?;
                let h = g.relu(h)?;
                let h = c2.forward(g, h)?;
                let h = g.global_avg_pool(h)?;
                let y = d.forward(g, h)?;
                let y = g.sigmoid(y)?;
                let t = g.input(target.clone())?;
                g.mse(y, t)
            },
            &strict(),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn batched_matmul_and_reshape_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let p = store
            .add("p", random_tensor(&mut rng, &[3, 4, 3], -1.0, 1.0))
            .unwrap();
        let c = store
            .add("c", random_tensor(&mut rng, &[3, 5], -1.0, 1.0))
            .unwrap();
        let bias = store
            .add("bias", random_tensor(&mut rng, &[5], -1.0, 1.0))
            .unwrap();
        let r = grad_check(
            &mut store,
            |g| {
                let (p, c, bias) = (g.param(p), g.param(c), g.param(bias));
                let y = g.matmul(p, c)?;
                let y = g.add_bias(y, bias)?;
                let y = g.reshape(y, &[12, 5])?;
                let y = g.mul(y, y)?;
                g.sum(y)
            },
            &strict(),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
