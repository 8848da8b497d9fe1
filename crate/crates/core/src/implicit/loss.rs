//! Reconstruction and weight-regularization losses.
//!
//! - occupancy: squared error between `o3` and the sampled truth, averaged over
//!   batch and coordinates so the scale is independent of both;
//! - grouping: `sum relu(t - 1) + sum relu(-t)` over `W_g`, zero inside `[0, 1]`;
//! - combining: `sum |t - 1|` over `W_c`.

use crate::diffnet::{Graph, Var};
use crate::Result;

pub fn occupancy_loss(g: &mut Graph<'_>, o3: Var, truth: Var) -> Result<Var> {
    g.mse(o3, truth)
}

pub fn grouping_loss(g: &mut Graph<'_>, wg: Var) -> Result<Var> {
    let above = g.add_scalar(wg, -1.0)?;
    let above = g.relu(above)?;
    let below = g.scale(wg, -1.0)?;
    let below = g.relu(below)?;
    let a = g.sum(above)?;
    let b = g.sum(below)?;
    g.add(a, b)
}

pub fn combining_loss(g: &mut Graph<'_>, wc: Var) -> Result<Var> {
    let d = g.add_scalar(wc, -1.0)?;
    let d = g.abs(d)?;
    g.sum(d)
}

/// Nodes of the unit-weight total objective.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub total: Var,
    pub occupancy: Var,
    pub grouping: Var,
    pub combining: Var,
}

pub fn total_objective(
    g: &mut Graph<'_>,
    o3: Var,
    truth: Var,
    wg: Var,
    wc: Var,
) -> Result<Objective> {
    let occupancy = occupancy_loss(g, o3, truth)?;
    let grouping = grouping_loss(g, wg)?;
    let combining = combining_loss(g, wc)?;
    let partial = g.add(occupancy, grouping)?;
    let total = g.add(partial, combining)?;
    Ok(Objective {
        total,
        occupancy,
        grouping,
        combining,
    })
}

/// Plain sum of squared differences (no averaging).
pub fn occupancy_sum(o3: &[f64], truth: &[f64]) -> f64 {
    o3.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn grouping_value(wg: &[f64]) -> f64 {
    wg.iter().map(|&t| (t - 1.0).max(0.0) + (-t).max(0.0)).sum()
}

pub fn combining_value(wc: &[f64]) -> f64 {
    wc.iter().map(|&t| (t - 1.0).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{ParamStore, Tensor};

    fn scalar_of(data: &[f64], f: impl Fn(&mut Graph<'_>, Var) -> Result<Var>) -> (f64, Vec<f64>) {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g
            .input(Tensor::new(&[data.len()], data.to_vec()).unwrap())
            .unwrap();
        let y = f(&mut g, x).unwrap();
        let grads = g.backward(y).unwrap();
        (g.value(y).item(), grads.wrt(x).unwrap().to_vec())
    }

    #[test]
    fn grouping_penalizes_outside_unit_interval() {
        assert_eq!(scalar_of(&[0.0, 0.3, 1.0], grouping_loss).0, 0.0);
        assert!((scalar_of(&[1.5], grouping_loss).0 - 0.5).abs() < 1e-15);
        assert!((scalar_of(&[-0.3], grouping_loss).0 - 0.3).abs() < 1e-15);
        assert_eq!(
            grouping_value(&[1.5, -0.3, 0.5]),
            scalar_of(&[1.5, -0.3, 0.5], grouping_loss).0
        );
    }

    #[test]
    fn combining_examples_and_sign_gradient() {
        assert_eq!(scalar_of(&[1.0, 1.0], combining_loss).0, 0.0);
        let (v, grad) = scalar_of(&[0.4, 0.7], combining_loss);
        assert_eq!(v, 0.9);
        assert_eq!(grad, vec![-1.0, -1.0]);
        assert_eq!(scalar_of(&[1.2], combining_loss).1, vec![1.0]);
    }

    #[test]
    fn occupancy_offset_example() {
        let truth: Vec<f64> = (0..100).map(|k| (k % 2) as f64 * 0.5).collect();
        let o3: Vec<f64> = truth.iter().map(|t| t + 0.1).collect();
        assert!((occupancy_sum(&o3, &truth) - 1.0).abs() < 1e-12);
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::new(&[1, 100], o3).unwrap()).unwrap();
        let b = g.input(Tensor::new(&[1, 100], truth).unwrap()).unwrap();
        let l = occupancy_loss(&mut g, a, b).unwrap();
        assert!((g.value(l).item() - 0.01).abs() < 1e-12);
    }
}
