//! Differentiable occupancy renderer.
//!
//! ```text
//! o1 = relu(P c)             N_p x N_c   signed plane values, zero on the room side
//! o2 = clamp01(1 - W_g o1)   N_s x N_c   convex primitives
//! o3 = clamp01(W_c o2)       1 x N_c     union of primitives
//! ```

use serde::{Deserialize, Serialize};

use crate::diffnet::{Graph, ParamStore, Tensor, Var};
use crate::layout::CoordBatch;
use crate::{Error, Result};

/// Latent shape code; every entry lies in `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCode {
    pub values: Vec<f64>,
}

/// `N_p` lines `a x + b y + c = 0` in normalized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneSet {
    pub planes: Vec<[f64; 3]>,
}

impl HyperplaneSet {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.planes.iter().flatten().copied().collect();
        Tensor::new(&[self.planes.len(), 3], data).expect("finite planes")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.shape() {
            [_, 3] => Ok(HyperplaneSet {
                planes: t.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            }),
            s => Err(Error::ShapeMismatch {
                op: "hyperplane set",
                left: s.to_vec(),
                right: vec![0, 3],
            }),
        }
    }
}

/// Intermediate and final occupancies at the query coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    /// `N_p x N_c`.
    pub o1: Tensor,
    /// `N_s x N_c`.
    pub o2: Tensor,
    /// `N_c`.
    pub o3: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct RenderVars {
    pub o1: Var,
    pub o2: Var,
    /// `[B, N_c]` for batched inputs, `[N_c]` otherwise.
    pub o3: Var,
}

/// Records the renderer on a graph.
///
/// `planes` is `[N_p, 3]` or `[B, N_p, 3]`; `coords` is `[3, N_c]` or `[B, 3, N_c]`;
/// `wg` is `[N_s, N_p]` and `wc` is `[1, N_s]`.
pub fn render_graph(
    g: &mut Graph<'_>,
    planes: Var,
    wg: Var,
    wc: Var,
    coords: Var,
) -> Result<RenderVars> {
    let o1 = g.matmul(planes, coords)?;
    let o1 = g.relu(o1)?;
    let grouped = g.matmul(wg, o1)?;
    let o2 = g.one_minus(grouped)?;
    let o2 = g.clamp01(o2)?;
    let combined = g.matmul(wc, o2)?;
    let o3 = g.clamp01(combined)?;
    let s = g.shape(o3).to_vec();
    let o3 = match s.as_slice() {
        [b, 1, n] => g.reshape(o3, &[*b, *n])?,
        [1, n] => g.reshape(o3, &[*n])?,
        _ => {
            return Err(Error::ShapeMismatch {
                op: "render",
                left: s,
                right: vec![1],
            })
        }
    };
    Ok(RenderVars { o1, o2, o3 })
}

/// Coordinates as a `[3, N_c]` tensor.
pub fn coords_tensor(coords: &CoordBatch) -> Tensor {
    Tensor::new(&[3, coords.count()], coords.as_slice().to_vec()).expect("finite coordinates")
}

/// Evaluates the renderer outside of training.
pub fn render(
    planes: &HyperplaneSet,
    wg: &Tensor,
    wc: &Tensor,
    coords: &CoordBatch,
) -> Result<RenderOutput> {
    let (np, ns) = (planes.len(), wc.len());
    if wg.shape() != [ns, np] {
        return Err(Error::ShapeMismatch {
            op: "render W_g",
            left: wg.shape().to_vec(),
            right: vec![ns, np],
        });
    }
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let p = g.input(planes.to_tensor())?;
    let wgv = g.input(wg.clone())?;
    let wcv = g.input(wc.clone().reshaped(&[1, ns])?)?;
    let c = g.input(coords_tensor(coords))?;
    let v = render_graph(&mut g, p, wgv, wcv, c)?;
    Ok(RenderOutput {
        o1: g.value(v.o1).clone(),
        o2: g.value(v.o2).clone(),
        o3: g.value(v.o3).data().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Point;

    fn square() -> HyperplaneSet {
        HyperplaneSet {
            planes: vec![
                [1.0, 0.0, -0.5],
                [-1.0, 0.0, -0.5],
                [0.0, 1.0, -0.5],
                [0.0, -1.0, -0.5],
            ],
        }
    }

    fn ones(shape: &[usize]) -> Tensor {
        Tensor::filled(shape, 1.0)
    }

    #[test]
    fn unit_square_hand_arithmetic() {
        let coords = CoordBatch::from_points(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ]);
        let out = render(&square(), &ones(&[1, 4]), &ones(&[1]), &coords).unwrap();
        let col = |k: usize| -> Vec<f64> { (0..4).map(|p| out.o1.data()[p * 3 + k]).collect() };
        assert_eq!(col(0), vec![0.0; 4]);
        assert_eq!(col(1), vec![0.5, 0.0, 0.0, 0.0]);
        assert_eq!(col(2), vec![1.5, 0.0, 0.0, 0.0]);
        assert_eq!(out.o2.data(), &[1.0, 0.5, 0.0]);
        assert_eq!(out.o3, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_planes_give_clamped_weight_sum() {
        let planes = HyperplaneSet {
            planes: vec![[0.0; 3]; 5],
        };
        let coords = CoordBatch::from_points(&[Point::new(0.3, -0.7), Point::new(-1.0, 1.0)]);
        for wc in [vec![0.2, 0.3], vec![0.8, 0.9], vec![-0.4, 0.1]] {
            let sum: f64 = wc.iter().sum();
            let wct = Tensor::new(&[2], wc).unwrap();
            let out = render(&planes, &Tensor::filled(&[2, 5], 0.7), &wct, &coords).unwrap();
            assert!(out.o3.iter().all(|&v| v == sum.clamp(0.0, 1.0)));
        }
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        let coords = CoordBatch::from_points(&[Point::new(0.0, 0.0)]);
        assert!(render(&square(), &ones(&[1, 3]), &ones(&[1]), &coords).is_err());
    }
}
