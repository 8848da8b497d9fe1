//! Hyperplane generator: shape code to `N_p` lines `ax + by + c = 0`.

use rand::Rng;

use crate::diffnet::{CustomOp, Dense, Graph, ParamStore, Tensor, Var};
use crate::Result;

/// MLP from the code to plane parameters.
///
/// Unconstrained mode emits `N_p x 3` values directly. Manhattan mode emits one
/// global angle `theta` followed by `(axis logit, scale, offset)` per plane; the
/// plane is `scale * n + offset` with `n = (cos theta, sin theta)` for a
/// non-negative axis logit and `(-sin theta, cos theta)` otherwise, so all
/// normals are parallel or orthogonal. The sign of `scale` picks the normal
/// direction and its magnitude the sharpness of the rendered boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGenerator {
    pub layers: Vec<Dense>,
    pub n_planes: usize,
    pub manhattan: bool,
}

impl PlaneGenerator {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        code_dim: usize,
        hidden: &[usize],
        n_planes: usize,
        manhattan: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let out = if manhattan {
            1 + 3 * n_planes
        } else {
            3 * n_planes
        };
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut d = code_dim;
        for (i, &w) in hidden.iter().chain(std::iter::once(&out)).enumerate() {
            layers.push(Dense::new(store, &format!("{prefix}.fc{i}"), d, w, rng)?);
            d = w;
        }
        Ok(PlaneGenerator {
            layers,
            n_planes,
            manhattan,
        })
    }

    /// `[B, D]` codes to `[B, N_p, 3]` planes.
    pub fn forward(&self, g: &mut Graph<'_>, code: Var) -> Result<Var> {
        let batch = g.shape(code)[0];
        let mut h = code;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h)?;
            if i + 1 < self.layers.len() {
                h = g.relu(h)?;
            }
        }
        if self.manhattan {
            manhattan_planes(g, h, self.n_planes)
        } else {
            g.reshape(h, &[batch, self.n_planes, 3])
        }
    }
}

struct ManhattanPlanes {
    n_planes: usize,
}

fn normal(theta: f64, axis_logit: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = theta.sin_cos();
    if axis_logit >= 0.0 {
        ((c, s), (-s, c))
    } else {
        ((-s, c), (-c, -s))
    }
}

impl CustomOp for ManhattanPlanes {
    fn name(&self) -> &'static str {
        "manhattan_planes"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let raw = inputs[0].data();
        let width = 1 + 3 * self.n_planes;
        let mut out = vec![0.0; raw.len()];
        for (b, (row, dr)) in raw.chunks(width).zip(out.chunks_mut(width)).enumerate() {
            let theta = row[0];
            for p in 0..self.n_planes {
                let (axis, scale) = (row[1 + 3 * p], row[2 + 3 * p]);
                let ((nx, ny), (dnx, dny)) = normal(theta, axis);
                let gp = &grad[(b * self.n_planes + p) * 3..][..3];
                dr[0] += scale * (dnx * gp[0] + dny * gp[1]);
                dr[2 + 3 * p] = nx * gp[0] + ny * gp[1];
                dr[3 + 3 * p] = gp[2];
            }
        }
        vec![Some(out)]
    }

    fn kink_pattern(&self, inputs: &[&Tensor]) -> Vec<u8> {
        let width = 1 + 3 * self.n_planes;
        inputs[0]
            .data()
            .chunks(width)
            .flat_map(|row| (0..self.n_planes).map(move |p| u8::from(row[1 + 3 * p] >= 0.0)))
            .collect()
    }
}

/// `[B, 1 + 3 N_p]` raw generator output to `[B, N_p, 3]` Manhattan planes.
pub fn manhattan_planes(g: &mut Graph<'_>, raw: Var, n_planes: usize) -> Result<Var> {
    let shape = g.shape(raw).to_vec();
    let width = 1 + 3 * n_planes;
    if shape.len() != 2 || shape[1] != width {
        return Err(crate::Error::ShapeMismatch {
            op: "manhattan_planes",
            left: shape,
            right: vec![width],
        });
    }
    let mut planes = Vec::with_capacity(shape[0] * n_planes * 3);
    for row in g.value(raw).data().chunks(width) {
        for p in 0..n_planes {
            let ((nx, ny), _) = normal(row[0], row[1 + 3 * p]);
            let scale = row[2 + 3 * p];
            planes.extend_from_slice(&[scale * nx, scale * ny, row[3 + 3 * p]]);
        }
    }
    let out = Tensor::new(&[shape[0], n_planes, 3], planes)?;
    g.custom(&[raw], out, Box::new(ManhattanPlanes { n_planes }))
}
