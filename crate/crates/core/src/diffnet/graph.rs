//! Tensor-level reverse-mode tape.
//!
//! A [`Graph`] records every operation of one forward pass. Parameter nodes
//! borrow their values from a [`ParamStore`], so building a graph never copies
//! weights. [`Graph::backward`] returns a [`Gradients`] table holding the
//! gradient of the scalar output with respect to every node and parameter.
//!
//! Non-differentiable points use subgradient 0: `relu` at 0, `clamp01` at 0
//! and 1, `abs` at 0.

use rayon::prelude::*;

use super::kernels::{col2im, gemm, im2col, ConvGeom, MatRef, KERNEL};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// An operation defined outside this module.
///
/// The caller computes the forward value; the op supplies the vector-Jacobian
/// product for each input.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>>;

    /// Discrete regime of every non-smooth decision, used to detect kinks
    /// during gradient checking.
    fn kink_pattern(&self, _inputs: &[&Tensor]) -> Vec<u8> {
        Vec::new()
    }
}

enum Op {
    Input,
    Param(ParamId),
    MatMul {
        a: Var,
        b: Var,
    },
    AddBias {
        x: Var,
        bias: Var,
    },
    Conv2d {
        x: Var,
        w: Var,
        bias: Var,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    GlobalAvgPool(Var),
    Reshape(Var),
    Relu(Var),
    Sigmoid(Var),
    Clamp01(Var),
    OneMinus(Var),
    Abs(Var),
    Sin(Var),
    Cos(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    L1(Var, Var),
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Largest `f64` strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.value(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite {
                context: format!("forward pass of {name}"),
            });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, "input")
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Tensor::zeros(&[0]),
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
        Error::ShapeMismatch {
            op,
            left: a.to_vec(),
            right: b.to_vec(),
        }
    }

    /// Matrix product. Either side may carry a leading batch dimension:
    /// `[m,k] x [k,n]`, `[B,m,k] x [k,n]`, `[m,k] x [B,k,n]` or `[B,m,k] x [B,k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let dims = matmul_dims(&sa, &sb).ok_or_else(|| Self::mismatch("matmul", &sa, &sb))?;
        let MatmulDims {
            batch,
            m,
            k,
            n,
            a_batched,
            b_batched,
        } = dims;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; batch.unwrap_or(1) * m * n];
        out.par_chunks_mut((m * n).max(1))
            .enumerate()
            .for_each(|(i, c)| {
                let ai = if a_batched {
                    &av[i * m * k..(i + 1) * m * k]
                } else {
                    av
                };
                let bi = if b_batched {
                    &bv[i * k * n..(i + 1) * k * n]
                } else {
                    bv
                };
                gemm(
                    1.0,
                    MatRef::row_major(ai, m, k),
                    MatRef::row_major(bi, k, n),
                    0.0,
                    c,
                );
            });
        let shape: Vec<usize> = match batch {
            Some(bs) => vec![bs, m, n],
            None => vec![m, n],
        };
        self.push(Tensor::new(&shape, out)?, Op::MatMul { a, b }, "matmul")
    }

    /// Adds a vector along the last dimension.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sb = self.shape(bias).to_vec();
        if sb.len() != 1 || sx.last() != Some(&sb[0]) {
            return Err(Self::mismatch("add_bias", &sx, &sb));
        }
        let n = sb[0];
        let bv = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, b) in row.iter_mut().zip(bv) {
                *o += b;
            }
        }
        self.push(Tensor::new(&sx, out)?, Op::AddBias { x, bias }, "add_bias")
    }

    /// 3x3 convolution over `[B, C, H, W]` with weights `[Cout, C, 3, 3]` and bias `[Cout]`.
    pub fn conv2d(&mut self, x: Var, w: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let sb = self.shape(bias).to_vec();
        if sx.len() != 4 || sw.len() != 4 || sw[1] != sx[1] || sw[2] != KERNEL || sw[3] != KERNEL {
            return Err(Self::mismatch("conv2d", &sx, &sw));
        }
        if sb != [sw[0]] {
            return Err(Self::mismatch("conv2d bias", &sb, &sw[..1]));
        }
        if stride == 0 || sx[2] + 2 * pad < KERNEL || sx[3] + 2 * pad < KERNEL {
            return Err(Self::mismatch("conv2d geometry", &sx, &[stride, pad]));
        }
        let (batch, cout) = (sx[0], sw[0]);
        let geom = ConvGeom {
            channels: sx[1],
            height: sx[2],
            width: sx[3],
            stride,
            pad,
        };
        let (rows, hw) = (geom.col_rows(), geom.col_cols());
        let in_len = sx[1] * sx[2] * sx[3];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(bias).data();
        let mut cols = vec![0.0; batch * rows * hw];
        let mut out = vec![0.0; batch * cout * hw];
        cols.par_chunks_mut(rows * hw)
            .zip(out.par_chunks_mut(cout * hw))
            .enumerate()
            .for_each(|(i, (col, o))| {
                im2col(&xv[i * in_len..(i + 1) * in_len], geom, col);
                for (c, chunk) in o.chunks_mut(hw).enumerate() {
                    chunk.fill(bv[c]);
                }
                gemm(
                    1.0,
                    MatRef::row_major(wv, cout, rows),
                    MatRef::row_major(col, rows, hw),
                    1.0,
                    o,
                );
            });
        let shape = [batch, cout, geom.out_height(), geom.out_width()];
        self.push(
            Tensor::new(&shape, out)?,
            Op::Conv2d {
                x,
                w,
                bias,
                geom,
                cols,
            },
            "conv2d",
        )
    }

    /// `[B, C, H, W] -> [B, C]` spatial mean.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Self::mismatch("global_avg_pool", &s, &[0, 0, 0, 0]));
        }
        let hw = s[2] * s[3];
        let out: Vec<f64> = self
            .value(x)
            .data()
            .chunks(hw)
            .map(|c| c.iter().sum::<f64>() / hw as f64)
            .collect();
        self.push(
            Tensor::new(&[s[0], s[1]], out)?,
            Op::GlobalAvgPool(x),
            "global_avg_pool",
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshaped(shape)?;
        self.push(v, Op::Reshape(x), "reshape")
    }

    /// `[B, ...] -> [B, prod(...)]`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let b = s.first().copied().unwrap_or(1);
        let rest: usize = s.iter().skip(1).product();
        self.reshape(x, &[b, rest])
    }

    fn unary(
        &mut self,
        x: Var,
        f: impl Fn(f64) -> f64 + Sync,
        op: Op,
        name: &'static str,
    ) -> Result<Var> {
        let t = self.value(x);
        let data: Vec<f64> = t.data().iter().map(|&v| f(v)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::new(&shape, data)?, op, name)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.max(0.0), Op::Relu(x), "relu")
    }

    /// Logistic sigmoid; outputs stay strictly inside `(0, 1)`.
    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, sigmoid, Op::Sigmoid(x), "sigmoid")
    }

    /// `min(max(x, 0), 1)`.
    pub fn clamp01(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.clamp(0.0, 1.0), Op::Clamp01(x), "clamp01")
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| 1.0 - v, Op::OneMinus(x), "one_minus")
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::abs, Op::Abs(x), "abs")
    }

    pub fn sin(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::sin, Op::Sin(x), "sin")
    }

    pub fn cos(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::cos, Op::Cos(x), "cos")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary(x, move |v| v * s, Op::Scale(x, s), "scale")
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary(x, move |v| v + s, Op::AddScalar(x), "add_scalar")
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
        name: &'static str,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::mismatch(name, ta.shape(), tb.shape()));
        }
        let data: Vec<f64> = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor::new(&shape, data)?, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len().max(1) as f64;
        self.push(Tensor::scalar(s), Op::Mean(x), "mean")
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::mismatch("mse", ta.shape(), tb.shape()));
        }
        let s: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let v = s / ta.len().max(1) as f64;
        self.push(Tensor::scalar(v), Op::Mse(a, b), "mse")
    }

    /// Mean of absolute differences.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::mismatch("l1", ta.shape(), tb.shape()));
        }
        let s: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        let v = s / ta.len().max(1) as f64;
        self.push(Tensor::scalar(v), Op::L1(a, b), "l1")
    }

    /// Records an externally computed node.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, op: Box<dyn CustomOp>) -> Result<Var> {
        let name = op.name();
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
            name,
        )
    }

    /// Regime codes of every kink-bearing node, in graph order.
    pub fn kink_pattern(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => out.extend(self.value(*x).data().iter().map(|&v| u8::from(v > 0.0))),
                Op::Clamp01(x) => out.extend(self.value(*x).data().iter().map(|&v| {
                    if v <= 0.0 {
                        0
                    } else if v < 1.0 {
                        1
                    } else {
                        2
                    }
                })),
                Op::Abs(x) => out.extend(
                    self.value(*x)
                        .data()
                        .iter()
                        .map(|&v| (v > 0.0) as u8 + 2 * (v < 0.0) as u8),
                ),
                Op::Custom { inputs, op } => {
                    let ins: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                    out.extend(op.kink_pattern(&ins));
                }
                _ => {}
            }
        }
        out
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Self::mismatch("backward", self.shape(loss), &[]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params: Vec<Option<Tensor>> = vec![None; self.params.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                let shape = self.params.value(*id).shape();
                let slot = &mut params[id.0];
                match slot {
                    Some(t) => t.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b),
                    None => *slot = Some(Tensor::new(shape, g.clone())?),
                }
            }
        }
        Ok(Gradients {
            params,
            nodes: grads,
        })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let elementwise = |x: Var, f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<f64> {
            self.value(x)
                .data()
                .iter()
                .zip(out.data())
                .zip(g)
                .map(|((&xv, &yv), &gv)| f(xv, yv, gv))
                .collect()
        };
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul { a, b } => {
                let (ga, gb) = self.matmul_backward(*a, *b, g);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::AddBias { x, bias } => {
                let n = self.shape(*bias)[0];
                let mut gb = vec![0.0; n];
                for row in g.chunks(n) {
                    for (a, b) in gb.iter_mut().zip(row) {
                        *a += b;
                    }
                }
                accumulate(grads, *x, g.to_vec());
                accumulate(grads, *bias, gb);
            }
            Op::Conv2d {
                x,
                w,
                bias,
                geom,
                cols,
            } => {
                let (gx, gw, gb) = self.conv_backward(*x, *w, *geom, cols, g);
                accumulate(grads, *x, gx);
                accumulate(grads, *w, gw);
                accumulate(grads, *bias, gb);
            }
            Op::GlobalAvgPool(x) => {
                let s = self.shape(*x);
                let hw = s[2] * s[3];
                let inv = 1.0 / hw as f64;
                let gx: Vec<f64> = g
                    .iter()
                    .flat_map(|&v| std::iter::repeat_n(v * inv, hw))
                    .collect();
                accumulate(grads, *x, gx);
            }
            Op::Reshape(x) => accumulate(grads, *x, g.to_vec()),
            Op::Relu(x) => accumulate(
                grads,
                *x,
                elementwise(*x, &|xv, _, gv| if xv > 0.0 { gv } else { 0.0 }),
            ),
            Op::Sigmoid(x) => {
                accumulate(grads, *x, elementwise(*x, &|_, y, gv| gv * y * (1.0 - y)))
            }
            Op::Clamp01(x) => accumulate(
                grads,
                *x,
                elementwise(*x, &|xv, _, gv| if xv > 0.0 && xv < 1.0 { gv } else { 0.0 }),
            ),
            Op::OneMinus(x) => accumulate(grads, *x, g.iter().map(|v| -v).collect()),
            Op::Abs(x) => accumulate(
                grads,
                *x,
                elementwise(*x, &|xv, _, gv| {
                    if xv > 0.0 {
                        gv
                    } else if xv < 0.0 {
                        -gv
                    } else {
                        0.0
                    }
                }),
            ),
            Op::Sin(x) => accumulate(grads, *x, elementwise(*x, &|xv, _, gv| gv * xv.cos())),
            Op::Cos(x) => accumulate(grads, *x, elementwise(*x, &|xv, _, gv| -gv * xv.sin())),
            Op::Scale(x, s) => accumulate(grads, *x, g.iter().map(|v| v * s).collect()),
            Op::AddScalar(x) => accumulate(grads, *x, g.to_vec()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                accumulate(grads, *a, g.iter().zip(vb).map(|(x, y)| x * y).collect());
                accumulate(grads, *b, g.iter().zip(va).map(|(x, y)| x * y).collect());
            }
            Op::Sum(x) => accumulate(grads, *x, vec![g[0]; self.value(*x).len()]),
            Op::Mean(x) => {
                let n = self.value(*x).len();
                accumulate(grads, *x, vec![g[0] / n as f64; n]);
            }
            Op::Mse(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let k = 2.0 * g[0] / va.len() as f64;
                let ga: Vec<f64> = va.iter().zip(vb).map(|(x, y)| k * (x - y)).collect();
                accumulate(grads, *b, ga.iter().map(|v| -v).collect());
                accumulate(grads, *a, ga);
            }
            Op::L1(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let k = g[0] / va.len() as f64;
                let ga: Vec<f64> = va
                    .iter()
                    .zip(vb)
                    .map(|(x, y)| {
                        let d = x - y;
                        if d > 0.0 {
                            k
                        } else if d < 0.0 {
                            -k
                        } else {
                            0.0
                        }
                    })
                    .collect();
                accumulate(grads, *b, ga.iter().map(|v| -v).collect());
                accumulate(grads, *a, ga);
            }
            Op::Custom { inputs, op } => {
                let ins: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                for (v, gi) in inputs.iter().zip(op.backward(&ins, out, g)) {
                    if let Some(gi) = gi {
                        accumulate(grads, *v, gi);
                    }
                }
            }
        }
    }

    fn matmul_backward(&self, a: Var, b: Var, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dims = matmul_dims(self.shape(a), self.shape(b)).expect("validated in forward");
        let MatmulDims {
            batch,
            m,
            k,
            n,
            a_batched,
            b_batched,
        } = dims;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let nb = batch.unwrap_or(1);
        let mut ga = vec![0.0; av.len()];
        let mut gb = vec![0.0; bv.len()];
        for i in 0..nb {
            let gi = MatRef::row_major(&g[i * m * n..(i + 1) * m * n], m, n);
            let ai = if a_batched {
                &av[i * m * k..(i + 1) * m * k]
            } else {
                av
            };
            let bi = if b_batched {
                &bv[i * k * n..(i + 1) * k * n]
            } else {
                bv
            };
            // dA = dC B^T, dB = A^T dC; shared operands accumulate in batch order
            let ga_i = if a_batched {
                &mut ga[i * m * k..(i + 1) * m * k]
            } else {
                &mut ga[..]
            };
            gemm(1.0, gi, MatRef::row_major(bi, k, n).t(), 1.0, ga_i);
            let gb_i = if b_batched {
                &mut gb[i * k * n..(i + 1) * k * n]
            } else {
                &mut gb[..]
            };
            gemm(1.0, MatRef::row_major(ai, m, k).t(), gi, 1.0, gb_i);
        }
        (ga, gb)
    }

    fn conv_backward(
        &self,
        x: Var,
        w: Var,
        geom: ConvGeom,
        cols: &[f64],
        g: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sx = self.shape(x);
        let wv = self.value(w).data();
        let cout = self.shape(w)[0];
        let (rows, hw) = (geom.col_rows(), geom.col_cols());
        let batch = sx[0];
        let in_len = sx[1] * sx[2] * sx[3];
        let mut gx = vec![0.0; batch * in_len];
        gx.par_chunks_mut(in_len).enumerate().for_each_init(
            || vec![0.0; rows * hw],
            |dcols, (i, dx)| {
                let gi = &g[i * cout * hw..(i + 1) * cout * hw];
                gemm(
                    1.0,
                    MatRef::row_major(wv, cout, rows).t(),
                    MatRef::row_major(gi, cout, hw),
                    0.0,
                    dcols,
                );
                col2im(dcols, geom, dx);
            },
        );
        let mut gw = vec![0.0; wv.len()];
        let mut gb = vec![0.0; cout];
        for i in 0..batch {
            let gi = &g[i * cout * hw..(i + 1) * cout * hw];
            let col = &cols[i * rows * hw..(i + 1) * rows * hw];
            gemm(
                1.0,
                MatRef::row_major(gi, cout, hw),
                MatRef::row_major(col, rows, hw).t(),
                1.0,
                &mut gw,
            );
            for (c, chunk) in gi.chunks(hw).enumerate() {
                gb[c] += chunk.iter().sum::<f64>();
            }
        }
        (gx, gw, gb)
    }
}

struct MatmulDims {
    batch: Option<usize>,
    m: usize,
    k: usize,
    n: usize,
    a_batched: bool,
    b_batched: bool,
}

fn matmul_dims(sa: &[usize], sb: &[usize]) -> Option<MatmulDims> {
    let (a_batched, b_batched) = (sa.len() == 3, sb.len() == 3);
    if !(2..=3).contains(&sa.len()) || !(2..=3).contains(&sb.len()) {
        return None;
    }
    let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
    let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
    if k != k2 {
        return None;
    }
    let batch = match (a_batched, b_batched) {
        (true, true) if sa[0] == sb[0] => Some(sa[0]),
        (true, true) => return None,
        (true, false) => Some(sa[0]),
        (false, true) => Some(sb[0]),
        (false, false) => None,
    };
    Some(MatmulDims {
        batch,
        m,
        k,
        n,
        a_batched,
        b_batched,
    })
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    params: Vec<Option<Tensor>>,
    nodes: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for a parameter, or `None` if the loss does not depend on it.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.0).and_then(Option::as_ref)
    }

    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().flatten().all(Tensor::all_finite)
    }
}
