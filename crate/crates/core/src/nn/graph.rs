//! Tape of tensor operations with reverse-mode gradients.
//!
//! A [`Graph`] is built fresh for every forward pass. Parameters live in a
//! [`ParamStore`] that the graph borrows; [`Graph::backward`] returns the
//! gradient of every parameter (and of inputs created with
//! [`Graph::input_with_grad`]) with respect to a seed on one output node.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{matmul, matmul_nt, matmul_tn};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

struct LstmCache {
    hidden: usize,
    /// Per step: the input slice `[B, F]`.
    xs: Vec<Vec<f64>>,
    /// Per step: activated gates `[B, 4H]` laid out as i | f | g | o.
    gates: Vec<Vec<f64>>,
    /// Per step: cell state `c_t` `[B, H]`.
    cells: Vec<Vec<f64>>,
    /// Per step: hidden state `h_t` `[B, H]`.
    hiddens: Vec<Vec<f64>>,
}

enum Op {
    Input,
    Param(ParamId),
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Conv1d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
    },
    Relu {
        x: NodeId,
    },
    Dropout {
        x: NodeId,
        mask: Option<Vec<f64>>,
    },
    Concat {
        inputs: Vec<NodeId>,
        axis: usize,
    },
    Reshape {
        x: NodeId,
    },
    SwapLastAxes {
        x: NodeId,
    },
    Lstm {
        x: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b: NodeId,
        cache: Box<LstmCache>,
    },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    mode: Mode,
    rng: ChaCha8Rng,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<Option<Tensor>>,
    inputs: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params[id.0].as_ref()
    }

    pub fn input(&self, id: NodeId) -> Option<&Tensor> {
        self.inputs.get(&id)
    }

    /// One gradient per parameter; parameters off the output's path get zeros.
    pub fn into_param_grads(self, store: &ParamStore) -> Vec<Tensor> {
        self.params
            .into_iter()
            .zip(&store.tensors)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    }
}

impl<'p> Graph<'p> {
    /// `seed` drives dropout masks in training mode.
    pub fn new(params: &'p ParamStore, mode: Mode, seed: u64) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.get(*p),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, value: Option<Tensor>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].needs_grad)
    }

    /// A constant input; no gradient is computed for it.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Some(value), Op::Input, false)
    }

    /// An input whose gradient is reported by [`Gradients::input`].
    pub fn input_with_grad(&mut self, value: Tensor) -> NodeId {
        self.push(Some(value), Op::Input, true)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.push(None, Op::Param(id), true)
    }

    /// `x [B, in] * w [in, out] + b [out]`
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(Error::shape(
                "dense",
                format!(
                    "x [B, {}], b [{}]",
                    ws.first().copied().unwrap_or(0),
                    ws.get(1).copied().unwrap_or(0)
                ),
                format!("x {xs:?}, w {ws:?}, b {bs:?}"),
            ));
        }
        let (batch, fan_in, fan_out) = (xs[0], ws[0], ws[1]);
        let mut out = Vec::with_capacity(batch * fan_out);
        for _ in 0..batch {
            out.extend_from_slice(self.value(b).data());
        }
        matmul(
            self.value(x).data(),
            self.value(w).data(),
            batch,
            fan_in,
            fan_out,
            &mut out,
        );
        let value = Tensor::new(vec![batch, fan_out], out)?;
        let ng = self.needs(&[x, w, b]);
        Ok(self.push(Some(value), Op::Dense { x, w, b }, ng))
    }

    /// Valid-padding 1-D convolution: `x [B, C_in, L]`, `w [C_out, C_in, K]`, `b [C_out]`
    /// gives `[B, C_out, (L - K) / stride + 1]`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(Error::shape(
                "conv1d",
                "x [B, C_in, L], w [C_out, C_in, K], b [C_out]",
                format!("x {xs:?}, w {ws:?}, b {bs:?}"),
            ));
        }
        let (batch, c_in, len) = (xs[0], xs[1], xs[2]);
        let (c_out, k) = (ws[0], ws[2]);
        if stride == 0 || k == 0 || k > len {
            return Err(Error::shape(
                "conv1d",
                format!("kernel in 1..={len}, stride >= 1"),
                format!("kernel {k}, stride {stride}"),
            ));
        }
        let l_out = conv_output_len(len, k, stride);
        let (xd, wd, bd) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = vec![0.0; batch * c_out * l_out];
        for bi in 0..batch {
            for o in 0..c_out {
                let yrow = &mut out[(bi * c_out + o) * l_out..][..l_out];
                yrow.fill(bd[o]);
                for c in 0..c_in {
                    let xrow = &xd[(bi * c_in + c) * len..][..len];
                    for kk in 0..k {
                        let wv = wd[(o * c_in + c) * k + kk];
                        for (t, y) in yrow.iter_mut().enumerate() {
                            *y += wv * xrow[t * stride + kk];
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, c_out, l_out], out)?;
        let ng = self.needs(&[x, w, b]);
        Ok(self.push(Some(value), Op::Conv1d { x, w, b, stride }, ng))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let value =
            Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect()).expect("same shape");
        let ng = self.needs(&[x]);
        self.push(Some(value), Op::Relu { x }, ng)
    }

    /// Inverted dropout: in training mode each activation is zeroed with
    /// probability `ratio` and survivors are scaled by `1 / (1 - ratio)`;
    /// in inference mode (or with ratio 0) this is the identity.
    pub fn dropout(&mut self, x: NodeId, ratio: f64) -> Result<NodeId> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::Config(format!("dropout ratio must be in [0, 1), got {ratio}")));
        }
        let ng = self.needs(&[x]);
        if self.mode == Mode::Inference || ratio == 0.0 {
            let value = self.value(x).clone();
            return Ok(self.push(Some(value), Op::Dropout { x, mask: None }, ng));
        }
        let scale = 1.0 / (1.0 - ratio);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.random::<f64>() >= ratio { scale } else { 0.0 })
            .collect();
        let v = self.value(x);
        let value = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().zip(&mask).map(|(a, m)| a * m).collect(),
        )?;
        Ok(self.push(Some(value), Op::Dropout { x, mask: Some(mask) }, ng))
    }

    /// Joins tensors that agree on every axis except `axis`.
    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = self
            .value(
                *inputs
                    .first()
                    .ok_or_else(|| Error::InvalidInput("concat of nothing".into()))?,
            )
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(Error::shape("concat", format!("axis < {}", first.len()), axis));
        }
        let mut total = 0;
        for &id in inputs {
            let s = self.value(id).shape();
            let compatible =
                s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &first, s));
            }
            total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &id in inputs {
                let v = self.value(id);
                let chunk = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let ng = self.needs(inputs);
        Ok(self.push(
            Some(Tensor::new(shape, out)?),
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            ng,
        ))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.len() {
            return Err(Error::shape("reshape", v.shape(), shape));
        }
        let value = v.clone().with_shape(shape.to_vec());
        let ng = self.needs(&[x]);
        Ok(self.push(Some(value), Op::Reshape { x }, ng))
    }

    /// `[.., A, B]` to `[.., B, A]`.
    pub fn swap_last_axes(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let s = v.shape();
        if s.len() < 2 {
            return Err(Error::shape("swap_last_axes", "rank >= 2", s));
        }
        let (a, b) = (s[s.len() - 2], s[s.len() - 1]);
        let value = Tensor::new(swapped_shape(s), swap_last(v.data(), a, b))?;
        let ng = self.needs(&[x]);
        Ok(self.push(Some(value), Op::SwapLastAxes { x }, ng))
    }

    /// Single-layer LSTM from zero state over `x [B, T, F]`; returns the final
    /// hidden state `[B, H]`. `w_ih [F, 4H]`, `w_hh [H, 4H]`, `b [4H]`, gate
    /// order input | forget | cell | output.
    pub fn lstm(&mut self, x: NodeId, w_ih: NodeId, w_hh: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, wis, whs, bs) = (
            self.value(x).shape(),
            self.value(w_ih).shape(),
            self.value(w_hh).shape(),
            self.value(b).shape(),
        );
        let ok = xs.len() == 3
            && whs.len() == 2
            && whs[1] == 4 * whs[0]
            && wis == [xs[2], whs[1]]
            && bs == [whs[1]]
            && xs[1] >= 1;
        if !ok {
            return Err(Error::shape(
                "lstm",
                "x [B, T>=1, F], w_ih [F, 4H], w_hh [H, 4H], b [4H]",
                format!("x {xs:?}, w_ih {wis:?}, w_hh {whs:?}, b {bs:?}"),
            ));
        }
        let (batch, steps, feat, hidden) = (xs[0], xs[1], xs[2], whs[0]);
        let g4 = 4 * hidden;
        let (xd, wid, whd, bd) = (
            self.value(x).data(),
            self.value(w_ih).data(),
            self.value(w_hh).data(),
            self.value(b).data(),
        );
        let mut cache = LstmCache {
            hidden,
            xs: Vec::with_capacity(steps),
            gates: Vec::with_capacity(steps),
            cells: Vec::with_capacity(steps),
            hiddens: Vec::with_capacity(steps),
        };
        let mut h = vec![0.0; batch * hidden];
        let mut c = vec![0.0; batch * hidden];
        for t in 0..steps {
            let mut xt = Vec::with_capacity(batch * feat);
            for bi in 0..batch {
                xt.extend_from_slice(&xd[(bi * steps + t) * feat..][..feat]);
            }
            let mut z = Vec::with_capacity(batch * g4);
            for _ in 0..batch {
                z.extend_from_slice(bd);
            }
            matmul(&xt, wid, batch, feat, g4, &mut z);
            matmul(&h, whd, batch, hidden, g4, &mut z);
            let mut c_new = vec![0.0; batch * hidden];
            let mut h_new = vec![0.0; batch * hidden];
            for bi in 0..batch {
                let zr = &mut z[bi * g4..(bi + 1) * g4];
                for j in 0..hidden {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[hidden + j]);
                    let g_g = zr[2 * hidden + j].tanh();
                    let o_g = sigmoid(zr[3 * hidden + j]);
                    zr[j] = i_g;
                    zr[hidden + j] = f_g;
                    zr[2 * hidden + j] = g_g;
                    zr[3 * hidden + j] = o_g;
                    let cv = f_g * c[bi * hidden + j] + i_g * g_g;
                    c_new[bi * hidden + j] = cv;
                    h_new[bi * hidden + j] = o_g * cv.tanh();
                }
            }
            cache.xs.push(xt);
            cache.gates.push(z);
            cache.cells.push(c_new.clone());
            cache.hiddens.push(h_new.clone());
            h = h_new;
            c = c_new;
        }
        let value = Tensor::new(vec![batch, hidden], h)?;
        let ng = self.needs(&[x, w_ih, w_hh, b]);
        Ok(self.push(
            Some(value),
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                cache: Box::new(cache),
            },
            ng,
        ))
    }

    /// Propagates `seed` (shaped like `output`) back through the tape.
    pub fn backward(&self, output: NodeId, seed: Tensor) -> Result<Gradients> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape("backward seed", self.value(output).shape(), seed.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(seed);
        let mut param_grads: Vec<Option<Tensor>> = (0..self.params.len()).map(|_| None).collect();
        let mut input_grads = BTreeMap::new();

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {
                    input_grads.insert(NodeId(i), g);
                }
                Op::Param(p) => accumulate(&mut param_grads[p.0], g),
                Op::Dense { x, w, b } => self.dense_backward(&mut grads, &g, *x, *w, *b),
                Op::Conv1d { x, w, b, stride } => self.conv1d_backward(&mut grads, &g, *x, *w, *b, *stride),
                Op::Relu { x } => {
                    let xv = self.value(*x).data();
                    let d = g.data().iter().zip(xv).map(|(g, &a)| if a > 0.0 { *g } else { 0.0 });
                    let t = Tensor::new(g.shape().to_vec(), d.collect())?;
                    self.send(&mut grads, *x, t);
                }
                Op::Dropout { x, mask } => {
                    let t = match mask {
                        None => g,
                        Some(m) => {
                            Tensor::new(g.shape().to_vec(), g.data().iter().zip(m).map(|(a, b)| a * b).collect())?
                        }
                    };
                    self.send(&mut grads, *x, t);
                }
                Op::Concat { inputs, axis } => {
                    let shape = g.shape();
                    let outer: usize = shape[..*axis].iter().product();
                    let inner: usize = shape[axis + 1..].iter().product();
                    let mut parts: Vec<Vec<f64>> = inputs
                        .iter()
                        .map(|id| Vec::with_capacity(self.value(*id).len()))
                        .collect();
                    let mut off = 0;
                    for _ in 0..outer {
                        for (k, id) in inputs.iter().enumerate() {
                            let chunk = self.value(*id).shape()[*axis] * inner;
                            parts[k].extend_from_slice(&g.data()[off..off + chunk]);
                            off += chunk;
                        }
                    }
                    for (id, data) in inputs.iter().zip(parts) {
                        let t = Tensor::new(self.value(*id).shape().to_vec(), data)?;
                        self.send(&mut grads, *id, t);
                    }
                }
                Op::Reshape { x } => {
                    let shape = self.value(*x).shape().to_vec();
                    self.send(&mut grads, *x, g.with_shape(shape));
                }
                Op::SwapLastAxes { x } => {
                    let s = g.shape();
                    let (a, b) = (s[s.len() - 2], s[s.len() - 1]);
                    let t = Tensor::new(swapped_shape(s), swap_last(g.data(), a, b))?;
                    self.send(&mut grads, *x, t);
                }
                Op::Lstm {
                    x,
                    w_ih,
                    w_hh,
                    b,
                    cache,
                } => self.lstm_backward(&mut grads, &g, *x, *w_ih, *w_hh, *b, cache)?,
            }
        }
        Ok(Gradients {
            params: param_grads,
            inputs: input_grads,
        })
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: NodeId, g: Tensor) {
        if self.nodes[to.0].needs_grad {
            accumulate(&mut grads[to.0], g);
        }
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn dense_backward(&self, grads: &mut [Option<Tensor>], g: &Tensor, x: NodeId, w: NodeId, b: NodeId) {
        let (xv, wv) = (self.value(x), self.value(w));
        let (batch, fan_in, fan_out) = (xv.shape()[0], wv.shape()[0], wv.shape()[1]);
        if self.wants(x) {
            let mut dx = vec![0.0; batch * fan_in];
            matmul_nt(g.data(), wv.data(), batch, fan_out, fan_in, &mut dx);
            self.send(grads, x, Tensor::new(vec![batch, fan_in], dx).unwrap());
        }
        if self.wants(w) {
            let mut dw = vec![0.0; fan_in * fan_out];
            matmul_tn(xv.data(), g.data(), batch, fan_in, fan_out, &mut dw);
            self.send(grads, w, Tensor::new(vec![fan_in, fan_out], dw).unwrap());
        }
        if self.wants(b) {
            let mut db = vec![0.0; fan_out];
            for row in g.data().chunks_exact(fan_out) {
                for (d, v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
            self.send(grads, b, Tensor::new(vec![fan_out], db).unwrap());
        }
    }

    fn conv1d_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
    ) {
        let (xv, wv) = (self.value(x), self.value(w));
        let (batch, c_in, len) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (c_out, k) = (wv.shape()[0], wv.shape()[2]);
        let l_out = g.shape()[2];
        let (xd, wd, gd) = (xv.data(), wv.data(), g.data());
        let (want_x, want_w, want_b) = (self.wants(x), self.wants(w), self.wants(b));
        let mut dx = if want_x { vec![0.0; xd.len()] } else { Vec::new() };
        let mut dw = vec![0.0; wd.len()];
        let mut db = vec![0.0; c_out];
        for bi in 0..batch {
            for o in 0..c_out {
                let grow = &gd[(bi * c_out + o) * l_out..][..l_out];
                db[o] += grow.iter().sum::<f64>();
                for c in 0..c_in {
                    let base = (bi * c_in + c) * len;
                    let xrow = &xd[base..base + len];
                    for kk in 0..k {
                        let widx = (o * c_in + c) * k + kk;
                        if want_w {
                            let mut s = 0.0;
                            for (t, gv) in grow.iter().enumerate() {
                                s += gv * xrow[t * stride + kk];
                            }
                            dw[widx] += s;
                        }
                        if want_x {
                            let wv = wd[widx];
                            let dxrow = &mut dx[base..base + len];
                            for (t, gv) in grow.iter().enumerate() {
                                dxrow[t * stride + kk] += wv * gv;
                            }
                        }
                    }
                }
            }
        }
        if want_x {
            self.send(grads, x, Tensor::new(xv.shape().to_vec(), dx).unwrap());
        }
        if want_w {
            self.send(grads, w, Tensor::new(wv.shape().to_vec(), dw).unwrap());
        }
        if want_b {
            self.send(grads, b, Tensor::new(vec![c_out], db).unwrap());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lstm_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        x: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b: NodeId,
        cache: &LstmCache,
    ) -> Result<()> {
        let xs = self.value(x).shape();
        let (batch, steps, feat) = (xs[0], xs[1], xs[2]);
        let hidden = cache.hidden;
        let g4 = 4 * hidden;
        let (wid, whd) = (self.value(w_ih).data(), self.value(w_hh).data());

        let mut dx = vec![0.0; batch * steps * feat];
        let mut dwi = vec![0.0; feat * g4];
        let mut dwh = vec![0.0; hidden * g4];
        let mut db = vec![0.0; g4];
        let mut dh = g.data().to_vec();
        let mut dc = vec![0.0; batch * hidden];
        let zeros = vec![0.0; batch * hidden];
        let mut dz = vec![0.0; batch * g4];

        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let c_t = &cache.cells[t];
            let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hiddens[t - 1] } else { &zeros };
            for bi in 0..batch {
                let gr = &gates[bi * g4..(bi + 1) * g4];
                let dzr = &mut dz[bi * g4..(bi + 1) * g4];
                for j in 0..hidden {
                    let idx = bi * hidden + j;
                    let (i_g, f_g, g_g, o_g) = (gr[j], gr[hidden + j], gr[2 * hidden + j], gr[3 * hidden + j]);
                    let tc = c_t[idx].tanh();
                    let d_o = dh[idx] * tc;
                    let dcv = dc[idx] + dh[idx] * o_g * (1.0 - tc * tc);
                    let d_i = dcv * g_g;
                    let d_g = dcv * i_g;
                    let d_f = dcv * c_prev[idx];
                    dc[idx] = dcv * f_g;
                    dzr[j] = d_i * i_g * (1.0 - i_g);
                    dzr[hidden + j] = d_f * f_g * (1.0 - f_g);
                    dzr[2 * hidden + j] = d_g * (1.0 - g_g * g_g);
                    dzr[3 * hidden + j] = d_o * o_g * (1.0 - o_g);
                }
            }
            matmul_tn(&cache.xs[t], &dz, batch, feat, g4, &mut dwi);
            matmul_tn(h_prev, &dz, batch, hidden, g4, &mut dwh);
            for row in dz.chunks_exact(g4) {
                for (d, v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
            if self.wants(x) {
                let mut dxt = vec![0.0; batch * feat];
                matmul_nt(&dz, wid, batch, g4, feat, &mut dxt);
                for bi in 0..batch {
                    dx[(bi * steps + t) * feat..][..feat].copy_from_slice(&dxt[bi * feat..(bi + 1) * feat]);
                }
            }
            dh.fill(0.0);
            matmul_nt(&dz, whd, batch, g4, hidden, &mut dh);
        }
        if self.wants(x) {
            self.send(grads, x, Tensor::new(vec![batch, steps, feat], dx)?);
        }
        self.send(grads, w_ih, Tensor::new(vec![feat, g4], dwi)?);
        self.send(grads, w_hh, Tensor::new(vec![hidden, g4], dwh)?);
        self.send(grads, b, Tensor::new(vec![g4], db)?);
        Ok(())
    }
}

/// Output length of a valid-padding convolution.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize) -> usize {
    (len - kernel) / stride + 1
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => t.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn swapped_shape(s: &[usize]) -> Vec<usize> {
    let mut out = s.to_vec();
    let n = out.len();
    out.swap(n - 2, n - 1);
    out
}

fn swap_last(data: &[f64], a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for (blk_in, blk_out) in data.chunks_exact(a * b).zip(out.chunks_exact_mut(a * b)) {
        for i in 0..a {
            for j in 0..b {
                blk_out[j * a + i] = blk_in[i * b + j];
            }
        }
    }
    out
}
