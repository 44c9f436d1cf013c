//! Dense, GRU and LSTM layers with batched forward passes and hand-written
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, matmul, matmul_t, Tensor2};
use super::NetError;
use crate::scalar::Scalar;

/// A trainable tensor with its gradient and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<S: Scalar> {
    pub value: Tensor2<S>,
    pub grad: Tensor2<S>,
    pub m: Tensor2<S>,
    pub v: Tensor2<S>,
}

impl<S: Scalar> Param<S> {
    pub fn new(value: Tensor2<S>) -> Self {
        let (r, c) = value.shape();
        Self { value, grad: Tensor2::zeros(r, c), m: Tensor2::zeros(r, c), v: Tensor2::zeros(r, c) }
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        Self::new(Tensor2::from_fn(rows, cols, |_, _| S::lit(rng.gen_range(-bound..=bound))))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(S::zero());
    }
}

/// Visits every parameter tensor with a stable name.
pub trait HasParams<S: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<S>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<S>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.value.as_slice().len());
        n
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// Fully connected layer `y = act(W x + b)` with `W` of shape out x in.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S: Scalar> {
    pub w: Param<S>,
    pub b: Param<S>,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache<S: Scalar> {
    x: Tensor2<S>,
    y: Tensor2<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, act: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self { w: Param::uniform(output, input, bound, rng), b: Param::uniform(1, output, bound, rng), act }
    }

    pub fn zeros(input: usize, output: usize, act: Activation) -> Self {
        Self { w: Param::new(Tensor2::zeros(output, input)), b: Param::new(Tensor2::zeros(1, output)), act }
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.value.rows()
    }

    pub fn forward(&self, x: &Tensor2<S>) -> Result<(Tensor2<S>, DenseCache<S>), NetError> {
        if x.cols() != self.input_dim() {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), self.input_dim()), got: x.shape() });
        }
        let mut y = matmul_t(x, &self.w.value);
        y.add_row(self.b.value.as_slice());
        if self.act == Activation::Relu {
            y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(S::zero()));
        }
        Ok((y.clone(), DenseCache { x: x.clone(), y }))
    }

    /// Single-vector convenience form.
    pub fn forward_vec(&self, x: &[S]) -> Result<Vec<S>, NetError> {
        Ok(self.forward(&Tensor2::row_vector(x))?.0.into_vec())
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &DenseCache<S>, dy: &Tensor2<S>) -> Tensor2<S> {
        let mut dy = dy.clone();
        if self.act == Activation::Relu {
            for (d, &y) in dy.as_mut_slice().iter_mut().zip(cache.y.as_slice()) {
                if y <= S::zero() {
                    *d = S::zero();
                }
            }
        }
        gemm(S::one(), &dy, true, &cache.x, false, S::one(), &mut self.w.grad);
        dy.add_column_sums(self.b.grad.as_mut_slice());
        matmul(&dy, &self.w.value)
    }
}

impl<S: Scalar> HasParams<S> for Dense<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<S>)) {
        f(format!("{prefix}.weight"), &self.w);
        f(format!("{prefix}.bias"), &self.b);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<S>)) {
        f(format!("{prefix}.weight"), &mut self.w);
        f(format!("{prefix}.bias"), &mut self.b);
    }
}

/// Gated recurrent unit. Gate blocks are stacked `[reset, update, candidate]`.
///
/// `h' = (1 - z) * h + z * n`, `n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gru<S: Scalar> {
    pub wx: Param<S>,
    pub wh: Param<S>,
    pub bx: Param<S>,
    pub bh: Param<S>,
}

#[derive(Clone, Debug)]
pub struct GruStepCache<S: Scalar> {
    x: Tensor2<S>,
    h: Tensor2<S>,
    r: Tensor2<S>,
    z: Tensor2<S>,
    n: Tensor2<S>,
    /// `Wh_n h + bh_n`
    hn: Tensor2<S>,
}

impl<S: Scalar> Gru<S> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            wx: Param::uniform(3 * hidden, input, bound, rng),
            wh: Param::uniform(3 * hidden, hidden, bound, rng),
            bx: Param::uniform(1, 3 * hidden, bound, rng),
            bh: Param::uniform(1, 3 * hidden, bound, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            wx: Param::new(Tensor2::zeros(3 * hidden, input)),
            wh: Param::new(Tensor2::zeros(3 * hidden, hidden)),
            bx: Param::new(Tensor2::zeros(1, 3 * hidden)),
            bh: Param::new(Tensor2::zeros(1, 3 * hidden)),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.wh.value.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.wx.value.cols()
    }

    pub fn step(&self, x: &Tensor2<S>, h: &Tensor2<S>) -> Result<(Tensor2<S>, GruStepCache<S>), NetError> {
        let m = self.hidden_dim();
        if x.cols() != self.input_dim() {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), self.input_dim()), got: x.shape() });
        }
        if h.shape() != (x.rows(), m) {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), m), got: h.shape() });
        }
        let mut gx = matmul_t(x, &self.wx.value);
        gx.add_row(self.bx.value.as_slice());
        let mut gh = matmul_t(h, &self.wh.value);
        gh.add_row(self.bh.value.as_slice());
        let b = x.rows();
        let (mut r, mut z, mut n, mut hn, mut out) =
            (Tensor2::zeros(b, m), Tensor2::zeros(b, m), Tensor2::zeros(b, m), Tensor2::zeros(b, m), Tensor2::zeros(b, m));
        for i in 0..b {
            let (gxr, ghr) = (gx.row(i), gh.row(i));
            for j in 0..m {
                let rj = sigmoid(gxr[j] + ghr[j]);
                let zj = sigmoid(gxr[m + j] + ghr[m + j]);
                let hnj = ghr[2 * m + j];
                let nj = (gxr[2 * m + j] + rj * hnj).tanh();
                r.set(i, j, rj);
                z.set(i, j, zj);
                n.set(i, j, nj);
                hn.set(i, j, hnj);
                out.set(i, j, (S::one() - zj) * h.get(i, j) + zj * nj);
            }
        }
        Ok((out, GruStepCache { x: x.clone(), h: h.clone(), r, z, n, hn }))
    }

    /// Single-vector cell update.
    pub fn cell_forward(&self, x: &[S], h: &[S]) -> Result<Vec<S>, NetError> {
        Ok(self.step(&Tensor2::row_vector(x), &Tensor2::row_vector(h))?.0.into_vec())
    }

    /// Runs the sequence from `h0`, returning the final state and per-step caches.
    pub fn forward_seq(&self, xs: &[Tensor2<S>], h0: Tensor2<S>) -> Result<(Tensor2<S>, Vec<GruStepCache<S>>), NetError> {
        let mut h = h0;
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (next, c) = self.step(x, &h)?;
            caches.push(c);
            h = next;
        }
        Ok((h, caches))
    }

    /// Backpropagates `dh` through one step; returns `(dx, dh_prev)`.
    pub fn backward_step(&mut self, c: &GruStepCache<S>, dh: &Tensor2<S>) -> (Tensor2<S>, Tensor2<S>) {
        let m = self.hidden_dim();
        let b = dh.rows();
        let mut dgx = Tensor2::zeros(b, 3 * m);
        let mut dgh = Tensor2::zeros(b, 3 * m);
        let mut dh_prev = Tensor2::zeros(b, m);
        for i in 0..b {
            for j in 0..m {
                let (r, z, n, hn, hp, d) = (c.r.get(i, j), c.z.get(i, j), c.n.get(i, j), c.hn.get(i, j), c.h.get(i, j), dh.get(i, j));
                let dn = d * z;
                let dz = d * (n - hp);
                dh_prev.set(i, j, d * (S::one() - z));
                let dn_pre = dn * (S::one() - n * n);
                let dr_pre = dn_pre * hn * r * (S::one() - r);
                let dz_pre = dz * z * (S::one() - z);
                let gx = dgx.row_mut(i);
                gx[j] = dr_pre;
                gx[m + j] = dz_pre;
                gx[2 * m + j] = dn_pre;
                let gh = dgh.row_mut(i);
                gh[j] = dr_pre;
                gh[m + j] = dz_pre;
                gh[2 * m + j] = dn_pre * r;
            }
        }
        gemm(S::one(), &dgx, true, &c.x, false, S::one(), &mut self.wx.grad);
        gemm(S::one(), &dgh, true, &c.h, false, S::one(), &mut self.wh.grad);
        dgx.add_column_sums(self.bx.grad.as_mut_slice());
        dgh.add_column_sums(self.bh.grad.as_mut_slice());
        let dx = matmul(&dgx, &self.wx.value);
        gemm(S::one(), &dgh, false, &self.wh.value, false, S::one(), &mut dh_prev);
        (dx, dh_prev)
    }

    /// Backpropagates through a whole sequence; returns `(dxs, dh0)`.
    pub fn backward_seq(&mut self, caches: &[GruStepCache<S>], dh_last: &Tensor2<S>) -> (Vec<Tensor2<S>>, Tensor2<S>) {
        let mut dh = dh_last.clone();
        let mut dxs = Vec::with_capacity(caches.len());
        for c in caches.iter().rev() {
            let (dx, dprev) = self.backward_step(c, &dh);
            dxs.push(dx);
            dh = dprev;
        }
        dxs.reverse();
        (dxs, dh)
    }
}

impl<S: Scalar> HasParams<S> for Gru<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<S>)) {
        f(format!("{prefix}.weight_ih"), &self.wx);
        f(format!("{prefix}.weight_hh"), &self.wh);
        f(format!("{prefix}.bias_ih"), &self.bx);
        f(format!("{prefix}.bias_hh"), &self.bh);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<S>)) {
        f(format!("{prefix}.weight_ih"), &mut self.wx);
        f(format!("{prefix}.weight_hh"), &mut self.wh);
        f(format!("{prefix}.bias_ih"), &mut self.bx);
        f(format!("{prefix}.bias_hh"), &mut self.bh);
    }
}

/// Long short-term memory layer. Gate blocks are stacked `[input, forget, cell, output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<S: Scalar> {
    pub wx: Param<S>,
    pub wh: Param<S>,
    pub b: Param<S>,
}

#[derive(Clone, Debug)]
pub struct LstmStepCache<S: Scalar> {
    x: Tensor2<S>,
    h: Tensor2<S>,
    c: Tensor2<S>,
    /// Activated gates, `[i, f, g, o]` blocks.
    gates: Tensor2<S>,
    tanh_c: Tensor2<S>,
}

impl<S: Scalar> Lstm<S> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            wx: Param::uniform(4 * hidden, input, bound, rng),
            wh: Param::uniform(4 * hidden, hidden, bound, rng),
            b: Param::uniform(1, 4 * hidden, bound, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            wx: Param::new(Tensor2::zeros(4 * hidden, input)),
            wh: Param::new(Tensor2::zeros(4 * hidden, hidden)),
            b: Param::new(Tensor2::zeros(1, 4 * hidden)),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.wh.value.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.wx.value.cols()
    }

    /// One step from `(h, c)`; returns `(h', c', cache)`.
    #[allow(clippy::type_complexity)]
    pub fn step(&self, x: &Tensor2<S>, h: &Tensor2<S>, c: &Tensor2<S>) -> Result<(Tensor2<S>, Tensor2<S>, LstmStepCache<S>), NetError> {
        let m = self.hidden_dim();
        if x.cols() != self.input_dim() {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), self.input_dim()), got: x.shape() });
        }
        if h.shape() != (x.rows(), m) || c.shape() != (x.rows(), m) {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), m), got: h.shape() });
        }
        let mut g = matmul_t(x, &self.wx.value);
        gemm(S::one(), h, false, &self.wh.value, true, S::one(), &mut g);
        g.add_row(self.b.value.as_slice());
        let b = x.rows();
        let (mut h2, mut c2, mut tc) = (Tensor2::zeros(b, m), Tensor2::zeros(b, m), Tensor2::zeros(b, m));
        for i in 0..b {
            let row = g.row_mut(i);
            for j in 0..m {
                row[j] = sigmoid(row[j]);
                row[m + j] = sigmoid(row[m + j]);
                row[2 * m + j] = row[2 * m + j].tanh();
                row[3 * m + j] = sigmoid(row[3 * m + j]);
            }
            for j in 0..m {
                let (gi, gf, gg, go) = (row[j], row[m + j], row[2 * m + j], row[3 * m + j]);
                let cn = gf * c.get(i, j) + gi * gg;
                let t = cn.tanh();
                c2.set(i, j, cn);
                tc.set(i, j, t);
                h2.set(i, j, go * t);
            }
        }
        let cache = LstmStepCache { x: x.clone(), h: h.clone(), c: c.clone(), gates: g, tanh_c: tc };
        Ok((h2, c2.clone(), cache))
    }

    /// Returns the hidden state at every step and the caches.
    pub fn forward_seq(&self, xs: &[Tensor2<S>]) -> Result<(Vec<Tensor2<S>>, Vec<LstmStepCache<S>>), NetError> {
        let b = xs.first().map_or(0, |x| x.rows());
        let m = self.hidden_dim();
        let (mut h, mut c) = (Tensor2::zeros(b, m), Tensor2::zeros(b, m));
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (h2, c2, cache) = self.step(x, &h, &c)?;
            hs.push(h2.clone());
            caches.push(cache);
            h = h2;
            c = c2;
        }
        Ok((hs, caches))
    }

    /// Backpropagates per-step hidden-state gradients `dhs`; returns input gradients.
    pub fn backward_seq(&mut self, caches: &[LstmStepCache<S>], dhs: &[Tensor2<S>]) -> Vec<Tensor2<S>> {
        let m = self.hidden_dim();
        let b = dhs.first().map_or(0, |d| d.rows());
        let mut dh_next = Tensor2::<S>::zeros(b, m);
        let mut dc_next = Tensor2::<S>::zeros(b, m);
        let mut dxs = Vec::with_capacity(caches.len());
        for (cache, dh_out) in caches.iter().zip(dhs).rev() {
            let mut dg = Tensor2::zeros(b, 4 * m);
            let mut dc_prev = Tensor2::zeros(b, m);
            for i in 0..b {
                let gr = cache.gates.row(i);
                for j in 0..m {
                    let (gi, gf, gg, go) = (gr[j], gr[m + j], gr[2 * m + j], gr[3 * m + j]);
                    let t = cache.tanh_c.get(i, j);
                    let dh = dh_out.get(i, j) + dh_next.get(i, j);
                    let dc = dc_next.get(i, j) + dh * go * (S::one() - t * t);
                    let row = dg.row_mut(i);
                    row[j] = dc * gg * gi * (S::one() - gi);
                    row[m + j] = dc * cache.c.get(i, j) * gf * (S::one() - gf);
                    row[2 * m + j] = dc * gi * (S::one() - gg * gg);
                    row[3 * m + j] = dh * t * go * (S::one() - go);
                    dc_prev.set(i, j, dc * gf);
                }
            }
            gemm(S::one(), &dg, true, &cache.x, false, S::one(), &mut self.wx.grad);
            gemm(S::one(), &dg, true, &cache.h, false, S::one(), &mut self.wh.grad);
            dg.add_column_sums(self.b.grad.as_mut_slice());
            dxs.push(matmul(&dg, &self.wx.value));
            dh_next = matmul(&dg, &self.wh.value);
            dc_next = dc_prev;
        }
        dxs.reverse();
        dxs
    }
}

impl<S: Scalar> HasParams<S> for Lstm<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<S>)) {
        f(format!("{prefix}.weight_ih"), &self.wx);
        f(format!("{prefix}.weight_hh"), &self.wh);
        f(format!("{prefix}.bias"), &self.b);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<S>)) {
        f(format!("{prefix}.weight_ih"), &mut self.wx);
        f(format!("{prefix}.weight_hh"), &mut self.wh);
        f(format!("{prefix}.bias"), &mut self.b);
    }
}
