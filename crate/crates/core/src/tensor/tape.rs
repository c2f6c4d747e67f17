use super::gemm::{gemm, MatRef};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

enum Op<T> {
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv2d {
        x: Var,
        kernels: Var,
        b: Var,
        cols: Vec<T>,
        geom: ConvGeom,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Relu {
        x: Var,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: T,
    },
    Sum {
        x: Var,
    },
    Reshape {
        x: Var,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Option<Op<T>>,
    needs_grad: bool,
}

/// Linear recording of forward operations; `backward` replays it in reverse.
///
/// Nodes are appended in evaluation order, so operands always precede their
/// consumers and a single reverse sweep visits every node after all of its
/// uses have contributed to its adjoint.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Its `tracked` flag decides whether it receives gradients.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.tracked;
        self.push(tensor, None, needs_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.value.grad = None;
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Option<Op<T>>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn data(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value.data
    }

    /// `x · weight + bias`, with `x: [batch, in]`, `weight: [in, out]`, `bias: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(Error::Dimension {
                op: "linear",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        if bs != [ws[1]] {
            return Err(Error::Dimension {
                op: "linear bias",
                lhs: ws.to_vec(),
                rhs: bs.to_vec(),
            });
        }
        let (batch, inp, out) = (xs[0], xs[1], ws[1]);
        let mut y = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            y.extend_from_slice(self.data(b));
        }
        gemm(
            batch,
            inp,
            out,
            T::one(),
            MatRef::row_major(self.data(x), inp),
            MatRef::row_major(self.data(w), out),
            T::one(),
            &mut y,
        );
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        let value = Tensor::new(&[batch, out], y)?;
        Ok(self.push(value, Some(Op::Linear { x, w, b }), needs))
    }

    /// Valid (unpadded), stride-1 cross-correlation.
    ///
    /// `x: [batch, cin, h, w]`, `kernels: [cout, cin, k, k]`, `bias: [cout]`.
    pub fn conv2d(&mut self, x: Var, kernels: Var, b: Var) -> Result<Var> {
        let (xs, ks, bs) = (self.shape(x), self.shape(kernels), self.shape(b));
        let mismatch = || Error::Dimension {
            op: "conv2d",
            lhs: xs.to_vec(),
            rhs: ks.to_vec(),
        };
        if xs.len() != 4 || ks.len() != 4 || ks[2] != ks[3] || xs[1] != ks[1] {
            return Err(mismatch());
        }
        let k = ks[2];
        if xs[2] < k || xs[3] < k {
            return Err(mismatch());
        }
        if bs != [ks[0]] {
            return Err(Error::Dimension {
                op: "conv2d bias",
                lhs: ks.to_vec(),
                rhs: bs.to_vec(),
            });
        }
        let geom = ConvGeom {
            batch: xs[0],
            cin: xs[1],
            h: xs[2],
            w: xs[3],
            cout: ks[0],
            k,
            oh: xs[2] - k + 1,
            ow: xs[3] - k + 1,
        };
        let cols = im2col(self.data(x), &geom);
        let bp = geom.batch * geom.positions();
        let mut prod = vec![T::zero(); geom.cout * bp];
        gemm(
            geom.cout,
            geom.patch(),
            bp,
            T::one(),
            MatRef::row_major(self.data(kernels), geom.patch()),
            MatRef::row_major(&cols, bp),
            T::zero(),
            &mut prod,
        );
        let p = geom.positions();
        let bias = self.data(b);
        let mut out = vec![T::zero(); geom.batch * geom.cout * p];
        for n in 0..geom.batch {
            for co in 0..geom.cout {
                let src = &prod[co * bp + n * p..][..p];
                let dst = &mut out[(n * geom.cout + co) * p..][..p];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s + bias[co];
                }
            }
        }
        let needs = self.needs(x) || self.needs(kernels) || self.needs(b);
        let value = Tensor::new(&[geom.batch, geom.cout, geom.oh, geom.ow], out)?;
        Ok(self.push(
            value,
            Some(Op::Conv2d {
                x,
                kernels,
                b,
                cols,
                geom,
            }),
            needs,
        ))
    }

    /// Non-overlapping 2x2 max pooling; ties go to the first element in
    /// row-major order within the window.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0 {
            return Err(Error::Dimension {
                op: "maxpool2",
                lhs: xs.to_vec(),
                rhs: vec![2, 2],
            });
        }
        let (planes, h, w) = (xs[0] * xs[1], xs[2], xs[3]);
        let (oh, ow) = (h / 2, w / 2);
        let shape = [xs[0], xs[1], oh, ow];
        let src = self.data(x);
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for plane in 0..planes {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let top = base + 2 * i * w + 2 * j;
                    let mut best = top;
                    for idx in [top + 1, top + w, top + w + 1] {
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let needs = self.needs(x);
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(value, Some(Op::MaxPool2 { x, argmax }), needs))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let zero = T::zero();
        let out = self
            .data(x)
            .iter()
            .map(|&v| if v > zero { v } else { zero })
            .collect();
        let needs = self.needs(x);
        let value = Tensor::new(&self.shape(x).to_vec(), out)?;
        Ok(self.push(value, Some(Op::Relu { x }), needs))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy_mean(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let ls = self.shape(logits);
        if ls.len() != 2 || ls[0] != labels.len() {
            return Err(Error::Dimension {
                op: "cross_entropy_mean",
                lhs: ls.to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let (batch, classes) = (ls[0], ls[1]);
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::argument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let z = self.data(logits);
        let mut probs = vec![T::zero(); batch * classes];
        let mut total = 0.0f64;
        for (n, &y) in labels.iter().enumerate() {
            let row = &z[n * classes..][..classes];
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut denom = T::zero();
            let pr = &mut probs[n * classes..][..classes];
            for (p, &v) in pr.iter_mut().zip(row) {
                *p = (v - m).exp();
                denom += *p;
            }
            for p in pr.iter_mut() {
                *p = *p / denom;
            }
            // both terms are non-negative, so the row loss is too
            total += ((m - row[y]) + denom.ln()).to_f64();
        }
        let value = Tensor::scalar(T::from_f64(total / batch as f64));
        let needs = self.needs(logits);
        Ok(self.push(
            value,
            Some(Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            }),
            needs,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op: "add",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&p, &q)| p + q)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        let value = Tensor::new(&self.shape(a).to_vec(), out)?;
        Ok(self.push(value, Some(Op::Add { a, b }), needs))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let out = self.data(x).iter().map(|&v| v * factor).collect();
        let needs = self.needs(x);
        let value = Tensor::new(&self.shape(x).to_vec(), out)?;
        Ok(self.push(value, Some(Op::Scale { x, factor }), needs))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.data(x).iter().copied().sum();
        let needs = self.needs(x);
        Ok(self.push(Tensor::scalar(total), Some(Op::Sum { x }), needs))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let data = self.data(x).to_vec();
        let value = Tensor::new(shape, data).map_err(|_| Error::Dimension {
            op: "reshape",
            lhs: self.shape(x).to_vec(),
            rhs: shape.to_vec(),
        })?;
        let needs = self.needs(x);
        Ok(self.push(value, Some(Op::Reshape { x }), needs))
    }

    /// Back-propagates from a single-element `loss`, adding into the `grad`
    /// of every tracked leaf that the loss depends on. Gradients accumulate
    /// across calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![T::one()]);
        let mut leaf_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(op) = &node.op else {
                leaf_grads.push((i, g));
                continue;
            };
            match op {
                Op::Linear { x, w, b } => self.linear_backward(&g, *x, *w, *b, &mut adj),
                Op::Conv2d {
                    x,
                    kernels,
                    b,
                    cols,
                    geom,
                } => self.conv_backward(&g, *x, *kernels, *b, cols, geom, &mut adj),
                Op::MaxPool2 { x, argmax } => {
                    if self.needs(*x) {
                        let mut dx = vec![T::zero(); self.nodes[x.0].value.numel()];
                        for (&src, &gv) in argmax.iter().zip(&g) {
                            dx[src] += gv;
                        }
                        accumulate(&mut adj, *x, dx);
                    }
                }
                Op::Relu { x } => {
                    if self.needs(*x) {
                        let zero = T::zero();
                        let dx = self
                            .data(*x)
                            .iter()
                            .zip(&g)
                            .map(|(&v, &gv)| if v > zero { gv } else { zero })
                            .collect();
                        accumulate(&mut adj, *x, dx);
                    }
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    if self.needs(*logits) {
                        let classes = probs.len() / labels.len();
                        let coef = g[0] / T::from_f64(labels.len() as f64);
                        let mut dz: Vec<T> = probs.iter().map(|&p| p * coef).collect();
                        for (n, &y) in labels.iter().enumerate() {
                            dz[n * classes + y] -= coef;
                        }
                        accumulate(&mut adj, *logits, dz);
                    }
                }
                Op::Add { a, b } => {
                    if self.needs(*a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::Scale { x, factor } => {
                    if self.needs(*x) {
                        let dx = g.iter().map(|&v| v * *factor).collect();
                        accumulate(&mut adj, *x, dx);
                    }
                }
                Op::Sum { x } => {
                    if self.needs(*x) {
                        let dx = vec![g[0]; self.nodes[x.0].value.numel()];
                        accumulate(&mut adj, *x, dx);
                    }
                }
                Op::Reshape { x } => {
                    if self.needs(*x) {
                        accumulate(&mut adj, *x, g);
                    }
                }
            }
        }

        for (i, g) in leaf_grads {
            if self.nodes[i].value.tracked {
                self.nodes[i].value.accumulate_grad(&g);
            }
        }
        Ok(())
    }

    fn linear_backward(&self, g: &[T], x: Var, w: Var, b: Var, adj: &mut [Option<Vec<T>>]) {
        let (batch, inp) = (self.shape(x)[0], self.shape(x)[1]);
        let out = self.shape(w)[1];
        if self.needs(x) {
            let mut dx = vec![T::zero(); batch * inp];
            gemm(
                batch,
                out,
                inp,
                T::one(),
                MatRef::row_major(g, out),
                MatRef::transposed(self.data(w), out),
                T::zero(),
                &mut dx,
            );
            accumulate(adj, x, dx);
        }
        if self.needs(w) {
            let mut dw = vec![T::zero(); inp * out];
            gemm(
                inp,
                batch,
                out,
                T::one(),
                MatRef::transposed(self.data(x), inp),
                MatRef::row_major(g, out),
                T::zero(),
                &mut dw,
            );
            accumulate(adj, w, dw);
        }
        if self.needs(b) {
            let mut db = vec![T::zero(); out];
            for row in g.chunks_exact(out) {
                db.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
            }
            accumulate(adj, b, db);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &self,
        g: &[T],
        x: Var,
        kernels: Var,
        b: Var,
        cols: &[T],
        geom: &ConvGeom,
        adj: &mut [Option<Vec<T>>],
    ) {
        let p = geom.positions();
        let bp = geom.batch * p;
        // [batch, cout, p] -> [cout, batch * p]
        let mut gt = vec![T::zero(); geom.cout * bp];
        for n in 0..geom.batch {
            for co in 0..geom.cout {
                gt[co * bp + n * p..][..p].copy_from_slice(&g[(n * geom.cout + co) * p..][..p]);
            }
        }
        if self.needs(kernels) {
            let mut dk = vec![T::zero(); geom.cout * geom.patch()];
            gemm(
                geom.cout,
                bp,
                geom.patch(),
                T::one(),
                MatRef::row_major(&gt, bp),
                MatRef::transposed(cols, bp),
                T::zero(),
                &mut dk,
            );
            accumulate(adj, kernels, dk);
        }
        if self.needs(b) {
            let db = gt.chunks_exact(bp).map(|row| row.iter().copied().sum()).collect();
            accumulate(adj, b, db);
        }
        if self.needs(x) {
            let mut dcols = vec![T::zero(); geom.patch() * bp];
            gemm(
                geom.patch(),
                geom.cout,
                bp,
                T::one(),
                MatRef::transposed(self.data(kernels), geom.patch()),
                MatRef::row_major(&gt, bp),
                T::zero(),
                &mut dcols,
            );
            accumulate(adj, x, col2im(&dcols, geom));
        }
    }
}

fn accumulate<T: Real>(adj: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// Column matrix `[cin*k*k, batch*oh*ow]`.
fn im2col<T: Real>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let bp = g.batch * g.positions();
    let mut cols = vec![T::zero(); g.patch() * bp];
    for c in 0..g.cin {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * bp..][..bp];
                for n in 0..g.batch {
                    let plane = &x[(n * g.cin + c) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.oh {
                        let src = &plane[(oy + ki) * g.w + kj..][..g.ow];
                        dst[(n * g.oh + oy) * g.ow..][..g.ow].copy_from_slice(src);
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], g: &ConvGeom) -> Vec<T> {
    let bp = g.batch * g.positions();
    let mut x = vec![T::zero(); g.batch * g.cin * g.h * g.w];
    for c in 0..g.cin {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src_row = &cols[row * bp..][..bp];
                for n in 0..g.batch {
                    let plane = &mut x[(n * g.cin + c) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.oh {
                        let src = &src_row[(n * g.oh + oy) * g.ow..][..g.ow];
                        let dst = &mut plane[(oy + ki) * g.w + kj..][..g.ow];
                        dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                    }
                }
            }
        }
    }
    x
}
