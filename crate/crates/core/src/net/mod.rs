//! Residual multilayer network with gated blocks and exact backpropagation.
//!
//! Layout: a dense map stores its weight as `(in, out)` so a batch of row
//! vectors `x` maps to `x · W + b`. The network is
//!
//! ```text
//! h_0 = act(x · W_in + b_in)
//! h_l = act(h_{l-1} + f_l(h_{l-1}))   if block l is alive
//! h_l = h_{l-1}                       if block l is dead
//! logits = h_L · W_head + b_head
//! f_l(h) = act(h · W_1 + b_1) · W_2 + b_2
//! ```

pub mod checkpoint;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};
use crate::gates::{GateMask, RngState};
use crate::schedule::SurvivalProfile;

/// Floating-point element type of a network.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Bytes per value in the checkpoint format.
    const WIDTH: u8;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    /// Makes the whole network affine in its input; used by the
    /// expectation tests.
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, a: &mut Array2<T>) {
        if self == Activation::Relu {
            a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
        }
    }

    /// Multiplies `grad` by the derivative at pre-activation `pre`.
    fn backprop<T: Scalar>(self, grad: &mut Array2<T>, pre: &Array2<T>) {
        if self == Activation::Relu {
            ndarray::Zip::from(grad).and(pre).for_each(|g, &p| {
                if p <= T::zero() {
                    *g = T::zero();
                }
            });
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Affine map `x · w + b` with `w` of shape `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    /// Gaussian weights with variance `var`, zero bias.
    pub fn gaussian(input: usize, output: usize, var: f64, rng: &mut RngState) -> Self {
        let std = var.sqrt();
        let w =
            Array2::from_shape_simple_fn((input, output), || T::from_f64_lossy(rng.normal() * std));
        Self {
            w,
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub inner: Dense<T>,
    pub outer: Dense<T>,
}

/// All trainable tensors. Gradients and optimizer state share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub input_proj: Dense<T>,
    pub blocks: Vec<Block<T>>,
    pub head: Dense<T>,
}

pub type Gradients<T> = Params<T>;

impl<T: Scalar> Params<T> {
    pub fn zeros(shape: NetShape) -> Self {
        Self {
            input_proj: Dense::zeros(shape.input_dim, shape.width),
            blocks: (0..shape.blocks)
                .map(|_| Block {
                    inner: Dense::zeros(shape.width, shape.width),
                    outer: Dense::zeros(shape.width, shape.width),
                })
                .collect(),
            head: Dense::zeros(shape.width, shape.classes),
        }
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            blocks: self.blocks.len(),
            width: self.input_proj.output_dim(),
            input_dim: self.input_proj.input_dim(),
            classes: self.head.output_dim(),
        }
    }

    /// Every dense map in storage order: input projection, then each
    /// block's inner and outer map, then the head.
    pub fn dense_maps(&self) -> Vec<&Dense<T>> {
        let mut out = vec![&self.input_proj];
        for b in &self.blocks {
            out.push(&b.inner);
            out.push(&b.outer);
        }
        out.push(&self.head);
        out
    }

    pub fn dense_maps_mut(&mut self) -> Vec<&mut Dense<T>> {
        let mut out = vec![&mut self.input_proj];
        for b in &mut self.blocks {
            out.push(&mut b.inner);
            out.push(&mut b.outer);
        }
        out.push(&mut self.head);
        out
    }

    /// Flat views of every tensor, weights before biases per map.
    pub fn slices(&self) -> Vec<&[T]> {
        self.dense_maps()
            .into_iter()
            .flat_map(|d| {
                [
                    d.w.as_slice().expect("standard layout"),
                    d.b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.dense_maps_mut()
            .into_iter()
            .flat_map(|d| {
                [
                    d.w.as_slice_mut().expect("standard layout"),
                    d.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &Self) -> bool {
        let a = self.dense_maps();
        let b = other.dense_maps();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.w.dim() == y.w.dim() && x.b.dim() == y.b.dim())
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape("parameter sets have different layouts"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub blocks: usize,
    pub width: usize,
    pub input_dim: usize,
    pub classes: usize,
}

impl NetShape {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("blocks", self.blocks),
            ("width", self.width),
            ("input_dim", self.input_dim),
            ("classes", self.classes),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNet<T> {
    pub params: Params<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    input: Array2<T>,
    inner_pre: Array2<T>,
    inner_post: Array2<T>,
    sum: Array2<T>,
}

/// Activations saved by a training forward pass for [`ResidualNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input: Array2<T>,
    proj_pre: Array2<T>,
    blocks: Vec<Option<BlockCache<T>>>,
    last_hidden: Array2<T>,
    pub logits: Array2<T>,
    pub mask: GateMask,
}

impl<T> ForwardCache<T> {
    /// Number of residual-branch evaluations this pass performed.
    pub fn blocks_executed(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

impl<T: Scalar> ResidualNet<T> {
    /// He-normal input projection and inner block maps (variance
    /// `2 / fan_in`), outer block maps with variance `1 / (fan_in * L)` so
    /// the residual stream stays bounded at depth, zero head, zero biases.
    pub fn init(shape: NetShape, rng: &mut RngState) -> Result<Self> {
        shape.validate()?;
        let w = shape.width;
        let input_proj = Dense::gaussian(shape.input_dim, w, 2.0 / shape.input_dim as f64, rng);
        let blocks = (0..shape.blocks)
            .map(|_| Block {
                inner: Dense::gaussian(w, w, 2.0 / w as f64, rng),
                outer: Dense::gaussian(w, w, 1.0 / (w * shape.blocks) as f64, rng),
            })
            .collect();
        Ok(Self {
            params: Params {
                input_proj,
                blocks,
                head: Dense::zeros(w, shape.classes),
            },
            activation: Activation::Relu,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn shape(&self) -> NetShape {
        self.params.shape()
    }

    pub fn blocks(&self) -> usize {
        self.params.blocks.len()
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        let d = self.params.input_proj.input_dim();
        if x.ncols() != d {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {d}",
                x.ncols()
            )));
        }
        Ok(())
    }

    fn project(&self, x: &ArrayView2<T>) -> (Array2<T>, Array2<T>) {
        let pre = self.params.input_proj.forward(x);
        let mut h = pre.clone();
        self.activation.apply(&mut h);
        (pre, h)
    }

    /// Residual branch `f_l(h)`, returning `(inner_pre, inner_post, f)`.
    fn branch(&self, block: &Block<T>, h: &Array2<T>) -> (Array2<T>, Array2<T>, Array2<T>) {
        let pre = block.inner.forward(&h.view());
        let mut post = pre.clone();
        self.activation.apply(&mut post);
        let f = block.outer.forward(&post.view());
        (pre, post, f)
    }

    pub fn forward_train(&self, x: ArrayView2<T>, mask: &GateMask) -> Result<ForwardCache<T>> {
        self.check_input(&x)?;
        if mask.blocks() != self.blocks() {
            return Err(Error::shape(format!(
                "mask has {} entries, network has {} blocks",
                mask.blocks(),
                self.blocks()
            )));
        }
        let (proj_pre, mut h) = self.project(&x);
        let mut caches = Vec::with_capacity(self.blocks());
        for (block, &alive) in self.params.blocks.iter().zip(mask.alive()) {
            if !alive {
                caches.push(None);
                continue;
            }
            let (inner_pre, inner_post, f) = self.branch(block, &h);
            let sum = &h + &f;
            let mut next = sum.clone();
            self.activation.apply(&mut next);
            let input = std::mem::replace(&mut h, next);
            caches.push(Some(BlockCache {
                input,
                inner_pre,
                inner_post,
                sum,
            }));
        }
        let logits = self.params.head.forward(&h.view());
        Ok(ForwardCache {
            input: x.to_owned(),
            proj_pre,
            blocks: caches,
            last_hidden: h,
            logits,
            mask: mask.clone(),
        })
    }

    /// Logits of a training-mode pass without keeping the cache.
    pub fn forward_masked(&self, x: ArrayView2<T>, mask: &GateMask) -> Result<Array2<T>> {
        self.forward_train(x, mask).map(|c| c.logits)
    }

    /// Deterministic inference pass with each residual branch scaled by its
    /// survival probability.
    pub fn forward_eval(&self, x: ArrayView2<T>, profile: &SurvivalProfile) -> Result<Array2<T>> {
        self.check_input(&x)?;
        if profile.blocks() != self.blocks() {
            return Err(Error::shape(format!(
                "profile has {} entries, network has {} blocks",
                profile.blocks(),
                self.blocks()
            )));
        }
        let (_, mut h) = self.project(&x);
        for (block, &p) in self.params.blocks.iter().zip(profile.probs()) {
            if p == 0.0 {
                continue;
            }
            let (_, _, mut f) = self.branch(block, &h);
            if p != 1.0 {
                f *= T::from_f64_lossy(p);
            }
            h += &f;
            self.activation.apply(&mut h);
        }
        Ok(self.params.head.forward(&h.view()))
    }

    /// Exact gradients of the mean cross-entropy for the pass in `cache`.
    pub fn backward(&self, cache: &ForwardCache<T>, labels: &[usize]) -> Result<Gradients<T>> {
        let shape = self.shape();
        if cache.blocks.len() != shape.blocks
            || cache.input.ncols() != shape.input_dim
            || cache.logits.ncols() != shape.classes
            || cache.last_hidden.ncols() != shape.width
        {
            return Err(Error::shape("forward cache does not match this network"));
        }
        let mut grads = Params::zeros(shape);
        let mut g = loss_grad(&cache.logits, labels)?;

        grads.head.w = cache.last_hidden.t().dot(&g);
        grads.head.b = g.sum_axis(Axis(0));
        let mut dh = g.dot(&self.params.head.w.t());

        for ((block, bc), gb) in self
            .params
            .blocks
            .iter()
            .zip(&cache.blocks)
            .zip(grads.blocks.iter_mut())
            .rev()
        {
            let Some(bc) = bc else {
                continue;
            };
            let mut du = dh;
            self.activation.backprop(&mut du, &bc.sum);
            gb.outer.w = bc.inner_post.t().dot(&du);
            gb.outer.b = du.sum_axis(Axis(0));
            let mut da = du.dot(&block.outer.w.t());
            self.activation.backprop(&mut da, &bc.inner_pre);
            gb.inner.w = bc.input.t().dot(&da);
            gb.inner.b = da.sum_axis(Axis(0));
            dh = du + da.dot(&block.inner.w.t());
        }

        g = dh;
        self.activation.backprop(&mut g, &cache.proj_pre);
        grads.input_proj.w = cache.input.t().dot(&g);
        grads.input_proj.b = g.sum_axis(Axis(0));
        Ok(grads)
    }

    /// Same network in another precision.
    pub fn cast<U: Scalar>(&self) -> ResidualNet<U> {
        let conv = |d: &Dense<T>| Dense {
            w: d.w.mapv(|v| U::from_f64_lossy(v.to_f64_lossy())),
            b: d.b.mapv(|v| U::from_f64_lossy(v.to_f64_lossy())),
        };
        ResidualNet {
            params: Params {
                input_proj: conv(&self.params.input_proj),
                blocks: self
                    .params
                    .blocks
                    .iter()
                    .map(|b| Block {
                        inner: conv(&b.inner),
                        outer: conv(&b.outer),
                    })
                    .collect(),
                head: conv(&self.params.head),
            },
            activation: self.activation,
        }
    }
}

fn check_labels<T>(logits: &Array2<T>, labels: &[usize]) -> Result<()> {
    if logits.nrows() != labels.len() {
        return Err(Error::shape(format!(
            "{} logit rows but {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if logits.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let classes = logits.ncols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean softmax cross-entropy, evaluated in double precision with the row
/// maximum subtracted.
pub fn loss<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let mut total = 0.0;
    for (row, &y) in logits.outer_iter().zip(labels) {
        let max = row
            .iter()
            .map(|v| v.to_f64_lossy())
            .fold(f64::NEG_INFINITY, f64::max);
        let lse: f64 = row
            .iter()
            .map(|v| (v.to_f64_lossy() - max).exp())
            .sum::<f64>()
            .ln();
        total += lse - (row[y].to_f64_lossy() - max);
    }
    Ok(total / labels.len() as f64)
}

/// Gradient of [`loss`] with respect to the logits: `(softmax - onehot) / n`.
pub fn loss_grad<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> Result<Array2<T>> {
    check_labels(logits, labels)?;
    let n = T::from_usize(labels.len()).expect("batch size fits");
    let mut g = logits.clone();
    for (mut row, &y) in g.outer_iter_mut().zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let z: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / z);
        row[y] -= T::one();
        row.mapv_inplace(|v| v / n);
    }
    Ok(g)
}

/// Row argmax, ties broken toward the lowest class index.
pub fn argmax_rows<T: Scalar>(logits: &Array2<T>) -> Vec<usize> {
    logits
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub fn error_count<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> Result<usize> {
    check_labels(logits, labels)?;
    Ok(argmax_rows(logits)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p != y)
        .count())
}

pub fn error_rate<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> Result<f64> {
    Ok(error_count(logits, labels)? as f64 / labels.len() as f64)
}
