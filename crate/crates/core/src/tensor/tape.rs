use super::ops::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Conv2d { input: Var, kernel: Var, geom: ConvGeom },
    Relu { x: Var },
    AddBias { x: Var, bias: Var, channels: usize, inner: usize },
    Add { a: Var, b: Var },
    Scale { x: Var, s: Var },
    ChannelShuffle { x: Var, groups: usize, channels: usize, inner: usize },
    GlobalAvgPool { x: Var, spatial: usize },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Output extent of a convolution along one axis, rejecting configurations
/// whose output size is not integral.
pub fn conv_output_size(extent: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Config("convolution stride must be positive".into()));
    }
    let span = extent + 2 * padding;
    if span < k {
        return Err(Error::Config(format!(
            "kernel {k} larger than padded extent {span}"
        )));
    }
    if (span - k) % stride != 0 {
        return Err(Error::Config(format!(
            "output size ({extent} + 2*{padding} - {k})/{stride} + 1 is not integral"
        )));
    }
    Ok((span - k) / stride + 1)
}

/// Records primitive applications for one forward pass.
///
/// The tape is consumed by [`Tape::backward`]; a new tape is needed for
/// every forward/backward pair.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded values. All of them stay live until backward, so
    /// this is also the peak live-tensor count of the pass.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Every recorded value, in recording order.
    pub fn values(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().map(|n| n.value.as_slice())
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// The single value of a scalar (or one-element) variable.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Copies a tensor onto the tape. Its `requires_grad` flag decides
    /// whether backward produces a gradient for it.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad(), Op::Leaf)
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.leaf(&t))
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        name: &'static str,
        shape: Vec<usize>,
        value: Vec<f64>,
        requires_grad: bool,
        op: Op,
    ) -> Result<Var> {
        if let Some(i) = value.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{name} produced non-finite value {} at flat index {i}",
                value[i]
            )));
        }
        Ok(self.push(shape, value, requires_grad, op))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// `[m×k]·[k×n] → [m×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim(
                "matmul",
                format!("cannot multiply {:?} by {:?}", sa, sb),
            ));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = ops::matmul(self.value(a), self.value(b), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push_checked("matmul", vec![m, n], out, rg, Op::MatMul { a, b, m, k, n })
    }

    /// Plain 2-d cross-correlation, `groups = 1`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        self.conv2d_grouped(input, kernel, stride, padding, 1)
    }

    /// Grouped 2-d cross-correlation. Input `[N×C×H×W]`, kernel
    /// `[F×(C/groups)×k×k]` with odd `k`. `groups == C == F` is a depthwise
    /// convolution.
    pub fn conv2d_grouped(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Var> {
        let (si, sk) = (self.shape(input).to_vec(), self.shape(kernel).to_vec());
        if si.len() != 4 || sk.len() != 4 {
            return Err(Error::dim(
                "conv2d",
                format!("expected rank-4 input and kernel, got {:?} and {:?}", si, sk),
            ));
        }
        let (n, c, h, w) = (si[0], si[1], si[2], si[3]);
        let (f, cg, k) = (sk[0], sk[1], sk[2]);
        if sk[3] != k {
            return Err(Error::dim("conv2d", format!("kernel {:?} is not square", sk)));
        }
        if k % 2 == 0 {
            return Err(Error::Config(format!("conv2d kernel size {k} must be odd")));
        }
        if groups == 0 || c % groups != 0 || f % groups != 0 || cg != c / groups {
            return Err(Error::dim(
                "conv2d",
                format!("input {:?} and kernel {:?} disagree for {groups} groups", si, sk),
            ));
        }
        let ho = conv_output_size(h, k, stride, padding)?;
        let wo = conv_output_size(w, k, stride, padding)?;
        let geom = ConvGeom {
            n,
            c,
            h,
            w,
            f,
            k,
            stride,
            padding,
            groups,
            ho,
            wo,
        };
        let out = ops::conv2d(self.value(input), self.value(kernel), &geom);
        let rg = self.rg(input) || self.rg(kernel);
        self.push_checked(
            "conv2d",
            vec![n, f, ho, wo],
            out,
            rg,
            Op::Conv2d {
                input,
                kernel,
                geom,
            },
        )
    }

    /// Elementwise `max(0, x)`. The subgradient at exactly 0 is 0.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        self.push_checked("relu", shape, out, rg, Op::Relu { x })
    }

    /// Adds `bias[c]` along axis 1 of `x` (`[N×C]` or `[N×C×H×W]`).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sb = self.shape(bias);
        if sx.len() < 2 || sb.len() != 1 || sb[0] != sx[1] {
            return Err(Error::dim(
                "add_bias",
                format!("bias {:?} does not match axis 1 of {:?}", sb, sx),
            ));
        }
        let channels = sx[1];
        let inner: usize = sx[2..].iter().product();
        let b = self.value(bias);
        let out = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[(i / inner) % channels])
            .collect();
        let rg = self.rg(x) || self.rg(bias);
        self.push_checked(
            "add_bias",
            sx,
            out,
            rg,
            Op::AddBias {
                x,
                bias,
                channels,
                inner,
            },
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                "add",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push_checked("add", shape, out, rg, Op::Add { a, b })
    }

    /// Multiplies every element of `x` by the one-element variable `s`.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::dim(
                "scale",
                format!("scale factor must have one element, got shape {:?}", self.shape(s)),
            ));
        }
        let sv = self.scalar(s);
        let out = self.value(x).iter().map(|v| v * sv).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x) || self.rg(s);
        self.push_checked("scale", shape, out, rg, Op::Scale { x, s })
    }

    /// Interleaves channel groups of `[N×C×...]`.
    pub fn channel_shuffle(&mut self, x: Var, groups: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() < 2 || groups == 0 || sx[1] % groups != 0 {
            return Err(Error::dim(
                "channel_shuffle",
                format!("{} groups do not divide channels of {:?}", groups, sx),
            ));
        }
        let channels = sx[1];
        let inner: usize = sx[2..].iter().product();
        let src = self.value(x);
        let mut out = vec![0.0; src.len()];
        for (block_in, block_out) in src.chunks(channels * inner).zip(out.chunks_mut(channels * inner)) {
            for c in 0..channels {
                let t = ops::shuffle_target(c, channels, groups);
                block_out[t * inner..(t + 1) * inner].copy_from_slice(&block_in[c * inner..(c + 1) * inner]);
            }
        }
        let rg = self.rg(x);
        self.push_checked(
            "channel_shuffle",
            sx,
            out,
            rg,
            Op::ChannelShuffle {
                x,
                groups,
                channels,
                inner,
            },
        )
    }

    /// `[N×C×H×W] → [N×C]` mean over spatial positions.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 4 {
            return Err(Error::dim("global_avg_pool", format!("expected rank 4, got {:?}", sx)));
        }
        let spatial = sx[2] * sx[3];
        let out = self
            .value(x)
            .chunks(spatial)
            .map(|c| c.iter().sum::<f64>() / spatial as f64)
            .collect();
        let rg = self.rg(x);
        self.push_checked(
            "global_avg_pool",
            vec![sx[0], sx[1]],
            out,
            rg,
            Op::GlobalAvgPool { x, spatial },
        )
    }

    /// Mean over the batch of `-log softmax(logits)[label]`, computed with
    /// max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let sl = self.shape(logits);
        if sl.len() != 2 || sl[0] != labels.len() || sl[0] == 0 {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("logits {:?} with {} labels", sl, labels.len()),
            ));
        }
        let (n, c) = (sl[0], sl[1]);
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return Err(Error::Data(format!(
                "label {l} at batch index {i} is outside [0, {c})"
            )));
        }
        let z = self.value(logits);
        let mut probs = vec![0.0; n * c];
        let mut total = 0.0;
        for (row, (zr, pr)) in z.chunks(c).zip(probs.chunks_mut(c)).enumerate() {
            let max = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &v) in pr.iter_mut().zip(zr) {
                *p = (v - max).exp();
                sum += *p;
            }
            pr.iter_mut().for_each(|p| *p /= sum);
            total += sum.ln() + max - zr[labels[row]];
        }
        let rg = self.rg(logits);
        self.push_checked(
            "softmax_cross_entropy",
            vec![],
            vec![total / n as f64],
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Replays backward rules from `loss` (which must hold one element) in
    /// reverse recording order, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul { a, b, m, k, n } => {
                    if self.rg(*a) {
                        let da = ops::matmul_grad_a(&g, self.value(*b), *m, *k, *n);
                        accumulate(&mut grads, *a, &da);
                    }
                    if self.rg(*b) {
                        let db = ops::matmul_grad_b(self.value(*a), &g, *m, *k, *n);
                        accumulate(&mut grads, *b, &db);
                    }
                }
                Op::Conv2d {
                    input,
                    kernel,
                    geom,
                } => {
                    if self.rg(*input) {
                        let di = ops::conv2d_grad_input(&g, self.value(*kernel), geom);
                        accumulate(&mut grads, *input, &di);
                    }
                    if self.rg(*kernel) {
                        let dk = ops::conv2d_grad_kernel(&g, self.value(*input), geom);
                        accumulate(&mut grads, *kernel, &dk);
                    }
                }
                Op::Relu { x } => {
                    let dx: Vec<f64> = self
                        .value(*x)
                        .iter()
                        .zip(&g)
                        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::AddBias {
                    x,
                    bias,
                    channels,
                    inner,
                } => {
                    if self.rg(*x) {
                        accumulate(&mut grads, *x, &g);
                    }
                    if self.rg(*bias) {
                        let mut db = vec![0.0; *channels];
                        for (i, d) in g.iter().enumerate() {
                            db[(i / inner) % channels] += d;
                        }
                        accumulate(&mut grads, *bias, &db);
                    }
                }
                Op::Add { a, b } => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, &g);
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, &g);
                    }
                }
                Op::Scale { x, s } => {
                    if self.rg(*x) {
                        let sv = self.scalar(*s);
                        let dx: Vec<f64> = g.iter().map(|d| d * sv).collect();
                        accumulate(&mut grads, *x, &dx);
                    }
                    if self.rg(*s) {
                        let ds: f64 = g.iter().zip(self.value(*x)).map(|(d, v)| d * v).sum();
                        accumulate(&mut grads, *s, &[ds]);
                    }
                }
                Op::ChannelShuffle {
                    x,
                    groups,
                    channels,
                    inner,
                } => {
                    let mut dx = vec![0.0; g.len()];
                    let block = channels * inner;
                    for (gb, db) in g.chunks(block).zip(dx.chunks_mut(block)) {
                        for c in 0..*channels {
                            let t = ops::shuffle_target(c, *channels, *groups);
                            db[c * inner..(c + 1) * inner].copy_from_slice(&gb[t * inner..(t + 1) * inner]);
                        }
                    }
                    accumulate(&mut grads, *x, &dx);
                }
                Op::GlobalAvgPool { x, spatial } => {
                    let inv = 1.0 / *spatial as f64;
                    let dx: Vec<f64> = g
                        .iter()
                        .flat_map(|d| std::iter::repeat(d * inv).take(*spatial))
                        .collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let n = labels.len();
                    let c = probs.len() / n;
                    let scale = g[0] / n as f64;
                    let mut dz: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                    for (row, &l) in labels.iter().enumerate() {
                        dz[row * c + l] -= scale;
                    }
                    accumulate(&mut grads, *logits, &dz);
                }
            }
        }
        // Only leaves keep their gradients.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Gradients of the loss with respect to every `requires_grad` leaf
/// reachable from it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let mut tape = Tape::new();
        let id = tape.leaf(&t(&[2, 2], &[1., 0., 0., 1.]));
        let m = tape.leaf(&t(&[2, 2], &[1., 2., 3., 4.]));
        let out = tape.matmul(id, m).unwrap();
        assert_eq!(tape.value(out), &[1., 2., 3., 4.]);

        let ones = tape.leaf(&t(&[2, 1], &[1., 1.]));
        let out = tape.matmul(m, ones).unwrap();
        assert_eq!(tape.shape(out), &[2, 1]);
        assert_eq!(tape.value(out), &[3., 7.]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(&Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(&Tensor::zeros(vec![2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("by [2, 3]"), "{err}");
    }

    #[test]
    fn conv_identity_and_counting() {
        let mut tape = Tape::new();
        let x = t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let xv = tape.leaf(&x);
        let k1 = tape.leaf(&t(&[1, 1, 1, 1], &[1.]));
        let out = tape.conv2d(xv, k1, 1, 0).unwrap();
        assert_eq!(tape.value(out), x.data());

        let ones = tape.leaf(&t(&[1, 1, 3, 3], &[1.; 9]));
        let k3 = tape.leaf(&t(&[1, 1, 3, 3], &[1.; 9]));
        let out = tape.conv2d(ones, k3, 1, 0).unwrap();
        assert_eq!(tape.shape(out), &[1, 1, 1, 1]);
        assert_eq!(tape.value(out), &[9.]);
    }

    #[test]
    fn conv_channel_sum_with_unit_kernel() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 2, 1, 2], &[1., 2., 10., 20.]));
        let k = tape.leaf(&t(&[1, 2, 1, 1], &[1., 1.]));
        let out = tape.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(tape.value(out), &[11., 22.]);
    }

    #[test]
    fn conv_rejects_non_integral_output() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::zeros(vec![1, 1, 4, 4]));
        let k = tape.leaf(&Tensor::zeros(vec![1, 1, 3, 3]));
        let err = tape.conv2d(x, k, 2, 0).unwrap_err();
        assert!(err.is_config(), "{err}");
        let k_even = tape.leaf(&Tensor::zeros(vec![1, 1, 2, 2]));
        assert!(tape.conv2d(x, k_even, 1, 0).unwrap_err().is_config());
    }

    #[test]
    fn relu_forward_and_dead_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[3], &[-1., 0., 2.]).with_grad());
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y), &[0., 0., 2.]);

        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 3], &[-1., -2., -0.5]).with_grad());
        let y = tape.relu(x).unwrap();
        assert!(tape.value(y).iter().all(|&v| v == 0.0));
        let w = tape.leaf(&t(&[3, 1], &[1., 2., 3.]));
        let s = tape.matmul(y, w).unwrap();
        let loss = tape.softmax_cross_entropy(s, &[0]).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[0., 0., 0.]);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let mut tape = Tape::new();
        let z = tape.leaf(&Tensor::zeros(vec![2, 10]));
        let loss = tape.softmax_cross_entropy(z, &[3, 9]).unwrap();
        assert!((tape.scalar(loss) - 10f64.ln()).abs() < 1e-12);

        let mut logits = vec![0.0; 5];
        logits[2] = 1000.0;
        let z = tape.leaf(&t(&[1, 5], &logits));
        let loss = tape.softmax_cross_entropy(z, &[2]).unwrap();
        assert!(tape.scalar(loss).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let mut tape = Tape::new();
        let z = tape.leaf(&Tensor::zeros(vec![2, 3]));
        let err = tape.softmax_cross_entropy(z, &[0, 3]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("batch index 1"));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.leaf(&t(&[1, 1], &[1e200]));
        let b = tape.leaf(&t(&[1, 1], &[1e200]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Numerical(_))));
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn scale_gradient_is_inner_product() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 2], &[2., -3.]).with_grad());
        let s = tape.leaf(&Tensor::scalar(1.0).with_grad());
        let y = tape.scale(x, s).unwrap();
        let loss = tape.softmax_cross_entropy(y, &[1]).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gx = grads.get(x).unwrap();
        let gs = grads.get(s).unwrap()[0];
        assert!((gs - (gx[0] * 2. + gx[1] * -3.)).abs() < 1e-15);
    }

    #[test]
    fn intermediate_gradients_are_dropped() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 2], &[1., 2.]).with_grad());
        let y = tape.relu(x).unwrap();
        let loss = tape.softmax_cross_entropy(y, &[0]).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(y).is_none());
        assert!(grads.get(x).is_some());
    }
}
