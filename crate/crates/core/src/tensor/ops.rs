//! Raw kernels over row-major slices. Shapes are validated by the caller.

pub(super) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// dA = dC·Bᵀ
pub(super) fn matmul_grad_a(dc: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut da = vec![0.0; m * k];
    for i in 0..m {
        let drow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            da[i * k + p] = drow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    da
}

/// dB = Aᵀ·dC
pub(super) fn matmul_grad_b(a: &[f64], dc: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut db = vec![0.0; k * n];
    for i in 0..m {
        let drow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let out = &mut db[p * n..(p + 1) * n];
            for (o, d) in out.iter_mut().zip(drow) {
                *o += av * d;
            }
        }
    }
    db
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    fn cin_per_group(&self) -> usize {
        self.c / self.groups
    }

    fn fout_per_group(&self) -> usize {
        self.f / self.groups
    }

    /// Output positions `o` along one axis for which `o*stride + kk - padding`
    /// falls inside `[0, extent)`.
    fn valid_range(&self, kk: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = kk as isize - self.padding as isize;
        // smallest o with o*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest o with o*s + off <= extent-1
        let top = extent as isize - 1 - off;
        if top < 0 {
            return (0, 0);
        }
        let hi = (top / s + 1).min(out_extent as isize);
        if lo >= hi {
            (0, 0)
        } else {
            (lo as usize, hi as usize)
        }
    }

    /// Visits every (input index, kernel index, output index) triple with a
    /// non-padding contribution.
    #[inline]
    fn for_each_tap(&self, mut visit: impl FnMut(usize, usize, usize)) {
        let cg = self.cin_per_group();
        let fg = self.fout_per_group();
        let k = self.k;
        for n in 0..self.n {
            for f in 0..self.f {
                let group = f / fg;
                let out_base = (n * self.f + f) * self.ho * self.wo;
                for ci in 0..cg {
                    let c = group * cg + ci;
                    let in_base = (n * self.c + c) * self.h * self.w;
                    let k_base = (f * cg + ci) * k * k;
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = self.valid_range(ky, self.h, self.ho);
                        for kx in 0..k {
                            let (ox_lo, ox_hi) = self.valid_range(kx, self.w, self.wo);
                            let ki = k_base + ky * k + kx;
                            for oy in oy_lo..oy_hi {
                                let iy = oy * self.stride + ky - self.padding;
                                let orow = out_base + oy * self.wo;
                                let irow = in_base + iy * self.w;
                                for ox in ox_lo..ox_hi {
                                    let ix = ox * self.stride + kx - self.padding;
                                    visit(irow + ix, ki, orow + ox);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(super) fn conv2d(input: &[f64], kernel: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.n * g.f * g.ho * g.wo];
    g.for_each_tap(|i, k, o| out[o] += kernel[k] * input[i]);
    out
}

pub(super) fn conv2d_grad_input(dout: &[f64], kernel: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut din = vec![0.0; g.n * g.c * g.h * g.w];
    g.for_each_tap(|i, k, o| din[i] += kernel[k] * dout[o]);
    din
}

pub(super) fn conv2d_grad_kernel(dout: &[f64], input: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut dk = vec![0.0; g.f * g.cin_per_group() * g.k * g.k];
    g.for_each_tap(|i, k, o| dk[k] += input[i] * dout[o]);
    dk
}

/// Channel permutation of a grouped shuffle: input channel `j*q + i`
/// (group `j`, slot `i`) moves to output channel `i*groups + j`.
pub(super) fn shuffle_target(channel: usize, channels: usize, groups: usize) -> usize {
    let q = channels / groups;
    let (j, i) = (channel / q, channel % q);
    i * groups + j
}
