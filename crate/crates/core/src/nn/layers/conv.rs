use rand_chacha::ChaCha8Rng;

use super::he_uniform;
use crate::nn::{gemm, Mode, NnError, Real, Tensor};

/// Spatial layout of one convolution call. 1D convolutions use `h = kh = 1`.
#[derive(Debug, Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }
}

/// Convolution with "same" padding, lowered to GEMM via im2col one sample at
/// a time. Weights are `[filters, channels * kh * kw]`.
#[derive(Debug, Clone)]
pub(crate) struct Conv<T> {
    two_d: bool,
    in_ch: usize,
    filters: usize,
    kernel: usize,
    stride: usize,
    pub(crate) weight: Tensor<T>,
    pub(crate) bias: Option<Tensor<T>>,
    input: Option<Tensor<T>>,
    cols: Vec<T>,
}

impl<T: Real> Conv<T> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        two_d: bool,
        in_ch: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let patch = in_ch * kernel * if two_d { kernel } else { 1 };
        Self {
            two_d,
            in_ch,
            filters,
            kernel,
            stride,
            weight: he_uniform(&[filters, patch], patch, rng),
            bias: bias.then(|| Tensor::zeros(&[filters])),
            input: None,
            cols: Vec::new(),
        }
    }

    fn geom(&self, shape: &[usize]) -> Result<Geom, NnError> {
        let ok = shape.len() == if self.two_d { 4 } else { 3 } && shape[1] == self.in_ch;
        if !ok {
            return Err(NnError::ShapeMismatch {
                layer: None,
                expected: vec![self.in_ch],
                got: shape.to_vec(),
            });
        }
        let (h, w) = if self.two_d { (shape[2], shape[3]) } else { (1, shape[2]) };
        let kh = if self.two_d { self.kernel } else { 1 };
        let sh = if self.two_d { self.stride } else { 1 };
        let (ph, pw) = ((kh - 1) / 2, (self.kernel - 1) / 2);
        Ok(Geom {
            c: self.in_ch,
            h,
            w,
            kh,
            kw: self.kernel,
            sh,
            sw: self.stride,
            ph,
            pw,
            oh: (h + 2 * ph - kh) / sh + 1,
            ow: (w + 2 * pw - self.kernel) / self.stride + 1,
        })
    }

    fn out_shape(&self, batch: usize, g: &Geom) -> Vec<usize> {
        if self.two_d {
            vec![batch, self.filters, g.oh, g.ow]
        } else {
            vec![batch, self.filters, g.ow]
        }
    }

    pub(crate) fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let g = self.geom(x.shape())?;
        let batch = x.batch();
        let (p, k) = (g.positions(), g.patch());
        let mut out = Tensor::zeros(&self.out_shape(batch, &g));
        self.cols.resize(k * p, T::zero());
        let in_len = x.item_len();
        for b in 0..batch {
            let xb = &x.data()[b * in_len..(b + 1) * in_len];
            let ob = &mut out.data_mut()[b * self.filters * p..(b + 1) * self.filters * p];
            im2col(xb, &g, &mut self.cols);
            gemm(false, false, self.filters, p, k, T::one(), self.weight.data(), &self.cols, T::zero(), ob);
            if let Some(bias) = &self.bias {
                for (row, &bv) in ob.chunks_mut(p).zip(bias.data()) {
                    row.iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        self.input = mode.keeps_cache().then_some(x);
        Ok(out)
    }

    pub(crate) fn backward(&mut self, dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.input.take().ok_or(NnError::NoForwardState { layer: None })?;
        let g = self.geom(x.shape())?;
        let batch = x.batch();
        let (p, k) = (g.positions(), g.patch());
        let in_len = x.item_len();
        let mut dx = Tensor::zeros(x.shape());
        let mut dcols = vec![T::zero(); k * p];
        self.cols.resize(k * p, T::zero());
        for b in 0..batch {
            let xb = &x.data()[b * in_len..(b + 1) * in_len];
            let dyb = &dy.data()[b * self.filters * p..(b + 1) * self.filters * p];
            im2col(xb, &g, &mut self.cols);
            gemm(false, true, self.filters, k, p, T::one(), dyb, &self.cols, T::one(), self.weight.grad_mut());
            if let Some(bias) = &mut self.bias {
                for (gb, row) in bias.grad_mut().iter_mut().zip(dyb.chunks(p)) {
                    *gb += row.iter().copied().sum::<T>();
                }
            }
            gemm(true, false, k, p, self.filters, T::one(), self.weight.data(), dyb, T::zero(), &mut dcols);
            col2im(&dcols, &g, &mut dx.data_mut()[b * in_len..(b + 1) * in_len]);
        }
        Ok(dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.input = None;
    }
}

fn im2col<T: Real>(x: &[T], g: &Geom, cols: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oh in 0..g.oh {
                    let dst = &mut cols[row + oh * g.ow..row + (oh + 1) * g.ow];
                    let ih = (oh * g.sh + ki) as isize - g.ph as isize;
                    if ih < 0 || ih >= g.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for (ow, d) in dst.iter_mut().enumerate() {
                        let iw = (ow * g.sw + kj) as isize - g.pw as isize;
                        *d = if iw >= 0 && iw < g.w as isize { src[iw as usize] } else { T::zero() };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], g: &Geom, dx: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oh in 0..g.oh {
                    let ih = (oh * g.sh + ki) as isize - g.ph as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let src = &cols[row + oh * g.ow..row + (oh + 1) * g.ow];
                    let dst = &mut plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for (ow, &v) in src.iter().enumerate() {
                        let iw = (ow * g.sw + kj) as isize - g.pw as isize;
                        if iw >= 0 && iw < g.w as isize {
                            dst[iw as usize] += v;
                        }
                    }
                }
            }
        }
    }
}
