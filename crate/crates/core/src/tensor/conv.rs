use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// How frames outside the clip are synthesised for temporal padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TemporalPadding {
    Zero,
    /// Out-of-range frame indices clamp to the first/last frame.
    #[default]
    Replicate,
}

/// Geometry of a 3D convolution over `[C_in, T, H, W]` inputs.
///
/// Temporal stride is always 1. Spatial padding is zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dSpec {
    pub stride: usize,
    pub padding: usize,
    pub temporal_padding: usize,
    pub temporal_mode: TemporalPadding,
}

impl Conv3dSpec {
    /// "Same"-style padding for a kernel of temporal extent `kt` and spatial extent `k`.
    pub fn same(kt: usize, k: usize, stride: usize, temporal_mode: TemporalPadding) -> Self {
        Conv3dSpec {
            stride,
            padding: k / 2,
            temporal_padding: kt / 2,
            temporal_mode,
        }
    }
}

pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kt: usize,
    pub kh: usize,
    pub kw: usize,
    pub t_out: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeometry {
    pub fn new(x: &[usize], w: &[usize], spec: &Conv3dSpec) -> Result<Self> {
        if x.len() != 4 || w.len() != 5 || x[0] != w[1] {
            return Err(Error::shape("conv3d", x, w));
        }
        if spec.stride == 0 {
            return Err(Error::InvalidArgument("conv3d stride must be >= 1".into()));
        }
        let (c_in, t, h, wd) = (x[0], x[1], x[2], x[3]);
        let (c_out, kt, kh, kw) = (w[0], w[2], w[3], w[4]);
        let tp = t + 2 * spec.temporal_padding;
        let hp = h + 2 * spec.padding;
        let wp = wd + 2 * spec.padding;
        if kt > tp || kh > hp || kw > wp {
            return Err(Error::InvalidArgument(format!(
                "conv3d kernel {kt}x{kh}x{kw} larger than padded input {tp}x{hp}x{wp}"
            )));
        }
        Ok(ConvGeometry {
            c_in,
            t,
            h,
            w: wd,
            c_out,
            kt,
            kh,
            kw,
            t_out: tp - kt + 1,
            h_out: (hp - kh) / spec.stride + 1,
            w_out: (wp - kw) / spec.stride + 1,
        })
    }

    fn input_frame(&self, spec: &Conv3dSpec, to: usize, dt: usize) -> Option<usize> {
        let ti = (to + dt) as isize - spec.temporal_padding as isize;
        if ti >= 0 && (ti as usize) < self.t {
            return Some(ti as usize);
        }
        match spec.temporal_mode {
            TemporalPadding::Zero => None,
            TemporalPadding::Replicate => Some(ti.clamp(0, self.t as isize - 1) as usize),
        }
    }

    fn input_row(&self, spec: &Conv3dSpec, yo: usize, dy: usize) -> Option<usize> {
        let yi = (yo * spec.stride + dy) as isize - spec.padding as isize;
        (yi >= 0 && (yi as usize) < self.h).then_some(yi as usize)
    }

    /// Output columns whose input column `xo*stride + dx - padding` is in range,
    /// together with the first input column.
    fn column_span(&self, spec: &Conv3dSpec, dx: usize) -> Option<(usize, usize, usize)> {
        let s = spec.stride;
        let p = spec.padding;
        let lo = if p > dx { (p - dx).div_ceil(s) } else { 0 };
        let last = self.w - 1 + p;
        if last < dx {
            return None;
        }
        let hi = ((last - dx) / s + 1).min(self.w_out);
        if lo >= hi {
            return None;
        }
        Some((lo, hi, lo * s + dx - p))
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.c_out, self.t_out, self.h_out, self.w_out]
    }
}

pub(crate) fn forward(x: &Tensor, w: &Tensor, spec: &Conv3dSpec) -> Result<Tensor> {
    let g = ConvGeometry::new(x.shape(), w.shape(), spec)?;
    let mut out = vec![0.0; g.c_out * g.t_out * g.h_out * g.w_out];
    let (xd, wd) = (x.data(), w.data());
    let s = spec.stride;
    let plane_out = g.h_out * g.w_out;
    let plane_in = g.h * g.w;
    for co in 0..g.c_out {
        for ci in 0..g.c_in {
            for dt in 0..g.kt {
                for dy in 0..g.kh {
                    for dx in 0..g.kw {
                        let wv = wd[(((co * g.c_in + ci) * g.kt + dt) * g.kh + dy) * g.kw + dx];
                        if wv == 0.0 {
                            continue;
                        }
                        let Some((lo, hi, xi0)) = g.column_span(spec, dx) else {
                            continue;
                        };
                        for to in 0..g.t_out {
                            let Some(ti) = g.input_frame(spec, to, dt) else {
                                continue;
                            };
                            for yo in 0..g.h_out {
                                let Some(yi) = g.input_row(spec, yo, dy) else {
                                    continue;
                                };
                                let ob = (co * g.t_out + to) * plane_out + yo * g.w_out;
                                let ib = (ci * g.t + ti) * plane_in + yi * g.w + xi0;
                                let orow = &mut out[ob + lo..ob + hi];
                                if s == 1 {
                                    let irow = &xd[ib..ib + (hi - lo)];
                                    for (o, i) in orow.iter_mut().zip(irow) {
                                        *o += wv * i;
                                    }
                                } else {
                                    for (k, o) in orow.iter_mut().enumerate() {
                                        *o += wv * xd[ib + k * s];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(g.out_shape(), out)
}

/// Gradients with respect to the input and the kernel.
pub(crate) fn backward(
    x: &Tensor,
    w: &Tensor,
    spec: &Conv3dSpec,
    dout: &Tensor,
    want_dx: bool,
    want_dw: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let g = ConvGeometry::new(x.shape(), w.shape(), spec)?;
    let mut gx = want_dx.then(|| vec![0.0; x.len()]);
    let mut gw = want_dw.then(|| vec![0.0; w.len()]);
    let (xd, wd, dd) = (x.data(), w.data(), dout.data());
    let s = spec.stride;
    let plane_out = g.h_out * g.w_out;
    let plane_in = g.h * g.w;
    for co in 0..g.c_out {
        for ci in 0..g.c_in {
            for dt in 0..g.kt {
                for dy in 0..g.kh {
                    for dx in 0..g.kw {
                        let widx = (((co * g.c_in + ci) * g.kt + dt) * g.kh + dy) * g.kw + dx;
                        let wv = wd[widx];
                        let Some((lo, hi, xi0)) = g.column_span(spec, dx) else {
                            continue;
                        };
                        let mut acc = 0.0;
                        for to in 0..g.t_out {
                            let Some(ti) = g.input_frame(spec, to, dt) else {
                                continue;
                            };
                            for yo in 0..g.h_out {
                                let Some(yi) = g.input_row(spec, yo, dy) else {
                                    continue;
                                };
                                let ob = (co * g.t_out + to) * plane_out + yo * g.w_out;
                                let ib = (ci * g.t + ti) * plane_in + yi * g.w + xi0;
                                let drow = &dd[ob + lo..ob + hi];
                                if let Some(gx) = gx.as_mut() {
                                    if s == 1 {
                                        let xrow = &mut gx[ib..ib + (hi - lo)];
                                        for (xg, d) in xrow.iter_mut().zip(drow) {
                                            *xg += wv * d;
                                        }
                                    } else {
                                        for (k, d) in drow.iter().enumerate() {
                                            gx[ib + k * s] += wv * d;
                                        }
                                    }
                                }
                                if gw.is_some() {
                                    if s == 1 {
                                        let irow = &xd[ib..ib + (hi - lo)];
                                        acc += irow.iter().zip(drow).map(|(a, b)| a * b).sum::<f64>();
                                    } else {
                                        for (k, d) in drow.iter().enumerate() {
                                            acc += xd[ib + k * s] * d;
                                        }
                                    }
                                }
                            }
                        }
                        if let Some(gw) = gw.as_mut() {
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
    }
    let gx = gx.map(|v| Tensor::new(x.shape().to_vec(), v)).transpose()?;
    let gw = gw.map(|v| Tensor::new(w.shape().to_vec(), v)).transpose()?;
    Ok((gx, gw))
}
