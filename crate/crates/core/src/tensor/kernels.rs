//! Raw loops behind the differentiable ops. All buffers are row-major and
//! batched: images are `[batch, channels, height, width]`, vectors
//! `[batch, features]`.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub height: usize,
    pub width: usize,
    pub out_ch: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub s_h: usize,
    pub s_w: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.height - self.k_h) / self.s_h + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width - self.k_w) / self.s_w + 1
    }

    pub fn in_plane(&self) -> usize {
        self.height * self.width
    }
}

/// Valid cross-correlation: `out[b,o,i,j] = bias[o] + Σ x[b,c,i·sh+a,j·sw+d]·w[o,c,a,d]`.
pub(crate) fn conv2d_forward(x: &[f64], w: &[f64], bias: &[f64], g: ConvGeom) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut out = vec![0.0; g.batch * g.out_ch * oh * ow];
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            let plane = &mut out[(b * g.out_ch + o) * oh * ow..][..oh * ow];
            plane.fill(bias[o]);
            for c in 0..g.in_ch {
                let xin = &x[(b * g.in_ch + c) * g.in_plane()..][..g.in_plane()];
                for ka in 0..g.k_h {
                    for kb in 0..g.k_w {
                        let wv = w[((o * g.in_ch + c) * g.k_h + ka) * g.k_w + kb];
                        for i in 0..oh {
                            let row = (i * g.s_h + ka) * g.width + kb;
                            let orow = &mut plane[i * ow..(i + 1) * ow];
                            if g.s_w == 1 {
                                let xrow = &xin[row..row + ow];
                                for (acc, &xv) in orow.iter_mut().zip(xrow) {
                                    *acc += wv * xv;
                                }
                            } else {
                                for (j, acc) in orow.iter_mut().enumerate() {
                                    *acc += wv * xin[row + j * g.s_w];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(grad_x, grad_w, grad_bias)`; `grad_x` only when requested.
pub(crate) fn conv2d_backward(
    x: &[f64],
    w: &[f64],
    gout: &[f64],
    g: ConvGeom,
    need_x: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut gx = need_x.then(|| vec![0.0; x.len()]);
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; g.out_ch];
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            let gplane = &gout[(b * g.out_ch + o) * oh * ow..][..oh * ow];
            gb[o] += gplane.iter().sum::<f64>();
            for c in 0..g.in_ch {
                let xoff = (b * g.in_ch + c) * g.in_plane();
                let xin = &x[xoff..xoff + g.in_plane()];
                for ka in 0..g.k_h {
                    for kb in 0..g.k_w {
                        let widx = ((o * g.in_ch + c) * g.k_h + ka) * g.k_w + kb;
                        let wv = w[widx];
                        let mut acc = 0.0;
                        for i in 0..oh {
                            let row = (i * g.s_h + ka) * g.width + kb;
                            let grow = &gplane[i * ow..(i + 1) * ow];
                            if g.s_w == 1 {
                                acc += grow
                                    .iter()
                                    .zip(&xin[row..row + ow])
                                    .map(|(a, b)| a * b)
                                    .sum::<f64>();
                                if let Some(gx) = gx.as_mut() {
                                    let dst = &mut gx[xoff + row..xoff + row + ow];
                                    for (d, &gv) in dst.iter_mut().zip(grow) {
                                        *d += wv * gv;
                                    }
                                }
                            } else {
                                for (j, &gv) in grow.iter().enumerate() {
                                    let xi = row + j * g.s_w;
                                    acc += gv * xin[xi];
                                    if let Some(gx) = gx.as_mut() {
                                        gx[xoff + xi] += wv * gv;
                                    }
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub planes: usize,
    pub height: usize,
    pub width: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub s_h: usize,
    pub s_w: usize,
}

impl PoolGeom {
    pub fn out_h(&self) -> usize {
        (self.height - self.k_h) / self.s_h + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width - self.k_w) / self.s_w + 1
    }
}

pub(crate) fn avgpool2d_forward(x: &[f64], g: PoolGeom) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let norm = 1.0 / (g.k_h * g.k_w) as f64;
    let mut out = vec![0.0; g.planes * oh * ow];
    for p in 0..g.planes {
        let xin = &x[p * g.height * g.width..][..g.height * g.width];
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for a in 0..g.k_h {
                    let row = (i * g.s_h + a) * g.width + j * g.s_w;
                    acc += xin[row..row + g.k_w].iter().sum::<f64>();
                }
                out[(p * oh + i) * ow + j] = acc * norm;
            }
        }
    }
    out
}

pub(crate) fn avgpool2d_backward(gout: &[f64], g: PoolGeom) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let norm = 1.0 / (g.k_h * g.k_w) as f64;
    let mut gx = vec![0.0; g.planes * g.height * g.width];
    for p in 0..g.planes {
        let dst = &mut gx[p * g.height * g.width..][..g.height * g.width];
        for i in 0..oh {
            for j in 0..ow {
                let gv = gout[(p * oh + i) * ow + j] * norm;
                for a in 0..g.k_h {
                    let row = (i * g.s_h + a) * g.width + j * g.s_w;
                    for d in &mut dst[row..row + g.k_w] {
                        *d += gv;
                    }
                }
            }
        }
    }
    gx
}

/// `out[b,o] = bias[o] + Σ_n w[o,n]·x[b,n]`.
pub(crate) fn linear_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * n_out);
    for b in 0..batch {
        let xb = &x[b * n_in..(b + 1) * n_in];
        for o in 0..n_out {
            let wo = &w[o * n_in..(o + 1) * n_in];
            out.push(bias[o] + dot(wo, xb));
        }
    }
    out
}

pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    gout: &[f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
    need_x: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut gx = need_x.then(|| vec![0.0; batch * n_in]);
    let mut gw = vec![0.0; n_out * n_in];
    let mut gb = vec![0.0; n_out];
    for b in 0..batch {
        let xb = &x[b * n_in..(b + 1) * n_in];
        for o in 0..n_out {
            let gv = gout[b * n_out + o];
            if gv == 0.0 {
                continue;
            }
            gb[o] += gv;
            axpy(gv, xb, &mut gw[o * n_in..(o + 1) * n_in]);
            if let Some(gx) = gx.as_mut() {
                axpy(gv, &w[o * n_in..(o + 1) * n_in], &mut gx[b * n_in..(b + 1) * n_in]);
            }
        }
    }
    (gx, gw, gb)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

pub(crate) fn elu_grad(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha * x.exp()
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row.
pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log Σ exp(row)`.
pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_conv() {
        let g = ConvGeom {
            batch: 1,
            in_ch: 1,
            height: 1,
            width: 1,
            out_ch: 1,
            k_h: 1,
            k_w: 1,
            s_h: 1,
            s_w: 1,
        };
        assert_eq!(conv2d_forward(&[2.0], &[3.0], &[1.0], g), vec![7.0]);
    }

    #[test]
    fn strided_conv_matches_contiguous_path() {
        // A stride-2 conv equals every other column of the stride-1 result.
        let x: Vec<f64> = (0..2 * 3 * 9).map(|v| (v as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..4 * 2 * 2 * 3).map(|v| (v as f64 * 0.11).cos()).collect();
        let bias = [0.1, -0.2, 0.3, 0.0];
        let base = ConvGeom {
            batch: 1,
            in_ch: 2,
            height: 3,
            width: 9,
            out_ch: 4,
            k_h: 2,
            k_w: 3,
            s_h: 1,
            s_w: 1,
        };
        let strided = ConvGeom { s_w: 2, ..base };
        let full = conv2d_forward(&x, &w, &bias, base);
        let sub = conv2d_forward(&x, &w, &bias, strided);
        let (fw, sw) = (base.out_w(), strided.out_w());
        for o in 0..4 {
            for i in 0..base.out_h() {
                for j in 0..sw {
                    let a = full[(o * base.out_h() + i) * fw + 2 * j];
                    let b = sub[(o * strided.out_h() + i) * sw + j];
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
