//! Forward and backward kernels for the fixed layer menu.
//!
//! Images are (height, width, channels). Conv weights are
//! (out_channels, k, k, in_channels), dense weights (out_features,
//! in_features); both biases are rank-1. All kernels are plain loops with a
//! fixed traversal order so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub(crate) fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
) -> Result<Tensor> {
    let (h, w, ci) = image_dims(input, "conv2d input")?;
    let (co, k) = conv_weight_dims(weight, ci)?;
    if bias.len() != co {
        return Err(Error::shape(&[co], bias.shape().dims(), "conv2d bias"));
    }
    if h < k || w < k {
        return Err(Error::arg(format!(
            "conv2d kernel {k} larger than input {h}x{w}"
        )));
    }
    let (oh, ow) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let x = input.data();
    let wt = weight.data();
    let b = bias.data();
    let mut out = vec![0.0; oh * ow * co];
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..co {
                let mut acc = b[oc];
                for dy in 0..k {
                    for dx in 0..k {
                        let in_base = ((oy * stride + dy) * w + (ox * stride + dx)) * ci;
                        let w_base = ((oc * k + dy) * k + dx) * ci;
                        for ic in 0..ci {
                            acc += x[in_base + ic] * wt[w_base + ic];
                        }
                    }
                }
                out[(oy * ow + ox) * co + oc] = acc;
            }
        }
    }
    Tensor::new(Shape::new(vec![oh, ow, co])?, out)
}

/// Returns (d_input, d_weight, d_bias).
pub(crate) fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (h, w, ci) = image_dims(input, "conv2d input")?;
    let (co, k) = conv_weight_dims(weight, ci)?;
    let (oh, ow, doc) = image_dims(d_out, "conv2d output gradient")?;
    if doc != co {
        return Err(Error::shape(&[co], &[doc], "conv2d output channels"));
    }
    let x = input.data();
    let wt = weight.data();
    let g = d_out.data();
    let mut dx = vec![0.0; h * w * ci];
    let mut dw = vec![0.0; co * k * k * ci];
    let mut db = vec![0.0; co];
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..co {
                let go = g[(oy * ow + ox) * co + oc];
                db[oc] += go;
                for dy in 0..k {
                    for dxk in 0..k {
                        let in_base = ((oy * stride + dy) * w + (ox * stride + dxk)) * ci;
                        let w_base = ((oc * k + dy) * k + dxk) * ci;
                        for ic in 0..ci {
                            dw[w_base + ic] += go * x[in_base + ic];
                            dx[in_base + ic] += go * wt[w_base + ic];
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape().clone(), dx)?,
        Tensor::new(weight.shape().clone(), dw)?,
        Tensor::new(Shape::new(vec![co])?, db)?,
    ))
}

pub(crate) fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub(crate) fn relu_backward(input: &Tensor, d_out: &Tensor) -> Tensor {
    let x = input.data();
    let g = d_out.data();
    let data: Vec<f64> = x
        .iter()
        .zip(g)
        .map(|(&v, &go)| if v > 0.0 { go } else { 0.0 })
        .collect();
    Tensor::new(input.shape().clone(), data).expect("relu grad stays finite")
}

pub(crate) fn maxpool_forward(input: &Tensor) -> Result<Tensor> {
    let (h, w, c) = image_dims(input, "maxpool input")?;
    if h < 2 || w < 2 {
        return Err(Error::arg(format!("maxpool needs at least 2x2 input, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = vec![0.0; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = x[((2 * oy + dy) * w + (2 * ox + dx)) * c + ch];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out[(oy * ow + ox) * c + ch] = best;
            }
        }
    }
    Tensor::new(Shape::new(vec![oh, ow, c])?, out)
}

pub(crate) fn maxpool_backward(input: &Tensor, d_out: &Tensor) -> Result<Tensor> {
    let (h, w, c) = image_dims(input, "maxpool input")?;
    let (oh, ow, oc) = image_dims(d_out, "maxpool output gradient")?;
    if oc != c || oh != h / 2 || ow != w / 2 {
        return Err(Error::shape(&[h / 2, w / 2, c], &[oh, ow, oc], "maxpool gradient"));
    }
    let x = input.data();
    let g = d_out.data();
    let mut dx = vec![0.0; h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                // Route to the first maximum in scan order, matching forward.
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..2 {
                    for dx2 in 0..2 {
                        let idx = ((2 * oy + dy) * w + (2 * ox + dx2)) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                dx[best_idx] += g[(oy * ow + ox) * c + ch];
            }
        }
    }
    Tensor::new(input.shape().clone(), dx)
}

pub(crate) fn flatten_forward(input: &Tensor) -> Result<Tensor> {
    Tensor::new(Shape::new(vec![input.len()])?, input.data().to_vec())
}

pub(crate) fn flatten_backward(input: &Tensor, d_out: &Tensor) -> Result<Tensor> {
    if d_out.len() != input.len() {
        return Err(Error::shape(
            &[input.len()],
            &[d_out.len()],
            "flatten gradient",
        ));
    }
    Tensor::new(input.shape().clone(), d_out.data().to_vec())
}

pub(crate) fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let d = vector_len(input, "dense input")?;
    let (f, wd) = dense_weight_dims(weight)?;
    if wd != d {
        return Err(Error::shape(&[f, d], weight.shape().dims(), "dense weight"));
    }
    if bias.len() != f {
        return Err(Error::shape(&[f], bias.shape().dims(), "dense bias"));
    }
    let x = input.data();
    let wt = weight.data();
    let mut out = bias.data().to_vec();
    for (fi, o) in out.iter_mut().enumerate() {
        let row = &wt[fi * d..(fi + 1) * d];
        let mut acc = 0.0;
        for (xv, wv) in x.iter().zip(row) {
            acc += xv * wv;
        }
        *o += acc;
    }
    Tensor::new(Shape::new(vec![f])?, out)
}

/// Returns (d_input, d_weight, d_bias).
pub(crate) fn dense_backward(
    input: &Tensor,
    weight: &Tensor,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = vector_len(input, "dense input")?;
    let (f, wd) = dense_weight_dims(weight)?;
    if wd != d || d_out.len() != f {
        return Err(Error::shape(&[f, d], weight.shape().dims(), "dense backward"));
    }
    let x = input.data();
    let wt = weight.data();
    let g = d_out.data();
    let mut dx = vec![0.0; d];
    let mut dw = vec![0.0; f * d];
    for fi in 0..f {
        let go = g[fi];
        let row = &wt[fi * d..(fi + 1) * d];
        let drow = &mut dw[fi * d..(fi + 1) * d];
        for di in 0..d {
            drow[di] = go * x[di];
            dx[di] += go * row[di];
        }
    }
    Ok((
        Tensor::new(input.shape().clone(), dx)?,
        Tensor::new(weight.shape().clone(), dw)?,
        Tensor::new(Shape::new(vec![f])?, g.to_vec())?,
    ))
}

fn image_dims(t: &Tensor, context: &'static str) -> Result<(usize, usize, usize)> {
    let dims = t.shape().dims();
    if dims.len() != 3 {
        return Err(Error::arg(format!(
            "{context}: expected rank-3 (h, w, c) tensor, got shape {:?}",
            dims
        )));
    }
    Ok((dims[0], dims[1], dims[2]))
}

fn vector_len(t: &Tensor, context: &'static str) -> Result<usize> {
    if t.shape().rank() != 1 {
        return Err(Error::arg(format!(
            "{context}: expected rank-1 tensor, got shape {:?}",
            t.shape().dims()
        )));
    }
    Ok(t.len())
}

fn conv_weight_dims(weight: &Tensor, ci: usize) -> Result<(usize, usize)> {
    let dims = weight.shape().dims();
    if dims.len() != 4 || dims[1] != dims[2] {
        return Err(Error::arg(format!(
            "conv2d weight must be (out, k, k, in), got shape {:?}",
            dims
        )));
    }
    if dims[3] != ci {
        return Err(Error::shape(
            &[dims[0], dims[1], dims[2], ci],
            dims,
            "conv2d input channels",
        ));
    }
    Ok((dims[0], dims[1]))
}

fn dense_weight_dims(weight: &Tensor) -> Result<(usize, usize)> {
    let dims = weight.shape().dims();
    if dims.len() != 2 {
        return Err(Error::arg(format!(
            "dense weight must be rank-2 (out, in), got shape {:?}",
            dims
        )));
    }
    Ok((dims[0], dims[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(Shape::new(shape).unwrap(), data).unwrap()
    }

    #[test]
    fn conv2d_identity_kernel() {
        // 1x1 kernel with weight 1 copies the input.
        let input = t(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let weight = t(vec![1, 1, 1, 1], vec![1.0]);
        let bias = t(vec![1], vec![0.0]);
        let out = conv2d_forward(&input, &weight, &bias, 1).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn conv2d_known_sum() {
        // 2x2 all-ones kernel over a 3x3 image computes window sums.
        let input = t(
            vec![3, 3, 1],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        );
        let weight = t(vec![1, 2, 2, 1], vec![1.0; 4]);
        let bias = t(vec![1], vec![0.5]);
        let out = conv2d_forward(&input, &weight, &bias, 1).unwrap();
        assert_eq!(out.shape().dims(), &[2, 2, 1]);
        assert_eq!(out.data(), &[12.5, 16.5, 24.5, 28.5]);
    }

    #[test]
    fn conv2d_stride_two() {
        let input = t(vec![4, 4, 1], (1..=16).map(f64::from).collect());
        let weight = t(vec![1, 2, 2, 1], vec![1.0; 4]);
        let bias = t(vec![1], vec![0.0]);
        let out = conv2d_forward(&input, &weight, &bias, 2).unwrap();
        assert_eq!(out.shape().dims(), &[2, 2, 1]);
        assert_eq!(out.data(), &[14.0, 22.0, 46.0, 54.0]);
    }

    #[test]
    fn maxpool_picks_window_maxima() {
        let input = t(
            vec![2, 4, 1],
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0],
        );
        let out = maxpool_forward(&input).unwrap();
        assert_eq!(out.shape().dims(), &[1, 2, 1]);
        assert_eq!(out.data(), &[5.0, 7.0]);
    }

    #[test]
    fn maxpool_drops_odd_edges() {
        let input = t(vec![3, 3, 1], vec![9.0, 1.0, 99.0, 2.0, 3.0, 99.0, 99.0, 99.0, 99.0]);
        let out = maxpool_forward(&input).unwrap();
        assert_eq!(out.shape().dims(), &[1, 1, 1]);
        assert_eq!(out.data(), &[9.0]);
    }

    #[test]
    fn maxpool_backward_routes_to_first_max() {
        // Tied window: gradient goes to the first maximum in scan order.
        let input = t(vec![2, 2, 1], vec![5.0, 5.0, 5.0, 5.0]);
        let d_out = t(vec![1, 1, 1], vec![1.0]);
        let dx = maxpool_backward(&input, &d_out).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_known_product() {
        let input = t(vec![3], vec![1.0, 2.0, 3.0]);
        let weight = t(vec![2, 3], vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.5]);
        let bias = t(vec![2], vec![0.0, 1.0]);
        let out = dense_forward(&input, &weight, &bias).unwrap();
        assert_eq!(out.data(), &[1.0, 4.0]);
    }

    #[test]
    fn relu_zeroes_negative_gradient_paths() {
        let input = t(vec![3], vec![-1.0, 0.0, 2.0]);
        let d_out = t(vec![3], vec![10.0, 10.0, 10.0]);
        let dx = relu_backward(&input, &d_out);
        assert_eq!(dx.data(), &[0.0, 0.0, 10.0]);
    }
}
