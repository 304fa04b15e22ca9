//! Gradients of a sparse convolution with respect to its input features and
//! weights. The convolution is linear in both, so
//!
//! - `grad_x[j] += grad_out[i] * W_d^T` for every pair `(j, i)` at offset `d`
//! - `grad_W_d += x[j]^T grad_out[i]` over the same pairs.

use super::kernel_map::KernelMap;
use super::tensor::{ConvWeights, Element, SparseTensor};
use crate::{Error, Result};

/// Slice-level backward pass; `grad_out` is `out_count x c_out` and `x` is
/// `in_count x c_in`, both row-major.
pub fn conv_backward_raw<T: Element>(
    grad_out: &[T],
    x: &[T],
    w: &ConvWeights<T>,
    map: &KernelMap,
) -> Result<(Vec<T>, ConvWeights<T>)> {
    let (c_in, c_out) = (w.c_in(), w.c_out());
    if grad_out.len() != map.out_count() * c_out {
        return Err(Error::InconsistentMap(format!(
            "gradient has {} values, map has {} outputs of {c_out} channels",
            grad_out.len(),
            map.out_count()
        )));
    }
    if x.len() != map.in_count() * c_in {
        return Err(Error::InconsistentMap(format!(
            "input has {} values, map has {} inputs of {c_in} channels",
            x.len(),
            map.in_count()
        )));
    }
    if w.kernel_volume() != map.offsets().len() {
        return Err(Error::InconsistentMap(format!(
            "{} weight matrices for {} offsets",
            w.kernel_volume(),
            map.offsets().len()
        )));
    }
    let mut gx = vec![0.0f64; x.len()];
    let mut gw = vec![0.0f64; w.data().len()];
    for (k, list) in map.all_pairs().iter().enumerate() {
        let wk = w.offset_matrix(k);
        let gwk = &mut gw[k * c_in * c_out..(k + 1) * c_in * c_out];
        for p in list {
            let (j, i) = (p.input as usize, p.output as usize);
            let go = &grad_out[i * c_out..(i + 1) * c_out];
            let xj = &x[j * c_in..(j + 1) * c_in];
            let gxj = &mut gx[j * c_in..(j + 1) * c_in];
            for ci in 0..c_in {
                let wrow = &wk[ci * c_out..(ci + 1) * c_out];
                let mut s = 0.0;
                for (g, wv) in go.iter().zip(wrow) {
                    s += g.to_f64() * wv.to_f64();
                }
                gxj[ci] += s;
                let xv = xj[ci].to_f64();
                if xv != 0.0 {
                    for (dst, g) in gwk[ci * c_out..(ci + 1) * c_out].iter_mut().zip(go) {
                        *dst += xv * g.to_f64();
                    }
                }
            }
        }
    }
    let grad_w = ConvWeights::new(
        w.kernel_volume(),
        c_in,
        c_out,
        gw.into_iter().map(T::from_f64).collect(),
    )?;
    Ok((gx.into_iter().map(T::from_f64).collect(), grad_w))
}

/// Tensor-level backward pass. `grad_out` must live on the map's output
/// coordinates and `x` on its input side.
pub fn conv_backward<T: Element>(
    grad_out: &SparseTensor<T>,
    x: &SparseTensor<T>,
    w: &ConvWeights<T>,
    map: &KernelMap,
) -> Result<(SparseTensor<T>, ConvWeights<T>)> {
    if grad_out.coords() != map.out_coords() {
        return Err(Error::InconsistentMap(
            "gradient coordinates differ from the map's output coordinates".into(),
        ));
    }
    if grad_out.channels() != w.c_out() || x.channels() != w.c_in() {
        return Err(Error::InconsistentMap("channel widths differ from weights".into()));
    }
    let (gx, gw) = conv_backward_raw(grad_out.features(), x.features(), w, map)?;
    let grad_x = SparseTensor::new(x.coords().clone(), gx, x.channels(), x.stride())?;
    Ok((grad_x, gw))
}
