use super::expect_rank4;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Concatenates `(N, C_k, H, W)` parts along the channel axis, in order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat_channels needs at least one part".into()))?;
    let [n, _, h, w] = expect_rank4("concat_channels", first)?;
    let mut channels = Vec::with_capacity(parts.len());
    for p in parts {
        let [pn, pc, ph, pw] = expect_rank4("concat_channels", p)?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::shape(
                "concat_channels",
                format!(
                    "part {:?} does not match N,H,W of {:?}",
                    p.shape(),
                    first.shape()
                ),
            ));
        }
        channels.push(pc);
    }
    let total: usize = channels.iter().sum();
    let plane = h * w;
    let mut out = Vec::with_capacity(n * total * plane);
    for s in 0..n {
        for (p, &c) in parts.iter().zip(&channels) {
            out.extend_from_slice(&p.data()[s * c * plane..(s + 1) * c * plane]);
        }
    }
    Tensor::from_vec(&[n, total, h, w], out)
}

/// Slices the upstream gradient back into per-part gradients.
pub fn concat_channels_backward(part_channels: &[usize], grad_out: &Tensor) -> Result<Vec<Tensor>> {
    let [n, total, h, w] = expect_rank4("concat_channels_backward", grad_out)?;
    if part_channels.iter().sum::<usize>() != total {
        return Err(Error::shape(
            "concat_channels_backward",
            format!("parts {part_channels:?} do not sum to {total} channels"),
        ));
    }
    let plane = h * w;
    let g = grad_out.data();
    let mut grads: Vec<Vec<f64>> = part_channels
        .iter()
        .map(|&c| Vec::with_capacity(n * c * plane))
        .collect();
    for s in 0..n {
        let mut offset = s * total * plane;
        for (buf, &c) in grads.iter_mut().zip(part_channels) {
            buf.extend_from_slice(&g[offset..offset + c * plane]);
            offset += c * plane;
        }
    }
    grads
        .into_iter()
        .zip(part_channels)
        .map(|(buf, &c)| Tensor::from_vec(&[n, c, h, w], buf))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_part_is_identity() {
        let a = Tensor::from_fn(&[2, 3, 2, 2], |i| i as f64 * 0.1);
        assert_eq!(concat_channels(&[&a]).unwrap(), a);
    }

    #[test]
    fn order_is_preserved() {
        let a = Tensor::from_fn(&[1, 2, 2, 2], |i| i as f64);
        let b = Tensor::from_fn(&[1, 3, 2, 2], |i| 100.0 + i as f64);
        let c = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[1, 5, 2, 2]);
        assert_eq!(&c.data()[..8], a.data());
        assert_eq!(&c.data()[8..], b.data());
    }

    #[test]
    fn spatial_mismatch_rejected() {
        let a = Tensor::zeros(&[1, 1, 2, 2]);
        let b = Tensor::zeros(&[1, 1, 4, 4]);
        assert!(concat_channels(&[&a, &b]).is_err());
    }
}
