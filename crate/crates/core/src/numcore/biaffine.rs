//! Biaffine scoring on plain vectors.

use super::tensor::{Float, Tensor};
use crate::error::{Error, Result};

/// Optional linear and constant terms added to a bilinear score:
/// `uᵀWv + u·a + v·b + c`.
#[derive(Clone, Debug, Default)]
pub struct BiaffineBias {
    pub left: Option<Vec<Float>>,
    pub right: Option<Vec<Float>>,
    pub constant: Float,
}

fn dot(a: &[Float], b: &[Float]) -> Float {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `uᵀ W v` for a `[len(u), len(v)]` matrix.
pub fn biaffine(u: &[Float], w: &Tensor, v: &[Float]) -> Result<Float> {
    if w.shape() != [u.len(), v.len()] {
        return Err(Error::shape(format!(
            "biaffine: W is {:?}, vectors are {} and {}",
            w.shape(),
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().enumerate().map(|(i, ui)| ui * dot(w.row(i), v)).sum())
}

pub fn biaffine_with_bias(u: &[Float], w: &Tensor, v: &[Float], bias: &BiaffineBias) -> Result<Float> {
    let mut s = biaffine(u, w, v)? + bias.constant;
    if let Some(a) = &bias.left {
        if a.len() != u.len() {
            return Err(Error::shape("biaffine: left bias length"));
        }
        s += dot(u, a);
    }
    if let Some(b) = &bias.right {
        if b.len() != v.len() {
            return Err(Error::shape("biaffine: right bias length"));
        }
        s += dot(v, b);
    }
    Ok(s)
}

/// One score per label from a `[L, len(u), len(v)]` tensor.
pub fn biaffine_labels(u: &[Float], w: &Tensor, v: &[Float]) -> Result<Vec<Float>> {
    let (labels, p, q) = match w.shape() {
        [l, p, q] => (*l, *p, *q),
        s => return Err(Error::shape(format!("expected a 3-tensor, got {s:?}"))),
    };
    if p != u.len() || q != v.len() {
        return Err(Error::shape("biaffine: vector lengths disagree with tensor"));
    }
    let d = w.data();
    Ok((0..labels)
        .map(|l| {
            (0..p)
                .map(|i| u[i] * dot(&d[(l * p + i) * q..(l * p + i + 1) * q], v))
                .sum()
        })
        .collect())
}
