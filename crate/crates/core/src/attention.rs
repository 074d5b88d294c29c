//! Scaled dot-product attention, explicit top-k sparse attention, causal
//! masking and multi-head composition.
//!
//! Sparse attention keeps, per query row, every score at or above the row's
//! k-th largest value and sends the rest to the softmax as masked entries.
//! Ties at the threshold are all kept, so a row may retain more than `k`
//! positions. When a causal mask is also in force the threshold is taken over
//! the causally allowed entries only and the two masks are intersected.

use serde::{Deserialize, Serialize};

use crate::tensor::{Float, Mask, Tape, Tensor, TensorError, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub d_model: usize,
    pub n_heads: usize,
    /// `None` selects dense attention.
    pub k_sparse: Option<usize>,
    pub causal: bool,
}

impl AttentionConfig {
    pub fn new(d_model: usize, n_heads: usize, k_sparse: Option<usize>, causal: bool) -> Result<Self, TensorError> {
        let cfg = Self {
            d_model,
            n_heads,
            k_sparse,
            causal,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.d_model == 0 || self.n_heads == 0 {
            return Err(TensorError::Invalid("d_model and n_heads must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(TensorError::Invalid(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.k_sparse == Some(0) {
            return Err(TensorError::Invalid("k_sparse must be at least 1".into()));
        }
        Ok(())
    }

    /// Per-head width d_k = d_v = d_model / n_heads.
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Default sparsity for a key sequence of length `len`: ⌈len / 4⌉.
pub fn default_k(len: usize) -> usize {
    len.div_ceil(4).max(1)
}

/// Lower-triangular mask: position (i, j) is allowed iff j ≤ i.
pub fn causal_mask(len: usize) -> Mask {
    let keep = (0..len * len).map(|idx| idx % len <= idx / len).collect();
    Mask::from_vec(len, len, keep).expect("square mask")
}

/// Keeps the entries of each row that are ≥ the row's k-th largest value.
pub fn topk_mask(scores: &Tensor, k: usize) -> Result<Mask, TensorError> {
    let all = Mask::all(scores.rows(), scores.cols());
    topk_mask_within(scores, k, &all)
}

/// Top-k selection restricted to the entries `allowed` keeps; the threshold of
/// each row is the k-th largest allowed value and the result never keeps an
/// entry `allowed` rejects.
pub fn topk_mask_within(scores: &Tensor, k: usize, allowed: &Mask) -> Result<Mask, TensorError> {
    if k < 1 {
        return Err(TensorError::Invalid("top-k requires k >= 1".into()));
    }
    if scores.shape().len() != 2 {
        return Err(TensorError::NotMatrix(scores.shape().to_vec()));
    }
    let (m, n) = (scores.rows(), scores.cols());
    if allowed.rows() != m || allowed.cols() != n {
        return Err(TensorError::ShapeMismatch {
            op: "topk_mask",
            left: scores.shape().to_vec(),
            right: vec![allowed.rows(), allowed.cols()],
        });
    }
    let mut keep = vec![false; m * n];
    let mut candidates: Vec<Float> = Vec::with_capacity(n);
    for i in 0..m {
        let row = scores.row(i);
        let ok = allowed.row(i);
        candidates.clear();
        candidates.extend(row.iter().zip(ok).filter(|(_, &a)| a).map(|(&v, _)| v));
        if candidates.is_empty() {
            continue;
        }
        let threshold = if candidates.len() <= k {
            Float::NEG_INFINITY
        } else {
            let (_, kth, _) = candidates.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            *kth
        };
        for j in 0..n {
            keep[i * n + j] = ok[j] && row[j] >= threshold;
        }
    }
    Mask::from_vec(m, n, keep)
}

/// P = Q Kᵀ / √d_k
pub fn attention_scores(tape: &mut Tape, q: Var, k: Var) -> Result<Var, TensorError> {
    let (dq, dk) = (tape.value(q).cols(), tape.value(k).cols());
    if dq != dk {
        return Err(TensorError::ShapeMismatch {
            op: "attention_scores",
            left: tape.shape(q).to_vec(),
            right: tape.shape(k).to_vec(),
        });
    }
    let kt = tape.transpose(k)?;
    let raw = tape.matmul(q, kt)?;
    tape.scale(raw, 1.0 / (dk as Float).sqrt())
}

/// Softmax weights for one head: dense when `k_sparse` is `None`, top-k
/// otherwise, with the causal mask applied first when requested.
pub fn attention_weights(
    tape: &mut Tape,
    q: Var,
    k: Var,
    k_sparse: Option<usize>,
    causal: bool,
) -> Result<Var, TensorError> {
    let scores = attention_scores(tape, q, k)?;
    let (m, n) = (tape.value(scores).rows(), tape.value(scores).cols());
    let allowed = if causal {
        if m != n {
            return Err(TensorError::Invalid(format!(
                "causal attention needs square scores, got {m}x{n}"
            )));
        }
        causal_mask(n)
    } else {
        Mask::all(m, n)
    };
    let mask = match k_sparse {
        Some(kk) => topk_mask_within(tape.value(scores), kk, &allowed)?,
        None => allowed,
    };
    tape.masked_softmax(scores, &mask)
}

fn weighted_values(tape: &mut Tape, weights: Var, v: Var) -> Result<Var, TensorError> {
    let (lk, lv) = (tape.value(weights).cols(), tape.value(v).rows());
    if lk != lv {
        return Err(TensorError::ShapeMismatch {
            op: "attention values",
            left: tape.shape(weights).to_vec(),
            right: tape.shape(v).to_vec(),
        });
    }
    tape.matmul(weights, v)
}

fn check_kv(tape: &Tape, k: Var, v: Var) -> Result<(), TensorError> {
    if tape.value(k).rows() != tape.value(v).rows() {
        return Err(TensorError::ShapeMismatch {
            op: "attention keys/values",
            left: tape.shape(k).to_vec(),
            right: tape.shape(v).to_vec(),
        });
    }
    Ok(())
}

/// softmax(Q Kᵀ / √d_k) V
pub fn dense_attention(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<Var, TensorError> {
    check_kv(tape, k, v)?;
    let w = attention_weights(tape, q, k, None, false)?;
    weighted_values(tape, w, v)
}

/// softmax(Mask(P, k)) V
pub fn sparse_attention(tape: &mut Tape, q: Var, k: Var, v: Var, k_top: usize) -> Result<Var, TensorError> {
    check_kv(tape, k, v)?;
    let w = attention_weights(tape, q, k, Some(k_top), false)?;
    weighted_values(tape, w, v)
}

/// Single-head attention with optional sparsity and causal masking.
pub fn attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    k_sparse: Option<usize>,
    causal: bool,
) -> Result<Var, TensorError> {
    check_kv(tape, k, v)?;
    let w = attention_weights(tape, q, k, k_sparse, causal)?;
    weighted_values(tape, w, v)
}

/// Projection matrices of one head, each d_model × d_k.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
}

#[derive(Clone, Debug)]
pub struct MultiHeadVars {
    pub heads: Vec<HeadVars>,
    /// d_model × d_model output projection.
    pub wo: Var,
}

/// Concat(head₁ … head_n) · W_O with headᵢ = Attention(Q W_Qⁱ, K W_Kⁱ, V W_Vⁱ).
pub fn multi_head(
    tape: &mut Tape,
    q_in: Var,
    k_in: Var,
    v_in: Var,
    cfg: &AttentionConfig,
    params: &MultiHeadVars,
) -> Result<Var, TensorError> {
    cfg.validate()?;
    for x in [q_in, k_in, v_in] {
        if tape.value(x).cols() != cfg.d_model {
            return Err(TensorError::ShapeMismatch {
                op: "multi_head input",
                left: tape.shape(x).to_vec(),
                right: vec![cfg.d_model],
            });
        }
    }
    if params.heads.len() != cfg.n_heads {
        return Err(TensorError::Invalid(format!(
            "expected {} head projections, got {}",
            cfg.n_heads,
            params.heads.len()
        )));
    }
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in &params.heads {
        let q = tape.matmul(q_in, h.wq)?;
        let k = tape.matmul(k_in, h.wk)?;
        let v = tape.matmul(v_in, h.wv)?;
        heads.push(attention(tape, q, k, v, cfg.k_sparse, cfg.causal)?);
    }
    let concat = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    tape.matmul(concat, params.wo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[Float]) -> Tensor {
        Tensor::from_rows(&[values.to_vec()]).unwrap()
    }

    #[test]
    fn topk_keeps_two_largest() {
        let m = topk_mask(&row(&[0.5, 2.0, 1.0]), 2).unwrap();
        assert_eq!(m.as_slice(), &[false, true, true]);
    }

    #[test]
    fn topk_with_k_at_least_len_keeps_everything() {
        let t = row(&[0.1, -3.0, 4.0, 2.0]);
        assert_eq!(topk_mask(&t, 4).unwrap(), Mask::all(1, 4));
        assert_eq!(topk_mask(&t, 9).unwrap(), Mask::all(1, 4));
    }

    #[test]
    fn topk_keeps_all_ties_at_threshold() {
        let m = topk_mask(&row(&[1.0, 1.0, 1.0]), 1).unwrap();
        assert_eq!(m.count_kept(), 3);
        let m = topk_mask(&row(&[3.0, 1.0, 3.0, 0.0]), 1).unwrap();
        assert_eq!(m.as_slice(), &[true, false, true, false]);
    }

    #[test]
    fn topk_rejects_zero() {
        assert!(topk_mask(&row(&[1.0]), 0).is_err());
    }

    #[test]
    fn causal_mask_is_lower_triangular() {
        assert_eq!(causal_mask(1).as_slice(), &[true]);
        let m = causal_mask(3);
        assert_eq!(m.count_kept(), 6);
        assert_eq!(
            m.as_slice(),
            &[true, false, false, true, true, false, true, true, true]
        );
    }

    #[test]
    fn causal_threshold_ignores_future_entries() {
        // Row 0 may only see position 0 even though future scores are larger.
        let s = Tensor::from_rows(&[vec![0.0, 9.0, 9.0], vec![1.0, 2.0, 9.0], vec![3.0, 2.0, 1.0]]).unwrap();
        let m = topk_mask_within(&s, 1, &causal_mask(3)).unwrap();
        assert_eq!(
            m.as_slice(),
            &[true, false, false, false, true, false, true, false, false]
        );
    }

    #[test]
    fn scores_examples() {
        let mut tape = Tape::new();
        let q = tape.constant(row(&[1.0, 0.0]));
        let p = attention_scores(&mut tape, q, q).unwrap();
        assert!((tape.value(p).data()[0] - 1.0 / 2.0f64.sqrt() as Float).abs() < 1e-15);

        let k = tape.constant(Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, -2.0]]).unwrap());
        let p = attention_scores(&mut tape, q, k).unwrap();
        assert_eq!(tape.value(p).data(), &[0.0, 0.0]);

        let bad = tape.constant(row(&[1.0, 0.0, 0.0]));
        assert!(attention_scores(&mut tape, q, bad).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AttentionConfig::new(32, 3, None, false).is_err());
        assert!(AttentionConfig::new(32, 4, Some(0), false).is_err());
        assert_eq!(AttentionConfig::new(32, 4, Some(2), true).unwrap().head_dim(), 8);
    }

    #[test]
    fn default_k_is_quarter_length_rounded_up() {
        assert_eq!(default_k(1), 1);
        assert_eq!(default_k(7), 2);
        assert_eq!(default_k(30), 8);
        assert_eq!(default_k(64), 16);
    }
}
