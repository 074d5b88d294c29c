use crate::tensor::{Float, Tensor};

/// Fixed sinusoidal table: PE(pos, 2i) = sin(pos / 10000^(2i/d)),
/// PE(pos, 2i+1) = cos(pos / 10000^(2i/d)).
#[derive(Clone, Debug, PartialEq)]
pub struct PositionalEncoding {
    max_len: usize,
    table: Tensor,
}

impl PositionalEncoding {
    pub fn new(max_len: usize, d_model: usize) -> Self {
        let mut data = vec![0.0; max_len * d_model];
        for pos in 0..max_len {
            for i in (0..d_model).step_by(2) {
                let freq = (10000.0 as Float).powf(i as Float / d_model as Float);
                let angle = pos as Float / freq;
                data[pos * d_model + i] = angle.sin();
                if i + 1 < d_model {
                    data[pos * d_model + i + 1] = angle.cos();
                }
            }
        }
        Self {
            max_len,
            table: Tensor::matrix(max_len, d_model, data).expect("positive dims"),
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// First `len` rows of the table.
    pub fn slice(&self, len: usize) -> Option<Tensor> {
        if len == 0 || len > self.max_len {
            return None;
        }
        let d = self.table.cols();
        Tensor::matrix(len, d, self.table.data()[..len * d].to_vec()).ok()
    }
}
