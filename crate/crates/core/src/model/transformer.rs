use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{BoundParams, ParamId, ParamStore};
use super::{ModelConfig, ModelError, OutputHead, PositionalEncoding};
use crate::attention::{multi_head, AttentionConfig, HeadVars, MultiHeadVars};
use crate::tensor::{Activation, Float, Tape, Tensor, Var};

pub const LAYER_NORM_EPS: Float = 1e-5;

#[derive(Clone, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Clone, Debug)]
struct Mha {
    heads: Vec<[ParamId; 3]>,
    wo: ParamId,
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    attn: Mha,
    ln1: Norm,
    ffn_in: Linear,
    ffn_out: Linear,
    ln2: Norm,
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    self_attn: Mha,
    ln1: Norm,
    cross_attn: Mha,
    ln2: Norm,
    ffn_in: Linear,
    ffn_out: Linear,
    ln3: Norm,
}

#[derive(Clone, Debug)]
enum Head {
    Linear(Linear),
    Nonlinear {
        hidden: Linear,
        activation: Activation,
        out: Linear,
    },
}

#[derive(Clone, Debug)]
struct Layout {
    enc_embed: Linear,
    dec_embed: Linear,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    head: Head,
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.store.insert_xavier(format!("{name}.w"), fan_in, fan_out, &mut self.rng),
            b: self.store.insert(format!("{name}.b"), Tensor::zeros(&[fan_out])),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gamma: self.store.insert(format!("{name}.gamma"), Tensor::full(&[d], 1.0)),
            beta: self.store.insert(format!("{name}.beta"), Tensor::zeros(&[d])),
        }
    }

    fn mha(&mut self, name: &str, cfg: &ModelConfig) -> Mha {
        let (d, dk) = (cfg.d_model, cfg.head_dim());
        let heads = (0..cfg.n_heads)
            .map(|h| {
                ["wq", "wk", "wv"].map(|p| self.store.insert_xavier(format!("{name}.head{h}.{p}"), d, dk, &mut self.rng))
            })
            .collect();
        let wo = self.store.insert_xavier(format!("{name}.wo"), d, d, &mut self.rng);
        Mha { heads, wo }
    }

    fn layout(&mut self, cfg: &ModelConfig) -> Layout {
        let d = cfg.d_model;
        let enc_embed = self.linear("enc_embed", cfg.n_features, d);
        let dec_embed = self.linear("dec_embed", 1, d);
        let encoder = (0..cfg.n_encoder_layers)
            .map(|l| {
                let p = format!("encoder.{l}");
                EncoderLayer {
                    attn: self.mha(&format!("{p}.self_attn"), cfg),
                    ln1: self.norm(&format!("{p}.ln1"), d),
                    ffn_in: self.linear(&format!("{p}.ffn_in"), d, cfg.d_ffn),
                    ffn_out: self.linear(&format!("{p}.ffn_out"), cfg.d_ffn, d),
                    ln2: self.norm(&format!("{p}.ln2"), d),
                }
            })
            .collect();
        let decoder = (0..cfg.n_decoder_layers)
            .map(|l| {
                let p = format!("decoder.{l}");
                DecoderLayer {
                    self_attn: self.mha(&format!("{p}.self_attn"), cfg),
                    ln1: self.norm(&format!("{p}.ln1"), d),
                    cross_attn: self.mha(&format!("{p}.cross_attn"), cfg),
                    ln2: self.norm(&format!("{p}.ln2"), d),
                    ffn_in: self.linear(&format!("{p}.ffn_in"), d, cfg.d_ffn),
                    ffn_out: self.linear(&format!("{p}.ffn_out"), cfg.d_ffn, d),
                    ln3: self.norm(&format!("{p}.ln3"), d),
                }
            })
            .collect();
        let head = match cfg.output_head {
            OutputHead::Linear => Head::Linear(self.linear("head.out", d, 1)),
            OutputHead::Nonlinear { activation } => Head::Nonlinear {
                hidden: self.linear("head.hidden", d, d),
                activation,
                out: self.linear("head.out", d, 1),
            },
        };
        Layout {
            enc_embed,
            dec_embed,
            encoder,
            decoder,
            head,
        }
    }
}

/// Encoder-decoder Transformer regressor.
///
/// The encoder embeds a `lookback × n_features` window with a learned affine
/// map plus sinusoidal positions; the decoder embeds a column of target
/// values the same way and runs causal self-attention, cross-attention over
/// the encoder memory and a ReLU FFN per layer (post-norm residuals). The
/// head maps each decoder position to one scalar.
#[derive(Clone, Debug)]
pub struct TransformerModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
    pe: PositionalEncoding,
}

impl TransformerModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let layout = Builder {
            store: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
        .layout(&config);
        let pe = PositionalEncoding::new(config.max_len(), config.d_model);
        Ok(Self {
            config,
            params,
            layout,
            pe,
        })
    }

    /// Rebuilds a model around stored parameters; names and shapes must match
    /// the layout `config` implies.
    pub fn from_params(config: ModelConfig, stored: ParamStore) -> Result<Self, ModelError> {
        let mut model = Self::new(config, 0)?;
        if stored.len() != model.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                stored.len()
            )));
        }
        let ids: Vec<ParamId> = model.params.ids().collect();
        for id in ids {
            let name = model.params.name(id).to_string();
            let value = stored
                .get(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing parameter {name}")))?;
            if value.shape() != model.params.value(id).shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    value.shape(),
                    model.params.value(id).shape()
                )));
            }
            model.params.set(id, value.clone());
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn positional_encoding(&self) -> &PositionalEncoding {
        &self.pe
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> BoundParams {
        self.params.bind(tape, requires_grad)
    }

    fn affine(&self, tape: &mut Tape, p: &BoundParams, lin: &Linear, x: Var) -> Result<Var, ModelError> {
        let h = tape.matmul(x, p.var(lin.w))?;
        Ok(tape.add_bias(h, p.var(lin.b))?)
    }

    fn norm(&self, tape: &mut Tape, p: &BoundParams, n: &Norm, x: Var) -> Result<Var, ModelError> {
        Ok(tape.layer_norm(x, p.var(n.gamma), p.var(n.beta), LAYER_NORM_EPS)?)
    }

    fn ffn(&self, tape: &mut Tape, p: &BoundParams, lin_in: &Linear, lin_out: &Linear, x: Var) -> Result<Var, ModelError> {
        let h = self.affine(tape, p, lin_in, x)?;
        let h = tape.activation(h, Activation::Relu)?;
        self.affine(tape, p, lin_out, h)
    }

    #[allow(clippy::too_many_arguments)]
    fn mha(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        m: &Mha,
        q: Var,
        kv: Var,
        causal: bool,
        key_len: usize,
    ) -> Result<Var, ModelError> {
        let cfg = AttentionConfig {
            d_model: self.config.d_model,
            n_heads: self.config.n_heads,
            k_sparse: self.config.k_for(key_len),
            causal,
        };
        let vars = MultiHeadVars {
            heads: m
                .heads
                .iter()
                .map(|[q, k, v]| HeadVars {
                    wq: p.var(*q),
                    wk: p.var(*k),
                    wv: p.var(*v),
                })
                .collect(),
            wo: p.var(m.wo),
        };
        Ok(multi_head(tape, q, kv, kv, &cfg, &vars)?)
    }

    fn add_positions(&self, tape: &mut Tape, x: Var) -> Result<Var, ModelError> {
        let len = tape.value(x).rows();
        let pe = self
            .pe
            .slice(len)
            .ok_or(ModelError::SequenceTooLong { len, max: self.pe.max_len() })?;
        let pe = tape.constant(pe);
        Ok(tape.add(x, pe)?)
    }

    /// x · W_emb + b + PE[0..L] for an `L × n_features` window.
    pub fn embed_encoder_on(&self, tape: &mut Tape, p: &BoundParams, window: Var) -> Result<Var, ModelError> {
        let shape = tape.shape(window);
        if shape.len() != 2 || shape[1] != self.config.n_features {
            return Err(ModelError::Shape(format!(
                "window must be L x {}, got {:?}",
                self.config.n_features, shape
            )));
        }
        let h = self.affine(tape, p, &self.layout.enc_embed, window)?;
        self.add_positions(tape, h)
    }

    /// Same as [`Self::embed_encoder_on`] for an `H × 1` column of targets.
    pub fn embed_decoder_on(&self, tape: &mut Tape, p: &BoundParams, dec_in: Var) -> Result<Var, ModelError> {
        let shape = tape.shape(dec_in);
        if shape.len() != 2 || shape[1] != 1 {
            return Err(ModelError::Shape(format!("decoder input must be H x 1, got {shape:?}")));
        }
        let h = self.affine(tape, p, &self.layout.dec_embed, dec_in)?;
        self.add_positions(tape, h)
    }

    pub fn encoder_on(&self, tape: &mut Tape, p: &BoundParams, x_emb: Var) -> Result<Var, ModelError> {
        self.check_width(tape, x_emb)?;
        let key_len = self.config.lookback;
        let mut x = x_emb;
        for layer in &self.layout.encoder {
            let a = self.mha(tape, p, &layer.attn, x, x, false, key_len)?;
            let r = tape.add(x, a)?;
            let h = self.norm(tape, p, &layer.ln1, r)?;
            let f = self.ffn(tape, p, &layer.ffn_in, &layer.ffn_out, h)?;
            let r = tape.add(h, f)?;
            x = self.norm(tape, p, &layer.ln2, r)?;
        }
        Ok(x)
    }

    pub fn decoder_on(&self, tape: &mut Tape, p: &BoundParams, y_emb: Var, memory: Var) -> Result<Var, ModelError> {
        self.check_width(tape, y_emb)?;
        self.check_width(tape, memory)?;
        let mut y = y_emb;
        for layer in &self.layout.decoder {
            let a = self.mha(tape, p, &layer.self_attn, y, y, true, self.config.horizon)?;
            let r = tape.add(y, a)?;
            let h = self.norm(tape, p, &layer.ln1, r)?;
            let c = self.mha(tape, p, &layer.cross_attn, h, memory, false, self.config.lookback)?;
            let r = tape.add(h, c)?;
            let h = self.norm(tape, p, &layer.ln2, r)?;
            let f = self.ffn(tape, p, &layer.ffn_in, &layer.ffn_out, h)?;
            let r = tape.add(h, f)?;
            y = self.norm(tape, p, &layer.ln3, r)?;
        }
        Ok(y)
    }

    /// Returns the head output and, for a nonlinear head, the post-activation
    /// hidden layer.
    pub fn head_on(&self, tape: &mut Tape, p: &BoundParams, d: Var) -> Result<(Var, Option<Var>), ModelError> {
        self.check_width(tape, d)?;
        match &self.layout.head {
            Head::Linear(lin) => Ok((self.affine(tape, p, lin, d)?, None)),
            Head::Nonlinear {
                hidden,
                activation,
                out,
            } => {
                let h = self.affine(tape, p, hidden, d)?;
                let h = tape.activation(h, *activation)?;
                Ok((self.affine(tape, p, out, h)?, Some(h)))
            }
        }
    }

    /// Full pass: `window` is `lookback × n_features`, `dec_in` is `H × 1`.
    pub fn forward_on(&self, tape: &mut Tape, p: &BoundParams, window: Var, dec_in: Var) -> Result<Var, ModelError> {
        let h = tape.value(dec_in).rows();
        if h > self.config.horizon {
            return Err(ModelError::Shape(format!(
                "decoder length {h} exceeds horizon {}",
                self.config.horizon
            )));
        }
        let x = self.embed_encoder_on(tape, p, window)?;
        let memory = self.encoder_on(tape, p, x)?;
        let y = self.embed_decoder_on(tape, p, dec_in)?;
        let d = self.decoder_on(tape, p, y, memory)?;
        Ok(self.head_on(tape, p, d)?.0)
    }

    fn check_width(&self, tape: &Tape, x: Var) -> Result<(), ModelError> {
        let shape = tape.shape(x);
        if shape.len() != 2 || shape[1] != self.config.d_model {
            return Err(ModelError::Shape(format!(
                "expected width {}, got {:?}",
                self.config.d_model, shape
            )));
        }
        Ok(())
    }

    fn run<F>(&self, f: F) -> Result<Tensor, ModelError>
    where
        F: FnOnce(&Self, &mut Tape, &BoundParams) -> Result<Var, ModelError>,
    {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let out = f(self, &mut tape, &p)?;
        Ok(tape.value(out).clone())
    }

    pub fn embed(&self, window: &Tensor) -> Result<Tensor, ModelError> {
        self.run(|m, t, p| {
            let x = t.constant(window.clone());
            m.embed_encoder_on(t, p, x)
        })
    }

    pub fn encoder_forward(&self, x_emb: &Tensor) -> Result<Tensor, ModelError> {
        self.run(|m, t, p| {
            let x = t.constant(x_emb.clone());
            m.encoder_on(t, p, x)
        })
    }

    pub fn decoder_forward(&self, y_emb: &Tensor, memory: &Tensor) -> Result<Tensor, ModelError> {
        self.run(|m, t, p| {
            let y = t.constant(y_emb.clone());
            let mem = t.constant(memory.clone());
            m.decoder_on(t, p, y, mem)
        })
    }

    pub fn output_head(&self, d: &Tensor) -> Result<Tensor, ModelError> {
        self.run(|m, t, p| {
            let x = t.constant(d.clone());
            Ok(m.head_on(t, p, x)?.0)
        })
    }

    /// Post-activation hidden values of a nonlinear head, `None` for a linear head.
    pub fn head_hidden(&self, d: &Tensor) -> Result<Option<Tensor>, ModelError> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let x = tape.constant(d.clone());
        let (_, hidden) = self.head_on(&mut tape, &p, x)?;
        Ok(hidden.map(|h| tape.value(h).clone()))
    }

    pub fn forward(&self, window: &Tensor, dec_in: &Tensor) -> Result<Tensor, ModelError> {
        self.run(|m, t, p| {
            let w = t.constant(window.clone());
            let d = t.constant(dec_in.clone());
            m.forward_on(t, p, w, d)
        })
    }

    /// Greedy autoregressive rollout of `steps` predictions (normalized
    /// space). The first decoder input is the window's last target value; each
    /// prediction becomes the next decoder input.
    pub fn predict(&self, window: &Tensor, steps: usize) -> Result<Vec<Float>, ModelError> {
        if steps < 1 || steps > self.config.horizon {
            return Err(ModelError::Shape(format!(
                "prediction steps must be in 1..={}, got {steps}",
                self.config.horizon
            )));
        }
        if window.shape().len() != 2 || window.cols() != self.config.n_features {
            return Err(ModelError::Shape(format!(
                "window must be L x {}, got {:?}",
                self.config.n_features,
                window.shape()
            )));
        }
        let start = window.get(window.rows() - 1, self.config.target_index);
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let w = tape.constant(window.clone());
        let x = self.embed_encoder_on(&mut tape, &p, w)?;
        let memory = self.encoder_on(&mut tape, &p, x)?;
        let mut inputs = vec![start];
        let mut preds = Vec::with_capacity(steps);
        for _ in 0..steps {
            let n = inputs.len();
            let dec = tape.constant(Tensor::matrix(n, 1, inputs.clone())?);
            let y = self.embed_decoder_on(&mut tape, &p, dec)?;
            let d = self.decoder_on(&mut tape, &p, y, memory)?;
            let last = tape.slice_rows(d, n - 1, 1)?;
            let (out, _) = self.head_on(&mut tape, &p, last)?;
            let next = tape.value(out).data()[0];
            preds.push(next);
            inputs.push(next);
        }
        Ok(preds)
    }
}
