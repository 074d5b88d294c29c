use hydroformer::model::{
    AttentionMode, Checkpoint, ModelConfig, ModelError, OutputHead, ParamStore, PositionalEncoding, TransformerModel,
};
use hydroformer::data::Normalizer;
use hydroformer::tensor::{Activation, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Matrix = Vec<Vec<f64>>;

fn tiny(attention: AttentionMode, head: OutputHead) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 1,
        n_encoder_layers: 1,
        n_decoder_layers: 2,
        d_ffn: 16,
        attention,
        output_head: head,
        n_features: 5,
        target_index: 2,
        lookback: 6,
        horizon: 3,
    }
}

fn small(attention: AttentionMode, head: OutputHead) -> ModelConfig {
    ModelConfig {
        d_model: 12,
        n_heads: 3,
        n_encoder_layers: 2,
        n_decoder_layers: 2,
        d_ffn: 20,
        attention,
        output_head: head,
        n_features: 19,
        target_index: 7,
        lookback: 10,
        horizon: 4,
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
}

fn t(m: &Matrix) -> Tensor {
    Tensor::from_rows(m).unwrap()
}

fn rows_of(x: &Tensor) -> Matrix {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Randomizes every parameter (including biases and norm affine terms) so
/// oracle comparisons exercise all of them.
fn randomize(model: &mut TransformerModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = model.params_mut();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let v = store.value_mut(id);
        for x in v.data_mut() {
            *x = rng.random_range(-0.6..0.6);
        }
    }
}

// ---- straight-line reference -------------------------------------------

struct Oracle<'a> {
    p: &'a ParamStore,
    cfg: &'a ModelConfig,
}

impl Oracle<'_> {
    fn w(&self, name: &str) -> Matrix {
        rows_of(self.p.get(name).unwrap_or_else(|| panic!("no {name}")))
    }

    fn v(&self, name: &str) -> Vec<f64> {
        self.p.get(name).unwrap_or_else(|| panic!("no {name}")).data().to_vec()
    }

    fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
        a.iter()
            .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
            .collect()
    }

    fn affine(&self, x: &Matrix, name: &str) -> Matrix {
        let b = self.v(&format!("{name}.b"));
        Self::matmul(x, &self.w(&format!("{name}.w")))
            .into_iter()
            .map(|r| r.iter().zip(&b).map(|(a, c)| a + c).collect())
            .collect()
    }

    fn add(a: &Matrix, b: &Matrix) -> Matrix {
        a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
    }

    fn layer_norm(&self, x: &Matrix, name: &str) -> Matrix {
        let g = self.v(&format!("{name}.gamma"));
        let b = self.v(&format!("{name}.beta"));
        x.iter()
            .map(|r| {
                let n = r.len() as f64;
                let mean = r.iter().sum::<f64>() / n;
                let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + 1e-5).sqrt();
                r.iter().enumerate().map(|(j, v)| (v - mean) * inv * g[j] + b[j]).collect()
            })
            .collect()
    }

    fn k_for(&self, key_len: usize) -> Option<usize> {
        match self.cfg.attention {
            AttentionMode::Dense => None,
            AttentionMode::Sparse { k: Some(k) } => Some(k),
            AttentionMode::Sparse { k: None } => Some(key_len.div_ceil(4)),
        }
    }

    fn attend(q: &Matrix, k: &Matrix, v: &Matrix, top: Option<usize>, causal: bool) -> Matrix {
        let scale = (q[0].len() as f64).sqrt();
        q.iter()
            .enumerate()
            .map(|(i, qi)| {
                let s: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / scale).collect();
                let allowed: Vec<usize> = (0..k.len()).filter(|&j| !causal || j <= i).collect();
                let mut order = allowed.clone();
                order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
                let kept: Vec<usize> = match top {
                    Some(kk) if kk < order.len() => {
                        let thr = s[order[kk - 1]];
                        allowed.into_iter().filter(|&j| s[j] >= thr).collect()
                    }
                    _ => allowed,
                };
                let m = kept.iter().map(|&j| s[j]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = kept.iter().map(|&j| (s[j] - m).exp()).sum();
                let mut row = vec![0.0; v[0].len()];
                for &j in &kept {
                    let w = (s[j] - m).exp() / z;
                    row.iter_mut().zip(&v[j]).for_each(|(r, x)| *r += w * x);
                }
                row
            })
            .collect()
    }

    fn mha(&self, q_in: &Matrix, kv: &Matrix, name: &str, causal: bool, key_len: usize) -> Matrix {
        let top = self.k_for(key_len);
        let mut concat: Matrix = vec![Vec::new(); q_in.len()];
        for h in 0..self.cfg.n_heads {
            let q = Self::matmul(q_in, &self.w(&format!("{name}.head{h}.wq")));
            let k = Self::matmul(kv, &self.w(&format!("{name}.head{h}.wk")));
            let v = Self::matmul(kv, &self.w(&format!("{name}.head{h}.wv")));
            for (c, r) in concat.iter_mut().zip(Self::attend(&q, &k, &v, top, causal)) {
                c.extend(r);
            }
        }
        Self::matmul(&concat, &self.w(&format!("{name}.wo")))
    }

    fn ffn(&self, x: &Matrix, name: &str) -> Matrix {
        let h: Matrix = self
            .affine(x, &format!("{name}.ffn_in"))
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        self.affine(&h, &format!("{name}.ffn_out"))
    }

    fn positions(&self, len: usize) -> Matrix {
        let d = self.cfg.d_model;
        (0..len)
            .map(|pos| {
                (0..d)
                    .map(|c| {
                        let i = c - c % 2;
                        let angle = pos as f64 / 10000f64.powf(i as f64 / d as f64);
                        if c % 2 == 0 { angle.sin() } else { angle.cos() }
                    })
                    .collect()
            })
            .collect()
    }

    fn encoder(&self, window: &Matrix) -> Matrix {
        let mut x = Self::add(&self.affine(window, "enc_embed"), &self.positions(window.len()));
        for l in 0..self.cfg.n_encoder_layers {
            let p = format!("encoder.{l}");
            let a = self.mha(&x, &x, &format!("{p}.self_attn"), false, self.cfg.lookback);
            let h = self.layer_norm(&Self::add(&x, &a), &format!("{p}.ln1"));
            let f = self.ffn(&h, &p);
            x = self.layer_norm(&Self::add(&h, &f), &format!("{p}.ln2"));
        }
        x
    }

    fn decoder(&self, dec_in: &[f64], memory: &Matrix) -> Matrix {
        let col: Matrix = dec_in.iter().map(|&v| vec![v]).collect();
        let mut y = Self::add(&self.affine(&col, "dec_embed"), &self.positions(col.len()));
        for l in 0..self.cfg.n_decoder_layers {
            let p = format!("decoder.{l}");
            let a = self.mha(&y, &y, &format!("{p}.self_attn"), true, self.cfg.horizon);
            let h = self.layer_norm(&Self::add(&y, &a), &format!("{p}.ln1"));
            let c = self.mha(&h, memory, &format!("{p}.cross_attn"), false, self.cfg.lookback);
            let h = self.layer_norm(&Self::add(&h, &c), &format!("{p}.ln2"));
            let f = self.ffn(&h, &p);
            y = self.layer_norm(&Self::add(&h, &f), &format!("{p}.ln3"));
        }
        y
    }

    fn head(&self, d: &Matrix) -> Matrix {
        match self.cfg.output_head {
            OutputHead::Linear => self.affine(d, "head.out"),
            OutputHead::Nonlinear { activation } => {
                let h: Matrix = self
                    .affine(d, "head.hidden")
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| activation.apply(v)).collect())
                    .collect();
                self.affine(&h, "head.out")
            }
        }
    }

    fn forward(&self, window: &Matrix, dec_in: &[f64]) -> Matrix {
        let memory = self.encoder(window);
        self.head(&self.decoder(dec_in, &memory))
    }
}

// ---- structure -----------------------------------------------------------

#[test]
fn parameter_count_matches_enumerated_build() {
    for cfg in [
        tiny(AttentionMode::Dense, OutputHead::Linear),
        small(AttentionMode::Sparse { k: None }, OutputHead::tanh()),
        ModelConfig::desk(),
    ] {
        let m = TransformerModel::new(cfg.clone(), 0).unwrap();
        assert_eq!(m.params().total_elements(), cfg.parameter_count(), "{cfg:?}");
    }
}

#[test]
fn table_scale_default_builds_with_expected_count() {
    let cfg = ModelConfig::default();
    let (d, f) = (512usize, 2048usize);
    let expected = (19 * d + d + 2 * d)
        + (4 * d * d + 2 * d * f + f + d + 4 * d)
        + 2 * (8 * d * d + 2 * d * f + f + d + 6 * d)
        + (d * d + 2 * d + 1);
    assert_eq!(cfg.parameter_count(), expected);
}

#[test]
fn toggling_head_changes_only_head_parameters() {
    let lin = TransformerModel::new(small(AttentionMode::Dense, OutputHead::Linear), 1).unwrap();
    let non = TransformerModel::new(small(AttentionMode::Dense, OutputHead::tanh()), 1).unwrap();
    let body = |m: &TransformerModel| -> Vec<(String, Vec<usize>)> {
        m.params()
            .iter()
            .filter(|(n, _)| !n.starts_with("head."))
            .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
            .collect()
    };
    assert_eq!(body(&lin), body(&non));
    assert!(lin.params().get("head.hidden.w").is_none());
    assert_eq!(non.params().get("head.hidden.w").unwrap().shape(), &[12, 12]);
}

#[test]
fn initialization_is_seeded_and_conventional() {
    let cfg = small(AttentionMode::Dense, OutputHead::Linear);
    let a = TransformerModel::new(cfg.clone(), 9).unwrap();
    let b = TransformerModel::new(cfg.clone(), 9).unwrap();
    let c = TransformerModel::new(cfg, 10).unwrap();
    assert_eq!(a.params().names(), b.params().names());
    for ((_, x), (_, y)) in a.params().iter().zip(b.params().iter()) {
        assert_eq!(x, y);
    }
    assert_ne!(a.params().get("enc_embed.w"), c.params().get("enc_embed.w"));
    for (name, v) in a.params().iter() {
        if name.ends_with(".b") || name.ends_with(".beta") {
            assert!(v.data().iter().all(|&x| x == 0.0), "{name}");
        } else if name.ends_with(".gamma") {
            assert!(v.data().iter().all(|&x| x == 1.0), "{name}");
        } else {
            let bound = (6.0 / (v.rows() + v.cols()) as f64).sqrt();
            assert!(v.data().iter().all(|x| x.abs() <= bound), "{name}");
        }
    }
}

// ---- embedding and positions ---------------------------------------------

#[test]
fn positional_first_row_alternates_and_entries_are_bounded() {
    let pe = PositionalEncoding::new(40, 10);
    let first = pe.table().row(0);
    for (i, v) in first.iter().enumerate() {
        assert_eq!(*v, if i % 2 == 0 { 0.0 } else { 1.0 });
    }
    assert!(pe.table().data().iter().all(|v| v.abs() <= 1.0));
    assert_eq!(PositionalEncoding::new(40, 10), pe);
}

#[test]
fn zero_embedding_yields_the_positional_slice() {
    let mut m = TransformerModel::new(small(AttentionMode::Dense, OutputHead::Linear), 2).unwrap();
    let id = m.params().find("enc_embed.w").unwrap();
    m.params_mut().value_mut(id).data_mut().fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = t(&random_matrix(&mut rng, 10, 19));
    let e = m.embed(&w).unwrap();
    assert_eq!(e, m.positional_encoding().slice(10).unwrap());
}

#[test]
fn overlong_window_is_rejected() {
    let m = TransformerModel::new(small(AttentionMode::Dense, OutputHead::Linear), 2).unwrap();
    let w = Tensor::zeros(&[11, 19]);
    assert!(matches!(m.embed(&w), Err(ModelError::SequenceTooLong { len: 11, max: 10 })));
}

// ---- encoder / decoder / head against the oracle --------------------------

#[test]
fn zero_weight_encoder_stacks_normalizations() {
    let mut m = TransformerModel::new(tiny(AttentionMode::Dense, OutputHead::Linear), 0).unwrap();
    let names: Vec<String> = m.params().names().to_vec();
    for name in names.iter().filter(|n| n.starts_with("encoder.") && !n.contains(".ln")) {
        let id = m.params().find(name).unwrap();
        m.params_mut().value_mut(id).data_mut().fill(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_matrix(&mut rng, 6, 8);
    let out = rows_of(&m.encoder_forward(&t(&x)).unwrap());
    // Attention and FFN both vanish, so the layer is LN(LN(x)).
    let ln = |r: &Vec<f64>| -> Vec<f64> {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64;
        r.iter().map(|v| (v - mean) / (var + 1e-5).sqrt()).collect()
    };
    let expected: Matrix = x.iter().map(|r| ln(&ln(r))).collect();
    assert!(max_diff(&out, &expected) < 1e-12);
}

#[test]
fn encoder_matches_hand_assembled_layers() {
    for attention in [AttentionMode::Dense, AttentionMode::Sparse { k: None }, AttentionMode::Sparse { k: Some(2) }] {
        let cfg = small(attention, OutputHead::Linear);
        let mut m = TransformerModel::new(cfg.clone(), 5).unwrap();
        randomize(&mut m, 6);
        let oracle = Oracle { p: m.params(), cfg: &cfg };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_matrix(&mut rng, 10, 19);
        let emb = m.embed(&t(&w)).unwrap();
        let got = rows_of(&m.encoder_forward(&emb).unwrap());
        assert!(max_diff(&got, &oracle.encoder(&w)) < 1e-12, "{attention:?}");
    }
}

#[test]
fn decoder_matches_hand_assembled_layers() {
    for attention in [AttentionMode::Dense, AttentionMode::Sparse { k: None }] {
        let cfg = small(attention, OutputHead::Linear);
        let mut m = TransformerModel::new(cfg.clone(), 8).unwrap();
        randomize(&mut m, 9);
        let oracle = Oracle { p: m.params(), cfg: &cfg };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let memory = random_matrix(&mut rng, 10, 12);
        let dec_in: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dec_col: Matrix = dec_in.iter().map(|&v| vec![v]).collect();
        let y = {
            let mut tape = Tape::new();
            let p = m.bind(&mut tape, false);
            let d = tape.constant(t(&dec_col));
            let y = m.embed_decoder_on(&mut tape, &p, d).unwrap();
            tape.value(y).clone()
        };
        let got = rows_of(&m.decoder_forward(&y, &t(&memory)).unwrap());
        assert!(max_diff(&got, &oracle.decoder(&dec_in, &memory)) < 1e-12, "{attention:?}");
    }
}

#[test]
fn full_forward_matches_oracle_for_every_variant() {
    let heads = [
        OutputHead::Linear,
        OutputHead::tanh(),
        OutputHead::Nonlinear {
            activation: Activation::Elu,
        },
    ];
    for attention in [AttentionMode::Dense, AttentionMode::Sparse { k: None }] {
        for head in heads {
            let cfg = small(attention, head);
            let mut m = TransformerModel::new(cfg.clone(), 11).unwrap();
            randomize(&mut m, 12);
            let oracle = Oracle { p: m.params(), cfg: &cfg };
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            let w = random_matrix(&mut rng, 10, 19);
            let dec_in: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = m.forward(&t(&w), &Tensor::matrix(4, 1, dec_in.clone()).unwrap()).unwrap();
            assert_eq!(got.shape(), &[4, 1]);
            assert!(max_diff(&rows_of(&got), &oracle.forward(&w, &dec_in)) < 1e-12, "{attention:?} {head:?}");
        }
    }
}

#[test]
fn decoder_is_causal() {
    let cfg = small(AttentionMode::Sparse { k: None }, OutputHead::tanh());
    let mut m = TransformerModel::new(cfg, 14).unwrap();
    randomize(&mut m, 15);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let memory = t(&random_matrix(&mut rng, 10, 12));
    let y = random_matrix(&mut rng, 4, 12);
    let mut y2 = y.clone();
    y2[3].iter_mut().for_each(|v| *v += 3.0);
    let a = m.decoder_forward(&t(&y), &memory).unwrap();
    let b = m.decoder_forward(&t(&y2), &memory).unwrap();
    assert_eq!(&a.data()[..3 * 12], &b.data()[..3 * 12]);
    assert_ne!(&a.data()[3 * 12..], &b.data()[3 * 12..]);

    let w = t(&random_matrix(&mut rng, 10, 19));
    for tstep in 0..4 {
        let base = [0.1, -0.2, 0.3, 0.4];
        let mut bumped = base;
        for v in bumped.iter_mut().skip(tstep + 1) {
            *v += 1.0;
        }
        let o1 = m.forward(&w, &Tensor::matrix(4, 1, base.to_vec()).unwrap()).unwrap();
        let o2 = m.forward(&w, &Tensor::matrix(4, 1, bumped.to_vec()).unwrap()).unwrap();
        assert_eq!(&o1.data()[..=tstep], &o2.data()[..=tstep]);
    }
}

#[test]
fn single_step_decoder_attends_only_to_itself() {
    let cfg = small(AttentionMode::Dense, OutputHead::Linear);
    let m = TransformerModel::new(cfg, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let memory = t(&random_matrix(&mut rng, 10, 12));
    let y = random_matrix(&mut rng, 1, 12);
    assert_eq!(m.decoder_forward(&t(&y), &memory).unwrap().shape(), &[1, 12]);
}

#[test]
fn head_examples() {
    let cfg = small(AttentionMode::Dense, OutputHead::tanh());
    let mut m = TransformerModel::new(cfg, 19).unwrap();
    randomize(&mut m, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // Decoder outputs are layer-normalized, so head inputs are O(1).
    let d = t(&random_matrix(&mut rng, 4, 12));
    let hidden = m.head_hidden(&d).unwrap().unwrap();
    assert!(hidden.data().iter().all(|v| v.abs() < 1.0));

    let id = m.params().find("head.out.w").unwrap();
    m.params_mut().value_mut(id).data_mut().fill(0.0);
    let b = m.params().get("head.out.b").unwrap().data()[0];
    let out = m.output_head(&d).unwrap();
    assert!(out.data().iter().all(|&v| v == b));

    let mut lin = TransformerModel::new(small(AttentionMode::Dense, OutputHead::Linear), 22).unwrap();
    let id = lin.params().find("head.out.b").unwrap();
    lin.params_mut().set(id, Tensor::vector(vec![0.75]).unwrap());
    assert!(lin.head_hidden(&d).unwrap().is_none());
    let out = lin.output_head(&Tensor::zeros(&[3, 12])).unwrap();
    assert_eq!(out.data(), &[0.75, 0.75, 0.75]);
}

#[test]
fn sparse_with_full_k_equals_dense_end_to_end() {
    for head in [OutputHead::Linear, OutputHead::tanh()] {
        let dense_cfg = small(AttentionMode::Dense, head);
        let mut dense = TransformerModel::new(dense_cfg.clone(), 23).unwrap();
        randomize(&mut dense, 24);
        let sparse_cfg = ModelConfig {
            attention: AttentionMode::Sparse { k: Some(dense_cfg.lookback) },
            ..dense_cfg
        };
        let sparse = TransformerModel::from_params(sparse_cfg, dense.params().clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let w = t(&random_matrix(&mut rng, 10, 19));
        let dec = Tensor::matrix(4, 1, vec![0.3, -0.1, 0.2, 0.5]).unwrap();
        let a = dense.forward(&w, &dec).unwrap();
        let b = sparse.forward(&w, &dec).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}

#[test]
fn forward_is_deterministic() {
    let cfg = small(AttentionMode::Sparse { k: None }, OutputHead::tanh());
    let a = TransformerModel::new(cfg.clone(), 26).unwrap();
    let b = TransformerModel::new(cfg, 26).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let w = t(&random_matrix(&mut rng, 10, 19));
    let dec = Tensor::matrix(4, 1, vec![0.3, -0.1, 0.2, 0.5]).unwrap();
    let x = a.forward(&w, &dec).unwrap();
    let y = b.forward(&w, &dec).unwrap();
    assert_eq!(x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn shape_violations_are_errors() {
    let m = TransformerModel::new(small(AttentionMode::Dense, OutputHead::Linear), 28).unwrap();
    let w = Tensor::zeros(&[10, 18]);
    let dec = Tensor::zeros(&[2, 1]);
    assert!(matches!(m.forward(&w, &dec), Err(ModelError::Shape(_))));
    let w = Tensor::zeros(&[10, 19]);
    assert!(matches!(m.forward(&w, &Tensor::zeros(&[5, 1])), Err(ModelError::Shape(_))));
    assert!(matches!(m.forward(&w, &Tensor::zeros(&[2, 2])), Err(ModelError::Shape(_))));
    assert!(m.predict(&w, 0).is_err());
    assert!(m.predict(&w, 5).is_err());
    assert!(m.encoder_forward(&Tensor::zeros(&[10, 11])).is_err());
}

// ---- rollout ---------------------------------------------------------------

#[test]
fn rollout_feeds_back_its_own_predictions() {
    let cfg = small(AttentionMode::Sparse { k: None }, OutputHead::tanh());
    let mut m = TransformerModel::new(cfg.clone(), 29).unwrap();
    randomize(&mut m, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let w = random_matrix(&mut rng, 10, 19);
    let start = w[9][cfg.target_index];

    let one = m.predict(&t(&w), 1).unwrap();
    let direct = m.forward(&t(&w), &Tensor::matrix(1, 1, vec![start]).unwrap()).unwrap();
    assert_eq!(one, direct.data());

    let three = m.predict(&t(&w), 3).unwrap();
    let two = m.predict(&t(&w), 2).unwrap();
    assert_eq!(three[..2], two[..]);
    assert_eq!(three[..1], one[..]);

    // Trace: step t decodes [start, p_0, ..., p_{t-1}] and emits its last row.
    let oracle = Oracle { p: m.params(), cfg: &cfg };
    let mut inputs = vec![start];
    for &p in &three {
        let out = oracle.forward(&w, &inputs);
        assert!((out.last().unwrap()[0] - p).abs() < 1e-12);
        inputs.push(p);
    }
}

// ---- gradients ---------------------------------------------------------------

fn loss(m: &TransformerModel, w: &Tensor, dec: &Tensor, target: &Tensor) -> f64 {
    let out = m.forward(w, dec).unwrap();
    out.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / out.len() as f64
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    for (attention, head) in [
        (AttentionMode::Dense, OutputHead::Linear),
        (AttentionMode::Sparse { k: None }, OutputHead::tanh()),
    ] {
        let mut cfg = tiny(attention, head);
        cfg.horizon = 2;
        let mut m = TransformerModel::new(cfg, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let w = t(&random_matrix(&mut rng, 6, 5));
        let dec = Tensor::matrix(2, 1, vec![0.4, -0.3]).unwrap();
        let target = Tensor::matrix(2, 1, vec![1.0, -0.5]).unwrap();

        let mut tape = Tape::new();
        let p = m.bind(&mut tape, true);
        let wv = tape.constant(w.clone());
        let dv = tape.constant(dec.clone());
        let tv = tape.constant(target.clone());
        let out = m.forward_on(&mut tape, &p, wv, dv).unwrap();
        let l = tape.mse(out, tv).unwrap();
        tape.backward(l).unwrap();
        let ids: Vec<_> = m.params().ids().collect();
        let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| tape.grad(p.var(id)).unwrap().to_vec()).collect();

        let eps = 1e-5;
        let mut worst = (0.0, String::new());
        for (id, grad) in ids.iter().zip(&analytic) {
            for j in 0..grad.len() {
                let orig = m.params().value(*id).data()[j];
                m.params_mut().value_mut(*id).data_mut()[j] = orig + eps;
                let up = loss(&m, &w, &dec, &target);
                m.params_mut().value_mut(*id).data_mut()[j] = orig - eps;
                let down = loss(&m, &w, &dec, &target);
                m.params_mut().value_mut(*id).data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-6);
                if rel > worst.0 {
                    worst = (rel, format!("{}[{j}] analytic {} numeric {numeric}", m.params().name(*id), grad[j]));
                }
            }
        }
        assert!(worst.0 < 1e-3, "{attention:?}: {}", worst.1);
    }
}

// ---- checkpoint ----------------------------------------------------------------

fn sample_normalizer() -> Normalizer {
    Normalizer {
        columns: (0..19).map(|i| format!("c{i}")).collect(),
        mean: (0..19).map(|i| i as f64 * 0.5).collect(),
        std: (0..19).map(|i| 1.0 + i as f64).collect(),
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let cfg = small(AttentionMode::Sparse { k: Some(3) }, OutputHead::tanh());
    let mut m = TransformerModel::new(cfg, 34).unwrap();
    randomize(&mut m, 35);
    let mut ck = Checkpoint::from_model(&m, Some(sample_normalizer()));
    ck.metadata.insert("seed".into(), "34".into());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.metadata["seed"], "34");
    assert_eq!(loaded.normalizer, Some(sample_normalizer()));
    let (m2, _) = loaded.into_model().unwrap();
    assert_eq!(m2.config(), m.config());
    for ((n1, a), (n2, b)) in m.params().iter().zip(m2.params().iter()) {
        assert_eq!(n1, n2);
        assert_eq!(a, b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let w = t(&random_matrix(&mut rng, 10, 19));
    assert_eq!(m.predict(&w, 4).unwrap(), m2.predict(&w, 4).unwrap());
}

#[test]
fn malformed_checkpoints_are_rejected() {
    let m = TransformerModel::new(tiny(AttentionMode::Dense, OutputHead::Linear), 37).unwrap();
    let bytes = Checkpoint::from_model(&m, None).to_bytes();
    let err = |b: &[u8]| matches!(Checkpoint::from_bytes(b), Err(ModelError::Checkpoint(_)));

    assert!(err(b"nope"));
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(err(&bad_magic));
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    assert!(err(&bad_version));
    assert!(err(&bytes[..bytes.len() - 8]));
    assert!(err(&bytes[..40]));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(err(&trailing));
    assert!(Checkpoint::from_bytes(&bytes).is_ok());

    // Shapes that disagree with the config are refused when rebuilding.
    let mut ck = Checkpoint::from_bytes(&bytes).unwrap();
    ck.config.d_model = 4;
    assert!(ck.into_model().is_err());
}
