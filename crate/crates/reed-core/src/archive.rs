//! Weight archive: single-file model persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "REEDWA01"
//! version          u32      (1)
//! n_entities       u64
//! n_relations      u64
//! layers           u64      (L)
//! ent_dims         u64 len, then len x u64   (d_0 .. d_L, d_{L+1})
//! rel_dims         u64 len, then len x u64   (d'_0 .. d'_L)
//! decoder          u8       (0 = TD, 1 = SM)
//! aggregator       u8       (0 = sum, 1 = mean)
//! activations      3 x (u8 code, f64 param)  (phi, rho, psi)
//! s_target         f64
//! gamma            f64
//! seed             u64
//! dataset_hash     32 bytes
//! matrix_count     u64
//! per matrix:      u64 name length, name bytes (UTF-8),
//!                  u64 rows, u64 cols, rows*cols f64 row-major
//! ```
//!
//! Matrices are stored in the model's canonical parameter order with
//! their canonical names; the loader rebuilds the model from the
//! header dimensions and verifies every name and shape.

use crate::decoder::{DecoderKind, DecoderParams, SmDecoderParams, TdDecoderParams, TdRelationParams};
use crate::diffusion::Aggregator;
use crate::encoder::{Activation, ActivationTriple, EncoderLayer, EncoderParams};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::train::{Model, TrainConfig, TrainedModel};
use ndarray::Array2;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"REEDWA01";
const VERSION: u32 = 1;

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }
    fn bytes(&mut self, v: &[u8]) -> std::io::Result<()> {
        self.out.write_all(v)
    }
    fn matrix(&mut self, name: &str, m: &Mat) -> std::io::Result<()> {
        self.u64(name.len() as u64)?;
        self.bytes(name.as_bytes())?;
        self.u64(m.nrows() as u64)?;
        self.u64(m.ncols() as u64)?;
        for v in m.iter() {
            self.f64(*v)?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    inp: R,
}

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> std::io::Result<u32> {
        let mut b = [0u8; 4];
        self.inp.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        let mut b = [0u8; 8];
        self.inp.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        self.inp.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn bytes(&mut self, n: usize) -> std::io::Result<Vec<u8>> {
        let mut b = vec![0u8; n];
        self.inp.read_exact(&mut b)?;
        Ok(b)
    }
    fn matrix(&mut self) -> std::io::Result<(String, Mat)> {
        let name_len = self.u64()? as usize;
        let name = String::from_utf8_lossy(&self.bytes(name_len)?).into_owned();
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok((
            name,
            Array2::from_shape_vec((rows, cols), data).expect("shape from counts"),
        ))
    }
}

/// Write a trained model. `n_entities`/`n_relations` come from the
/// graph the model was trained on.
pub fn save_model(
    trained: &TrainedModel,
    n_entities: usize,
    n_relations: usize,
    d0: usize,
    d0_rel: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = Writer {
        out: BufWriter::new(file),
    };
    let model = &trained.model;
    let cfg = &trained.config;

    let mut ent_dims = model.encoder.ent_dims(d0);
    ent_dims.push(model.decoder.d_out()); // d_{L+1}
    let rel_dims = model.encoder.rel_dims(d0_rel);

    (|| -> std::io::Result<()> {
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u64(n_entities as u64)?;
        w.u64(n_relations as u64)?;
        w.u64(model.encoder.n_layers() as u64)?;
        w.u64(ent_dims.len() as u64)?;
        for d in &ent_dims {
            w.u64(*d as u64)?;
        }
        w.u64(rel_dims.len() as u64)?;
        for d in &rel_dims {
            w.u64(*d as u64)?;
        }
        w.bytes(&[match model.decoder.kind() {
            DecoderKind::Td => 0u8,
            DecoderKind::Sm => 1u8,
        }])?;
        w.bytes(&[match cfg.aggregator {
            Aggregator::Sum => 0u8,
            Aggregator::Mean => 1u8,
        }])?;
        for act in [
            model.encoder.activations.phi,
            model.encoder.activations.rho,
            model.encoder.activations.psi,
        ] {
            let (code, param) = act.code();
            w.bytes(&[code])?;
            w.f64(param)?;
        }
        w.f64(cfg.s_target)?;
        w.f64(cfg.gamma)?;
        w.u64(cfg.seed)?;
        w.bytes(&trained.dataset_hash)?;
        let names = model.param_names();
        let params = model.params();
        w.u64(params.len() as u64)?;
        for (name, m) in names.iter().zip(params) {
            w.matrix(name, m)?;
        }
        w.out.flush()
    })()
    .map_err(|e| Error::io(&display, e))
}

/// Load a model archive, rebuilding the structural config. Training
/// hyperparameters that the archive does not carry (learning rate,
/// epochs, Adam constants) take their defaults.
pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut r = Reader {
        inp: BufReader::new(file),
    };
    let parse = |e: std::io::Error| Error::io(&display, e);

    let magic = r.bytes(8).map_err(parse)?;
    if magic != MAGIC {
        return Err(Error::Archive(format!(
            "{display}: bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u32().map_err(parse)?;
    if version != VERSION {
        return Err(Error::Archive(format!(
            "{display}: unsupported version {version}"
        )));
    }
    let n_entities = r.u64().map_err(parse)? as usize;
    let n_relations = r.u64().map_err(parse)? as usize;
    let layers = r.u64().map_err(parse)? as usize;
    let ent_dim_len = r.u64().map_err(parse)? as usize;
    let mut ent_dims = Vec::with_capacity(ent_dim_len);
    for _ in 0..ent_dim_len {
        ent_dims.push(r.u64().map_err(parse)? as usize);
    }
    let rel_dim_len = r.u64().map_err(parse)? as usize;
    let mut rel_dims = Vec::with_capacity(rel_dim_len);
    for _ in 0..rel_dim_len {
        rel_dims.push(r.u64().map_err(parse)? as usize);
    }
    let decoder_kind = match r.bytes(1).map_err(parse)?[0] {
        0 => DecoderKind::Td,
        1 => DecoderKind::Sm,
        other => {
            return Err(Error::Archive(format!(
                "{display}: unknown decoder code {other}"
            )))
        }
    };
    let aggregator = match r.bytes(1).map_err(parse)?[0] {
        0 => Aggregator::Sum,
        1 => Aggregator::Mean,
        other => {
            return Err(Error::Archive(format!(
                "{display}: unknown aggregator code {other}"
            )))
        }
    };
    let mut acts = [Activation::Identity; 3];
    for slot in acts.iter_mut() {
        let code = r.bytes(1).map_err(parse)?[0];
        let param = r.f64().map_err(parse)?;
        *slot = Activation::from_code(code, param)?;
    }
    let s_target = r.f64().map_err(parse)?;
    let gamma = r.f64().map_err(parse)?;
    let seed = r.u64().map_err(parse)?;
    let mut dataset_hash = [0u8; 32];
    dataset_hash.copy_from_slice(&r.bytes(32).map_err(parse)?);

    let matrix_count = r.u64().map_err(parse)? as usize;
    let mut matrices = Vec::with_capacity(matrix_count);
    for _ in 0..matrix_count {
        matrices.push(r.matrix().map_err(parse)?);
    }

    // rebuild the model in canonical order
    let mut cursor = matrices.into_iter();
    let mut take = |expected_name: &str, rows: usize, cols: usize| -> Result<Mat> {
        let (name, m) = cursor
            .next()
            .ok_or_else(|| Error::Archive(format!("{display}: missing matrix {expected_name}")))?;
        if name != expected_name {
            return Err(Error::Archive(format!(
                "{display}: expected matrix {expected_name}, found {name}"
            )));
        }
        if m.dim() != (rows, cols) {
            return Err(Error::Archive(format!(
                "{display}: {name} has shape {:?}, expected ({rows}, {cols})",
                m.dim()
            )));
        }
        Ok(m)
    };

    if ent_dims.len() != layers + 2 || rel_dims.len() != layers + 1 {
        return Err(Error::Archive(format!(
            "{display}: dimension chains have lengths {} / {}, expected {} / {}",
            ent_dims.len(),
            rel_dims.len(),
            layers + 2,
            layers + 1
        )));
    }
    let d_out = ent_dims[layers + 1];

    let mut enc_layers = Vec::with_capacity(layers);
    for l in 1..=layers {
        let (d_in, d_next) = (ent_dims[l - 1], ent_dims[l]);
        let (dr_in, dr_next) = (rel_dims[l - 1], rel_dims[l]);
        let w_self = take(&format!("enc.l{l}.w0"), d_in, d_next)?;
        let u_self = take(&format!("enc.l{l}.u0"), dr_in, dr_next)?;
        let mut w_rel = Vec::with_capacity(n_relations);
        for rel in 0..n_relations {
            w_rel.push(take(&format!("enc.l{l}.w.r{rel}"), d_in, d_next)?);
        }
        let mut u_rel = Vec::with_capacity(n_relations);
        for rel in 0..n_relations {
            u_rel.push(take(&format!("enc.l{l}.u.r{rel}"), dr_in, d_next)?);
        }
        enc_layers.push(EncoderLayer {
            w_self,
            u_self,
            w_rel,
            u_rel,
        });
    }
    let d_last = ent_dims[layers];
    let dr_last = rel_dims[layers];
    let decoder = match decoder_kind {
        DecoderKind::Td => {
            let mut relations = Vec::with_capacity(n_relations);
            for rel in 0..n_relations {
                let mut w = Vec::new();
                let mut u = Vec::new();
                let mut v = Vec::new();
                for j in 0..2 {
                    w.push(take(&format!("dec.r{rel}.j{j}.w"), d_last, d_out)?);
                    u.push(take(&format!("dec.r{rel}.j{j}.u"), dr_last, d_out)?);
                    v.push(take(&format!("dec.r{rel}.j{j}.v"), d_last, d_out)?);
                }
                relations.push(TdRelationParams {
                    w: [w.remove(0), w.remove(0)],
                    u: [u.remove(0), u.remove(0)],
                    v: [v.remove(0), v.remove(0)],
                });
            }
            DecoderParams::Td(TdDecoderParams { relations })
        }
        DecoderKind::Sm => {
            let mut relations = Vec::with_capacity(n_relations);
            for rel in 0..n_relations {
                let a = take(&format!("dec.r{rel}.j0.u"), d_last, d_last)?;
                let b = take(&format!("dec.r{rel}.j1.u"), d_last, d_last)?;
                relations.push([a, b]);
            }
            DecoderParams::Sm(SmDecoderParams { relations })
        }
    };

    let model = Model {
        encoder: EncoderParams {
            layers: enc_layers,
            activations: ActivationTriple {
                phi: acts[0],
                rho: acts[1],
                psi: acts[2],
            },
        },
        decoder,
    };
    let config = TrainConfig {
        layers,
        hidden_dim: if layers > 0 { ent_dims[1] } else { d_out },
        rel_hidden_dim: if layers > 0 {
            rel_dims[1]
        } else {
            rel_dims[0]
        },
        decoder: decoder_kind,
        aggregator,
        gamma,
        s_target,
        seed,
        ..TrainConfig::default()
    };
    Ok(LoadedModel {
        trained: TrainedModel {
            model,
            config,
            dataset_hash,
        },
        n_entities,
        n_relations,
        d0: ent_dims[0],
        d0_rel: rel_dims[0],
    })
}

/// A loaded archive: the model plus the graph shape it was trained on.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub trained: TrainedModel,
    pub n_entities: usize,
    pub n_relations: usize,
    pub d0: usize,
    pub d0_rel: usize,
}
