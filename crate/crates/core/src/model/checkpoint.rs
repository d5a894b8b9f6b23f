//! Checkpoint file: magic, format version, the six layer sizes, seed, metadata
//! string, then every parameter block as `(name, matrix snapshot)` in canonical
//! order. An optional trailing section holds optimizer state.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numerics::snapshot::{read_str, write_str};
use crate::numerics::{read_matrix, write_matrix};

use super::{ModelDims, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CSRNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// RMSprop accumulators and schedule position.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSnapshot {
    pub step: u64,
    pub lr: f64,
    pub mean_square: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
    pub meta: String,
    pub optimizer: Option<OptimizerSnapshot>,
}

fn write_blocks<W: Write>(w: &mut W, p: &ModelParams) -> Result<()> {
    for (name, t) in p.named_tensors() {
        write_str(w, &name)?;
        write_matrix(w, t)?;
    }
    Ok(())
}

fn read_blocks<R: Read>(r: &mut R, dims: ModelDims) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(dims);
    let names = ModelParams::block_names(&dims);
    for (want, t) in names.iter().zip(p.tensors_mut()) {
        let name = read_str(r)?;
        if &name != want {
            return Err(Error::Format(format!("expected block {want}, found {name}")));
        }
        let m = read_matrix(r)?;
        if m.rows() != t.rows() || m.cols() != t.cols() {
            return Err(Error::Format(format!(
                "block {name} has shape {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                t.rows(),
                t.cols()
            )));
        }
        *t = m;
    }
    Ok(p)
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<()> {
    let d = ckpt.params.dims;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    for v in [d.hidden, d.edge, d.channel, d.heads, d.embed, d.window] {
        w.write_u64::<LittleEndian>(v as u64)?;
    }
    w.write_u64::<LittleEndian>(ckpt.seed)?;
    write_str(w, &ckpt.meta)?;
    write_blocks(w, &ckpt.params)?;
    match &ckpt.optimizer {
        None => w.write_u8(0)?,
        Some(o) => {
            if !o.mean_square.same_shape(&ckpt.params) {
                return Err(Error::Contract("optimizer state shape differs from parameters".into()));
            }
            w.write_u8(1)?;
            w.write_u64::<LittleEndian>(o.step)?;
            w.write_f64::<LittleEndian>(o.lr)?;
            write_blocks(w, &o.mean_square)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut sizes = [0usize; 6];
    for s in sizes.iter_mut() {
        *s = r.read_u64::<LittleEndian>()? as usize;
    }
    let dims = ModelDims {
        hidden: sizes[0],
        edge: sizes[1],
        channel: sizes[2],
        heads: sizes[3],
        embed: sizes[4],
        window: sizes[5],
    };
    dims.validate().map_err(|e| Error::Format(e.to_string()))?;
    let seed = r.read_u64::<LittleEndian>()?;
    let meta = read_str(r)?;
    let params = read_blocks(r, dims)?;
    let optimizer = match r.read_u8()? {
        0 => None,
        1 => {
            let step = r.read_u64::<LittleEndian>()?;
            let lr = r.read_f64::<LittleEndian>()?;
            Some(OptimizerSnapshot {
                step,
                lr,
                mean_square: read_blocks(r, dims)?,
            })
        }
        b => return Err(Error::Format(format!("bad optimizer flag {b}"))),
    };
    Ok(Checkpoint {
        params,
        seed,
        meta,
        optimizer,
    })
}
