//! Network file: magic, `I`, `T`, `N`, TF-IDF flag, selection code, seed,
//! metadata string, `U` snapshot, `sigma`, then per user an anchor flag and
//! the neighbor id list. All integers little-endian.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numerics::snapshot::{read_f64s, read_str, write_f64s, write_str};
use crate::numerics::{read_matrix, write_matrix};

use super::{CoReadNetwork, NeighborSelection, NetworkConfig};

pub const NETWORK_MAGIC: &[u8; 8] = b"CSRNNET1";

pub fn write_network<W: Write>(w: &mut W, net: &CoReadNetwork, meta: &str) -> Result<()> {
    let cfg = net.config();
    w.write_all(NETWORK_MAGIC)?;
    w.write_u64::<LittleEndian>(net.num_users() as u64)?;
    w.write_u64::<LittleEndian>(cfg.rank as u64)?;
    w.write_u64::<LittleEndian>(cfg.neighbors as u64)?;
    w.write_u8(cfg.use_tfidf as u8)?;
    w.write_u8(net.selection().code())?;
    w.write_u64::<LittleEndian>(cfg.seed)?;
    write_str(w, meta)?;
    write_matrix(w, net.factors())?;
    write_f64s(w, net.sigma())?;
    for i in 0..net.num_users() as u32 {
        w.write_u8(net.is_anchored(i) as u8)?;
        let list = net.neighbors(i);
        w.write_u32::<LittleEndian>(list.len() as u32)?;
        for &k in list {
            w.write_u32::<LittleEndian>(k)?;
        }
    }
    Ok(())
}

/// Returns the network and its metadata string.
pub fn read_network<R: Read>(r: &mut R) -> Result<(CoReadNetwork, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::Format("bad network file magic".into()));
    }
    let n_users = r.read_u64::<LittleEndian>()? as usize;
    let rank = r.read_u64::<LittleEndian>()? as usize;
    let neighbors = r.read_u64::<LittleEndian>()? as usize;
    let use_tfidf = r.read_u8()? != 0;
    let selection = NeighborSelection::from_code(r.read_u8()?)?;
    let seed = r.read_u64::<LittleEndian>()?;
    let meta = read_str(r)?;
    let factors = read_matrix(r)?;
    let sigma = read_f64s(r)?;
    if factors.rows() != n_users || factors.cols() != rank {
        return Err(Error::Format("network header disagrees with factor matrix".into()));
    }
    let mut lists = Vec::with_capacity(n_users);
    let mut anchored = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        anchored.push(r.read_u8()? != 0);
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut list = vec![0u32; len];
        r.read_u32_into::<LittleEndian>(&mut list)?;
        lists.push(list);
    }
    let cfg = NetworkConfig {
        rank,
        neighbors,
        use_tfidf,
        seed,
    };
    Ok((CoReadNetwork::from_parts(cfg, selection, factors, sigma, lists, anchored)?, meta))
}
