//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `ASCK`, format version, model kind tag,
//! propagation depth, l2 coefficient, table shapes, then both embedding
//! tables row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};

const MAGIC: &[u8; 4] = b"ASCK";
const VERSION: u32 = 1;

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(
        4 + 4 + 1 + 4 + 8 + 24 + 8 * (params.user_table().len() + params.item_table().len()),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, layers): (u8, u32) = match params.kind() {
        ModelKind::Mf => (0, 0),
        ModelKind::LightGcn { layers } => (1, layers as u32),
    };
    out.push(tag);
    out.extend_from_slice(&layers.to_le_bytes());
    out.extend_from_slice(&params.l2().to_le_bytes());
    out.extend_from_slice(&(params.num_users() as u64).to_le_bytes());
    out.extend_from_slice(&(params.num_items() as u64).to_le_bytes());
    out.extend_from_slice(&(params.dim() as u64).to_le_bytes());
    for &v in params.user_table() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in params.item_table() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    if cur.take(4)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a model checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let tag = cur.take(1)?[0];
    let layers = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
    let kind = match tag {
        0 => ModelKind::Mf,
        1 => ModelKind::LightGcn { layers },
        other => {
            return Err(Error::Checkpoint(format!(
                "{}: unknown model kind tag {other}",
                path.display()
            )))
        }
    };
    let l2 = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let num_users = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let num_items = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;

    let mut read_table = |rows: usize| -> Result<Vec<f64>> {
        let mut table = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            table.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
        }
        Ok(table)
    };
    let user_emb = read_table(num_users)?;
    let item_emb = read_table(num_items)?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{}: trailing bytes after embedding tables",
            path.display()
        )));
    }
    ModelParams::from_parts(num_users, num_items, dim, kind, l2, user_emb, item_emb)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
}
