//! Binary checkpoint format for parameter stores.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "BCASTCKP"
//! version u32      currently 1
//! count   u32      number of tensor records
//! record  repeated: name_len u32, name utf-8 bytes,
//!                   rank u32, dims u32 x rank,
//!                   payload f64-LE x product(dims)
//! ```
//!
//! Save and load round-trip every payload bit exactly; optimizer state is
//! deliberately not stored, a checkpoint is the model weights only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"BCASTCKP";
const VERSION: u32 = 1;

/// Write every parameter of `store` to `path`.
pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(store.param_count() as u32).to_le_bytes()).map_err(io)?;
    for (name, tensor) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes()).map_err(io)?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Read a checkpoint back into a fresh store (optimizer state starts cold).
pub fn load(path: &Path) -> Result<ParamStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |msg: String| Error::Data(format!("checkpoint {}: {msg}", path.display()));

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(bad("bad magic, not a checkpoint file".into()));
    }
    let version = read_u32(&mut r, path)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = read_u32(&mut r, path)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r, path)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes, path)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| bad("parameter name is not utf-8".into()))?;
        let rank = read_u32(&mut r, path)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, path)? as usize);
        }
        let volume: usize = shape.iter().product();
        let mut data = Vec::with_capacity(volume);
        let mut buf = [0u8; 8];
        for _ in 0..volume {
            read_exact(&mut r, &mut buf, path)?;
            data.push(f64::from_le_bytes(buf));
        }
        store.insert(&name, Tensor::from_vec(&shape, data)?)?;
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => Ok(store),
        Ok(_) => Err(bad("trailing bytes after last record".into())),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Data(format!("checkpoint {}: truncated file", path.display()))
        } else {
            Error::io(path, e)
        }
    })
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path)?;
    Ok(u32::from_le_bytes(buf))
}
