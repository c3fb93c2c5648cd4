//! Binary network container.
//!
//! ```text
//! magic        4 bytes  "SBNN"
//! version      u32      1
//! n_dims       u32
//! layer_dims   n_dims x u32
//! embed_dim    u32      0 for unconditioned networks
//! params       f64 x num_params, row-major, per layer: weight, bias, projection
//! n_meta       u32
//! meta         n_meta x (u32 key length, key bytes (UTF-8), f64 value)
//! ```
//!
//! All integers and floats are little-endian. The metadata block carries the
//! model-level scalars (noise levels, data mean) that the estimators need.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::MlpNetwork;

pub const MAGIC: &[u8; 4] = b"SBNN";
pub const VERSION: u32 = 1;

pub type Metadata = Vec<(String, f64)>;

pub fn write_network(mut w: impl Write, net: &MlpNetwork, meta: &[(String, f64)]) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * net.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.layer_dims().len() as u32).to_le_bytes());
    for &d in net.layer_dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.embed_dim() as u32).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    for (k, v) in meta {
        buf.extend_from_slice(&(k.len() as u32).to_le_bytes());
        buf.extend_from_slice(k.as_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!("checkpoint truncated at byte {} (wanted {n} more)", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_network(mut r: impl Read) -> Result<(MlpNetwork, Metadata)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a network checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n_dims = c.u32()? as usize;
    if n_dims > 64 {
        return Err(Error::Format(format!("implausible layer count {n_dims}")));
    }
    let dims = (0..n_dims).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let embed_dim = c.u32()? as usize;
    let template = MlpNetwork::zeros(&dims, embed_dim)?;
    let params = (0..template.num_params()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let n_meta = c.u32()? as usize;
    let mut meta = Vec::with_capacity(n_meta.min(1024));
    for _ in 0..n_meta {
        let len = c.u32()? as usize;
        let key = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Format("metadata key is not UTF-8".into()))?
            .to_string();
        meta.push((key, c.f64()?));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", bytes.len() - c.pos)));
    }
    Ok((MlpNetwork::from_params(&dims, embed_dim, params)?, meta))
}

pub fn save(path: &Path, net: &MlpNetwork, meta: &[(String, f64)]) -> Result<()> {
    let mut buf = Vec::new();
    write_network(&mut buf, net, meta)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(MlpNetwork, Metadata)> {
    read_network(std::fs::File::open(path)?)
}

pub fn meta_get(meta: &[(String, f64)], key: &str) -> Option<f64> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
}

pub fn meta_require(meta: &[(String, f64)], key: &str) -> Result<f64> {
    meta_get(meta, key).ok_or_else(|| Error::Format(format!("checkpoint lacks `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn round_trip() {
        let mut rng = Rng::new(4);
        let net = MlpNetwork::init(&[2, 5, 3, 2], 4, &mut rng).unwrap();
        let meta = vec![("sigma".to_string(), 1.0), ("mean_0".to_string(), -0.25)];
        let mut buf = Vec::new();
        write_network(&mut buf, &net, &meta).unwrap();
        assert_eq!(&buf[..4], b"SBNN");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        let (back, meta_back) = read_network(&buf[..]).unwrap();
        assert_eq!(back, net);
        assert_eq!(meta_back, meta);
    }

    #[test]
    fn layout_is_weights_biases_projections() {
        let net = MlpNetwork::from_params(&[1, 2, 1], 2, (0..11).map(f64::from).collect()).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net, &[]).unwrap();
        // header: magic + version + n_dims + 3 dims + embed_dim = 28 bytes
        let first = f64::from_le_bytes(buf[28..36].try_into().unwrap());
        assert_eq!(first, 0.0);
        assert_eq!(net.weight(0), &[0.0, 1.0]);
        assert_eq!(net.bias(0), &[2.0, 3.0]);
        assert_eq!(net.embed_projection(0).unwrap(), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(buf.len(), 28 + 11 * 8 + 4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_network(&b"XXXX"[..]).is_err());
        let mut buf = Vec::new();
        write_network(&mut buf, &MlpNetwork::zeros(&[2, 2], 0).unwrap(), &[]).unwrap();
        assert!(read_network(&buf[..buf.len() - 3]).is_err());
        buf.push(0);
        assert!(read_network(&buf[..]).is_err());
    }
}
