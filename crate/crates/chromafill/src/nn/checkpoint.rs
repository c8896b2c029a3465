//! Parameter checkpoints.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "CFNP"
//! version u16      currently 1
//! scalar  u8       bytes per value: 4 (f32) or 8 (f64)
//! pad     u8       0
//! count   u32      number of tensors
//! then per tensor, in network visitation order:
//!   name_len u16, name utf-8
//!   ndim u8, dims u32 x ndim
//!   data scalar x prod(dims), little-endian
//! ```
//!
//! Both trainable parameters and batch-norm running statistics are stored,
//! so a reloaded network reproduces eval-mode outputs exactly.

use std::path::Path;

use super::{Network, Real};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFNP";
const VERSION: u16 = 1;

pub fn save_params<T: Real>(net: &mut Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let scalar = std::mem::size_of::<T>() as u8;
    let mut tensors: Vec<(String, Vec<usize>, Vec<T>)> = Vec::new();
    net.visit_params(|p| tensors.push((p.name.clone(), p.shape.clone(), p.data.clone())));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(scalar);
    out.push(0);
    out.extend_from_slice(&u32::try_from(tensors.len()).unwrap().to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&u16::try_from(name.len()).unwrap().to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in &shape {
            out.extend_from_slice(&u32::try_from(*d).unwrap().to_le_bytes());
        }
        for v in data {
            let x = v.to_f64();
            if scalar == 4 {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::invalid(format!(
                "{}: truncated checkpoint (needed {n} bytes at offset {})",
                self.path.display(),
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Load a checkpoint into a network of the same architecture. Tensor names
/// and shapes must match the network's visitation order.
pub fn load_params<T: Real>(net: &mut Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut r = Reader { buf: &buf, pos: 0, path };

    if r.take(4)? != MAGIC {
        return Err(Error::invalid(format!("{}: not a checkpoint file", path.display())));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::invalid(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let scalar = r.take(1)?[0];
    if scalar as usize != std::mem::size_of::<T>() {
        return Err(Error::invalid(format!(
            "{}: checkpoint stores {scalar}-byte scalars but the network uses {}-byte ones",
            path.display(),
            std::mem::size_of::<T>()
        )));
    }
    r.take(1)?;
    let count = r.u32()? as usize;

    let mut loaded: Vec<(String, Vec<usize>, Vec<T>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::invalid(format!("{}: malformed tensor name", path.display())))?;
        let ndim = r.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * scalar as usize)?;
        let data: Vec<T> = if scalar == 4 {
            raw.chunks_exact(4)
                .map(|c| T::from_f64(f64::from(f32::from_le_bytes(c.try_into().unwrap()))))
                .collect()
        } else {
            raw.chunks_exact(8)
                .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().unwrap())))
                .collect()
        };
        loaded.push((name, shape, data));
    }

    let mut idx = 0;
    let mut mismatch: Option<String> = None;
    net.visit_params(|p| {
        if mismatch.is_some() {
            return;
        }
        match loaded.get(idx) {
            Some((name, shape, data)) if *name == p.name && *shape == p.shape => {
                p.data.copy_from_slice(data);
            }
            Some((name, shape, _)) => {
                mismatch = Some(format!(
                    "tensor {idx}: checkpoint has {name} {shape:?}, network expects {} {:?}",
                    p.name, p.shape
                ));
            }
            None => mismatch = Some(format!("checkpoint ends before tensor {} ({idx})", p.name)),
        }
        idx += 1;
    });
    if let Some(m) = mismatch {
        return Err(Error::invalid(format!("{}: {m}", path.display())));
    }
    if idx != loaded.len() {
        return Err(Error::invalid(format!(
            "{}: checkpoint has {} tensors, network expects {idx}",
            path.display(),
            loaded.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Mode, Tensor};

    #[test]
    fn roundtrip_reproduces_eval_outputs() {
        let spec = [
            LayerSpec::Conv3x3 { in_ch: 1, out_ch: 4 },
            LayerSpec::BatchNorm { channels: 4 },
            LayerSpec::LeakyRelu { negative_slope: 0.2 },
            LayerSpec::Conv1x1 { in_ch: 4, out_ch: 3 },
        ];
        let mut rng = crate::rng::stream(5, "ckpt");
        let mut net = Network::<f32>::from_spec(&spec, &mut rng).unwrap();
        let x = Tensor::from_vec(1, 6, 6, (0..36).map(|i| (i as f32 * 0.2).sin()).collect()).unwrap();
        // A train step so running stats are non-trivial.
        net.forward(&x, Mode::Train).unwrap();
        let y = net.forward(&x, Mode::Eval).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cfnp");
        save_params(&mut net, &path).unwrap();

        let mut rng2 = crate::rng::stream(6, "ckpt-other");
        let mut restored = Network::<f32>::from_spec(&spec, &mut rng2).unwrap();
        load_params(&mut restored, &path).unwrap();
        let y2 = restored.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), y2.data());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = crate::rng::stream(5, "ckpt");
        let mut net =
            Network::<f32>::from_spec(&[LayerSpec::Conv1x1 { in_ch: 2, out_ch: 2 }], &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cfnp");
        save_params(&mut net, &path).unwrap();

        let mut other =
            Network::<f32>::from_spec(&[LayerSpec::Conv1x1 { in_ch: 3, out_ch: 2 }], &mut rng).unwrap();
        assert!(load_params(&mut other, &path).is_err());
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.cfnp");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        let mut rng = crate::rng::stream(5, "ckpt");
        let mut net =
            Network::<f32>::from_spec(&[LayerSpec::Conv1x1 { in_ch: 2, out_ch: 2 }], &mut rng).unwrap();
        let err = load_params(&mut net, &path).unwrap_err();
        assert!(err.to_string().contains("not a checkpoint"), "{err}");
    }
}
