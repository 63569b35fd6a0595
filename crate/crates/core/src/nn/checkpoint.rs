//! Binary network checkpoints.
//!
//! All integers and floats are little-endian; floats are stored as their raw
//! IEEE-754 bits so a load reproduces the saved network exactly.
//!
//! ```text
//! magic        4 bytes  "RDNN"
//! version      u32      = 1
//! n_layers     u32
//! per layer:
//!   in_dim     u32
//!   out_dim    u32
//!   activation u8       0 relu | 1 leaky_relu | 2 identity
//!   slope      f64      leaky slope (0 otherwise)
//!   init_kind  u8       0 scaled_uniform
//!   gain       f64
//!   stream     u64
//!   weights    f64 × in_dim·out_dim, row-major
//!   bias       f64 × out_dim
//! per hidden layer (n_layers − 1):
//!   mask       u8 × out_dim   (1 = pruned)
//! ```

use std::path::Path;

use super::{Activation, InitKind, InitSpec, Layer, LayerSpec, Matrix, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RDNN";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers().len() as u32).to_le_bytes());
        for layer in self.layers() {
            let s = &layer.spec;
            out.extend_from_slice(&(s.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(s.out_dim as u32).to_le_bytes());
            let (tag, slope) = match s.activation {
                Activation::Relu => (0u8, 0.0),
                Activation::LeakyRelu { slope } => (1, slope),
                Activation::Identity => (2, 0.0),
            };
            out.push(tag);
            out.extend_from_slice(&slope.to_bits().to_le_bytes());
            out.push(match s.init.kind {
                InitKind::ScaledUniform => 0,
            });
            out.extend_from_slice(&s.init.gain.to_bits().to_le_bytes());
            out.extend_from_slice(&s.init.stream.to_le_bytes());
            for v in layer.weights.data().iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        for mask in self.masks() {
            out.extend(mask.iter().map(|&m| m as u8));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = r.u32()? as usize;
            let out_dim = r.u32()? as usize;
            let tag = r.u8()?;
            let slope = r.f64()?;
            let activation = match tag {
                0 => Activation::Relu,
                1 => Activation::LeakyRelu { slope },
                2 => Activation::Identity,
                t => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
            };
            let kind = match r.u8()? {
                0 => InitKind::ScaledUniform,
                t => return Err(Error::Checkpoint(format!("unknown init tag {t}"))),
            };
            let gain = r.f64()?;
            let stream = r.u64()?;
            let weights = (0..in_dim * out_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..out_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Layer {
                spec: LayerSpec {
                    in_dim,
                    out_dim,
                    activation,
                    init: InitSpec { kind, gain, stream },
                },
                weights: Matrix::from_vec(in_dim, out_dim, weights)?,
                bias,
            });
        }
        let mut masks = Vec::new();
        for layer in layers.iter().take(n_layers.saturating_sub(1)) {
            let m = r.take(layer.spec.out_dim)?;
            masks.push(m.iter().map(|&b| b != 0).collect());
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Network::from_parts(layers, masks)
    }
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, net.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Network::from_bytes(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}
