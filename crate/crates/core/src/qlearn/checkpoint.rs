//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "ARBQCKPT"
//! version  u32      1
//! kind     u8       0 = network, 1 = tabular
//! network: n_layers u32, then n_layers + 1 layer widths (u32, input first),
//!          then per layer the row-major weights followed by the biases
//! tabular: width u32, height u32, then width * height * 4 rows of 4 values
//!          (state slots ordered by cell row-major, then facing N, E, S, W)
//! ```
//!
//! All integers and floats are little-endian; floats are IEEE-754 `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::env::Action;
use crate::error::{Error, Result};

use super::network::{Dense, QNetwork};
use super::tabular::TabularQ;

const MAGIC: &[u8; 8] = b"ARBQCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Network(QNetwork),
    Tabular(TabularQ),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vs: impl IntoIterator<Item = &'a f64>) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("unexpected end of data".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        match self {
            Checkpoint::Network(net) => {
                out.push(0);
                put_u32(&mut out, net.layers().len());
                for w in net.sizes() {
                    put_u32(&mut out, w);
                }
                for l in net.layers() {
                    put_f64s(&mut out, &l.weights);
                    put_f64s(&mut out, &l.biases);
                }
            }
            Checkpoint::Tabular(table) => {
                out.push(1);
                let (w, h) = table.dims();
                put_u32(&mut out, w);
                put_u32(&mut out, h);
                put_f64s(&mut out, table.raw().iter().flatten());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf: bytes };
        if c.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION as usize {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let ckpt = match c.take(1)?[0] {
            0 => {
                let n = c.u32()?;
                let sizes = (0..=n).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
                let layers = sizes
                    .windows(2)
                    .map(|w| {
                        Ok(Dense {
                            inputs: w[0],
                            outputs: w[1],
                            weights: c.f64s(w[0] * w[1])?,
                            biases: c.f64s(w[1])?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Checkpoint::Network(QNetwork::from_layers(layers)?)
            }
            1 => {
                let (w, h) = (c.u32()?, c.u32()?);
                let flat = c.f64s(w * h * 4 * Action::COUNT)?;
                let rows = flat
                    .chunks_exact(Action::COUNT)
                    .map(|r| [r[0], r[1], r[2], r[3]])
                    .collect();
                Checkpoint::Tabular(TabularQ::from_raw(w, h, rows))
            }
            k => return Err(Error::Checkpoint(format!("unknown kind {k}"))),
        };
        if !c.buf.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
