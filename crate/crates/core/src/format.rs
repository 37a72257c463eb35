//! On-disk embedding format and the token-metadata sidecar.
//!
//! Layout (little-endian):
//!
//! ```text
//! header   magic "VDRE" | version u16 = 1 | dtype u8 (0 = f32, 1 = f16) | dim u32 | count u64
//! record   id_len u16 | id utf-8 | n u32 | grid_rows u32 | grid_cols u32 | n*dim values
//! ```
//!
//! A grid of (0, 0) means "no grid". Files are always written as f32; f16
//! payloads are widened on load.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusBuilder, Grid, TokenMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VDRE";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F16 = 1,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F16 => 2,
        }
    }
}

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.offset += n as u64;
        Ok(n)
    }
}

impl<R: Read> Counting<R> {
    fn format_err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.into(),
        }
    }

    fn ctx<T>(&mut self, what: &str, res: io::Result<T>) -> Result<T> {
        res.map_err(|e| self.format_err(format!("reading {what}: {e}")))
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let mut r = Counting {
        inner: reader,
        offset: 0,
    };

    let mut magic = [0u8; 4];
    let res = r.read_exact(&mut magic);
    r.ctx("magic", res)?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:02x?}, expected \"VDRE\""),
        });
    }
    let at = r.offset;
    let res = r.read_u16::<LittleEndian>();
    let version = r.ctx("version", res)?;
    if version != VERSION {
        return Err(Error::Format {
            offset: at,
            message: format!("unsupported version {version}"),
        });
    }
    let at = r.offset;
    let res = r.read_u8();
    let dtype = match r.ctx("dtype", res)? {
        0 => DType::F32,
        1 => DType::F16,
        other => {
            return Err(Error::Format {
                offset: at,
                message: format!("unknown dtype {other}"),
            })
        }
    };
    let at = r.offset;
    let res = r.read_u32::<LittleEndian>();
    let dim = r.ctx("dim", res)? as usize;
    if dim == 0 {
        return Err(Error::Format {
            offset: at,
            message: "dim must be at least 1".into(),
        });
    }
    let res = r.read_u64::<LittleEndian>();
    let count = r.ctx("record count", res)?;

    let mut builder = CorpusBuilder::with_capacity(dim, count.min(1 << 20) as usize, 0);
    let mut raw = Vec::new();
    let mut values = Vec::new();
    for record in 0..count {
        let res = r.read_u16::<LittleEndian>();
        let id_len = r.ctx("id length", res)? as usize;
        let mut id_bytes = vec![0u8; id_len];
        let at = r.offset;
        let res = r.read_exact(&mut id_bytes);
        r.ctx("id", res)?;
        let id = String::from_utf8(id_bytes).map_err(|_| Error::Format {
            offset: at,
            message: format!("record {record}: id is not valid UTF-8"),
        })?;
        let at = r.offset;
        let res = r.read_u32::<LittleEndian>();
        let n = r.ctx("row count", res)? as usize;
        if n == 0 {
            return Err(Error::Format {
                offset: at,
                message: format!("record `{id}` has zero rows"),
            });
        }
        let at = r.offset;
        let res = r.read_u32::<LittleEndian>();
        let rows = r.ctx("grid rows", res)?;
        let res = r.read_u32::<LittleEndian>();
        let cols = r.ctx("grid cols", res)?;
        let grid = match (rows, cols) {
            (0, 0) => None,
            (0, _) | (_, 0) => {
                return Err(Error::Format {
                    offset: at,
                    message: format!("record `{id}`: degenerate grid {rows}x{cols}"),
                })
            }
            (rows, cols) => Some(Grid::new(rows, cols)),
        };

        let len = n * dim;
        raw.resize(len * dtype.width(), 0);
        let res = r.read_exact(&mut raw);
        r.ctx(&format!("values of `{id}`"), res)?;
        values.clear();
        match dtype {
            DType::F32 => values.extend(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ),
            DType::F16 => values.extend(
                raw.chunks_exact(2)
                    .map(|b| half::f16::from_le_bytes([b[0], b[1]]).to_f32()),
            ),
        }
        builder.push_raw(&id, &values, grid)?;
    }

    let mut probe = [0u8; 1];
    let res = r.read(&mut probe);
    if r.ctx("trailer", res)? != 0 {
        return Err(Error::Format {
            offset: r.offset - 1,
            message: "trailing bytes after last record".into(),
        });
    }
    Ok(builder.finish())
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus_to(corpus, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus_to<W: Write>(corpus: &Corpus, w: &mut W) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(DType::F32 as u8)?;
    w.write_u32::<LittleEndian>(corpus.dim() as u32)?;
    w.write_u64::<LittleEndian>(corpus.len() as u64)?;
    for view in corpus.iter() {
        let id = view.id.as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, format!("id `{}` too long", view.id)))?;
        w.write_u16::<LittleEndian>(id_len)?;
        w.write_all(id)?;
        w.write_u32::<LittleEndian>(view.len() as u32)?;
        let grid = view.grid.unwrap_or(Grid::new(0, 0));
        w.write_u32::<LittleEndian>(grid.rows)?;
        w.write_u32::<LittleEndian>(grid.cols)?;
        for &v in view.data {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenLine {
    id: String,
    tokens: Vec<TokenMeta>,
}

pub fn read_token_sidecar(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<TokenMeta>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TokenLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if out.insert(parsed.id.clone(), parsed.tokens).is_some() {
            return Err(Error::DuplicateId(parsed.id));
        }
    }
    Ok(out)
}

/// Writes one line per entry that carries token metadata, in corpus order.
pub fn write_token_sidecar(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for view in corpus.iter() {
        if let Some(tokens) = view.tokens {
            let line = TokenLine {
                id: view.id.to_owned(),
                tokens: tokens.to_vec(),
            };
            let json = serde_json::to_string(&line).expect("token line serializes");
            writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a query file and attaches its token sidecar when given.
pub fn load_queries(path: impl AsRef<Path>, tokens: Option<&Path>) -> Result<Corpus> {
    let corpus = load_corpus(path)?;
    match tokens {
        Some(p) => corpus.attach_tokens(read_token_sidecar(p)?),
        None => Ok(corpus),
    }
}
