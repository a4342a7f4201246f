//! On-disk index format.
//!
//! ```text
//! header : "FPIX" | version u32 | dimension u32 | doc_count u32 | crc32(body) u32 | body_len u64
//! body   : tag_len u32 | tag | record*
//! record : doc_id u32 | paired u8 | embedded_chars u64 | path_len u32 | path
//!          | text_len u64 | text | dimension × f32
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::{EmbeddedDoc, IndexError, SourceDoc, VectorIndex};

pub const MAGIC: &[u8; 4] = b"FPIX";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_EXTENSION: &str = "fpix";

const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 + 8;

pub fn save_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    let mut body = Vec::new();
    put_bytes32(&mut body, index.embed_model_tag.as_bytes());
    for entry in &index.docs {
        if entry.vector.len() != index.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: index.dimension,
                found: entry.vector.len(),
            });
        }
        body.extend_from_slice(&entry.doc.doc_id.to_le_bytes());
        body.push(u8::from(entry.doc.paired));
        body.extend_from_slice(&(entry.embedded_chars as u64).to_le_bytes());
        put_bytes32(&mut body, entry.doc.rel_path.as_bytes());
        body.extend_from_slice(&(entry.doc.full_text.len() as u64).to_le_bytes());
        body.extend_from_slice(entry.doc.full_text.as_bytes());
        for x in &entry.vector {
            body.extend_from_slice(&x.to_le_bytes());
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(index.dimension as u32).to_le_bytes());
    out.extend_from_slice(&(index.docs.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    fs::write(path, out)?;
    Ok(())
}

fn put_bytes32(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.data.len())
            .ok_or_else(|| IndexError::CorruptIndex("unexpected end of data".into()))?;
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize) -> Result<String, IndexError> {
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| IndexError::CorruptIndex("invalid UTF-8".into()))
    }
}

pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    let data = fs::read(path)?;
    if data.len() < HEADER_LEN {
        return Err(IndexError::CorruptIndex("file shorter than header".into()));
    }
    let mut header = Reader { data: &data, pos: 0 };
    if header.take(4)? != MAGIC {
        return Err(IndexError::CorruptIndex("bad magic".into()));
    }
    let version = header.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dimension = header.u32()? as usize;
    let doc_count = header.u32()? as usize;
    let checksum = header.u32()?;
    let body_len = header.u64()?;
    let body = &data[HEADER_LEN..];
    if body.len() as u64 != body_len {
        return Err(IndexError::CorruptIndex(format!(
            "body is {} bytes, header says {body_len}",
            body.len()
        )));
    }
    if crc32fast::hash(body) != checksum {
        return Err(IndexError::CorruptIndex("checksum mismatch".into()));
    }

    let mut r = Reader { data: body, pos: 0 };
    let tag_len = r.u32()? as usize;
    let embed_model_tag = r.string(tag_len)?;
    let mut docs = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        let doc_id = r.u32()?;
        let paired = r.u8()? != 0;
        let embedded_chars = r.u64()? as usize;
        let path_len = r.u32()? as usize;
        let rel_path = r.string(path_len)?;
        let text_len = r.u64()? as usize;
        let full_text = r.string(text_len)?;
        let raw = r.take(dimension * 4)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        docs.push(EmbeddedDoc {
            doc: SourceDoc {
                doc_id,
                rel_path,
                full_text,
                paired,
            },
            vector,
            embedded_chars,
        });
    }
    if r.pos != body.len() {
        return Err(IndexError::CorruptIndex("trailing bytes after last record".into()));
    }
    Ok(VectorIndex {
        dimension,
        docs,
        embed_model_tag,
        format_version: version,
    })
}
