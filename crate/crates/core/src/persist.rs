//! On-disk snapshot format.
//!
//! ```text
//! header   magic "SKGSNAP\0" | format version u32 | payload length u64 | crc32 u32
//! payload  generation | doc count | schema json | external ids
//!          per field: term dictionary with delta-coded postings (and positions)
//!          per field: forward index, delta-coded term ordinals per doc
//! ```
//!
//! Integers in the payload are LEB128 varints; header integers are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SkgError};
use crate::index::{FieldIndex, IndexSnapshot, Posting};
use crate::schema::Schema;

pub const MAGIC: &[u8; 8] = b"SKGSNAP\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

pub fn save_snapshot(snapshot: &IndexSnapshot, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_snapshot(snapshot);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<IndexSnapshot> {
    decode_snapshot(&fs::read(path)?)
}

pub fn encode_snapshot(snapshot: &IndexSnapshot) -> Vec<u8> {
    let mut p = Vec::new();
    put_varint(&mut p, snapshot.generation());
    put_varint(&mut p, snapshot.doc_count() as u64);
    put_bytes(&mut p, snapshot.schema().to_json().as_bytes());
    for id in snapshot.external_ids() {
        put_bytes(&mut p, id.as_bytes());
    }
    let nfields = snapshot.schema().fields().len();
    put_varint(&mut p, nfields as u64);
    for i in 0..nfields {
        let field = snapshot.field_at(i);
        put_varint(&mut p, field.num_terms() as u64);
        for ord in 0..field.num_terms() as u32 {
            let postings = field.postings(ord);
            put_bytes(&mut p, postings.term.as_bytes());
            put_varint(&mut p, postings.doc_frequency() as u64);
            put_deltas(&mut p, postings.docs());
            if field.kind.has_positions() {
                for i in 0..postings.doc_frequency() {
                    let pos = postings.positions(i);
                    put_varint(&mut p, pos.len() as u64);
                    put_deltas(&mut p, pos);
                }
            }
        }
    }
    for i in 0..nfields {
        let (starts, ords) = snapshot.field_at(i).raw_forward();
        for d in 0..snapshot.doc_count() as usize {
            let row = &ords[starts[d] as usize..starts[d + 1] as usize];
            put_varint(&mut p, row.len() as u64);
            put_deltas(&mut p, row);
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN + p.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(p.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&p).to_le_bytes());
    out.extend_from_slice(&p);
    out
}

fn corrupt(msg: impl Into<String>) -> SkgError {
    SkgError::CorruptSnapshot(msg.into())
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<IndexSnapshot> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("file shorter than header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(SkgError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let crc = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(corrupt(format!(
            "payload is {} bytes, header says {len}",
            payload.len()
        )));
    }
    if crc32fast::hash(payload) != crc {
        return Err(corrupt("checksum mismatch"));
    }

    let mut r = Reader { buf: payload, pos: 0 };
    let generation = r.varint()?;
    let doc_count = u32::try_from(r.varint()?).map_err(|_| corrupt("doc count overflow"))?;
    let schema_json = std::str::from_utf8(r.bytes()?).map_err(|_| corrupt("schema is not utf-8"))?;
    let schema = Schema::from_json(schema_json).map_err(|e| corrupt(format!("schema: {e}")))?;
    let mut ids = Vec::with_capacity(doc_count as usize);
    for _ in 0..doc_count {
        ids.push(r.string()?);
    }
    let nfields = r.varint()? as usize;
    if nfields != schema.fields().len() {
        return Err(corrupt("field count disagrees with schema"));
    }
    let mut postings = Vec::with_capacity(nfields);
    for f in schema.fields() {
        let nterms = r.varint()? as usize;
        let mut map = BTreeMap::new();
        for _ in 0..nterms {
            let term = r.string()?;
            let df = r.varint()? as usize;
            let docs = r.deltas(df)?;
            let mut entries: Vec<Posting> = docs
                .into_iter()
                .map(|doc| Posting {
                    doc,
                    positions: Vec::new(),
                })
                .collect();
            if f.kind.has_positions() {
                for e in &mut entries {
                    let n = r.varint()? as usize;
                    e.positions = r.deltas(n)?;
                }
            }
            if map.insert(term, entries).is_some() {
                return Err(corrupt("duplicate term in dictionary"));
            }
        }
        postings.push(map);
    }
    let mut fields = Vec::with_capacity(nfields);
    for (f, map) in schema.fields().iter().zip(postings) {
        let mut starts = Vec::with_capacity(doc_count as usize + 1);
        let mut ords = Vec::new();
        starts.push(0u32);
        for _ in 0..doc_count {
            let n = r.varint()? as usize;
            ords.extend(r.deltas(n)?);
            starts.push(ords.len() as u32);
        }
        fields.push(FieldIndex::from_raw(f.kind, map, starts, ords, doc_count).map_err(corrupt)?);
    }
    if r.pos != payload.len() {
        return Err(corrupt("trailing bytes after payload"));
    }
    Ok(IndexSnapshot::assemble(generation, schema, ids, fields))
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_varint(out, b.len() as u64);
    out.extend_from_slice(b);
}

/// Strictly increasing values as first-value-then-gaps.
fn put_deltas(out: &mut Vec<u8>, values: &[u32]) {
    let mut prev = 0u32;
    for (i, &v) in values.iter().enumerate() {
        put_varint(out, if i == 0 { v as u64 } else { (v - prev) as u64 });
        prev = v;
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = *self
                .buf
                .get(self.pos)
                .ok_or_else(|| corrupt("unexpected end of payload"))?;
            self.pos += 1;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(corrupt("varint too long"))
    }

    fn bytes(&mut self) -> Result<&[u8]> {
        let n = self.varint()? as usize;
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("length runs past end of payload"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| corrupt("string is not utf-8"))
    }

    fn deltas(&mut self, n: usize) -> Result<Vec<u32>> {
        if n > self.buf.len() - self.pos {
            return Err(corrupt("count runs past end of payload"));
        }
        let mut out = Vec::with_capacity(n);
        let mut acc = 0u64;
        for i in 0..n {
            let d = self.varint()?;
            if i > 0 && d == 0 {
                return Err(corrupt("non-increasing sequence"));
            }
            acc = if i == 0 { d } else { acc + d };
            out.push(u32::try_from(acc).map_err(|_| corrupt("value overflow"))?);
        }
        Ok(out)
    }
}
