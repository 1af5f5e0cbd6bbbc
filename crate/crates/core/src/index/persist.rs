//! Binary index file format.
//!
//! ```text
//! magic        8 bytes   "VFIDX\0\r\n"
//! version      u32 LE
//! payload_len  u64 LE
//! payload      payload_len bytes
//! checksum     32 bytes  SHA-256 of payload
//! ```
//!
//! The payload holds, in order: the analyzer configuration (lowercase flag,
//! stemmer, stopwords), the document table (id, analyzed length) in ordinal
//! order, and the sorted term dictionary with each term's postings. Strings
//! are a u32 byte length followed by UTF-8; all integers are little endian.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Index, Posting};
use crate::analyzer::{AnalyzerConfig, Stemmer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"VFIDX\0\r\n";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

fn encode_payload(index: &Index) -> Vec<u8> {
    let mut buf = Vec::new();
    let a = &index.analyzer;
    buf.push(u8::from(a.lowercase));
    buf.push(match a.stemmer {
        Stemmer::None => 0,
        Stemmer::Porter => 1,
    });
    put_u32(&mut buf, a.stopwords.len() as u32);
    for w in &a.stopwords {
        put_str(&mut buf, w);
    }
    put_u32(&mut buf, index.doc_ids.len() as u32);
    for (id, len) in index.doc_ids.iter().zip(&index.doc_lens) {
        put_str(&mut buf, id);
        put_u32(&mut buf, *len);
    }
    put_u32(&mut buf, index.terms.len() as u32);
    for (term, list) in index.terms.iter().zip(&index.postings) {
        put_str(&mut buf, term);
        put_u32(&mut buf, list.len() as u32);
        for p in list {
            put_u32(&mut buf, p.doc);
            put_u32(&mut buf, p.tf);
        }
    }
    buf
}

pub(super) fn save(index: &Index, path: &Path) -> Result<()> {
    let payload = encode_payload(index);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));

    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&out).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Integrity(format!("payload ends early at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Integrity("invalid UTF-8 string".into()))
    }
}

fn decode_payload(payload: &[u8]) -> Result<Index> {
    let mut c = Cursor { data: payload, pos: 0 };
    let lowercase = match c.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Integrity(format!("bad lowercase flag {other}"))),
    };
    let stemmer = match c.u8()? {
        0 => Stemmer::None,
        1 => Stemmer::Porter,
        other => return Err(Error::Integrity(format!("unknown stemmer tag {other}"))),
    };
    let n_stop = c.u32()?;
    let mut stopwords = BTreeSet::new();
    for _ in 0..n_stop {
        stopwords.insert(c.string()?);
    }
    let n_docs = c.u32()? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_lens = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        doc_ids.push(c.string()?);
        doc_lens.push(c.u32()?);
    }
    let n_terms = c.u32()? as usize;
    let mut terms: Vec<String> = Vec::with_capacity(n_terms.min(1 << 20));
    let mut postings = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        let term = c.string()?;
        if terms.last().is_some_and(|prev| prev >= &term) {
            return Err(Error::Integrity(format!("term dictionary not sorted at {term:?}")));
        }
        let n = c.u32()? as usize;
        let mut list = Vec::with_capacity(n.min(n_docs));
        for _ in 0..n {
            let p = Posting {
                doc: c.u32()?,
                tf: c.u32()?,
            };
            if p.doc as usize >= n_docs || p.tf == 0 {
                return Err(Error::Integrity(format!("bad posting for {term:?}")));
            }
            if list.last().is_some_and(|q: &Posting| q.doc >= p.doc) {
                return Err(Error::Integrity(format!("postings for {term:?} not ascending")));
            }
            list.push(p);
        }
        terms.push(term);
        postings.push(list);
    }
    if c.pos != payload.len() {
        return Err(Error::Integrity("trailing bytes after term dictionary".into()));
    }
    let analyzer = AnalyzerConfig {
        lowercase,
        stopwords,
        stemmer,
    };
    Index::from_parts(analyzer, doc_ids, doc_lens, terms, postings).map_err(|e| Error::Integrity(e.to_string()))
}

pub(super) fn load(path: &Path) -> Result<Index> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&data)
}

pub(super) fn decode(data: &[u8]) -> Result<Index> {
    if data.len() < MAGIC.len() || &data[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("missing index magic header".into()));
    }
    if data.len() < HEADER_LEN {
        return Err(Error::Integrity("truncated header".into()));
    }
    let version = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let payload_len = u64::from_le_bytes(data[12..20].try_into().expect("8 bytes"));
    let expected_total = (HEADER_LEN as u64)
        .checked_add(payload_len)
        .and_then(|n| n.checked_add(CHECKSUM_LEN as u64));
    if expected_total != Some(data.len() as u64) {
        return Err(Error::Integrity(format!(
            "file is {} bytes, header announces a {payload_len}-byte payload",
            data.len()
        )));
    }
    let payload = &data[HEADER_LEN..HEADER_LEN + payload_len as usize];
    let checksum = &data[HEADER_LEN + payload_len as usize..];
    if Sha256::digest(payload).as_slice() != checksum {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    decode_payload(payload)
}

/// Plain-text rendering of an index for fixtures and debugging.
///
/// ```text
/// # varfuse index dump v1
/// analyzer lowercase=<bool> stemmer=<none|porter> stopwords=<count>
/// docs <N> avgdl=<mean length>
/// doc <ordinal> <doc_id> <length>
/// term <term> df=<df> cf=<cf> <ordinal>:<tf> ...
/// ```
pub fn dump_text(index: &Index) -> String {
    let mut out = String::new();
    let a = &index.analyzer;
    let _ = writeln!(out, "# varfuse index dump v{FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "analyzer lowercase={} stemmer={} stopwords={}",
        a.lowercase,
        a.stemmer.as_str(),
        a.stopwords.len()
    );
    let _ = writeln!(out, "docs {} avgdl={}", index.num_docs(), index.avg_doc_len());
    for (i, (id, len)) in index.doc_ids.iter().zip(&index.doc_lens).enumerate() {
        let _ = writeln!(out, "doc {i} {id} {len}");
    }
    for (t, (term, list)) in index.terms.iter().zip(&index.postings).enumerate() {
        let _ = write!(out, "term {term} df={} cf={}", list.len(), index.cf[t]);
        for p in list {
            let _ = write!(out, " {}:{}", p.doc, p.tf);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build, Document};

    fn sample() -> Index {
        let docs = [("d1", "apple banana"), ("d2", "apple")];
        build(
            docs.iter().map(|(id, t)| Ok(Document::new(*id, *t))),
            AnalyzerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_two_docs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        let index = sample();
        index.save(&path).unwrap();
        let loaded = Index::load(&path).unwrap();
        assert_eq!(loaded, index);
        assert_eq!(loaded.postings("appl"), index.postings("appl"));
    }

    #[test]
    fn round_trip_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        let index = build(Vec::new(), AnalyzerConfig::default()).unwrap();
        index.save(&path).unwrap();
        assert_eq!(Index::load(&path).unwrap(), index);
    }

    fn encoded() -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        sample().save(&path).unwrap();
        std::fs::read(&path).unwrap()
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let mut data = encoded();
        data[0] = b'X';
        assert!(matches!(decode(&data), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut data = encoded();
        data[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode(&data),
            Err(Error::FormatVersion { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn truncation_is_an_integrity_error() {
        let data = encoded();
        for cut in [10, HEADER_LEN, data.len() / 2, data.len() - 1] {
            assert!(matches!(decode(&data[..cut]), Err(Error::Integrity(_))), "cut at {cut}");
        }
    }

    #[test]
    fn flipped_payload_byte_fails_checksum() {
        let mut data = encoded();
        data[HEADER_LEN + 3] ^= 0xff;
        assert!(matches!(decode(&data), Err(Error::Integrity(_))));
    }

    #[test]
    fn text_dump_lists_docs_and_postings() {
        let dump = dump_text(&sample());
        assert!(dump.contains("docs 2 avgdl=1.5"));
        assert!(dump.contains("doc 0 d1 2"));
        assert!(dump.contains("term appl df=2 cf=2 0:1 1:1"));
    }
}
