//! Binary index file.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! header   magic[8] version:u32 fanout:u32 sig_bits:u32 bits_per_word:u32
//!          seed:u64 d_max:f64 lon_scale:f64 objects:u64 nodes:u64
//! nodes    breadth-first, root first:
//!          kind:u8 (0 internal, 1 leaf) mbr:4*f64 sig:blocks*u64 count:u32
//!          internal: child:u32 * count
//!          leaf:     (object:u32 lon:f64 lat:f64 sig:blocks*u64) * count
//! objects  id:u64 lon:f64 lat:f64 nwords:u32 words:u32*nwords
//!          image_url: len:u32 (u32::MAX = absent) bytes
//!          tags: count:u32 (u32::MAX = absent) then (len:u32 bytes)*count
//! ```
//! Coordinates are stored as `f64` whatever the in-memory scalar type.

use std::io::{Read, Write};

use super::{GirNode, GirTree, LeafEntry, NodeKind};
use crate::error::{Error, Result};
use crate::model::{Frame, GeoObject, Location, Rect, WordSet};
use crate::num::Scalar;
use crate::signature::{Signature, SignatureConfig};

pub const INDEX_MAGIC: [u8; 8] = *b"GIRTREE\0";
pub const INDEX_VERSION: u32 = 1;
const ABSENT: u32 = u32::MAX;

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.out.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn len(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n)
            .ok()
            .filter(|&n| n != ABSENT)
            .ok_or_else(|| Error::IndexFormat(format!("length {n} does not fit")))?;
        self.u32(n)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.len(s.len())?;
        Ok(self.out.write_all(s.as_bytes())?)
    }
    fn sig(&mut self, s: &Signature) -> Result<()> {
        s.blocks().iter().try_for_each(|&b| self.u64(b))
    }
    fn rect<T: Scalar>(&mut self, r: &Rect<T>) -> Result<()> {
        for v in [r.min_lon, r.min_lat, r.max_lon, r.max_lat] {
            self.f64(v.as_f64())?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::IndexFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn scalar<T: Scalar>(&mut self) -> Result<T> {
        let v = self.f64()?;
        T::from_f64(v).ok_or_else(|| Error::IndexFormat(format!("value {v} not representable")))
    }
    fn str(&mut self, len: u32) -> Result<String> {
        String::from_utf8(self.take(len as usize)?.to_vec())
            .map_err(|_| Error::IndexFormat("invalid UTF-8".into()))
    }
    fn sig(&mut self, bits: usize) -> Result<Signature> {
        let blocks = (0..bits.div_ceil(64)).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        Signature::from_blocks(bits, blocks)
    }
    fn rect<T: Scalar>(&mut self) -> Result<Rect<T>> {
        Ok(Rect {
            min_lon: self.scalar()?,
            min_lat: self.scalar()?,
            max_lon: self.scalar()?,
            max_lat: self.scalar()?,
        })
    }
}

pub fn write_index<T: Scalar, W: Write>(tree: &GirTree<T>, out: W) -> Result<()> {
    let mut w = Writer { out };
    let cfg = tree.sig_cfg();
    w.out.write_all(&INDEX_MAGIC)?;
    w.u32(INDEX_VERSION)?;
    w.len(tree.fanout())?;
    w.len(cfg.length_bits)?;
    w.len(cfg.bits_per_word)?;
    w.u64(cfg.seed)?;
    w.f64(tree.frame().d_max.as_f64())?;
    w.f64(tree.frame().lon_scale.as_f64())?;
    w.u64(tree.len() as u64)?;
    w.u64(tree.nodes().len() as u64)?;

    for node in tree.nodes() {
        w.u8(u8::from(node.is_leaf()))?;
        w.rect(&node.mbr)?;
        w.sig(&node.sig)?;
        w.len(node.fanout())?;
        match &node.kind {
            NodeKind::Internal(children) => children.iter().try_for_each(|&c| w.len(c))?,
            NodeKind::Leaf(entries) => {
                for e in entries {
                    w.len(e.object)?;
                    w.f64(e.location.lon.as_f64())?;
                    w.f64(e.location.lat.as_f64())?;
                    w.sig(&e.sig)?;
                }
            }
        }
    }

    for o in tree.objects() {
        w.u64(o.id)?;
        w.f64(o.location.lon.as_f64())?;
        w.f64(o.location.lat.as_f64())?;
        w.len(o.words.len())?;
        o.words.iter().try_for_each(|x| w.u32(x))?;
        match &o.image_url {
            Some(u) => w.str(u)?,
            None => w.u32(ABSENT)?,
        }
        match &o.tags {
            Some(tags) => {
                w.len(tags.len())?;
                tags.iter().try_for_each(|t| w.str(t))?;
            }
            None => w.u32(ABSENT)?,
        }
    }
    w.out.flush()?;
    Ok(())
}

pub fn save_index<T: Scalar>(tree: &GirTree<T>, path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_index(tree, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_index<T: Scalar>(path: impl AsRef<std::path::Path>) -> Result<GirTree<T>> {
    read_index(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn read_index<T: Scalar, R: Read>(mut input: R) -> Result<GirTree<T>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != INDEX_MAGIC {
        return Err(Error::IndexFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(Error::IndexFormat(format!("unsupported version {version}")));
    }
    let fanout = r.u32()? as usize;
    let cfg = SignatureConfig {
        length_bits: r.u32()? as usize,
        bits_per_word: r.u32()? as usize,
        seed: r.u64()?,
    };
    cfg.validate()?;
    let d_max: T = r.scalar()?;
    let lon_scale: T = r.scalar()?;
    let n_objects = r.u64()? as usize;
    let n_nodes = r.u64()? as usize;
    // every node and object takes at least 8 bytes
    if n_objects.max(n_nodes) > buf.len() / 8 {
        return Err(Error::IndexFormat("counts exceed file size".into()));
    }

    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let kind = r.u8()?;
        let mbr = r.rect()?;
        let sig = r.sig(cfg.length_bits)?;
        let count = r.u32()? as usize;
        let kind = match kind {
            0 => NodeKind::Internal((0..count).map(|_| Ok(r.u32()? as usize)).collect::<Result<_>>()?),
            1 => {
                let mut entries = Vec::with_capacity(count.min(fanout));
                for _ in 0..count {
                    entries.push(LeafEntry {
                        object: r.u32()? as usize,
                        location: Location::new(r.scalar()?, r.scalar()?),
                        sig: r.sig(cfg.length_bits)?,
                    });
                }
                NodeKind::Leaf(entries)
            }
            other => return Err(Error::IndexFormat(format!("unknown node kind {other}"))),
        };
        nodes.push(GirNode { mbr, sig, kind });
    }

    let mut objects = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let id = r.u64()?;
        let location = Location::new(r.scalar()?, r.scalar()?);
        let n_words = r.u32()? as usize;
        let words = (0..n_words).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let words = WordSet::from_sorted(words).map_err(|reason| Error::InvalidObject { id, reason })?;
        let image_url = match r.u32()? {
            ABSENT => None,
            len => Some(r.str(len)?),
        };
        let tags = match r.u32()? {
            ABSENT => None,
            count => Some(
                (0..count)
                    .map(|_| {
                        let len = r.u32()?;
                        r.str(len)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let o = GeoObject { id, location, words, image_url, tags };
        o.validate()?;
        objects.push(o);
    }
    if r.pos != buf.len() {
        return Err(Error::IndexFormat(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    GirTree::from_parts(nodes, Frame::new(lon_scale, d_max), cfg, fanout, objects)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> GirTree<f64> {
        let objs: Vec<_> = (0..200u64)
            .map(|i| {
                let mut o = GeoObject::new(
                    i * 3 + 1,
                    Location::new(10.0 + (i % 20) as f64 * 0.01, 50.0 + (i / 20) as f64 * 0.01),
                    WordSet::from_iter([(i % 11) as u32, (i % 29) as u32 + 100, 7]),
                );
                if i % 3 == 0 {
                    o.image_url = Some(format!("https://example.org/{i}.jpg"));
                }
                if i % 5 == 0 {
                    o.tags = Some(vec!["bridge".into(), format!("t{i}")]);
                }
                o
            })
            .collect();
        GirTree::build(objs, 8, SignatureConfig { seed: 42, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = tree();
        let mut bytes = Vec::new();
        write_index(&t, &mut bytes).unwrap();
        let back: GirTree<f64> = read_index(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        write_index(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn header_layout() {
        let t = tree();
        let mut bytes = Vec::new();
        write_index(&t, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"GIRTREE\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 512);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 42);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), t.d_max());
        assert_eq!(u64::from_le_bytes(bytes[48..56].try_into().unwrap()), 200);
    }

    #[test]
    fn corrupt_files_rejected() {
        let t = tree();
        let mut bytes = Vec::new();
        write_index(&t, &mut bytes).unwrap();
        assert!(read_index::<f64, _>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_index::<f64, _>(bad.as_slice()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_index::<f64, _>(extra.as_slice()).is_err());
        // flip a bit inside the root signature
        let mut flipped = bytes;
        flipped[64 + 1 + 32] ^= 1;
        assert!(read_index::<f64, _>(flipped.as_slice()).is_err());
    }
}
