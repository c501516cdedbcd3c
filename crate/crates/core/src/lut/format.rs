//! Binary table file, little-endian:
//!
//! ```text
//! "LUT1" | version u16 | entry bits u8 | reserved u8
//! dim count u8 | per dim: name len u8, name, level count u16, levels f32...
//! lod count u8, thresholds f32... | cpu count u16, bins u32... | gpu count u16, bins u32...
//! percentile f32 | fingerprints 2 x u64
//! payload len u32 | packed entries
//! crc32 u32 over all preceding bytes
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{DimDescriptor, LookupTable, LutHeader};

pub const MAGIC: &[u8; 4] = b"LUT1";
pub const FORMAT_VERSION: u16 = 1;

/// 64-bit FNV-1a.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl LookupTable {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(h.entry_bits);
        out.push(0);
        out.push(h.dimensions.len() as u8);
        for d in &h.dimensions {
            out.push(d.name.len() as u8);
            out.extend_from_slice(d.name.as_bytes());
            out.extend_from_slice(&(d.levels.len() as u16).to_le_bytes());
            for v in &d.levels {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.push(h.lod_thresholds.len() as u8);
        for t in &h.lod_thresholds {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for bins in [&h.cpu_bins, &h.gpu_bins] {
            out.extend_from_slice(&(bins.len() as u16).to_le_bytes());
            for b in bins {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out.extend_from_slice(&h.percentile.to_le_bytes());
        for f in h.fingerprints {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 4 {
            return Err(Error::format(format!("file is {} bytes, too short for a table", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::format("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!("unsupported format version {version}")));
        }
        let entry_bits = r.u8()?;
        let _reserved = r.u8()?;
        let n_dims = r.u8()? as usize;
        if n_dims == 0 {
            return Err(Error::format("table has no dimensions"));
        }
        let mut dimensions = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            let len = r.u8()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format("dimension name is not UTF-8"))?
                .to_string();
            let n = r.u16()? as usize;
            let levels = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            dimensions.push(DimDescriptor { name, levels });
        }
        let n_lods = r.u8()? as usize;
        let lod_thresholds = (0..n_lods).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let n_cpu = r.u16()? as usize;
        let cpu_bins = (0..n_cpu).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n_gpu = r.u16()? as usize;
        let gpu_bins = (0..n_gpu).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let percentile = r.f32()?;
        let fingerprints = [r.u64()?, r.u64()?];
        let payload_len = r.u32()? as usize;
        let payload = r.take(payload_len)?.to_vec();
        if r.pos != body.len() {
            return Err(Error::format(format!("{} trailing bytes after payload", body.len() - r.pos)));
        }
        let header = LutHeader { entry_bits, dimensions, lod_thresholds, cpu_bins, gpu_bins, percentile, fingerprints };
        validate_header(&header)?;
        LookupTable::from_parts(header, payload)
    }
}

fn validate_header(h: &LutHeader) -> Result<()> {
    if h.dimensions.iter().any(|d| d.levels.is_empty()) {
        return Err(Error::format("dimension without levels"));
    }
    if h.lod_thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::format("LOD threshold outside (0, 1]"));
    }
    for bins in [&h.cpu_bins, &h.gpu_bins] {
        if bins.first() == Some(&0) || bins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("frequency bins not positive and strictly increasing"));
        }
    }
    if !(h.percentile > 0.0 && h.percentile <= 1.0) {
        return Err(Error::format("percentile outside (0, 1]"));
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::format(format!("unexpected end of data at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn save_lut(lut: &LookupTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, lut.to_bytes())?;
    Ok(())
}

pub fn load_lut(path: impl AsRef<Path>) -> Result<LookupTable> {
    LookupTable::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::bits;

    fn sample_table() -> LookupTable {
        let header = LutHeader {
            entry_bits: 8,
            dimensions: vec![
                DimDescriptor { name: "radius".into(), levels: (0..21).map(|i| i as f32 / 10.0).collect() },
                DimDescriptor { name: "samples".into(), levels: vec![13.0, 19.0, 27.0] },
                DimDescriptor { name: "res".into(), levels: vec![0.0, 1.0] },
                DimDescriptor { name: "quality".into(), levels: vec![0.0, 1.0] },
            ],
            lod_thresholds: vec![1.0, 0.5, 0.3],
            cpu_bins: vec![2000],
            gpu_bins: (0..40).map(|i| 1000 + 25 * i).collect(),
            percentile: 0.2,
            fingerprints: [1, 2],
        };
        let codes: Vec<u32> = (0..120).map(|i| (i * 7) % 252).collect();
        LookupTable::from_parts(header, bits::pack(&codes, 8)).unwrap()
    }

    #[test]
    fn roundtrip_and_payload_size() {
        let t = sample_table();
        assert_eq!(t.payload().len(), 120);
        let bytes = t.to_bytes();
        let back = LookupTable::from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(&bytes[..4], b"LUT1");
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let bytes = sample_table().to_bytes();
        for n in [0, 3, 7, 20, bytes.len() - 1] {
            assert!(matches!(LookupTable::from_bytes(&bytes[..n]), Err(Error::Format(_))), "len {n}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(LookupTable::from_bytes(&bad), Err(Error::Format(m)) if m.contains("magic")));
        let mut bad = bytes.clone();
        bad[30] ^= 0x10;
        assert!(matches!(LookupTable::from_bytes(&bad), Err(Error::Format(m)) if m.contains("checksum")));
    }

    #[test]
    fn version_checked_after_crc() {
        let mut bytes = sample_table().to_bytes();
        bytes[4] = 9;
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(LookupTable::from_bytes(&bytes), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fingerprint(b""), 0xcbf29ce484222325);
        assert_eq!(fingerprint(b"a"), 0xaf63dc4c8601ec8c);
    }
}
