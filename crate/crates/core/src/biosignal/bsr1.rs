//! `BSR1` binary record format.
//!
//! ```text
//! magic        42 53 52 31 ("BSR1")
//! u16          version (1)
//! u32          sample rate
//! u8           channel count
//! per channel: u8 name length, name bytes (UTF-8), u64 sample count, f64 samples
//! u32          annotation count
//! per annotation: u64 start, u64 end (exclusive)
//! ```
//! All integers and floats are little-endian.

use crate::biosignal::record::{Channel, SeizureInterval, SignalRecord};
use crate::codec::Reader;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"BSR1";
pub const VERSION: u16 = 1;

const FORMAT: &str = "BSR1";

pub fn encode(record: &SignalRecord) -> Result<Vec<u8>> {
    let payload: usize = record.channels.iter().map(|c| c.samples.len() * 8 + 9 + c.name.len()).sum();
    let mut out = Vec::with_capacity(16 + payload + record.annotations.len() * 16);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&record.sample_rate.to_le_bytes());
    let count = u8::try_from(record.channels.len()).map_err(|_| Error::MalformedHeader {
        format: FORMAT,
        reason: "more than 255 channels".into(),
    })?;
    out.push(count);
    for ch in &record.channels {
        let name_len = u8::try_from(ch.name.len()).map_err(|_| Error::MalformedHeader {
            format: FORMAT,
            reason: format!("channel name {:?} longer than 255 bytes", ch.name),
        })?;
        out.push(name_len);
        out.extend_from_slice(ch.name.as_bytes());
        out.extend_from_slice(&(ch.samples.len() as u64).to_le_bytes());
        for s in &ch.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out.extend_from_slice(&(record.annotations.len() as u32).to_le_bytes());
    for ann in &record.annotations {
        out.extend_from_slice(&(ann.start_sample as u64).to_le_bytes());
        out.extend_from_slice(&(ann.end_sample as u64).to_le_bytes());
    }
    Ok(out)
}

/// Parses a `BSR1` buffer. The format carries no patient id, so the caller
/// supplies one (usually the file stem).
pub fn decode(bytes: &[u8], patient_id: &str) -> Result<SignalRecord> {
    let mut r = Reader::new(bytes, FORMAT);
    let magic = r.bytes(4).map_err(|_| Error::MalformedHeader {
        format: FORMAT,
        reason: "missing magic".into(),
    })?;
    if magic != MAGIC {
        return Err(Error::MalformedHeader {
            format: FORMAT,
            reason: format!("bad magic {magic:02x?}"),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            format: FORMAT,
            version,
        });
    }
    let sample_rate = r.u32()?;
    let channel_count = r.u8()?;
    let mut channels = Vec::with_capacity(channel_count as usize);
    for _ in 0..channel_count {
        let name_len = r.u8()? as usize;
        let name = std::str::from_utf8(r.bytes(name_len)?)
            .map_err(|_| Error::MalformedHeader {
                format: FORMAT,
                reason: "channel name is not UTF-8".into(),
            })?
            .to_owned();
        let count = r.u64()?;
        let count = r.ensure(count, 8)?;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            samples.push(r.f64()?);
        }
        channels.push(Channel { name, samples });
    }
    let ann_count = r.u32()?;
    let ann_count = r.ensure(u64::from(ann_count), 16)?;
    let mut annotations = Vec::with_capacity(ann_count);
    let len = channels.first().map_or(0, |c| c.samples.len());
    for _ in 0..ann_count {
        let start = r.u64()?;
        let end = r.u64()?;
        if start >= end {
            return Err(Error::AnnotationOrder { start, end });
        }
        if end > len as u64 {
            return Err(Error::AnnotationOutOfRange { start, end, len });
        }
        annotations.push(SeizureInterval {
            start_sample: start as usize,
            end_sample: end as usize,
        });
    }
    r.finish()?;
    SignalRecord::new(patient_id, sample_rate, channels, annotations)
}
