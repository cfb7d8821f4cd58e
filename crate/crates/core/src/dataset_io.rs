//! `PWD1` binary format for a split of preprocessed windows.
//!
//! ```text
//! magic        50 57 44 31 ("PWD1")
//! u16          version (1)
//! u32          window length
//! three parts (train, validation, test), each:
//!   u32        window count
//!   per window: u8 label (0 non-seizure, 1 seizure), u8 record id length,
//!               record id bytes (UTF-8), u64 start sample,
//!               u8 channel mask (bit 0: EEG1, bit 1: EEG2),
//!               f64 ECG samples, then the EEG channels present
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::biosignal::{DatasetSplit, Label, WindowOrigin};
use crate::codec::Reader;
use crate::distill::PreparedWindow;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PWD1";
pub const VERSION: u16 = 1;

const FORMAT: &str = "PWD1";

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        format: FORMAT,
        reason: reason.into(),
    }
}

fn put_samples(out: &mut Vec<u8>, samples: &[f64]) {
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

pub fn encode(split: &DatasetSplit<PreparedWindow>) -> Result<Vec<u8>> {
    let len = [&split.train, &split.validation, &split.test]
        .into_iter()
        .flatten()
        .next()
        .map_or(0, |w| w.ecg.len());
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(len).map_err(|_| malformed("window too long"))?.to_le_bytes());
    for part in [&split.train, &split.validation, &split.test] {
        out.extend_from_slice(&u32::try_from(part.len()).map_err(|_| malformed("too many windows"))?.to_le_bytes());
        for w in part {
            let channels = [Some(&w.ecg), w.eeg1.as_ref(), w.eeg2.as_ref()];
            if channels.iter().flatten().any(|c| c.len() != len) {
                return Err(Error::shape("dataset window", len, w.ecg.len()));
            }
            let id = w.origin.record.as_bytes();
            out.push(w.label.class_index() as u8);
            out.push(u8::try_from(id.len()).map_err(|_| malformed("record id longer than 255 bytes"))?);
            out.extend_from_slice(id);
            out.extend_from_slice(&(w.origin.start as u64).to_le_bytes());
            out.push(u8::from(w.eeg1.is_some()) | u8::from(w.eeg2.is_some()) << 1);
            for c in channels.into_iter().flatten() {
                put_samples(&mut out, c);
            }
        }
    }
    Ok(out)
}

fn read_samples(r: &mut Reader, len: usize) -> Result<Vec<f64>> {
    let len = r.ensure(len as u64, 8)?;
    (0..len).map(|_| r.f64()).collect()
}

fn read_window(r: &mut Reader, len: usize) -> Result<PreparedWindow> {
    let label = match r.u8()? {
        0 => Label::NonSeizure,
        1 => Label::Seizure,
        l => return Err(malformed(format!("unknown label {l}"))),
    };
    let id_len = r.u8()? as usize;
    let record = std::str::from_utf8(r.bytes(id_len)?)
        .map_err(|_| malformed("record id is not UTF-8"))?
        .to_owned();
    let start = usize::try_from(r.u64()?).map_err(|_| malformed("start sample out of range"))?;
    let mask = r.u8()?;
    if mask > 3 {
        return Err(malformed(format!("unknown channel mask {mask:#04b}")));
    }
    let ecg = read_samples(r, len)?;
    let eeg1 = if mask & 1 != 0 { Some(read_samples(r, len)?) } else { None };
    let eeg2 = if mask & 2 != 0 { Some(read_samples(r, len)?) } else { None };
    Ok(PreparedWindow {
        ecg,
        eeg1,
        eeg2,
        label,
        origin: WindowOrigin { record, start },
    })
}

pub fn decode(bytes: &[u8]) -> Result<DatasetSplit<PreparedWindow>> {
    let mut r = Reader::new(bytes, FORMAT);
    if r.bytes(4).map_err(|_| malformed("missing magic"))? != MAGIC {
        return Err(malformed("bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion { format: FORMAT, version });
    }
    let len = r.u32()? as usize;
    let mut parts = Vec::with_capacity(3);
    for _ in 0..3 {
        // Each window takes at least 12 bytes plus its ECG samples.
        let count = u64::from(r.u32()?);
        let count = r.ensure(count, 12 + 8 * len as u64)?;
        parts.push((0..count).map(|_| read_window(&mut r, len)).collect::<Result<Vec<_>>>()?);
    }
    r.finish()?;
    let test = parts.pop().unwrap_or_default();
    let validation = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok(DatasetSplit { train, validation, test })
}

pub fn save_dataset(path: &Path, split: &DatasetSplit<PreparedWindow>) -> Result<()> {
    std::fs::write(path, encode(split)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit<PreparedWindow>> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(k: usize, label: Label, eeg: bool) -> PreparedWindow {
        let sig = |c: usize| (0..8).map(|i| (i * c + k) as f64 * 0.25 - 1.0).collect::<Vec<_>>();
        PreparedWindow {
            ecg: sig(1),
            eeg1: eeg.then(|| sig(2)),
            eeg2: eeg.then(|| sig(3)),
            label,
            origin: WindowOrigin {
                record: format!("rec{k:03}"),
                start: k * 668,
            },
        }
    }

    fn split() -> DatasetSplit<PreparedWindow> {
        DatasetSplit {
            train: vec![window(0, Label::Seizure, true), window(1, Label::NonSeizure, true)],
            validation: vec![window(2, Label::Seizure, false)],
            test: vec![],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = split();
        s.train[0].ecg[3] = -0.0;
        s.train[0].ecg[4] = f64::MIN_POSITIVE / 3.0;
        let bytes = encode(&s).unwrap();
        assert_eq!(&bytes[..4], b"PWD1");
        let back = decode(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.train[0].ecg[3].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn corruption_is_rejected() {
        let bytes = encode(&split()).unwrap();
        for cut in [0, 3, 6, 9, 20, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[14] = 7;
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }

    #[test]
    fn mixed_lengths_are_refused() {
        let mut s = split();
        s.validation[0].ecg.pop();
        assert!(matches!(encode(&s), Err(Error::ShapeMismatch { .. })));
    }
}
