use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSignal, SplitTag};
use crate::error::{Error, Result};
use crate::io::{le_to_f64s, read_framed, write_framed};
use crate::signal::TimeSeries;

const MAGIC: &[u8; 8] = b"UFADSET1";
const VERSION: u32 = 1;

/// JSON header of the dataset cache. The payload is, per item in order,
/// `length` little-endian f64 samples followed by a little-endian u32 label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub num_classes: usize,
    pub length: usize,
    pub sample_rate: f64,
    pub count: usize,
    pub split: SplitTag,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub fn save_dataset(ds: &Dataset, path: &Path, meta: BTreeMap<String, String>) -> Result<()> {
    let header = DatasetHeader {
        version: VERSION,
        num_classes: ds.num_classes(),
        length: ds.length(),
        sample_rate: ds.sample_rate(),
        count: ds.len(),
        split: ds.split(),
        meta,
    };
    let mut payload = Vec::with_capacity(ds.len() * (8 * ds.length() + 4));
    for it in ds.items() {
        crate::io::f64s_to_le(it.signal.samples().iter().copied(), &mut payload);
        payload.extend_from_slice(&(it.label as u32).to_le_bytes());
    }
    write_framed(path, MAGIC, &header, &payload)
}

pub fn load_dataset(path: &Path) -> Result<(Dataset, DatasetHeader)> {
    let (header, payload): (DatasetHeader, _) = read_framed(path, MAGIC)?;
    if header.version != VERSION {
        return Err(Error::format("version", format!("expected {VERSION}, found {}", header.version)));
    }
    let stride = 8 * header.length + 4;
    if payload.len() != stride * header.count {
        return Err(Error::format(
            "count",
            format!("payload holds {} bytes, header implies {}", payload.len(), stride * header.count),
        ));
    }
    let items = payload
        .chunks_exact(stride)
        .map(|chunk| {
            let samples = le_to_f64s(&chunk[..8 * header.length]);
            let label = u32::from_le_bytes(chunk[8 * header.length..].try_into().unwrap()) as usize;
            Ok(LabeledSignal { signal: TimeSeries::new(samples, header.sample_rate)?, label })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset::new(items, header.num_classes, header.split)?;
    Ok((ds, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    #[test]
    fn round_trip_and_truncation() {
        let cfg = SynthConfig { examples_per_class: 2, val_per_class: 1, length: 512, ..Default::default() };
        let (train, _) = generate_synthetic(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.bin");
        let meta = BTreeMap::from([("config_hash".to_string(), "abc".to_string())]);
        save_dataset(&train, &p, meta.clone()).unwrap();
        let (back, header) = load_dataset(&p).unwrap();
        assert_eq!(back, train);
        assert_eq!(header.meta, meta);
        assert_eq!(header.count, 20);

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_dataset(&p).unwrap_err();
        assert!(err.to_string().contains("count"), "{err}");
    }
}
