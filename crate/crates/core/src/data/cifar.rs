//! CIFAR-10 binary batches: 3073-byte records, one label byte followed by
//! 1024 red, 1024 green and 1024 blue pixel bytes, each plane row-major.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{DataKind, LabeledSet};
use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE * CHANNELS;
pub const RECORD_LEN: usize = PIXELS + 1;
pub const CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarRecord {
    pub label: u8,
    pub pixels: Box<[u8; PIXELS]>,
}

pub fn decode_records(bytes: &[u8], path: &Path) -> Result<Vec<CifarRecord>> {
    let full = bytes.len() / RECORD_LEN;
    if bytes.len() % RECORD_LEN != 0 {
        return Err(Error::CorruptData {
            path: path.to_path_buf(),
            offset: (full * RECORD_LEN) as u64,
            reason: format!(
                "truncated record: {} trailing bytes, records are {RECORD_LEN} bytes",
                bytes.len() % RECORD_LEN
            ),
        });
    }
    bytes
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0];
            if label as usize >= CLASSES {
                return Err(Error::CorruptData {
                    path: path.to_path_buf(),
                    offset: (i * RECORD_LEN) as u64,
                    reason: format!("label byte {label} > 9"),
                });
            }
            let pixels: Box<[u8; PIXELS]> = Box::new(rec[1..].try_into().expect("chunk length"));
            Ok(CifarRecord { label, pixels })
        })
        .collect()
}

pub fn encode_records(records: &[CifarRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * RECORD_LEN);
    for r in records {
        out.push(r.label);
        out.extend_from_slice(&r.pixels[..]);
    }
    out
}

pub fn read_batch_file(path: &Path) -> Result<Vec<CifarRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes, path)
}

/// Pixels scaled to `[0, 1]`, channel-planar like the file.
pub fn records_to_set(records: &[CifarRecord]) -> LabeledSet {
    let mut features = Array2::zeros((records.len(), PIXELS));
    for (mut row, r) in features.outer_iter_mut().zip(records) {
        row.iter_mut()
            .zip(r.pixels.iter())
            .for_each(|(d, &p)| *d = p as f32 / 255.0);
    }
    LabeledSet {
        features,
        labels: records.iter().map(|r| r.label as usize).collect(),
        class_count: CLASSES,
        kind: DataKind::Image {
            height: IMAGE_SIDE,
            width: IMAGE_SIDE,
            channels: CHANNELS,
        },
    }
}

/// Loads the five training batches and the test batch from `dir`.
pub fn load_cifar10(dir: &Path) -> Result<(LabeledSet, LabeledSet)> {
    let mut train = Vec::new();
    for name in TRAIN_FILES {
        train.extend(read_batch_file(&dir.join(name))?);
    }
    let test = read_batch_file(&dir.join(TEST_FILE))?;
    Ok((records_to_set(&train), records_to_set(&test)))
}

pub fn batch_paths(dir: &Path) -> Vec<PathBuf> {
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .map(|n| dir.join(n))
        .collect()
}
