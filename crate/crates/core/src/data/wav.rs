//! Minimal RIFF/WAVE reader (PCM 16/32-bit integer, 32-bit float) and a
//! 16-bit PCM writer.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::{Dataset, LabeledSignal, SplitTag};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded first channel of a WAV file, normalized to [-1, 1].
#[derive(Debug, Clone)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavAudio> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(Error::format("riff_id", "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format("wave_id", "missing WAVE tag"));
    }
    let mut fmt: Option<&[u8]> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => fmt = Some(&bytes[body..end]),
            b"data" => data = Some(&bytes[body..end]),
            _ => {}
        }
        pos = body.saturating_add(size + (size & 1));
    }
    let fmt = fmt.ok_or_else(|| Error::format("fmt", "no fmt chunk"))?;
    if fmt.len() < 16 {
        return Err(Error::format("fmt", format!("chunk is {} bytes, need 16", fmt.len())));
    }
    let mut format = u16_at(fmt, 0);
    let channels = u16_at(fmt, 2);
    let sample_rate = u32_at(fmt, 4);
    let block_align = u16_at(fmt, 12) as usize;
    let bits = u16_at(fmt, 14);
    if format == FORMAT_EXTENSIBLE {
        if fmt.len() < 26 {
            return Err(Error::format("sub_format", "extensible fmt chunk too short"));
        }
        format = u16_at(fmt, 24);
    }
    if channels == 0 {
        return Err(Error::format("channels", "zero channels"));
    }
    if sample_rate == 0 {
        return Err(Error::format("sample_rate", "zero sample rate"));
    }
    let bytes_per_sample = (bits as usize).div_ceil(8);
    if block_align < bytes_per_sample * channels as usize {
        return Err(Error::format("block_align", format!("{block_align} too small for {channels} x {bits} bits")));
    }
    let decode: fn(&[u8]) -> f64 = match (format, bits) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_PCM, 32) => |b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (FORMAT_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (f, b) => return Err(Error::UnsupportedEncoding(format!("format tag {f} with {b} bits per sample"))),
    };
    let data = data.ok_or_else(|| Error::format("data", "no data chunk"))?;
    let samples: Vec<f64> = data.chunks_exact(block_align).map(|frame| decode(&frame[..bytes_per_sample])).collect();
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::format("data", "non-finite float sample"));
    }
    Ok(WavAudio { samples, sample_rate, channels, bits_per_sample: bits })
}

pub fn read_wav(path: &Path) -> Result<WavAudio> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

/// Encode mono 16-bit PCM. Samples are clipped to [-1, 1].
pub fn encode_wav_pcm16(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

/// Cut labeled segments from WAV audio.
///
/// `path` is either a corpus directory with one subdirectory per class (class
/// indices follow the sorted directory names) or a single file (class 0).
/// Up to `max_segments` segments of `segment_len` samples are cut from each
/// file at seeded random offsets. All files must share one sample rate.
pub fn load_wav_segments(path: &Path, segment_len: usize, max_segments: usize, seed: u64) -> Result<Dataset> {
    if segment_len == 0 || max_segments == 0 {
        return Err(Error::invalid("segment_len", "segment length and count must be positive"));
    }
    let mut classes: Vec<Vec<PathBuf>> = Vec::new();
    if path.is_dir() {
        let mut dirs: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for d in dirs {
            let files = wav_files(&d)?;
            if !files.is_empty() {
                classes.push(files);
            }
        }
        if classes.is_empty() {
            return Err(Error::invalid("path", format!("{} has no class directories with WAV files", path.display())));
        }
    } else {
        classes.push(vec![path.to_path_buf()]);
    }

    let mut rate: Option<u32> = None;
    let mut items = Vec::new();
    let mut file_index = 0u64;
    for (label, files) in classes.iter().enumerate() {
        for file in files {
            let audio = read_wav(file)?;
            match rate {
                None => rate = Some(audio.sample_rate),
                Some(r) if r != audio.sample_rate => {
                    return Err(Error::SampleRateMismatch { expected: r as f64, got: audio.sample_rate as f64 })
                }
                _ => {}
            }
            if audio.samples.len() < segment_len {
                return Err(Error::invalid(
                    "segment_len",
                    format!("{} has {} samples, fewer than {segment_len}", file.display(), audio.samples.len()),
                ));
            }
            let mut rng = crate::rng::derive(seed, file_index);
            file_index += 1;
            let span = audio.samples.len() - segment_len;
            for _ in 0..max_segments {
                let start = rng.random_range(0..=span);
                let signal = TimeSeries::new(audio.samples[start..start + segment_len].to_vec(), audio.sample_rate as f64)?;
                items.push(LabeledSignal { signal, label });
            }
        }
    }
    Dataset::new(items, classes.len(), SplitTag::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&8000u32.to_le_bytes());
        out.extend_from_slice(&(8000 * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn pcm16_scaling() {
        let bytes = header(1, 1, 16, &[0x00, 0x40, 0x00, 0xC0]);
        let a = parse_wav(&bytes).unwrap();
        assert!((a.samples[0] - 0.5).abs() < 1e-4);
        assert!((a.samples[1] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn first_channel_and_other_encodings() {
        let mut data = Vec::new();
        for (l, r) in [(0.25f32, -1.0f32), (-0.75, 1.0)] {
            data.extend_from_slice(&l.to_le_bytes());
            data.extend_from_slice(&r.to_le_bytes());
        }
        let a = parse_wav(&header(3, 2, 32, &data)).unwrap();
        assert_eq!(a.samples, vec![0.25, -0.75]);

        let v = (1i32 << 30).to_le_bytes();
        let a = parse_wav(&header(1, 1, 32, &v)).unwrap();
        assert!((a.samples[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn malformed_headers_name_the_field() {
        let good = header(1, 1, 16, &[0, 0]);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(parse_wav(&bad).unwrap_err().to_string().contains("riff_id"));
        let mut bad = good.clone();
        bad[8] = b'X';
        assert!(parse_wav(&bad).unwrap_err().to_string().contains("wave_id"));
        assert!(parse_wav(&good[..30]).unwrap_err().to_string().contains("fmt"));
        assert!(parse_wav(&good[..36]).unwrap_err().to_string().contains("data"));
        let err = parse_wav(&header(1, 1, 8, &[0, 0])).unwrap_err();
        assert!(matches!(err, Error::UnsupportedEncoding(_)));
        let err = parse_wav(&header(1, 0, 16, &[0, 0])).unwrap_err();
        assert!(err.to_string().contains("channels"));
    }

    #[test]
    fn corpus_segments() {
        let dir = tempfile::tempdir().unwrap();
        for (class, freq) in [("go", 440.0), ("stop", 880.0)] {
            std::fs::create_dir(dir.path().join(class)).unwrap();
            let s: Vec<f64> = (0..4000).map(|t| 0.5 * (2.0 * std::f64::consts::PI * freq * t as f64 / 8000.0).sin()).collect();
            std::fs::write(dir.path().join(class).join("a.wav"), encode_wav_pcm16(&s, 8000)).unwrap();
        }
        let ds = load_wav_segments(dir.path(), 1000, 3, 5).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.sample_rate(), 8000.0);
        assert_eq!(ds.items()[0].label, 0);
        assert_eq!(ds.items()[5].label, 1);
        assert_eq!(load_wav_segments(dir.path(), 1000, 3, 5).unwrap(), ds);
        assert_ne!(load_wav_segments(dir.path(), 1000, 3, 6).unwrap(), ds);

        let single = dir.path().join("go").join("a.wav");
        assert!(load_wav_segments(&single, 5000, 1, 0).is_err());
        assert_eq!(load_wav_segments(&single, 100, 2, 0).unwrap().num_classes(), 1);
    }
}
