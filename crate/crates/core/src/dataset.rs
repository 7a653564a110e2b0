//! TGD v1: tactile grasp dataset files.
//!
//! A dataset is two files side by side:
//!
//! * `<name>`, a TOML manifest with the format tag and version, frame interval,
//!   layout constants, payload size and CRC-32, optional provenance table,
//!   and one `[[recording]]` entry per recording (id, frame offset and
//!   count, label, phase marks, scenario metadata).
//! * `<name>.bin` (or whatever the manifest's `payload` names), the frame
//!   payload: magic `TGDP`, `u32` version, `u64` frame count, then per frame
//!   a `u64` timestamp in milliseconds followed by 384 `f32` values in
//!   row-major 24×16 order. Every multi-byte field is little-endian.
//!
//! The CRC-32 in the manifest covers every byte of the payload file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TaxelFrame;
use crate::grasp::GraspState;
use crate::layout::{
    ARRAYS_PER_FINGER, FINGER_COUNT, FRAME_COLS, FRAME_INTERVAL_MS, FRAME_ROWS, TAXELS_PER_ARRAY,
    TAXEL_COUNT,
};
use crate::recording::{GraspRecording, PhaseMarks};
use crate::scalar::Scalar;

pub const FORMAT_TAG: &str = "TGD";
pub const FORMAT_VERSION: u32 = 1;
pub const PAYLOAD_MAGIC: [u8; 4] = *b"TGDP";
const PAYLOAD_HEADER_BYTES: usize = 16;
const FRAME_BYTES: usize = 8 + 4 * TAXEL_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutInfo {
    pub rows: usize,
    pub cols: usize,
    pub fingers: usize,
    pub arrays_per_finger: usize,
    pub taxels_per_array: usize,
}

impl Default for LayoutInfo {
    fn default() -> Self {
        LayoutInfo {
            rows: FRAME_ROWS,
            cols: FRAME_COLS,
            fingers: FINGER_COUNT,
            arrays_per_finger: ARRAYS_PER_FINGER,
            taxels_per_array: TAXELS_PER_ARRAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub id: usize,
    pub frame_offset: u64,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub phases: PhaseMarks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub frame_interval_ms: u64,
    /// Payload file name, relative to the manifest's directory.
    pub payload: String,
    pub payload_bytes: u64,
    /// Lower-case hex CRC-32 of the payload file.
    pub payload_crc32: String,
    pub recording_count: usize,
    pub layout: LayoutInfo,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
    #[serde(default, rename = "recording")]
    pub recordings: Vec<RecordingEntry>,
}

impl Manifest {
    /// Short digest identifying the dataset contents.
    pub fn digest(&self) -> String {
        format!("crc32:{}", self.payload_crc32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub manifest: Manifest,
    pub recordings: Vec<GraspRecording<T>>,
}

/// Default payload location for a manifest path: `<manifest>.bin`.
pub fn payload_path_for(manifest: &Path) -> PathBuf {
    let mut name = manifest.file_name().unwrap_or_default().to_os_string();
    name.push(".bin");
    manifest.with_file_name(name)
}

pub fn write_dataset<T: Scalar>(recordings: &[GraspRecording<T>], path: &Path) -> Result<Manifest> {
    write_dataset_with(recordings, path, BTreeMap::new())
}

/// Writes manifest and payload. Frame values are stored as `f32`.
pub fn write_dataset_with<T: Scalar>(
    recordings: &[GraspRecording<T>],
    path: &Path,
    provenance: BTreeMap<String, String>,
) -> Result<Manifest> {
    let payload_path = payload_path_for(path);
    let total_frames: usize = recordings.iter().map(GraspRecording::len).sum();

    let mut payload = Vec::with_capacity(PAYLOAD_HEADER_BYTES + total_frames * FRAME_BYTES);
    payload.extend_from_slice(&PAYLOAD_MAGIC);
    payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    payload.extend_from_slice(&(total_frames as u64).to_le_bytes());

    let mut entries = Vec::with_capacity(recordings.len());
    let mut offset = 0u64;
    for (id, rec) in recordings.iter().enumerate() {
        for frame in rec.frames() {
            payload.extend_from_slice(&frame.timestamp_ms().to_le_bytes());
            for v in frame.values() {
                let v = v.to_f32().expect("normalized value fits f32");
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        entries.push(RecordingEntry {
            id,
            frame_offset: offset,
            frame_count: rec.len(),
            label: rec.label().map(|l| l.to_string()),
            phases: *rec.phases(),
            meta: rec.meta().cloned(),
        });
        offset += rec.len() as u64;
    }

    let manifest = Manifest {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        frame_interval_ms: FRAME_INTERVAL_MS,
        payload: payload_path
            .file_name()
            .expect("payload path has a file name")
            .to_string_lossy()
            .into_owned(),
        payload_bytes: payload.len() as u64,
        payload_crc32: format!("{:08x}", crc32fast::hash(&payload)),
        recording_count: recordings.len(),
        layout: LayoutInfo::default(),
        provenance,
        recordings: entries,
    };

    let mut out = BufWriter::new(File::create(&payload_path).map_err(|e| Error::io(&payload_path, e))?);
    out.write_all(&payload)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&payload_path, e))?;

    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::Format(format!("bad format tag `{}`", manifest.format)));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported TGD version {}",
            manifest.version
        )));
    }
    if manifest.layout != LayoutInfo::default() {
        return Err(Error::Format(format!(
            "unsupported layout {:?}",
            manifest.layout
        )));
    }
    if manifest.recording_count != manifest.recordings.len() {
        return Err(Error::Format(format!(
            "manifest declares {} recordings but lists {}",
            manifest.recording_count,
            manifest.recordings.len()
        )));
    }
    Ok(manifest)
}

pub fn read_dataset<T: Scalar>(path: &Path) -> Result<Vec<GraspRecording<T>>> {
    Ok(read_dataset_full(path)?.recordings)
}

pub fn read_dataset_full<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let manifest = read_manifest(path)?;
    let payload_path = path.with_file_name(&manifest.payload);
    let file = File::open(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let mut reader = CrcReader {
        inner: BufReader::new(file),
        hasher: crc32fast::Hasher::new(),
        bytes: 0,
    };

    let mut header = [0u8; PAYLOAD_HEADER_BYTES];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("payload header truncated".into()))?;
    if header[..4] != PAYLOAD_MAGIC {
        return Err(Error::Format("bad payload magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported payload version {version}")));
    }
    let total_frames = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let listed: usize = manifest.recordings.iter().map(|r| r.frame_count).sum();
    if listed != total_frames {
        return Err(Error::Format(format!(
            "manifest lists {listed} frames, payload header declares {total_frames}"
        )));
    }

    let mut recordings = Vec::with_capacity(manifest.recordings.len());
    let mut buf = vec![0u8; FRAME_BYTES];
    let mut frame_index = 0usize;
    for (i, entry) in manifest.recordings.iter().enumerate() {
        if entry.id != i || entry.frame_offset != frame_index as u64 {
            return Err(Error::Format(format!(
                "recording entry {i} has id {} and offset {}, expected {i} and {frame_index}",
                entry.id, entry.frame_offset
            )));
        }
        let mut frames = Vec::with_capacity(entry.frame_count);
        for _ in 0..entry.frame_count {
            reader.read_exact(&mut buf).map_err(|source| Error::Truncated {
                frame: frame_index,
                source,
            })?;
            let ts = u64::from_le_bytes(buf[..8].try_into().unwrap());
            let values = buf[8..]
                .chunks_exact(4)
                .map(|c| {
                    let v = f32::from_le_bytes(c.try_into().unwrap());
                    <T as num_traits::FromPrimitive>::from_f32(v).unwrap_or_else(T::nan)
                })
                .collect();
            let frame = TaxelFrame::new(ts, values)
                .map_err(|e| Error::Format(format!("frame {frame_index}: {e}")))?;
            frames.push(frame);
            frame_index += 1;
        }
        let label = entry
            .label
            .as_deref()
            .map(str::parse::<GraspState>)
            .transpose()?;
        let rec = GraspRecording::new(frames, entry.phases, label, entry.meta.clone())
            .map_err(|e| Error::Format(format!("recording {i}: {e}")))?;
        recordings.push(rec);
    }

    let mut rest = Vec::new();
    reader
        .read_to_end(&mut rest)
        .map_err(|e| Error::io(&payload_path, e))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last frame",
            rest.len()
        )));
    }
    if reader.bytes != manifest.payload_bytes {
        return Err(Error::Format(format!(
            "payload is {} bytes, manifest declares {}",
            reader.bytes, manifest.payload_bytes
        )));
    }
    let crc = format!("{:08x}", reader.hasher.finalize());
    if !crc.eq_ignore_ascii_case(&manifest.payload_crc32) {
        return Err(Error::Format(format!(
            "payload CRC-32 {crc} does not match manifest {}",
            manifest.payload_crc32
        )));
    }
    Ok(Dataset {
        manifest,
        recordings,
    })
}

/// CRC-32 of a payload file, recomputed from disk.
pub fn payload_crc32(path: &Path) -> Result<u32> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(crc32fast::hash(&bytes))
}

struct CrcReader<R> {
    inner: R,
    hasher: crc32fast::Hasher,
    bytes: u64,
}

impl<R: Read> Read for CrcReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }
}
