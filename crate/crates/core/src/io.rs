//! On-disk formats.
//!
//! A recording directory holds:
//!
//! ```text
//! intrinsics.json      {"fx", "fy", "cx", "cy", "width", "height"}
//! frames.jsonl         one frame per line: timestamp, depth_file, detections
//! depth/NNNNNN.pgm     binary 16-bit PGM, big-endian samples in millimeters
//! ```
//!
//! Ground truth lives next to it as `gt.jsonl` (world-frame joints per line)
//! and `extrinsics.json` (row-major 4x4 camera-to-world). Pipeline output is
//! a JSONL stream of [`ResultRecord`]s.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Extrinsics, GeometryError, SocialPoint, Vec3};
use crate::skeleton::{DepthFrame, JointId, Keypoint, Skeleton2D, Skeleton3D, COCO_JOINTS};

pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const FRAMES_FILE: &str = "frames.jsonl";
pub const DEPTH_DIR: &str = "depth";
pub const GT_FILE: &str = "gt.jsonl";
pub const EXTRINSICS_FILE: &str = "extrinsics.json";

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("bad magic number, expected P5")]
    BadMagic,
    #[error("malformed header at byte {offset}: {message}")]
    BadHeader { offset: usize, message: String },
    #[error("maxval {0} is not 65535")]
    BadMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("trailing data after pixel payload at byte {offset}")]
    TrailingData { offset: usize },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}:{line}: {message}", path.display())]
    MalformedLine { path: PathBuf, line: usize, message: String },
    #[error("{}:{line}: timestamp {timestamp} does not increase past {previous}", path.display())]
    NonMonotonicTimestamp { path: PathBuf, line: usize, previous: f64, timestamp: f64 },
    #[error("{}:{line}: depth file {} does not exist", path.display(), depth.display())]
    MissingDepthFile { path: PathBuf, line: usize, depth: PathBuf },
    #[error("{}: depth frame is {width}x{height}, intrinsics say {expected_width}x{expected_height}", path.display())]
    DepthSizeMismatch { path: PathBuf, width: u32, height: u32, expected_width: u32, expected_height: u32 },
    #[error("{}: {source}", path.display())]
    Pgm { path: PathBuf, source: PgmError },
    #[error("{}: {source}", path.display())]
    Geometry { path: PathBuf, source: GeometryError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_owned(), source }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.to_owned(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// PGM

/// Encodes a depth frame as binary 16-bit PGM (big-endian samples).
pub fn encode_pgm16(frame: &DepthFrame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.data().len() * 2);
    out.extend_from_slice(header.as_bytes());
    for &d in frame.data() {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

/// Decodes a binary 16-bit PGM. Header comments are accepted; anything after
/// the pixel payload is rejected.
pub fn decode_pgm16(bytes: &[u8]) -> Result<DepthFrame, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before every header field
        let mut saw_space = false;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => {
                    saw_space = true;
                    pos += 1;
                }
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if !saw_space {
            return Err(PgmError::BadHeader { offset: pos, message: "expected whitespace".into() });
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        *field = digits.parse().map_err(|_| PgmError::BadHeader {
            offset: start,
            message: format!("expected {}", ["width", "height", "maxval"][i]),
        })?;
    }
    let [width, height, maxval] = fields;
    if maxval != 65535 {
        return Err(PgmError::BadMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader { offset: pos, message: format!("empty image {width}x{height}") });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(PgmError::BadHeader { offset: pos, message: "expected single whitespace after maxval".into() })
        }
    }
    let expected = width as usize * height as usize * 2;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(PgmError::TruncatedData { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(PgmError::TrailingData { offset: pos + expected });
    }
    let data = payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(DepthFrame::new(width, height, data, 0.0).expect("payload length checked"))
}

pub fn read_pgm16(path: &Path) -> Result<DepthFrame, FormatError> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    decode_pgm16(&bytes).map_err(|source| FormatError::Pgm { path: path.to_owned(), source })
}

pub fn write_pgm16(path: &Path, frame: &DepthFrame) -> Result<(), FormatError> {
    fs::write(path, encode_pgm16(frame)).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Intrinsics / extrinsics

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, FormatError> {
    let k: CameraIntrinsics = read_json(path)?;
    k.validate().map_err(|source| FormatError::Geometry { path: path.to_owned(), source })?;
    Ok(k)
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<(), FormatError> {
    write_json(path, k)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtrinsicsFile {
    camera_to_world: [f64; 16],
}

pub fn read_extrinsics(path: &Path) -> Result<Extrinsics, FormatError> {
    let file: ExtrinsicsFile = read_json(path)?;
    Extrinsics::from_row_major(&file.camera_to_world)
        .map_err(|source| FormatError::Geometry { path: path.to_owned(), source })
}

pub fn write_extrinsics(path: &Path, e: &Extrinsics) -> Result<(), FormatError> {
    write_json(path, &ExtrinsicsFile { camera_to_world: e.to_row_major() })
}

// ---------------------------------------------------------------------------
// JSONL plumbing

fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<(), FormatError>) -> Result<(), FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        f(i + 1, &line)?;
    }
    Ok(())
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line_no: usize, line: &str) -> Result<T, FormatError> {
    serde_json::from_str(line).map_err(|e| FormatError::MalformedLine {
        path: path.to_owned(),
        line: line_no,
        message: e.to_string(),
    })
}

fn check_monotonic(path: &Path, line: usize, previous: &mut Option<f64>, timestamp: f64) -> Result<(), FormatError> {
    if !timestamp.is_finite() {
        return Err(FormatError::MalformedLine { path: path.to_owned(), line, message: "non-finite timestamp".into() });
    }
    if let Some(prev) = *previous {
        if timestamp <= prev {
            return Err(FormatError::NonMonotonicTimestamp { path: path.to_owned(), line, previous: prev, timestamp });
        }
    }
    *previous = Some(timestamp);
    Ok(())
}

fn joints_to_map<'a>(joints: impl Iterator<Item = (JointId, &'a SocialPoint)>) -> BTreeMap<String, [f64; 3]> {
    joints.map(|(j, p)| (j.name().to_owned(), (*p).into())).collect()
}

fn map_to_joints(map: &BTreeMap<String, [f64; 3]>) -> Result<Vec<(JointId, SocialPoint)>, String> {
    map.iter()
        .map(|(name, p)| {
            let joint: JointId = name.parse().map_err(|e: crate::skeleton::UnknownJoint| e.to_string())?;
            if !p.iter().all(|c| c.is_finite()) {
                return Err(format!("joint {name} has non-finite coordinates"));
            }
            Ok((joint, SocialPoint::from(*p)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Recording

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionLine {
    score: f64,
    keypoints: [Keypoint; COCO_JOINTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    timestamp: f64,
    depth_file: String,
    detections: Vec<DetectionLine>,
}

/// One line of `frames.jsonl`; depth is loaded on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedFrame {
    /// 1-based line number in `frames.jsonl`.
    pub line: usize,
    pub timestamp: f64,
    /// Relative to the recording root.
    pub depth_file: String,
    pub detections: Vec<Skeleton2D>,
}

#[derive(Debug, Clone)]
pub struct Recording {
    root: PathBuf,
    pub intrinsics: CameraIntrinsics,
}

impl Recording {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, FormatError> {
        let root = root.as_ref().to_owned();
        let intrinsics = read_intrinsics(&root.join(INTRINSICS_FILE))?;
        let frames = root.join(FRAMES_FILE);
        if !frames.is_file() {
            return Err(FormatError::Io {
                path: frames,
                source: io::Error::new(io::ErrorKind::NotFound, "frames file not found"),
            });
        }
        Ok(Self { root, intrinsics })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Streams frames in file order, validating each line. Iteration stops
    /// after the first error.
    pub fn frames(&self) -> Result<FrameIter, FormatError> {
        let path = self.root.join(FRAMES_FILE);
        let file = File::open(&path).map_err(io_err(&path))?;
        Ok(FrameIter {
            root: self.root.clone(),
            path,
            lines: BufReader::new(file).lines(),
            line: 0,
            previous: None,
            done: false,
        })
    }

    /// Loads and checks the depth frame referenced by `frame`.
    pub fn load_depth(&self, frame: &RecordedFrame) -> Result<DepthFrame, FormatError> {
        let path = self.root.join(&frame.depth_file);
        let mut depth = read_pgm16(&path)?;
        if depth.width() != self.intrinsics.width || depth.height() != self.intrinsics.height {
            return Err(FormatError::DepthSizeMismatch {
                path,
                width: depth.width(),
                height: depth.height(),
                expected_width: self.intrinsics.width,
                expected_height: self.intrinsics.height,
            });
        }
        depth.timestamp = frame.timestamp;
        Ok(depth)
    }
}

pub struct FrameIter {
    root: PathBuf,
    path: PathBuf,
    lines: io::Lines<BufReader<File>>,
    line: usize,
    previous: Option<f64>,
    done: bool,
}

impl FrameIter {
    fn parse(&mut self, text: &str) -> Result<RecordedFrame, FormatError> {
        let raw: FrameLine = parse_line(&self.path, self.line, text)?;
        check_monotonic(&self.path, self.line, &mut self.previous, raw.timestamp)?;
        let depth_rel = Path::new(&raw.depth_file);
        if depth_rel.is_absolute() || depth_rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(FormatError::MalformedLine {
                path: self.path.clone(),
                line: self.line,
                message: format!("depth_file {} must be relative to the recording root", raw.depth_file),
            });
        }
        let depth = self.root.join(depth_rel);
        if !depth.is_file() {
            return Err(FormatError::MissingDepthFile { path: self.path.clone(), line: self.line, depth });
        }
        let detections = raw
            .detections
            .into_iter()
            .map(|d| {
                let s = Skeleton2D { keypoints: d.keypoints, timestamp: raw.timestamp, score: d.score };
                s.validate().map(|_| s)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| FormatError::MalformedLine { path: self.path.clone(), line: self.line, message })?;
        Ok(RecordedFrame { line: self.line, timestamp: raw.timestamp, depth_file: raw.depth_file, detections })
    }
}

impl Iterator for FrameIter {
    type Item = Result<RecordedFrame, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let text = match self.lines.next()? {
            Ok(t) => t,
            Err(source) => {
                self.done = true;
                return Some(Err(FormatError::Io { path: self.path.clone(), source }));
            }
        };
        self.line += 1;
        let result = self.parse(&text);
        self.done = result.is_err();
        Some(result)
    }
}

/// Writes a recording directory frame by frame.
pub struct RecordingWriter {
    root: PathBuf,
    intrinsics: CameraIntrinsics,
    frames: BufWriter<File>,
    frames_path: PathBuf,
    count: usize,
    previous: Option<f64>,
}

impl RecordingWriter {
    pub fn create(root: impl AsRef<Path>, intrinsics: &CameraIntrinsics) -> Result<Self, FormatError> {
        let root = root.as_ref().to_owned();
        let depth_dir = root.join(DEPTH_DIR);
        fs::create_dir_all(&depth_dir).map_err(io_err(&depth_dir))?;
        write_intrinsics(&root.join(INTRINSICS_FILE), intrinsics)?;
        let frames_path = root.join(FRAMES_FILE);
        let frames = BufWriter::new(File::create(&frames_path).map_err(io_err(&frames_path))?);
        Ok(Self { root, intrinsics: *intrinsics, frames, frames_path, count: 0, previous: None })
    }

    pub fn write_frame(
        &mut self,
        timestamp: f64,
        detections: &[Skeleton2D],
        depth: &DepthFrame,
    ) -> Result<(), FormatError> {
        check_monotonic(&self.frames_path, self.count + 1, &mut self.previous, timestamp)?;
        if depth.width() != self.intrinsics.width || depth.height() != self.intrinsics.height {
            return Err(FormatError::DepthSizeMismatch {
                path: self.root.clone(),
                width: depth.width(),
                height: depth.height(),
                expected_width: self.intrinsics.width,
                expected_height: self.intrinsics.height,
            });
        }
        let depth_file = format!("{DEPTH_DIR}/{:06}.pgm", self.count);
        write_pgm16(&self.root.join(&depth_file), depth)?;
        let line = FrameLine {
            timestamp,
            depth_file,
            detections: detections.iter().map(|d| DetectionLine { score: d.score, keypoints: d.keypoints }).collect(),
        };
        serde_json::to_writer(&mut self.frames, &line).expect("plain data serializes");
        self.frames.write_all(b"\n").map_err(io_err(&self.frames_path))?;
        self.count += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> usize {
        self.count
    }

    pub fn finish(mut self) -> Result<(), FormatError> {
        self.frames.flush().map_err(io_err(&self.frames_path))
    }
}

// ---------------------------------------------------------------------------
// Ground truth

/// One ground-truth sample: world-frame joints, plus optional world-frame
/// facing directions when the source knows them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub timestamp: f64,
    pub joints: Vec<(JointId, Vec3)>,
    pub torso_direction: Option<Vec3>,
    pub gaze_direction: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub extrinsics: Extrinsics,
    pub records: Vec<GtRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GtLine {
    timestamp: f64,
    joints: BTreeMap<String, [f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    torso_direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaze_direction: Option<[f64; 3]>,
}

pub fn read_ground_truth(dir: impl AsRef<Path>) -> Result<GroundTruth, FormatError> {
    let dir = dir.as_ref();
    let extrinsics = read_extrinsics(&dir.join(EXTRINSICS_FILE))?;
    let path = dir.join(GT_FILE);
    let mut records = Vec::new();
    let mut previous = None;
    for_each_line(&path, |line, text| {
        let raw: GtLine = parse_line(&path, line, text)?;
        check_monotonic(&path, line, &mut previous, raw.timestamp)?;
        let malformed = |message: String| FormatError::MalformedLine { path: path.clone(), line, message };
        let joints = map_to_joints(&raw.joints).map_err(malformed)?;
        records.push(GtRecord {
            timestamp: raw.timestamp,
            joints: joints.into_iter().map(|(j, p)| (j, p.0)).collect(),
            torso_direction: raw.torso_direction.map(Vec3::from),
            gaze_direction: raw.gaze_direction.map(Vec3::from),
        });
        Ok(())
    })?;
    Ok(GroundTruth { extrinsics, records })
}

pub fn write_ground_truth(dir: impl AsRef<Path>, gt: &GroundTruth) -> Result<(), FormatError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_extrinsics(&dir.join(EXTRINSICS_FILE), &gt.extrinsics)?;
    let path = dir.join(GT_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    for r in &gt.records {
        let line = GtLine {
            timestamp: r.timestamp,
            joints: r.joints.iter().map(|(j, p)| (j.name().to_owned(), [p.x, p.y, p.z])).collect(),
            torso_direction: r.torso_direction.map(|d| [d.x, d.y, d.z]),
            gaze_direction: r.gaze_direction.map(|d| [d.x, d.y, d.z]),
        };
        serde_json::to_writer(&mut out, &line).expect("plain data serializes");
        out.write_all(b"\n").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

// ---------------------------------------------------------------------------
// Results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadingRecord {
    /// Whether this frame produced a raw measurement.
    pub valid: bool,
    pub raw_heading: Option<f64>,
    pub smoothed_heading: Option<f64>,
    /// Heading quaternion `[w, x, y, z]` of the raw measurement.
    pub quaternion: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FovRecord {
    pub inside: bool,
    pub offset: f64,
}

/// One `(frame, track)` line of pipeline output. Joint positions are in the
/// social frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub timestamp: f64,
    pub track_id: u64,
    pub joints3d: BTreeMap<String, [f64; 3]>,
    pub torso: HeadingRecord,
    pub gaze: HeadingRecord,
    pub fov: Option<FovRecord>,
}

impl ResultRecord {
    pub fn set_skeleton(&mut self, s: &Skeleton3D) {
        self.joints3d = joints_to_map(s.present().collect::<Vec<_>>().iter().map(|(j, p)| (*j, p)));
    }

    /// Rebuilds the skeleton; derived joints are recomputed from the
    /// measured ones.
    pub fn skeleton(&self) -> Result<Skeleton3D, String> {
        let mut s = Skeleton3D::from_joints(self.timestamp, map_to_joints(&self.joints3d)?);
        s.track_id = Some(self.track_id);
        Ok(s)
    }
}

/// Streaming writer; one JSON object per line, flushed on [`finish`](Self::finish).
pub struct ResultWriter<W: Write> {
    out: W,
}

impl ResultWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { out: BufWriter::new(File::create(path)?) })
    }
}

impl<W: Write> ResultWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &ResultRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record).map_err(io::Error::other)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_results<'a>(records: impl IntoIterator<Item = &'a ResultRecord>, path: &Path) -> Result<(), FormatError> {
    let mut w = ResultWriter::create(path).map_err(io_err(path))?;
    for r in records {
        w.write(r).map_err(io_err(path))?;
    }
    w.finish().map_err(io_err(path))?;
    Ok(())
}

pub fn parse_result_line(line: &str) -> Result<ResultRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Reads a result stream; timestamps must be non-decreasing (several tracks
/// may share a frame).
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, FormatError> {
    let mut out: Vec<ResultRecord> = Vec::new();
    for_each_line(path, |line, text| {
        let r: ResultRecord = parse_line(path, line, text)?;
        if let Err(message) = r.skeleton() {
            return Err(FormatError::MalformedLine { path: path.to_owned(), line, message });
        }
        if let Some(prev) = out.last() {
            if r.timestamp < prev.timestamp {
                return Err(FormatError::NonMonotonicTimestamp {
                    path: path.to_owned(),
                    line,
                    previous: prev.timestamp,
                    timestamp: r.timestamp,
                });
            }
        }
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn minimal_pgm_bytes() {
        let f = DepthFrame::new(2, 2, vec![0, 1, 2, 3], 0.0).unwrap();
        let bytes = encode_pgm16(&f);
        let mut expected = b"P5\n2 2\n65535\n".to_vec();
        expected.extend_from_slice(&[0, 0, 0, 1, 0, 2, 0, 3]);
        assert_eq!(bytes, expected);
        assert_eq!(decode_pgm16(&bytes).unwrap(), f);
    }

    #[test]
    fn pgm_is_big_endian() {
        let f = DepthFrame::new(1, 1, vec![0x1234], 0.0).unwrap();
        assert_eq!(&encode_pgm16(&f)[13..], &[0x12, 0x34]);
    }

    #[test]
    fn pgm_header_comments() {
        let mut bytes = b"P5 # depth\n# more\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x07, 0xd0]);
        assert_eq!(decode_pgm16(&bytes).unwrap().data(), &[2000]);
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(decode_pgm16(b"P2\n1 1\n65535\n00"), Err(PgmError::BadMagic)));
        assert!(matches!(decode_pgm16(b"P5\n1 1\n255\n\x01"), Err(PgmError::BadMaxval(255))));
        assert!(matches!(
            decode_pgm16(b"P5\n2 2\n65535\n\x00\x01"),
            Err(PgmError::TruncatedData { expected: 8, found: 2 })
        ));
        assert!(matches!(decode_pgm16(b"P5\n1 1\n65535\n\x00\x01\x02"), Err(PgmError::TrailingData { offset: 15 })));
        assert!(matches!(decode_pgm16(b"P5\nx 1\n65535\n"), Err(PgmError::BadHeader { offset: 3, .. })));
        assert!(matches!(decode_pgm16(b"P5\n1 1\n65535"), Err(PgmError::BadHeader { .. })));
    }

    fn sample_record() -> ResultRecord {
        let mut joints3d = BTreeMap::new();
        joints3d.insert("eye.L".to_owned(), [1.95, -0.03, 0.35]);
        ResultRecord {
            timestamp: 1.0 / 3.0,
            track_id: 4,
            joints3d,
            torso: HeadingRecord { valid: false, raw_heading: None, smoothed_heading: Some(3.0), quaternion: None },
            gaze: HeadingRecord {
                valid: true,
                raw_heading: Some(-3.1),
                smoothed_heading: Some(-3.09),
                quaternion: Some([0.1, 0.0, 0.0, 0.99498743710662]),
            },
            fov: Some(FovRecord { inside: true, offset: 0.25 }),
        }
    }

    #[test]
    fn result_line_shape() {
        let text = serde_json::to_string(&sample_record()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["timestamp", "track_id", "joints3d", "torso", "gaze", "fov"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["fov"]["inside"], true);
        assert_eq!(v["torso"]["raw_heading"], serde_json::Value::Null);
        assert!(parse_result_line(&format!("{text} x")).is_err());
    }

    #[test]
    fn empty_result_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_results(&[], &path).unwrap();
        assert_eq!(fs::read(&path).unwrap().len(), 0);
        assert!(read_results(&path).unwrap().is_empty());
    }

    #[test]
    fn results_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let records = vec![sample_record(), ResultRecord { timestamp: 0.5, ..sample_record() }];
        write_results(&records, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), records);
        fs::write(&path, "{\"timestamp\": 1}\n").unwrap();
        assert!(matches!(read_results(&path), Err(FormatError::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn extrinsics_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let e = Extrinsics::new(
            nalgebra::Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.25),
        )
        .unwrap();
        write_extrinsics(&path, &e).unwrap();
        assert_eq!(read_extrinsics(&path).unwrap(), e);
        fs::write(&path, r#"{"camera_to_world": [2,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}"#).unwrap();
        assert!(matches!(
            read_extrinsics(&path),
            Err(FormatError::Geometry { source: GeometryError::NonRigidExtrinsics(_), .. })
        ));
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1u32..16, h in 1u32..16, seed in any::<u64>()) {
            let data: Vec<u16> = (0..w * h).map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 48) as u16).collect();
            let f = DepthFrame::new(w, h, data, 0.0).unwrap();
            let back = decode_pgm16(&encode_pgm16(&f)).unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn result_line_round_trip(t in 0.0..1e4f64, h in -PI..PI, x in -10.0..10.0f64, id in any::<u64>()) {
            let mut r = sample_record();
            r.timestamp = t;
            r.track_id = id;
            r.gaze.raw_heading = Some(h);
            r.joints3d.insert("nose".into(), [x, x / 3.0, -x]);
            let back = parse_result_line(&serde_json::to_string(&r).unwrap()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
