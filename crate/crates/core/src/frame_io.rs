//! Frame rasters and clip containers.
//!
//! Two on-disk forms are supported:
//!
//! * `.sfr` container: magic `SFRM`, `u16` version (1), then little-endian
//!   `u32` width, `u32` height, `f32` fps, `u32` frame_count, followed by
//!   `frame_count` raw `u8` planes of `width * height` bytes each.
//! * A directory of binary PGM (`P5`, max-val 255) files, one frame per file,
//!   ordered by filename.
//!
//! Neither form stores timestamps; they are synthesized as `index / fps`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SFRM";
pub const VERSION: u16 = 1;
/// Size in bytes of the `.sfr` header.
pub const HEADER_SIZE: u64 = 22;
/// Frame rate assumed for PGM directories, which carry no rate of their own.
pub const DEFAULT_PGM_FPS: f32 = 1.0;

/// A single-channel 8-bit intensity raster.
#[derive(Debug, Clone, PartialEq)]
pub struct SonarFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major, `width * height` values.
    pub intensities: Vec<u8>,
    pub timestamp: f64,
    pub index: u64,
}

impl SonarFrame {
    pub fn new(width: u32, height: u32, intensities: Vec<u8>, index: u64, timestamp: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be at least 1x1"));
        }
        if intensities.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "frame {index}: {} intensities for a {width}x{height} raster",
                intensities.len()
            )));
        }
        Ok(Self {
            width,
            height,
            intensities,
            timestamp,
            index,
        })
    }

    /// A frame filled with a single intensity.
    pub fn filled(width: u32, height: u32, value: u8, index: u64, timestamp: f64) -> Self {
        Self {
            width,
            height,
            intensities: vec![value; width as usize * height as usize],
            timestamp,
            index,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.intensities[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.intensities[y as usize * w + x as usize] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipHeader {
    pub width: u32,
    pub height: u32,
    pub fps: f32,
    pub frame_count: u32,
}

impl ClipHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE as usize] {
        let mut out = [0u8; HEADER_SIZE as usize];
        out[0..4].copy_from_slice(MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        out[6..10].copy_from_slice(&self.width.to_le_bytes());
        out[10..14].copy_from_slice(&self.height.to_le_bytes());
        out[14..18].copy_from_slice(&self.fps.to_le_bytes());
        out[18..22].copy_from_slice(&self.frame_count.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE as usize {
            return Err(Error::MalformedHeader {
                offset: bytes.len() as u64,
                reason: format!("header needs {HEADER_SIZE} bytes, file has {}", bytes.len()),
            });
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::MalformedHeader {
                offset: 0,
                reason: "missing SFRM magic".into(),
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::MalformedHeader {
                offset: 4,
                reason: format!("unsupported version {version}"),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let width = u32_at(6);
        if width == 0 {
            return Err(Error::MalformedHeader {
                offset: 6,
                reason: "width is zero".into(),
            });
        }
        let height = u32_at(10);
        if height == 0 {
            return Err(Error::MalformedHeader {
                offset: 10,
                reason: "height is zero".into(),
            });
        }
        let fps = f32::from_le_bytes(bytes[14..18].try_into().unwrap());
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::MalformedHeader {
                offset: 14,
                reason: format!("fps must be positive, got {fps}"),
            });
        }
        let frame_count = u32_at(18);
        Ok(Self {
            width,
            height,
            fps,
            frame_count,
        })
    }

    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn file_size(&self) -> u64 {
        HEADER_SIZE + self.frame_count as u64 * self.frame_bytes()
    }
}

/// A decoded clip. `width`/`height` are zero only for an empty PGM directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub width: u32,
    pub height: u32,
    pub fps: f32,
    pub frames: Vec<SonarFrame>,
}

impl Clip {
    /// Builds a clip from frames that must all share dimensions.
    pub fn from_frames(frames: Vec<SonarFrame>, fps: f32) -> Result<Self> {
        let (width, height) = check_dims(&frames)?;
        Ok(Self {
            width,
            height,
            fps,
            frames,
        })
    }

    pub fn header(&self) -> ClipHeader {
        ClipHeader {
            width: self.width,
            height: self.height,
            fps: self.fps,
            frame_count: self.frames.len() as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn check_dims(frames: &[SonarFrame]) -> Result<(u32, u32)> {
    let Some(first) = frames.first() else {
        return Ok((0, 0));
    };
    for f in frames {
        if f.width != first.width || f.height != first.height {
            return Err(Error::DimensionMismatch {
                expected_width: first.width,
                expected_height: first.height,
                width: f.width,
                height: f.height,
                context: Some(format!("frame {}", f.index)),
            });
        }
        if f.intensities.len() != f.width as usize * f.height as usize {
            return Err(Error::invalid(format!(
                "frame {}: {} intensities for a {}x{} raster",
                f.index,
                f.intensities.len(),
                f.width,
                f.height
            )));
        }
    }
    Ok((first.width, first.height))
}

/// Timestamp synthesized for frame `index` of a clip recorded at `fps`.
pub fn synth_timestamp(index: u64, fps: f32) -> f64 {
    index as f64 / fps as f64
}

/// Reads a `.sfr` container or a directory of PGM frames.
pub fn read_clip(path: impl AsRef<Path>) -> Result<Clip> {
    let path = path.as_ref();
    if path.is_dir() {
        return read_pgm_dir(path, DEFAULT_PGM_FPS);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

pub fn decode_container(bytes: &[u8]) -> Result<Clip> {
    let header = ClipHeader::parse(bytes)?;
    let plane = header.frame_bytes();
    let payload = &bytes[HEADER_SIZE as usize..];
    let mut frames = Vec::with_capacity(header.frame_count as usize);
    for i in 0..header.frame_count as u64 {
        let start = i * plane;
        let available = (payload.len() as u64).saturating_sub(start);
        if available < plane {
            return Err(Error::TruncatedPayload {
                offset: HEADER_SIZE + start,
                expected: plane,
                found: available,
            });
        }
        let data = payload[start as usize..(start + plane) as usize].to_vec();
        frames.push(SonarFrame {
            width: header.width,
            height: header.height,
            intensities: data,
            timestamp: synth_timestamp(i, header.fps),
            index: i,
        });
    }
    let expected_end = header.frame_count as u64 * plane;
    if (payload.len() as u64) > expected_end {
        return Err(Error::MalformedHeader {
            offset: HEADER_SIZE + expected_end,
            reason: format!(
                "{} trailing bytes after {} frames",
                payload.len() as u64 - expected_end,
                header.frame_count
            ),
        });
    }
    Ok(Clip {
        width: header.width,
        height: header.height,
        fps: header.fps,
        frames,
    })
}

pub fn encode_container(frames: &[SonarFrame], fps: f32) -> Result<Vec<u8>> {
    let header = container_header(frames, fps)?;
    let mut out = Vec::with_capacity(header.file_size() as usize);
    out.extend_from_slice(&header.to_bytes());
    for f in frames {
        out.extend_from_slice(&f.intensities);
    }
    Ok(out)
}

fn container_header(frames: &[SonarFrame], fps: f32) -> Result<ClipHeader> {
    let (width, height) = check_dims(frames)?;
    if frames.is_empty() {
        return Err(Error::invalid("cannot write a clip with no frames: dimensions unknown"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::invalid(format!("fps must be positive, got {fps}")));
    }
    let frame_count = u32::try_from(frames.len())
        .map_err(|_| Error::invalid("more than u32::MAX frames"))?;
    Ok(ClipHeader {
        width,
        height,
        fps,
        frame_count,
    })
}

/// Writes frames as a `.sfr` container. Dimensions are validated before the
/// file is created.
pub fn write_clip(path: impl AsRef<Path>, frames: &[SonarFrame], fps: f32) -> Result<()> {
    let path = path.as_ref();
    let header = container_header(frames, fps)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&header.to_bytes()).map_err(io)?;
    for f in frames {
        w.write_all(&f.intensities).map_err(io)?;
    }
    w.flush().map_err(io)
}

// ---------------------------------------------------------------------------
// PGM

pub fn encode_pgm(frame: &SonarFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.intensities);
    out
}

/// Parses a binary PGM. Returns `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    let mut pos = 0usize;
    let bad = |offset: usize, reason: &str| Error::MalformedHeader {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(bad(0, "missing P5 magic"));
    }
    pos += 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(bad(pos, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad(pos, "zero dimension"));
    }
    if maxval != 255 {
        return Err(bad(pos, "only max-val 255 is supported"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad(pos, "expected single whitespace before raster")),
    }
    let need = width as u64 * height as u64;
    let have = (bytes.len() - pos) as u64;
    if have < need {
        return Err(Error::TruncatedPayload {
            offset: pos as u64,
            expected: need,
            found: have,
        });
    }
    Ok((width, height, bytes[pos..pos + need as usize].to_vec()))
}

/// Reads every `*.pgm` file in `dir`, sorted by filename.
pub fn read_pgm_dir(dir: impl AsRef<Path>, fps: f32) -> Result<Clip> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();

    let mut frames: Vec<SonarFrame> = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        let (width, height, data) = decode_pgm(&bytes).map_err(|e| match e {
            Error::MalformedHeader { offset, reason } => Error::MalformedHeader {
                offset,
                reason: format!("{}: {reason}", p.display()),
            },
            other => other,
        })?;
        if let Some(first) = frames.first() {
            if first.width != width || first.height != height {
                return Err(Error::DimensionMismatch {
                    expected_width: first.width,
                    expected_height: first.height,
                    width,
                    height,
                    context: Some(format!("{} at byte 0", p.display())),
                });
            }
        }
        frames.push(SonarFrame {
            width,
            height,
            intensities: data,
            timestamp: synth_timestamp(i as u64, fps),
            index: i as u64,
        });
    }
    let (width, height) = frames.first().map_or((0, 0), |f| (f.width, f.height));
    Ok(Clip {
        width,
        height,
        fps,
        frames,
    })
}

/// Writes frames as `frame_000000.pgm`, `frame_000001.pgm`, ... into `dir`,
/// creating it if needed.
pub fn write_pgm_dir(dir: impl AsRef<Path>, frames: &[SonarFrame]) -> Result<()> {
    let dir = dir.as_ref();
    check_dims(frames)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        let p = dir.join(format!("frame_{i:06}.pgm"));
        fs::write(&p, encode_pgm(f)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
