//! Binary snapshot of the global geometry and frame table.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic          4 bytes  "GMEM"
//! version        u16      (1)
//! frame_count    u32
//!   id           u32
//!   pose         5 x f64  x, y, z, pitch, yaw
//!   keyframe     u8       0 or 1
//! point_count    u64
//!   position     3 x f32
//!   source       u32
//!   confidence   f32
//! voxel_size     f64
//! max_per_voxel  u32
//! merge_radius   f64
//! ```
//!
//! Points are written in cell-creation order with each cell's points in rank
//! order, so re-inserting them rebuilds an identical voxel index. Pixel
//! payloads are not persisted.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::memory_store::{FrameRecord, GlobalGeometry, MapPoint};

pub const MAGIC: &[u8; 4] = b"GMEM";
pub const VERSION: u16 = 1;

pub fn encode_snapshot<'a>(
    geo: &GlobalGeometry,
    frames: impl IntoIterator<Item = &'a FrameRecord>,
) -> Vec<u8> {
    let frames: Vec<&FrameRecord> = frames.into_iter().collect();
    let mut out = Vec::with_capacity(32 + frames.len() * 45 + geo.len() * 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        out.extend_from_slice(&f.id.to_le_bytes());
        for c in f.pose.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.push(f.is_keyframe as u8);
    }
    out.extend_from_slice(&(geo.len() as u64).to_le_bytes());
    for p in geo.points() {
        for c in p.position {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&p.source.to_le_bytes());
        out.extend_from_slice(&p.confidence.to_le_bytes());
    }
    out.extend_from_slice(&geo.voxel_size().to_le_bytes());
    out.extend_from_slice(&(geo.max_per_voxel() as u32).to_le_bytes());
    out.extend_from_slice(&geo.merge_radius().to_le_bytes());
    out
}

pub fn save_snapshot<'a>(
    geo: &GlobalGeometry,
    frames: impl IntoIterator<Item = &'a FrameRecord>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_snapshot(geo, frames);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let mut a = [0u8; N];
        a.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(a)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take::<1>(what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(what)?))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }
    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(what)?))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(GlobalGeometry, Vec<FrameRecord>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take::<4>("magic")?;
    if &magic != MAGIC {
        r.pos = 0;
        return Err(r.err(format!("bad magic {magic:?}, expected \"GMEM\"")));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(r.err(format!("unsupported snapshot version {version}")));
    }
    let frame_count = r.u32("frame count")? as usize;
    if frame_count > r.remaining() / 45 {
        return Err(r.err(format!("frame count {frame_count} exceeds file size")));
    }
    let mut frames = Vec::with_capacity(frame_count);
    let mut last_id: Option<u32> = None;
    for _ in 0..frame_count {
        let start = r.pos;
        let id = r.u32("frame id")?;
        let mut c = [0f64; 5];
        for v in &mut c {
            *v = r.f64("pose")?;
        }
        let flag = r.u8("keyframe flag")?;
        if flag > 1 {
            return Err(Error::Format {
                offset: start as u64 + 44,
                message: format!("keyframe flag {flag}"),
            });
        }
        if last_id.is_some_and(|l| id <= l) {
            return Err(Error::Format {
                offset: start as u64,
                message: format!("frame id {id} out of order"),
            });
        }
        last_id = Some(id);
        let pose = Pose::new(c[0], c[1], c[2], c[3], c[4]).map_err(|e| Error::Format {
            offset: start as u64 + 4,
            message: e.to_string(),
        })?;
        frames.push(FrameRecord {
            id,
            pose,
            depth: None,
            confidence: None,
            is_keyframe: flag == 1,
        });
    }
    let point_count = r.u64("point count")?;
    if point_count > (r.remaining() / 20) as u64 {
        return Err(r.err(format!("point count {point_count} exceeds file size")));
    }
    let points_at = r.pos;
    r.pos += point_count as usize * 20;
    let voxel_size = r.f64("voxel size")?;
    let max_per_voxel = r.u32("max points per voxel")? as usize;
    let merge_radius = r.f64("merge radius")?;
    if r.remaining() != 0 {
        return Err(r.err(format!("{} trailing bytes", r.remaining())));
    }
    let mut geo = GlobalGeometry::with_merge_radius(voxel_size, max_per_voxel, merge_radius)
        .map_err(|e| Error::Format {
            offset: (bytes.len() - 20) as u64,
            message: e.to_string(),
        })?;
    let keyframes: std::collections::BTreeSet<u32> = frames
        .iter()
        .filter(|f| f.is_keyframe)
        .map(|f| f.id)
        .collect();
    r.pos = points_at;
    for _ in 0..point_count {
        let start = r.pos as u64;
        let position = [r.f32("position")?, r.f32("position")?, r.f32("position")?];
        let source = r.u32("source id")?;
        let confidence = r.f32("confidence")?;
        if !position.iter().all(|c| c.is_finite()) || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Format {
                offset: start,
                message: "invalid point record".into(),
            });
        }
        if !keyframes.contains(&source) {
            return Err(Error::Format {
                offset: start + 12,
                message: format!("point source {source} is not a keyframe"),
            });
        }
        if !geo.insert(MapPoint {
            position,
            source,
            confidence,
        }) {
            return Err(Error::Format {
                offset: start,
                message: "point rejected by voxel index".into(),
            });
        }
    }
    if geo.len() as u64 != point_count {
        return Err(Error::Format {
            offset: points_at as u64,
            message: "point table is not voxel-consistent".into(),
        });
    }
    Ok((geo, frames))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<(GlobalGeometry, Vec<FrameRecord>)> {
    decode_snapshot(&fs::read(path)?)
}
