//! On-disk frame stream: a text manifest plus raw per-frame rasters.
//!
//! ```text
//! <dir>/manifest.txt
//!     geomem-stream 1
//!     intrinsics <fx> <fy> <cx> <cy> <width> <height>
//!     frames <n>
//!     frame <id> <x> <y> <z> <pitch> <yaw>      (n lines)
//! <dir>/frame_<id>.depth   width*height f32, little-endian, row-major
//! <dir>/frame_<id>.conf    same layout
//! ```
//!
//! Row 0 of each raster is pixel row `v = 0`. The directory must hold exactly
//! the rasters the manifest lists.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose};
use crate::raster::{ConfidenceMap, DepthMap};

pub const MANIFEST: &str = "manifest.txt";
const HEADER: &str = "geomem-stream 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamEntry {
    pub id: u32,
    pub pose: Pose,
}

fn depth_name(id: u32) -> String {
    format!("frame_{id:06}.depth")
}

fn conf_name(id: u32) -> String {
    format!("frame_{id:06}.conf")
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes rasters as they arrive and the manifest on [`StreamWriter::finish`].
pub struct StreamWriter {
    dir: PathBuf,
    intrinsics: Intrinsics,
    entries: Vec<StreamEntry>,
}

impl StreamWriter {
    pub fn create(dir: impl AsRef<Path>, intrinsics: Intrinsics) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            intrinsics,
            entries: Vec::new(),
        })
    }

    pub fn push(
        &mut self,
        id: u32,
        pose: Pose,
        depth: &DepthMap,
        confidence: &ConfidenceMap,
    ) -> Result<()> {
        if self.entries.last().is_some_and(|e| e.id >= id) {
            return Err(crate::error::invalid(format!(
                "frame id {id} is not increasing"
            )));
        }
        if depth.width() != self.intrinsics.width
            || depth.height() != self.intrinsics.height
            || !depth.same_shape(confidence)
        {
            return Err(crate::error::invalid(
                "raster size does not match stream intrinsics",
            ));
        }
        fs::write(self.dir.join(depth_name(id)), encode_f32(depth.values()))?;
        fs::write(
            self.dir.join(conf_name(id)),
            encode_f32(confidence.values()),
        )?;
        self.entries.push(StreamEntry { id, pose });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let i = &self.intrinsics;
        let mut text = format!(
            "{HEADER}\nintrinsics {} {} {} {} {} {}\nframes {}\n",
            i.fx,
            i.fy,
            i.cx,
            i.cy,
            i.width,
            i.height,
            self.entries.len()
        );
        for e in &self.entries {
            let [x, y, z, pitch, yaw] = e.pose.to_array();
            text.push_str(&format!("frame {} {x} {y} {z} {pitch} {yaw}\n", e.id));
        }
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// A validated stream directory.
#[derive(Debug, Clone)]
pub struct FrameStream {
    dir: PathBuf,
    intrinsics: Intrinsics,
    entries: Vec<StreamEntry>,
}

fn manifest_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: format!("{MANIFEST}: {}", message.into()),
    }
}

impl FrameStream {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let mut lines = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            lines.push((offset, line.trim_end()));
            offset += line.len();
        }
        let mut it = lines.into_iter().filter(|(_, l)| !l.is_empty());
        let (off, header) = it
            .next()
            .ok_or_else(|| manifest_error(0, "empty manifest"))?;
        if header != HEADER {
            return Err(manifest_error(off, format!("expected `{HEADER}`")));
        }
        let nums = |off: usize, line: &str, key: &str, n: usize| -> Result<Vec<f64>> {
            let mut f = line.split_whitespace();
            if f.next() != Some(key) {
                return Err(manifest_error(off, format!("expected `{key}` line")));
            }
            let v: Vec<f64> = f
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| manifest_error(off, format!("bad number `{x}`")))
                })
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(manifest_error(off, format!("`{key}` needs {n} values")));
            }
            Ok(v)
        };
        let (off, line) = it
            .next()
            .ok_or_else(|| manifest_error(offset, "missing intrinsics"))?;
        let k = nums(off, line, "intrinsics", 6)?;
        let dim = |x: f64| -> Result<usize> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(manifest_error(off, "image size must be a positive integer"))
            }
        };
        let intrinsics = Intrinsics::new(k[0], k[1], k[2], k[3], dim(k[4])?, dim(k[5])?)
            .map_err(|e| manifest_error(off, e.to_string()))?;
        let (off, line) = it
            .next()
            .ok_or_else(|| manifest_error(offset, "missing frame count"))?;
        let n = nums(off, line, "frames", 1)?[0];
        if n < 0.0 || n.fract() != 0.0 {
            return Err(manifest_error(
                off,
                "frame count must be a non-negative integer",
            ));
        }
        let n = n as usize;
        let mut entries = Vec::with_capacity(n);
        for (off, line) in it.by_ref().take(n) {
            let v = nums(off, line, "frame", 6)?;
            if !(v[0] >= 0.0 && v[0] <= u32::MAX as f64 && v[0].fract() == 0.0) {
                return Err(manifest_error(off, "frame id must be a u32"));
            }
            let id = v[0] as u32;
            if entries.last().is_some_and(|e: &StreamEntry| e.id >= id) {
                return Err(manifest_error(off, format!("frame id {id} out of order")));
            }
            let pose = Pose::new(v[1], v[2], v[3], v[4], v[5])
                .map_err(|e| manifest_error(off, e.to_string()))?;
            entries.push(StreamEntry { id, pose });
        }
        if entries.len() != n {
            return Err(manifest_error(
                offset,
                format!("manifest lists {} of {n} frames", entries.len()),
            ));
        }
        if let Some((off, _)) = it.next() {
            return Err(manifest_error(off, "text after the last frame"));
        }
        let stream = Self {
            dir,
            intrinsics,
            entries,
        };
        stream.check_files()?;
        Ok(stream)
    }

    fn check_files(&self) -> Result<()> {
        let mut rasters = 0usize;
        for e in fs::read_dir(&self.dir)? {
            let name = e?.file_name();
            let name = name.to_string_lossy();
            if name.ends_with(".depth") || name.ends_with(".conf") {
                rasters += 1;
            }
        }
        if rasters != 2 * self.entries.len() {
            return Err(manifest_error(
                0,
                format!(
                    "{} poses listed but {rasters} raster files present",
                    self.entries.len()
                ),
            ));
        }
        let bytes = (self.intrinsics.width * self.intrinsics.height * 4) as u64;
        for e in &self.entries {
            for name in [depth_name(e.id), conf_name(e.id)] {
                let len = fs::metadata(self.dir.join(&name))
                    .map_err(|_| manifest_error(0, format!("missing raster {name}")))?
                    .len();
                if len != bytes {
                    return Err(Error::Format {
                        offset: len.min(bytes),
                        message: format!("{name}: {len} bytes, expected {bytes}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn entries(&self) -> &[StreamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn read_raster(&self, name: &str) -> Result<Vec<f32>> {
        let bytes = fs::read(self.dir.join(name))?;
        let expected = self.intrinsics.width * self.intrinsics.height * 4;
        if bytes.len() != expected {
            return Err(Error::Format {
                offset: bytes.len().min(expected) as u64,
                message: format!("{name}: {} bytes, expected {expected}", bytes.len()),
            });
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    /// Loads the rasters of the `index`-th manifest entry.
    pub fn load(&self, index: usize) -> Result<(DepthMap, ConfidenceMap)> {
        let e = self
            .entries
            .get(index)
            .ok_or_else(|| crate::error::invalid(format!("no frame {index}")))?;
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let wrap = |name: String, e: Error| match e {
            Error::InvalidArgument(m) => Error::Format {
                offset: 0,
                message: format!("{name}: {m}"),
            },
            other => other,
        };
        let dn = depth_name(e.id);
        let depth = DepthMap::new(w, h, self.read_raster(&dn)?).map_err(|err| wrap(dn, err))?;
        let cn = conf_name(e.id);
        let conf = ConfidenceMap::new(w, h, self.read_raster(&cn)?).map_err(|err| wrap(cn, err))?;
        Ok((depth, conf))
    }
}
