//! Skeleton capture files, clip normalisation and the `ANGK1` tensor format.
//!
//! Capture text layout (one token group per line):
//!
//! ```text
//! <frame count>
//! per frame:   <body count>
//!   per body:  <tracking id> <9 more header values, ignored>
//!              <joint count>
//!              <x> <y> <z> [ignored columns ...]      (joint count lines)
//! ```
//!
//! `ANGK1` layout, all integers little-endian:
//!
//! ```text
//! "ANGK1\0" | C u32 | T u32 | V u32 | M u32 | name-block length u32
//! | names joined by '\n' | C·T·V·M f32 in flatten_index order
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::topology::SkeletonTopology;
use crate::types::{Clip, FeatureTensor, Shape4};

pub const TENSOR_MAGIC: [u8; 6] = *b"ANGK1\0";
const BODY_HEADER_FIELDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct RawBody {
    pub tracking_id: u64,
    pub joints: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence {
    pub frames: Vec<Vec<RawBody>>,
}

impl RawSequence {
    /// Rebuilds a raw sequence from the valid frames of a clip. Person slots
    /// whose joints are all exactly zero are treated as absent.
    pub fn from_clip(clip: &Clip) -> Self {
        let frames = (0..clip.valid_frames())
            .map(|t| {
                (0..clip.persons())
                    .filter_map(|m| {
                        let joints: Vec<[f64; 3]> = (0..clip.joints()).map(|v| clip.point(t, v, m)).collect();
                        let absent = joints.iter().all(|p| p.iter().all(|&x| x == 0.0));
                        (!absent).then_some(RawBody { tracking_id: m as u64, joints })
                    })
                    .collect()
            })
            .collect();
        RawSequence { frames }
    }
}

type SplitLines<'a> = std::iter::Enumerate<std::slice::Split<'a, u8, fn(&u8) -> bool>>;

/// Line cursor that skips blank lines and remembers 1-based line numbers.
struct Lines<'a> {
    lines: SplitLines<'a>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        let is_nl: fn(&u8) -> bool = |b| *b == b'\n';
        Lines { lines: bytes.split(is_nl).enumerate(), last: 0 }
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, raw) in self.lines.by_ref() {
            let line_no = i + 1;
            self.last = line_no;
            let text = std::str::from_utf8(raw).map_err(|_| Error::parse(line_no, "invalid UTF-8"))?;
            let text = text.trim();
            if !text.is_empty() {
                return Ok((line_no, text));
            }
        }
        Err(Error::parse(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn count(&mut self, what: &str) -> Result<(usize, usize)> {
        let (no, text) = self.next_line(what)?;
        let mut toks = text.split_whitespace();
        let n = toks
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(no, format!("malformed {what}: `{text}`")))?;
        if toks.next().is_some() {
            return Err(Error::parse(no, format!("malformed {what}: `{text}`")));
        }
        Ok((no, n))
    }
}

/// Parses a skeleton capture file. Every body must carry exactly
/// `topology.num_joints()` joints.
pub fn parse_skeleton_file(bytes: &[u8], topology: &SkeletonTopology) -> Result<RawSequence> {
    let mut lines = Lines::new(bytes);
    let (_, n_frames) = lines.count("frame count")?;
    let mut frames = Vec::new();
    for _ in 0..n_frames {
        let (_, n_bodies) = lines.count("body count")?;
        let mut bodies = Vec::new();
        for _ in 0..n_bodies {
            let (no, header) = lines.next_line("body header")?;
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.len() != BODY_HEADER_FIELDS {
                return Err(Error::parse(
                    no,
                    format!("body header has {} values, expected {BODY_HEADER_FIELDS}", fields.len()),
                ));
            }
            let tracking_id = fields[0]
                .parse::<u64>()
                .map_err(|_| Error::parse(no, format!("tracking id `{}` is not an integer", fields[0])))?;
            let (no, n_joints) = lines.count("joint count")?;
            if n_joints != topology.num_joints() {
                return Err(Error::parse(
                    no,
                    format!("body has {n_joints} joints, schema `{}` has {}", topology.name, topology.num_joints()),
                ));
            }
            let mut joints = Vec::with_capacity(n_joints);
            for _ in 0..n_joints {
                let (no, rec) = lines.next_line("joint record")?;
                let mut xyz = [0.0; 3];
                let mut toks = rec.split_whitespace();
                for slot in &mut xyz {
                    let tok = toks.next().ok_or_else(|| Error::parse(no, "joint record has fewer than 3 values"))?;
                    *slot = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(no, format!("`{tok}` is not a finite number")))?;
                }
                joints.push(xyz);
            }
            bodies.push(RawBody { tracking_id, joints });
        }
        frames.push(bodies);
    }
    Ok(RawSequence { frames })
}

/// Writes a sequence in the capture text layout. Auxiliary header and joint
/// columns are filled with zeros.
pub fn write_skeleton_text(seq: &RawSequence) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{}", seq.frames.len());
    for frame in &seq.frames {
        let _ = writeln!(out, "{}", frame.len());
        for body in frame {
            let _ = writeln!(out, "{} 0 1 1 1 1 0 0.0 0.0 2", body.tracking_id);
            let _ = writeln!(out, "{}", body.joints.len());
            for p in &body.joints {
                let _ = writeln!(out, "{:?} {:?} {:?} 0 0 0 0 0 0 0 0 2", p[0], p[1], p[2]);
            }
        }
    }
    out
}

/// Selects persons, translates to the first-frame pelvis of person 0 and pads
/// to `target_frames` by cyclic repetition.
///
/// Person slots are assigned by ascending tracking id over the whole
/// sequence; ids beyond `max_persons` are dropped. Absent bodies stay zero.
/// Sequences longer than `target_frames` are truncated.
pub fn normalize_clip(
    raw: &RawSequence,
    topology: &SkeletonTopology,
    target_frames: usize,
    max_persons: usize,
) -> Result<Clip> {
    if raw.frames.is_empty() {
        return Err(Error::Format("skeleton sequence has no frames".into()));
    }
    if target_frames == 0 || max_persons == 0 {
        return Err(Error::Config("target_frames and max_persons must be at least 1".into()));
    }
    let v = topology.num_joints();
    let ids: Vec<u64> = raw
        .frames
        .iter()
        .flatten()
        .map(|b| b.tracking_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .take(max_persons)
        .collect();
    let m = max_persons;
    let valid = raw.frames.len().min(target_frames);
    let pelvis = topology.pelvis();

    // (frame, slot) -> joints of the body kept in that slot
    let mut slots: Vec<Vec<Option<&RawBody>>> = vec![vec![None; m]; valid];
    for (t, frame) in raw.frames.iter().take(valid).enumerate() {
        for body in frame {
            if body.joints.len() != v {
                return Err(Error::Shape(format!("body with {} joints, schema has {v}", body.joints.len())));
            }
            if let Some(slot) = ids.iter().position(|&id| id == body.tracking_id) {
                slots[t][slot].get_or_insert(body);
            }
        }
    }

    let origin = slots.iter().find_map(|f| f[0]).map(|b| b.joints[pelvis]).unwrap_or([0.0; 3]);

    let mut coords = vec![0.0; target_frames * v * m * 3];
    for t in 0..target_frames {
        let src = &slots[t % valid];
        for (slot, body) in src.iter().enumerate() {
            let Some(body) = body else { continue };
            for (j, p) in body.joints.iter().enumerate() {
                let o = ((t * v + j) * m + slot) * 3;
                for k in 0..3 {
                    coords[o + k] = p[k] - origin[k];
                }
            }
        }
    }
    Clip::new(target_frames, v, m, coords, None, valid)
}

pub fn write_tensor<W: Write>(t: &FeatureTensor, mut sink: W) -> Result<usize> {
    let shape = t.shape();
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(&TENSOR_MAGIC);
    for d in shape.dims() {
        if d == 0 {
            return Err(Error::Format("tensor dimensions must be at least 1".into()));
        }
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        header.extend_from_slice(&d.to_le_bytes());
    }
    if t.channel_names().iter().any(|n| n.contains('\n')) {
        return Err(Error::Format("channel names may not contain newlines".into()));
    }
    let names = t.channel_names().join("\n");
    let names_len = u32::try_from(names.len()).map_err(|_| Error::Format("channel-name block too long".into()))?;
    header.extend_from_slice(&names_len.to_le_bytes());
    header.extend_from_slice(names.as_bytes());
    sink.write_all(&header)?;
    let mut payload = Vec::with_capacity(t.data().len() * 4);
    for &x in t.data() {
        payload.extend_from_slice(&(x as f32).to_le_bytes());
    }
    sink.write_all(&payload)?;
    Ok(header.len() + payload.len())
}

fn read_exact_or<R: Read>(src: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32<R: Read>(src: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(src, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads `n` bytes without trusting `n` for the up-front allocation.
pub(crate) fn read_bytes<R: Read>(src: &mut R, n: u64, what: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    src.take(n).read_to_end(&mut buf)?;
    if (buf.len() as u64) < n {
        return Err(Error::Format(format!("truncated {what}: expected {n} bytes, found {}", buf.len())));
    }
    Ok(buf)
}

pub fn read_tensor<R: Read>(mut source: R) -> Result<FeatureTensor> {
    let mut magic = [0u8; 6];
    read_exact_or(&mut source, &mut magic, "magic")?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("magic mismatch: expected ANGK1, found {magic:02x?}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = read_u32(&mut source, "header")? as usize;
        if *d == 0 {
            return Err(Error::Format("tensor dimension of 0".into()));
        }
    }
    let [c, t, v, m] = dims;
    let names_len = read_u32(&mut source, "header")?;
    let names = read_bytes(&mut source, names_len as u64, "channel-name block")?;
    let names = String::from_utf8(names).map_err(|_| Error::Format("channel names are not UTF-8".into()))?;
    let channel_names: Vec<String> = names.split('\n').map(str::to_string).collect();
    if channel_names.len() != c {
        return Err(Error::Format(format!("{} channel names for C={c}", channel_names.len())));
    }
    let n = (c as u64)
        .checked_mul(t as u64)
        .and_then(|x| x.checked_mul(v as u64))
        .and_then(|x| x.checked_mul(m as u64))
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("tensor too large".into()))?;
    let payload = read_bytes(&mut source, n, "payload")?;
    let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
    FeatureTensor::new(Shape4::new(c, t, v, m), data, channel_names)
}

pub fn write_tensor_file(t: &FeatureTensor, path: impl AsRef<Path>) -> Result<usize> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_tensor(t, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

/// Coordinate tensor (`jnt_x/y/z` channels) back into a clip.
pub fn clip_from_coords(t: &FeatureTensor, label: Option<usize>, valid_frames: usize) -> Result<Clip> {
    let s = t.shape();
    if s.c != 3 {
        return Err(Error::Shape(format!("coordinate tensor needs C=3, found C={}", s.c)));
    }
    let mut coords = vec![0.0; s.t * s.v * s.m * 3];
    let plane = s.plane();
    for k in 0..3 {
        for (i, &x) in t.data()[k * plane..(k + 1) * plane].iter().enumerate() {
            coords[i * 3 + k] = x;
        }
    }
    Clip::new(s.t, s.v, s.m, coords, label, valid_frames)
}
