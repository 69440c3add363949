use crate::error::{Error, Result};

/// Dimensions of a rank-4 feature tensor: channels, frames, joints, persons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub c: usize,
    pub t: usize,
    pub v: usize,
    pub m: usize,
}

impl Shape4 {
    pub const fn new(c: usize, t: usize, v: usize, m: usize) -> Self {
        Shape4 { c, t, v, m }
    }

    pub const fn len(&self) -> usize {
        self.c * self.t * self.v * self.m
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of entries in one channel block (`T·V·M`).
    pub const fn plane(&self) -> usize {
        self.t * self.v * self.m
    }

    pub fn with_channels(self, c: usize) -> Self {
        Shape4 { c, ..self }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.c, self.t, self.v, self.m]
    }
}

/// Row-major linear index with channels outermost and persons innermost.
pub fn flatten_index(shape: Shape4, c: usize, t: usize, v: usize, m: usize) -> Result<usize> {
    for (axis, index, len) in [("C", c, shape.c), ("T", t, shape.t), ("V", v, shape.v), ("M", m, shape.m)] {
        if index >= len {
            return Err(Error::Bounds { axis, index, len });
        }
    }
    Ok(((c * shape.t + t) * shape.v + v) * shape.m + m)
}

/// Dense `C×T×V×M` array of features with a name per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    shape: Shape4,
    data: Vec<f64>,
    channel_names: Vec<String>,
}

impl FeatureTensor {
    pub fn new(shape: Shape4, data: Vec<f64>, channel_names: Vec<String>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} ({} entries)",
                data.len(),
                shape.dims(),
                shape.len()
            )));
        }
        if channel_names.len() != shape.c {
            return Err(Error::Shape(format!("{} channel names for {} channels", channel_names.len(), shape.c)));
        }
        Ok(FeatureTensor { shape, data, channel_names })
    }

    pub fn zeros(shape: Shape4, channel_names: Vec<String>) -> Result<Self> {
        Self::new(shape, vec![0.0; shape.len()], channel_names)
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn get(&self, c: usize, t: usize, v: usize, m: usize) -> Result<f64> {
        Ok(self.data[flatten_index(self.shape, c, t, v, m)?])
    }

    /// Contiguous block holding channel `c`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.shape.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.shape.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    /// Copies channels `start..start + len` into a new tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.shape.c || len == 0 {
            return Err(Error::Shape(format!("channel slice {start}..{} outside 0..{}", start + len, self.shape.c)));
        }
        let p = self.shape.plane();
        FeatureTensor::new(
            self.shape.with_channels(len),
            self.data[start * p..(start + len) * p].to_vec(),
            self.channel_names[start..start + len].to_vec(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// One action instance: per-frame, per-person 3D joint coordinates in metres.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    frames: usize,
    joints: usize,
    persons: usize,
    /// `T×V×M×3`, xyz innermost.
    coords: Vec<f64>,
    pub label: Option<usize>,
    valid_frames: usize,
}

impl Clip {
    pub fn new(
        frames: usize,
        joints: usize,
        persons: usize,
        coords: Vec<f64>,
        label: Option<usize>,
        valid_frames: usize,
    ) -> Result<Self> {
        if frames == 0 || joints == 0 || persons == 0 {
            return Err(Error::Shape(format!("empty clip dims T={frames} V={joints} M={persons}")));
        }
        let want = frames * joints * persons * 3;
        if coords.len() != want {
            return Err(Error::Shape(format!("clip coords length {} != {want}", coords.len())));
        }
        if valid_frames == 0 || valid_frames > frames {
            return Err(Error::Shape(format!("valid_frames {valid_frames} outside 1..={frames}")));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!("non-finite coordinate at flat index {i}")));
        }
        Ok(Clip { frames, joints, persons, coords, label, valid_frames })
    }

    pub fn zeros(frames: usize, joints: usize, persons: usize) -> Result<Self> {
        Self::new(frames, joints, persons, vec![0.0; frames * joints * persons * 3], None, frames)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn persons(&self) -> usize {
        self.persons
    }

    pub fn valid_frames(&self) -> usize {
        self.valid_frames
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn offset(&self, t: usize, v: usize, m: usize) -> usize {
        ((t * self.joints + v) * self.persons + m) * 3
    }

    #[inline]
    pub fn point(&self, t: usize, v: usize, m: usize) -> [f64; 3] {
        let o = self.offset(t, v, m);
        [self.coords[o], self.coords[o + 1], self.coords[o + 2]]
    }

    /// Applies `f` to every joint position. Fails if `f` produces non-finite values.
    pub fn map_points(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Result<Clip> {
        let coords = self.coords.chunks_exact(3).flat_map(|p| f([p[0], p[1], p[2]])).collect();
        Clip::new(self.frames, self.joints, self.persons, coords, self.label, self.valid_frames)
    }

    /// Shape of any per-joint feature tensor built from this clip.
    pub fn feature_shape(&self, channels: usize) -> Shape4 {
        Shape4::new(channels, self.frames, self.joints, self.persons)
    }
}
