//! Binary checkpoint container. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "MEDSRCKP"
//! 8       4     format version (u32, currently 1)
//! 12      4     scale factor (u32)
//! 16      1     axis mode: 0 two axes, 1 one axis (rows), 2 one axis (cols)
//! 17      1     flags: bit0 second block, bit1 intermediate loss, bit2 short
//!               skips, bit3 long skip, bit4 relu before shuffle, bit5 relu on output
//! 18      2     reserved, zero
//! 20      4     base filters (u32)
//! 24      8     lambda (f64)
//! 32      4     array count (u32)
//! 36      ...   arrays, each:
//!                 u16 name length, UTF-8 name ("conv1.weight", "conv1.bias", ...)
//!                 u8 rank, rank x u32 extents
//!                 product(extents) x f32 values, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::model::{AxisMode, SrNet, SrNetConfig};
use super::shuffle::ShuffleAxis;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ConvLayer, Tensor};

pub const MAGIC: &[u8; 8] = b"MEDSRCKP";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes<T: Scalar>(net: &SrNet<T>) -> Vec<u8> {
    let c = &net.config;
    let mut out = Vec::with_capacity(64 + net.parameter_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(c.scale as u32).to_le_bytes());
    out.push(match c.axis_mode {
        AxisMode::TwoAxes => 0,
        AxisMode::OneAxis(ShuffleAxis::Rows) => 1,
        AxisMode::OneAxis(ShuffleAxis::Cols) => 2,
    });
    let flags = [
        c.enable_second_block,
        c.enable_intermediate_loss,
        c.enable_short_skips,
        c.enable_long_skip,
        c.relu_before_shuffle,
        c.relu_on_output,
    ]
    .iter()
    .enumerate()
    .fold(0u8, |acc, (bit, &on)| acc | ((on as u8) << bit));
    out.push(flags);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(c.base_filters as u32).to_le_bytes());
    out.extend_from_slice(&c.lambda.to_le_bytes());
    out.extend_from_slice(&((net.layers.len() * 2) as u32).to_le_bytes());
    for (idx, layer) in net.layers.iter().enumerate() {
        write_array(&mut out, &format!("conv{}.weight", idx + 1), &layer.weights);
        write_array(&mut out, &format!("conv{}.bias", idx + 1), &layer.bias);
    }
    out
}

fn write_array<T: Scalar>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(self.path, format!("truncated checkpoint at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8], path: &Path) -> Result<SrNet<T>> {
    let mut r = Reader { buf: bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let scale = r.u32()? as usize;
    let axis_mode = match r.u8()? {
        0 => AxisMode::TwoAxes,
        1 => AxisMode::OneAxis(ShuffleAxis::Rows),
        2 => AxisMode::OneAxis(ShuffleAxis::Cols),
        other => return Err(Error::format(path, format!("unknown axis mode {other}"))),
    };
    let flags = r.u8()?;
    r.take(2)?;
    let base_filters = r.u32()? as usize;
    let lambda = r.f64()?;
    let bit = |b: u8| flags & (1 << b) != 0;
    let config = SrNetConfig {
        scale,
        axis_mode,
        base_filters,
        enable_second_block: bit(0),
        enable_intermediate_loss: bit(1),
        enable_short_skips: bit(2),
        enable_long_skip: bit(3),
        lambda,
        relu_before_shuffle: bit(4),
        relu_on_output: bit(5),
    };
    config.validate().map_err(|e| Error::format(path, e.to_string()))?;

    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format(path, "array name is not UTF-8"))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::from_f64_lossy(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::format(path, format!("{name}: {e}")))?;
        arrays.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after last array"));
    }

    let mut layers = Vec::new();
    for idx in 0..config.layer_count() {
        let find = |suffix: &str| {
            let key = format!("conv{}.{suffix}", idx + 1);
            arrays
                .iter()
                .find(|(n, _)| *n == key)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::format(path, format!("missing array {key}")))
        };
        let layer = ConvLayer::new(find("weight")?, find("bias")?).map_err(|e| Error::format(path, e.to_string()))?;
        layers.push(layer);
    }
    SrNet::from_layers(config, layers).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save<T: Scalar>(net: &SrNet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(net);
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<SrNet<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
