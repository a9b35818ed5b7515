//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reader and writer.
//!
//! Only the parts of the header needed by the toolkit are interpreted:
//! `dim`, `datatype`, `bitpix`, `pixdim[1..3]`, `vox_offset`,
//! `scl_slope`/`scl_inter`, and the translation column of the sform (or the
//! qform offsets when no sform is set). Rotations are ignored. Gzip input is
//! detected from the stream magic, not from the file name.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Grid, LabelMap, ScalarVolume, VolumeKind};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const NIFTI2_HEADER_SIZE: i32 = 540;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const SROW_Y: usize = 296;
    pub const SROW_Z: usize = 312;
    pub const MAGIC: usize = 344;
}

const KIND_TAG: &str = "petseg kind=";

/// On-disk voxel datatypes this reader accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDtype {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl NiftiDtype {
    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(NiftiDtype::UInt8),
            4 => Ok(NiftiDtype::Int16),
            8 => Ok(NiftiDtype::Int32),
            16 => Ok(NiftiDtype::Float32),
            64 => Ok(NiftiDtype::Float64),
            other => Err(Error::Unsupported(format!("NIfTI datatype code {other}"))),
        }
    }

    pub fn code(self) -> i16 {
        match self {
            NiftiDtype::UInt8 => 2,
            NiftiDtype::Int16 => 4,
            NiftiDtype::Int32 => 8,
            NiftiDtype::Float32 => 16,
            NiftiDtype::Float64 => 64,
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            NiftiDtype::UInt8 => 1,
            NiftiDtype::Int16 => 2,
            NiftiDtype::Int32 | NiftiDtype::Float32 => 4,
            NiftiDtype::Float64 => 8,
        }
    }

    fn can_hold(self, v: f64) -> bool {
        match self {
            NiftiDtype::UInt8 => v.fract() == 0.0 && (0.0..=255.0).contains(&v),
            NiftiDtype::Int16 => v.fract() == 0.0 && (f64::from(i16::MIN)..=f64::from(i16::MAX)).contains(&v),
            NiftiDtype::Int32 => v.fract() == 0.0 && (f64::from(i32::MIN)..=f64::from(i32::MAX)).contains(&v),
            NiftiDtype::Float32 => f64::from(v as f32).to_bits() == v.to_bits() || v.is_nan(),
            NiftiDtype::Float64 => true,
        }
    }
}

/// Parsed header fields plus the decoded voxel payload.
#[derive(Debug, Clone)]
struct RawImage {
    grid: Grid,
    channels: usize,
    data: Vec<f64>,
    kind: Option<VolumeKind>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::format(
            bytes.len(),
            format!("file holds {} bytes, shorter than the 348-byte header", bytes.len()),
        ));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let big_endian = match (le, be) {
        (348, _) => false,
        (_, 348) => true,
        (NIFTI2_HEADER_SIZE, _) | (_, NIFTI2_HEADER_SIZE) => {
            return Err(Error::Unsupported("NIfTI-2 files are not supported".into()))
        }
        _ => {
            return Err(Error::format(
                offsets::SIZEOF_HDR,
                format!("sizeof_hdr is {le}, expected 348"),
            ))
        }
    };
    let h = HeaderReader { bytes, big_endian };

    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    match magic {
        b"n+1\0" => {}
        b"ni1\0" => return Err(Error::Unsupported("two-file NIfTI (.hdr/.img) is not supported".into())),
        _ => {
            return Err(Error::format(
                offsets::MAGIC,
                format!("bad magic {magic:?}, expected \"n+1\\0\""),
            ))
        }
    }

    let dim: Vec<i16> = (0..8).map(|i| h.i16(offsets::DIM + 2 * i)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::format(
            offsets::DIM,
            format!("dim[0] = {ndim} out of range 1..7"),
        ));
    }
    let mut extent = [1usize; 7];
    for i in 1..=ndim as usize {
        let d = dim[i];
        if d < 1 {
            return Err(Error::format(
                offsets::DIM + 2 * i,
                format!("dim[{i}] = {d} must be positive"),
            ));
        }
        extent[i - 1] = d as usize;
    }
    // channels may live on the 4th (time) or 5th (vector) axis, not both
    let channels = match (extent[3], extent[4]) {
        (1, c) | (c, 1) => c,
        (t, c) => {
            return Err(Error::Unsupported(format!(
                "images with {t} time points and {c} components"
            )))
        }
    };
    if extent[5..].iter().any(|&d| d != 1) {
        return Err(Error::Unsupported(format!("dims {:?} beyond 5D", &dim[..])));
    }
    let dims = [extent[0], extent[1], extent[2]];

    let code = h.i16(offsets::DATATYPE);
    let dtype = NiftiDtype::from_code(code)?;
    let bitpix = h.i16(offsets::BITPIX);
    if bitpix as usize != dtype.byte_size() * 8 {
        return Err(Error::format(
            offsets::BITPIX,
            format!("bitpix {bitpix} inconsistent with datatype code {code}"),
        ));
    }

    let mut spacing = [0.0; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let off = offsets::PIXDIM + 4 * (i + 1);
        let v = f64::from(h.f32(off)).abs();
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::format(off, format!("pixdim[{}] = {v} must be positive", i + 1)));
        }
        *s = v;
    }

    let origin = if h.i16(offsets::SFORM_CODE) > 0 {
        [
            f64::from(h.f32(offsets::SROW_X + 12)),
            f64::from(h.f32(offsets::SROW_Y + 12)),
            f64::from(h.f32(offsets::SROW_Z + 12)),
        ]
    } else if h.i16(offsets::QFORM_CODE) > 0 {
        [
            f64::from(h.f32(offsets::QOFFSET_X)),
            f64::from(h.f32(offsets::QOFFSET_X + 4)),
            f64::from(h.f32(offsets::QOFFSET_X + 8)),
        ]
    } else {
        [0.0; 3]
    };
    let grid = Grid::new(dims, spacing, origin).map_err(|e| Error::format(offsets::DIM, e.to_string()))?;

    let vox_offset = h.f32(offsets::VOX_OFFSET);
    if !(vox_offset >= HEADER_SIZE as f32) || !vox_offset.is_finite() {
        return Err(Error::format(
            offsets::VOX_OFFSET,
            format!("vox_offset {vox_offset} lies inside the header"),
        ));
    }
    let start = vox_offset as usize;
    let n = grid.len() * channels;
    let end = start + n * dtype.byte_size();
    if bytes.len() < end {
        return Err(Error::format(
            bytes.len(),
            format!("voxel data truncated: need {end} bytes, have {}", bytes.len()),
        ));
    }
    let payload = &bytes[start..end];

    let slope = h.f32(offsets::SCL_SLOPE);
    let inter = h.f32(offsets::SCL_INTER);
    let scale = slope != 0.0 && slope.is_finite();
    let (slope, inter) = (f64::from(slope), f64::from(inter));

    let mut data = decode(payload, dtype, big_endian);
    if scale && !(slope == 1.0 && inter == 0.0) {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }

    let descrip = &bytes[offsets::DESCRIP..offsets::DESCRIP + 80];
    let descrip = String::from_utf8_lossy(descrip.split(|&b| b == 0).next().unwrap_or(&[]));
    let kind = descrip
        .strip_prefix(KIND_TAG)
        .and_then(|k| serde_json::from_value(serde_json::Value::String(k.trim().to_string())).ok());

    Ok(RawImage {
        grid,
        channels,
        data,
        kind,
    })
}

fn decode(payload: &[u8], dtype: NiftiDtype, big_endian: bool) -> Vec<f64> {
    macro_rules! conv {
        ($t:ty, $n:expr) => {
            payload
                .chunks_exact($n)
                .map(|c| {
                    let b: [u8; $n] = c.try_into().unwrap();
                    let v = if big_endian {
                        <$t>::from_be_bytes(b)
                    } else {
                        <$t>::from_le_bytes(b)
                    };
                    f64::from(v)
                })
                .collect()
        };
    }
    match dtype {
        NiftiDtype::UInt8 => payload.iter().map(|&b| f64::from(b)).collect(),
        NiftiDtype::Int16 => conv!(i16, 2),
        NiftiDtype::Int32 => conv!(i32, 4),
        NiftiDtype::Float32 => conv!(f32, 4),
        NiftiDtype::Float64 => conv!(f64, 8),
    }
}

/// Read a 3D NIfTI-1 volume. The kind is taken from the tag this toolkit
/// writes into `descrip`; untagged files load as `PET_SUV`.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let path = path.as_ref();
    let raw = parse(&read_all(path)?)?;
    let kind = raw.kind.unwrap_or(VolumeKind::PetSuv);
    single_channel(raw, path, kind)
}

/// Read a 3D NIfTI-1 volume and assign `kind`, ignoring any stored tag.
pub fn read_nifti_as(path: impl AsRef<Path>, kind: VolumeKind) -> Result<ScalarVolume> {
    let path = path.as_ref();
    let raw = parse(&read_all(path)?)?;
    single_channel(raw, path, kind)
}

fn single_channel(raw: RawImage, path: &Path, kind: VolumeKind) -> Result<ScalarVolume> {
    if raw.channels != 1 {
        return Err(Error::Unsupported(format!(
            "{}: expected a 3D volume, found {} channels",
            path.display(),
            raw.channels
        )));
    }
    ScalarVolume::new(raw.grid, raw.data, kind)
}

/// Read a binary mask; any voxel value other than 0 or 1 is a data error.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let vol = read_nifti_as(path, VolumeKind::PetSuv)?;
    BinaryMask::from_scalar(&vol).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Read a multi-channel image (channels on the 4th or 5th axis) as one
/// volume per channel. A 3D file yields a single channel.
pub fn read_nifti_channels(path: impl AsRef<Path>, kind: VolumeKind) -> Result<Vec<ScalarVolume>> {
    let path = path.as_ref();
    let raw = parse(&read_all(path)?)?;
    let n = raw.grid.len();
    raw.data
        .chunks_exact(n)
        .map(|c| ScalarVolume::new(raw.grid, c.to_vec(), kind))
        .collect()
}

struct Payload<'a> {
    grid: Grid,
    channels: usize,
    values: Box<dyn Iterator<Item = f64> + 'a>,
    dtype: NiftiDtype,
    kind: Option<VolumeKind>,
}

fn header_bytes(p: &Payload<'_>) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    let ndim: i16 = if p.channels > 1 { 4 } else { 3 };
    put_i16(&mut h, offsets::DIM, ndim);
    for i in 0..3 {
        put_i16(&mut h, offsets::DIM + 2 * (i + 1), p.grid.dims[i] as i16);
    }
    for i in 4..8 {
        put_i16(&mut h, offsets::DIM + 2 * i, 1);
    }
    put_i16(&mut h, offsets::DIM + 8, p.channels as i16);
    put_i16(&mut h, offsets::DATATYPE, p.dtype.code());
    put_i16(&mut h, offsets::BITPIX, (p.dtype.byte_size() * 8) as i16);
    put_f32(&mut h, offsets::PIXDIM, 1.0);
    for i in 0..3 {
        put_f32(&mut h, offsets::PIXDIM + 4 * (i + 1), p.grid.spacing[i] as f32);
    }
    for i in 4..8 {
        put_f32(&mut h, offsets::PIXDIM + 4 * i, 1.0);
    }
    put_f32(&mut h, offsets::VOX_OFFSET, VOX_OFFSET as f32);
    put_f32(&mut h, offsets::SCL_SLOPE, 1.0);
    put_f32(&mut h, offsets::SCL_INTER, 0.0);
    // millimeters, seconds
    h[offsets::XYZT_UNITS] = 2 | 8;
    if let Some(kind) = p.kind {
        let tag = format!("{KIND_TAG}{kind}");
        h[offsets::DESCRIP..offsets::DESCRIP + tag.len()].copy_from_slice(tag.as_bytes());
    }
    put_i16(&mut h, offsets::QFORM_CODE, 1);
    put_i16(&mut h, offsets::SFORM_CODE, 1);
    for i in 0..3 {
        put_f32(&mut h, offsets::QOFFSET_X + 4 * i, p.grid.origin[i] as f32);
    }
    for (row, off) in [offsets::SROW_X, offsets::SROW_Y, offsets::SROW_Z]
        .into_iter()
        .enumerate()
    {
        put_f32(&mut h, off + 4 * row, p.grid.spacing[row] as f32);
        put_f32(&mut h, off + 12, p.grid.origin[row] as f32);
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
    h
}

fn write_payload(p: Payload<'_>, path: &Path) -> Result<()> {
    let header = header_bytes(&p);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let mut sink: Box<dyn Write> = if gz {
        Box::new(GzEncoder::new(BufWriter::new(file), Compression::fast()))
    } else {
        Box::new(BufWriter::new(file))
    };
    let io = |e| Error::io(path, e);
    sink.write_all(&header).map_err(io)?;
    let mut buf = Vec::with_capacity(64 * 1024);
    let dtype = p.dtype;
    for v in p.values {
        match dtype {
            NiftiDtype::UInt8 => buf.push(v as u8),
            NiftiDtype::Int16 => buf.extend_from_slice(&(v as i16).to_le_bytes()),
            NiftiDtype::Int32 => buf.extend_from_slice(&(v as i32).to_le_bytes()),
            NiftiDtype::Float32 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
            NiftiDtype::Float64 => buf.extend_from_slice(&v.to_le_bytes()),
        }
        if buf.len() >= 60 * 1024 {
            sink.write_all(&buf).map_err(io)?;
            buf.clear();
        }
    }
    sink.write_all(&buf).map_err(io)?;
    sink.flush().map_err(io)?;
    Ok(())
}

/// Smallest float type that stores every value exactly.
fn lossless_float(data: &[f64]) -> NiftiDtype {
    if data.iter().all(|&v| NiftiDtype::Float32.can_hold(v)) {
        NiftiDtype::Float32
    } else {
        NiftiDtype::Float64
    }
}

/// Something that can be written as a NIfTI image.
pub trait NiftiWritable {
    fn grid(&self) -> &Grid;
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_>;
    fn default_dtype(&self) -> NiftiDtype;
    fn kind(&self) -> Option<VolumeKind>;
}

impl NiftiWritable for ScalarVolume {
    fn grid(&self) -> &Grid {
        ScalarVolume::grid(self)
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.data().iter().copied())
    }
    fn default_dtype(&self) -> NiftiDtype {
        lossless_float(self.data())
    }
    fn kind(&self) -> Option<VolumeKind> {
        Some(ScalarVolume::kind(self))
    }
}

impl NiftiWritable for BinaryMask {
    fn grid(&self) -> &Grid {
        BinaryMask::grid(self)
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.data().iter().map(|&v| f64::from(v)))
    }
    fn default_dtype(&self) -> NiftiDtype {
        NiftiDtype::UInt8
    }
    fn kind(&self) -> Option<VolumeKind> {
        None
    }
}

impl NiftiWritable for LabelMap {
    fn grid(&self) -> &Grid {
        LabelMap::grid(self)
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.data().iter().map(|&v| f64::from(v)))
    }
    fn default_dtype(&self) -> NiftiDtype {
        NiftiDtype::Int32
    }
    fn kind(&self) -> Option<VolumeKind> {
        None
    }
}

/// Write `vol` as NIfTI-1 (gzip-compressed when the path ends in `.gz`).
/// Scalar volumes are stored as float32 when that is lossless, float64
/// otherwise; masks as uint8 and label maps as int32.
pub fn write_nifti<V: NiftiWritable + ?Sized>(vol: &V, path: impl AsRef<Path>) -> Result<()> {
    let dtype = vol.default_dtype();
    write_nifti_as(vol, path, dtype)
}

/// Write with an explicit on-disk datatype. Values the datatype cannot hold
/// exactly are rejected.
pub fn write_nifti_as<V: NiftiWritable + ?Sized>(vol: &V, path: impl AsRef<Path>, dtype: NiftiDtype) -> Result<()> {
    if let Some(bad) = vol.values().find(|&v| !dtype.can_hold(v)) {
        return Err(Error::Data(format!("value {bad} is not representable as {dtype:?}")));
    }
    check_dims(vol.grid(), 1)?;
    write_payload(
        Payload {
            grid: *vol.grid(),
            channels: 1,
            values: vol.values(),
            dtype,
            kind: vol.kind(),
        },
        path.as_ref(),
    )
}

/// Write several same-grid volumes as one 4D image, channel on the 4th axis.
pub fn write_nifti_channels(channels: &[ScalarVolume], path: impl AsRef<Path>) -> Result<()> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Domain("no channels to write".into()))?;
    for c in channels {
        first.grid().ensure_same_sampling(c.grid(), "channel grids")?;
    }
    check_dims(first.grid(), channels.len())?;
    let all: Vec<f64> = channels.iter().flat_map(|c| c.data().iter().copied()).collect();
    let dtype = lossless_float(&all);
    write_payload(
        Payload {
            grid: *first.grid(),
            channels: channels.len(),
            values: Box::new(all.into_iter()),
            dtype,
            kind: Some(first.kind()),
        },
        path.as_ref(),
    )
}

fn check_dims(grid: &Grid, channels: usize) -> Result<()> {
    let max = i16::MAX as usize;
    if grid.dims.iter().any(|&d| d > max) || channels > max {
        return Err(Error::Unsupported(format!(
            "dims {:?} x {channels} exceed the NIfTI-1 limit of {max}",
            grid.dims
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_with(f: impl FnOnce(&mut Vec<u8>)) -> Vec<u8> {
        let g = Grid::with_spacing([1, 1, 1], [1.0; 3]).unwrap();
        let p = Payload {
            grid: g,
            channels: 1,
            values: Box::new(std::iter::empty()),
            dtype: NiftiDtype::UInt8,
            kind: None,
        };
        let mut h = header_bytes(&p);
        h.push(3);
        f(&mut h);
        h
    }

    #[test]
    fn parses_minimal_header() {
        let img = parse(&header_with(|_| {})).unwrap();
        assert_eq!(img.grid.dims, [1, 1, 1]);
        assert_eq!(img.data, vec![3.0]);
    }

    #[test]
    fn scaling_is_applied() {
        let bytes = header_with(|h| {
            h[offsets::SCL_SLOPE..offsets::SCL_SLOPE + 4].copy_from_slice(&2f32.to_le_bytes());
            h[offsets::SCL_INTER..offsets::SCL_INTER + 4].copy_from_slice(&1f32.to_le_bytes());
        });
        assert_eq!(parse(&bytes).unwrap().data, vec![7.0]);
    }

    #[test]
    fn zero_slope_means_no_scaling() {
        let bytes = header_with(|h| {
            h[offsets::SCL_SLOPE..offsets::SCL_SLOPE + 4].copy_from_slice(&0f32.to_le_bytes());
            h[offsets::SCL_INTER..offsets::SCL_INTER + 4].copy_from_slice(&5f32.to_le_bytes());
        });
        assert_eq!(parse(&bytes).unwrap().data, vec![3.0]);
    }

    #[test]
    fn bad_magic_reports_offset() {
        let bytes = header_with(|h| h[offsets::MAGIC] = b'x');
        match parse(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, offsets::MAGIC),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_datatype_names_code() {
        let bytes = header_with(|h| {
            h[offsets::DATATYPE..offsets::DATATYPE + 2].copy_from_slice(&512i16.to_le_bytes());
        });
        let err = parse(&bytes).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(err.to_string().contains("512"));
    }

    #[test]
    fn nifti2_is_rejected() {
        let bytes = header_with(|h| h[0..4].copy_from_slice(&540i32.to_le_bytes()));
        assert!(matches!(parse(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_header_and_payload() {
        assert!(matches!(parse(&[0u8; 10]), Err(Error::Format { offset: 10, .. })));
        let mut bytes = header_with(|_| {});
        bytes.pop();
        assert!(matches!(parse(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn big_endian_headers_are_read() {
        let mut h = vec![0u8; VOX_OFFSET];
        h[0..4].copy_from_slice(&348i32.to_be_bytes());
        for (i, d) in [3i16, 2, 1, 1].iter().enumerate() {
            h[offsets::DIM + 2 * i..offsets::DIM + 2 * i + 2].copy_from_slice(&d.to_be_bytes());
        }
        h[offsets::DATATYPE..offsets::DATATYPE + 2].copy_from_slice(&4i16.to_be_bytes());
        h[offsets::BITPIX..offsets::BITPIX + 2].copy_from_slice(&16i16.to_be_bytes());
        for i in 1..4 {
            h[offsets::PIXDIM + 4 * i..offsets::PIXDIM + 4 * i + 4].copy_from_slice(&1.5f32.to_be_bytes());
        }
        h[offsets::VOX_OFFSET..offsets::VOX_OFFSET + 4].copy_from_slice(&352f32.to_be_bytes());
        h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
        h.extend_from_slice(&(-3i16).to_be_bytes());
        h.extend_from_slice(&300i16.to_be_bytes());
        let img = parse(&h).unwrap();
        assert_eq!(img.data, vec![-3.0, 300.0]);
        assert_eq!(img.grid.spacing, [1.5; 3]);
    }

    #[test]
    fn float32_detection() {
        assert_eq!(lossless_float(&[0.5, 7.5, -2.0]), NiftiDtype::Float32);
        assert_eq!(lossless_float(&[0.1]), NiftiDtype::Float64);
    }
}
