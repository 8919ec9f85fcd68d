//! Bit-plane disaggregation of value blocks.
//!
//! A block of `m` words of format `1+E+M` becomes `N` planes of `m` bits.
//! Plane order is `[sgn, exp_0 .. exp_{E-1}, man_0 .. man_{M-1}]` with index
//! 0 the least significant bit of each field. Inside a plane, value `j`
//! sits at bit `j % 8` of byte `j / 8`.

use std::fmt;

use crate::error::{Error, Result};
use crate::numfmt::{low_mask, FloatFormat, ReducedSpec, Rounding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaneId {
    Sign,
    Exp(u32),
    Man(u32),
}

impl PlaneId {
    pub fn index(self, format: FloatFormat) -> usize {
        match self {
            PlaneId::Sign => 0,
            PlaneId::Exp(i) => 1 + i as usize,
            PlaneId::Man(i) => 1 + format.exp_bits as usize + i as usize,
        }
    }

    pub fn from_index(format: FloatFormat, index: usize) -> Option<Self> {
        let e = format.exp_bits as usize;
        let n = format.bits() as usize;
        match index {
            0 => Some(PlaneId::Sign),
            i if i <= e => Some(PlaneId::Exp((i - 1) as u32)),
            i if i < n => Some(PlaneId::Man((i - 1 - e) as u32)),
            _ => None,
        }
    }

    /// Bit position of this plane inside a packed word.
    pub fn word_bit(self, format: FloatFormat) -> u32 {
        match self {
            PlaneId::Sign => format.exp_bits + format.man_bits,
            PlaneId::Exp(i) => format.man_bits + i,
            PlaneId::Man(i) => i,
        }
    }
}

impl fmt::Display for PlaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaneId::Sign => f.write_str("sgn"),
            PlaneId::Exp(i) => write!(f, "exp_{i}"),
            PlaneId::Man(i) => write!(f, "man_{i}"),
        }
    }
}

#[inline]
pub fn plane_bytes(len: usize) -> usize {
    len.div_ceil(8)
}

#[inline]
fn get_bit(plane: &[u8], j: usize) -> u32 {
    ((plane[j >> 3] >> (j & 7)) & 1) as u32
}

/// Scatter bit `bit` of every word into a packed plane.
fn gather_plane(values: &[u32], bit: u32, out: &mut [u8]) {
    for (byte, chunk) in out.iter_mut().zip(values.chunks(8)) {
        let mut b = 0u8;
        for (k, &v) in chunk.iter().enumerate() {
            b |= (((v >> bit) & 1) as u8) << k;
        }
        *byte = b;
    }
}

/// The N x m bit-plane matrix of one value block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneImage {
    format: FloatFormat,
    len: usize,
    planes: Vec<Vec<u8>>,
}

pub fn disaggregate(values: &[u32], format: FloatFormat) -> Result<PlaneImage> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| !format.fits(v)) {
        return Err(Error::FormatMismatch {
            index,
            value,
            bits: format.bits(),
        });
    }
    let n = format.bits() as usize;
    let mut planes = vec![vec![0u8; plane_bytes(values.len())]; n];
    for (index, plane) in planes.iter_mut().enumerate() {
        let bit = PlaneId::from_index(format, index).unwrap().word_bit(format);
        gather_plane(values, bit, plane);
    }
    Ok(PlaneImage {
        format,
        len: values.len(),
        planes,
    })
}

impl PlaneImage {
    pub fn from_planes(format: FloatFormat, len: usize, planes: Vec<Vec<u8>>) -> Result<Self> {
        if planes.len() != format.bits() as usize {
            return Err(Error::IncompleteFetch(format!(
                "{} planes supplied for a {}-plane format",
                planes.len(),
                format.bits()
            )));
        }
        for (i, p) in planes.iter().enumerate() {
            check_plane_len(i, p, len)?;
        }
        Ok(Self { format, len, planes })
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn plane(&self, id: PlaneId) -> &[u8] {
        &self.planes[id.index(self.format)]
    }

    pub fn planes(&self) -> &[Vec<u8>] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Vec<u8>> {
        self.planes
    }

    /// Total stored bits, `m * N`.
    pub fn stored_bits(&self) -> usize {
        self.len * self.format.bits() as usize
    }

    pub fn select(&self, spec: &ReducedSpec) -> Result<PlaneSet> {
        select_planes(self.format, spec)
    }

    /// Copy out the planes named by `set`.
    pub fn fetch(&self, set: &PlaneSet) -> FetchedPlanes {
        let mut f = FetchedPlanes::new(self.format, self.len);
        for &i in set.indices() {
            f.planes[i] = Some(self.planes[i].clone());
        }
        f
    }

    pub fn reassemble_full(&self) -> Vec<u32> {
        reassemble(self.format, self.len, |i| Some(self.planes[i].as_slice())).unwrap()
    }
}

fn check_plane_len(index: usize, plane: &[u8], len: usize) -> Result<()> {
    if plane.len() != plane_bytes(len) {
        return Err(Error::IncompleteFetch(format!(
            "plane {index} holds {} bytes, expected {}",
            plane.len(),
            plane_bytes(len)
        )));
    }
    Ok(())
}

fn reassemble<'a>(format: FloatFormat, len: usize, plane: impl Fn(usize) -> Option<&'a [u8]>) -> Result<Vec<u32>> {
    let mut out = vec![0u32; len];
    for index in 0..format.bits() as usize {
        let bits = plane(index)
            .ok_or_else(|| Error::IncompleteFetch(format!("plane {index} missing for full reassembly")))?;
        let shift = PlaneId::from_index(format, index).unwrap().word_bit(format);
        for (j, w) in out.iter_mut().enumerate() {
            *w |= get_bit(bits, j) << shift;
        }
    }
    Ok(out)
}

/// Plane positions needed to serve one reduced-precision request.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlaneSet {
    // ascending plane index (field order)
    indices: Vec<usize>,
}

impl PlaneSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn ids(&self, format: FloatFormat) -> Vec<PlaneId> {
        self.indices
            .iter()
            .map(|&i| PlaneId::from_index(format, i).unwrap())
            .collect()
    }
}

/// `{sgn} ∪ {exp_{E-r_E-d_E} .. exp_{E-1}} ∪ {man_{M-r_M-d_M} .. man_{M-1}}`
pub fn select_planes(format: FloatFormat, spec: &ReducedSpec) -> Result<PlaneSet> {
    spec.validate(format)?;
    let e = format.exp_bits;
    let m = format.man_bits;
    let mut indices = vec![PlaneId::Sign.index(format)];
    indices.extend((e - spec.exp_keep - spec.exp_guard..e).map(|i| PlaneId::Exp(i).index(format)));
    indices.extend((m - spec.man_keep - spec.man_guard..m).map(|i| PlaneId::Man(i).index(format)));
    Ok(PlaneSet { indices })
}

/// A partial plane image as delivered by the fetch path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchedPlanes {
    format: FloatFormat,
    len: usize,
    planes: Vec<Option<Vec<u8>>>,
}

impl FetchedPlanes {
    pub fn new(format: FloatFormat, len: usize) -> Self {
        Self {
            format,
            len,
            planes: vec![None; format.bits() as usize],
        }
    }

    pub fn insert(&mut self, index: usize, bytes: Vec<u8>) -> Result<()> {
        if index >= self.planes.len() {
            return Err(Error::IncompleteFetch(format!("plane index {index} out of range")));
        }
        check_plane_len(index, &bytes, self.len)?;
        self.planes[index] = Some(bytes);
        Ok(())
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn present(&self) -> usize {
        self.planes.iter().filter(|p| p.is_some()).count()
    }

    /// Bits read to build this partial image.
    pub fn bits_read(&self) -> usize {
        self.present() * self.len
    }

    fn require(&self, index: usize) -> Result<&[u8]> {
        self.planes[index].as_deref().ok_or_else(|| {
            let id = PlaneId::from_index(self.format, index).unwrap();
            Error::IncompleteFetch(format!("plane {id} was not fetched"))
        })
    }

    pub fn reassemble_full(&self) -> Result<Vec<u32>> {
        reassemble(self.format, self.len, |i| self.planes[i].as_deref())
    }
}

/// Emit the `(1 + r_E + r_M)`-bit words selected by `spec`.
///
/// Output layout is `sign | top r_E exponent bits | top r_M mantissa bits`.
/// Under round-to-nearest the kept magnitude is built from every fetched
/// exponent plane (kept plus guards) followed by the kept mantissa planes;
/// the mantissa guard planes decide the increment, the carry ripples up
/// through the exponent guards into the kept exponent, and the exponent
/// guard bits are then dropped. A carry out of the top kept exponent bit
/// saturates the kept exponent and mantissa to all ones.
pub fn assemble(fetched: &FetchedPlanes, spec: &ReducedSpec) -> Result<Vec<u32>> {
    let format = fetched.format;
    let set = select_planes(format, spec)?;
    for &i in set.indices() {
        fetched.require(i)?;
    }
    let (e, m) = (format.exp_bits, format.man_bits);
    let len = fetched.len;
    let r_e = spec.exp_keep;
    let r_m = spec.man_keep;

    // Kept magnitude, optionally widened by exponent guard bits between the
    // kept exponent and the kept mantissa.
    let d_e = if spec.rounding == Rounding::Nearest { spec.exp_guard } else { 0 };
    let mut magnitude = vec![0u32; len];
    for k in 0..r_m {
        let plane = fetched.require(PlaneId::Man(m - r_m + k).index(format))?;
        for (j, w) in magnitude.iter_mut().enumerate() {
            *w |= get_bit(plane, j) << k;
        }
    }
    for k in 0..r_e + d_e {
        let plane = fetched.require(PlaneId::Exp(e - r_e - d_e + k).index(format))?;
        for (j, w) in magnitude.iter_mut().enumerate() {
            *w |= get_bit(plane, j) << (r_m + k);
        }
    }

    if spec.rounding == Rounding::Nearest {
        let d_m = spec.man_guard;
        let mut guard = vec![0u32; len];
        for k in 0..d_m {
            let plane = fetched.require(PlaneId::Man(m - r_m - d_m + k).index(format))?;
            for (j, g) in guard.iter_mut().enumerate() {
                *g |= get_bit(plane, j) << k;
            }
        }
        let width = r_e + d_e + r_m;
        for (w, &g) in magnitude.iter_mut().zip(&guard) {
            let rounded = round_magnitude(*w, width, g, d_m);
            // drop the exponent guard bits sitting above the kept mantissa
            *w = ((rounded >> (r_m + d_e)) << r_m) | (rounded & low_mask(r_m));
        }
    }

    let sign = fetched.require(PlaneId::Sign.index(format))?;
    let sign_shift = r_e + r_m;
    Ok(magnitude
        .into_iter()
        .enumerate()
        .map(|(j, w)| w | (get_bit(sign, j) << sign_shift))
        .collect())
}

/// Round a `width`-bit magnitude using `guard_bits` guard bits below it.
///
/// One guard bit rounds half up. Two guard bits round half to even, with the
/// lower guard bit standing in for the sticky bit.
fn round_magnitude(magnitude: u32, width: u32, guard: u32, guard_bits: u32) -> u32 {
    let half = 1u32 << (guard_bits - 1);
    let up = match guard_bits {
        1 => guard & half != 0,
        _ => guard & half != 0 && (guard & (half - 1) != 0 || magnitude & 1 == 1),
    };
    if !up {
        return magnitude;
    }
    let rounded = magnitude + 1;
    if rounded > low_mask(width) {
        low_mask(width)
    } else {
        rounded
    }
}
