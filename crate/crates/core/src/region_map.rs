//! Precision-partitioned logical address space.
//!
//! `s` disjoint logical regions present the same physical plane image at
//! different precisions. Region `i` is `L * N_i` bits long, and its content
//! is the little-endian bitstream of `L` values of `N_i` bits each (value
//! `j` occupies bits `[j*N_i, (j+1)*N_i)`). Only the `L * N_1` bits of the
//! full-precision planes exist physically.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bitplane::{select_planes, PlaneSet};
use crate::error::{Error, Result};
use crate::numfmt::{FloatFormat, ReducedSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Region {
    spec: ReducedSpec,
    base: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMap {
    total_values: u64,
    format: FloatFormat,
    image_id: u32,
    regions: Vec<Region>,
}

/// Host request decoded into a value range and a plane set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneRequest {
    pub region: usize,
    pub offset: u64,
    pub length: u64,
    pub spec: ReducedSpec,
    /// covering value range `[j_start, j_end)`
    pub values: Range<u64>,
    pub planes: PlaneSet,
    pub guard_flags: u8,
    /// bit offset of the requested bytes inside the packed covering values
    pub skip_bits: u64,
}

impl PlaneRequest {
    pub fn value_count(&self) -> u64 {
        self.values.end - self.values.start
    }

    pub fn bits_per_value(&self) -> u32 {
        self.spec.output_bits()
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }
}

impl RegionMap {
    /// Regions laid out back to back from logical address 0.
    pub fn contiguous(total_values: u64, format: FloatFormat, specs: &[ReducedSpec]) -> Result<Self> {
        let mut base = 0u64;
        let mut placed = Vec::with_capacity(specs.len());
        for spec in specs {
            placed.push((*spec, base));
            base += region_bytes(total_values, spec.output_bits());
        }
        Self::with_bases(total_values, format, &placed)
    }

    pub fn with_bases(total_values: u64, format: FloatFormat, regions: &[(ReducedSpec, u64)]) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::RegionLayout("a region map needs at least one region".into()));
        }
        for (spec, _) in regions {
            spec.validate(format)?;
        }
        let mut spans: Vec<(u64, u64, usize)> = regions
            .iter()
            .enumerate()
            .map(|(i, (s, b))| (*b, b + region_bytes(total_values, s.output_bits()), i))
            .collect();
        spans.sort();
        for pair in spans.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::RegionLayout(format!(
                    "region {} [{}, {}) overlaps region {} [{}, {})",
                    pair[0].2, pair[0].0, pair[0].1, pair[1].2, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(Self {
            total_values,
            format,
            image_id: 0,
            regions: regions.iter().map(|&(spec, base)| Region { spec, base }).collect(),
        })
    }

    pub fn with_image_id(mut self, id: u32) -> Self {
        self.image_id = id;
        self
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    pub fn total_values(&self) -> u64 {
        self.total_values
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    fn region(&self, id: usize) -> Result<&Region> {
        self.regions.get(id).ok_or(Error::InvalidRegion {
            region: id,
            count: self.regions.len(),
        })
    }

    pub fn spec(&self, id: usize) -> Result<ReducedSpec> {
        Ok(self.region(id)?.spec)
    }

    pub fn base(&self, id: usize) -> Result<u64> {
        Ok(self.region(id)?.base)
    }

    /// `L * N_i`
    pub fn logical_bits(&self, id: usize) -> Result<u64> {
        Ok(self.total_values * self.region(id)?.spec.output_bits() as u64)
    }

    pub fn logical_bytes(&self, id: usize) -> Result<u64> {
        Ok(region_bytes(self.total_values, self.region(id)?.spec.output_bits()))
    }

    pub fn total_logical_bits(&self) -> u64 {
        self.regions
            .iter()
            .map(|r| self.total_values * r.spec.output_bits() as u64)
            .sum()
    }

    /// `L * N_1`: bits stored for the single backing image.
    pub fn physical_bits(&self) -> u64 {
        self.total_values * self.format.bits() as u64
    }

    pub fn translate(&self, region: usize, offset: u64, length: u64) -> Result<PlaneRequest> {
        let r = self.region(region)?;
        let size = region_bytes(self.total_values, r.spec.output_bits());
        let end = offset.checked_add(length);
        if end.is_none_or(|e| e > size) {
            return Err(Error::AddressFault {
                region,
                offset,
                length,
                size,
            });
        }
        let width = r.spec.output_bits() as u64;
        let start_bit = offset * 8;
        let end_bit = (offset + length) * 8;
        let j_start = start_bit / width;
        let j_end = if length == 0 {
            j_start
        } else {
            end_bit.div_ceil(width).min(self.total_values)
        };
        Ok(PlaneRequest {
            region,
            offset,
            length,
            spec: r.spec,
            values: j_start..j_end,
            planes: select_planes(self.format, &r.spec)?,
            guard_flags: r.spec.guard_flags(),
            skip_bits: start_bit - j_start * width,
        })
    }

    /// Resolve an absolute logical address to its region first.
    pub fn translate_address(&self, address: u64, length: u64) -> Result<PlaneRequest> {
        for (id, r) in self.regions.iter().enumerate() {
            let size = region_bytes(self.total_values, r.spec.output_bits());
            if address >= r.base && address < r.base + size {
                return self.translate(id, address - r.base, length);
            }
        }
        Err(Error::AddressFault {
            region: usize::MAX,
            offset: address,
            length,
            size: 0,
        })
    }

    /// Writes are accepted only by full-precision regions.
    pub fn translate_write(&self, region: usize, offset: u64, length: u64) -> Result<PlaneRequest> {
        if !self.region(region)?.spec.is_full(self.format) {
            return Err(Error::ReadOnlyRegion(region));
        }
        self.translate(region, offset, length)
    }

    pub fn layout(&self) -> RegionLayout {
        let regions = self
            .regions
            .iter()
            .enumerate()
            .map(|(id, r)| RegionEntry {
                id,
                base: r.base,
                size_bytes: region_bytes(self.total_values, r.spec.output_bits()),
                size_bits: self.total_values * r.spec.output_bits() as u64,
                bits_per_value: r.spec.output_bits(),
                fetched_planes: r.spec.fetched_planes(),
                spec: r.spec,
            })
            .collect();
        RegionLayout {
            image_id: self.image_id,
            total_values: self.total_values,
            format: self.format,
            physical_bits: self.physical_bits(),
            total_logical_bits: self.total_logical_bits(),
            regions,
        }
    }
}

pub fn region_bytes(total_values: u64, bits: u32) -> u64 {
    (total_values * bits as u64).div_ceil(8)
}

/// Serializable address-space report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub image_id: u32,
    pub total_values: u64,
    pub format: FloatFormat,
    pub physical_bits: u64,
    pub total_logical_bits: u64,
    pub regions: Vec<RegionEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub id: usize,
    pub base: u64,
    pub size_bytes: u64,
    pub size_bits: u64,
    pub bits_per_value: u32,
    pub fetched_planes: u32,
    pub spec: ReducedSpec,
}

impl RegionLayout {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuild the map this report describes.
    pub fn to_map(&self) -> Result<RegionMap> {
        let regions: Vec<_> = self.regions.iter().map(|r| (r.spec, r.base)).collect();
        Ok(RegionMap::with_bases(self.total_values, self.format, &regions)?.with_image_id(self.image_id))
    }
}

/// Pack `width`-bit values into a little-endian bitstream.
pub fn pack_bits(values: &[u32], width: u32) -> Vec<u8> {
    let total = values.len() * width as usize;
    let mut out = vec![0u8; total.div_ceil(8)];
    let mut bit = 0usize;
    for &v in values {
        for k in 0..width {
            if (v >> k) & 1 == 1 {
                out[bit >> 3] |= 1 << (bit & 7);
            }
            bit += 1;
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], width: u32, count: usize) -> Vec<u32> {
    (0..count)
        .map(|j| {
            (0..width).fold(0u32, |acc, k| {
                let bit = j * width as usize + k as usize;
                acc | ((((bytes[bit >> 3] >> (bit & 7)) & 1) as u32) << k)
            })
        })
        .collect()
}

/// Bytes `[skip_bits/8 ..]` of a packed stream, starting at an arbitrary bit.
pub fn extract_bytes(stream: &[u8], skip_bits: u64, length: u64) -> Vec<u8> {
    let get = |bit: u64| -> u8 {
        let byte = (bit >> 3) as usize;
        if byte < stream.len() {
            (stream[byte] >> (bit & 7)) & 1
        } else {
            0
        }
    };
    (0..length)
        .map(|i| (0..8).fold(0u8, |acc, k| acc | (get(skip_bits + i * 8 + k) << k)))
        .collect()
}

/// Slice assembled covering values back to exactly the requested bytes.
pub fn slice_response(values: &[u32], req: &PlaneRequest) -> Vec<u8> {
    let stream = pack_bits(values, req.bits_per_value());
    extract_bytes(&stream, req.skip_bits, req.length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numfmt::ReducedSpec;

    fn three_region_map() -> RegionMap {
        RegionMap::contiguous(
            1000,
            FloatFormat::BF16,
            &[ReducedSpec::truncate(8, 7), ReducedSpec::truncate(7, 0), ReducedSpec::truncate(3, 0)],
        )
        .unwrap()
    }

    #[test]
    fn size_law() {
        let map = three_region_map();
        assert_eq!(map.logical_bytes(0).unwrap(), 2000);
        assert_eq!(map.logical_bytes(1).unwrap(), 1000);
        assert_eq!(map.logical_bytes(2).unwrap(), 500);
        assert_eq!(map.total_logical_bits(), 1000 * (16 + 8 + 4));
        assert_eq!(map.physical_bits(), 16_000);
        assert_eq!(map.base(1).unwrap(), 2000);
        assert_eq!(map.base(2).unwrap(), 3000);
    }

    #[test]
    fn eight_bit_region_read() {
        let map = RegionMap::contiguous(
            1000,
            FloatFormat::BF16,
            &[ReducedSpec::truncate(8, 7), ReducedSpec::nearest(7, 0, 0, 1)],
        )
        .unwrap();
        let req = map.translate(1, 0, 16).unwrap();
        assert_eq!(req.values, 0..16);
        assert_eq!(req.planes.len(), 9);
        assert_eq!(req.skip_bits, 0);
        assert_eq!(req.bits_per_value(), 8);
    }

    #[test]
    fn full_region_read_everything() {
        let map = three_region_map();
        let req = map.translate(0, 0, 2000).unwrap();
        assert_eq!(req.values, 0..1000);
        assert_eq!(req.planes.len(), 16);
    }

    #[test]
    fn ragged_read_rounds_outward() {
        let map = three_region_map();
        // 4-bit region: bytes [3, 5) cover values 6..10
        let req = map.translate(2, 3, 2).unwrap();
        assert_eq!(req.values, 6..10);
        assert_eq!(req.skip_bits, 0);
        // 16-bit region: bytes [3, 6) cover values 1..3, starting 8 bits into value 1
        let req = map.translate(0, 3, 3).unwrap();
        assert_eq!(req.values, 1..3);
        assert_eq!(req.skip_bits, 8);
        let bytes = slice_response(&[0xAABB, 0xCCDD], &req);
        assert_eq!(bytes, vec![0xAA, 0xDD, 0xCC]);
    }

    #[test]
    fn faults() {
        let map = three_region_map();
        assert!(matches!(map.translate(2, 499, 2), Err(Error::AddressFault { .. })));
        assert!(matches!(map.translate(3, 0, 1), Err(Error::InvalidRegion { region: 3, count: 3 })));
        assert!(map.translate(2, 500, 0).is_ok());
        assert!(matches!(map.translate_write(1, 0, 8), Err(Error::ReadOnlyRegion(1))));
        assert!(map.translate_write(0, 0, 8).is_ok());
    }

    #[test]
    fn zero_length_read() {
        let map = three_region_map();
        let req = map.translate(1, 10, 0).unwrap();
        assert!(req.is_empty());
        assert_eq!(req.value_count(), 0);
    }

    #[test]
    fn overlapping_bases_rejected() {
        let specs = [(ReducedSpec::truncate(8, 7), 0), (ReducedSpec::truncate(7, 0), 1999)];
        assert!(matches!(
            RegionMap::with_bases(1000, FloatFormat::BF16, &specs),
            Err(Error::RegionLayout(_))
        ));
        let specs = [(ReducedSpec::truncate(8, 7), 0), (ReducedSpec::truncate(7, 0), 2000)];
        assert!(RegionMap::with_bases(1000, FloatFormat::BF16, &specs).is_ok());
    }

    #[test]
    fn address_resolution() {
        let map = three_region_map();
        let req = map.translate_address(3010, 4).unwrap();
        assert_eq!(req.region, 2);
        assert_eq!(req.offset, 10);
        assert!(map.translate_address(3500, 1).is_err());
    }

    #[test]
    fn layout_report_roundtrip() {
        let map = three_region_map();
        let layout = map.layout();
        let spans: Vec<_> = layout.regions.iter().map(|r| (r.base, r.base + r.size_bytes)).collect();
        assert_eq!(spans, vec![(0, 2000), (2000, 3000), (3000, 3500)]);
        assert_eq!(layout.regions.iter().map(|r| r.size_bits).sum::<u64>(), layout.total_logical_bits);
        let parsed = RegionLayout::from_json(&layout.to_json()).unwrap();
        assert_eq!(parsed, layout);
        assert_eq!(parsed.to_map().unwrap(), map);
    }

    #[test]
    fn bit_packing_roundtrip() {
        let vals: Vec<u32> = (0..37).map(|i| (i * 13) % 32).collect();
        let packed = pack_bits(&vals, 5);
        assert_eq!(packed.len(), (37 * 5usize).div_ceil(8));
        assert_eq!(unpack_bits(&packed, 5, 37), vals);
        assert_eq!(pack_bits(&[0x1234, 0xABCD], 16), vec![0x34, 0x12, 0xCD, 0xAB]);
    }
}
