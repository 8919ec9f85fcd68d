//! Python bindings. Binary data crosses as `bytes`, words as lists of ints,
//! study reports as JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use cxlndp::bitplane::{self, FetchedPlanes, PlaneImage};
use cxlndp::blockcodec::{self, Codec};
use cxlndp::harness::studies::{self, PlaneSizing};
use cxlndp::harness::{ingest_tensors, synth, ExperimentConfig, KvTrace, Report};
use cxlndp::kvpath::{self, EncodedWindow, KvBlockMeta, KvWindow};
use cxlndp::numfmt::{FloatFormat, ReducedSpec};

fn err(e: cxlndp::Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.kind()))
}

fn codec(name: &str) -> PyResult<Codec> {
    name.parse().map_err(err)
}

fn format(exp_bits: u32, man_bits: u32) -> PyResult<FloatFormat> {
    FloatFormat::new(exp_bits, man_bits).map_err(err)
}

fn spec(r_e: u32, r_m: u32, d_e: u32, d_m: u32) -> ReducedSpec {
    if d_e == 0 && d_m == 0 {
        ReducedSpec::truncate(r_e, r_m)
    } else {
        ReducedSpec::nearest(r_e, r_m, d_e, d_m)
    }
}

/// Split words into bit-planes `[sgn, exp.., man..]`.
#[pyfunction]
#[pyo3(signature = (values, exp_bits=8, man_bits=7))]
fn disaggregate<'py>(py: Python<'py>, values: Vec<u32>, exp_bits: u32, man_bits: u32) -> PyResult<Vec<Bound<'py, PyBytes>>> {
    let img = bitplane::disaggregate(&values, format(exp_bits, man_bits)?).map_err(err)?;
    Ok(img.planes().iter().map(|p| PyBytes::new(py, p)).collect())
}

/// Inverse of `disaggregate`.
#[pyfunction]
#[pyo3(signature = (planes, count, exp_bits=8, man_bits=7))]
fn reassemble(planes: Vec<Vec<u8>>, count: usize, exp_bits: u32, man_bits: u32) -> PyResult<Vec<u32>> {
    Ok(PlaneImage::from_planes(format(exp_bits, man_bits)?, count, planes).map_err(err)?.reassemble_full())
}

/// Read `values` at reduced precision through the plane path. Zero guard
/// bits truncate, otherwise the result is rounded to nearest.
#[pyfunction]
#[pyo3(signature = (values, r_e, r_m, d_e=0, d_m=0, exp_bits=8, man_bits=7))]
fn reduce(values: Vec<u32>, r_e: u32, r_m: u32, d_e: u32, d_m: u32, exp_bits: u32, man_bits: u32) -> PyResult<Vec<u32>> {
    let f = format(exp_bits, man_bits)?;
    let s = spec(r_e, r_m, d_e, d_m);
    let img = bitplane::disaggregate(&values, f).map_err(err)?;
    let set = img.select(&s).map_err(err)?;
    let mut fetched = FetchedPlanes::new(f, values.len());
    for &i in set.indices() {
        fetched.insert(i, img.planes()[i].clone()).map_err(err)?;
    }
    bitplane::assemble(&fetched, &s).map_err(err)
}

/// Compress one plane into a block container `[header | payload]*`.
#[pyfunction]
#[pyo3(signature = (plane, block_bytes=4096, codec_name="lz4", plane_id=0))]
fn compress_plane<'py>(py: Python<'py>, plane: &[u8], block_bytes: usize, codec_name: &str, plane_id: u16) -> PyResult<Bound<'py, PyBytes>> {
    let blocks = blockcodec::compress_plane(plane, block_bytes, codec(codec_name)?, plane_id, 0).map_err(err)?;
    Ok(PyBytes::new(py, &blockcodec::write_container(&blocks)))
}

/// Decode a block container back to the plane bytes, checking every CRC.
#[pyfunction]
fn decompress_container<'py>(py: Python<'py>, container: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let mut out = Vec::new();
    for b in blockcodec::read_container(container).map_err(err)? {
        out.extend(blockcodec::decompress_block(&b).map_err(err)?);
    }
    Ok(PyBytes::new(py, &out))
}

/// Encode a token-major BF16 KV window; returns `(metadata, container)`.
#[pyfunction]
#[pyo3(signature = (values, channels, block_bytes=4096, codec_name="lz4"))]
fn kv_encode<'py>(
    py: Python<'py>,
    values: Vec<u32>,
    channels: usize,
    block_bytes: usize,
    codec_name: &str,
) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)> {
    let w = KvWindow::new(0, 0, 0, channels, FloatFormat::BF16, values).map_err(err)?;
    let enc = kvpath::encode_window(&w, block_bytes, codec(codec_name)?, 0).map_err(err)?;
    Ok((PyBytes::new(py, &enc.meta.to_bytes()), PyBytes::new(py, &blockcodec::write_container(&enc.blocks))))
}

/// Inverse of `kv_encode`; returns the token-major words.
#[pyfunction]
fn kv_decode(meta: &[u8], container: &[u8], channels: usize) -> PyResult<Vec<u32>> {
    let enc = EncodedWindow {
        layer: 0,
        head: 0,
        seq: 0,
        format: FloatFormat::BF16,
        meta: KvBlockMeta::from_bytes(meta, channels).map_err(err)?,
        blocks: blockcodec::read_container(container).map_err(err)?,
    };
    Ok(kvpath::decode_window(&enc).map_err(err)?.values)
}

/// Precision regions over one weight image.
#[pyclass]
struct RegionMap {
    inner: cxlndp::region_map::RegionMap,
}

#[pymethods]
impl RegionMap {
    /// `specs` holds `(r_e, r_m, d_e, d_m)` tuples, one per region.
    #[new]
    #[pyo3(signature = (total_values, specs, exp_bits=8, man_bits=7))]
    fn new(total_values: u64, specs: Vec<(u32, u32, u32, u32)>, exp_bits: u32, man_bits: u32) -> PyResult<Self> {
        let specs: Vec<ReducedSpec> = specs.into_iter().map(|(a, b, c, d)| spec(a, b, c, d)).collect();
        let inner = cxlndp::region_map::RegionMap::contiguous(total_values, format(exp_bits, man_bits)?, &specs).map_err(err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn logical_bytes(&self, region: usize) -> PyResult<u64> {
        self.inner.logical_bytes(region).map_err(err)
    }

    fn base(&self, region: usize) -> PyResult<u64> {
        self.inner.base(region).map_err(err)
    }

    fn translate<'py>(&self, py: Python<'py>, region: usize, offset: u64, length: u64) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.translate(region, offset, length).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("values", (r.values.start, r.values.end))?;
        d.set_item("planes", r.planes.indices().to_vec())?;
        d.set_item("skip_bits", r.skip_bits)?;
        d.set_item("bits_per_value", r.bits_per_value())?;
        d.set_item("guard_flags", r.guard_flags)?;
        Ok(d)
    }

    fn layout_json(&self) -> String {
        self.inner.layout().to_json()
    }
}

fn config(json: Option<&str>) -> PyResult<ExperimentConfig> {
    match json {
        Some(text) => ExperimentConfig::from_json(text).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

fn report_json(r: &Report) -> String {
    let tables: serde_json::Map<String, serde_json::Value> = r
        .tables
        .iter()
        .map(|t| (t.name.clone(), serde_json::json!({ "header": t.header, "rows": t.rows })))
        .collect();
    serde_json::json!({ "tables": tables, "json": r.json }).to_string()
}

/// Run one study and return `{"tables": {name: {header, rows}}, "json": {...}}`
/// as a string. `manifest`/`data` select a tensor shard, `trace` a KV trace;
/// synthetic inputs are used otherwise.
#[pyfunction]
#[pyo3(signature = (name, config_json=None, manifest=None, data=None, trace=None))]
fn run_study(
    py: Python<'_>,
    name: &str,
    config_json: Option<&str>,
    manifest: Option<PathBuf>,
    data: Option<PathBuf>,
    trace: Option<PathBuf>,
) -> PyResult<String> {
    let cfg = config(config_json)?;
    let name = name.to_owned();
    py.detach(move || -> cxlndp::Result<String> {
        let store = match (&manifest, &data) {
            (Some(m), Some(d)) => Some(ingest_tensors(m, d, &cfg.registry()?)?),
            _ => None,
        };
        let report = match name.as_str() {
            "compress-weights" => {
                let store = match store {
                    Some(s) => s,
                    None => synth::synthetic_weights(&cfg.synthetic, cfg.seed)?,
                };
                studies::run_weight_compression_study(&store, cfg.block_bytes, cfg.codec)?.report()
            }
            "compress-kv" => {
                let t = match &trace {
                    Some(p) => KvTrace::load(p)?,
                    None => synth::synthetic_kv(&cfg.synthetic, cfg.seed)?,
                };
                studies::run_kv_compression_study(&t, cfg.window_tokens, cfg.block_bytes, cfg.codec)?.report()
            }
            "fetch-study" => {
                let rows = studies::run_fetch_study(store.as_ref(), &cfg, &[PlaneSizing::Raw, PlaneSizing::Compressed])?;
                Report {
                    tables: vec![studies::fetch_table(&rows)],
                    ..Report::default()
                }
            }
            "pipeline-study" => studies::run_pipeline_study(&cfg, 4096)?.report(),
            "region-map" => studies::run_region_map(&cfg, 1 << 20)?,
            other => return Err(cxlndp::Error::Config(format!("unknown study {other:?}"))),
        };
        Ok(report_json(&report))
    })
    .map_err(err)
}

#[pymodule]
fn cxlndp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(disaggregate, m)?)?;
    m.add_function(wrap_pyfunction!(reassemble, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(compress_plane, m)?)?;
    m.add_function(wrap_pyfunction!(decompress_container, m)?)?;
    m.add_function(wrap_pyfunction!(kv_encode, m)?)?;
    m.add_function(wrap_pyfunction!(kv_decode, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_class::<RegionMap>()?;
    Ok(())
}
