//! Binary network files.
//!
//! All integers are little-endian `u32` unless noted. A file is the magic
//! `NNG1`, the stream count, one record per stream (source `u8`, view `u8`
//! with three `u32` for a band-major view, input width, layer count, layer
//! records), the trunk layer count and its layer records, then every
//! parameter tensor in graph order as row-major `f32`.
//!
//! Layer records start with a kind byte: 0 dense (`n_in`, `n_out`), 1 conv
//! (axis `u8`, positions, channels, filters, width), 2 max-pool (positions,
//! channels, pool), 3 activation (`u8`), 4 softmax.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::graph::{InputSource, InputView, NetworkGraph, Stream};
use super::layer::{Activation, ConvAxis, Layer, LayerSpec};
use crate::error::{Error, Result};

pub const NNG_MAGIC: &[u8; 4] = b"NNG1";

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt(format!(
                "unexpected end of file at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4)?;
        if found != expected {
            return Err(Error::Version {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_layer(out: &mut Vec<u8>, spec: &LayerSpec) {
    match *spec {
        LayerSpec::Dense { n_in, n_out } => {
            out.push(0);
            put_u32(out, n_in);
            put_u32(out, n_out);
        }
        LayerSpec::Conv1d {
            axis,
            positions,
            in_channels,
            n_filters,
            filter_width,
        } => {
            out.push(1);
            out.push(match axis {
                ConvAxis::Frequency => 0,
                ConvAxis::Time => 1,
            });
            for v in [positions, in_channels, n_filters, filter_width] {
                put_u32(out, v);
            }
        }
        LayerSpec::MaxPool1d {
            positions,
            channels,
            pool_size,
        } => {
            out.push(2);
            for v in [positions, channels, pool_size] {
                put_u32(out, v);
            }
        }
        LayerSpec::Activation(a) => {
            out.push(3);
            out.push(match a {
                Activation::Sigmoid => 0,
                Activation::Relu => 1,
                Activation::Linear => 2,
            });
        }
        LayerSpec::Softmax => out.push(4),
    }
}

fn get_layer(r: &mut ByteReader) -> Result<LayerSpec> {
    Ok(match r.u8()? {
        0 => LayerSpec::Dense {
            n_in: r.usize()?,
            n_out: r.usize()?,
        },
        1 => {
            let axis = match r.u8()? {
                0 => ConvAxis::Frequency,
                1 => ConvAxis::Time,
                other => return Err(Error::Corrupt(format!("conv axis tag {other}"))),
            };
            LayerSpec::Conv1d {
                axis,
                positions: r.usize()?,
                in_channels: r.usize()?,
                n_filters: r.usize()?,
                filter_width: r.usize()?,
            }
        }
        2 => LayerSpec::MaxPool1d {
            positions: r.usize()?,
            channels: r.usize()?,
            pool_size: r.usize()?,
        },
        3 => LayerSpec::Activation(match r.u8()? {
            0 => Activation::Sigmoid,
            1 => Activation::Relu,
            2 => Activation::Linear,
            other => return Err(Error::Corrupt(format!("activation tag {other}"))),
        }),
        4 => LayerSpec::Softmax,
        other => return Err(Error::Corrupt(format!("layer kind tag {other}"))),
    })
}

impl NetworkGraph {
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(NNG_MAGIC);
        put_u32(out, self.streams.len());
        for s in &self.streams {
            out.push(match s.source {
                InputSource::Acoustic => 0,
                InputSource::Articulatory => 1,
            });
            match s.view {
                InputView::Identity => out.push(0),
                InputView::BandMajor {
                    n_bands,
                    n_streams,
                    context,
                } => {
                    out.push(1);
                    for v in [n_bands, n_streams, context] {
                        put_u32(out, v);
                    }
                }
            }
            put_u32(out, s.input_dim);
            put_u32(out, s.layers.len());
            for l in &s.layers {
                put_layer(out, &l.spec);
            }
        }
        put_u32(out, self.trunk.len());
        for l in &self.trunk {
            put_layer(out, &l.spec);
        }
        for p in self.params() {
            for &v in p.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    pub(crate) fn decode(r: &mut ByteReader) -> Result<Self> {
        r.magic(NNG_MAGIC)?;
        let n_streams = r.usize()?;
        let mut specs = Vec::with_capacity(n_streams);
        for _ in 0..n_streams {
            let source = match r.u8()? {
                0 => InputSource::Acoustic,
                1 => InputSource::Articulatory,
                other => return Err(Error::Corrupt(format!("input source tag {other}"))),
            };
            let view = match r.u8()? {
                0 => InputView::Identity,
                1 => InputView::BandMajor {
                    n_bands: r.usize()?,
                    n_streams: r.usize()?,
                    context: r.usize()?,
                },
                other => return Err(Error::Corrupt(format!("input view tag {other}"))),
            };
            let input_dim = r.usize()?;
            let n_layers = r.usize()?;
            let layers = (0..n_layers).map(|_| get_layer(r)).collect::<Result<Vec<_>>>()?;
            specs.push((source, view, input_dim, layers));
        }
        let n_trunk = r.usize()?;
        let trunk_specs = (0..n_trunk).map(|_| get_layer(r)).collect::<Result<Vec<_>>>()?;

        let mut read_layer = |spec: LayerSpec| -> Result<Layer> {
            spec.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
            let params = spec
                .param_shapes()
                .into_iter()
                .map(|shape| {
                    let bytes = r.take(4 * shape.0 * shape.1)?;
                    let values = bytes
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                        .collect();
                    Ok(Array2::from_shape_vec(shape, values).expect("sized above"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Layer { spec, params })
        };
        let mut streams = Vec::with_capacity(n_streams);
        for (source, view, input_dim, layer_specs) in specs {
            let layers = layer_specs
                .into_iter()
                .map(&mut read_layer)
                .collect::<Result<Vec<_>>>()?;
            streams.push(Stream {
                source,
                view,
                input_dim,
                layers,
            });
        }
        let trunk = trunk_specs
            .into_iter()
            .map(&mut read_layer)
            .collect::<Result<Vec<_>>>()?;
        NetworkGraph::new(streams, trunk).map_err(|e| Error::Corrupt(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let net = Self::decode(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Corrupt("trailing bytes after network".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
