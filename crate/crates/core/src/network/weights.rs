//! Binary weight files.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "CDNN" | version | record count |
//!   per record: name length | UTF-8 name | rank | extents... | f32 LE payload
//! ```
//!
//! Records are named `<layer>.<field>` with fields `weight`, `bias`,
//! `gamma`, `beta`, `running_mean` and `running_var`.

use std::collections::BTreeMap;
use std::path::Path;

use super::layers::{cdnn_layers, LayerKind};
use super::model::{weight_shape, LayerParams, Network};
use crate::error::{Error, Result, WeightFileError};
use crate::fsutil::write_atomic;
use crate::tensor::{BatchNormState, Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"CDNN";
pub const FORMAT_VERSION: u32 = 1;

struct Record {
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("extent fits in u32");
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_record(buf: &mut Vec<u8>, name: &str, dims: &[usize], data: &[f32]) {
    put_u32(buf, name.len());
    buf.extend_from_slice(name.as_bytes());
    put_u32(buf, dims.len());
    for &d in dims {
        put_u32(buf, d);
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes every parameter and batch-norm running statistic.
pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut body = Vec::new();
    let mut count = 0;
    for (spec, p) in net.layers().iter().zip(net.layer_params()) {
        let Some(p) = p else { continue };
        let w = p.weight.shape();
        put_record(&mut body, &format!("{}.weight", spec.name), &w.dims(), p.weight.data());
        put_record(
            &mut body,
            &format!("{}.bias", spec.name),
            &[p.bias.len()],
            p.bias.data(),
        );
        count += 2;
        if let Some(bn) = &p.bn {
            let c = bn.channels();
            put_record(&mut body, &format!("{}.gamma", spec.name), &[c], bn.gamma.data());
            put_record(&mut body, &format!("{}.beta", spec.name), &[c], bn.beta.data());
            put_record(
                &mut body,
                &format!("{}.running_mean", spec.name),
                &[c],
                &bn.running_mean,
            );
            put_record(&mut body, &format!("{}.running_var", spec.name), &[c], &bn.running_var);
            count += 4;
        }
    }
    let mut buf = Vec::with_capacity(body.len() + 12);
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION as usize);
    put_u32(&mut buf, count);
    buf.extend_from_slice(&body);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn parse(bytes: &[u8]) -> Result<BTreeMap<String, Record>, WeightFileError> {
    use WeightFileError::{CorruptHeader, CorruptPayload, UnsupportedVersion};
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(CorruptHeader("missing CDNN magic".into()));
    }
    let version = r.u32().ok_or_else(|| CorruptHeader("truncated version".into()))?;
    if version != FORMAT_VERSION {
        return Err(UnsupportedVersion(version));
    }
    let count = r.u32().ok_or_else(|| CorruptHeader("truncated record count".into()))?;
    let mut records = BTreeMap::new();
    for i in 0..count {
        let truncated = || CorruptPayload(format!("file ends inside record {i}"));
        let name_len = r.u32().ok_or_else(truncated)? as usize;
        let name = r.take(name_len).ok_or_else(truncated)?;
        let name = std::str::from_utf8(name)
            .map_err(|_| CorruptHeader(format!("record {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u32().ok_or_else(truncated)? as usize;
        if rank > 4 {
            return Err(CorruptHeader(format!("record {name} has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32().ok_or_else(truncated)? as usize);
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(truncated)?;
        if len.checked_mul(4).is_none_or(|b| b > r.remaining()) {
            return Err(CorruptPayload(format!("payload of {name} is truncated")));
        }
        let payload = r.take(len * 4).ok_or_else(truncated)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if records.insert(name.clone(), Record { dims, data }).is_some() {
            return Err(CorruptHeader(format!("duplicate record {name}")));
        }
    }
    if r.remaining() != 0 {
        return Err(CorruptPayload(format!(
            "{} trailing bytes after last record",
            r.remaining()
        )));
    }
    Ok(records)
}

fn layer_of(record: &str) -> &str {
    record.rsplit_once('.').map_or(record, |(layer, _)| layer)
}

/// Parses and validates a weight file image against the layer table.
pub fn from_bytes(bytes: &[u8]) -> Result<Network, WeightFileError> {
    use WeightFileError::{SchemaMismatch, ShapeMismatch};
    let mut records = parse(bytes)?;
    let layers = cdnn_layers();
    let first = layers[0].name;
    let in_ch = records
        .get(&format!("{first}.weight"))
        .filter(|r| r.dims.len() == 4)
        .map(|r| r.dims[1])
        .ok_or_else(|| SchemaMismatch {
            layer: first.into(),
            detail: "missing or malformed weight record".into(),
        })?;

    let mut take = |name: String, expected: Vec<usize>| -> Result<Vec<f32>, WeightFileError> {
        let rec = records.remove(&name).ok_or_else(|| SchemaMismatch {
            layer: layer_of(&name).to_string(),
            detail: format!("record {name} missing"),
        })?;
        if rec.dims != expected {
            return Err(ShapeMismatch {
                name,
                expected,
                found: rec.dims,
            });
        }
        Ok(rec.data)
    };

    let mut params = Vec::with_capacity(layers.len());
    let mut channels = in_ch;
    for spec in &layers {
        if !spec.kind.has_params() {
            params.push(None);
            continue;
        }
        let ws: Shape = weight_shape(spec, channels);
        let c = spec.out_features;
        let weight =
            Tensor::from_vec(ws, take(format!("{}.weight", spec.name), ws.dims().to_vec())?).expect("validated");
        let bias = Tensor::from_vec([1, c, 1, 1], take(format!("{}.bias", spec.name), vec![c])?).expect("validated");
        let bn = if spec.has_batchnorm {
            let mut st = BatchNormState::new(c);
            st.gamma =
                Tensor::from_vec([1, c, 1, 1], take(format!("{}.gamma", spec.name), vec![c])?).expect("validated");
            st.beta = Tensor::from_vec([1, c, 1, 1], take(format!("{}.beta", spec.name), vec![c])?).expect("validated");
            st.running_mean = take(format!("{}.running_mean", spec.name), vec![c])?;
            st.running_var = take(format!("{}.running_var", spec.name), vec![c])?;
            if st.running_var.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(SchemaMismatch {
                    layer: spec.name.into(),
                    detail: "running variance must be finite and non-negative".into(),
                });
            }
            Some(st)
        } else {
            None
        };
        debug_assert!(spec.kind != LayerKind::Pool);
        params.push(Some(LayerParams { weight, bias, bn }));
        channels = c;
    }
    if let Some(extra) = records.keys().next() {
        return Err(SchemaMismatch {
            layer: layer_of(extra).to_string(),
            detail: format!("unexpected record {extra}"),
        });
    }
    Network::from_parts(in_ch, params).map_err(|e| SchemaMismatch {
        layer: first.into(),
        detail: e.to_string(),
    })
}

pub fn save_weights(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_bytes(net))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(from_bytes(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net() -> Network {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        Network::build(2, &mut rng).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = small_net();
        let mut bytes = to_bytes(&net);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(to_bytes(&back), bytes);
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(from_bytes(&bytes), Err(WeightFileError::CorruptPayload(_))));
    }

    #[test]
    fn header_errors_are_distinct() {
        let bytes = to_bytes(&small_net());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(from_bytes(&bad_magic), Err(WeightFileError::CorruptHeader(_))));
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            from_bytes(&bad_version),
            Err(WeightFileError::UnsupportedVersion(9))
        ));
        assert!(matches!(
            from_bytes(&bytes[..6]),
            Err(WeightFileError::CorruptHeader(_))
        ));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(from_bytes(&trailing), Err(WeightFileError::CorruptPayload(_))));
    }
}
