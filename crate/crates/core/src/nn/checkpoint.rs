//! Checkpoint files: a text manifest followed by raw tensor data.
//!
//! ```text
//! nmt-checkpoint
//! format_version=1
//! seed=7
//! embed_dim=128
//! ...
//! meta.epoch=3
//! tensor=src_embedding shape=120x128 offset=0
//! ...
//! data_bytes=...
//! end
//! <little-endian f32 values, row-major, manifest order>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::Parameters;
use super::NnError;

pub const MAGIC: &str = "nmt-checkpoint";
pub const FORMAT_VERSION: u32 = 1;
const END: &str = "end";

/// Model parameters with the configuration and seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub seed: u64,
    pub params: Parameters,
    /// Free-form key/value annotations, stored as `meta.<key>=<value>`.
    pub metadata: BTreeMap<String, String>,
}

fn malformed(msg: impl Into<String>) -> NnError {
    NnError::MalformedCheckpoint(msg.into())
}

fn clean(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl Checkpoint {
    pub fn new(config: ModelConfig, seed: u64, params: Parameters) -> Self {
        Self { config, seed, params, metadata: BTreeMap::new() }
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut head = format!("{MAGIC}\nformat_version={FORMAT_VERSION}\nseed={}\n", self.seed);
        for (k, v) in [
            ("embed_dim", c.embed_dim.to_string()),
            ("hidden_dim", c.hidden_dim.to_string()),
            ("bidirectional", c.bidirectional.to_string()),
            ("attention", c.attention.to_string()),
            ("dropout_rate", c.dropout_rate.to_string()),
            ("src_vocab_size", c.src_vocab_size.to_string()),
            ("tgt_vocab_size", c.tgt_vocab_size.to_string()),
            ("max_decode_len", c.max_decode_len.to_string()),
        ] {
            head.push_str(&format!("{k}={v}\n"));
        }
        for (k, v) in &self.metadata {
            head.push_str(&format!("meta.{}={}\n", clean(k).replace('=', "_"), clean(v)));
        }
        let mut offset = 0usize;
        let mut data = Vec::with_capacity(self.params.num_scalars() * 4);
        self.params.for_each(|info, t| {
            let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            head.push_str(&format!("tensor={} shape={} offset={offset}\n", info.name, shape.join("x")));
            for &v in t.iter() {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
            offset += t.len() * 4;
        });
        head.push_str(&format!("data_bytes={}\n{END}\n", data.len()));
        let mut out = head.into_bytes();
        out.extend(data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str, NnError> {
            let rest = &bytes[pos..];
            let len = rest.iter().position(|&b| b == b'\n').ok_or_else(|| malformed("truncated manifest"))?;
            pos += len + 1;
            std::str::from_utf8(&rest[..len]).map_err(|_| malformed("manifest is not UTF-8"))
        };

        if next_line()? != MAGIC {
            return Err(malformed("missing checkpoint header"));
        }
        let mut fields = BTreeMap::new();
        let mut metadata = BTreeMap::new();
        let mut tensors = Vec::new();
        let mut data_bytes = None;
        loop {
            let line = next_line()?;
            if line == END {
                break;
            }
            if let Some(rest) = line.strip_prefix("tensor=") {
                tensors.push(parse_tensor_line(rest)?);
            } else if let Some(rest) = line.strip_prefix("meta.") {
                let (k, v) = rest.split_once('=').ok_or_else(|| malformed(format!("bad line {line:?}")))?;
                metadata.insert(k.to_string(), v.to_string());
            } else if let Some(v) = line.strip_prefix("data_bytes=") {
                data_bytes = Some(v.parse::<usize>().map_err(|_| malformed("bad data_bytes"))?);
            } else {
                let (k, v) = line.split_once('=').ok_or_else(|| malformed(format!("bad line {line:?}")))?;
                fields.insert(k.to_string(), v.to_string());
            }
        }

        fn field<T: std::str::FromStr>(fields: &BTreeMap<String, String>, key: &str) -> Result<T, NnError> {
            fields
                .get(key)
                .ok_or_else(|| malformed(format!("missing field {key}")))?
                .parse()
                .map_err(|_| malformed(format!("bad value for {key}")))
        }
        let version: u32 = field(&fields, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(malformed(format!("unsupported format version {version}")));
        }
        let config = ModelConfig {
            embed_dim: field(&fields, "embed_dim")?,
            hidden_dim: field(&fields, "hidden_dim")?,
            bidirectional: field(&fields, "bidirectional")?,
            attention: field(&fields, "attention")?,
            dropout_rate: field(&fields, "dropout_rate")?,
            src_vocab_size: field(&fields, "src_vocab_size")?,
            tgt_vocab_size: field(&fields, "tgt_vocab_size")?,
            max_decode_len: field(&fields, "max_decode_len")?,
        };
        config.validate()?;
        let seed = field(&fields, "seed")?;

        let data = &bytes[pos..];
        if data_bytes != Some(data.len()) {
            return Err(malformed("tensor data length does not match the manifest"));
        }
        let mut params = Parameters::zeros(&config);
        let layout = params.layout();
        if layout.len() != tensors.len() {
            return Err(malformed("tensor list does not match the configuration"));
        }
        for ((info, shape), (name, got_shape, _)) in layout.iter().zip(&tensors) {
            if info.name != name || shape != got_shape {
                return Err(malformed(format!("unexpected tensor {name} {got_shape:?}")));
            }
        }
        let mut it = tensors.iter();
        let mut result = Ok(());
        params.for_each_mut(|_, mut t| {
            let (name, _, offset) = it.next().expect("checked length");
            let end = offset + t.len() * 4;
            let Some(chunk) = data.get(*offset..end) else {
                result = Err(malformed(format!("tensor {name} runs past the data")));
                return;
            };
            for (v, b) in t.iter_mut().zip(chunk.chunks_exact(4)) {
                *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
            }
        });
        result?;
        if !params.is_finite() {
            return Err(NnError::NonFiniteDetected("checkpoint tensors".into()));
        }
        Ok(Self { config, seed, params, metadata })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_bytes()).map_err(|source| NnError::CheckpointIo { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let bytes = fs::read(path).map_err(|source| NnError::CheckpointIo { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }
}

fn parse_tensor_line(rest: &str) -> Result<(String, Vec<usize>, usize), NnError> {
    let mut parts = rest.split(' ');
    let name = parts.next().unwrap_or_default().to_string();
    let shape = parts
        .next()
        .and_then(|p| p.strip_prefix("shape="))
        .ok_or_else(|| malformed(format!("tensor {name} lacks a shape")))?;
    let shape = shape
        .split('x')
        .map(|d| d.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| malformed(format!("bad shape for {name}")))?;
    let offset = parts
        .next()
        .and_then(|p| p.strip_prefix("offset="))
        .and_then(|o| o.parse::<usize>().ok())
        .ok_or_else(|| malformed(format!("bad offset for {name}")))?;
    Ok((name, shape, offset))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let cfg = ModelConfig::new(9, 11).with_dims(3, 4).with_variant(true, true);
        Checkpoint::new(cfg.clone(), 42, Parameters::init(&cfg, 42)).with_metadata("epoch", 3)
    }

    #[test]
    fn round_trip_is_exact_at_f32() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.config, ck.config);
        assert_eq!(back.seed, 42);
        assert_eq!(back.metadata["epoch"], "3");
        let a = ck.params.to_flat();
        let b = back.params.to_flat();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x as f32 as f64, *y);
        }
        // A second trip through f32 is lossless.
        assert_eq!(Checkpoint::from_bytes(&back.to_bytes()).unwrap(), back);
    }

    #[test]
    fn manifest_lists_tensors_in_order() {
        let bytes = sample().to_bytes();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("nmt-checkpoint\nformat_version=1\nseed=42\n"));
        assert!(text.contains("tensor=src_embedding shape=9x3 offset=0\n"));
        assert!(text.contains("tensor=tgt_embedding shape=11x3 offset=108\n"));
        assert!(text.contains("tensor=attention.w_a shape=8x4"));
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"garbage\n").is_err());
        let text = String::from_utf8_lossy(&bytes).replace("hidden_dim=4", "hidden_dim=5");
        assert!(Checkpoint::from_bytes(text.as_bytes()).is_err());
    }
}
