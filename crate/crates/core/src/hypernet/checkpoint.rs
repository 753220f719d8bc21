use std::io::{Read, Write};
use std::path::Path;

use super::{EncoderConfig, HypernetError, HypernetModel, Vocab};
use crate::nn::Tensor;
use crate::surrogate::Topology;

const MAGIC: &[u8; 4] = b"NSCK";
const VERSION: u32 = 1;

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64(r: &mut impl Read) -> Result<u64, HypernetError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_usize(r: &mut impl Read, what: &str, limit: u64) -> Result<usize, HypernetError> {
    let v = get_u64(r)?;
    if v > limit {
        return Err(HypernetError::BadCheckpoint(format!("{what} {v} is implausible")));
    }
    Ok(v as usize)
}

impl HypernetModel {
    /// Header, encoder config, surrogate topology, vocabulary, then every
    /// tensor (rank, dims, data) in declaration order.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), HypernetError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let c = self.config();
        for v in [c.layers, c.hidden, c.heads, c.feed_forward, c.max_positions] {
            put_u64(&mut w, v as u64)?;
        }
        let sizes = self.topology().layer_sizes();
        put_u64(&mut w, sizes.len() as u64)?;
        for &s in sizes {
            put_u64(&mut w, s as u64)?;
        }
        let tokens = self.vocab().tokens();
        put_u64(&mut w, tokens.len() as u64)?;
        for t in tokens {
            put_u64(&mut w, t.len() as u64)?;
            w.write_all(t.as_bytes())?;
        }
        let tensors = self.params().tensors();
        put_u64(&mut w, tensors.len() as u64)?;
        for t in tensors {
            put_u64(&mut w, t.shape().len() as u64)?;
            for &d in t.shape() {
                put_u64(&mut w, d as u64)?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, HypernetError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(HypernetError::BadCheckpoint("missing checkpoint magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(HypernetError::BadCheckpoint(format!("unsupported version {version}")));
        }
        const BIG: u64 = 1 << 32;
        let config = EncoderConfig {
            layers: get_usize(&mut r, "layer count", 1 << 10)?,
            hidden: get_usize(&mut r, "hidden size", BIG)?,
            heads: get_usize(&mut r, "head count", BIG)?,
            feed_forward: get_usize(&mut r, "feed-forward size", BIG)?,
            max_positions: get_usize(&mut r, "position count", BIG)?,
        };
        let n_sizes = get_usize(&mut r, "topology depth", 1 << 10)?;
        let sizes = (0..n_sizes)
            .map(|_| get_usize(&mut r, "layer width", BIG))
            .collect::<Result<Vec<_>, _>>()?;
        let topology = Topology::new(sizes).map_err(|e| HypernetError::BadCheckpoint(e.to_string()))?;
        let n_tokens = get_usize(&mut r, "vocabulary size", BIG)?;
        let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
        for _ in 0..n_tokens {
            let len = get_usize(&mut r, "token length", 1 << 20)?;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            tokens.push(String::from_utf8(buf).map_err(|_| HypernetError::BadCheckpoint("token is not UTF-8".into()))?);
        }
        let vocab = Vocab::from_tokens(tokens)?;
        let n_tensors = get_usize(&mut r, "tensor count", 1 << 20)?;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let rank = get_usize(&mut r, "tensor rank", 8)?;
            let dims = (0..rank)
                .map(|_| get_usize(&mut r, "tensor extent", BIG))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = dims.iter().product();
            let mut data = Vec::with_capacity(n.min(1 << 24));
            let mut b8 = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                data.push(f64::from_le_bytes(b8));
            }
            tensors.push(Tensor::new(dims, data)?);
        }
        Self::from_parts(vocab, config, topology, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HypernetError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HypernetError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
