use std::io::{Read, Write};

use super::SurrogateError;

/// Input width of the covering architecture.
pub const MAX_INPUTS: usize = 9;

const MAGIC: &[u8; 4] = b"NSPV";
const VERSION: u32 = 1;

/// Layer widths of a dense MLP, input first. Hidden layers use sigmoid, the
/// output layer is linear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Default for Topology {
    fn default() -> Self {
        Self::covering()
    }
}

impl Topology {
    /// 9 → 4 → 4 → 1.
    pub fn covering() -> Self {
        Self {
            layer_sizes: vec![MAX_INPUTS, 4, 4, 1],
        }
    }

    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, SurrogateError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(SurrogateError::BadTopology(layer_sizes));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(in, out)` for each dense layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| i * o + o).sum()
    }
}

/// Flat weights: per layer, the `[out x in]` weight matrix row-major, then
/// the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    /// Checks the length against `topology`.
    pub fn for_topology(values: Vec<f64>, topology: &Topology) -> Result<Self, SurrogateError> {
        let expected = topology.param_count();
        if values.len() != expected {
            return Err(SurrogateError::WrongLength {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), SurrogateError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, SurrogateError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SurrogateError::BadMagic);
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(SurrogateError::UnsupportedVersion(version));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut values = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(Self { values })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), SurrogateError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SurrogateError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_count() {
        assert_eq!(Topology::covering().param_count(), 65);
        assert_eq!(Topology::new(vec![3, 2]).unwrap().param_count(), 8);
        assert!(Topology::new(vec![3]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let p = ParamVector::new(vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300]);
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 4 * 8);
        let q = ParamVector::read_from(buf.as_slice()).unwrap();
        assert_eq!(
            p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            q.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(ParamVector::read_from(&b"XXXX\x01\0\0\0"[..]), Err(SurrogateError::BadMagic)));
        let mut buf = Vec::new();
        ParamVector::new(vec![]).write_to(&mut buf).unwrap();
        buf[4] = 9;
        assert!(matches!(ParamVector::read_from(buf.as_slice()), Err(SurrogateError::UnsupportedVersion(9))));
    }
}
