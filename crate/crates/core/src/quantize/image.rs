use std::io::{BufRead, Seek, Write};

use ::image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use ::image::{DynamicImage, ExtendedColorType, ImageEncoder};
use std::path::Path;

use super::QuantizeError;
use crate::rng::Rng;

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, QuantizeError> {
        if data.len() != width * height * 3 {
            return Err(QuantizeError::Dimensions(format!("{width}x{height} image needs {} bytes, got {}", width * height * 3, data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, i: usize) -> [u8; 3] {
        [self.data[3 * i], self.data[3 * i + 1], self.data[3 * i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// ITU BT.601 luma in 0-255 units.
    pub fn luma(&self) -> Vec<f64> {
        self.pixels().map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).collect()
    }

    pub fn distinct_colors(&self) -> usize {
        let mut v: Vec<[u8; 3]> = self.pixels().collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// A deterministic synthetic photograph: a soft gradient with a few
    /// smooth colored blobs and mild noise.
    pub fn synthetic(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = Rng::derive(seed, &[0x1a6e]);
        let base: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let blobs: Vec<([f64; 2], f64, [f64; 3])> = (0..7)
            .map(|_| {
                let c = [rng.uniform(), rng.uniform()];
                let r = 0.08 + 0.25 * rng.uniform();
                let col = [rng.uniform(), rng.uniform(), rng.uniform()];
                (c, r, col)
            })
            .collect();
        let mut noise = Rng::derive(seed, &[0x1a6e, 1]);
        Self::from_fn(width, height, |x, y| {
            let u = (x as f64 + 0.5) / width as f64;
            let v = (y as f64 + 0.5) / height as f64;
            let mut rgb = [0.0; 3];
            for (ch, out) in rgb.iter_mut().enumerate() {
                *out = 0.25 * (base[ch] * (1.0 - u) + base[ch + 3] * v);
            }
            for (c, r, col) in &blobs {
                let d2 = ((u - c[0]).powi(2) + (v - c[1]).powi(2)) / (r * r);
                let w = (-d2).exp();
                for ch in 0..3 {
                    rgb[ch] = rgb[ch] * (1.0 - w) + col[ch] * w;
                }
            }
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let n = (noise.uniform() - 0.5) * 0.03;
                px[ch] = ((rgb[ch] + n).clamp(0.0, 1.0) * 255.0).round() as u8;
            }
            px
        })
    }

    /// Reads any PNM image (binary PPM included), converted to 8-bit RGB.
    pub fn read_ppm(r: impl BufRead + Seek) -> Result<Self, QuantizeError> {
        let decoded = DynamicImage::from_decoder(PnmDecoder::new(r)?)?.to_rgb8();
        let (w, h) = decoded.dimensions();
        Self::new(w as usize, h as usize, decoded.into_raw())
    }

    /// Writes a binary PPM (P6).
    pub fn write_ppm(&self, w: impl Write) -> Result<(), QuantizeError> {
        PnmEncoder::new(w).with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary)).write_image(
            &self.data,
            self.width as u32,
            self.height as u32,
            ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuantizeError> {
        Self::read_ppm(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QuantizeError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_ppm(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let img = Image::synthetic(13, 7, 2);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert_eq!(Image::read_ppm(std::io::Cursor::new(&buf[..])).unwrap(), img);
        assert!(buf.starts_with(b"P6\n"));
        let commented = [b"P6\n# note\n2 1\n255\n".as_slice(), &[1, 2, 3, 4, 5, 6]].concat();
        assert_eq!(Image::read_ppm(std::io::Cursor::new(&commented[..])).unwrap().pixel(1), [4, 5, 6]);
        assert!(Image::read_ppm(std::io::Cursor::new(&b"P6\n2 2\n255\n\x01"[..])).is_err());
        assert!(Image::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_varied() {
        let a = Image::synthetic(32, 32, 5);
        assert_eq!(a, Image::synthetic(32, 32, 5));
        assert_ne!(a, Image::synthetic(32, 32, 6));
        assert!(a.distinct_colors() > 100);
    }
}
