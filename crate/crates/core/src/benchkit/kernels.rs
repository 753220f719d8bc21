use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use super::BenchError;

/// Working precision of a kernel transcription. Library calls (`sin`, `acos`,
/// `sqrt`, ...) always run in double precision, as they do in C, and the
/// result is narrowed back to `Self`.
pub trait Real: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn lit(v: f64) -> Self;
    fn wide(self) -> f64;
}

impl Real for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn wide(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn wide(self) -> f64 {
        self
    }
}

/// The six benchmark kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kernel {
    Fft0,
    Fft1,
    Invk2j0,
    Invk2j1,
    Kmeans,
    Sobel,
}

const FFT_SOURCE: [&str; 2] = [
    "float fftSin_Output0(float x) {\n    return sin(-2 * 3.1415 * x);\n}\n",
    "float fftSin_Output1(float x) {\n    return cos(-2 * 3.1415 * x);\n}\n",
];

const INVK2J0_SOURCE: &str = "float invk2j_Output0(float x, float y) {
  float l1 = 0.5 ;
  float l2 = 0.5 ;
  float theta2 = (float)acos(
    ((x * x) + (y * y) - (l1 * l1) - (l2 * l2)) /
    (2 * l1 * l2)) ;
  return (float)asin(
    (y * (l1 + l2 * cos(theta2)) - x * l2 * sin(theta2)) /
    (x * x + y * y)) ;
}
";

const INVK2J1_SOURCE: &str = "float invk2j_Output1(float x, float y) {
  float l1 = 0.5 ;
  float l2 = 0.5 ;
  return (float)acos(
    ((x * x) + (y * y) - (l1 * l1) - (l2 * l2)) /
    (2 * l1 * l2)) ;
}
";

const KMEANS_SOURCE: &str = "float euclideanDistance(
  float p_0, float p_1, float p_2,
  float c1_0, float c1_1, float c1_2) {
  float r;

  r = 0;
  r += (p_0 - c1_0) * (p_0 - c1_0);
  r += (p_1 - c1_1) * (p_1 - c1_1);
  r += (p_2 - c1_2) * (p_2 - c1_2);

  return sqrt(r);
}
";

const SOBEL_SOURCE: &str = "float sobel(
  float w00, float w01, float w02,
  float w10, float w11, float w12,
  float w20, float w21, float w22)
{
  float sx = 0.0;
  sx += w00 * -1;
  sx += w10 * 0;
  sx += w20 * 1;
  sx += w01 * -2;
  sx += w11 * 0;
  sx += w21 * 2;
  sx += w02 * -1;
  sx += w12 * 0;
  sx += w22 * 1;

  float sy = 0.0;
  sy += w00 * -1;
  sy += w10 * -2;
  sy += w20 * -1;
  sy += w01 * 0;
  sy += w11 * 0;
  sy += w21 * 0;
  sy += w02 * 1;
  sy += w12 * 2;
  sy += w22 * 1;

  float s = sqrt(sx * sx + sy * sy) ;
  if (s >= (256 / sqrt(256 * 256 + 256 * 256)))
    s = 255 / sqrt(256 * 256 + 256 * 256);
  return s ;
}
";

fn fft<T: Real>(x: T, cosine: bool) -> T {
    let arg = -2.0 * 3.1415 * x.wide();
    T::lit(if cosine { arg.cos() } else { arg.sin() })
}

fn invk2j_theta2<T: Real>(x: T, y: T) -> T {
    let l1 = T::lit(0.5);
    let l2 = T::lit(0.5);
    let num = x * x + y * y - l1 * l1 - l2 * l2;
    let den = T::lit(2.0) * l1 * l2;
    T::lit((num / den).wide().acos())
}

fn invk2j0<T: Real>(x: T, y: T) -> T {
    let l1 = T::lit(0.5);
    let l2 = T::lit(0.5);
    let theta2 = invk2j_theta2(x, y).wide();
    let a = y.wide() * (l1.wide() + l2.wide() * theta2.cos());
    let b = (x * l2).wide() * theta2.sin();
    T::lit(((a - b) / (x * x + y * y).wide()).asin())
}

fn kmeans<T: Real>(v: &[T]) -> T {
    let mut r = T::lit(0.0);
    for i in 0..3 {
        let d = v[i] - v[i + 3];
        r = r + d * d;
    }
    T::lit(r.wide().sqrt())
}

fn sobel<T: Real>(w: &[T]) -> T {
    // w is row-major: w00 w01 w02 w10 ... w22
    let g = |r: usize, c: usize| w[r * 3 + c];
    let k = |v: f64| T::lit(v);
    let mut sx = k(0.0);
    for (r, c, m) in [(0, 0, -1.0), (1, 0, 0.0), (2, 0, 1.0), (0, 1, -2.0), (1, 1, 0.0), (2, 1, 2.0), (0, 2, -1.0), (1, 2, 0.0), (2, 2, 1.0)] {
        sx = sx + g(r, c) * k(m);
    }
    let mut sy = k(0.0);
    for (r, c, m) in [(0, 0, -1.0), (1, 0, -2.0), (2, 0, -1.0), (0, 1, 0.0), (1, 1, 0.0), (2, 1, 0.0), (0, 2, 1.0), (1, 2, 2.0), (2, 2, 1.0)] {
        sy = sy + g(r, c) * k(m);
    }
    let norm = (256.0f64 * 256.0 + 256.0 * 256.0).sqrt();
    let mut s = T::lit((sx * sx + sy * sy).wide().sqrt());
    if s.wide() >= 256.0 / norm {
        s = T::lit(255.0 / norm);
    }
    s
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [Kernel::Fft0, Kernel::Fft1, Kernel::Invk2j0, Kernel::Invk2j1, Kernel::Kmeans, Kernel::Sobel];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Fft0 => "fft0",
            Kernel::Fft1 => "fft1",
            Kernel::Invk2j0 => "invk2j0",
            Kernel::Invk2j1 => "invk2j1",
            Kernel::Kmeans => "kmeans",
            Kernel::Sobel => "sobel",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Kernel::Fft0 | Kernel::Fft1 => 1,
            Kernel::Invk2j0 | Kernel::Invk2j1 => 2,
            Kernel::Kmeans => 6,
            Kernel::Sobel => 9,
        }
    }

    /// C source of the single-precision version.
    pub fn source(self) -> &'static str {
        match self {
            Kernel::Fft0 => FFT_SOURCE[0],
            Kernel::Fft1 => FFT_SOURCE[1],
            Kernel::Invk2j0 => INVK2J0_SOURCE,
            Kernel::Invk2j1 => INVK2J1_SOURCE,
            Kernel::Kmeans => KMEANS_SOURCE,
            Kernel::Sobel => SOBEL_SOURCE,
        }
    }

    /// C source of the double-precision version.
    pub fn source_double(self) -> String {
        self.source().replace("float", "double")
    }

    /// Evaluates the transcription at precision `T`. `input` must hold
    /// exactly `arity` values.
    pub fn eval_as<T: Real>(self, input: &[T]) -> Result<T, BenchError> {
        if input.len() != self.arity() {
            return Err(BenchError::Arity {
                kernel: self.name(),
                expected: self.arity(),
                got: input.len(),
            });
        }
        Ok(match self {
            Kernel::Fft0 => fft(input[0], false),
            Kernel::Fft1 => fft(input[0], true),
            Kernel::Invk2j0 => invk2j0(input[0], input[1]),
            Kernel::Invk2j1 => invk2j_theta2(input[0], input[1]),
            Kernel::Kmeans => kmeans(input),
            Kernel::Sobel => sobel(input),
        })
    }

    /// Single-precision evaluation: inputs are narrowed to `float` first.
    pub fn eval_f32(self, input: &[f64]) -> Result<f64, BenchError> {
        let narrowed: Vec<f32> = input.iter().map(|&v| v as f32).collect();
        Ok(self.eval_as(&narrowed)? as f64)
    }

    pub fn eval_f64(self, input: &[f64]) -> Result<f64, BenchError> {
        self.eval_as(input)
    }

    /// The reference program's output, the single-precision version.
    pub fn eval(self, input: &[f64]) -> Result<f64, BenchError> {
        self.eval_f32(input)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::UnknownKernel(s.to_string()))
    }
}
