//! Python bindings: surrogate networks, hypernetwork compilation, corpus
//! records, benchmark kernels, aggregation statistics and quantization.

use std::path::PathBuf;

use nsc_core::baselines::random_init;
use nsc_core::benchkit::Kernel;
use nsc_core::corpus::{pad_dataset, ProgramRecord, SynthFamily};
use nsc_core::hypernet::HypernetModel;
use nsc_core::quantize::{image_mse, image_ssim, kmeans_palette, remap, Distance, Image, KMeansConfig};
use nsc_core::rng::Rng;
use nsc_core::surrogate::{Dataset, FinetuneConfig, PaddingMode, ParamVector, Splits, SurrogateNet, Topology};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset(rows: &[Vec<f64>], targets: &[f64]) -> PyResult<Dataset> {
    if rows.len() != targets.len() {
        return Err(value_err(format!("{} rows but {} targets", rows.len(), targets.len())));
    }
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(value_err("rows have different widths"));
    }
    let x = rows.iter().flatten().copied().collect();
    Ok(Dataset::new(width, 1, x, targets.to_vec()))
}

/// The covering MLP (9 inputs, hidden layers 4 and 4, one output).
#[pyclass(name = "SurrogateNet", module = "nsc", from_py_object)]
#[derive(Clone)]
pub struct PySurrogateNet {
    net: SurrogateNet,
}

#[pymethods]
impl PySurrogateNet {
    #[new]
    fn new(params: Vec<f64>) -> PyResult<Self> {
        let topo = Topology::covering();
        let p = ParamVector::for_topology(params, &topo).map_err(value_err)?;
        Ok(Self {
            net: SurrogateNet::interpret(&topo, &p).map_err(value_err)?,
        })
    }

    /// He-initialized network.
    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn random(seed: u64) -> PyResult<Self> {
        let topo = Topology::covering();
        let p = random_init(&topo, &mut Rng::new(seed));
        Self::new(p.into_values())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::new(ParamVector::load(path).map_err(value_err)?.into_values())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.net.flatten().save(path).map_err(value_err)
    }

    fn params(&self) -> Vec<f64> {
        self.net.flatten().into_values()
    }

    #[getter]
    fn inputs(&self) -> usize {
        self.net.inputs()
    }

    #[getter]
    fn outputs(&self) -> usize {
        self.net.outputs()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.net.inputs() {
            return Err(value_err(format!("expected {} inputs, got {}", self.net.inputs(), x.len())));
        }
        Ok(self.net.forward(&x))
    }

    /// Finetunes a copy on `(train_x, train_y)` with Adam and returns it with
    /// the test loss at the last logged epoch. Rows narrower than the network
    /// are zero-padded.
    #[pyo3(signature = (train_x, train_y, test_x, test_y, epochs = 5000, lr = 0.01, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn finetune(
        &self,
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        test_x: Vec<Vec<f64>>,
        test_y: Vec<f64>,
        epochs: usize,
        lr: f64,
        seed: u64,
    ) -> PyResult<(PySurrogateNet, f64)> {
        let width = self.net.inputs();
        let mut rng = Rng::new(seed);
        let mut fit = |d: Dataset| -> PyResult<Dataset> {
            if d.width == width || d.is_empty() {
                Ok(Dataset::new(width, 1, d.inputs, d.targets))
            } else {
                pad_dataset(&d, PaddingMode::ZeroPad, &mut rng).map_err(value_err)
            }
        };
        let splits = Splits {
            train: fit(dataset(&train_x, &train_y)?)?,
            val: Dataset::empty(width, 1),
            test: fit(dataset(&test_x, &test_y)?)?,
        };
        let cfg = FinetuneConfig {
            learning_rate: lr,
            epochs,
            seed,
            ..FinetuneConfig::default()
        };
        let trace = nsc_core::surrogate::finetune(&self.net.flatten(), &splits, &cfg).map_err(value_err)?;
        let net = SurrogateNet::interpret(&cfg.topology, &trace.final_params).map_err(value_err)?;
        Ok((PySurrogateNet { net }, trace.reported_test_loss))
    }

    fn __len__(&self) -> usize {
        self.net.topology().param_count()
    }
}

/// A trained hypernetwork that compiles program text to surrogate weights.
#[pyclass(name = "Hypernet", module = "nsc")]
pub struct PyHypernet {
    model: HypernetModel,
}

#[pymethods]
impl PyHypernet {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            model: HypernetModel::load(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.model.save(path).map_err(value_err)
    }

    fn compile(&self, source: &str) -> PyResult<PySurrogateNet> {
        let p = self.model.compile(source).map_err(value_err)?;
        PySurrogateNet::new(p.into_values())
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.model.vocab().len()
    }
}

/// One curated function with its input/output table.
#[pyclass(name = "ProgramRecord", module = "nsc")]
pub struct PyProgramRecord {
    rec: ProgramRecord,
}

#[pymethods]
impl PyProgramRecord {
    #[getter]
    fn id(&self) -> &str {
        &self.rec.id
    }

    #[getter]
    fn name(&self) -> &str {
        &self.rec.name
    }

    #[getter]
    fn source(&self) -> &str {
        &self.rec.source
    }

    #[getter]
    fn arity(&self) -> usize {
        self.rec.arity
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.rec.tokens.clone()
    }

    /// `(inputs, outputs)` of the train split.
    fn train(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.rec.train_io().iter().cloned().unzip()
    }

    fn test(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.rec.test_io().iter().cloned().unzip()
    }

    fn __repr__(&self) -> String {
        format!("ProgramRecord(id={:?}, arity={}, rows={})", self.rec.id, self.rec.arity, self.rec.io.len())
    }
}

#[pyfunction]
fn read_corpus(path: PathBuf) -> PyResult<Vec<PyProgramRecord>> {
    let recs = nsc_core::corpus::read_jsonl(path).map_err(value_err)?;
    Ok(recs.into_iter().map(|rec| PyProgramRecord { rec }).collect())
}

#[pyfunction]
fn tokenize(source: &str) -> Vec<String> {
    nsc_core::hypernet::tokenize(source)
}

#[pyfunction]
fn synth_corpus(family: &str, count: usize, seed: u64) -> PyResult<Vec<String>> {
    let fam: SynthFamily = family.parse().map_err(value_err)?;
    nsc_core::corpus::synth_corpus(fam, count, seed).map_err(value_err)
}

#[pyfunction]
fn kernel_names() -> Vec<&'static str> {
    Kernel::ALL.iter().map(|k| k.name()).collect()
}

#[pyfunction]
#[pyo3(signature = (name, inputs, double = false))]
fn kernel_eval(name: &str, inputs: Vec<f64>, double: bool) -> PyResult<f64> {
    let k: Kernel = name.parse().map_err(value_err)?;
    if double {
        k.eval_f64(&inputs).map_err(value_err)
    } else {
        k.eval_f32(&inputs).map_err(value_err)
    }
}

#[pyfunction]
fn geomean(ratios: Vec<f64>) -> PyResult<f64> {
    nsc_core::evalkit::geomean(&ratios).map_err(value_err)
}

#[pyfunction]
fn mpi(ratios: Vec<f64>) -> PyResult<u32> {
    nsc_core::evalkit::mpi(&ratios).map_err(value_err)
}

/// Quantizes a PPM image to `k` colors and writes the result.
#[pyfunction]
#[pyo3(signature = (input, output, k = 10, max_iters = 40, tolerance = 1e-5, seed = 0, surrogate = None))]
#[allow(clippy::too_many_arguments)]
fn quantize_ppm<'py>(
    py: Python<'py>,
    input: PathBuf,
    output: PathBuf,
    k: usize,
    max_iters: usize,
    tolerance: f64,
    seed: u64,
    surrogate: Option<PySurrogateNet>,
) -> PyResult<Bound<'py, PyDict>> {
    let img = Image::load(input).map_err(value_err)?;
    let distance = surrogate.map_or(Distance::Exact, |s| Distance::Surrogate(s.net));
    let cfg = KMeansConfig {
        k,
        max_iters,
        centroid_tolerance: tolerance,
        distance: distance.clone(),
        seed,
        jobs: 1,
    };
    let palette = kmeans_palette(&img, &cfg).map_err(value_err)?;
    let out = remap(&img, &palette.centroids, &distance).map_err(value_err)?;
    out.save(output).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("iterations", palette.iterations)?;
    d.set_item("converged", palette.converged)?;
    d.set_item("palette", palette.colors().into_iter().map(|c| c.to_vec()).collect::<Vec<_>>())?;
    d.set_item("mse", image_mse(&img, &out).map_err(value_err)?)?;
    d.set_item("ssim", image_ssim(&img, &out).map_err(value_err)?)?;
    Ok(d)
}

#[pymodule]
pub fn nsc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySurrogateNet>()?;
    m.add_class::<PyHypernet>()?;
    m.add_class::<PyProgramRecord>()?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_names, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_eval, m)?)?;
    m.add_function(wrap_pyfunction!(geomean, m)?)?;
    m.add_function(wrap_pyfunction!(mpi, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_ppm, m)?)?;
    Ok(())
}
