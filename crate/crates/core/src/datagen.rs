//! Training data for the scatterer-free solution operator, plus the shared
//! direct solve and error metric.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assembly::{assemble, AssembledSystem, ProblemSpec};
use crate::config::ProblemConfig;
use crate::container::{Container, Tensor};
use crate::error::{Error, Result};
use crate::grf::{derive_seed, GrfParams, GrfSampler, GrfSpec};
use crate::linalg::vector::{norm2, sub};
use crate::linalg::{BandLuFactorization, Complex};
use crate::mesh::{ScattererMask, StructuredGrid};

/// Largest accepted `‖b − A u‖ / ‖b‖` for a stored sample.
pub const RESIDUAL_TOL: f64 = 1e-10;

pub const DATASET_KIND: &str = "helmkit-dataset";
pub const FIELD_NAMES: [&str; 6] = ["k", "f_re", "f_im", "g", "u_re", "u_im"];

const TAG_K: u64 = 11;
const TAG_G: u64 = 12;
const TAG_F_RE: u64 = 13;
const TAG_F_IM: u64 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub dim: usize,
    pub m: usize,
    pub n: usize,
    pub k: GrfParams,
    #[serde(default)]
    pub k_min_reject: Option<f64>,
    pub g: GrfParams,
    pub f_re: GrfParams,
    pub f_im: GrfParams,
    pub seed: u64,
    /// Generate with `g ≡ 0`.
    #[serde(default)]
    pub homogeneous_g: bool,
}

impl DatasetSpec {
    /// 2D defaults at desk scale: m = 33, N = 5000.
    pub fn default_2d() -> Self {
        Self {
            dim: 2,
            m: 33,
            n: 5000,
            k: ProblemConfig::K_2D,
            k_min_reject: None,
            g: ProblemConfig::G_F,
            f_re: ProblemConfig::G_F,
            f_im: ProblemConfig::G_F,
            seed: 0,
            homogeneous_g: false,
        }
    }

    /// 3D defaults at desk scale: m = 17, N = 1000.
    pub fn default_3d() -> Self {
        Self {
            dim: 3,
            m: 17,
            n: 1000,
            k: ProblemConfig::K_3D,
            k_min_reject: Some(ProblemConfig::K_3D_FLOOR),
            ..Self::default_2d()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("a dataset needs at least one sample".into()));
        }
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!(
                "datasets are 2D or 3D, got dim = {}",
                self.dim
            )));
        }
        for (name, p) in [("k", self.k), ("g", self.g), ("f_re", self.f_re), ("f_im", self.f_im)] {
            if !(p.s > 0.0 && p.l > 0.0 && p.mean.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid GRF parameters for {name}: {p:?}")));
            }
        }
        StructuredGrid::new(self.dim, self.m)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<StructuredGrid> {
        StructuredGrid::new(self.dim, self.m)
    }

    fn field_shape(&self) -> Vec<usize> {
        std::iter::once(self.n).chain(std::iter::repeat_n(self.m, self.dim)).collect()
    }

    fn face_shape(&self) -> Vec<usize> {
        std::iter::once(self.n).chain(std::iter::repeat_n(self.m, self.dim - 1)).collect()
    }
}

/// One stored sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub k: Vec<f64>,
    pub f: Vec<Complex>,
    pub g: Vec<f64>,
    pub u: Vec<Complex>,
}

impl Sample {
    /// Scatterer-free problem this sample solves.
    pub fn problem(&self, grid: &StructuredGrid) -> ProblemSpec {
        let mut spec = ProblemSpec::scattering(*grid, self.k.clone(), self.g.clone(), ScattererMask::empty(grid));
        spec.f_field = self.f.clone();
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub samples: Vec<Sample>,
}

struct Samplers {
    k: GrfSampler,
    g: GrfSampler,
    f_re: GrfSampler,
    f_im: GrfSampler,
}

impl Samplers {
    fn new(spec: &DatasetSpec, grid: &StructuredGrid) -> Result<Self> {
        let make = |grid: StructuredGrid, params, tag, min_reject| {
            GrfSampler::new(GrfSpec {
                grid,
                params,
                seed: derive_seed(spec.seed, tag),
                min_reject,
            })
        };
        Ok(Self {
            k: make(*grid, spec.k, TAG_K, spec.k_min_reject)?,
            g: make(grid.face_grid()?, spec.g, TAG_G, None)?,
            f_re: make(*grid, spec.f_re, TAG_F_RE, None)?,
            f_im: make(*grid, spec.f_im, TAG_F_IM, None)?,
        })
    }
}

/// Direct solve of an assembled system with banded LU.
pub fn direct_solve(sys: &AssembledSystem) -> Result<Vec<Complex>> {
    BandLuFactorization::new(&sys.matrix)?.solve(&sys.rhs)
}

/// `‖b − A u‖ / ‖b‖`, or `‖b − A u‖` when `b = 0`.
pub fn relative_residual(sys: &AssembledSystem, u: &[Complex]) -> Result<f64> {
    let r = norm2(&sys.residual(u)?);
    let b = norm2(&sys.rhs);
    Ok(if b > 0.0 { r / b } else { r })
}

fn generate_sample(spec: &DatasetSpec, grid: &StructuredGrid, samplers: &Samplers, index: usize) -> Result<Sample> {
    let i = index as u64;
    let (k, _) = samplers.k.sample_wavenumber(i)?;
    let g = if spec.homogeneous_g {
        vec![0.0; grid.face_grid()?.num_nodes()]
    } else {
        samplers.g.sample(i)
    };
    let f: Vec<Complex> = samplers
        .f_re
        .sample(i)
        .into_iter()
        .zip(samplers.f_im.sample(i))
        .map(|(a, b)| Complex::new(a, b))
        .collect();
    let mut sample = Sample { k, f, g, u: Vec::new() };
    let sys = assemble(&sample.problem(grid))?;
    let u = direct_solve(&sys)?;
    let rel = relative_residual(&sys, &u)?;
    if !(rel <= RESIDUAL_TOL) {
        return Err(Error::InvalidArgument(format!(
            "direct solve left relative residual {rel:.3e}"
        )));
    }
    sample.u = u;
    Ok(sample)
}

/// Draws `spec.n` problems without a scatterer and solves each directly.
///
/// Sample `i` depends only on `(seed, i)`, so the result does not depend on
/// the number of worker threads.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let grid = spec.grid()?;
    let samplers = Samplers::new(spec, &grid)?;
    let samples = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            generate_sample(spec, &grid, &samplers, i).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        samples,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_container(&self) -> Result<Container> {
        let s = &self.spec;
        let mut c = Container::new(json!({
            "kind": DATASET_KIND,
            "spec": s,
            "grid": {"dim": s.dim, "m": s.m, "h": 1.0 / (s.m - 1) as f64, "order": "x_fastest"},
            "generator": format!("helmkit {}", env!("CARGO_PKG_VERSION")),
        }));
        let flat = |f: &dyn Fn(&Sample) -> Vec<f64>| self.samples.iter().flat_map(f).collect::<Vec<f64>>();
        let (fs, gs) = (s.field_shape(), s.face_shape());
        c.insert("k", Tensor::f64(fs.clone(), flat(&|x| x.k.clone()))?)?;
        c.insert("f_re", Tensor::f64(fs.clone(), flat(&|x| x.f.iter().map(|v| v.re).collect()))?)?;
        c.insert("f_im", Tensor::f64(fs.clone(), flat(&|x| x.f.iter().map(|v| v.im).collect()))?)?;
        c.insert("g", Tensor::f64(gs, flat(&|x| x.g.clone()))?)?;
        c.insert("u_re", Tensor::f64(fs.clone(), flat(&|x| x.u.iter().map(|v| v.re).collect()))?)?;
        c.insert("u_im", Tensor::f64(fs, flat(&|x| x.u.iter().map(|v| v.im).collect()))?)?;
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.meta.get("kind").and_then(|v| v.as_str()) != Some(DATASET_KIND) {
            return Err(Error::Format("container is not a dataset".into()));
        }
        let spec: DatasetSpec = serde_json::from_value(
            c.meta
                .get("spec")
                .cloned()
                .ok_or_else(|| Error::Format("dataset meta has no spec".into()))?,
        )?;
        spec.validate()?;
        let fetch = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let t = c.get(name)?;
            if t.shape != shape {
                return Err(Error::Format(format!(
                    "dataset tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            Ok(t.to_f64())
        };
        let (fs, gs) = (spec.field_shape(), spec.face_shape());
        let nodes = spec.m.pow(spec.dim as u32);
        let faces = nodes / spec.m;
        let k = fetch("k", &fs)?;
        let f_re = fetch("f_re", &fs)?;
        let f_im = fetch("f_im", &fs)?;
        let g = fetch("g", &gs)?;
        let u_re = fetch("u_re", &fs)?;
        let u_im = fetch("u_im", &fs)?;
        let cplx = |re: &[f64], im: &[f64]| re.iter().zip(im).map(|(a, b)| Complex::new(*a, *b)).collect();
        let samples = (0..spec.n)
            .map(|i| {
                let r = i * nodes..(i + 1) * nodes;
                Sample {
                    k: k[r.clone()].to_vec(),
                    f: cplx(&f_re[r.clone()], &f_im[r.clone()]),
                    g: g[i * faces..(i + 1) * faces].to_vec(),
                    u: cplx(&u_re[r.clone()], &u_im[r]),
                }
            })
            .collect();
        Ok(Self { spec, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

/// `‖u − u_ref‖₂ / ‖u_ref‖₂` over complex entries.
pub fn relative_l2(u: &[Complex], u_ref: &[Complex]) -> Result<f64> {
    if u.len() != u_ref.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            u_ref.len()
        )));
    }
    let denom = norm2(u_ref);
    if denom == 0.0 {
        return Err(Error::InvalidArgument("reference solution is zero".into()));
    }
    Ok(norm2(&sub(u, u_ref)) / denom)
}
