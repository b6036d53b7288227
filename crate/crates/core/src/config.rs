//! JSON problem descriptions and the standard scattering set-ups.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryConditions, BoundaryScheme, ProblemSpec};
use crate::error::{Error, Result};
use crate::grf::{derive_seed, scale_wavenumber, GrfParams, GrfSampler, GrfSpec};
use crate::linalg::Complex;
use crate::mesh::{mask_from_shapes, CapsuleSailParams, Shape, StructuredGrid};

const TAG_K: u64 = 1;
const TAG_G: u64 = 2;
const TAG_F_RE: u64 = 3;
const TAG_F_IM: u64 = 4;

/// Where a real field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSource {
    Constant {
        value: f64,
    },
    /// Sample `index` of a Gaussian random field.
    Grf {
        mean: f64,
        s: f64,
        l: f64,
        #[serde(default)]
        min_reject: Option<f64>,
        #[serde(default)]
        index: u64,
    },
    /// `amplitude · Π sin(freq π x_d)`.
    Sine {
        freq: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Explicit values in grid order.
    Values {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSource {
    pub fn zero() -> Self {
        FieldSource::Constant { value: 0.0 }
    }

    pub fn grf(params: GrfParams) -> Self {
        FieldSource::Grf {
            mean: params.mean,
            s: params.s,
            l: params.l,
            min_reject: None,
            index: 0,
        }
    }

    /// Evaluates on `grid`; GRF sources draw from `seed`.
    pub fn realize(&self, grid: &StructuredGrid, seed: u64) -> Result<Vec<f64>> {
        let n = grid.num_nodes();
        match self {
            FieldSource::Constant { value } => Ok(vec![*value; n]),
            FieldSource::Grf {
                mean,
                s,
                l,
                min_reject,
                index,
            } => {
                let sampler = GrfSampler::new(GrfSpec {
                    grid: *grid,
                    params: GrfParams::new(*mean, *s, *l),
                    seed,
                    min_reject: *min_reject,
                })?;
                Ok(sampler.sample_wavenumber(*index)?.0)
            }
            FieldSource::Sine { freq, amplitude } => Ok((0..n)
                .map(|i| {
                    let x = grid.coords(i);
                    amplitude * x[..grid.dim()].iter().map(|xd| (freq * PI * xd).sin()).product::<f64>()
                })
                .collect()),
            FieldSource::Values { values } => {
                if values.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} explicit values for a grid of {n} nodes",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Serializable description of one Helmholtz problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub dim: usize,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    pub k: FieldSource,
    /// Rescales the realized wave number to this mean.
    #[serde(default)]
    pub k_target_mean: Option<f64>,
    /// Incoming wave on the top face.
    #[serde(default = "FieldSource::zero")]
    pub g: FieldSource,
    #[serde(default = "FieldSource::zero")]
    pub f_re: FieldSource,
    #[serde(default = "FieldSource::zero")]
    pub f_im: FieldSource,
    #[serde(default)]
    pub scatterers: Vec<Shape>,
    #[serde(default)]
    pub boundary: BoundaryConditions,
    #[serde(default)]
    pub scheme: BoundaryScheme,
}

impl ProblemConfig {
    /// 2D wave number: mean 6, `l = 0.3`, `s = 0.5`.
    pub const K_2D: GrfParams = GrfParams::new(6.0, 0.5, 0.3);
    /// 3D wave number: mean 6, `l = 0.3`, `s = 0.2`, rejected at or below 3.
    pub const K_3D: GrfParams = GrfParams::new(6.0, 0.2, 0.3);
    pub const K_3D_FLOOR: f64 = 3.0;
    /// Incoming wave and forcing: mean 0, `l = 0.1`, `s = 1`.
    pub const G_F: GrfParams = GrfParams::new(0.0, 1.0, 0.1);

    /// 2D set-up: `g = sin(3πx)`, zero forcing, GRF wave number, square
    /// scatterer of side 0.25 at the centre.
    pub fn square_2d(m: usize, seed: u64) -> Self {
        Self {
            dim: 2,
            m,
            seed,
            k: FieldSource::grf(Self::K_2D),
            k_target_mean: None,
            g: FieldSource::Sine {
                freq: 3.0,
                amplitude: 1.0,
            },
            f_re: FieldSource::zero(),
            f_im: FieldSource::zero(),
            scatterers: vec![Shape::Cube {
                center: vec![0.5, 0.5],
                side: 0.25,
            }],
            boundary: BoundaryConditions::SCATTERING,
            scheme: BoundaryScheme::GhostNode,
        }
    }

    /// As [`square_2d`](Self::square_2d) with the triangle
    /// (0.375, 0.5), (0.625, 0.5), (0.5, 0.625).
    pub fn triangle_2d(m: usize, seed: u64) -> Self {
        Self {
            scatterers: vec![Shape::Triangle2d {
                vertices: [[0.375, 0.5], [0.625, 0.5], [0.5, 0.625]],
            }],
            ..Self::square_2d(m, seed)
        }
    }

    /// 3D set-up: GRF wave number and incoming wave, zero forcing, centred
    /// cube of side 0.125.
    pub fn cube_3d(m: usize, seed: u64) -> Self {
        Self {
            dim: 3,
            m,
            seed,
            k: FieldSource::Grf {
                mean: Self::K_3D.mean,
                s: Self::K_3D.s,
                l: Self::K_3D.l,
                min_reject: Some(Self::K_3D_FLOOR),
                index: 0,
            },
            k_target_mean: None,
            g: FieldSource::grf(Self::G_F),
            f_re: FieldSource::zero(),
            f_im: FieldSource::zero(),
            scatterers: vec![Shape::Cube {
                center: vec![0.5, 0.5, 0.5],
                side: 0.125,
            }],
            boundary: BoundaryConditions::SCATTERING,
            scheme: BoundaryScheme::GhostNode,
        }
    }

    /// 3D set-up with the capsule-and-sail hull.
    pub fn submarine_3d(m: usize, seed: u64) -> Self {
        Self {
            scatterers: vec![Shape::CapsuleSail {
                params: CapsuleSailParams::default(),
            }],
            ..Self::cube_3d(m, seed)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            for s in &mut cfg.scatterers {
                if let Shape::VoxelFile { path: p } = s {
                    if p.is_relative() {
                        *p = dir.join(&*p);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<StructuredGrid> {
        StructuredGrid::new(self.dim, self.m)
    }

    /// Realizes every field and the scatterer mask.
    pub fn build(&self) -> Result<ProblemSpec> {
        let grid = self.grid()?;
        let mut k = self.k.realize(&grid, derive_seed(self.seed, TAG_K))?;
        if let Some(target) = self.k_target_mean {
            k = scale_wavenumber(&k, target)?;
        }
        let g = if self.dim == 1 {
            match &self.g {
                FieldSource::Constant { value } => vec![*value],
                FieldSource::Values { values } if values.len() == 1 => values.clone(),
                _ => {
                    return Err(Error::InvalidArgument(
                        "1D problems take a constant incoming wave".into(),
                    ))
                }
            }
        } else {
            self.g.realize(&grid.face_grid()?, derive_seed(self.seed, TAG_G))?
        };
        let f_re = self.f_re.realize(&grid, derive_seed(self.seed, TAG_F_RE))?;
        let f_im = self.f_im.realize(&grid, derive_seed(self.seed, TAG_F_IM))?;
        let mask = mask_from_shapes(&grid, &self.scatterers)?;
        let mut spec = ProblemSpec::scattering(grid, k, g, mask);
        spec.f_field = f_re.iter().zip(&f_im).map(|(a, b)| Complex::new(*a, *b)).collect();
        spec.boundary = self.boundary;
        spec.scheme = self.scheme;
        Ok(spec)
    }
}
